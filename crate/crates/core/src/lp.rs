//! Dense two-phase simplex for the small equality-form programs that arise when
//! optimizing linear functionals over convex hulls of generators.
//!
//! Problems have the form `maximize c.x  s.t.  A x = b, x >= 0` with a handful
//! of rows (one per normal direction plus the simplex row) and at most a few
//! dozen columns. Bland's rule keeps pivoting deterministic and cycle-free.

const PIVOT_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Equality-form linear program `maximize c.x, A x = b, x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub cols: usize,
    pub rows: usize,
    /// Row-major `rows x cols`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Phase-one infeasibility tolerance on the residual of `A x = b`.
    pub feas_tol: f64,
}

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.t[pr * w + pc];
        for k in 0..w {
            self.t[pr * w + k] /= p;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for k in 0..w {
                self.t[r * w + k] -= f * self.t[pr * w + k];
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland-rule iterations maximizing `cost` over the allowed columns.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(), ()> {
        let scale = cost.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        for _ in 0..10_000 {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let z: f64 = (0..self.rows).map(|r| cost[self.basis[r]] * self.at(r, j)).sum();
                if cost[j] - z > tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(()),
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
        Err(())
    }
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Self {
        let cols = c.len();
        let rows = b.len();
        assert_eq!(a.len(), rows * cols, "constraint matrix shape");
        LinearProgram {
            cols,
            rows,
            a,
            b,
            c,
            feas_tol: 1e-10,
        }
    }

    pub fn with_feas_tol(mut self, tol: f64) -> Self {
        self.feas_tol = tol;
        self
    }

    pub fn solve(&self) -> LpOutcome {
        self.solve_inner().0
    }

    /// Returns the outcome and whether some nonbasic column has zero reduced
    /// cost at the optimum (alternative optima may exist).
    fn solve_inner(&self) -> (LpOutcome, bool) {
        let (m, n) = (self.rows, self.cols);
        let width = n + m + 1;
        let mut t = vec![0.0; m * width];
        for r in 0..m {
            let sign = if self.b[r] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[r * width + j] = sign * self.a[r * n + j];
            }
            t[r * width + n + r] = 1.0;
            t[r * width + width - 1] = sign * self.b[r];
        }
        let mut tab = Tableau {
            rows: m,
            width,
            t,
            basis: (n..n + m).collect(),
        };

        // phase one: drive the artificial sum to zero
        let mut p1 = vec![0.0; n + m];
        for v in p1.iter_mut().skip(n) {
            *v = -1.0;
        }
        if tab.optimize(&p1, n + m).is_err() {
            return (LpOutcome::Infeasible, false);
        }
        let art: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= n)
            .map(|r| tab.rhs(r).abs())
            .sum();
        if art > self.feas_tol {
            return (LpOutcome::Infeasible, false);
        }
        // pivot remaining artificials out, dropping redundant rows
        let mut r = 0;
        while r < tab.rows {
            if tab.basis[r] >= n {
                let pc = (0..n).find(|&j| tab.at(r, j).abs() > 1e-9);
                match pc {
                    Some(pc) => {
                        tab.pivot(r, pc);
                        r += 1;
                    }
                    None => {
                        let w = tab.width;
                        tab.t.drain(r * w..(r + 1) * w);
                        tab.basis.remove(r);
                        tab.rows -= 1;
                    }
                }
            } else {
                r += 1;
            }
        }

        let mut cost = self.c.clone();
        cost.extend(std::iter::repeat(0.0).take(m));
        if tab.optimize(&cost, n).is_err() {
            return (LpOutcome::Unbounded, false);
        }
        let scale = cost.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let ties = (0..n).any(|j| {
            !tab.basis.contains(&j) && {
                let z: f64 = (0..tab.rows).map(|r| cost[tab.basis[r]] * tab.at(r, j)).sum();
                (cost[j] - z).abs() <= 1e-10 * scale
            }
        });
        let mut x = vec![0.0; n];
        for r in 0..tab.rows {
            if tab.basis[r] < n {
                x[tab.basis[r]] = tab.rhs(r).max(0.0);
            }
        }
        let value = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        (LpOutcome::Optimal { x, value }, ties)
    }

    /// Solves, then among optimal points returns the lexicographically
    /// smallest `x` (up to `1e-12`-scale optimality slack).
    pub fn solve_lexmin(&self) -> LpOutcome {
        let (first, ties) = self.solve_inner();
        let LpOutcome::Optimal { value, .. } = first else {
            return first;
        };
        if !ties {
            return first;
        }
        let (m, n) = (self.rows, self.cols);
        let slack = 1e-12 * (1.0 + value.abs());
        // rows: original m, optimality row, then one cap row per fixed coordinate
        let mut fixed: Vec<f64> = Vec::with_capacity(n);
        let mut best = first.clone();
        for i in 0..n {
            let extra = 1 + fixed.len();
            let cols = n + extra;
            let rows = m + extra;
            let mut a = vec![0.0; rows * cols];
            let mut b = vec![0.0; rows];
            for r in 0..m {
                a[r * cols..r * cols + n].copy_from_slice(&self.a[r * n..(r + 1) * n]);
                b[r] = self.b[r];
            }
            // c.x - s = value - slack
            a[m * cols..m * cols + n].copy_from_slice(&self.c);
            a[m * cols + n] = -1.0;
            b[m] = value - slack;
            for (k, v) in fixed.iter().enumerate() {
                let r = m + 1 + k;
                a[r * cols + k] = 1.0;
                a[r * cols + n + 1 + k] = 1.0;
                b[r] = v + 1e-12;
            }
            let mut c = vec![0.0; cols];
            c[i] = -1.0;
            let lp = LinearProgram::new(c, a, b).with_feas_tol(self.feas_tol);
            match lp.solve() {
                LpOutcome::Optimal { x, .. } => {
                    fixed.push(x[i]);
                    let xs = x[..n].to_vec();
                    let value = self.c.iter().zip(&xs).map(|(c, x)| c * x).sum();
                    best = LpOutcome::Optimal { x: xs, value };
                }
                _ => break,
            }
        }
        best
    }
}
