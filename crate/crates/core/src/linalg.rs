//! Small dense linear-algebra helpers for the low-dimensional problems this crate handles.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in R^n.
///
/// `basis` is assumed orthonormal. Candidates are the coordinate vectors in
/// order, so axis-aligned subspaces get axis-aligned complements.
pub fn orthogonal_complement(n: usize, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let target = n - basis.len().min(n);
    for i in 0..n {
        if out.len() == target {
            break;
        }
        let mut v = unit(n, i);
        for q in basis.iter().chain(out.iter()) {
            let c = dot(&v, q);
            for (vk, qk) in v.iter_mut().zip(q) {
                *vk -= c * qk;
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            out.push(scale(&v, 1.0 / nv));
        }
    }
    out
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`. Returns `None` when a pivot falls below
/// `1e-13` times the largest entry.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pval <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for k in r + 1..n {
            s -= m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    Some(x)
}

/// Least-squares solution of the `rows x cols` system `a x = b` (rows >= cols)
/// through the normal equations. Returns the solution and the residual norm.
pub fn least_squares(a: &[f64], b: &[f64], rows: usize, cols: usize) -> Option<(Vec<f64>, f64)> {
    let mut ata = vec![0.0; cols * cols];
    let mut atb = vec![0.0; cols];
    for i in 0..cols {
        for j in 0..cols {
            ata[i * cols + j] = (0..rows).map(|r| a[r * cols + i] * a[r * cols + j]).sum();
        }
        atb[i] = (0..rows).map(|r| a[r * cols + i] * b[r]).sum();
    }
    let x = solve(&ata, &atb, cols)?;
    let res = (0..rows)
        .map(|r| {
            let v: f64 = (0..cols).map(|c| a[r * cols + c] * x[c]).sum::<f64>() - b[r];
            v * v
        })
        .sum::<f64>()
        .sqrt();
    Some((x, res))
}

/// Lexicographic iterator over all `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n || k == 0,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_of_axis_is_other_axes() {
        let c = orthogonal_complement(3, &[unit(3, 2)]);
        assert_eq!(c, vec![unit(3, 0), unit(3, 1)]);
        assert!(orthogonal_complement(2, &[unit(2, 0), unit(2, 1)]).is_empty());
    }

    #[test]
    fn solve_small_system() {
        let x = solve(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn combinations_count() {
        assert_eq!(Combinations::new(5, 3).count(), 10);
        assert_eq!(Combinations::new(3, 3).collect::<Vec<_>>(), vec![vec![0, 1, 2]]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }
}
