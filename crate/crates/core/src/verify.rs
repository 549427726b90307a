//! Residual certification of the stratified HJB conditions on computed grids,
//! the multi-step dynamic programming residual, and convergence studies.

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{filippov_regularize, GeneratorSet};
use crate::hamiltonians::{hamiltonian_full, hamiltonian_tangential};
use crate::linalg::{dot, norm, solve};
use crate::report::{CheckReport, SiteRecord};
use crate::solver::{min_over_sequences, node_sets, node_update, solve_value, SolverError, StratifiedProblem, ValueGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("grid misaligned: {0}")]
    GridMisaligned(String),
    #[error("grid does not match the problem: {0}")]
    Mismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn check_grid(grid: &ValueGrid, prob: &StratifiedProblem) -> Result<(), VerifyError> {
    let lat = &grid.lattice;
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    if lat.dim() != prob.strat.dimension || !close(&lat.lo, &prob.strat.lo) || !close(&lat.hi, &prob.strat.hi) {
        return Err(VerifyError::Mismatch("lattice box differs from the problem box".into()));
    }
    if (grid.horizon - prob.horizon).abs() > 1e-9 * prob.horizon {
        return Err(VerifyError::Mismatch(format!(
            "grid horizon {} differs from problem horizon {}",
            grid.horizon, prob.horizon
        )));
    }
    if grid.steps() < 2 {
        return Err(VerifyError::Mismatch("grid needs at least two time steps".into()));
    }
    Ok(())
}

/// Worst site per stratum plus per-stratum counts.
struct StratumTally {
    id: usize,
    sites: usize,
    vacuous: usize,
    worst: Option<SiteRecord>,
}

impl StratumTally {
    fn new(id: usize) -> Self {
        StratumTally { id, sites: 0, vacuous: 0, worst: None }
    }

    fn offer(&mut self, site: SiteRecord) {
        self.sites += 1;
        if self.worst.as_ref().is_none_or(|w| site.residual > w.residual) {
            self.worst = Some(site);
        }
    }

    fn flush(self, report: &mut CheckReport) {
        report.note(format!("sites_{}", self.id), self.sites as f64);
        if self.vacuous > 0 {
            report.note(format!("vacuous_{}", self.id), self.vacuous as f64);
        }
        if let Some(w) = self.worst {
            report.note(format!("max_residual_{}", self.id), w.residual);
            report.push(w);
        }
    }
}

/// Stratum of each node and, per stratum, its lattice stencil directions.
fn node_strata(grid: &ValueGrid, prob: &StratifiedProblem) -> Result<(Vec<usize>, Vec<Vec<Vec<i64>>>), VerifyError> {
    let lat = &grid.lattice;
    let mut dirs = Vec::new();
    for s in &prob.strat.strata {
        match lat.directions(s) {
            Some(d) => dirs.push(d),
            None => {
                return Err(VerifyError::GridMisaligned(format!(
                    "stratum {} carries no lattice line",
                    s.id
                )))
            }
        }
    }
    let mut which = Vec::with_capacity(lat.node_count());
    for i in 0..lat.node_count() {
        let x = lat.node(i);
        let s = prob
            .strat
            .locate(&x)
            .map_err(|e| VerifyError::GridMisaligned(e.to_string()))?;
        which.push(prob.strat.strata.iter().position(|t| t.id == s.id).expect("located stratum"));
    }
    Ok((which, dirs))
}

/// Subsolution residuals `phi_t + H^k(x, D phi)` at interior nodes and
/// interior times, with the backward time difference. The tangential gradient
/// comes from one-sided differences along the stratum's lattice directions and
/// the residual is the smallest over the `2^k` forward/backward choices, the
/// counterpart of the largest taken in [`viscosity_super_check`]; at a concave
/// kink this pairs the time difference with the slope on its own side.
/// Where the forward slope along some direction exceeds the backward slope
/// by more than `tol` the discrete superdifferential is empty and the node is
/// counted as vacuous. `H^0` at points, the full `H` in open regions. Nodes whose tangential
/// restriction is empty are vacuous.
/// One site per stratum carries the worst residual; `h0_<id>` records the
/// `H^0` value used at each zero-dimensional stratum.
pub fn viscosity_sub_check(grid: &ValueGrid, prob: &StratifiedProblem, tol: f64) -> Result<CheckReport, VerifyError> {
    check_grid(grid, prob)?;
    let lat = &grid.lattice;
    let (which, dirs) = node_strata(grid, prob)?;
    let sets = node_sets(prob, lat)?;
    let n_dim = prob.strat.dimension;
    let mut tallies: Vec<StratumTally> = prob.strat.strata.iter().map(|s| StratumTally::new(s.id)).collect();
    let mut report = CheckReport::new("viscosity-sub", tol);

    for node in 0..lat.node_count() {
        let si = which[node];
        let s = &prob.strat.strata[si];
        let stencil: Option<Vec<(usize, usize, Vec<f64>)>> = dirs[si]
            .iter()
            .map(|v| {
                let minus: Vec<i64> = v.iter().map(|k| -k).collect();
                let w: Vec<f64> = v.iter().zip(&lat.dx).map(|(k, h)| *k as f64 * h).collect();
                Some((lat.shifted(node, v)?, lat.shifted(node, &minus)?, w))
            })
            .collect();
        let Some(stencil) = stencil else { continue };
        let x = lat.node(node);
        let gs = &sets[node];
        let h0 = (s.dim == 0).then(|| hamiltonian_tangential(gs, s, &vec![0.0; n_dim]).value);
        if let Some(h) = h0 {
            report.note(format!("h0_{}", s.id), h);
        }
        // tangent-coordinate system: (w_j . t_i) c_i = D_j
        let k = s.dim;
        let mut m = vec![0.0; k * k];
        for (j, (_, _, w)) in stencil.iter().enumerate() {
            for (i, t) in s.tangent_basis.iter().enumerate() {
                m[j * k + i] = dot(w, t);
            }
        }
        for n in 1..grid.steps() {
            let phi_t = (grid.value(node, n) - grid.value(node, n - 1)) / grid.dt;
            let h = if let Some(h) = h0 {
                h
            } else {
                let u = grid.value(node, n);
                let convex_kink = stencil.iter().any(|(up, down, w)| {
                    let jump = grid.value(*up, n) - 2.0 * u + grid.value(*down, n);
                    jump > tol * norm(w)
                });
                if convex_kink {
                    tallies[si].vacuous += 1;
                    continue;
                }
                let mut best = f64::INFINITY;
                for mask in 0..1usize << k {
                    let rhs: Vec<f64> = stencil
                        .iter()
                        .enumerate()
                        .map(|(j, (up, down, _))| {
                            if mask >> j & 1 == 1 {
                                grid.value(*up, n) - u
                            } else {
                                u - grid.value(*down, n)
                            }
                        })
                        .collect();
                    let c = solve(&m, &rhs, k).ok_or_else(|| {
                        VerifyError::GridMisaligned(format!("degenerate stencil on stratum {}", s.id))
                    })?;
                    let mut p = vec![0.0; n_dim];
                    for (ci, t) in c.iter().zip(&s.tangent_basis) {
                        for (pk, tk) in p.iter_mut().zip(t) {
                            *pk += ci * tk;
                        }
                    }
                    let hv = if k == n_dim {
                        hamiltonian_full(gs, &p).value
                    } else {
                        hamiltonian_tangential(gs, s, &p).value
                    };
                    best = best.min(hv);
                }
                best
            };
            if h == f64::NEG_INFINITY {
                tallies[si].vacuous += 1;
                continue;
            }
            tallies[si].offer(
                SiteRecord::new(format!("stratum-{}", s.id), x.clone(), phi_t + h)
                    .at_time(grid.time(n))
                    .on_stratum(s.id),
            );
        }
    }
    for t in tallies {
        t.flush(&mut report);
    }
    Ok(report.finish())
}

/// Supersolution residuals: at every interior node, `u_t + H(x, p)` is
/// maximized over the `2^N` one-sided difference gradients `p` (forward or
/// backward per axis, which at stratum nodes are the one-sided normal
/// differences from the adjacent regions), using the node's hull set. The
/// residual is the negated maximum, so a site passes when `u_t + H >= -tol`.
pub fn viscosity_super_check(grid: &ValueGrid, prob: &StratifiedProblem, tol: f64) -> Result<CheckReport, VerifyError> {
    check_grid(grid, prob)?;
    let lat = &grid.lattice;
    let (which, _) = node_strata(grid, prob)?;
    let sets = node_sets(prob, lat)?;
    let n_dim = prob.strat.dimension;
    let mut tallies: Vec<StratumTally> = prob.strat.strata.iter().map(|s| StratumTally::new(s.id)).collect();
    let mut report = CheckReport::new("viscosity-super", tol);
    for node in 0..lat.node_count() {
        let mut nb = Vec::with_capacity(n_dim);
        for i in 0..n_dim {
            let mut e = vec![0i64; n_dim];
            e[i] = 1;
            let up = lat.shifted(node, &e);
            e[i] = -1;
            let down = lat.shifted(node, &e);
            nb.push((up, down));
        }
        if nb.iter().any(|(u, d)| u.is_none() || d.is_none()) {
            continue;
        }
        let si = which[node];
        let x = lat.node(node);
        for n in 1..grid.steps() {
            let u = grid.value(node, n);
            let u_t = (u - grid.value(node, n - 1)) / grid.dt;
            let mut best = f64::NEG_INFINITY;
            for mask in 0..1usize << n_dim {
                let p: Vec<f64> = (0..n_dim)
                    .map(|i| {
                        let (up, down) = nb[i];
                        if mask >> i & 1 == 1 {
                            (grid.value(up.unwrap(), n) - u) / lat.dx[i]
                        } else {
                            (u - grid.value(down.unwrap(), n)) / lat.dx[i]
                        }
                    })
                    .collect();
                best = best.max(u_t + hamiltonian_full(&sets[node], &p).value);
            }
            let s = &prob.strat.strata[si];
            tallies[si].offer(
                SiteRecord::new(format!("stratum-{}", s.id), x.clone(), -best)
                    .at_time(grid.time(n))
                    .on_stratum(s.id),
            );
        }
    }
    for t in tallies {
        t.flush(&mut report);
    }
    Ok(report.finish())
}

/// Deterministic DPP sites: every `stride`-th node of the inner half box at
/// slices `tau_steps`, the middle slice and the last slice.
pub fn default_dpp_sites(grid: &ValueGrid, tau_steps: usize, per_axis: usize) -> Vec<(Vec<f64>, usize)> {
    let lat = &grid.lattice;
    let nt = grid.steps();
    let mut times = vec![tau_steps.min(nt), (nt / 2).max(tau_steps.min(nt)), nt];
    times.dedup();
    let inner: Vec<usize> = (0..lat.node_count())
        .filter(|&i| in_inner_half(grid, &lat.node(i)))
        .collect();
    let stride = (inner.len() as f64 / (per_axis.pow(lat.dim() as u32)) as f64).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for &n in &times {
        for i in inner.iter().step_by(stride) {
            out.push((lat.node(*i), n));
        }
    }
    out
}

fn in_inner_half(grid: &ValueGrid, x: &[f64]) -> bool {
    let lat = &grid.lattice;
    x.iter().enumerate().all(|(i, v)| {
        let c = 0.5 * (lat.lo[i] + lat.hi[i]);
        (v - c).abs() <= 0.25 * (lat.hi[i] - lat.lo[i]) + 1e-12
    })
}

/// Largest gap between interpolating the scheme and applying it off-node:
/// `max |I[U_k](y) - S_k(y)|` over slices `k >= 1` and `sub^N` points per cell,
/// where `S_k(y)` is the one-step update evaluated at `y`.
pub fn interpolation_bound(grid: &ValueGrid, prob: &StratifiedProblem, sub: usize) -> Result<f64, VerifyError> {
    let lat = &grid.lattice;
    let n_dim = lat.dim();
    let mut offsets: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..n_dim {
        let mut next = Vec::new();
        for o in &offsets {
            for j in 0..sub {
                let mut q = o.clone();
                q.push((j as f64 + 0.5) / sub as f64);
                next.push(q);
            }
        }
        offsets = next;
    }
    let mut points = Vec::new();
    for node in 0..lat.node_count() {
        let m = lat.multi_index(node);
        if m.iter().zip(&lat.shape).any(|(k, n)| k + 1 >= *n) {
            continue;
        }
        let base = lat.node(node);
        for o in &offsets {
            points.push(base.iter().zip(o).zip(&lat.dx).map(|((b, f), h)| b + f * h).collect::<Vec<f64>>());
        }
    }
    let sets: Vec<GeneratorSet> = points
        .par_iter()
        .map(|y| prob.map.evaluate(&prob.strat, y, 0.0))
        .collect::<Result<_, _>>()
        .map_err(SolverError::from)?;
    let worst = (1..=grid.steps())
        .into_par_iter()
        .map(|k| {
            let prev = grid.slice(k - 1);
            let cur = grid.slice(k);
            points
                .iter()
                .zip(&sets)
                .map(|(y, gs)| (lat.interpolate(cur, y) - node_update(lat, prev, y, gs, grid.dt).0).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Multi-step dynamic programming residual
/// `I[U](x, t_n) - min over sequences of tau_steps generators of sum dt l + I[U](X, t_{n - tau_steps})`.
/// A site passes when `|residual| <= tau_steps * bound + 1e-12`, with the
/// per-step interpolation bound from [`interpolation_bound`]. The report
/// tolerance is the aggregate bound; residuals are stored as absolute values
/// and the signed extremes are in the summary.
pub fn dpp_check(
    grid: &ValueGrid,
    prob: &StratifiedProblem,
    tau_steps: usize,
    sites: &[(Vec<f64>, usize)],
) -> Result<CheckReport, VerifyError> {
    check_grid(grid, prob)?;
    let bound = interpolation_bound(grid, prob, 4)?;
    dpp_check_bounded(grid, prob, tau_steps, sites, bound)
}

/// [`dpp_check`] with a precomputed per-step interpolation bound, so several
/// `tau_steps` can share one bound computation.
pub fn dpp_check_bounded(
    grid: &ValueGrid,
    prob: &StratifiedProblem,
    tau_steps: usize,
    sites: &[(Vec<f64>, usize)],
    bound: f64,
) -> Result<CheckReport, VerifyError> {
    if tau_steps == 0 {
        return Err(VerifyError::Precondition("tau_steps must be at least 1".into()));
    }
    check_grid(grid, prob)?;
    let tol = tau_steps as f64 * bound + 1e-12;
    let mut report = CheckReport::new(format!("dpp-{tau_steps}"), tol);
    report.note("per_step_bound", bound);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (x, n) in sites {
        if *n < tau_steps || *n > grid.steps() {
            return Err(VerifyError::Precondition(format!(
                "site time index {n} outside {tau_steps}..={}",
                grid.steps()
            )));
        }
        let target = n - tau_steps;
        let rhs = min_over_sequences(prob, x, grid.dt, tau_steps, &|y| grid.interp(y, target))?;
        let r = grid.interp(x, *n) - rhs;
        lo = lo.min(r);
        hi = hi.max(r);
        report.push(SiteRecord::new("site", x.clone(), r.abs()).at_time(grid.time(*n)));
    }
    report.note("min_signed_residual", lo);
    report.note("max_signed_residual", hi);
    Ok(report.finish())
}

fn inner_max_diff(a: &ValueGrid, b: &ValueGrid) -> f64 {
    let lat = &a.lattice;
    let inner: Vec<usize> = (0..lat.node_count())
        .filter(|&i| in_inner_half(a, &lat.node(i)))
        .collect();
    (0..a.slices())
        .map(|n| inner.iter().map(|&i| (a.value(i, n) - b.value(i, n)).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Solves with the Filippov-regularized map for each `eps` and with the
/// original map; `e(eps)` is the largest inner-half-box difference over all
/// nodes and slices. Passes when `e` is nonincreasing along `eps_list` up to
/// 10% slack and `e(eps_min) <= tol`.
pub fn filippov_study(
    prob: &StratifiedProblem,
    eps_list: &[f64],
    dx: f64,
    dt: f64,
    samples_per_eps: usize,
    tol: f64,
) -> Result<CheckReport, VerifyError> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|e| *e <= 0.0) {
        return Err(VerifyError::Precondition("eps_list must be positive and decreasing".into()));
    }
    if let Some(e) = eps_list.iter().find(|e| **e < 2.0 * dx * (1.0 - 1e-12)) {
        return Err(VerifyError::Precondition(format!("eps = {e} is below 2 dx = {}", 2.0 * dx)));
    }
    let base = solve_value(prob, dx, dt)?;
    let mut report = CheckReport::new("filippov", tol);
    let mut errors = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let reg = prob.with_map(filippov_regularize(&prob.map, eps, samples_per_eps));
        let grid = solve_value(&reg, dx, dt)?;
        let e = inner_max_diff(&grid, &base);
        report.note(format!("e({eps})"), e);
        errors.push(e);
    }
    for (i, (&eps, &e)) in eps_list.iter().zip(&errors).enumerate() {
        let monotone = i == 0 || e <= 1.1 * errors[i - 1];
        let last = i + 1 == errors.len();
        let pass = monotone && (!last || e <= tol);
        let mut site = SiteRecord::new(format!("eps={eps}"), Vec::new(), e);
        site.pass = pass;
        report.sites.push(site);
    }
    Ok(report.finish())
}

/// Solves at `(dx1, dt1)`, `(dx2, dt2)` and one further refinement by the same
/// ratio, and compares consecutive levels on the coarser level's nodes and
/// slices inside the inner half box. Passes when the second difference is
/// smaller than the first by a factor of at least 1.4, or the first is at
/// round-off level.
pub fn scheme_agreement(
    prob: &StratifiedProblem,
    dx1: f64,
    dt1: f64,
    dx2: f64,
    dt2: f64,
) -> Result<CheckReport, VerifyError> {
    if dx2 > dx1 || dt2 > dt1 {
        return Err(VerifyError::Precondition("second resolution must be finer".into()));
    }
    let r = dx2 / dx1;
    let levels = [(dx1, dt1), (dx2, dt2), (dx2 * r, dt2 * dt2 / dt1)];
    let grids: Vec<ValueGrid> = levels
        .iter()
        .map(|&(dx, dt)| solve_value(prob, dx, dt))
        .collect::<Result<_, _>>()?;
    let d1 = coarse_diff(&grids[0], &grids[1])?;
    let d2 = coarse_diff(&grids[1], &grids[2])?;
    // differences at round-off level count as agreement
    let agree = d1 <= 1e-12;
    let ratio = if agree { f64::INFINITY } else { d1 / d2 };
    let mut report = CheckReport::new("scheme-agreement", 0.0);
    report.note("d1", d1);
    report.note("d2", d2);
    report.note("ratio", ratio);
    let mut site = SiteRecord::new("refinement", Vec::new(), d1);
    site.pass = agree || ratio >= 1.4;
    report.sites.push(site);
    Ok(report.finish())
}

/// Max difference on the coarse grid's inner nodes and slices that the fine
/// grid also carries.
pub fn coarse_diff(coarse: &ValueGrid, fine: &ValueGrid) -> Result<f64, VerifyError> {
    let cl = &coarse.lattice;
    let fl = &fine.lattice;
    let mut map = Vec::new();
    for i in 0..cl.node_count() {
        let x = cl.node(i);
        if !in_inner_half(coarse, &x) {
            continue;
        }
        let m: Option<Vec<usize>> = x
            .iter()
            .enumerate()
            .map(|(a, v)| {
                let s = (v - fl.lo[a]) / fl.dx[a];
                let k = s.round();
                ((s - k).abs() < 1e-6).then_some(k as usize)
            })
            .collect();
        let m = m.ok_or_else(|| VerifyError::Mismatch("coarse node not on the fine lattice".into()))?;
        map.push((i, fl.flat_index(&m)));
    }
    let mut worst = 0.0f64;
    for n in 0..coarse.slices() {
        let t = coarse.time(n);
        let s = t / fine.dt;
        let k = s.round();
        if (s - k).abs() > 1e-6 {
            continue;
        }
        let k = k as usize;
        for &(ci, fi) in &map {
            worst = worst.max((coarse.value(ci, n) - fine.value(fi, k)).abs());
        }
    }
    Ok(worst)
}
