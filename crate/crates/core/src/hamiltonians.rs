//! Full and tangential Hamiltonians over generator hulls, and sampled checks of
//! the normal-controllability, tangential-continuity and Lipschitz assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{localize_jump, tangential_restriction, BLMap, GeneratorSet};
use crate::geometry::{build_samples, probe_directions, FlatStratification, Stratum};
use crate::hull::hausdorff;
use crate::linalg::{dist, dot, norm};
use crate::lp::{LinearProgram, LpOutcome};
use crate::report::{CheckReport, SiteRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianValue {
    /// `f64::NEG_INFINITY` when the feasible set is empty.
    pub value: f64,
    /// Optimal mixture weights over the generators (empty when infeasible).
    pub mu: Vec<f64>,
    pub active_velocity: Vec<f64>,
    pub active_cost: f64,
}

impl HamiltonianValue {
    fn infeasible(dim: usize) -> Self {
        HamiltonianValue {
            value: f64::NEG_INFINITY,
            mu: Vec::new(),
            active_velocity: vec![0.0; dim],
            active_cost: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `H(p) = max over generators of -b.p - l`. Ties go to the later generator,
/// which is the lexicographically smallest vertex mixture.
pub fn hamiltonian_full(gs: &GeneratorSet, p: &[f64]) -> HamiltonianValue {
    assert!(!gs.is_empty(), "hamiltonian of an empty generator set");
    let mut best = 0;
    let mut value = f64::NEG_INFINITY;
    for (j, (b, l)) in gs.iter().enumerate() {
        let v = -dot(b, p) - l;
        if v >= value {
            value = v;
            best = j;
        }
    }
    let mut mu = vec![0.0; gs.len()];
    mu[best] = 1.0;
    HamiltonianValue {
        value,
        mu,
        active_velocity: gs.velocity(best).to_vec(),
        active_cost: gs.cost(best),
    }
}

/// `H^k(p) = sup { -b.p - l : (b, l) in hull, b normal to the stratum vanishes }`,
/// evaluated with `p_top` only.
pub fn hamiltonian_tangential(gs: &GeneratorSet, s: &Stratum, p: &[f64]) -> HamiltonianValue {
    assert!(!gs.is_empty(), "hamiltonian of an empty generator set");
    let (p_top, _) = s.split_covector(p);
    let mut objective: Vec<f64> = p_top.iter().map(|v| -v).collect();
    objective.push(-1.0);
    let r = tangential_restriction(gs, s);
    match r.maximize(&objective) {
        None => HamiltonianValue::infeasible(gs.dim()),
        Some((value, mu)) => {
            let point = gs.mix(&mu);
            HamiltonianValue {
                value,
                mu,
                active_velocity: point[..gs.dim()].to_vec(),
                active_cost: point[gs.dim()],
            }
        }
    }
}

/// `-min { l : (0, l) in hull }` over the enumerated vertices of the
/// tangential restriction at a zero-dimensional stratum.
pub fn h0_by_vertices(gs: &GeneratorSet, s: &Stratum) -> f64 {
    let v = tangential_restriction(gs, s).vertices();
    -v.iter().map(|(_, l)| l).fold(f64::INFINITY, f64::min)
}

/// Per-stratum constants gathered by the assumption checks, with the site-level report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub report: CheckReport,
    /// `(stratum id, certified delta)` for every stratum below top dimension.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nc_delta: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tc_constant: Option<f64>,
    /// `(stratum id, largest sampled m)` where `m = |H^j(y1, 0) - H^j(y2, 0)|`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tc_modulus: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_constant: Option<f64>,
    #[serde(default)]
    pub unbounded: bool,
}

impl AssumptionReport {
    fn new(report: CheckReport) -> Self {
        AssumptionReport {
            report,
            nc_delta: Vec::new(),
            tc_constant: None,
            tc_modulus: Vec::new(),
            lp_constant: None,
            unbounded: false,
        }
    }

    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

/// Velocity part of a generator set as hull points in `R^N`.
fn velocities(gs: &GeneratorSet) -> Vec<Vec<f64>> {
    gs.iter().map(|(b, _)| b.to_vec()).collect()
}

/// Whether `delta * d` lies in the hull of the velocity points.
fn velocity_member(vel: &[Vec<f64>], d: &[f64], delta: f64) -> bool {
    let n = vel.len();
    let dim = d.len();
    let scale = vel.iter().map(|b| norm(b)).fold(1.0, f64::max);
    let mut a = vec![0.0; (dim + 1) * n];
    for (j, b) in vel.iter().enumerate() {
        for k in 0..dim {
            a[k * n + j] = b[k] / scale;
        }
        a[dim * n + j] = 1.0;
    }
    let mut rhs: Vec<f64> = d.iter().map(|v| delta * v / scale).collect();
    rhs.push(1.0);
    let lp = LinearProgram::new(vec![0.0; n], a, rhs).with_feas_tol(1e-10);
    matches!(lp.solve(), LpOutcome::Optimal { .. })
}

/// Largest `delta <= target` with `delta * d` in the hull, by bisection.
fn certified_delta(vel: &[Vec<f64>], d: &[f64], target: f64) -> f64 {
    if velocity_member(vel, d, target) {
        return target;
    }
    let (mut lo, mut hi) = (0.0, target);
    if !velocity_member(vel, d, 0.0) {
        return 0.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if velocity_member(vel, d, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn random_covector(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-radius..=radius)).collect()
}

fn unit_covector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let p = random_covector(rng, n, 1.0);
        let r = norm(&p);
        if r > 1e-3 && r <= 1.0 {
            return p.iter().map(|v| v / r).collect();
        }
    }
}

/// Normal controllability on sets: for each lower stratum, every probed unit
/// normal direction `d` must satisfy `delta d in B(y)` at the stratum samples
/// and at nearby points `y = x + (h/2) u`. Also samples the Hamiltonian form
/// `H(y, p) >= delta |p_bot| - C_2 (1 + |p_top|)` with `C_2 = max|b| + max|l|`.
pub fn check_nc(
    map: &BLMap,
    strat: &FlatStratification,
    delta_target: f64,
    sample_density: f64,
    seed: u64,
) -> AssumptionReport {
    assert!(delta_target > 0.0 && sample_density > 0.0);
    let h = 1.0 / sample_density;
    let samples = build_samples(strat, h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("nc", 0.0);
    let mut deltas = Vec::new();
    for (si, s) in strat.strata.iter().enumerate() {
        if s.dim == strat.dimension {
            continue;
        }
        let dirs = probe_directions(s.normal_basis());
        let mut delta = delta_target;
        let mut witness: Vec<Vec<f64>> = Vec::new();
        let mut eval_fail: Option<Vec<f64>> = None;
        let mut ham_violation = 0.0f64;
        let mut ham_witness: Vec<Vec<f64>> = Vec::new();
        let mut points: Vec<Vec<f64>> = Vec::new();
        for x in &samples.on[si] {
            points.push(x.clone());
            for u in &dirs {
                let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + 0.5 * h * b).collect();
                if strat.in_box(&y) {
                    points.push(y);
                }
            }
        }
        let mut sets = Vec::with_capacity(points.len());
        for y in &points {
            match map.evaluate(strat, y, 0.0) {
                Ok(gs) => sets.push(gs),
                Err(_) => {
                    eval_fail.get_or_insert_with(|| y.clone());
                }
            }
        }
        if let Some(y) = eval_fail {
            report.push(SiteRecord::new(format!("evaluate-{}", s.id), y, 1.0).on_stratum(s.id));
            continue;
        }
        let c2 = sets
            .iter()
            .map(|g| g.max_speed() + g.max_abs_cost())
            .fold(0.0, f64::max);
        for (y, gs) in points.iter().zip(&sets) {
            let vel = velocities(gs);
            for d in &dirs {
                let got = certified_delta(&vel, d, delta_target);
                if got < delta {
                    delta = got;
                    witness = vec![y.clone(), d.clone()];
                }
            }
        }
        for (y, gs) in points.iter().zip(&sets) {
            for _ in 0..4 {
                let p = random_covector(&mut rng, strat.dimension, 10.0);
                let (pt, pb) = s.split_covector(&p);
                let rhs = delta * norm(&pb) - c2 * (1.0 + norm(&pt));
                let v = rhs - hamiltonian_full(gs, &p).value;
                if v > ham_violation {
                    ham_violation = v;
                    ham_witness = vec![y.clone(), p];
                }
            }
        }
        let certified = if delta >= 1e-6 { delta } else { 0.0 };
        let loc = witness.first().cloned().unwrap_or_else(|| s.basepoint.clone());
        report.push(
            SiteRecord::new(format!("nc-bl-{}", s.id), loc, if certified > 0.0 { 0.0 } else { 1.0 })
                .on_stratum(s.id)
                .with_witness(if certified > 0.0 { Vec::new() } else { witness }),
        );
        let loc = ham_witness.first().cloned().unwrap_or_else(|| s.basepoint.clone());
        report.push(
            SiteRecord::new(format!("nc-hamiltonian-{}", s.id), loc, ham_violation)
                .on_stratum(s.id)
                .with_witness(ham_witness),
        );
        report.note(format!("nc_delta_{}", s.id), certified);
        report.note(format!("nc_c2_{}", s.id), c2);
        deltas.push((s.id, certified));
    }
    let mut out = AssumptionReport::new(report.finish());
    out.nc_delta = deltas;
    out
}

/// Tangential continuity: pairs `y1, y2` on the same stratum, one sample step
/// apart along each tangent direction; fits the smallest `C_1` with
/// `|H^j(y1,p) - H^j(y2,p)| <= C_1 |y1 - y2| |p| + m` over unit `p` and one
/// large `|p|`, and the Hausdorff form for the velocity sets. A jump of the
/// tangential restriction inside a stratum is reported as an unbounded fit.
pub fn check_tc(map: &BLMap, strat: &FlatStratification, sample_density: f64, seed: u64) -> AssumptionReport {
    assert!(sample_density > 0.0);
    let h = 1.0 / sample_density;
    let samples = build_samples(strat, h);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("tc", 0.0);
    let mut c1_all = 0.0f64;
    let mut moduli = Vec::new();
    let mut unbounded = false;
    for (si, s) in strat.strata.iter().enumerate() {
        if s.dim == 0 {
            continue;
        }
        let mut ps: Vec<Vec<f64>> = (0..6).map(|_| unit_covector(&mut rng, strat.dimension)).collect();
        let big: Vec<f64> = unit_covector(&mut rng, strat.dimension).iter().map(|v| 100.0 * v).collect();
        ps.push(big);
        let restrict = |y: &[f64]| -> Option<Vec<Vec<f64>>> {
            let gs = map.evaluate(strat, y, 0.0).ok()?;
            let v = tangential_restriction(&gs, s).vertices();
            (!v.is_empty()).then(|| v.rows())
        };
        let on_s = |y: &[f64]| matches!(strat.locate(y), Ok(l) if l.id == s.id);
        let (mut c1, mut c1_bl, mut modulus) = (0.0f64, 0.0f64, 0.0f64);
        let mut jump: Option<Vec<Vec<f64>>> = None;
        for y1 in &samples.on[si] {
            let Ok(g1) = map.evaluate(strat, y1, 0.0) else { continue };
            for v in &s.tangent_basis {
                let y2: Vec<f64> = y1.iter().zip(v).map(|(a, b)| a + h * b).collect();
                if !on_s(&y2) {
                    continue;
                }
                let Ok(g2) = map.evaluate(strat, &y2, 0.0) else { continue };
                let d = dist(y1, &y2);
                let h1 = |p: &[f64]| hamiltonian_tangential(&g1, s, p).value;
                let h2 = |p: &[f64]| hamiltonian_tangential(&g2, s, p).value;
                let zero = vec![0.0; strat.dimension];
                let (a0, b0) = (h1(&zero), h2(&zero));
                if !a0.is_finite() || !b0.is_finite() {
                    continue;
                }
                let m = (a0 - b0).abs();
                modulus = modulus.max(m);
                for p in &ps {
                    let diff = (h1(p) - h2(p)).abs();
                    c1 = c1.max(((diff - m) / (d * norm(p))).max(0.0));
                }
                c1_bl = c1_bl.max(hausdorff(&velocities(&g1), &velocities(&g2)) / d);
                if jump.is_none() {
                    if let (Some(r1), Some(r2)) = (restrict(y1), restrict(&y2)) {
                        let dh = hausdorff(&r1, &r2);
                        if dh > 1e-9 {
                            jump = localize_jump(y1.clone(), y2.clone(), dh, &restrict);
                        }
                    }
                }
            }
        }
        let failed = jump.is_some();
        unbounded |= failed;
        let loc = jump
            .as_ref()
            .map(|w| w[0].clone())
            .unwrap_or_else(|| s.basepoint.clone());
        report.push(
            SiteRecord::new(format!("tc-{}", s.id), loc, if failed { 1.0 } else { 0.0 })
                .on_stratum(s.id)
                .with_witness(jump.unwrap_or_default()),
        );
        report.note(format!("tc_c1_{}", s.id), c1);
        report.note(format!("tc_bl_c1_{}", s.id), c1_bl);
        report.note(format!("tc_modulus_{}", s.id), modulus);
        c1_all = c1_all.max(c1);
        moduli.push((s.id, modulus));
    }
    let mut out = AssumptionReport::new(report.finish());
    out.tc_constant = Some(c1_all);
    out.tc_modulus = moduli;
    out.unbounded = unbounded;
    out
}

/// `C_3 = max |b|` over all sampled evaluations; sampled pairs `p, q` confirm
/// `|H(p) - H(q)| <= C_3 |p - q|`.
pub fn check_lp_constant(map: &BLMap, strat: &FlatStratification, sample_density: f64, seed: u64) -> AssumptionReport {
    assert!(sample_density > 0.0);
    let samples = build_samples(strat, 1.0 / sample_density);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("lp", 1e-9);
    let mut sets = Vec::new();
    for pts in &samples.on {
        for y in pts {
            match map.evaluate(strat, y, 0.0) {
                Ok(gs) => sets.push((y.clone(), gs)),
                Err(_) => report.push(SiteRecord::new("evaluate", y.clone(), f64::INFINITY)),
            }
        }
    }
    let c3 = sets.iter().map(|(_, g)| g.max_speed()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut witness = Vec::new();
    for (y, gs) in &sets {
        let p = random_covector(&mut rng, strat.dimension, 5.0);
        let q = random_covector(&mut rng, strat.dimension, 5.0);
        let excess = (hamiltonian_full(gs, &p).value - hamiltonian_full(gs, &q).value).abs() - c3 * dist(&p, &q);
        if excess > worst {
            worst = excess;
            witness = vec![y.clone(), p, q];
        }
    }
    let loc = witness.first().cloned().unwrap_or_default();
    report.push(SiteRecord::new("lipschitz-in-p", loc, worst.max(0.0)).with_witness(witness));
    report.note("c3", c3);
    let mut out = AssumptionReport::new(report.finish());
    out.lp_constant = Some(c3);
    out
}
