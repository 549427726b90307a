//! Set-valued dynamics-cost maps represented by finite generator lists.
//!
//! A [`GeneratorSet`] stands for the convex hull of its `(b, l)` rows. A
//! [`BLMap`] assigns such sets to the open regions of a stratification, closes
//! them on lower strata by taking the hull of the adjacent regions' sets
//! (optionally adding a stratum-specific set), and can be regularized by
//! Filippov blending over an epsilon-ball.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build_samples, FlatStratification, GeometryError, Stratum};
use crate::hull::hausdorff;
use crate::linalg::{dist, dot, least_squares, norm, solve, Combinations};
use crate::lp::{LinearProgram, LpOutcome};
use crate::report::{CheckReport, SiteRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no dynamics rule for region {region}")]
    NoRuleForRegion { region: usize },
    #[error("generator row has length {got}, expected {expected}")]
    RowLength { got: usize, expected: usize },
    #[error("generator list is empty")]
    Empty,
    #[error("{what} bound {value} exceeds the global bound {bound}")]
    BoundViolation { what: String, value: f64, bound: f64 },
}

/// Finite list of `(b, l)` generators; the represented set is their convex hull.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    dim: usize,
    data: Vec<f64>,
}

impl GeneratorSet {
    pub fn empty(dim: usize) -> Self {
        GeneratorSet {
            dim,
            data: Vec::new(),
        }
    }

    /// Builds a set from rows `[b_1, ..., b_N, l]`, dropping duplicates.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self, DynamicsError> {
        let mut gs = GeneratorSet::empty(dim);
        for r in rows {
            if r.len() != dim + 1 {
                return Err(DynamicsError::RowLength {
                    got: r.len(),
                    expected: dim + 1,
                });
            }
            gs.data.extend_from_slice(r);
        }
        if gs.is_empty() {
            return Err(DynamicsError::Empty);
        }
        gs.dedup();
        Ok(gs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, b: &[f64], l: f64) {
        debug_assert_eq!(b.len(), self.dim);
        self.data.extend_from_slice(b);
        self.data.push(l);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.dim]
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.row(i)[self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.data
            .chunks_exact(self.dim + 1)
            .map(move |r| (&r[..self.dim], r[self.dim]))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim + 1).map(|r| r.to_vec()).collect()
    }

    pub fn extend(&mut self, other: &GeneratorSet) {
        self.data.extend_from_slice(&other.data);
    }

    /// Removes rows equal to an earlier row up to a 1e-12 grid, keeping the first.
    pub fn dedup(&mut self) {
        let w = self.dim + 1;
        let mut seen: HashSet<Vec<i64>> = HashSet::with_capacity(self.len());
        let mut out = Vec::with_capacity(self.data.len());
        for r in self.data.chunks_exact(w) {
            let key: Vec<i64> = r.iter().map(|v| (v * 1e12).round() as i64).collect();
            if seen.insert(key) {
                out.extend_from_slice(r);
            }
        }
        self.data = out;
    }

    /// Same generator list up to order.
    fn same_rows(&self, other: &GeneratorSet) -> bool {
        self.len() == other.len() && self.iter().all(|(b, l)| other.iter().any(|(c, m)| b == c && l == m))
    }

    pub fn max_speed(&self) -> f64 {
        self.iter().map(|(b, _)| norm(b)).fold(0.0, f64::max)
    }

    pub fn max_abs_cost(&self) -> f64 {
        self.iter().map(|(_, l)| l.abs()).fold(0.0, f64::max)
    }

    /// Hull membership of `(b, l)` decided by a feasibility program.
    pub fn contains(&self, b: &[f64], l: f64) -> bool {
        let n = self.len();
        let rows = self.dim + 2;
        let scale = 1.0 + self.max_speed().max(self.max_abs_cost());
        let mut a = vec![0.0; rows * n];
        for j in 0..n {
            let r = self.row(j);
            for k in 0..=self.dim {
                a[k * n + j] = r[k] / scale;
            }
            a[(rows - 1) * n + j] = 1.0;
        }
        let mut rhs: Vec<f64> = b.iter().map(|v| v / scale).collect();
        rhs.push(l / scale);
        rhs.push(1.0);
        let lp = LinearProgram::new(vec![0.0; n], a, rhs).with_feas_tol(1e-10);
        matches!(lp.solve(), LpOutcome::Optimal { .. })
    }

    /// Mixture `sum mu_j (b_j, l_j)`.
    pub fn mix(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim + 1];
        for (j, m) in mu.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(self.row(j)) {
                *o += m * r;
            }
        }
        out
    }
}

/// Sub-constraint matrix `(n_r . b_j) / max|b|` plus the simplex row.
fn tangential_rows(gs: &GeneratorSet, normals: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = gs.len();
    let c = normals.len();
    let bscale = gs.max_speed().max(1e-300);
    let mut a = vec![0.0; (c + 1) * n];
    for j in 0..n {
        let b = gs.velocity(j);
        for (r, nr) in normals.iter().enumerate() {
            a[r * n + j] = dot(nr, b) / bscale;
        }
        a[c * n + j] = 1.0;
    }
    let mut rhs = vec![0.0; c + 1];
    rhs[c] = 1.0;
    (a, rhs)
}

/// `BL(x,t)` intersected with `T_x M^k x R`.
#[derive(Clone, Debug)]
pub struct TangentialRestriction {
    base: GeneratorSet,
    normals: Vec<Vec<f64>>,
}

/// Feasibility tolerance for `|(sum mu b)_bot| <= 1e-10 max|b|`; the rows are
/// already divided by `max|b|`.
const TANGENTIAL_TOL: f64 = 1e-10;

impl TangentialRestriction {
    pub fn base(&self) -> &GeneratorSet {
        &self.base
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    /// Maximizes `objective . (b, l)` over the restriction. Returns the value
    /// and the lexicographically smallest optimal mixture, or `None` when the
    /// restriction is empty.
    pub fn maximize(&self, objective: &[f64]) -> Option<(f64, Vec<f64>)> {
        let c: Vec<f64> = (0..self.base.len())
            .map(|j| dot(objective, self.base.row(j)))
            .collect();
        let (a, rhs) = tangential_rows(&self.base, &self.normals);
        let lp = LinearProgram::new(c, a, rhs).with_feas_tol(TANGENTIAL_TOL);
        match lp.solve_lexmin() {
            LpOutcome::Optimal { x, value } => Some((value, x)),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        let zero = vec![0.0; self.base.dim() + 1];
        self.maximize(&zero).is_none()
    }

    pub fn contains(&self, b: &[f64], l: f64) -> bool {
        let bscale = self.base.max_speed().max(1e-300);
        self.normals
            .iter()
            .all(|n| dot(n, b).abs() <= TANGENTIAL_TOL * bscale)
            && self.base.contains(b, l)
    }

    /// A generating list of the restriction: every vertex appears, since a
    /// vertex lies on a face of dimension at most the codimension and is a
    /// convex combination of at most codim+1 generators.
    pub fn vertices(&self) -> GeneratorSet {
        tangential_points(&self.base, &self.normals)
    }
}

pub fn tangential_restriction(gs: &GeneratorSet, s: &Stratum) -> TangentialRestriction {
    TangentialRestriction {
        base: gs.clone(),
        normals: s.normal_basis().to_vec(),
    }
}

fn tangential_points(gs: &GeneratorSet, normals: &[Vec<f64>]) -> GeneratorSet {
    let c = normals.len();
    if c == 0 {
        return gs.clone();
    }
    let bscale = gs.max_speed().max(1e-300);
    let mut out = GeneratorSet::empty(gs.dim());
    let n = gs.len();
    for size in 1..=(c + 1).min(n) {
        for subset in Combinations::new(n, size) {
            let rows = c + 1;
            let mut m = vec![0.0; rows * size];
            for (k, &j) in subset.iter().enumerate() {
                let b = gs.velocity(j);
                for (r, nr) in normals.iter().enumerate() {
                    m[r * size + k] = dot(nr, b) / bscale;
                }
                m[c * size + k] = 1.0;
            }
            let mut rhs = vec![0.0; rows];
            rhs[c] = 1.0;
            let mu = if size == rows {
                solve(&m, &rhs, size)
            } else {
                least_squares(&m, &rhs, rows, size)
                    .filter(|(_, res)| *res <= TANGENTIAL_TOL)
                    .map(|(x, _)| x)
            };
            let Some(mut mu) = mu else { continue };
            if mu.iter().any(|v| *v < -1e-12) {
                continue;
            }
            for v in mu.iter_mut() {
                *v = v.max(0.0);
            }
            let total: f64 = mu.iter().sum();
            let mut point = vec![0.0; gs.dim() + 1];
            for (k, &j) in subset.iter().enumerate() {
                for (p, r) in point.iter_mut().zip(gs.row(j)) {
                    *p += mu[k] / total * r;
                }
            }
            let b = &point[..gs.dim()];
            if normals.iter().all(|nr| dot(nr, b).abs() <= 1e-9 * bscale) {
                out.push(b, point[gs.dim()]);
            }
        }
    }
    out.dedup();
    out
}

/// Smooth (or engineered discontinuous) factor multiplying a region's velocities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleFactor {
    #[default]
    None,
    /// `offset + gradient . x`
    Affine { offset: f64, gradient: Vec<f64> },
    /// `sqrt(1 + |x|^2)`
    Radial,
    /// `1 + sum_i coeffs_i x_i^2`
    Quadratic { coeffs: Vec<f64> },
    /// `below` when `x[axis] < threshold`, else `above`.
    Step {
        axis: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },
}

impl ScaleFactor {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScaleFactor::None => 1.0,
            ScaleFactor::Affine { offset, gradient } => offset + dot(gradient, x),
            ScaleFactor::Radial => (1.0 + dot(x, x)).sqrt(),
            ScaleFactor::Quadratic { coeffs } => {
                1.0 + coeffs.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>()
            }
            ScaleFactor::Step {
                axis,
                threshold,
                below,
                above,
            } => {
                if x[*axis] < *threshold {
                    *below
                } else {
                    *above
                }
            }
        }
    }

    /// Supremum of `|factor|` over the box (every variant is extremal at a corner).
    pub fn sup_abs(&self, lo: &[f64], hi: &[f64]) -> f64 {
        if let ScaleFactor::Step { below, above, .. } = self {
            return below.abs().max(above.abs());
        }
        let n = lo.len();
        (0..1usize << n)
            .map(|mask| {
                let x: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect();
                self.value(&x).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosureMode {
    #[serde(rename = "hull-of-limits")]
    HullOfLimits,
    #[default]
    #[serde(rename = "hull-of-limits-union-specific")]
    HullOfLimitsUnionSpecific,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionRule {
    pub region: usize,
    pub generators: GeneratorSet,
    pub scale: ScaleFactor,
}

impl RegionRule {
    fn evaluate(&self, x: &[f64]) -> GeneratorSet {
        let f = self.scale.value(x);
        if f == 1.0 {
            return self.generators.clone();
        }
        let mut out = GeneratorSet::empty(self.generators.dim());
        for (b, l) in self.generators.iter() {
            let sb: Vec<f64> = b.iter().map(|v| f * v).collect();
            out.push(&sb, l);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecificSet {
    pub stratum: usize,
    pub generators: GeneratorSet,
}

#[derive(Clone, Debug, PartialEq)]
struct Filippov {
    base: BLMap,
    eps: f64,
    samples_per_eps: usize,
}

/// Piecewise dynamics-cost map over a stratification.
#[derive(Clone, Debug, PartialEq)]
pub struct BLMap {
    pub dim: usize,
    pub rules: Vec<RegionRule>,
    pub specific: Vec<SpecificSet>,
    pub closure: ClosureMode,
    filippov: Option<Box<Filippov>>,
}

impl BLMap {
    pub fn new(
        dim: usize,
        rules: Vec<RegionRule>,
        specific: Vec<SpecificSet>,
        closure: ClosureMode,
    ) -> Self {
        BLMap {
            dim,
            rules,
            specific,
            closure,
            filippov: None,
        }
    }

    pub fn regularization(&self) -> Option<(f64, usize)> {
        self.filippov.as_ref().map(|f| (f.eps, f.samples_per_eps))
    }

    fn rule(&self, region: usize) -> Result<&RegionRule, DynamicsError> {
        self.rules
            .iter()
            .find(|r| r.region == region)
            .ok_or(DynamicsError::NoRuleForRegion { region })
    }

    /// Evaluates `BL(x, t)`. Rules are time-independent; `t` is part of the
    /// signature for the differential-inclusion interface.
    pub fn evaluate(
        &self,
        strat: &FlatStratification,
        x: &[f64],
        t: f64,
    ) -> Result<GeneratorSet, DynamicsError> {
        if let Some(f) = &self.filippov {
            return f.evaluate(strat, x, t);
        }
        let loc = strat.locate(x)?;
        if loc.dim == strat.dimension {
            return Ok(self.rule(loc.id)?.evaluate(x));
        }
        let mut out = GeneratorSet::empty(self.dim);
        for region in strat.adjacent_regions(x) {
            out.extend(&self.rule(region.id)?.evaluate(x));
        }
        if self.closure == ClosureMode::HullOfLimitsUnionSpecific {
            for s in self.specific.iter().filter(|s| s.stratum == loc.id) {
                out.extend(&s.generators);
            }
        }
        if out.is_empty() {
            return Err(DynamicsError::NoRuleForRegion { region: loc.id });
        }
        out.dedup();
        Ok(out)
    }

    /// Checks `|b| <= bound` and `|l| <= bound` for every rule over the box.
    pub fn check_bound(&self, strat: &FlatStratification, bound: f64) -> Result<(), DynamicsError> {
        let over = |what: String, value: f64| {
            if value > bound * (1.0 + 1e-12) {
                Err(DynamicsError::BoundViolation { what, value, bound })
            } else {
                Ok(())
            }
        };
        for r in &self.rules {
            let f = r.scale.sup_abs(&strat.lo, &strat.hi);
            over(format!("region {} speed", r.region), r.generators.max_speed() * f)?;
            over(format!("region {} cost", r.region), r.generators.max_abs_cost())?;
        }
        for s in &self.specific {
            over(format!("stratum {} speed", s.stratum), s.generators.max_speed())?;
            over(format!("stratum {} cost", s.stratum), s.generators.max_abs_cost())?;
        }
        if let Some(f) = &self.filippov {
            f.base.check_bound(strat, bound)?;
        }
        Ok(())
    }
}

impl Filippov {
    /// Lattice offsets `k eps / n`, `k = -n..=n` per axis, kept inside the
    /// closed eps-ball. The base map is autonomous, so time-shifted samples
    /// `(z, s)` only lower the blend weight of `BL(z)` and add nothing to the
    /// hull; the lattice is therefore taken in space only.
    fn offsets(&self, n: usize) -> Vec<Vec<f64>> {
        let k = self.samples_per_eps as i64;
        let step = self.eps / self.samples_per_eps as f64;
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &out {
                for i in -k..=k {
                    let mut q = p.clone();
                    q.push(i as f64 * step);
                    next.push(q);
                }
            }
            out = next;
        }
        out.retain(|d| norm(d) <= self.eps * (1.0 + 1e-12));
        out
    }

    fn evaluate(
        &self,
        strat: &FlatStratification,
        x: &[f64],
        t: f64,
    ) -> Result<GeneratorSet, DynamicsError> {
        let here = self.base.evaluate(strat, x, t)?;
        let mut out = here.clone();
        for d in self.offsets(x.len()) {
            let r = norm(&d);
            if r == 0.0 || r >= self.eps {
                continue;
            }
            let z: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            if !strat.in_box(&z) {
                continue;
            }
            let there = self.base.evaluate(strat, &z, t)?;
            // (1 - lam) C + lam C = C for convex C
            if there.same_rows(&here) {
                continue;
            }
            let lam = r / self.eps;
            for a in there.data.chunks_exact(self.base.dim + 1) {
                for b in here.data.chunks_exact(self.base.dim + 1) {
                    let row: Vec<f64> = a
                        .iter()
                        .zip(b)
                        .map(|(ai, bi)| (1.0 - lam) * ai + lam * bi)
                        .collect();
                    out.data.extend_from_slice(&row);
                }
            }
        }
        out.dedup();
        Ok(out)
    }
}

/// Filippov regularization: `BL_eps(x)` is the hull over sampled `z` with
/// `|z - x| <= eps` of `(1 - r/eps) BL(z) + (r/eps) BL(x)`, `r = |z - x|`.
pub fn filippov_regularize(map: &BLMap, eps: f64, samples_per_eps: usize) -> BLMap {
    assert!(eps >= 0.0 && samples_per_eps >= 1);
    if eps == 0.0 {
        return map.clone();
    }
    BLMap {
        dim: map.dim,
        rules: map.rules.clone(),
        specific: map.specific.clone(),
        closure: map.closure,
        filippov: Some(Box::new(Filippov {
            base: map.clone(),
            eps,
            samples_per_eps,
        })),
    }
}

/// Sampled continuity check of the tangential restrictions `BL|_k` along each
/// stratum. Per stratum, reports the largest Hausdorff distance between
/// neighbouring samples (`modulus_<id>`), the largest difference quotient
/// (`lipschitz_<id>`), and counts jumps, i.e. pairs whose distance does not
/// shrink under repeated bisection.
pub fn check_adapted(map: &BLMap, strat: &FlatStratification, sample_density: f64) -> CheckReport {
    assert!(sample_density > 0.0);
    let h = 1.0 / sample_density;
    let samples = build_samples(strat, h);
    let mut report = CheckReport::new("adapted", 0.0);
    for (si, s) in strat.strata.iter().enumerate() {
        let restrict = |y: &[f64]| -> Option<Vec<Vec<f64>>> {
            let gs = map.evaluate(strat, y, 0.0).ok()?;
            let pts = tangential_points(&gs, s.normal_basis());
            (!pts.is_empty()).then(|| pts.rows())
        };
        let on_s = |y: &[f64]| matches!(strat.locate(y), Ok(l) if l.id == s.id);
        let (mut modulus, mut lip) = (0.0f64, 0.0f64);
        let mut jumps: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut failures = 0usize;
        for y1 in &samples.on[si] {
            let Some(r1) = restrict(y1) else {
                failures += 1;
                continue;
            };
            for v in &s.tangent_basis {
                let y2: Vec<f64> = y1.iter().zip(v).map(|(a, b)| a + h * b).collect();
                if !on_s(&y2) {
                    continue;
                }
                let Some(r2) = restrict(&y2) else {
                    failures += 1;
                    continue;
                };
                let d = hausdorff(&r1, &r2);
                modulus = modulus.max(d);
                lip = lip.max(d / h);
                if d > 1e-9 {
                    if let Some(w) = localize_jump(y1.clone(), y2, d, &restrict) {
                        jumps.push(w);
                    }
                }
            }
        }
        let mut site = SiteRecord::new(
            format!("stratum-{}", s.id),
            jumps.first().map(|w| w[0].clone()).unwrap_or_default(),
            (jumps.len() + failures) as f64,
        )
        .on_stratum(s.id);
        if let Some(w) = jumps.into_iter().next() {
            site.witness = w;
        }
        report.push(site);
        report.note(format!("modulus_{}", s.id), modulus);
        report.note(format!("lipschitz_{}", s.id), lip);
    }
    report.finish()
}

/// Bisects `[a, b]` towards the half with the larger set distance. A jump keeps
/// its size as the segment shrinks; a continuous map roughly halves it.
pub(crate) fn localize_jump<F>(mut a: Vec<f64>, mut b: Vec<f64>, d0: f64, sets: &F) -> Option<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Option<Vec<Vec<f64>>>,
{
    let mut d = d0;
    for _ in 0..45 {
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let sa = sets(&a)?;
        let sm = sets(&m)?;
        let sb = sets(&b)?;
        let da = hausdorff(&sa, &sm);
        let db = hausdorff(&sm, &sb);
        let next = da.max(db);
        if next < 0.75 * d {
            return None;
        }
        if da >= db {
            b = m;
        } else {
            a = m;
        }
        d = next;
        if dist(&a, &b) < 1e-12 {
            break;
        }
    }
    (d >= 0.25 * d0).then(|| vec![a, b])
}
