//! Flat stratifications of a bounding box: strata as relatively-open convex
//! cells of affine subspaces, point location, tangent/normal splitting of
//! covectors, and sampled validation of the admissibility axioms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dist, dot, norm, orthogonal_complement, sub};
use crate::report::{CheckReport, SiteRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {point:?} lies outside the bounding box")]
    OutOfBox { point: Vec<f64> },
    #[error("point {point:?} is claimed by strata {first} and {second} of the same dimension")]
    AmbiguousLocation {
        point: Vec<f64>,
        first: usize,
        second: usize,
    },
    #[error("point {point:?} is not covered by any stratum")]
    Uncovered { point: Vec<f64> },
    #[error("stratum {id}: {reason}")]
    InvalidStratum { id: usize, reason: String },
    #[error("stratification: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Gt,
    Lt,
}

/// Strict linear inequality `normal . x > offset` (or `<` for [`Sense::Lt`]),
/// in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConstraint {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub sense: Sense,
}

impl CellConstraint {
    /// Positive strictly inside the half-space.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let v = dot(&self.normal, x) - self.offset;
        match self.sense {
            Sense::Gt => v,
            Sense::Lt => -v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    pub id: usize,
    pub dim: usize,
    pub basepoint: Vec<f64>,
    pub tangent_basis: Vec<Vec<f64>>,
    pub cell: Vec<CellConstraint>,
    normal_basis: Vec<Vec<f64>>,
}

impl Stratum {
    pub fn new(
        id: usize,
        basepoint: Vec<f64>,
        tangent_basis: Vec<Vec<f64>>,
        cell: Vec<CellConstraint>,
    ) -> Result<Self, GeometryError> {
        let n = basepoint.len();
        let bad = |reason: String| GeometryError::InvalidStratum { id, reason };
        if tangent_basis.len() > n {
            return Err(bad(format!("{} basis vectors in R^{n}", tangent_basis.len())));
        }
        for (i, v) in tangent_basis.iter().enumerate() {
            if v.len() != n {
                return Err(bad(format!("basis vector {i} has length {}", v.len())));
            }
            for (j, w) in tangent_basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(v, w) - want).abs() > 1e-12 {
                    return Err(bad(format!("basis vectors {i},{j} are not orthonormal")));
                }
            }
        }
        for (i, c) in cell.iter().enumerate() {
            if c.normal.len() != n {
                return Err(bad(format!("cell constraint {i} has wrong length")));
            }
        }
        let normal_basis = orthogonal_complement(n, &tangent_basis);
        Ok(Stratum {
            id,
            dim: tangent_basis.len(),
            basepoint,
            tangent_basis,
            cell,
            normal_basis,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basepoint.len()
    }

    pub fn normal_basis(&self) -> &[Vec<f64>] {
        &self.normal_basis
    }

    pub fn dist_to_span(&self, x: &[f64]) -> f64 {
        let d = sub(x, &self.basepoint);
        self.normal_basis
            .iter()
            .map(|n| dot(&d, n).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Membership in the relatively-open cell: within `snap` of the affine span
    /// and at least `snap` inside every constraint.
    pub fn contains(&self, x: &[f64], snap: f64) -> bool {
        self.dist_to_span(x) <= snap
            && self.cell.iter().all(|c| c.margin(x) > snap * norm(&c.normal))
    }

    /// Membership in the closure of the cell, up to `snap`.
    pub fn closure_contains(&self, x: &[f64], snap: f64) -> bool {
        self.dist_to_span(x) <= snap
            && self.cell.iter().all(|c| c.margin(x) >= -snap * norm(&c.normal))
    }

    pub fn point_at(&self, coords: &[f64]) -> Vec<f64> {
        let mut p = self.basepoint.clone();
        for (c, v) in coords.iter().zip(&self.tangent_basis) {
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += c * vk;
            }
        }
        p
    }

    /// Orthogonal projection of `x` onto the affine span.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = sub(x, &self.basepoint);
        let coords: Vec<f64> = self.tangent_basis.iter().map(|v| dot(&d, v)).collect();
        self.point_at(&coords)
    }

    /// Splits a covector into its tangential and normal parts.
    pub fn split_covector(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = vec![0.0; p.len()];
        for v in &self.tangent_basis {
            let c = dot(p, v);
            for (t, vk) in top.iter_mut().zip(v) {
                *t += c * vk;
            }
        }
        let bot = sub(p, &top);
        (top, bot)
    }

    /// Normal component of a velocity, in normal-basis coordinates.
    pub fn normal_coords(&self, b: &[f64]) -> Vec<f64> {
        self.normal_basis.iter().map(|n| dot(b, n)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatStratification {
    pub dimension: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub strata: Vec<Stratum>,
    snap: f64,
    order: Vec<usize>,
}

impl FlatStratification {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, strata: Vec<Stratum>) -> Result<Self, GeometryError> {
        let n = lo.len();
        if n == 0 || hi.len() != n {
            return Err(GeometryError::Invalid("box bounds must have equal nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(GeometryError::Invalid("box must have lo < hi on every axis".into()));
        }
        for (i, s) in strata.iter().enumerate() {
            if s.ambient_dim() != n {
                return Err(GeometryError::InvalidStratum {
                    id: s.id,
                    reason: format!("lives in R^{} but the box is in R^{n}", s.ambient_dim()),
                });
            }
            if strata[..i].iter().any(|t| t.id == s.id) {
                return Err(GeometryError::Invalid(format!("duplicate stratum id {}", s.id)));
            }
        }
        let diam = dist(&lo, &hi);
        let mut order: Vec<usize> = (0..strata.len()).collect();
        order.sort_by_key(|&i| strata[i].dim);
        Ok(FlatStratification {
            dimension: n,
            lo,
            hi,
            strata,
            snap: 1e-9 * diam,
            order,
        })
    }

    pub fn snap(&self) -> f64 {
        self.snap
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn stratum(&self, id: usize) -> Option<&Stratum> {
        self.strata.iter().find(|s| s.id == id)
    }

    /// Top-dimensional strata, i.e. the open regions carrying dynamics rules.
    pub fn regions(&self) -> impl Iterator<Item = &Stratum> {
        self.strata.iter().filter(move |s| s.dim == self.dimension)
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= a - self.snap && *v <= b + self.snap)
    }

    /// Finds the stratum containing `x`; the lowest dimension wins.
    pub fn locate(&self, x: &[f64]) -> Result<&Stratum, GeometryError> {
        if x.len() != self.dimension || !self.in_box(x) {
            return Err(GeometryError::OutOfBox { point: x.to_vec() });
        }
        let mut found: Option<&Stratum> = None;
        for &i in &self.order {
            let s = &self.strata[i];
            if let Some(f) = found {
                if s.dim > f.dim {
                    return Ok(f);
                }
            }
            if s.contains(x, self.snap) {
                if let Some(f) = found {
                    return Err(GeometryError::AmbiguousLocation {
                        point: x.to_vec(),
                        first: f.id,
                        second: s.id,
                    });
                }
                found = Some(s);
            }
        }
        found.ok_or_else(|| GeometryError::Uncovered { point: x.to_vec() })
    }

    /// Regions whose closure contains `x`, in declaration order.
    pub fn adjacent_regions(&self, x: &[f64]) -> Vec<&Stratum> {
        self.regions()
            .filter(|r| r.closure_contains(x, self.snap))
            .collect()
    }
}

/// Evenly spaced coordinates on `[lo, hi]` with spacing at most `h`, endpoints included.
fn axis_points(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let steps = ((hi - lo) / h - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect()
}

fn lattice(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Deterministic validation samples.
pub(crate) struct Samples {
    pub(crate) box_points: Vec<Vec<f64>>,
    /// Points located on each stratum (index aligned with `strata`).
    pub(crate) on: Vec<Vec<Vec<f64>>>,
    /// Points of each stratum's closed cell lying on a cell boundary.
    pub(crate) boundary: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn build_samples(strat: &FlatStratification, h: f64) -> Samples {
    let n = strat.dimension;
    let snap = strat.snap();
    let axes: Vec<Vec<f64>> = (0..n).map(|i| axis_points(strat.lo[i], strat.hi[i], h)).collect();
    let box_points = lattice(&axes);
    let reach = (strat.diameter() / h).ceil() as i64;
    let mut on = Vec::new();
    let mut boundary = Vec::new();
    for s in &strat.strata {
        let mut raw: Vec<Vec<f64>> = if s.dim == n {
            box_points.clone()
        } else {
            let line: Vec<f64> = (-reach..=reach).map(|i| i as f64 * h).collect();
            let coords = lattice(&vec![line; s.dim]);
            coords.iter().map(|c| s.point_at(c)).collect()
        };
        // junction candidates: every basepoint projected onto this span
        for t in &strat.strata {
            raw.push(s.project(&t.basepoint));
        }
        let mut pts = Vec::new();
        let mut bnd = Vec::new();
        for p in raw.into_iter().filter(|p| strat.in_box(p)) {
            for c in &s.cell {
                let (nt, _) = s.split_covector(&c.normal);
                let nn = dot(&nt, &nt);
                if nn < 1e-24 {
                    continue;
                }
                let shift = (dot(&c.normal, &p) - c.offset) / nn;
                let q: Vec<f64> = p.iter().zip(&nt).map(|(a, b)| a - shift * b).collect();
                if strat.in_box(&q) && s.closure_contains(&q, snap) && !contains_point(&bnd, &q) {
                    bnd.push(q);
                }
            }
            if matches!(strat.locate(&p), Ok(l) if l.id == s.id) && !contains_point(&pts, &p) {
                pts.push(p);
            }
        }
        on.push(pts);
        boundary.push(bnd);
    }
    Samples {
        box_points,
        on,
        boundary,
    }
}

fn contains_point(list: &[Vec<f64>], p: &[f64]) -> bool {
    list.iter().any(|q| dist(q, p) < 1e-12)
}

/// Sampled probe directions: coordinate axes and their pairwise diagonals, both signs.
pub(crate) fn probe_directions(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for u in basis {
        out.push(u.clone());
        out.push(u.iter().map(|v| -v).collect());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                out.push(
                    basis[i]
                        .iter()
                        .zip(&basis[j])
                        .map(|(a, b)| s * (si * a + sj * b))
                        .collect(),
                );
            }
        }
    }
    out
}

/// Sampled check of the admissible-flat-stratification axioms.
///
/// One site per axiom (`cover`, `disjoint`, `afs-i`, `afs-ii`, `afs-iii`,
/// `flat-lemma`); the residual is the number of violating samples and the
/// witness list holds the first offending point(s). Local flatness of each
/// stratum is automatic for affine cells and is not sampled. The flat-lemma
/// translation property is only probed once the axioms hold.
pub fn validate_afs(strat: &FlatStratification, sample_density: f64) -> CheckReport {
    assert!(sample_density > 0.0, "sample_density must be positive");
    let h = 1.0 / sample_density;
    let snap = strat.snap();
    let samples = build_samples(strat, h);
    let mut report = CheckReport::new("afs", 0.0);

    // cover + disjointness
    let mut uncovered = Vec::new();
    let mut ambiguous = Vec::new();
    let all = samples
        .box_points
        .iter()
        .chain(samples.on.iter().flatten())
        .chain(samples.boundary.iter().flatten());
    for p in all {
        match strat.locate(p) {
            Ok(_) | Err(GeometryError::OutOfBox { .. }) => {}
            Err(GeometryError::AmbiguousLocation { point, .. }) => ambiguous.push(point),
            Err(_) => uncovered.push(p.clone()),
        }
    }
    report.push(axiom_site("cover", uncovered));
    report.push(axiom_site("disjoint", ambiguous));

    // (i): no point of a stratum lies in the closure of a lower-dimensional one
    let mut lower_hits = Vec::new();
    let mut radius = f64::INFINITY;
    for (si, s) in strat.strata.iter().enumerate() {
        for x in &samples.on[si] {
            for (ti, t) in strat.strata.iter().enumerate() {
                if t.dim > s.dim || ti == si {
                    continue;
                }
                if t.dim < s.dim && t.closure_contains(x, snap) {
                    lower_hits.push(x.clone());
                }
                let near = samples.on[ti]
                    .iter()
                    .chain(&samples.boundary[ti])
                    .map(|y| dist(x, y))
                    .fold(f64::INFINITY, f64::min);
                radius = radius.min(near);
            }
        }
    }
    report.push(axiom_site("afs-i", lower_hits));
    report.note("sampled_radius", if radius.is_finite() { radius } else { strat.diameter() });

    // (ii): a stratum meeting the closure of a higher one lies inside that closure
    let mut frontier = Vec::new();
    for (si, s) in strat.strata.iter().enumerate() {
        for t in strat.strata.iter().filter(|t| t.dim > s.dim) {
            let (inside, outside): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) = samples.on[si]
                .iter()
                .partition(|x| t.closure_contains(x, snap));
            if let (Some(meet), Some(away)) = (inside.first(), outside.first()) {
                frontier.push(vec![(*meet).clone(), (*away).clone()]);
            }
        }
    }
    let count = frontier.len();
    let mut site = SiteRecord::new("afs-ii", Vec::new(), count as f64);
    if let Some(w) = frontier.into_iter().next() {
        site.location = w[0].clone();
        site.witness = w;
    }
    report.push(site);

    // (iii): closure(M^k) stays within M^0 u ... u M^k
    let mut escapes = Vec::new();
    for (si, s) in strat.strata.iter().enumerate() {
        for q in &samples.boundary[si] {
            if let Ok(l) = strat.locate(q) {
                if l.dim > s.dim {
                    escapes.push(q.clone());
                }
            }
        }
    }
    report.push(axiom_site("afs-iii", escapes));

    let axioms_hold = report.sites.iter().all(|s| s.residual == 0.0);
    if axioms_hold {
        let (violations, r_min) = flat_lemma_probe(strat, &samples, h);
        let mut site = axiom_site("flat-lemma", violations);
        site.label = "flat-lemma".into();
        report.push(site);
        report.note("flat_radius", r_min);
    } else {
        report.note("flat_lemma_skipped", 1.0);
    }
    report.finish()
}

fn axiom_site(label: &str, witnesses: Vec<Vec<f64>>) -> SiteRecord {
    let loc = witnesses.first().cloned().unwrap_or_default();
    let n = witnesses.len();
    SiteRecord::new(label, loc, n as f64).with_witness(witnesses.into_iter().take(4).collect())
}

/// For x on a stratum of dimension k and y near x on a higher stratum, shifts
/// of y along the tangent space of x's stratum must stay on the same M^l.
/// Returns violations at the smallest probed radius and the minimum over
/// samples of the largest radius at which the property held.
fn flat_lemma_probe(strat: &FlatStratification, samples: &Samples, h: f64) -> (Vec<Vec<f64>>, f64) {
    let n = strat.dimension;
    let full: Vec<Vec<f64>> = (0..n).map(|i| crate::linalg::unit(n, i)).collect();
    let dirs = probe_directions(&full);
    let radii: Vec<f64> = (0..7).map(|j| h / 2f64.powi(j)).collect();
    let mut violations = Vec::new();
    let mut r_min = f64::INFINITY;
    for (si, s) in strat.strata.iter().enumerate() {
        if s.dim == n || s.dim == 0 {
            continue;
        }
        for x in &samples.on[si] {
            let mut best = None;
            for &r in &radii {
                let ok = dirs.iter().all(|u| {
                    let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + 0.5 * r * b).collect();
                    let Ok(ly) = strat.locate(&y) else { return true };
                    if ly.dim <= s.dim {
                        return true;
                    }
                    s.tangent_basis.iter().all(|v| {
                        [1.0, -1.0].iter().all(|sg| {
                            let z: Vec<f64> =
                                y.iter().zip(v).map(|(a, b)| a + sg * 0.25 * r * b).collect();
                            match strat.locate(&z) {
                                Ok(lz) => lz.dim == ly.dim,
                                Err(GeometryError::OutOfBox { .. }) => true,
                                Err(_) => false,
                            }
                        })
                    })
                });
                if ok {
                    best = Some(r);
                    break;
                }
            }
            match best {
                Some(r) => r_min = r_min.min(r),
                None => violations.push(x.clone()),
            }
        }
    }
    (violations, if r_min.is_finite() { r_min } else { h })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::unit;

    fn half(normal: Vec<f64>, sense: Sense) -> CellConstraint {
        CellConstraint {
            normal,
            offset: 0.0,
            sense,
        }
    }

    pub(crate) fn cross() -> FlatStratification {
        let e1 = unit(2, 0);
        let e2 = unit(2, 1);
        let o = vec![0.0, 0.0];
        let mut strata = vec![Stratum::new(0, o.clone(), vec![], vec![]).unwrap()];
        strata.push(Stratum::new(1, o.clone(), vec![e1.clone()], vec![half(e1.clone(), Sense::Gt)]).unwrap());
        strata.push(Stratum::new(2, o.clone(), vec![e2.clone()], vec![half(e2.clone(), Sense::Gt)]).unwrap());
        strata.push(Stratum::new(3, o.clone(), vec![e1.clone()], vec![half(e1.clone(), Sense::Lt)]).unwrap());
        strata.push(Stratum::new(4, o.clone(), vec![e2.clone()], vec![half(e2.clone(), Sense::Lt)]).unwrap());
        let signs = [(Sense::Gt, Sense::Gt), (Sense::Lt, Sense::Gt), (Sense::Lt, Sense::Lt), (Sense::Gt, Sense::Lt)];
        for (k, (a, b)) in signs.into_iter().enumerate() {
            strata.push(
                Stratum::new(
                    5 + k,
                    o.clone(),
                    vec![e1.clone(), e2.clone()],
                    vec![half(e1.clone(), a), half(e2.clone(), b)],
                )
                .unwrap(),
            );
        }
        FlatStratification::new(vec![-1.0, -1.0], vec![1.0, 1.0], strata).unwrap()
    }

    #[test]
    fn locate_cross_points() {
        let s = cross();
        assert_eq!(s.locate(&[0.5, 0.0]).unwrap().id, 1);
        assert_eq!(s.locate(&[0.0, 0.0]).unwrap().id, 0);
        assert_eq!(s.locate(&[0.3, 0.4]).unwrap().id, 5);
        assert_eq!(s.locate(&[-0.3, 0.4]).unwrap().id, 6);
        assert_eq!(s.locate(&[1e-13, 0.7]).unwrap().id, 2);
        assert!(matches!(s.locate(&[1.5, 0.0]), Err(GeometryError::OutOfBox { .. })));
    }

    #[test]
    fn uncovered_when_interface_missing() {
        let mut s = cross();
        s.strata.retain(|t| t.id != 1);
        let s = FlatStratification::new(s.lo.clone(), s.hi.clone(), s.strata).unwrap();
        // x1-axis missing: both quadrants stop at the axis, so it is uncovered
        assert!(matches!(s.locate(&[0.5, 0.0]), Err(GeometryError::Uncovered { .. })));
        let r = validate_afs(&s, 5.0);
        assert!(!r.pass);
        assert!(r.site("cover").unwrap().residual > 0.0);
    }

    #[test]
    fn split_examples() {
        let s = Stratum::new(0, vec![0.0, 0.0], vec![unit(2, 1)], vec![]).unwrap();
        let (t, b) = s.split_covector(&[3.0, 4.0]);
        assert_eq!(t, vec![0.0, 4.0]);
        assert_eq!(b, vec![3.0, 0.0]);
        let p0 = Stratum::new(1, vec![0.0, 0.0], vec![], vec![]).unwrap();
        let (t, b) = p0.split_covector(&[1.0, 2.0]);
        assert_eq!(t, vec![0.0, 0.0]);
        assert_eq!(b, vec![1.0, 2.0]);
        let (_, b) = s.split_covector(&[0.0, -7.5]);
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let err = Stratum::new(3, vec![0.0, 0.0], vec![vec![1.0, 1.0]], vec![]).unwrap_err();
        assert!(matches!(err, GeometryError::InvalidStratum { id: 3, .. }));
    }

    #[test]
    fn cross_is_admissible() {
        let r = validate_afs(&cross(), 10.0);
        assert!(r.pass, "{}", r.to_json());
        assert!(r.summary["flat_radius"] > 0.0);
    }

    #[test]
    fn trivial_stratification_passes() {
        let s = FlatStratification::new(
            vec![-1.0],
            vec![1.0],
            vec![Stratum::new(0, vec![0.0], vec![unit(1, 0)], vec![]).unwrap()],
        )
        .unwrap();
        assert!(validate_afs(&s, 4.0).pass);
    }

    #[test]
    fn dangling_half_axis_violates_closure_axiom() {
        // a half-line whose endpoint is left in the open region
        let e1 = unit(2, 0);
        let s = FlatStratification::new(
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![
                Stratum::new(0, vec![0.0, 0.0], vec![e1.clone()], vec![half(e1.clone(), Sense::Gt)]).unwrap(),
                Stratum::new(1, vec![0.0, 0.0], vec![e1, unit(2, 1)], vec![]).unwrap(),
            ],
        )
        .unwrap();
        let r = validate_afs(&s, 5.0);
        assert!(r.site("afs-iii").unwrap().residual > 0.0);
    }

    fn plane_in_r3() -> Stratum {
        let a = [1.0, 2.0, 2.0].map(|v| v / 3.0);
        let b = [2.0, 1.0, -2.0].map(|v| v / 3.0);
        Stratum::new(7, vec![0.0; 3], vec![a.to_vec(), b.to_vec()], vec![]).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn split_is_linear_idempotent_and_orthogonal(
            p in proptest::collection::vec(-10.0f64..10.0, 3),
            q in proptest::collection::vec(-10.0f64..10.0, 3),
            c in -5.0f64..5.0,
        ) {
            let s = plane_in_r3();
            let (pt, pb) = s.split_covector(&p);
            let (qt, _) = s.split_covector(&q);
            let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + c * b).collect();
            let (mt, _) = s.split_covector(&mix);
            for i in 0..3 {
                proptest::prop_assert!((mt[i] - pt[i] - c * qt[i]).abs() < 1e-9);
            }
            let (_, again) = s.split_covector(&pt);
            proptest::prop_assert!(norm(&again) < 1e-12);
            let lhs = dot(&p, &p);
            let rhs = dot(&pt, &pt) + dot(&pb, &pb);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }
}
