//! Euclidean geometry of convex hulls of finite point sets: nearest points via
//! Wolfe's minimum-norm-point algorithm, and Hausdorff distances between hulls.

use crate::linalg::{dot, solve, sub};

/// Minimum-norm point of `conv(points)` (Wolfe's algorithm).
pub fn min_norm_point(points: &[Vec<f64>]) -> Vec<f64> {
    assert!(!points.is_empty(), "hull of an empty set");
    let scale = points.iter().map(|p| dot(p, p)).fold(1e-300, f64::max);
    let tol = 1e-12 * scale;
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .unwrap();
    let mut active = vec![start];
    let mut weights = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..1000 {
        let (j, xpj) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if dot(&x, &x) - xpj <= tol || active.contains(&j) {
            return x;
        }
        active.push(j);
        weights.push(0.0);
        loop {
            let Some(alpha) = affine_minimizer(points, &active) else {
                return x;
            };
            if alpha.iter().all(|a| *a > 1e-14) {
                weights = alpha;
                x = combine(points, &active, &weights);
                break;
            }
            let mut theta: f64 = 1.0;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-14 {
                    let d = w - a;
                    if d > 0.0 {
                        theta = theta.min(w / d);
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= 1e-14 {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            if active.is_empty() {
                return x;
            }
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            x = combine(points, &active, &weights);
        }
    }
    x
}

fn combine(points: &[Vec<f64>], active: &[usize], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (&i, wi) in active.iter().zip(w) {
        for (xk, pk) in x.iter_mut().zip(&points[i]) {
            *xk += wi * pk;
        }
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of the active points.
fn affine_minimizer(points: &[Vec<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let n = k + 1;
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            a[r * n + c] = dot(&points[i], &points[j]);
        }
        a[r * n + k] = 1.0;
        a[k * n + r] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = solve(&a, &rhs, n)?;
    Some(sol[..k].to_vec())
}

pub fn dist_to_hull(q: &[f64], points: &[Vec<f64>]) -> f64 {
    let shifted: Vec<Vec<f64>> = points.iter().map(|p| sub(p, q)).collect();
    let m = min_norm_point(&shifted);
    dot(&m, &m).sqrt()
}

/// Hausdorff distance between `conv(a)` and `conv(b)`; the farthest point of
/// one hull from the other is always a vertex.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one = a.iter().map(|p| dist_to_hull(p, b)).fold(0.0, f64::max);
    let two = b.iter().map(|p| dist_to_hull(p, a)).fold(0.0, f64::max);
    one.max(two)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_projection() {
        let d = dist_to_hull(&[0.0, 1.0], &[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert!((d - 1.0).abs() < 1e-12);
        let d = dist_to_hull(&[3.0, 1.0], &[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert!((d - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interior_point_has_zero_distance() {
        let tri = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        assert!(dist_to_hull(&[0.5, 0.5], &tri) < 1e-12);
    }

    #[test]
    fn hausdorff_of_nested_intervals() {
        let a = vec![vec![-1.0], vec![1.0]];
        let b = vec![vec![-2.0], vec![2.0], vec![0.0]];
        assert!((hausdorff(&a, &b) - 1.0).abs() < 1e-12);
        assert!(hausdorff(&a, &a) < 1e-12);
    }

    #[test]
    fn square_against_brute_force() {
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        for &(x, y) in &[(2.0, 0.5), (-1.0, -1.0), (0.3, 2.0), (1.5, 1.5)] {
            let dx: f64 = if x < 0.0 { -x } else if x > 1.0 { x - 1.0 } else { 0.0 };
            let dy: f64 = if y < 0.0 { -y } else if y > 1.0 { y - 1.0 } else { 0.0 };
            let d = dist_to_hull(&[x, y], &sq);
            assert!((d - (dx * dx + dy * dy).sqrt()).abs() < 1e-12);
        }
    }
}
