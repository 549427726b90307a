//! Exhaustive enumeration of piecewise-constant generator sequences.

use super::{SolverError, StratifiedProblem};

const MAX_STEPS: usize = 14;
const MAX_GENERATORS: usize = 6;
const MAX_SEQUENCES: f64 = 1e8;

/// Minimum over all generator sequences of length `steps` of
/// `sum tau l_j + terminal(X_steps)`, with Euler steps `X += tau b` clamped to
/// the box and the generator set re-evaluated at every visited point.
pub fn min_over_sequences(
    prob: &StratifiedProblem,
    x: &[f64],
    tau: f64,
    steps: usize,
    terminal: &dyn Fn(&[f64]) -> f64,
) -> Result<f64, SolverError> {
    if steps > MAX_STEPS {
        return Err(SolverError::ComplexityGuard(format!("{steps} steps exceed the limit of {MAX_STEPS}")));
    }
    let mut leaves = 0f64;
    descend(prob, x.to_vec(), 0.0, tau, steps, terminal, None, &mut leaves)
}

fn descend(
    prob: &StratifiedProblem,
    x: Vec<f64>,
    acc: f64,
    tau: f64,
    left: usize,
    terminal: &dyn Fn(&[f64]) -> f64,
    max_generators: Option<usize>,
    leaves: &mut f64,
) -> Result<f64, SolverError> {
    if left == 0 {
        *leaves += 1.0;
        if *leaves > MAX_SEQUENCES {
            return Err(SolverError::ComplexityGuard(format!("more than {MAX_SEQUENCES:e} sequences")));
        }
        return Ok(acc + terminal(&x));
    }
    let gs = prob.map.evaluate(&prob.strat, &x, 0.0)?;
    if max_generators.is_some_and(|m| gs.len() > m) {
        return Err(SolverError::ComplexityGuard(format!(
            "{} generators at {x:?} exceed the limit of {}",
            gs.len(),
            max_generators.unwrap_or_default()
        )));
    }
    if (gs.len() as f64).powi(left as i32) + *leaves > MAX_SEQUENCES * 10.0 {
        return Err(SolverError::ComplexityGuard(format!(
            "{}^{left} sequences exceed the limit of {MAX_SEQUENCES:e}",
            gs.len()
        )));
    }
    let mut best = f64::INFINITY;
    let mut foot = vec![0.0; x.len()];
    for (b, l) in gs.iter() {
        for ((f, xi), bi) in foot.iter_mut().zip(&x).zip(b) {
            *f = xi + tau * bi;
        }
        for (i, f) in foot.iter_mut().enumerate() {
            *f = f.clamp(prob.strat.lo[i], prob.strat.hi[i]);
        }
        let v = descend(prob, foot.clone(), acc + tau * l, tau, left - 1, terminal, max_generators, leaves)?;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

/// Upper bound on `U(x, t)` from sequences of `steps` equal Euler steps ending in `g`.
pub fn brute_force_value(prob: &StratifiedProblem, x: &[f64], t: f64, steps: usize) -> Result<f64, SolverError> {
    if steps == 0 {
        return Ok(prob.terminal.eval(x));
    }
    if steps > MAX_STEPS {
        return Err(SolverError::ComplexityGuard(format!("{steps} steps exceed the limit of {MAX_STEPS}")));
    }
    let tau = t / steps as f64;
    let mut leaves = 0f64;
    let g = |y: &[f64]| prob.terminal.eval(y);
    descend(prob, x.to_vec(), 0.0, tau, steps, &g, Some(MAX_GENERATORS), &mut leaves)
}

#[cfg(test)]
mod tests {
    use super::super::tests::two_speed;
    use super::super::TerminalCost;
    use super::*;
    use crate::dynamics::GeneratorSet;

    #[test]
    fn constant_cost_returns_elapsed_time() {
        let mut prob = two_speed();
        for r in prob.map.rules.iter_mut() {
            r.generators = GeneratorSet::from_rows(1, &[vec![-1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        }
        prob.terminal = TerminalCost::Constant { value: 0.0 };
        for steps in [1, 3, 6] {
            assert!((brute_force_value(&prob, &[0.3], 0.7, steps).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn two_speed_from_minus_one() {
        let v = brute_force_value(&two_speed(), &[-1.0], 1.0, 8).unwrap();
        assert!((v - 1.0).abs() <= 0.125 + 1e-12, "{v}");
        assert!(v >= 1.0 - 1e-12);
    }

    #[test]
    fn one_step_closed_form() {
        let mut prob = two_speed();
        for r in prob.map.rules.iter_mut() {
            r.generators = GeneratorSet::from_rows(1, &[vec![0.5, 0.25]]).unwrap();
        }
        let v = brute_force_value(&prob, &[-1.5], 1.0, 1).unwrap();
        assert_eq!(v, 0.25 + (-1.5f64 + 0.5 - 1.0).abs());
    }

    #[test]
    fn guard_rejects_long_sequences() {
        assert!(matches!(
            brute_force_value(&two_speed(), &[-1.0], 1.0, 15),
            Err(SolverError::ComplexityGuard(_))
        ));
    }
}
