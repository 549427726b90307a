//! Euler trajectories of the differential inclusion under a feedback policy.

use std::collections::BTreeMap;

use crate::dynamics::GeneratorSet;
use crate::geometry::FlatStratification;

use super::{SolverError, StratifiedProblem, ValueGrid};

/// Feedback rule choosing an element `(b, l)` of the local dynamics-cost set.
pub trait Policy {
    fn select(&self, x: &[f64], remaining: f64, ds: f64, set: &GeneratorSet) -> Vec<f64>;
}

/// Always returns the same `(b, l)`; useful for straight-line motions and
/// for exercising the feasibility check.
pub struct ConstantPolicy {
    pub selection: Vec<f64>,
}

impl Policy for ConstantPolicy {
    fn select(&self, _x: &[f64], _remaining: f64, _ds: f64, _set: &GeneratorSet) -> Vec<f64> {
        self.selection.clone()
    }
}

/// One-step minimizer of `ds l + U(x + ds b, remaining - ds)` on a computed grid.
pub struct GreedyPolicy<'a> {
    pub grid: &'a ValueGrid,
}

impl Policy for GreedyPolicy<'_> {
    fn select(&self, x: &[f64], remaining: f64, ds: f64, set: &GeneratorSet) -> Vec<f64> {
        let mut best = f64::INFINITY;
        let mut pick = 0;
        for (j, (b, l)) in set.iter().enumerate() {
            let mut y: Vec<f64> = x.iter().zip(b).map(|(a, v)| a + ds * v).collect();
            self.grid.lattice.clamp(&mut y);
            let v = ds * l + self.grid.interp_time(&y, (remaining - ds).max(0.0));
            if v < best {
                best = v;
                pick = j;
            }
        }
        set.row(pick).to_vec()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Accumulated running cost `L(s)`.
    pub costs: Vec<f64>,
    /// `(b, l)` used on each step.
    pub selections: Vec<Vec<f64>>,
    /// Steps whose endpoint was clipped to the box.
    pub clipped_steps: usize,
}

impl Trajectory {
    pub fn total_cost(&self, prob: &StratifiedProblem) -> f64 {
        self.costs.last().copied().unwrap_or(0.0) + prob.terminal.eval(self.states.last().expect("nonempty"))
    }
}

/// Euler scheme `X += ds b, L += ds l` over `[0, t]`, with every selection
/// certified to lie in the hull of the current generator set.
pub fn simulate(
    prob: &StratifiedProblem,
    x: &[f64],
    t: f64,
    policy: &dyn Policy,
    ds: f64,
) -> Result<Trajectory, SolverError> {
    if !(ds > 0.0) {
        return Err(SolverError::InvalidParameter(format!("ds must be positive, got {ds}")));
    }
    let steps = ((t / ds) - 1e-9).ceil().max(0.0) as usize;
    let ds = if steps > 0 { t / steps as f64 } else { 0.0 };
    let n = x.len();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.to_vec()],
        costs: vec![0.0],
        selections: Vec::new(),
        clipped_steps: 0,
    };
    for k in 0..steps {
        let s = k as f64 * ds;
        let here = traj.states[k].clone();
        let set = prob.map.evaluate(&prob.strat, &here, t - s)?;
        let sel = policy.select(&here, t - s, ds, &set);
        if sel.len() != n + 1 || !set.contains(&sel[..n], sel[n]) {
            return Err(SolverError::InfeasibleSelection { step: k, point: here, selection: sel });
        }
        let mut next: Vec<f64> = here.iter().zip(&sel).map(|(a, b)| a + ds * b).collect();
        let mut clipped = false;
        for (i, v) in next.iter_mut().enumerate() {
            let c = v.clamp(prob.strat.lo[i], prob.strat.hi[i]);
            clipped |= c != *v;
            *v = c;
        }
        traj.clipped_steps += usize::from(clipped);
        traj.times.push(if k + 1 == steps { t } else { (k + 1) as f64 * ds });
        traj.costs.push(traj.costs[k] + ds * sel[n]);
        traj.states.push(next);
        traj.selections.push(sel);
    }
    Ok(traj)
}

/// First sampled time at which the trajectory sits on each stratum (by id,
/// in declaration order); `None` if never.
pub fn reaching_times(traj: &Trajectory, strat: &FlatStratification) -> Vec<(usize, Option<f64>)> {
    let mut first: BTreeMap<usize, f64> = BTreeMap::new();
    for (x, t) in traj.states.iter().zip(&traj.times) {
        if let Ok(s) = strat.locate(x) {
            first.entry(s.id).or_insert(*t);
        }
    }
    strat.strata.iter().map(|s| (s.id, first.get(&s.id).copied())).collect()
}

/// First sampled time at which the trajectory sits on `M^j`, for `j = 0..=N`.
pub fn reaching_times_by_dim(traj: &Trajectory, strat: &FlatStratification) -> Vec<Option<f64>> {
    let mut out = vec![None; strat.dimension + 1];
    for (id, t) in reaching_times(traj, strat) {
        let d = strat.stratum(id).expect("declared stratum").dim;
        if let Some(t) = t {
            out[d] = Some(out[d].map_or(t, |o: f64| o.min(t)));
        }
    }
    out
}
