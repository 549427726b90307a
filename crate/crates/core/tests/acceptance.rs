//! Acceptance criteria. Each criterion prints one `criterion N: PASS|FAIL` line;
//! the process exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use strathjb::builtins::{builtin_problem, NAMES};
use strathjb::config::{ProblemConfig, RegionConfig, StratumConfig};
use strathjb::dynamics::GeneratorSet;
use strathjb::geometry::{validate_afs, Stratum};
use strathjb::hamiltonians::hamiltonian_tangential;
use strathjb::solver::{brute_force_value, solve_value, TerminalCost};
use strathjb::verify::{
    default_dpp_sites, dpp_check_bounded, filippov_study, interpolation_bound, scheme_agreement, viscosity_sub_check,
    viscosity_super_check,
};

type Outcome = (bool, String);

/// `l = 1` on every generator and `g = 0`.
fn unit_cost(mut cfg: ProblemConfig) -> ProblemConfig {
    let n = cfg.dimension;
    for r in &mut cfg.regions {
        for g in &mut r.generators {
            g[n] = 1.0;
        }
    }
    for s in &mut cfg.specific {
        for g in &mut s.generators {
            g[n] = 1.0;
        }
    }
    cfg.terminal = TerminalCost::Constant { value: 0.0 };
    cfg
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut worst = 0.0f64;
    for name in NAMES {
        let cfg = unit_cost(builtin_problem(name).unwrap());
        let prob = cfg.to_problem().unwrap();
        let grid = solve_value(&prob, cfg.solver.dx, cfg.solver.dt).unwrap();
        for n in 0..grid.slices() {
            let t = grid.time(n);
            for v in grid.slice(n) {
                worst = worst.max((v - t).abs());
            }
        }
    }
    let cross = builtin_problem("cross").unwrap();
    let prob = cross.to_problem().unwrap();
    let start = Instant::now();
    let grid = solve_value(&prob, 0.02, 0.005).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let shape = format!("{:?}x{}", grid.lattice.shape, grid.steps());
    let pass = worst <= TOL && secs < 5.0 && grid.lattice.shape == [101, 101] && grid.steps() == 100;
    (pass, format!("max |U - t| = {worst:.3e} (tol {TOL:e}); {shape} solve {secs:.2} s (limit 5 s)"))
}

fn criterion_2() -> Outcome {
    const TOL: f64 = 0.05;
    let cfg = builtin_problem("two-speed-1d").unwrap();
    let prob = cfg.to_problem().unwrap();
    let start = Instant::now();
    let grid = solve_value(&prob, cfg.solver.dx, cfg.solver.dt).unwrap();
    // even tenths keep every oracle foot on a node
    let mut sites: Vec<(f64, f64)> = (1..20).map(|k| (-2.0 + 0.2 * k as f64, 1.0)).collect();
    sites.push((0.0, 0.5));
    let mut worst = 0.0f64;
    for (x, t) in &sites {
        let oracle = brute_force_value(&prob, &[*x], *t, 10).unwrap();
        worst = worst.max((grid.interp_time(&[*x], *t) - oracle).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= TOL && secs < 60.0;
    (pass, format!("{} sites, max |U - oracle| = {worst:.4} (tol {TOL}); {secs:.1} s (limit 60 s)", sites.len()))
}

/// Best `-b_top . p - l` over mixtures on a simplex grid of step `1/m` whose
/// normal component `b_2` vanishes (line along `e1` in the plane).
fn dense_line_max(rows: &[[f64; 3]], p: f64, m: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    simplex_grid(rows.len(), m, &mut |mu| {
        let mix = mixture(rows, mu);
        if mix[1].abs() <= 1e-12 {
            let v = -mix[0] * p - mix[2];
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    });
    best
}

/// `-min l` over grid mixtures with `b = 0`.
fn dense_point_h0(rows: &[[f64; 3]], m: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    simplex_grid(rows.len(), m, &mut |mu| {
        let mix = mixture(rows, mu);
        if mix[0].abs() <= 1e-12 && mix[1].abs() <= 1e-12 {
            best = Some(best.map_or(-mix[2], |b: f64| b.max(-mix[2])));
        }
    });
    best
}

fn mixture(rows: &[[f64; 3]], mu: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, w) in rows.iter().zip(mu) {
        for (o, v) in out.iter_mut().zip(r) {
            *o += w * v;
        }
    }
    out
}

fn simplex_grid(k: usize, m: usize, f: &mut dyn FnMut(&[f64])) {
    let d = m as f64;
    match k {
        1 => f(&[1.0]),
        2 => (0..=m).for_each(|i| f(&[i as f64 / d, (m - i) as f64 / d])),
        3 => {
            for i in 0..=m {
                for j in 0..=m - i {
                    f(&[i as f64 / d, j as f64 / d, (m - i - j) as f64 / d]);
                }
            }
        }
        _ => unreachable!(),
    }
}

fn criterion_3() -> Outcome {
    const TOL_K: f64 = 1e-7;
    const TOL_0: f64 = 1e-9;
    const STEPS: usize = 1000;
    // normal components pair up to crossings at multiples of 1/1000
    let line_sets: Vec<Vec<[f64; 3]>> = vec![
        vec![[1.0, 1.0, 0.5], [-2.0, -1.0, 1.5]],
        vec![[0.5, 1.0, 0.2], [2.0, -3.0, 1.0], [-1.0, 0.0, 0.7]],
        vec![[1.0, 4.0, 0.0], [-1.0, -1.0, 2.0], [0.0, 3.0, -0.5]],
        vec![[2.0, 3.0, 1.0], [-1.0, -2.0, 0.25], [1.0, -9.0, 0.0]],
        vec![[0.0, 0.0, 1.0]],
        vec![[1.0, 1.0, 1.0], [-1.0, 2.0, 0.0]],
    ];
    let point_sets: Vec<Vec<[f64; 3]>> = vec![
        vec![[1.0, 0.0, 2.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, 0.5]],
        vec![[2.0, 0.0, 1.0], [-2.0, 0.0, 3.0], [0.0, 0.0, 1.5]],
        vec![[1.0, 0.0, 1.0], [-3.0, 0.0, 0.2]],
        vec![[1.0, 1.0, 1.0], [2.0, -1.0, 1.0]],
    ];
    let line = Stratum::new(1, vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![]).unwrap();
    let point = Stratum::new(0, vec![0.0, 0.0], vec![], vec![]).unwrap();
    let mut worst_k = 0.0f64;
    let mut mismatched = 0;
    for rows in &line_sets {
        let gs = GeneratorSet::from_rows(2, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        for p in [-2.0, -0.5, 0.0, 0.75, 3.0] {
            let got = hamiltonian_tangential(&gs, &line, &[p, 1.7]).value;
            match dense_line_max(rows, p, STEPS) {
                Some(want) => worst_k = worst_k.max((got - want).abs()),
                None if got == f64::NEG_INFINITY => {}
                None => mismatched += 1,
            }
        }
    }
    let mut worst_0 = 0.0f64;
    for rows in &point_sets {
        let gs = GeneratorSet::from_rows(2, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let got = hamiltonian_tangential(&gs, &point, &[0.4, -1.1]).value;
        match dense_point_h0(rows, STEPS) {
            Some(want) => worst_0 = worst_0.max((got - want).abs()),
            None if got == f64::NEG_INFINITY => {}
            None => mismatched += 1,
        }
    }
    let pass = worst_k <= TOL_K && worst_0 <= TOL_0 && mismatched == 0;
    (
        pass,
        format!(
            "H^1 max diff {worst_k:.2e} (tol {TOL_K:e}), H^0 max diff {worst_0:.2e} (tol {TOL_0:e}), feasibility mismatches {mismatched}"
        ),
    )
}

fn criterion_4() -> Outcome {
    const TOL: f64 = 1e-3;
    let fig = builtin_problem("figure1-r3").unwrap();
    let fig_pass = validate_afs(&fig.stratification().unwrap(), fig.checks.sample_density).pass;
    let bad = builtin_problem("forbidden-r3").unwrap();
    let r = validate_afs(&bad.stratification().unwrap(), bad.checks.sample_density);
    let only_ii = r.sites.iter().all(|s| s.pass == (s.label != "afs-ii")) && r.site("afs-ii").is_some();
    let radius = r
        .site("afs-ii")
        .and_then(|s| s.witness.first())
        .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
        .unwrap_or(f64::INFINITY);
    let pass = fig_pass && !r.pass && only_ii && radius <= TOL;
    (
        pass,
        format!("figure1-r3 afs pass = {fig_pass}; forbidden-r3 fails only afs-ii = {only_ii}, witness |x| = {radius:.2e} (tol {TOL:e})"),
    )
}

/// `-min { l : (0, l) in hull }` by solving every triple, pair and single of
/// generators for barycentric weights with zero velocity.
fn h0_by_triples(rows: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    let n = rows.len();
    for a in 0..n {
        if rows[a][0] == 0.0 && rows[a][1] == 0.0 {
            best = best.min(rows[a][2]);
        }
        for b in a + 1..n {
            // (1 - t) ra + t rb = 0 in both coordinates
            let (ra, rb) = (&rows[a], &rows[b]);
            for i in 0..2 {
                let den = ra[i] - rb[i];
                if den.abs() > 1e-12 {
                    let t = ra[i] / den;
                    let other = 1 - i;
                    if (0.0..=1.0).contains(&t) && ((1.0 - t) * ra[other] + t * rb[other]).abs() <= 1e-12 {
                        best = best.min((1.0 - t) * ra[2] + t * rb[2]);
                    }
                }
            }
            for c in b + 1..n {
                let rc = &rows[c];
                let m = [[ra[0], rb[0], rc[0]], [ra[1], rb[1], rc[1]], [1.0, 1.0, 1.0]];
                let det = det3(&m);
                if det.abs() <= 1e-12 {
                    continue;
                }
                let rhs = [0.0, 0.0, 1.0];
                let mu: Vec<f64> = (0..3)
                    .map(|j| {
                        let mut mj = m;
                        for i in 0..3 {
                            mj[i][j] = rhs[i];
                        }
                        det3(&mj) / det
                    })
                    .collect();
                if mu.iter().all(|w| *w >= -1e-12) {
                    best = best.min(mu[0] * ra[2] + mu[1] * rb[2] + mu[2] * rc[2]);
                }
            }
        }
    }
    -best
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn criterion_5() -> Outcome {
    const H0_TOL: f64 = 1e-9;
    let cfg = builtin_problem("cross").unwrap();
    let prob = cfg.to_problem().unwrap();
    let tol = 10.0 * (cfg.solver.dx + cfg.solver.dt);
    let grid = solve_value(&prob, cfg.solver.dx, cfg.solver.dt).unwrap();
    let sub = viscosity_sub_check(&grid, &prob, tol).unwrap();
    let sup = viscosity_super_check(&grid, &prob, tol).unwrap();
    let rows: Vec<Vec<f64>> = cfg.regions.iter().flat_map(|r| r.generators.clone()).collect();
    let oracle = h0_by_triples(&rows);
    let h0 = sub.summary.get("h0_0").copied().unwrap_or(f64::NAN);
    let h0_ok = (h0 - oracle).abs() <= H0_TOL;
    let pass = sub.pass && sup.pass && h0_ok;
    (
        pass,
        format!(
            "sub {:.4}, super {:.4} (tol {tol}); H^0 at origin {h0} vs triple enumeration {oracle} (tol {H0_TOL:e})",
            sub.max_residual, sup.max_residual
        ),
    )
}

fn criterion_6() -> Outcome {
    const ZERO_TOL: f64 = 1e-12;
    let cfg = builtin_problem("two-cost-1d").unwrap();
    let prob = cfg.to_problem().unwrap();
    let grid = solve_value(&prob, cfg.solver.dx, cfg.solver.dt).unwrap();
    let bound = interpolation_bound(&grid, &prob, 4).unwrap();
    let mut residual = [0.0; 3];
    for (slot, tau) in [1usize, 2, 4].into_iter().enumerate() {
        let sites = default_dpp_sites(&grid, tau, cfg.checks.dpp_sites_per_axis);
        residual[slot] = dpp_check_bounded(&grid, &prob, tau, &sites, bound).unwrap().max_residual;
    }
    let pass = residual[0] <= ZERO_TOL && residual[1] <= 2.0 * bound + ZERO_TOL && residual[2] <= 4.0 * bound + ZERO_TOL;
    (
        pass,
        format!(
            "residuals tau=1: {:.2e} (tol {ZERO_TOL:e}), tau=2: {:.2e}, tau=4: {:.2e} (tol 4 x {bound:.3e})",
            residual[0], residual[1], residual[2]
        ),
    )
}

fn criterion_7() -> Outcome {
    const TOL: f64 = 0.1;
    let cfg = builtin_problem("two-cost-1d").unwrap();
    let prob = cfg.to_problem().unwrap();
    let eps = [0.4, 0.2, 0.1];
    let start = Instant::now();
    let report = filippov_study(&prob, &eps, 0.01, cfg.solver.dt, cfg.checks.samples_per_eps, TOL).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e: Vec<f64> = report.sites.iter().map(|s| s.residual).collect();
    let monotone = e.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let pass = report.pass && monotone && e.last().is_some_and(|v| *v <= TOL) && secs < 180.0;
    (pass, format!("e(eps) = {e:.4?} for eps = {eps:?} (last tol {TOL}, 10% slack); {secs:.1} s (limit 180 s)"))
}

fn criterion_8() -> Outcome {
    const RATIO: f64 = 1.4;
    let cfg = builtin_problem("cross").unwrap();
    let prob = cfg.to_problem().unwrap();
    let (dx, dt) = (cfg.solver.dx, cfg.solver.dt);
    let report = scheme_agreement(&prob, dx, dt, dx / 2.0, dt / 2.0).unwrap();
    let d1 = report.summary["d1"];
    let d2 = report.summary["d2"];
    let ratio = report.summary["ratio"];
    let pass = d1 <= 1e-12 || ratio >= RATIO;
    (pass, format!("d(dx, dx/2) = {d1:.6}, d(dx/2, dx/4) = {d2:.6}, ratio {ratio:.3} (need >= {RATIO})"))
}

fn criterion_9() -> Outcome {
    let cfg = builtin_problem("cross").unwrap();
    let shared = cfg.regions[0].generators.clone();
    let mut split = cfg.clone();
    for r in &mut split.regions {
        r.generators = shared.clone();
    }
    let mut single = cfg.clone();
    single.strata = vec![StratumConfig {
        id: 0,
        dim: 2,
        basepoint: vec![0.0, 0.0],
        basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        cell: Vec::new(),
    }];
    single.regions = vec![RegionConfig { stratum: 0, generators: shared, scale: Default::default() }];
    let a = solve_value(&split.to_problem().unwrap(), cfg.solver.dx, cfg.solver.dt).unwrap();
    let b = solve_value(&single.to_problem().unwrap(), cfg.solver.dx, cfg.solver.dt).unwrap();
    let same_lattice = a.lattice == b.lattice && a.dt == b.dt;
    let differing = a.values.iter().zip(&b.values).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    let pass = same_lattice && a.values.len() == b.values.len() && differing == 0;
    (pass, format!("{} values, {differing} differ bitwise, same lattice = {same_lattice}", a.values.len()))
}

fn run_cli(threads: &str, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_strathjb"))
        .args(["--threads", threads, "--seed", "7"])
        .args(args)
        .output()
        .map(|o| o.status.code().is_some_and(|c| c == 0 || c == 1))
        .unwrap_or(false)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid_for = |threads: &str| d.join(format!("cross-{threads}.csv"));
    let mut ran = true;
    for threads in ["1", "8"] {
        let p = |name: &str| d.join(format!("{name}-{threads}")).to_str().unwrap().to_string();
        let grid = grid_for(threads);
        ran &= run_cli(threads, &["solve", "--config", "builtin:cross", "--output", grid.to_str().unwrap()]);
        ran &= run_cli(threads, &["validate", "--config", "builtin:cross", "--output", &p("validate.json")]);
        let two = p("two-cost.bin");
        ran &= run_cli(threads, &["solve", "--config", "builtin:two-cost-1d", "--output", &two]);
        ran &= run_cli(threads, &["check", "--config", "builtin:two-cost-1d", "--grid", &two, "--output", &p("check.json")]);
        ran &= run_cli(threads, &["study", "filippov", "--config", "builtin:two-cost-1d", "--output", &p("filippov.csv")]);
    }
    let same = |a: &Path, b: &Path| match (std::fs::read(a), std::fs::read(b)) {
        (Ok(x), Ok(y)) => !x.is_empty() && x == y,
        _ => false,
    };
    let mut compared = 0;
    let mut identical = 0;
    let mut pairs = vec![(grid_for("1"), grid_for("8"))];
    for name in ["validate.json", "check.json", "filippov.csv"] {
        pairs.push((d.join(format!("{name}-1")), d.join(format!("{name}-8"))));
    }
    for (a, b) in &pairs {
        compared += 1;
        if same(a, b) {
            identical += 1;
        }
    }
    let pass = ran && identical == compared;
    (pass, format!("{identical}/{compared} outputs byte-identical across 1 and 8 threads; all runs completed = {ran}"))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {verdict}  {detail}  [{:.1} s]", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
