//! Command-line front end.
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 input error
//! (unreadable or invalid config, grid/config mismatch), 3 numerical
//! precondition (CFL, misaligned lattice, complexity guard).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::builtins;
use crate::config::{ConfigError, ProblemConfig};
use crate::dynamics::check_adapted;
use crate::geometry::validate_afs;
use crate::hamiltonians::{check_lp_constant, check_nc, check_tc};
use crate::report::CheckReport;
use crate::solver::{read_grid, write_grid, GridIoError, solve_value, time_steps, Lattice, SolverError, StratifiedProblem, ValueGrid};
use crate::verify::{
    default_dpp_sites, dpp_check_bounded, filippov_study, interpolation_bound, scheme_agreement, viscosity_sub_check, viscosity_super_check,
    VerifyError,
};

#[derive(Debug, Parser)]
#[command(name = "strathjb", version, about = "Optimal control on flat stratified domains")]
pub struct Cli {
    /// Worker threads for the solver (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides `checks.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `checks.tolerance` (viscosity checks) or `checks.filippov_tolerance` (filippov study).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the stratification and the assumptions on the dynamics.
    Validate {
        /// Config file, or `builtin:<name>`.
        #[arg(long)]
        config: String,
        /// JSON report file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute the value function and write the grid (`.csv` or binary).
    Solve {
        #[arg(long)]
        config: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Certify a computed grid: sub/super-solution and dynamic programming residuals.
    Check {
        #[arg(long)]
        config: String,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convergence studies; the table goes to `--output` or stdout as CSV.
    Study {
        kind: StudyKind,
        #[arg(long)]
        config: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the annotated config of a builtin problem.
    Builtin { name: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Filippov,
    Refinement,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: 2, message: message.to_string() }
    }

    fn numerical(message: impl ToString) -> Self {
        Failure { code: 3, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::input(e)
    }
}

impl From<GridIoError> for Failure {
    fn from(e: GridIoError) -> Self {
        Failure::input(e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Dynamics(_) | SolverError::InvalidParameter(_) => Failure::input(e),
            _ => Failure::numerical(e),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solver(s) => s.into(),
            VerifyError::Mismatch(_) => Failure::input(e),
            _ => Failure::numerical(e),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::input(e)),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Validate { config, output } => cmd_validate(&load(cli, config)?, output.as_deref()),
        Command::Solve { config, output } => cmd_solve(&load(cli, config)?, output),
        Command::Check { config, grid, output } => cmd_check(&load(cli, config)?, grid, output.as_deref()),
        Command::Study { kind, config, output } => cmd_study(&load(cli, config)?, *kind, cli.tolerance, output.as_deref()),
        Command::Builtin { name } => {
            let text = builtins::builtin_text(name).ok_or_else(|| Failure::input(ConfigError::UnknownBuiltin(name.clone())))?;
            print!("{text}");
            Ok(true)
        }
    }
}

fn load(cli: &Cli, path: &str) -> Result<ProblemConfig, Failure> {
    let mut cfg = ProblemConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.checks.seed = seed;
    }
    if let (Some(t), Command::Validate { .. } | Command::Check { .. }) = (cli.tolerance, &cli.command) {
        cfg.checks.tolerance = Some(t);
    }
    Ok(cfg)
}

fn print_summary(reports: &[&CheckReport]) {
    for r in reports {
        println!(
            "{:<20} {}  max_residual={:.6e}  tolerance={:.3e}  failures={}",
            r.check,
            if r.pass { "PASS" } else { "FAIL" },
            r.max_residual,
            r.tolerance,
            r.failures
        );
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("json serializes");
        std::fs::write(p, text + "\n").map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

/// Runs the stratification check and, when it passes, the assumption checks.
fn cmd_validate(cfg: &ProblemConfig, output: Option<&Path>) -> Result<bool, Failure> {
    let strat = cfg.stratification()?;
    let density = cfg.checks.sample_density;
    let afs = validate_afs(&strat, density);
    if !afs.pass {
        print_summary(&[&afs]);
        write_json(output, &json!({ "command": "validate", "pass": false, "afs": afs }))?;
        return Ok(false);
    }
    let prob = cfg.to_problem()?;
    let seed = cfg.checks.seed;
    let adapted = check_adapted(&prob.map, &prob.strat, density);
    let nc = check_nc(&prob.map, &prob.strat, cfg.checks.delta_target, density, seed);
    let tc = check_tc(&prob.map, &prob.strat, density, seed);
    let lp = check_lp_constant(&prob.map, &prob.strat, density, seed);
    print_summary(&[&afs, &adapted, &nc.report, &tc.report, &lp.report]);
    for (id, d) in &nc.nc_delta {
        println!("nc_delta[{id}] = {d:.6}");
    }
    let pass = afs.pass && adapted.pass && nc.pass() && tc.pass() && lp.pass();
    write_json(
        output,
        &json!({
            "command": "validate",
            "pass": pass,
            "afs": afs,
            "adapted": adapted,
            "nc": nc,
            "tc": tc,
            "lp": lp,
        }),
    )?;
    Ok(pass)
}

fn cmd_solve(cfg: &ProblemConfig, output: &Path) -> Result<bool, Failure> {
    let prob = cfg.to_problem()?;
    let start = Instant::now();
    let grid = solve_value(&prob, cfg.solver.dx, cfg.solver.dt)?;
    let elapsed = start.elapsed();
    write_grid(&grid, output)?;
    let (lo, hi) = grid.min_max();
    println!("nodes        {}", grid.lattice.node_count());
    println!("slices       {}", grid.slices());
    println!("dt           {}", grid.dt);
    println!("min U        {lo:.6}");
    println!("max U        {hi:.6}");
    println!("clamped feet {}", grid.clamped_feet);
    println!("wall time    {:.3} s", elapsed.as_secs_f64());
    Ok(true)
}

/// Lattice and time step the config prescribes; a grid must match them.
fn expected_resolution(prob: &StratifiedProblem, cfg: &ProblemConfig) -> Result<(Lattice, f64), Failure> {
    let lat = Lattice::aligned(&prob.strat, cfg.solver.dx)?;
    let (_, dt) = time_steps(prob.horizon, cfg.solver.dt);
    Ok((lat, dt))
}

fn matches_resolution(grid: &ValueGrid, lat: &Lattice, dt: f64, horizon: f64) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    grid.lattice.shape == lat.shape
        && grid.lattice.lo.iter().zip(&lat.lo).all(|(a, b)| close(*a, *b))
        && grid.lattice.hi.iter().zip(&lat.hi).all(|(a, b)| close(*a, *b))
        && close(grid.dt, dt)
        && close(grid.horizon, horizon)
}

fn cmd_check(cfg: &ProblemConfig, grid_path: &Path, output: Option<&Path>) -> Result<bool, Failure> {
    let prob = cfg.to_problem()?;
    let grid = read_grid(grid_path)?;
    let (lat, dt) = expected_resolution(&prob, cfg)?;
    if !matches_resolution(&grid, &lat, dt, prob.horizon) {
        return Err(Failure::input(format!(
            "grid resolution {:?} nodes, dt = {} does not match the config ({:?} nodes, dt = {dt})",
            grid.lattice.shape, grid.dt, lat.shape
        )));
    }
    let tol = cfg.tolerance();
    let sub = viscosity_sub_check(&grid, &prob, tol)?;
    let sup = viscosity_super_check(&grid, &prob, tol)?;
    let mut dpp = Vec::new();
    let bound = interpolation_bound(&grid, &prob, 4)?;
    for &k in &cfg.checks.tau_steps {
        if k > grid.steps() {
            continue;
        }
        let sites = default_dpp_sites(&grid, k, cfg.checks.dpp_sites_per_axis);
        dpp.push(dpp_check_bounded(&grid, &prob, k, &sites, bound)?);
    }
    let mut all = vec![&sub, &sup];
    all.extend(dpp.iter());
    print_summary(&all);
    let pass = all.iter().all(|r| r.pass);
    write_json(output, &json!({ "command": "check", "pass": pass, "sub": sub, "super": sup, "dpp": dpp }))?;
    Ok(pass)
}

fn cmd_study(cfg: &ProblemConfig, kind: StudyKind, tolerance: Option<f64>, output: Option<&Path>) -> Result<bool, Failure> {
    let prob = cfg.to_problem()?;
    let mut table = String::new();
    let pass = match kind {
        StudyKind::Filippov => {
            if cfg.checks.eps_list.is_empty() {
                return Err(Failure::input("checks.eps_list is empty"));
            }
            let tol = tolerance.unwrap_or(cfg.checks.filippov_tolerance);
            let report = filippov_study(
                &prob,
                &cfg.checks.eps_list,
                cfg.solver.dx,
                cfg.solver.dt,
                cfg.checks.samples_per_eps,
                tol,
            )?;
            table.push_str("eps,max_difference\n");
            for (eps, site) in cfg.checks.eps_list.iter().zip(&report.sites) {
                writeln!(table, "{eps},{}", site.residual).expect("string write");
            }
            report.pass
        }
        StudyKind::Refinement => {
            let ladder = &cfg.checks.refinement;
            if ladder.len() != 2 {
                return Err(Failure::input("checks.refinement must hold two [dx, dt] levels"));
            }
            let [dx1, dt1] = ladder[0];
            let [dx2, dt2] = ladder[1];
            let report = scheme_agreement(&prob, dx1, dt1, dx2, dt2)?;
            let d1 = report.summary["d1"];
            let d2 = report.summary["d2"];
            let r = dx2 / dx1;
            table.push_str("dx,dt,max_difference\n");
            writeln!(table, "{dx1},{dt1},{d1}").expect("string write");
            writeln!(table, "{dx2},{dt2},{d2}").expect("string write");
            writeln!(table, "{},{},", dx2 * r, dt2 * dt2 / dt1).expect("string write");
            report.pass
        }
    };
    match output {
        Some(p) => std::fs::write(p, &table).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        None => print!("{table}"),
    }
    eprintln!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}
