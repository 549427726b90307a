//! Problem configuration files (TOML).
//!
//! ```toml
//! dimension = 1
//! horizon = 1.0
//! bound = 2.0
//! closure_mode = "hull-of-limits"
//!
//! [box]
//! lo = [-2.0]
//! hi = [2.0]
//!
//! [[strata]]
//! id = 0
//! dim = 0
//! basepoint = [0.0]
//! basis = []
//!
//! [[strata]]
//! id = 1
//! dim = 1
//! basepoint = [0.0]
//! basis = [[1.0]]
//! cell = [{ normal = [1.0], offset = 0.0, sense = "lt" }]
//!
//! [[regions]]
//! stratum = 1
//! generators = [[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
//!
//! [terminal]
//! kind = "distance"
//! center = [1.0]
//!
//! [solver]
//! dx = 0.01
//! dt = 0.005
//! ```
//!
//! Each generator row is `[b_1, ..., b_N, l]`. Region `scale` tables take a
//! `kind` of `none`, `affine` (`offset`, `gradient`), `radial`, `quadratic`
//! (`coeffs`) or `step` (`axis`, `threshold`, `below`, `above`). The optional
//! `[checks]` table holds seeds, tolerances and study parameters. Terminal
//! costs take a `kind` of `distance` (`center`), `cone` (`center`, `slope`,
//! `cap`), `quadratic` (`center`, `weight`), `constant` (`value`) or `table`
//! (`lo`, `hi`, `shape`, `values`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{BLMap, ClosureMode, GeneratorSet, RegionRule, ScaleFactor, SpecificSet};
use crate::geometry::{CellConstraint, FlatStratification, Stratum};
use crate::solver::{StratifiedProblem, TerminalCost};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumConfig {
    pub id: usize,
    pub dim: usize,
    pub basepoint: Vec<f64>,
    #[serde(default)]
    pub basis: Vec<Vec<f64>>,
    #[serde(default)]
    pub cell: Vec<CellConstraint>,
}

fn is_unscaled(s: &ScaleFactor) -> bool {
    *s == ScaleFactor::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub stratum: usize,
    pub generators: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_unscaled")]
    pub scale: ScaleFactor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecificConfig {
    pub stratum: usize,
    pub generators: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
}

/// Seeds, tolerances and study parameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub seed: u64,
    pub sample_density: f64,
    pub delta_target: f64,
    /// Viscosity-check tolerance; `10 (dx + dt)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub tau_steps: Vec<usize>,
    pub dpp_sites_per_axis: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps_list: Vec<f64>,
    pub samples_per_eps: usize,
    pub filippov_tolerance: f64,
    /// `[[dx1, dt1], [dx2, dt2]]`
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub refinement: Vec<[f64; 2]>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            seed: 0,
            sample_density: 4.0,
            delta_target: 1.0,
            tolerance: None,
            tau_steps: vec![1, 2, 4],
            dpp_sites_per_axis: 20,
            eps_list: Vec::new(),
            samples_per_eps: 3,
            filippov_tolerance: 0.1,
            refinement: Vec::new(),
        }
    }
}

fn is_default_checks(c: &ChecksConfig) -> bool {
    *c == ChecksConfig::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub horizon: f64,
    pub bound: f64,
    #[serde(default)]
    pub closure_mode: ClosureMode,
    #[serde(rename = "box")]
    pub bbox: BoxConfig,
    pub strata: Vec<StratumConfig>,
    pub regions: Vec<RegionConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub specific: Vec<SpecificConfig>,
    pub terminal: TerminalCost,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "is_default_checks")]
    pub checks: ChecksConfig,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ProblemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        if let Some(name) = path.strip_prefix("builtin:") {
            return crate::builtins::builtin_problem(name);
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Shape and finiteness checks with field paths; structural checks of the
    /// stratification and dynamics happen in [`ProblemConfig::to_problem`].
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.dimension;
        if n == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        let finite = |field: String, v: &[f64]| -> Result<(), ConfigError> {
            match v.iter().position(|x| !x.is_finite()) {
                Some(i) => Err(invalid(format!("{field}[{i}]"), "must be finite")),
                None => Ok(()),
            }
        };
        let len = |field: String, v: &[f64], want: usize| -> Result<(), ConfigError> {
            finite(field.clone(), v)?;
            if v.len() != want {
                return Err(invalid(field, format!("expected {want} entries, found {}", v.len())));
            }
            Ok(())
        };
        finite("horizon".into(), &[self.horizon])?;
        finite("bound".into(), &[self.bound])?;
        if self.horizon <= 0.0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.bound <= 0.0 {
            return Err(invalid("bound", "must be positive"));
        }
        len("box.lo".into(), &self.bbox.lo, n)?;
        len("box.hi".into(), &self.bbox.hi, n)?;
        for (i, s) in self.strata.iter().enumerate() {
            len(format!("strata[{i}].basepoint"), &s.basepoint, n)?;
            if s.basis.len() != s.dim {
                return Err(invalid(
                    format!("strata[{i}].basis"),
                    format!("dim = {} but {} basis vectors", s.dim, s.basis.len()),
                ));
            }
            for (j, b) in s.basis.iter().enumerate() {
                len(format!("strata[{i}].basis[{j}]"), b, n)?;
            }
            for (j, c) in s.cell.iter().enumerate() {
                len(format!("strata[{i}].cell[{j}].normal"), &c.normal, n)?;
                finite(format!("strata[{i}].cell[{j}].offset"), &[c.offset])?;
            }
        }
        let rows = |field: String, g: &[Vec<f64>]| -> Result<(), ConfigError> {
            if g.is_empty() {
                return Err(invalid(field, "needs at least one generator"));
            }
            for (j, r) in g.iter().enumerate() {
                len(format!("{field}[{j}]"), r, n + 1)?;
            }
            Ok(())
        };
        for (i, r) in self.regions.iter().enumerate() {
            rows(format!("regions[{i}].generators"), &r.generators)?;
        }
        for (i, r) in self.specific.iter().enumerate() {
            rows(format!("specific[{i}].generators"), &r.generators)?;
        }
        match &self.terminal {
            TerminalCost::Distance { center } => len("terminal.center".into(), center, n)?,
            TerminalCost::Cone { center, slope, cap } => {
                len("terminal.center".into(), center, n)?;
                finite("terminal.slope".into(), &[*slope, *cap])?;
            }
            TerminalCost::Quadratic { center, weight } => {
                len("terminal.center".into(), center, n)?;
                finite("terminal.weight".into(), &[*weight])?;
            }
            TerminalCost::Constant { value } => finite("terminal.value".into(), &[*value])?,
            TerminalCost::Table { lo, hi, shape, values } => {
                len("terminal.lo".into(), lo, n)?;
                len("terminal.hi".into(), hi, n)?;
                if shape.len() != n || shape.iter().any(|k| *k < 2) {
                    return Err(invalid("terminal.shape", format!("expected {n} node counts of at least 2")));
                }
                len("terminal.values".into(), values, shape.iter().product())?;
            }
        }
        for (field, v) in [("solver.dx", self.solver.dx), ("solver.dt", self.solver.dt)] {
            finite(field.into(), &[v])?;
            if v <= 0.0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        let c = &self.checks;
        finite("checks.sample_density".into(), &[c.sample_density, c.delta_target, c.filippov_tolerance])?;
        finite("checks.eps_list".into(), &c.eps_list)?;
        if c.sample_density <= 0.0 || c.delta_target <= 0.0 {
            return Err(invalid("checks", "sample_density and delta_target must be positive"));
        }
        if c.samples_per_eps == 0 {
            return Err(invalid("checks.samples_per_eps", "must be at least 1"));
        }
        if let Some(t) = c.tolerance {
            finite("checks.tolerance".into(), &[t])?;
        }
        Ok(())
    }

    pub fn stratification(&self) -> Result<FlatStratification, ConfigError> {
        let mut strata = Vec::with_capacity(self.strata.len());
        for (i, s) in self.strata.iter().enumerate() {
            let st = Stratum::new(s.id, s.basepoint.clone(), s.basis.clone(), s.cell.clone())
                .map_err(|e| invalid(format!("strata[{i}]"), e.to_string()))?;
            strata.push(st);
        }
        FlatStratification::new(self.bbox.lo.clone(), self.bbox.hi.clone(), strata)
            .map_err(|e| invalid("strata", e.to_string()))
    }

    pub fn to_problem(&self) -> Result<StratifiedProblem, ConfigError> {
        let strat = self.stratification()?;
        let n = self.dimension;
        let mut rules = Vec::new();
        for (i, r) in self.regions.iter().enumerate() {
            match strat.stratum(r.stratum) {
                Some(s) if s.dim == n => {}
                _ => {
                    return Err(invalid(
                        format!("regions[{i}].stratum"),
                        format!("{} is not a top-dimensional stratum", r.stratum),
                    ))
                }
            }
            let generators = GeneratorSet::from_rows(n, &r.generators)
                .map_err(|e| invalid(format!("regions[{i}].generators"), e.to_string()))?;
            rules.push(RegionRule { region: r.stratum, generators, scale: r.scale.clone() });
        }
        for region in strat.regions() {
            if !rules.iter().any(|r| r.region == region.id) {
                return Err(invalid("regions", format!("no rule for region {}", region.id)));
            }
        }
        let mut specific = Vec::new();
        for (i, s) in self.specific.iter().enumerate() {
            if strat.stratum(s.stratum).is_none() {
                return Err(invalid(format!("specific[{i}].stratum"), format!("unknown stratum {}", s.stratum)));
            }
            let generators = GeneratorSet::from_rows(n, &s.generators)
                .map_err(|e| invalid(format!("specific[{i}].generators"), e.to_string()))?;
            specific.push(SpecificSet { stratum: s.stratum, generators });
        }
        let map = BLMap::new(n, rules, specific, self.closure_mode);
        StratifiedProblem::new(strat, map, self.terminal.clone(), self.horizon, self.bound)
            .map_err(|e| invalid("problem", e.to_string()))
    }

    pub fn tolerance(&self) -> f64 {
        self.checks.tolerance.unwrap_or(10.0 * (self.solver.dx + self.solver.dt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = r#"
dimension = 1
horizon = 1.0
bound = 2.0

[box]
lo = [-2.0]
hi = [2.0]

[[strata]]
id = 0
dim = 0
basepoint = [0.0]

[[strata]]
id = 1
dim = 1
basepoint = [0.0]
basis = [[1.0]]
cell = [{ normal = [1.0], offset = 0.0, sense = "lt" }]

[[strata]]
id = 2
dim = 1
basepoint = [0.0]
basis = [[1.0]]
cell = [{ normal = [1.0], offset = 0.0, sense = "gt" }]

[[regions]]
stratum = 1
generators = [[-1.0, 0.0], [1.0, 0.0]]

[[regions]]
stratum = 2
generators = [[-2.0, 0.0], [2.0, 0.0]]
scale = { kind = "affine", offset = 1.0, gradient = [0.0] }

[terminal]
kind = "distance"
center = [1.0]

[solver]
dx = 0.01
dt = 0.005
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ProblemConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.closure_mode, ClosureMode::HullOfLimitsUnionSpecific);
        let prob = cfg.to_problem().unwrap();
        assert_eq!(prob.strat.strata.len(), 3);
        assert_eq!(cfg.tolerance(), 10.0 * 0.015);
    }

    #[test]
    fn missing_field_is_named() {
        let text = SAMPLE.replace("horizon = 1.0\n", "");
        let err = ProblemConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }

    #[test]
    fn field_paths_in_diagnostics() {
        let text = SAMPLE.replace("[[-2.0, 0.0], [2.0, 0.0]]", "[[-2.0, 0.0], [2.0]]");
        let err = ProblemConfig::parse(&text).unwrap_err().to_string();
        assert!(err.starts_with("regions[1].generators[1]"), "{err}");
        let text = SAMPLE.replace("dt = 0.005", "dt = nan");
        let err = ProblemConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("solver.dt"), "{err}");
    }

    #[test]
    fn missing_region_rule_rejected() {
        let text = SAMPLE.replace("[[regions]]\nstratum = 1\ngenerators = [[-1.0, 0.0], [1.0, 0.0]]\n", "");
        let err = ProblemConfig::parse(&text).unwrap().to_problem().unwrap_err().to_string();
        assert!(err.contains("region 1"), "{err}");
    }

    #[test]
    fn canonical_form_is_stable() {
        let cfg = ProblemConfig::parse(SAMPLE).unwrap();
        let text = cfg.to_toml();
        let again = ProblemConfig::parse(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), text);
    }

    fn finite() -> impl Strategy<Value = f64> {
        -1e6f64..1e6
    }

    fn scale() -> impl Strategy<Value = ScaleFactor> {
        prop_oneof![
            Just(ScaleFactor::None),
            Just(ScaleFactor::Radial),
            (finite(), finite()).prop_map(|(o, g)| ScaleFactor::Affine { offset: o, gradient: vec![g, 0.0] }),
            (0usize..2, finite(), finite(), finite())
                .prop_map(|(axis, threshold, below, above)| ScaleFactor::Step { axis, threshold, below, above }),
        ]
    }

    fn terminal() -> impl Strategy<Value = TerminalCost> {
        prop_oneof![
            (finite(), finite()).prop_map(|(a, b)| TerminalCost::Distance { center: vec![a, b] }),
            (finite(), finite(), finite()).prop_map(|(a, s, c)| TerminalCost::Cone { center: vec![a, 0.0], slope: s, cap: c }),
            finite().prop_map(|v| TerminalCost::Constant { value: v }),
        ]
    }

    prop_compose! {
        fn config()(
            horizon in 0.01f64..10.0,
            bound in 0.1f64..10.0,
            gens in prop::collection::vec(prop::collection::vec(finite(), 3), 1..5),
            sc in scale(),
            term in terminal(),
            seed in any::<u64>(),
            eps in prop::collection::vec(0.01f64..1.0, 0..3),
            union in any::<bool>(),
        ) -> ProblemConfig {
            ProblemConfig {
                dimension: 2,
                horizon,
                bound,
                closure_mode: if union { ClosureMode::HullOfLimitsUnionSpecific } else { ClosureMode::HullOfLimits },
                bbox: BoxConfig { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] },
                strata: vec![StratumConfig {
                    id: 3,
                    dim: 2,
                    basepoint: vec![0.0, 0.0],
                    basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    cell: vec![],
                }],
                regions: vec![RegionConfig { stratum: 3, generators: gens.clone(), scale: sc }],
                specific: if union { vec![SpecificConfig { stratum: 3, generators: gens }] } else { vec![] },
                terminal: term,
                solver: SolverConfig { dx: 0.1, dt: 0.05 },
                checks: ChecksConfig { seed, eps_list: eps, ..ChecksConfig::default() },
            }
        }
    }

    proptest! {
        #[test]
        fn toml_round_trip(cfg in config()) {
            let text = cfg.to_toml();
            let back = ProblemConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_toml(), text);
        }
    }
}
