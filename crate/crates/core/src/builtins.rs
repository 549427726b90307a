//! Shipped example problems. Their numeric values are artifact defaults,
//! documented in each file's header comment.

use crate::config::{ConfigError, ProblemConfig};

pub const NAMES: [&str; 6] = ["line-r3", "cross", "figure1-r3", "two-speed-1d", "two-cost-1d", "forbidden-r3"];

/// Annotated TOML source of a builtin.
pub fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "line-r3" => include_str!("../builtins/line-r3.toml"),
        "cross" => include_str!("../builtins/cross.toml"),
        "figure1-r3" => include_str!("../builtins/figure1-r3.toml"),
        "two-speed-1d" => include_str!("../builtins/two-speed-1d.toml"),
        "two-cost-1d" => include_str!("../builtins/two-cost-1d.toml"),
        "forbidden-r3" => include_str!("../builtins/forbidden-r3.toml"),
        _ => return None,
    })
}

pub fn builtin_problem(name: &str) -> Result<ProblemConfig, ConfigError> {
    let text = builtin_text(name).ok_or_else(|| ConfigError::UnknownBuiltin(name.to_string()))?;
    ProblemConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_builds() {
        for name in NAMES {
            let cfg = builtin_problem(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            if name != "forbidden-r3" {
                cfg.to_problem().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_problem("nope"), Err(ConfigError::UnknownBuiltin(_))));
    }

    #[test]
    fn round_trip_through_canonical_text() {
        for name in NAMES {
            let cfg = builtin_problem(name).unwrap();
            assert_eq!(ProblemConfig::parse(&cfg.to_toml()).unwrap(), cfg, "{name}");
        }
    }
}
