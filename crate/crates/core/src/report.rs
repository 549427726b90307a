//! Pass/fail records shared by the assumption checkers and the viscosity checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub label: String,
    pub location: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<usize>,
    pub residual: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<Vec<f64>>,
}

impl SiteRecord {
    pub fn new(label: impl Into<String>, location: Vec<f64>, residual: f64) -> Self {
        SiteRecord {
            label: label.into(),
            location,
            time: None,
            stratum: None,
            residual,
            pass: true,
            witness: Vec::new(),
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn on_stratum(mut self, id: usize) -> Self {
        self.stratum = Some(id);
        self
    }

    pub fn with_witness(mut self, w: Vec<Vec<f64>>) -> Self {
        self.witness = w;
        self
    }
}

/// Outcome of one check. `pass` holds iff every site residual is at most
/// `tolerance`; sites are kept in the order they were produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub tolerance: f64,
    pub sites: Vec<SiteRecord>,
    pub max_residual: f64,
    pub failures: usize,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        CheckReport {
            check: check.into(),
            tolerance,
            sites: Vec::new(),
            max_residual: 0.0,
            failures: 0,
            pass: true,
            summary: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, mut site: SiteRecord) {
        site.pass = site.residual <= self.tolerance;
        self.sites.push(site);
    }

    pub fn note(&mut self, key: impl Into<String>, value: f64) {
        self.summary.insert(key.into(), value);
    }

    /// Recomputes the aggregate fields from the site list.
    pub fn finish(mut self) -> Self {
        self.max_residual = self
            .sites
            .iter()
            .map(|s| s.residual)
            .fold(f64::NEG_INFINITY, f64::max);
        if self.sites.is_empty() {
            self.max_residual = 0.0;
        }
        self.failures = self.sites.iter().filter(|s| !s.pass).count();
        self.pass = self.failures == 0;
        self
    }

    pub fn site(&self, label: &str) -> Option<&SiteRecord> {
        self.sites.iter().find(|s| s.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_all_sites_within_tolerance() {
        let mut r = CheckReport::new("demo", 0.1);
        r.push(SiteRecord::new("a", vec![0.0], 0.05));
        r.push(SiteRecord::new("b", vec![1.0], 0.2));
        let r = r.finish();
        assert!(!r.pass);
        assert_eq!(r.failures, 1);
        assert_eq!(r.max_residual, 0.2);
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
