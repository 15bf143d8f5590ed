//! Experiment reports and the files written for them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// One estimated or exactly computed number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub series: String,
    pub x: f64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Set for values computed without sampling error.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub exact: bool,
}

impl Estimate {
    pub fn sampled(series: impl Into<String>, x: f64, value: f64, stderr: f64) -> Self {
        Self {
            series: series.into(),
            x,
            value,
            stderr: Some(stderr),
            exact: false,
        }
    }

    pub fn exact(series: impl Into<String>, x: f64, value: f64) -> Self {
        Self {
            series: series.into(),
            x,
            value,
            stderr: None,
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ks {
    pub stat: f64,
    pub critical_1pct: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equals,
}

/// A declared tolerance band and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub exact: bool,
    pub comparison: Comparison,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, stderr: Option<f64>, comparison: Comparison, bound: f64) -> Self {
        let pass = match comparison {
            Comparison::AtMost => value <= bound,
            Comparison::AtLeast => value >= bound,
            Comparison::Equals => value == bound,
        };
        Self {
            name: name.into(),
            value,
            exact: stderr.is_none(),
            stderr,
            comparison,
            bound,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub system: serde_json::Value,
    pub measure: serde_json::Value,
    pub observable: serde_json::Value,
    pub grids: BTreeMap<String, Vec<f64>>,
    pub estimates: Vec<Estimate>,
    pub ks: Option<Ks>,
    pub verdict: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub(crate) fn finish(&mut self) {
        self.verdict = if self.passed() { "PASS" } else { "FAIL" }.into();
    }

    pub fn summary_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;

        let mut data = csv::Writer::from_path(dir.join("data.csv"))?;
        data.write_record(["series", "x", "estimate", "stderr", "exact"])?;
        for e in &self.estimates {
            data.write_record([
                e.series.clone(),
                e.x.to_string(),
                e.value.to_string(),
                e.stderr.map(|s| s.to_string()).unwrap_or_default(),
                e.exact.to_string(),
            ])?;
        }
        data.flush()?;

        let mut plot = csv::Writer::from_path(dir.join("plot.csv"))?;
        plot.write_record(["series", "x", "y", "stderr"])?;
        for e in &self.estimates {
            plot.write_record([
                e.series.clone(),
                e.x.to_string(),
                e.value.to_string(),
                e.stderr.unwrap_or(0.0).to_string(),
            ])?;
        }
        plot.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare() {
        assert!(Check::new("a", 0.01, Some(0.001), Comparison::AtMost, 0.02).pass);
        assert!(!Check::new("b", 0.05, None, Comparison::AtLeast, 0.1).pass);
        assert!(Check::new("c", 1.0, None, Comparison::Equals, 1.0).exact);
    }

    #[test]
    fn exactness_marker_serializes() {
        let e = serde_json::to_value(Estimate::exact("ref", 1.0, 0.5)).unwrap();
        assert_eq!(e["exact"], true);
        assert!(e.get("stderr").is_none());
        let s = serde_json::to_value(Estimate::sampled("h", 1.0, 0.5, 0.01)).unwrap();
        assert!(s.get("exact").is_none());
        assert_eq!(s["stderr"], 0.01);
    }
}
