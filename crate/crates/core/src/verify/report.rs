use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of one numerical inequality check `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub tolerance: f64,
    /// `slack >= -tolerance`.
    pub pass: bool,
    pub scenario: String,
    /// Demonstration rows are recorded but never asserted.
    #[serde(default)]
    pub demonstration: bool,
    /// Smoothing parameter of the row, when it belongs to an epsilon stage.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl EstimateReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64, scenario: impl Into<String>) -> Self {
        let slack = rhs - lhs;
        EstimateReport {
            name: name.into(),
            lhs,
            rhs,
            slack,
            tolerance,
            pass: slack >= -tolerance,
            scenario: scenario.into(),
            demonstration: false,
            epsilon: None,
        }
    }

    pub fn at_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn as_demonstration(mut self) -> Self {
        self.demonstration = true;
        self
    }

    /// Passed, or a demonstration row.
    pub fn ok(&self) -> bool {
        self.pass || self.demonstration
    }
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} lhs={:.6e} rhs={:.6e} slack={:.3e} tol={:.1e} ({})",
            if self.demonstration {
                "DEMO"
            } else if self.pass {
                "PASS"
            } else {
                "FAIL"
            },
            self.name,
            self.lhs,
            self.rhs,
            self.slack,
            self.tolerance,
            self.scenario
        )
    }
}

/// CSV with one row per report.
pub fn write_reports_csv<W: std::io::Write>(reports: &[EstimateReport], out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "name", "scenario", "epsilon", "lhs", "rhs", "slack", "tolerance", "pass", "demonstration",
    ])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.scenario.clone(),
            r.epsilon.map(|e| format!("{e}")).unwrap_or_default(),
            format!("{}", r.lhs),
            format!("{}", r.rhs),
            format!("{}", r.slack),
            format!("{}", r.tolerance),
            format!("{}", r.pass),
            format!("{}", r.demonstration),
        ])?;
    }
    w.flush()?;
    Ok(())
}
