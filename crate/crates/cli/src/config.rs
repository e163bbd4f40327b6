//! TOML run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lingrowth::bvtools::BVFunction1D;
use lingrowth::datum::Datum;
use lingrowth::discretize::{io, Grid, GridField};
use lingrowth::geometry::Domain;
use lingrowth::integrand::{ConvexWeight, Integrand};
use lingrowth::solver::ContinuationSchedule;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `interval(0,1)`, `square`, `disc(cx,cy,r)`, `polygon(...)`, `l_shape`.
    pub domain: String,
    /// Cells along the longest axis.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_integrand")]
    pub integrand: String,
    pub lambda: f64,
    /// Analytic profile (`step(0.5)`, `bump`, `piecewise(0,0.5,1)`, ...),
    /// `csv:PATH` for a field written by `solve`, or `bv:PATH` for a JSON
    /// BV function. Relative paths resolve against the config file.
    pub datum: String,
    #[serde(default = "default_weights")]
    pub weights: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eps0: f64,
    pub factor: f64,
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_final: f64,
    pub steps: usize,
    /// Write every state as `state_KKKK.csv`.
    #[serde(default)]
    pub dump_states: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub allow_nonconvex_demo: bool,
}

fn default_cells() -> usize {
    256
}

fn default_integrand() -> String {
    "euclidean".into()
}

fn default_weights() -> Vec<String> {
    vec!["abs".into(), "square".into()]
}

fn default_tol() -> f64 {
    1e-10
}

pub const DEFAULT_SWEEP: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25];

/// Config with everything resolved against a grid.
pub struct Scenario {
    pub grid: Arc<Grid>,
    pub phi: Integrand,
    pub datum: GridField,
    /// The datum as a BV function, when it has an exact 1D representation.
    pub bv: Option<BVFunction1D>,
    pub weights: Vec<ConvexWeight>,
    pub schedule: ContinuationSchedule,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", path.display())))?;
        let config = RunConfig::parse(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: String| CliError::Parse(format!("field `{name}`: {msg}"));
        let domain = Domain::parse(&self.domain).map_err(|e| field("domain", e.to_string()))?;
        Integrand::parse(&self.integrand, domain.dim())
            .map_err(|e| field("integrand", e.to_string()))?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(field(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if self.cells == 0 {
            return Err(field("cells", "must be positive".into()));
        }
        for w in &self.weights {
            ConvexWeight::parse(w).map_err(|e| field("weights", e.to_string()))?;
        }
        if !(self.datum.starts_with("csv:") || self.datum.starts_with("bv:")) {
            Datum::parse(&self.datum).map_err(|e| field("datum", e.to_string()))?;
        }
        if let Some(s) = &self.schedule {
            ContinuationSchedule::new(s.eps0, s.factor, s.steps, s.tol)
                .map_err(|e| field("schedule", e.to_string()))?;
        }
        if let Some(f) = &self.flow {
            if !(f.t_final > 0.0 && f.t_final.is_finite()) {
                return Err(field("flow.t_final", "must be positive".into()));
            }
            if f.steps == 0 {
                return Err(field("flow.steps", "must be positive".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if s.lambdas.is_empty() || s.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(field("sweep.lambdas", "needs positive values".into()));
            }
        }
        Ok(())
    }

    pub fn allow_nonconvex_demo(&self) -> bool {
        self.verify.as_ref().is_some_and(|v| v.allow_nonconvex_demo)
    }

    /// Builds the grid, integrand, sampled datum and schedule. `base` is the
    /// directory relative datum paths resolve against.
    pub fn scenario(&self, base: &Path) -> Result<Scenario, CliError> {
        let domain = Domain::parse(&self.domain)?;
        let grid = Arc::new(Grid::new(domain.clone(), self.cells)?);
        let phi = Integrand::parse(&self.integrand, domain.dim())?;
        let (datum, bv) = if let Some(path) = self.datum.strip_prefix("csv:") {
            let path = base.join(path);
            let file = std::fs::File::open(&path).map_err(|e| {
                CliError::Parse(format!(
                    "field `datum`: cannot open {}: {e}",
                    path.display()
                ))
            })?;
            (io::read_csv(&grid, file)?, None)
        } else if let Some(path) = self.datum.strip_prefix("bv:") {
            let path = base.join(path);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Parse(format!(
                    "field `datum`: cannot open {}: {e}",
                    path.display()
                ))
            })?;
            let bv = BVFunction1D::from_json(&text)?;
            (bv.to_grid_field(&grid)?, Some(bv))
        } else {
            let d = Datum::parse(&self.datum)?;
            let bv = match &domain {
                Domain::Interval { a, b } => d.to_bv(*a, *b).ok(),
                _ => None,
            };
            (d.sample(&grid)?, bv)
        };
        let weights = self
            .weights
            .iter()
            .map(|w| ConvexWeight::parse(w))
            .collect::<lingrowth::Result<Vec<_>>>()?;
        let schedule = match &self.schedule {
            Some(s) => ContinuationSchedule::new(s.eps0, s.factor, s.steps, s.tol)?,
            None => ContinuationSchedule::default_for_spacing(grid.spacing()),
        };
        Ok(Scenario {
            grid,
            phi,
            datum,
            bv,
            weights,
            schedule,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
domain = "interval(0,1)"
cells = 128
integrand = "euclidean"
lambda = 0.1
datum = "step(0.5)"
weights = ["abs", "shifted(2)"]
seed = 7
suite = "psiest"

[schedule]
eps0 = 0.01
factor = 0.5
steps = 4

[flow]
t_final = 0.2
steps = 4

[sweep]
lambdas = [0.05, 0.1]
"#;

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(FULL).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        let minimal =
            RunConfig::parse("domain = \"square\"\nlambda = 0.2\ndatum = \"bump\"\n").unwrap();
        assert_eq!(minimal.cells, 256);
        assert_eq!(RunConfig::parse(&minimal.to_toml()).unwrap(), minimal);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = FULL.replace("lambda = 0.1", "lambda = -1");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("lambda"), "{msg}");
        let bad = FULL.replace("step(0.5)", "stair(0.5)");
        assert!(RunConfig::parse(&bad)
            .unwrap_err()
            .to_string()
            .contains("datum"));
        let bad = FULL.replace("cells = 128", "cells = \"many\"");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("line"), "{msg}");
        let bad = format!("{FULL}\nunknown = 1\n");
        assert!(RunConfig::parse(&bad).is_err());
    }
}
