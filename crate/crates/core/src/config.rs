//! TOML run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envmodel::{build_model, EnvironmentModel, ModelSpec};
use crate::error::{Error, Result};
use crate::fourier::SGrid;
use crate::simulate::SimPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    OracleCheck,
    Charfn,
    Clt,
    Edgeworth,
    Renewal,
    Diagnostics,
    FullAcceptance,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::OracleCheck,
        Experiment::Charfn,
        Experiment::Clt,
        Experiment::Edgeworth,
        Experiment::Renewal,
        Experiment::Diagnostics,
        Experiment::FullAcceptance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::OracleCheck => "oracle-check",
            Experiment::Charfn => "charfn",
            Experiment::Clt => "clt",
            Experiment::Edgeworth => "edgeworth",
            Experiment::Renewal => "renewal",
            Experiment::Diagnostics => "diagnostics",
            Experiment::FullAcceptance => "full-acceptance",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Simulation block: engine policy, generations, ensemble size and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub seed: u64,
    /// Generations at which results are reported.
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub trajectories: usize,
    #[serde(default)]
    pub exact_cap: Option<u64>,
    #[serde(default)]
    pub aggregate_cap: Option<f64>,
    #[serde(default)]
    pub survival_margin: Option<usize>,
    #[serde(default)]
    pub normal_approx_min_mean: Option<f64>,
}

impl SimBlock {
    pub fn policy(&self) -> Result<SimPolicy> {
        let d = SimPolicy::default();
        let p = SimPolicy {
            exact_cap: self.exact_cap.unwrap_or(d.exact_cap),
            aggregate_cap: self.aggregate_cap.unwrap_or(d.aggregate_cap),
            survival_margin: self.survival_margin.unwrap_or(d.survival_margin),
            normal_approx_min_mean: self.normal_approx_min_mean.unwrap_or(d.normal_approx_min_mean),
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn max_n(&self) -> usize {
        self.n.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub s_max: f64,
    pub points: usize,
}

impl GridBlock {
    pub fn grid(&self) -> Result<SGrid> {
        SGrid::symmetric(self.s_max, self.points).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeworthBlock {
    pub r: usize,
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalBlock {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub y_list: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    pub sim: SimBlock,
    #[serde(default)]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub edgeworth: Option<EdgeworthBlock>,
    #[serde(default)]
    pub renewal: Option<RenewalBlock>,
    #[serde(default)]
    pub output: Option<OutputBlock>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Structural checks that need no model evaluation.
    pub fn validate(&self) -> Result<()> {
        let need = |present: bool, block: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Config(format!("experiment `{}` needs a [{block}] block", self.experiment.name())))
            }
        };
        if self.experiment != Experiment::FullAcceptance {
            need(self.model.is_some(), "model")?;
            let needs_n = self.experiment != Experiment::Renewal;
            if (needs_n && self.sim.n.is_empty()) || self.sim.n.contains(&0) {
                return Err(Error::Config("sim.n must list generations >= 1".into()));
            }
            if self.sim.trajectories == 0 {
                return Err(Error::Config("sim.trajectories must be positive".into()));
            }
        }
        self.sim.policy()?;
        match self.experiment {
            Experiment::Charfn => {
                need(self.grid.is_some(), "grid")?;
                self.grid.as_ref().unwrap().grid()?;
            }
            Experiment::Edgeworth => {
                need(self.edgeworth.is_some(), "edgeworth")?;
                let e = self.edgeworth.as_ref().unwrap();
                if e.r < 3 || e.r as f64 > e.q - 1.0 {
                    return Err(Error::Config(format!(
                        "edgeworth order r = {} must satisfy r in [3, q-1] with q = {}",
                        e.r, e.q
                    )));
                }
            }
            Experiment::Renewal => {
                need(self.renewal.is_some(), "renewal")?;
                let r = self.renewal.as_ref().unwrap();
                if !(0.0 <= r.b && r.b < r.c) || r.y_list.is_empty() || r.y_list.iter().any(|y| !(*y > 0.0)) {
                    return Err(Error::Config("renewal needs 0 <= B < C and positive y values".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Build the model; hypothesis failures keep their own error kinds.
    pub fn model(&self) -> Result<EnvironmentModel> {
        let spec = self.model.as_ref().ok_or_else(|| Error::Config("missing [model] block".into()))?;
        build_model(spec).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn writes(&self, format: OutputFormat) -> bool {
        self.output.as_ref().is_none_or(|o| o.formats.contains(&format))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "edgeworth"

[model]
kind = "finite_mixture"
laws = [{ kind = "dirac", m = 2 }, { kind = "dirac", m = 3 }]
weights = [0.75, 0.25]

[sim]
seed = 7
n = [25]
trajectories = 1000

[edgeworth]
r = 3
q = 4
p = 2
"#;

    #[test]
    fn parses_reference_shape() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.experiment, Experiment::Edgeworth);
        assert_eq!(c.sim.policy().unwrap(), SimPolicy::default());
        assert!((c.model().unwrap().mu() - 0.794_513).abs() < 1e-6);
        assert!(c.writes(OutputFormat::Csv));
    }

    #[test]
    fn order_must_respect_moment_index() {
        let text = BASE.replace("r = 3", "r = 5");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("r in [3, q-1]"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        let typo = BASE.replace("trajectories", "trajectorys");
        assert_eq!(RunConfig::parse(&typo).unwrap_err().exit_code(), 1);
        let no_seed = BASE.replace("seed = 7\n", "");
        assert!(matches!(RunConfig::parse(&no_seed), Err(Error::Config(_))));
        let bad_exp = BASE.replace("\"edgeworth\"", "\"edgeworthh\"");
        assert!(RunConfig::parse(&bad_exp).is_err());
        let missing_block = BASE.replace("experiment = \"edgeworth\"", "experiment = \"renewal\"");
        assert!(RunConfig::parse(&missing_block).unwrap_err().to_string().contains("[renewal]"));
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
