//! Run configuration (TOML). Every section rejects unknown keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{AlgorithmKind, Regime, Schedule};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::objectives::{
    generate_synthetic, ClientObjective, Dataset, Heterogeneity, MclrClient, Problem,
    QuadraticClient, SyntheticSpec,
};
use crate::sets::FeasibleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub schedule: ScheduleSection,
    pub set: SetSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub client_sets: Vec<SetSpec>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Directory that relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub participation: f64,
    /// Minibatch size for the stochastic algorithm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Common starting model; defaults to the set's canonical vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Also run the naive averaging baseline and write its trajectory.
    #[serde(default)]
    pub naive_baseline: bool,
    #[serde(default)]
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// convex | nonconvex | stochastic | partial-convex | partial-nonconvex
    pub regime: String,
    pub lambda0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// A scalar applied to every coordinate, or one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

impl Bound {
    fn expand(&self, dim: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Bound::Scalar(v) => Ok(vec![*v; dim]),
            Bound::PerCoordinate(v) if v.len() == dim => Ok(v.clone()),
            Bound::PerCoordinate(v) => Err(Error::Config(format!(
                "box {what} has {} entries for dimension {dim}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    L1Ball { radius: f64 },
    L2Ball { radius: f64 },
    Box { lo: Bound, hi: Bound },
    Simplex { scale: f64 },
}

impl SetSpec {
    pub fn build(&self, dim: usize) -> Result<FeasibleSet> {
        match self {
            SetSpec::L1Ball { radius } => FeasibleSet::l1_ball(dim, *radius),
            SetSpec::L2Ball { radius } => FeasibleSet::l2_ball(dim, *radius),
            SetSpec::Box { lo, hi } => {
                FeasibleSet::boxed(lo.expand(dim, "lo")?, hi.expand(dim, "hi")?)
            }
            SetSpec::Simplex { scale } => FeasibleSet::simplex(dim, *scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub target: Vec<f64>,
    #[serde(default = "one")]
    pub weight: f64,
    /// Use `-weight ||x - target||²` instead.
    #[serde(default)]
    pub concave: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        clients: Vec<QuadraticSpec>,
    },
    Synthetic {
        clients: usize,
        samples_per_client: usize,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        /// Omit for IID clients.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels_per_client: Option<usize>,
        /// Seed of the generated data (independent of the run seed).
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        mu: f64,
        #[serde(default = "yes")]
        intercept: bool,
    },
    MclrCsv {
        paths: Vec<PathBuf>,
        classes: usize,
        #[serde(default)]
        mu: f64,
        #[serde(default = "yes")]
        intercept: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// `||Y*||` used by the consensus envelope.
    #[serde(default)]
    pub dual_norm: f64,
    /// Iteration budget of the centralized FW reference runs.
    #[serde(default = "default_reference_iterations")]
    pub reference_iterations: usize,
    /// Noise level for the stochastic envelope, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            dual_norm: 0.0,
            reference_iterations: default_reference_iterations(),
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub participation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

fn default_algorithm() -> String {
    "fedfw".into()
}
fn default_rounds() -> usize {
    100
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_features() -> usize {
    60
}
fn default_classes() -> usize {
    10
}
fn default_reference_iterations() -> usize {
    10_000
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn algorithm(&self) -> Result<AlgorithmKind> {
        self.run.algorithm.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let algorithm = self.algorithm()?;
        if self.run.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        let p = self.run.participation;
        if !(p > 0.0 && p <= 1.0) {
            return bad(format!("participation must be in (0, 1], got {p}"));
        }
        if self.run.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let schedule = self.schedule()?;
        if algorithm == AlgorithmKind::FedFwSto {
            if !schedule.has_rho() {
                return bad("fedfw-sto needs regime = \"stochastic\" or an explicit rho".into());
            }
            if self.run.batch_size.is_none_or(|b| b == 0) {
                return bad("fedfw-sto needs batch_size >= 1".into());
            }
        }
        if let Some(sweep) = &self.sweep {
            if let Some(l) = sweep.lambda0.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                return bad(format!("sweep lambda0 {l} must be positive"));
            }
            if let Some(q) = sweep
                .participation
                .iter()
                .find(|q| !(**q > 0.0 && **q <= 1.0))
            {
                return bad(format!("sweep participation {q} must be in (0, 1]"));
            }
        }
        if let ProblemSpec::MclrCsv { paths, .. } = &self.problem {
            if paths.is_empty() {
                return bad("mclr-csv needs at least one path".into());
            }
            for p in paths {
                let full = self.resolve(p);
                if !full.is_file() {
                    return bad(format!("dataset {} does not exist", full.display()));
                }
            }
        }
        if let ProblemSpec::Quadratic { clients } = &self.problem {
            if clients.is_empty() {
                return bad("quadratic problem needs at least one client".into());
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn regime(&self) -> Result<Regime> {
        let horizon = self.run.rounds;
        let participation = self.run.participation;
        Ok(match self.schedule.regime.as_str() {
            "convex" => Regime::ConvexT1,
            "nonconvex" => Regime::NonconvexT2 { horizon },
            "stochastic" => Regime::StoT3,
            "partial-convex" => Regime::PartialConvex { participation },
            "partial-nonconvex" => Regime::PartialNonconvex { horizon, participation },
            other => {
                return Err(Error::Config(format!(
                    "unknown regime {other:?} (expected convex, nonconvex, stochastic, partial-convex or partial-nonconvex)"
                )))
            }
        })
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = Schedule::new(self.regime()?, self.schedule.lambda0)?;
        match self.schedule.rho {
            Some(rho) => s.with_rho(rho),
            None => Ok(s),
        }
    }

    pub fn init(&self) -> Option<Vector> {
        self.run.init.clone().map(Vector::from)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let clients: Vec<ClientObjective> = match &self.problem {
            ProblemSpec::Quadratic { clients } => clients
                .iter()
                .map(|c| {
                    let target = Vector::new(c.target.clone())?;
                    let q = if c.concave {
                        QuadraticClient::concave(target, c.weight)?
                    } else {
                        QuadraticClient::new(target, c.weight)?
                    };
                    Ok(q.into())
                })
                .collect::<Result<_>>()?,
            ProblemSpec::Synthetic {
                clients,
                samples_per_client,
                features,
                classes,
                labels_per_client,
                seed,
                mu,
                intercept,
            } => {
                let spec = SyntheticSpec {
                    clients: *clients,
                    samples_per_client: *samples_per_client,
                    features: *features,
                    classes: *classes,
                    heterogeneity: match labels_per_client {
                        Some(k) => Heterogeneity::NonIid {
                            labels_per_client: *k,
                        },
                        None => Heterogeneity::Iid,
                    },
                    seed: *seed,
                };
                generate_synthetic(&spec)?
                    .into_iter()
                    .map(|d| Ok(MclrClient::new(d, *classes, *mu, *intercept)?.into()))
                    .collect::<Result<_>>()?
            }
            ProblemSpec::MclrCsv {
                paths,
                classes,
                mu,
                intercept,
            } => paths
                .iter()
                .map(|p| {
                    let data = Dataset::from_csv(&self.resolve(p))?;
                    Ok(MclrClient::new(data, *classes, *mu, *intercept)?.into())
                })
                .collect::<Result<_>>()?,
        };
        Problem::new(clients)
    }

    pub fn build_set(&self, dim: usize) -> Result<FeasibleSet> {
        self.set.build(dim)
    }

    /// Per-client sets, or `None` when every client uses the global set.
    pub fn build_client_sets(&self, n: usize, dim: usize) -> Result<Option<Vec<FeasibleSet>>> {
        if self.client_sets.is_empty() {
            return Ok(None);
        }
        if self.client_sets.len() != n {
            return Err(Error::Config(format!(
                "{} client_sets entries for {n} clients",
                self.client_sets.len()
            )));
        }
        self.client_sets
            .iter()
            .map(|s| s.build(dim))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Copy of this config with the sweep axes overridden.
    pub fn with_cell(&self, lambda0: f64, participation: f64, seed: u64) -> Self {
        let mut c = self.clone();
        c.schedule.lambda0 = lambda0;
        c.run.participation = participation;
        c.run.seed = seed;
        c.sweep = None;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[run]
algorithm = "fedfw"
rounds = 50
seed = 3
init = [0.0]

[schedule]
regime = "convex"
lambda0 = 0.5

[set]
kind = "box"
lo = -1.0
hi = 1.0

[problem]
kind = "quadratic"
clients = [{ target = [3.0] }, { target = [-1.0], weight = 1.0 }]
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_toml(BASIC).unwrap();
        let problem = cfg.build_problem().unwrap();
        assert_eq!(problem, Problem::counterexample());
        assert_eq!(
            cfg.build_set(1).unwrap(),
            FeasibleSet::uniform_box(1, -1.0, 1.0).unwrap()
        );
        assert_eq!(cfg.regime().unwrap(), Regime::ConvexT1);
        assert_eq!(cfg.run.participation, 1.0);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let typo = BASIC.replace("lambda0 = 0.5", "lamda0 = 0.5");
        assert!(matches!(RunConfig::from_toml(&typo), Err(Error::Config(_))));
        let extra = BASIC.replace("seed = 3", "seed = 3\nsede = 4");
        assert!(RunConfig::from_toml(&extra).is_err());
        let set_typo = BASIC.replace("hi = 1.0", "hi = 1.0\nradius = 2.0");
        assert!(RunConfig::from_toml(&set_typo).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (from, to) in [
            ("rounds = 50", "rounds = 0"),
            ("lambda0 = 0.5", "lambda0 = -1.0"),
            ("seed = 3", "seed = 3\nparticipation = 0.0"),
            ("regime = \"convex\"", "regime = \"fast\""),
            ("algorithm = \"fedfw\"", "algorithm = \"fedfw-sto\""),
        ] {
            assert!(
                RunConfig::from_toml(&BASIC.replace(from, to)).is_err(),
                "{to}"
            );
        }
    }

    #[test]
    fn missing_dataset_rejected() {
        let text = BASIC.replace(
            "kind = \"quadratic\"\nclients = [{ target = [3.0] }, { target = [-1.0], weight = 1.0 }]",
            "kind = \"mclr-csv\"\npaths = [\"/nonexistent/c0.csv\"]\nclasses = 3",
        );
        let e = RunConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("does not exist"), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(BASIC).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
