//! TOML scenario description.
//!
//! ```toml
//! seed = 7
//! alpha = 0.8
//! N = 2
//! q = 0.9
//! s = 0.7          # or: p0 = [...]
//! shuffle_ranks = false
//! C = 2            # or: c = [...]
//! v = "uniform"    # or: v = [0.7, 0.3]   or: v = { zipf = 1.0 }
//!
//! [graph]
//! kind = "poisson" # or "edgelist" / "matrix"
//! K = 100
//! mean_degree = 8.0
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, ComponentOrder, DataError, GraphStats, IngestOptions};
use crate::model::{ModelError, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Click probabilities over the recommendation slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClickSpec {
    /// Only `"uniform"` is accepted.
    Named(String),
    Explicit(Vec<f64>),
    Zipf { zipf: f64 },
}

impl Default for ClickSpec {
    fn default() -> Self {
        ClickSpec::Named("uniform".into())
    }
}

impl ClickSpec {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>, ConfigError> {
        match self {
            ClickSpec::Named(name) if name == "uniform" => Ok(vec![1.0 / n as f64; n]),
            ClickSpec::Named(other) => Err(ConfigError::Invalid(format!("unknown click model `{other}`"))),
            ClickSpec::Explicit(v) if v.len() == n => Ok(v.clone()),
            ClickSpec::Explicit(v) => Err(ConfigError::Invalid(format!("v has {} entries for N = {n}", v.len()))),
            ClickSpec::Zipf { zipf } => Ok(data::zipf_clicks(n, *zipf)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    Poisson {
        #[serde(rename = "K")]
        k: usize,
        mean_degree: f64,
    },
    Edgelist {
        path: PathBuf,
        #[serde(default = "no_threshold")]
        threshold: f64,
        #[serde(default)]
        order: ComponentOrder,
    },
    Matrix {
        u: Vec<Vec<f64>>,
    },
}

fn no_threshold() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub q: f64,
    /// Zipf exponent for popularity; ignored when `p0` is set.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    /// Assign Zipf ranks by a seeded random permutation instead of index order.
    #[serde(default)]
    pub shuffle_ranks: bool,
    /// Number of cached items; ignored when `c` is set.
    #[serde(rename = "C", default)]
    pub cache: Option<usize>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub v: ClickSpec,
    pub graph: GraphSpec,
}

/// A constructed scenario with the statistics of its similarity graph.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub stats: GraphStats,
    /// Original ids when the graph came from an edge list.
    pub ids: Option<Vec<u64>>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative edge-list paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let GraphSpec::Edgelist { path: p, .. } = &mut cfg.graph {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build(&self) -> Result<BuiltScenario, ConfigError> {
        let (u, stats, ids) = match &self.graph {
            GraphSpec::Poisson { k, mean_degree } => {
                let (u, stats) = data::gen_poisson_graph(*k, *mean_degree, self.seed)?;
                (u, stats, None)
            }
            GraphSpec::Edgelist { path, threshold, order } => {
                let g = data::load_edgelist(path, IngestOptions { threshold: *threshold, order: *order })?;
                (g.u, g.stats, Some(g.ids))
            }
            GraphSpec::Matrix { u } => {
                let k = u.len();
                if u.iter().any(|row| row.len() != k) {
                    return Err(ConfigError::Invalid("similarity matrix must be square".into()));
                }
                let mut m = DMatrix::from_fn(k, k, |i, j| u[i][j]);
                m.fill_diagonal(0.0);
                let stats = data::graph_stats(&m);
                (m, stats, None)
            }
        };
        let k = u.nrows();

        let p0 = match (&self.p0, self.s) {
            (Some(p), _) if p.len() == k => DVector::from_vec(p.clone()),
            (Some(p), _) => return Err(ConfigError::Invalid(format!("p0 has {} entries for K = {k}", p.len()))),
            (None, s) => {
                let ranks = self.shuffle_ranks.then(|| data::random_ranks(k, self.seed));
                data::zipf_popularity(k, s.unwrap_or(0.0), ranks.as_deref())?
            }
        };
        let costs = match (&self.c, self.cache) {
            (Some(c), _) if c.len() == k => DVector::from_vec(c.clone()),
            (Some(c), _) => return Err(ConfigError::Invalid(format!("c has {} entries for K = {k}", c.len()))),
            (None, Some(cache)) => data::place_cache(&p0, cache)?,
            (None, None) => return Err(ConfigError::Invalid("either C or c is required".into())),
        };
        if self.n == 0 {
            return Err(ConfigError::Invalid("N must be positive".into()));
        }
        let v = self.v.resolve(self.n)?;
        let scenario = Scenario::new(u, costs, p0, self.alpha, self.n, self.q)?.with_clicks(v)?;
        Ok(BuiltScenario { scenario, stats, ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POISSON: &str = r#"
        seed = 3
        alpha = 0.8
        N = 2
        q = 0.9
        s = 0.7
        C = 2
        [graph]
        kind = "poisson"
        K = 40
        mean_degree = 8.0
    "#;

    #[test]
    fn poisson_config_builds() {
        let cfg = ScenarioConfig::from_toml(POISSON).unwrap();
        assert_eq!(cfg.v, ClickSpec::default());
        let b = cfg.build().unwrap();
        let s = &b.scenario;
        assert_eq!((s.k(), s.n()), (40, 2));
        assert_eq!(s.costs().iter().filter(|&&c| c == 0.0).count(), 2);
        assert_eq!(s.costs()[0], 0.0);
        assert!(s.uniform_clicks());
        assert_eq!(b.stats, data::graph_stats(s.similarity()));
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn click_models() {
        let mut cfg = ScenarioConfig::from_toml(POISSON).unwrap();
        cfg.v = ClickSpec::Explicit(vec![0.7, 0.3]);
        assert_eq!(cfg.build().unwrap().scenario.clicks(), &[0.7, 0.3]);
        let zipf: ScenarioConfig = ScenarioConfig::from_toml(&POISSON.replace("s = 0.7", "s = 0.7\nv = { zipf = 1.0 }")).unwrap();
        let v = zipf.build().unwrap().scenario.clicks().to_vec();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15);
        cfg.v = ClickSpec::Named("cascade".into());
        assert!(cfg.build().is_err());
        cfg.v = ClickSpec::Explicit(vec![1.0]);
        assert!(cfg.build().is_err());
    }

    #[test]
    fn explicit_matrix_and_vectors() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            alpha = 0.9
            N = 1
            p0 = [0.5, 0.25, 0.25]
            c = [0.0, 1.0, 1.0]
            [graph]
            kind = "matrix"
            u = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
        "#,
        )
        .unwrap();
        let s = cfg.build().unwrap().scenario;
        assert_eq!(s.popularity()[0], 0.5);
        assert_eq!(s.q(), 0.0);
    }

    #[test]
    fn edgelist_paths_resolve_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0 1 0.5\n1 2 0.9\n2 3 0.05\n").unwrap();
        let cfg_path = dir.path().join("scenario.toml");
        std::fs::write(
            &cfg_path,
            "alpha = 0.5\nN = 1\nC = 1\n[graph]\nkind = \"edgelist\"\npath = \"g.txt\"\nthreshold = 0.1\n",
        )
        .unwrap();
        let b = ScenarioConfig::load(&cfg_path).unwrap().build().unwrap();
        assert_eq!(b.ids, Some(vec![0, 1, 2]));
        assert_eq!(b.stats.arcs, 4);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_costs() {
        assert!(ScenarioConfig::from_toml(&format!("bogus = 1\n{POISSON}")).is_err());
        let cfg = ScenarioConfig::from_toml(&POISSON.replace("C = 2", "")).unwrap();
        assert!(matches!(cfg.build(), Err(ConfigError::Invalid(_))));
    }
}
