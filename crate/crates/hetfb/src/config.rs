//! Run configuration: a TOML file layered over built-in defaults, then
//! `key=value` overrides from the command line.

use std::path::Path;

use hetfb_core::channel::{Cluster, CorrelatedChannelConfig, ImpairmentParams, SystemConfig};
use hetfb_core::montecarlo::{ChannelModel, ExperimentSpec, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Subband,
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Perfect,
    Fixed,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterEntry {
    pub eta: usize,
    pub users: usize,
}

/// Every key accepted in a config file or through `--set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Number of resource blocks N.
    pub n_rbs: usize,
    /// Clusters in increasing subband size.
    pub clusters: Vec<ClusterEntry>,
    /// Best-M value of the clusters with the coarsest subbands.
    pub best_m: usize,
    pub snr_db: f64,
    /// Feedback-delay correlation.
    pub alpha: f64,
    /// Channel estimation error variance.
    pub est_err_var: f64,
    /// Fixed-rate CQI threshold.
    pub beta0: f64,
    /// Variable-rate backoff factor.
    pub beta1: f64,
    pub trials: u64,
    pub seed: u64,
    pub model: ModelKind,
    pub strategy: StrategyKind,
    /// Correlated model: subcarriers, delay taps and decay constant.
    pub subcarriers: usize,
    pub taps: usize,
    pub delay_decay: f64,
    /// Total user counts swept by `analytic` and `min-m`; empty means the
    /// configured total.
    pub k_values: Vec<usize>,
    /// Thresholds or backoffs swept by `analytic`; empty means the configured one.
    pub beta_values: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Grids swept by `optimize`.
    pub est_err_var_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_rbs: 64,
            clusters: vec![ClusterEntry { eta: 1, users: 10 }, ClusterEntry { eta: 4, users: 10 }],
            best_m: 4,
            snr_db: 10.0,
            alpha: 0.98,
            est_err_var: 0.01,
            beta0: 1.0,
            beta1: 0.5,
            trials: 100_000,
            seed: 1,
            model: ModelKind::Subband,
            strategy: StrategyKind::Perfect,
            subcarriers: 256,
            taps: 16,
            delay_decay: 4.0,
            k_values: Vec::new(),
            beta_values: Vec::new(),
            gammas: vec![0.9, 0.99],
            est_err_var_values: (0..=20).map(|i| i as f64 * 0.005).collect(),
            alpha_values: (0..=18).map(|i| 0.9 + i as f64 * 0.005).collect(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Splits `total` users over `groups` clusters as evenly as possible, the
/// first clusters taking the remainder.
pub fn even_split(total: usize, groups: usize) -> Vec<usize> {
    (0..groups)
        .map(|g| total / groups + usize::from(g < total % groups))
        .collect()
}

impl RunConfig {
    /// Defaults, overlaid with the file at `path`, overlaid with `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self, AppError> {
        let mut table = toml::Table::try_from(RunConfig::default())
            .map_err(|e| AppError::validation(format!("serializing defaults: {e}")))?;
        if let Some(path) = path {
            let text =
                std::fs::read_to_string(path).map_err(|e| AppError::io(format!("reading {}: {e}", path.display())))?;
            let file: toml::Table = text
                .parse()
                .map_err(|e| AppError::validation(format!("parsing {}: {e}", path.display())))?;
            table.extend(file);
        }
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| AppError::validation(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn snr(&self) -> f64 {
        db_to_linear(self.snr_db)
    }

    pub fn total_users(&self) -> usize {
        self.clusters.iter().map(|c| c.users).sum()
    }

    pub fn system(&self) -> Result<SystemConfig, AppError> {
        let clusters = self.clusters.iter().map(|c| Cluster::new(c.eta, c.users)).collect();
        Ok(SystemConfig::new(self.n_rbs, clusters, self.best_m, self.snr())?)
    }

    /// The configured system with `total` users spread evenly over its clusters.
    pub fn system_with_total(&self, total: usize) -> Result<SystemConfig, AppError> {
        let sys = self.system()?;
        Ok(sys.with_users(&even_split(total, sys.num_clusters()))?)
    }

    pub fn impairments(&self) -> Result<ImpairmentParams, AppError> {
        Ok(ImpairmentParams::new(self.est_err_var, self.alpha)?)
    }

    pub fn correlated_channel(&self) -> Result<CorrelatedChannelConfig, AppError> {
        if self.n_rbs == 0 || !self.subcarriers.is_multiple_of(self.n_rbs) {
            return Err(AppError::validation(format!(
                "{} subcarriers cannot be split into {} resource blocks",
                self.subcarriers, self.n_rbs
            )));
        }
        Ok(CorrelatedChannelConfig::exponential(
            self.subcarriers,
            self.subcarriers / self.n_rbs,
            self.taps,
            self.delay_decay,
        )?)
    }

    pub fn strategy(&self) -> Option<Strategy> {
        match self.strategy {
            StrategyKind::Perfect => None,
            StrategyKind::Fixed => Some(Strategy::FixedRate { beta0: self.beta0 }),
            StrategyKind::Variable => Some(Strategy::VariableRate { beta1: self.beta1 }),
        }
    }

    pub fn k_grid(&self) -> Vec<usize> {
        if self.k_values.is_empty() {
            vec![self.total_users()]
        } else {
            self.k_values.clone()
        }
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        if !self.beta_values.is_empty() {
            return self.beta_values.clone();
        }
        match self.strategy {
            StrategyKind::Variable => vec![self.beta1],
            _ => vec![self.beta0],
        }
    }

    /// Checks every invariant the run could touch.
    pub fn validate(&self) -> Result<(), AppError> {
        self.system()?;
        self.impairments()?;
        if self.model == ModelKind::Correlated {
            self.correlated_channel()?;
            if self.strategy != StrategyKind::Perfect {
                return Err(AppError::validation(
                    "impaired CQI is modeled on the subband-fading channel only",
                ));
            }
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(AppError::validation(format!(
                "beta0 = {} must be nonnegative",
                self.beta0
            )));
        }
        if !(0.0..=1.0).contains(&self.beta1) {
            return Err(AppError::validation(format!(
                "beta1 = {} must lie in [0, 1]",
                self.beta1
            )));
        }
        if self.trials < 2 {
            return Err(AppError::validation("trials must be at least 2"));
        }
        if self.k_values.contains(&0) {
            return Err(AppError::validation("k_values entries must be positive"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(AppError::validation(format!("gamma {g} must lie in (0, 1)")));
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<ExperimentSpec, AppError> {
        let system = self.system()?;
        let spec = match self.model {
            ModelKind::Correlated => ExperimentSpec::perfect(
                ChannelModel::Correlated(self.correlated_channel()?),
                system,
                self.trials,
                self.seed,
            ),
            ModelKind::Subband => match self.strategy() {
                None => ExperimentSpec::perfect(ChannelModel::SubbandFading, system, self.trials, self.seed),
                Some(s) => ExperimentSpec::imperfect(system, self.impairments()?, s, self.trials, self.seed),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value), AppError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| AppError::validation(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(AppError::validation(format!("override `{item}` has an empty key")));
    }
    // Bare words such as `model=correlated` are taken as strings.
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    Ok((key.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert!((cfg.snr() - 10.0).abs() < 1e-12);
        assert_eq!(cfg.est_err_var_values.len(), 21);
        assert_eq!(cfg.alpha_values.len(), 19);
    }

    #[test]
    fn overrides_parse_numbers_lists_and_words() {
        let sets = [
            "best_m=2".to_string(),
            "k_values=[4, 8]".to_string(),
            "model=correlated".to_string(),
            "clusters=[{eta=1, users=3}]".to_string(),
        ];
        let cfg = RunConfig::resolve(None, &sets).unwrap();
        assert_eq!(cfg.best_m, 2);
        assert_eq!(cfg.k_values, vec![4, 8]);
        assert_eq!(cfg.model, ModelKind::Correlated);
        assert_eq!(cfg.clusters, vec![ClusterEntry { eta: 1, users: 3 }]);
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        assert!(RunConfig::resolve(None, &["nope=1".to_string()]).is_err());
        assert!(RunConfig::resolve(None, &["best_m=two".to_string()]).is_err());
        assert!(RunConfig::resolve(None, &["best_m".to_string()]).is_err());
    }

    #[test]
    fn even_split_gives_remainder_to_first() {
        assert_eq!(even_split(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(even_split(40, 4), vec![10; 4]);
    }
}
