//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [domain]
//! mu_c = [1.0, 1.0]
//! sigma_c = [[1.0, 0.0], [0.0, 1.0]]
//! mu_e = [1.0, 1.0]
//! sigma_e = [[1.0, 0.0], [0.0, 1.0]]
//! label_prior = 0.5
//!
//! [domain.shift]
//! kind = "identity"          # or "linear" with `matrix`, or "mixture" with `components`
//!
//! [train]                    # optimizer settings
//! l2 = 1e-3
//!
//! [simulate]
//! n_shifts = 50
//! family = "random"          # "extrapolation", "interpolation"
//!
//! [sweep]
//! count = 40
//! scales = [0.5, 2.0, -0.5, -2.0]
//!
//! [bounds]
//! kappa = 1.0
//! ```
//!
//! Every section and key is optional; missing values take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{penalty_grid, ScatterOptions, SimulateOptions, SweepOptions};
use crate::linalg::{matrix_from_rows, matrix_to_rows, Vector};
use crate::model::{BoundParams, DomainSpec, ShiftSpec};
use crate::trainer::FitOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftSection {
    Identity,
    Linear { matrix: Vec<Vec<f64>> },
    Mixture { components: Vec<ComponentSection> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub weight: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub mu_c: Vec<f64>,
    pub sigma_c: Vec<Vec<f64>>,
    pub mu_e: Vec<f64>,
    pub sigma_e: Vec<Vec<f64>>,
    pub label_prior: f64,
    pub shift: ShiftSection,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self::from_spec(&DomainSpec::default())
    }
}

impl DomainSection {
    pub fn from_spec(spec: &DomainSpec) -> Self {
        let shift = match &spec.shift {
            ShiftSpec::Identity => ShiftSection::Identity,
            ShiftSpec::Linear(m) => ShiftSection::Linear { matrix: matrix_to_rows(m) },
            ShiftSpec::Mixture(c) => ShiftSection::Mixture {
                components: c
                    .iter()
                    .map(|c| ComponentSection {
                        weight: c.weight,
                        matrix: matrix_to_rows(&c.matrix),
                    })
                    .collect(),
            },
        };
        Self {
            mu_c: spec.mu_c.iter().copied().collect(),
            sigma_c: matrix_to_rows(&spec.sigma_c),
            mu_e: spec.mu_e.iter().copied().collect(),
            sigma_e: matrix_to_rows(&spec.sigma_e),
            label_prior: spec.label_prior,
            shift,
        }
    }

    /// Builds and validates the spec; dimensions come from the mean vectors.
    pub fn to_spec(&self) -> Result<DomainSpec> {
        let shift = match &self.shift {
            ShiftSection::Identity => ShiftSpec::Identity,
            ShiftSection::Linear { matrix } => ShiftSpec::Linear(matrix_from_rows(matrix)?),
            ShiftSection::Mixture { components } => ShiftSpec::mixture(
                components
                    .iter()
                    .map(|c| Ok((c.weight, matrix_from_rows(&c.matrix)?)))
                    .collect::<Result<_>>()?,
            ),
        };
        let spec = DomainSpec {
            k: self.mu_c.len(),
            l: self.mu_e.len(),
            mu_c: Vector::from_vec(self.mu_c.clone()),
            sigma_c: matrix_from_rows(&self.sigma_c)?,
            mu_e: Vector::from_vec(self.mu_e.clone()),
            sigma_e: matrix_from_rows(&self.sigma_e)?,
            label_prior: self.label_prior,
            shift,
        };
        spec.check()?;
        Ok(spec)
    }
}

/// Classifier sweep and ID/OOD scatter settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit spurious-block penalties; overrides the log grid when set.
    pub penalties: Option<Vec<f64>>,
    pub penalty_min: f64,
    pub penalty_max: f64,
    pub count: usize,
    pub n_per_domain: usize,
    pub scales: Vec<f64>,
    pub random_m: bool,
    pub max_draws: usize,
    pub shift_scale: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let scatter = ScatterOptions::default();
        Self {
            penalties: None,
            penalty_min: 1e-2,
            penalty_max: 1e2,
            count: 40,
            n_per_domain: scatter.n_per_domain,
            scales: scatter.scales,
            random_m: scatter.random_m,
            max_draws: scatter.max_draws,
            shift_scale: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroMeasureSection {
    pub enabled: bool,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
}

impl Default for ZeroMeasureSection {
    fn default() -> Self {
        Self {
            enabled: false,
            eps_grid: vec![0.0, 0.05, 0.1, 0.25, 0.5],
            trials: 500,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub domain: DomainSection,
    pub train: FitOptions,
    pub simulate: SimulateOptions,
    pub sweep: SweepSection,
    pub zero_measure: ZeroMeasureSection,
    pub bounds: BoundParams,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.to_spec()?;
        self.bounds.validate()?;
        if !(self.train.l2 >= 0.0) || !(self.train.tol > 0.0) || self.train.max_iters == 0 {
            return Err(Error::Config("train: l2 ≥ 0, tol > 0 and max_iters ≥ 1 required".into()));
        }
        if self.simulate.n_per_domain == 0 || self.simulate.n_shifts == 0 {
            return Err(Error::Config("simulate: n_per_domain and n_shifts must be ≥ 1".into()));
        }
        if !(self.simulate.delta > 0.0 && self.simulate.delta < 1.0) {
            return Err(Error::Config("simulate: delta must lie in (0,1)".into()));
        }
        if self.sweep.penalties.is_none() && !(self.sweep.penalty_min > 0.0 && self.sweep.penalty_max > self.sweep.penalty_min) {
            return Err(Error::Config("sweep: need 0 < penalty_min < penalty_max".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<DomainSpec> {
        self.domain.to_spec()
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            penalties: self
                .sweep
                .penalties
                .clone()
                .unwrap_or_else(|| penalty_grid(self.sweep.penalty_min, self.sweep.penalty_max, self.sweep.count)),
            fit: self.train.clone(),
            shift_scale: self.sweep.shift_scale,
            delta: self.simulate.delta,
        }
    }

    pub fn scatter_options(&self) -> ScatterOptions {
        ScatterOptions {
            n_per_domain: self.sweep.n_per_domain,
            scales: self.sweep.scales.clone(),
            random_m: self.sweep.random_m,
            max_draws: self.sweep.max_draws,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Config::parse("[train]\nlearning_rate = 1\n").is_err());
        assert!(Config::parse("sead = 1\n").is_err());
    }

    #[test]
    fn linear_shift_section() {
        let cfg = Config::parse(
            "[domain]\nmu_c = [1.0]\nsigma_c = [[1.0]]\nmu_e = [2.0]\nsigma_e = [[3.0]]\n[domain.shift]\nkind = \"linear\"\nmatrix = [[-1.0]]\n",
        )
        .unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!((spec.k, spec.l), (1, 1));
        assert!(matches!(spec.shift, ShiftSpec::Linear(_)));
    }

    #[test]
    fn bad_covariance_rejected() {
        let err = Config::parse("[domain]\nsigma_e = [[1.0, 2.0], [2.0, 1.0]]\n").unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }), "{err}");
    }
}
