//! ColoredMNIST at the level of its two factors.
//!
//! Each sample has one digit-evidence coordinate `z_c` (the clean label) and
//! one color coordinate `z_e`. The observed label is the clean label flipped
//! with probability `label_noise`, and the color agrees with the observed label
//! with probability `p_e` of the environment, otherwise it is flipped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aline::{classify_split, fit_probit_line, AlineFit, Verdict};
use crate::error::{Error, Result};
use crate::ingest::{pairwise_pairs, AccuracyTable};
use crate::linalg::Matrix;
use crate::model::{Dataset, FeatureMask, LinearClassifier};
use crate::rng::{derive_seed, Stream};
use crate::trainer::{evaluate_accuracy, fit_logistic, FitOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmnistSpec {
    pub label_noise: f64,
    /// Per-environment probability that the color matches the observed label.
    pub p_e: Vec<f64>,
}

impl Default for CmnistSpec {
    /// The three standard environments: two training (0.9, 0.8) and the
    /// reversed test environment (0.1).
    fn default() -> Self {
        Self {
            label_noise: 0.25,
            p_e: vec![0.9, 0.8, 0.1],
        }
    }
}

impl CmnistSpec {
    pub fn n_envs(&self) -> usize {
        self.p_e.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.label_noise) {
            return Err(Error::InvalidArgument(format!("label_noise {} outside [0,1]", self.label_noise)));
        }
        if let Some(p) = self.p_e.iter().find(|p| !ok(**p)) {
            return Err(Error::InvalidArgument(format!("p_e {p} outside [0,1]")));
        }
        Ok(())
    }
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// Samples `n` points of environment `env`.
pub fn generate_cmnist(spec: &CmnistSpec, env: usize, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let p_e = *spec.p_e.get(env).ok_or_else(|| {
        Error::InvalidArgument(format!("environment {env} out of range ({} environments)", spec.n_envs()))
    })?;
    let mut rng = Stream::new(seed);
    let mut x = Matrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let clean = sign(rng.bernoulli(0.5));
        let label = if rng.bernoulli(spec.label_noise) { -clean } else { clean };
        let color = if rng.bernoulli(p_e) { label } else { -label };
        x[(i, 0)] = clean;
        x[(i, 1)] = color;
        y.push(label);
    }
    Dataset::new(x, y, 1, 1)
}

/// Accuracy of a color-only classifier on an environment with `p_e_test`;
/// polarity `+1` means it predicts the label sign equal to the color sign.
pub fn color_classifier_accuracy(p_e_test: f64, polarity: i8) -> f64 {
    if polarity >= 0 {
        p_e_test
    } else {
        1.0 - p_e_test
    }
}

/// Accuracy of the best color-blind classifier, the same in every environment.
pub fn digit_classifier_accuracy(spec: &CmnistSpec) -> f64 {
    1.0 - spec.label_noise
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmnistSweepConfig {
    pub label_noise: f64,
    pub train_p_e: f64,
    pub test_grid: Vec<f64>,
    pub n: usize,
    pub n_models: usize,
    pub clip_alpha: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for CmnistSweepConfig {
    fn default() -> Self {
        Self {
            label_noise: 0.25,
            train_p_e: 0.9,
            test_grid: vec![0.8, 0.85, 0.9, 0.95, 0.99],
            n: 50_000,
            n_models: 30,
            clip_alpha: crate::aline::DEFAULT_CLIP_ALPHA,
            threshold: crate::aline::DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvAudit {
    pub env: String,
    pub p_e: f64,
    pub fit: AlineFit,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmnistSweep {
    pub table: AccuracyTable,
    pub audits: Vec<EnvAudit>,
}

/// Column name of an environment in the sweep table.
pub fn env_name(p_e: f64) -> String {
    format!("pe_{p_e}")
}

/// Trains color-only and digit-only logistic classifiers at `train_p_e`, then
/// builds a family of `n_models` classifiers that defer to the color
/// classifier on a share `q ∈ [0, 1]` of the inputs and to the digit
/// classifier on the rest. Accuracy is measured on fresh samples of the
/// training environment and of each test environment, and every test column
/// is audited against the training column.
pub fn cmnist_sweep(cfg: &CmnistSweepConfig) -> Result<CmnistSweep> {
    if cfg.test_grid.len() < 2 {
        return Err(Error::DegenerateSweep(format!(
            "test grid needs at least 2 points, got {}",
            cfg.test_grid.len()
        )));
    }
    if cfg.n_models < 3 {
        return Err(Error::InvalidArgument("need at least 3 models".into()));
    }
    let mut p_e = vec![cfg.train_p_e];
    p_e.extend(&cfg.test_grid);
    let spec = CmnistSpec {
        label_noise: cfg.label_noise,
        p_e,
    };
    spec.validate()?;

    let train = generate_cmnist(&spec, 0, cfg.n, derive_seed(cfg.seed, 0))?;
    let opts = FitOptions::default();
    let color = fit_logistic(&train, FeatureMask::SpuriousOnly, &opts)?;
    let digit = fit_logistic(&train, FeatureMask::DomainGeneral, &opts)?;

    let reliance: Vec<f64> = (0..cfg.n_models)
        .map(|i| i as f64 / (cfg.n_models - 1) as f64)
        .collect();
    // One evaluation sample per environment; column 0 is held-out ID data.
    let columns: Vec<Vec<f64>> = (0..spec.n_envs())
        .into_par_iter()
        .map(|env| {
            let data = generate_cmnist(&spec, env, cfg.n, derive_seed(cfg.seed, 1 + env as u64))?;
            let mut pick = Stream::new(derive_seed(cfg.seed, 1000 + env as u64));
            let draws: Vec<f64> = (0..data.len()).map(|_| pick.uniform()).collect();
            mixed_accuracies(&color, &digit, &data, &draws, &reliance)
        })
        .collect::<Result<_>>()?;

    let mut names = vec![format!("train_{}", env_name(cfg.train_p_e))];
    for &p in &cfg.test_grid {
        let name = env_name(p);
        if names.contains(&name) {
            return Err(Error::InvalidArgument(format!("duplicate test p_e {p}")));
        }
        names.push(name);
    }
    let mut table = AccuracyTable::new(names.clone());
    table.meta_names.push("color_share".into());
    for (i, q) in reliance.iter().enumerate() {
        table.push(format!("q{i:03}"), columns.iter().map(|c| c[i]).collect())?;
        table.rows[i].meta.insert("color_share".into(), q.to_string());
    }

    let audits = cfg
        .test_grid
        .iter()
        .zip(&names[1..])
        .map(|(&p, name)| {
            let fit = fit_probit_line(&pairwise_pairs(&table, &names[0], name)?, cfg.clip_alpha)?;
            let verdict = classify_split(&fit, cfg.threshold);
            Ok(EnvAudit {
                env: name.clone(),
                p_e: p,
                fit,
                verdict,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CmnistSweep { table, audits })
}

fn mixed_accuracies(
    color: &LinearClassifier,
    digit: &LinearClassifier,
    data: &Dataset,
    draws: &[f64],
    reliance: &[f64],
) -> Result<Vec<f64>> {
    let fc = color.decisions(data)?;
    let fd = digit.decisions(data)?;
    let n = data.len() as f64;
    Ok(reliance
        .iter()
        .map(|&q| {
            let correct = (0..data.len())
                .filter(|&i| {
                    let f = if draws[i] < q { fc[i] } else { fd[i] };
                    f * data.y[i] > 0.0
                })
                .count();
            correct as f64 / n
        })
        .collect())
}

/// Accuracy of `model` on `n` fresh samples of environment `env`.
pub fn empirical_accuracy(model: &LinearClassifier, spec: &CmnistSpec, env: usize, n: usize, seed: u64) -> Result<f64> {
    evaluate_accuracy(model, &generate_cmnist(spec, env, n, seed)?)
}
