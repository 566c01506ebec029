//! Well-specification conditions, accuracy-on-the-line bounds and the
//! zero-measure experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aline::{self, AccuracyPair};
use crate::analytic::{normal_pdf, probit};
use crate::error::{Error, Result};
use crate::experiments::{self, SweepOptions};
use crate::linalg::{max_eigenvalue_sym, quad_form, Matrix, Vector};
use crate::model::{BoundParams, DomainSpec, LinearClassifier, ShiftSpec};
use crate::rng::derive_seed;
use crate::synthgen::{random_shift, sample_domain};
use crate::trainer::evaluate_accuracy;

/// Both well-specification tests for one classifier under one shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `w_eᵀMμ_e`
    pub reversal_term: f64,
    pub theorem1_margin: f64,
    pub theorem1_well_specified: bool,
    pub snr_id: f64,
    pub snr_ood: f64,
    pub theorem2_well_specified: bool,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")))
    }
}

/// `w_eᵀ(Mμ_e) + √2·L_φ·κ·‖w_e‖·√ln(1/δ)`. Negative means the split is
/// well-specified with probability at least `1 − δ`.
pub fn theorem1_margin(w_e: &Vector, m_mu_e: &Vector, l_phi: f64, kappa: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(l_phi >= 0.0 && kappa >= 0.0) {
        return Err(Error::InvalidArgument("l_phi and kappa must be ≥ 0".into()));
    }
    if w_e.len() != m_mu_e.len() {
        return Err(Error::DimensionMismatch(format!(
            "w_e has {} entries, Mμ_e has {}",
            w_e.len(),
            m_mu_e.len()
        )));
    }
    let spread = 2f64.sqrt() * l_phi * kappa * w_e.norm() * (1.0 / delta).ln().sqrt();
    Ok(w_e.dot(m_mu_e) + spread)
}

/// Returns `(snr_ood, snr_id, verdict)` with `verdict = snr_ood < snr_id`.
pub fn theorem2_compare(
    w_c: &Vector,
    mu_c: &Vector,
    sigma_c: &Matrix,
    w_e: &Vector,
    m_mu_e: &Vector,
    sigma_phi: &Matrix,
) -> Result<(f64, f64, bool)> {
    let var_c = quad_form(w_c, sigma_c);
    let var_ood = var_c + quad_form(w_e, sigma_phi);
    if !(var_c > 0.0) || !(var_ood > 0.0) {
        return Err(Error::DegenerateProjection(var_c.min(var_ood)));
    }
    let signal_c = w_c.dot(mu_c);
    let snr_ood = (signal_c + w_e.dot(m_mu_e)) / var_ood.sqrt();
    let snr_id = signal_c / var_c.sqrt();
    Ok((snr_ood, snr_id, snr_ood < snr_id))
}

/// Operator 2-norm of `m` by power iteration on `MᵀM`.
pub fn lipschitz_of_linear(m: &Matrix) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    if n == 0 {
        return 0.0;
    }
    // A single start can be orthogonal to the top eigenvector; the basis
    // vectors plus the all-ones vector cannot all be.
    let mut starts = vec![Vector::from_element(n, 1.0)];
    starts.extend((0..n).map(|i| Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
    let mut best = 0.0f64;
    for start in starts {
        best = best.max(power_iteration(&gram, start));
    }
    best.sqrt()
}

fn power_iteration(a: &Matrix, mut v: Vector) -> f64 {
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v /= norm;
        let av = a * &v;
        let next = v.dot(&av);
        let done = (next - lambda).abs() <= 1e-10 * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        v = av;
        if done {
            break;
        }
    }
    lambda.max(0.0)
}

/// Sub-Gaussian parameter of a mixture of `(weight, mean, covariance)`
/// components: the largest component `√λ_max` plus the largest distance of a
/// component mean from the mixture mean.
pub fn kappa_of_mixture(components: &[(f64, Vector, Matrix)]) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
    let dim = first.1.len();
    let total: f64 = components.iter().map(|c| c.0).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("mixture weights must sum to a positive value".into()));
    }
    let mean = components
        .iter()
        .fold(Vector::zeros(dim), |acc, (w, mu, _)| acc + mu * (*w / total));
    let scale = components
        .iter()
        .map(|(_, _, s)| max_eigenvalue_sym(s).max(0.0).sqrt())
        .fold(0.0, f64::max);
    let spread = components
        .iter()
        .map(|(_, mu, _)| (mu - &mean).norm())
        .fold(0.0, f64::max);
    Ok(scale + spread)
}

/// Lipschitz constant of `Φ⁻¹` on `[α, 1 − α]`.
pub fn probit_lipschitz(alpha: f64) -> Result<f64> {
    Ok(1.0 / normal_pdf(probit(1.0 - alpha)?))
}

fn clip_zeta(params: &BoundParams) -> Result<f64> {
    Ok((1.0 - params.slope_a).abs() * probit(1.0 - params.clip_alpha)?)
}

/// `ε₁ = ‖Mμ_e − μ_e‖` and `ε₂ = |w_eᵀMΣ_eMᵀw_e − w_eᵀΣ_e w_e|`, unless the
/// parameters override them.
pub fn drift_terms(params: &BoundParams, w_e: &Vector, m: &Matrix, mu_e: &Vector, sigma_e: &Matrix) -> (f64, f64) {
    let eps1 = params.eps1.unwrap_or_else(|| (m * mu_e - mu_e).norm());
    let eps2 = params.eps2.unwrap_or_else(|| {
        let shifted = m * sigma_e * m.transpose();
        (quad_form(w_e, &shifted) - quad_form(w_e, sigma_e)).abs()
    });
    (eps1, eps2)
}

/// Upper bound `ε̃` on the accuracy-on-the-line residual under a Tsybakov
/// margin condition.
pub fn aotl_bound(
    params: &BoundParams,
    w_e: &Vector,
    m: &Matrix,
    mu_e: &Vector,
    sigma_e: &Matrix,
) -> Result<f64> {
    params.validate()?;
    let (eps1, eps2) = drift_terms(params, w_e, m, mu_e, sigma_e);
    let norm = w_e.norm();
    let c = params.lemma_c * params.kappa * norm.max(params.l_phi * norm);
    let log_term = (1.0 / params.delta).ln().sqrt();
    let lip = probit_lipschitz(params.clip_alpha)?;
    Ok(lip * params.tsybakov_b * (norm * eps1 + c * log_term + eps2.sqrt()) + clip_zeta(params)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffBound {
    /// Lower bound on the probit residual.
    pub bound: f64,
    /// `(γ + w_eᵀμ_e)/‖w_e‖`, the least mean drift compatible with reversal.
    pub drift_floor: f64,
    /// Whether `γ + w_eᵀμ_e > 0`.
    pub positive: bool,
}

/// Lower bound `C·‖w_e‖·√ln(1/δ)·‖Mμ_e − μ_e‖ − ζ` on the probit residual of a
/// reversed split, with `C = lemma_c`.
pub fn tradeoff_lower_bound(params: &BoundParams, w_e: &Vector, mu_e: &Vector, m: &Matrix) -> Result<TradeoffBound> {
    params.validate()?;
    let norm = w_e.norm();
    let eps1 = params.eps1.unwrap_or_else(|| (m * mu_e - mu_e).norm());
    let bound = params.lemma_c * norm * (1.0 / params.delta).ln().sqrt() * eps1 - clip_zeta(params)?;
    let lead = params.gamma + w_e.dot(mu_e);
    let drift_floor = if norm > 0.0 { lead / norm } else { f64::INFINITY };
    Ok(TradeoffBound {
        bound,
        drift_floor,
        positive: lead > 0.0,
    })
}

/// `√λ_max(Σ_e)`, the Gaussian sub-Gaussian parameter.
pub fn gaussian_kappa(sigma: &Matrix) -> f64 {
    max_eigenvalue_sym(sigma).max(0.0).sqrt()
}

/// Largest operator norm over the components of a shift.
pub fn shift_lipschitz(shift: &ShiftSpec, l: usize) -> f64 {
    shift
        .components(l)
        .iter()
        .map(|(_, m)| lipschitz_of_linear(m))
        .fold(0.0, f64::max)
}

/// Evaluates both theorems for `model` when the spurious block of the
/// reference domain `spec` is moved by `shift`.
pub fn condition_report(model: &LinearClassifier, spec: &DomainSpec, shift: &ShiftSpec, delta: f64) -> Result<ConditionReport> {
    let m_mu_e = shift.shifted_mean(&spec.mu_e);
    let sigma_phi = shift.shifted_covariance(&spec.mu_e, &spec.sigma_e);
    let l_phi = shift_lipschitz(shift, spec.l);
    let kappa = gaussian_kappa(&spec.sigma_e);
    let margin = theorem1_margin(&model.w_e, &m_mu_e, l_phi, kappa, delta)?;
    let (snr_ood, snr_id, verdict) =
        theorem2_compare(&model.w_c, &spec.mu_c, &spec.sigma_c, &model.w_e, &m_mu_e, &sigma_phi)?;
    Ok(ConditionReport {
        reversal_term: model.w_e.dot(&m_mu_e),
        theorem1_margin: margin,
        theorem1_well_specified: margin < 0.0,
        snr_id,
        snr_ood,
        theorem2_well_specified: verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeasureRow {
    pub epsilon: f64,
    pub count: usize,
    pub trials: usize,
    pub fraction: f64,
}

/// Per-trial outcome of the zero-measure experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeasureTrial {
    pub margin: f64,
    pub slope: f64,
    pub residual: f64,
}

impl ZeroMeasureTrial {
    pub fn in_set(&self, epsilon: f64) -> bool {
        self.margin < 0.0 && self.residual <= epsilon
    }
}

/// Empirical fraction of random shifts that are both well-specified and
/// show accuracy on the line within `ε`, for each `ε` of the grid.
pub fn zero_measure_experiment(
    spec: &DomainSpec,
    eps_grid: &[f64],
    trials: usize,
    n_per_domain: usize,
    seed: u64,
) -> Result<Vec<ZeroMeasureRow>> {
    let trials = zero_measure_trials(spec, trials, n_per_domain, seed, &SweepOptions::default())?;
    Ok(tabulate_zero_measure(&trials, eps_grid))
}

pub fn tabulate_zero_measure(trials: &[ZeroMeasureTrial], eps_grid: &[f64]) -> Vec<ZeroMeasureRow> {
    eps_grid
        .iter()
        .map(|&epsilon| {
            let count = trials.iter().filter(|t| t.in_set(epsilon)).count();
            ZeroMeasureRow {
                epsilon,
                count,
                trials: trials.len(),
                fraction: count as f64 / trials.len() as f64,
            }
        })
        .collect()
}

/// Runs the per-shift part of the zero-measure experiment. The classifier
/// sweep is trained once on the reference domain; each trial draws a shift,
/// evaluates the sweep under it, fits `a` by least squares through the origin
/// on the probit scale and records the worst residual.
pub fn zero_measure_trials(
    spec: &DomainSpec,
    trials: usize,
    n_per_domain: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<Vec<ZeroMeasureTrial>> {
    if trials < 100 {
        return Err(Error::InvalidArgument(format!("zero-measure experiment needs ≥ 100 trials, got {trials}")));
    }
    spec.check()?;
    let train = sample_domain(spec, n_per_domain, derive_seed(seed, 0))?;
    let sweep = experiments::train_sweep(&train, opts)?;
    let id_test = sample_domain(spec, n_per_domain, derive_seed(seed, 1))?;
    let id_acc: Vec<f64> = sweep
        .iter()
        .map(|m| evaluate_accuracy(m, &id_test))
        .collect::<Result<_>>()?;
    if id_acc.iter().all(|&a| a == id_acc[0]) {
        return Err(Error::DegenerateSweep("all ID accuracies are equal".into()));
    }
    let reference = &sweep[0];
    let kappa = gaussian_kappa(&spec.sigma_e);
    let clip = aline::DEFAULT_CLIP_ALPHA;
    let id_probit: Vec<f64> = id_acc.iter().map(|&a| aline::clipped_probit(a, clip)).collect();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, 2 + t as u64);
            let m = random_shift(spec.l, opts.shift_scale, derive_seed(trial_seed, 0))?;
            let shift = ShiftSpec::Linear(m.clone());
            let ood = sample_domain(&spec.with_shift(shift.clone()), n_per_domain, derive_seed(trial_seed, 1))?;
            let pairs: Vec<AccuracyPair> = sweep
                .iter()
                .zip(&id_acc)
                .enumerate()
                .map(|(i, (model, &id))| {
                    Ok(AccuracyPair {
                        model_id: i.to_string(),
                        id_acc: id,
                        ood_acc: evaluate_accuracy(model, &ood)?,
                    })
                })
                .collect::<Result<_>>()?;
            let ood_probit: Vec<f64> = pairs.iter().map(|p| aline::clipped_probit(p.ood_acc, clip)).collect();
            let sxx: f64 = id_probit.iter().map(|x| x * x).sum();
            let sxy: f64 = id_probit.iter().zip(&ood_probit).map(|(x, y)| x * y).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            let residual = id_probit
                .iter()
                .zip(&ood_probit)
                .map(|(x, y)| (y - slope * x).abs())
                .fold(0.0, f64::max);
            let margin = theorem1_margin(
                &reference.w_e,
                &(&m * &spec.mu_e),
                lipschitz_of_linear(&m),
                kappa,
                opts.delta,
            )?;
            Ok(ZeroMeasureTrial { margin, slope, residual })
        })
        .collect()
}
