//! L2-regularized logistic regression by full-batch gradient descent, and the
//! accuracy and risk evaluators.
//!
//! The objective over the coordinates allowed by the feature mask is
//!
//! ```text
//! (1/n) Σ log(1 + exp(−y_i f(x_i))) + (l2/2)‖w‖² + (spurious_penalty/2)‖w_e‖²
//! ```
//!
//! which is strongly convex for `l2 > 0`, so plain gradient descent with an
//! Armijo backtracking line search reaches the unique optimum from `w = 0`.
//! The first trial step of each iteration is the Barzilai-Borwein step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{Dataset, FeatureMask, LinearClassifier};

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub l2: f64,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Learn an unpenalized bias term.
    pub fit_intercept: bool,
    /// Extra L2 weight on the spurious block only.
    pub spurious_penalty: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            tol: 1e-8,
            max_iters: 10_000,
            fit_intercept: false,
            spurious_penalty: 0.0,
        }
    }
}

impl FitOptions {
    pub fn with_l2(l2: f64) -> Self {
        Self {
            l2,
            ..Self::default()
        }
    }
}

/// `log(1 + exp(−m))` without overflow.
#[inline]
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + exp(m))`.
#[inline]
fn sigmoid_neg(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

/// Regularized logistic objective over a parameter vector
/// `[w_c ; w_e ; bias?]`. Coordinates outside the mask have zero gradient.
pub struct LogisticObjective<'a> {
    data: &'a Dataset,
    mask: FeatureMask,
    opts: &'a FitOptions,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(data: &'a Dataset, mask: FeatureMask, opts: &'a FitOptions) -> Self {
        Self { data, mask, opts }
    }

    pub fn dim(&self) -> usize {
        self.data.k + self.data.l + usize::from(self.opts.fit_intercept)
    }

    fn active(&self, j: usize) -> bool {
        let (k, l) = (self.data.k, self.data.l);
        if j < k {
            self.mask.uses_general()
        } else if j < k + l {
            self.mask.uses_spurious()
        } else {
            self.opts.fit_intercept
        }
    }

    fn margins(&self, params: &Vector) -> Vector {
        let d = self.data.k + self.data.l;
        let w = params.rows(0, d);
        let mut scores = &self.data.x * w;
        if self.opts.fit_intercept {
            scores.add_scalar_mut(params[d]);
        }
        for (s, y) in scores.iter_mut().zip(&self.data.y) {
            *s *= y;
        }
        scores
    }

    fn penalty(&self, params: &Vector) -> f64 {
        let (k, l) = (self.data.k, self.data.l);
        let w = params.rows(0, k + l);
        let we = params.rows(k, l);
        0.5 * self.opts.l2 * w.norm_squared() + 0.5 * self.opts.spurious_penalty * we.norm_squared()
    }

    pub fn value(&self, params: &Vector) -> f64 {
        let m = self.margins(params);
        let loss: f64 = m.iter().map(|&v| softplus_neg(v)).sum::<f64>() / m.len() as f64;
        loss + self.penalty(params)
    }

    pub fn value_and_gradient(&self, params: &Vector) -> (f64, Vector) {
        let (k, l) = (self.data.k, self.data.l);
        let d = k + l;
        let n = self.data.len() as f64;
        let m = self.margins(params);
        let loss: f64 = m.iter().map(|&v| softplus_neg(v)).sum::<f64>() / n;
        // dℓ/df_i = −y_i σ(−m_i)
        let coef = Vector::from_iterator(
            m.len(),
            m.iter().zip(&self.data.y).map(|(&mi, &yi)| -yi * sigmoid_neg(mi) / n),
        );
        let mut grad = Vector::zeros(self.dim());
        let gw = self.data.x.tr_mul(&coef);
        for j in 0..d {
            grad[j] = gw[j] + self.opts.l2 * params[j];
            if j >= k {
                grad[j] += self.opts.spurious_penalty * params[j];
            }
        }
        if self.opts.fit_intercept {
            grad[d] = coef.sum();
        }
        for j in 0..self.dim() {
            if !self.active(j) {
                grad[j] = 0.0;
            }
        }
        (loss + self.penalty(params), grad)
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: LinearClassifier,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

pub fn fit_logistic(data: &Dataset, mask: FeatureMask, opts: &FitOptions) -> Result<LinearClassifier> {
    Ok(fit_logistic_detailed(data, mask, opts, None)?.model)
}

/// Gradient descent from `init` (zero when `None`).
pub fn fit_logistic_detailed(
    data: &Dataset,
    mask: FeatureMask,
    opts: &FitOptions,
    init: Option<&Vector>,
) -> Result<FitOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(opts.l2 >= 0.0) || !(opts.spurious_penalty >= 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "l2 and spurious_penalty must be ≥ 0 and tol > 0".into(),
        ));
    }
    let has_pos = data.y.iter().any(|&y| y > 0.0);
    let has_neg = data.y.iter().any(|&y| y < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::DegenerateLabels);
    }

    let objective = LogisticObjective::new(data, mask, opts);
    let dim = objective.dim();
    let mut params = match init {
        Some(v) if v.len() == dim => v.clone(),
        Some(v) => {
            return Err(Error::DimensionMismatch(format!(
                "initial point has length {}, expected {dim}",
                v.len()
            )))
        }
        None => Vector::zeros(dim),
    };
    for j in 0..dim {
        if !objective.active(j) {
            params[j] = 0.0;
        }
    }

    let (mut value, mut grad) = objective.value_and_gradient(&params);
    let mut step: f64 = 1.0;
    let mut previous: Option<(Vector, Vector)> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        if !value.is_finite() {
            return Err(Error::Diverged { iteration: iterations });
        }
        let gnorm2 = grad.norm_squared();
        if gnorm2.sqrt() < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        // Barzilai-Borwein guess for the first trial step, then backtrack.
        step = match &previous {
            Some((p, g)) => {
                let ds = &params - p;
                let dg = &grad - g;
                let curv = ds.dot(&dg);
                if curv > 0.0 {
                    (ds.norm_squared() / curv).min(MAX_STEP)
                } else {
                    (step * 2.0).min(MAX_STEP)
                }
            }
            None => step,
        };
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial = &params - &grad * step;
            let trial_value = objective.value(&trial);
            if !trial_value.is_finite() {
                step *= 0.5;
                continue;
            }
            if trial_value <= value - ARMIJO_C * step * gnorm2 {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some(next) => {
                previous = Some((std::mem::replace(&mut params, next), grad.clone()));
                let (v, g) = objective.value_and_gradient(&params);
                value = v;
                grad = g;
            }
            // no decrease representable in floating point: at the optimum
            None => {
                converged = true;
                break;
            }
        }
    }
    if !value.is_finite() {
        return Err(Error::Diverged { iteration: iterations });
    }
    if !converged {
        log::warn!(
            "logistic fit stopped after {iterations} iterations with |grad| = {:.3e}",
            grad.norm()
        );
    }

    let (k, l) = (data.k, data.l);
    let bias = if opts.fit_intercept { params[k + l] } else { 0.0 };
    let model = LinearClassifier::with_bias(
        Vector::from_iterator(k, params.rows(0, k).iter().cloned()),
        Vector::from_iterator(l, params.rows(k, l).iter().cloned()),
        bias,
        mask,
    )?;
    Ok(FitOutcome {
        model,
        iterations,
        grad_norm: grad.norm(),
        converged,
    })
}

/// Fraction of samples with `f(x)·y > 0`; a zero score counts as an error.
pub fn evaluate_accuracy(model: &LinearClassifier, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = model.decisions(data)?;
    let correct = scores
        .iter()
        .zip(&data.y)
        .filter(|(s, y)| *s * *y > 0.0)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Mean logistic loss plus `(l2/2)‖w‖²` (the bias is not penalized).
pub fn evaluate_risk(model: &LinearClassifier, data: &Dataset, l2: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = model.decisions(data)?;
    let loss = scores
        .iter()
        .zip(&data.y)
        .map(|(s, y)| softplus_neg(s * y))
        .sum::<f64>()
        / data.len() as f64;
    Ok(loss + 0.5 * l2 * model.weights().norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::DomainSpec;
    use crate::rng::Stream;
    use crate::synthgen::sample_domain;

    fn one_d(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::new(Matrix::from_column_slice(xs.len(), 1, xs), ys.to_vec(), 1, 0).unwrap()
    }

    #[test]
    fn separable_one_d_gives_positive_weight() {
        let data = one_d(&[1.0, -1.0], &[1.0, -1.0]);
        let model = fit_logistic(&data, FeatureMask::Full, &FitOptions::with_l2(0.1)).unwrap();
        assert!(model.w_c[0] > 0.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = one_d(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(matches!(
            fit_logistic(&data, FeatureMask::Full, &FitOptions::default()),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn full_fit_weights_all_positive() {
        let data = sample_domain(&DomainSpec::default(), 10_000, 1).unwrap();
        let model = fit_logistic(&data, FeatureMask::Full, &FitOptions::default()).unwrap();
        assert!(model.w_c.iter().chain(model.w_e.iter()).all(|&w| w > 0.0), "{model:?}");
    }

    #[test]
    fn fits_are_bitwise_reproducible() {
        let data = sample_domain(&DomainSpec::default(), 2_000, 2).unwrap();
        let a = fit_logistic(&data, FeatureMask::Full, &FitOptions::default()).unwrap();
        let b = fit_logistic(&data, FeatureMask::Full, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn domain_general_mask_zeroes_spurious_block() {
        let data = sample_domain(&DomainSpec::default(), 2_000, 3).unwrap();
        let model = fit_logistic(&data, FeatureMask::DomainGeneral, &FitOptions::default()).unwrap();
        assert!(model.w_e.iter().all(|&w| w == 0.0));
        let model = fit_logistic(&data, FeatureMask::SpuriousOnly, &FitOptions::default()).unwrap();
        assert!(model.w_c.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn intercept_is_learned_on_shifted_data() {
        let data = one_d(&[2.0, 2.5, 3.0, 3.5, 4.0, 4.5], &[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        let opts = FitOptions {
            fit_intercept: true,
            l2: 1e-2,
            ..FitOptions::default()
        };
        let model = fit_logistic(&data, FeatureMask::Full, &opts).unwrap();
        assert!(model.bias < 0.0);
        assert_eq!(evaluate_accuracy(&model, &data).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_examples() {
        let model = LinearClassifier::new(
            Vector::from_vec(vec![1.0]),
            Vector::zeros(0),
            FeatureMask::Full,
        )
        .unwrap();
        assert_eq!(evaluate_accuracy(&model, &one_d(&[2.0], &[1.0])).unwrap(), 1.0);

        let zero = LinearClassifier::new(Vector::zeros(1), Vector::zeros(0), FeatureMask::Full).unwrap();
        let data = one_d(&[2.0, -1.0, 0.5], &[1.0, -1.0, -1.0]);
        assert_eq!(evaluate_accuracy(&zero, &data).unwrap(), 0.0);

        let empty = Dataset::new(Matrix::zeros(0, 1), vec![], 1, 0).unwrap();
        assert!(matches!(evaluate_accuracy(&zero, &empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn accuracy_matches_gaussian_oracle() {
        let w = LinearClassifier::new(
            Vector::from_element(2, 1.0),
            Vector::from_element(2, 1.0),
            FeatureMask::Full,
        )
        .unwrap();
        let data = sample_domain(&DomainSpec::default(), 1_000_000, 8).unwrap();
        let acc = evaluate_accuracy(&w, &data).unwrap();
        // Φ(2)
        assert!((acc - 0.977_249_868_051_820_8).abs() < 0.002, "{acc}");
    }

    #[test]
    fn risk_examples() {
        let zero = LinearClassifier::new(Vector::zeros(1), Vector::zeros(0), FeatureMask::Full).unwrap();
        let data = one_d(&[2.0, -1.0], &[1.0, -1.0]);
        let ln2 = std::f64::consts::LN_2;
        assert!((evaluate_risk(&zero, &data, 0.0).unwrap() - ln2).abs() < 1e-15);
        assert!((evaluate_risk(&zero, &data, 2.0).unwrap() - ln2).abs() < 1e-15);
        let big = LinearClassifier::new(Vector::from_vec(vec![50.0]), Vector::zeros(0), FeatureMask::Full).unwrap();
        assert!(evaluate_risk(&big, &data, 0.0).unwrap() < 0.01);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = sample_domain(&DomainSpec::default(), 500, 4).unwrap();
        let opts = FitOptions {
            l2: 0.05,
            fit_intercept: true,
            spurious_penalty: 0.3,
            ..FitOptions::default()
        };
        let obj = LogisticObjective::new(&data, FeatureMask::Full, &opts);
        let mut stream = Stream::new(12);
        for _ in 0..10 {
            let p = Vector::from_iterator(obj.dim(), (0..obj.dim()).map(|_| stream.uniform_in(-2.0, 2.0)));
            let (_, g) = obj.value_and_gradient(&p);
            for j in 0..obj.dim() {
                let h = 1e-5;
                let mut hi = p.clone();
                hi[j] += h;
                let mut lo = p.clone();
                lo[j] -= h;
                let fd = (obj.value(&hi) - obj.value(&lo)) / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-3);
                assert!(rel < 1e-6, "coord {j}: fd {fd} analytic {}", g[j]);
            }
        }
    }

    #[test]
    fn optimum_is_unique() {
        let data = sample_domain(&DomainSpec::default(), 3_000, 6).unwrap();
        let opts = FitOptions::with_l2(0.01);
        let a = fit_logistic_detailed(&data, FeatureMask::Full, &opts, None).unwrap();
        let init = Vector::from_vec(vec![3.0, -2.0, 1.5, 4.0]);
        let b = fit_logistic_detailed(&data, FeatureMask::Full, &opts, Some(&init)).unwrap();
        assert!(a.converged && b.converged);
        let diff = (a.model.weights() - b.model.weights()).norm();
        assert!(diff < 1e-6, "{diff}");
    }
}
