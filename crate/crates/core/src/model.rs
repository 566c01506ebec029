//! Domain types shared by the simulator, the trainer and the condition
//! evaluators.
//!
//! Labels are `±1` so that accuracy is literally `Pr(f(X)·Y > 0)`. Features are
//! laid out as `[Z_c ; Z_e]`: the first `k` columns are domain-general, the last
//! `l` are spurious.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, Matrix, Vector};

/// Tolerance on mixture weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub matrix: Matrix,
}

/// How the spurious block of a domain is obtained from the reference
/// Gaussian `N(Y·μ_e, Σ_e)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum ShiftSpec {
    #[default]
    Identity,
    /// `Z_e = M Z`, i.e. `Z_e ~ N(Y·Mμ_e, MΣ_eMᵀ)`.
    Linear(Matrix),
    /// A component `M_i` is drawn with probability `weight_i`, then the
    /// linear rule is applied.
    Mixture(Vec<MixtureComponent>),
}

impl ShiftSpec {
    pub fn mixture(components: Vec<(f64, Matrix)>) -> Self {
        ShiftSpec::Mixture(
            components
                .into_iter()
                .map(|(weight, matrix)| MixtureComponent { weight, matrix })
                .collect(),
        )
    }

    /// `(weight, M)` pairs; identity and linear shifts are single components.
    pub fn components(&self, l: usize) -> Vec<(f64, Matrix)> {
        match self {
            ShiftSpec::Identity => vec![(1.0, Matrix::identity(l, l))],
            ShiftSpec::Linear(m) => vec![(1.0, m.clone())],
            ShiftSpec::Mixture(c) => c.iter().map(|c| (c.weight, c.matrix.clone())).collect(),
        }
    }

    /// Class-conditional mean `E[Z_e | Y = +1]` under this shift.
    pub fn shifted_mean(&self, mu_e: &Vector) -> Vector {
        let l = mu_e.len();
        self.components(l)
            .iter()
            .fold(Vector::zeros(l), |acc, (w, m)| acc + (m * mu_e) * *w)
    }

    /// Class-conditional covariance `Cov(Z_e | Y)`; for mixtures this includes
    /// the spread of the component means.
    pub fn shifted_covariance(&self, mu_e: &Vector, sigma_e: &Matrix) -> Matrix {
        let l = mu_e.len();
        let mean = self.shifted_mean(mu_e);
        let second = self
            .components(l)
            .iter()
            .fold(Matrix::zeros(l, l), |acc, (w, m)| {
                let mm = m * mu_e;
                acc + (m * sigma_e * m.transpose() + &mm * mm.transpose()) * *w
            });
        second - &mean * mean.transpose()
    }
}

/// Generative model of one environment.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub k: usize,
    pub l: usize,
    pub mu_c: Vector,
    pub sigma_c: Matrix,
    pub mu_e: Vector,
    pub sigma_e: Matrix,
    pub label_prior: f64,
    pub shift: ShiftSpec,
}

impl Default for DomainSpec {
    /// Two domain-general and two spurious features, unit means `[1, 1]`,
    /// identity covariances, balanced labels, no shift.
    fn default() -> Self {
        Self::isotropic(2, 2, 1.0, 1.0)
    }
}

impl DomainSpec {
    /// Means `mean_c·1` and `mean_e·1`, identity covariances, balanced labels.
    pub fn isotropic(k: usize, l: usize, mean_c: f64, mean_e: f64) -> Self {
        Self {
            k,
            l,
            mu_c: Vector::from_element(k, mean_c),
            sigma_c: Matrix::identity(k, k),
            mu_e: Vector::from_element(l, mean_e),
            sigma_e: Matrix::identity(l, l),
            label_prior: 0.5,
            shift: ShiftSpec::Identity,
        }
    }

    pub fn with_shift(&self, shift: ShiftSpec) -> Self {
        Self {
            shift,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.k + self.l
    }

    /// `Err` with the first violated invariant.
    pub fn check(&self) -> Result<()> {
        match validate_spec(self).into_iter().next() {
            None => Ok(()),
            Some(SpecViolation::NotPsd(name)) => Err(Error::NotPsd { name: name.into() }),
            Some(v) => Err(Error::InvalidSpec(v.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecViolation {
    Dimension(String),
    NotPsd(&'static str),
    LabelPrior(f64),
    NonFinite(&'static str),
    EmptyMixture,
    NegativeWeight(f64),
    WeightSum(f64),
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecViolation::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            SpecViolation::NotPsd(name) => write!(f, "covariance not PSD: {name}"),
            SpecViolation::LabelPrior(p) => write!(f, "label_prior {p} outside (0,1)"),
            SpecViolation::NonFinite(name) => write!(f, "non-finite entries in {name}"),
            SpecViolation::EmptyMixture => write!(f, "mixture has no components"),
            SpecViolation::NegativeWeight(w) => write!(f, "negative mixture weight {w}"),
            SpecViolation::WeightSum(s) => write!(f, "weights sum ≠ 1 (sum = {s})"),
        }
    }
}

/// Every violated invariant of `spec`; empty when the spec is usable.
pub fn validate_spec(spec: &DomainSpec) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    let (k, l) = (spec.k, spec.l);
    if spec.mu_c.len() != k {
        out.push(SpecViolation::Dimension(format!(
            "mu_c has length {} but k = {k}",
            spec.mu_c.len()
        )));
    }
    if spec.mu_e.len() != l {
        out.push(SpecViolation::Dimension(format!(
            "mu_e has length {} but l = {l}",
            spec.mu_e.len()
        )));
    }
    if spec.sigma_c.shape() != (k, k) {
        out.push(SpecViolation::Dimension(format!("sigma_c must be {k}x{k}")));
    }
    if spec.sigma_e.shape() != (l, l) {
        out.push(SpecViolation::Dimension(format!("sigma_e must be {l}x{l}")));
    }
    for (name, finite) in [
        ("mu_c", spec.mu_c.iter().all(|x| x.is_finite())),
        ("mu_e", spec.mu_e.iter().all(|x| x.is_finite())),
    ] {
        if !finite {
            out.push(SpecViolation::NonFinite(name));
        }
    }
    if spec.sigma_c.is_square() && psd_factor(&spec.sigma_c).is_none() {
        out.push(SpecViolation::NotPsd("sigma_c"));
    }
    if spec.sigma_e.is_square() && psd_factor(&spec.sigma_e).is_none() {
        out.push(SpecViolation::NotPsd("sigma_e"));
    }
    if !(spec.label_prior > 0.0 && spec.label_prior < 1.0) {
        out.push(SpecViolation::LabelPrior(spec.label_prior));
    }
    match &spec.shift {
        ShiftSpec::Identity => {}
        ShiftSpec::Linear(m) => {
            if m.shape() != (l, l) {
                out.push(SpecViolation::Dimension(format!("shift matrix must be {l}x{l}")));
            }
            if m.iter().any(|x| !x.is_finite()) {
                out.push(SpecViolation::NonFinite("shift matrix"));
            }
        }
        ShiftSpec::Mixture(components) => {
            if components.is_empty() {
                out.push(SpecViolation::EmptyMixture);
            }
            for c in components {
                if c.matrix.shape() != (l, l) {
                    out.push(SpecViolation::Dimension(format!(
                        "mixture matrix must be {l}x{l}"
                    )));
                }
                if !(c.weight >= 0.0) {
                    out.push(SpecViolation::NegativeWeight(c.weight));
                }
            }
            let sum: f64 = components.iter().map(|c| c.weight).sum();
            if !components.is_empty() && (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                out.push(SpecViolation::WeightSum(sum));
            }
        }
    }
    out
}

/// Samples with features `[Z_c ; Z_e]` and `±1` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub k: usize,
    pub l: usize,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, k: usize, l: usize) -> Result<Self> {
        if x.ncols() != k + l {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix has {} columns, expected k + l = {}",
                x.ncols(),
                k + l
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidArgument(format!("label {bad} is not ±1")));
        }
        Ok(Self { x, y, k, l })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// CSV with header `y,zc_1..zc_k,ze_1..ze_l`; features printed with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.k).map(|i| format!("zc_{i}")));
        header.extend((1..=self.l).map(|i| format!("ze_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (i, y) in self.y.iter().enumerate() {
            write!(out, "{}", *y as i64)?;
            for j in 0..self.x.ncols() {
                write!(out, ",{:.16e}", self.x[(i, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Which feature block a classifier may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMask {
    /// `Z_c` only; `w_e` is pinned to zero.
    DomainGeneral,
    /// Both blocks.
    Full,
    /// `Z_e` only; `w_c` is pinned to zero.
    SpuriousOnly,
}

impl FeatureMask {
    pub fn uses_general(self) -> bool {
        !matches!(self, FeatureMask::SpuriousOnly)
    }

    pub fn uses_spurious(self) -> bool {
        !matches!(self, FeatureMask::DomainGeneral)
    }
}

/// `f(x) = w_cᵀ z_c + w_eᵀ z_e + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub w_c: Vector,
    pub w_e: Vector,
    pub bias: f64,
    pub trained_on: FeatureMask,
}

impl LinearClassifier {
    pub fn new(w_c: Vector, w_e: Vector, trained_on: FeatureMask) -> Result<Self> {
        Self::with_bias(w_c, w_e, 0.0, trained_on)
    }

    pub fn with_bias(w_c: Vector, w_e: Vector, bias: f64, trained_on: FeatureMask) -> Result<Self> {
        if !trained_on.uses_spurious() && w_e.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "domain-general classifier must have w_e = 0".into(),
            ));
        }
        if !trained_on.uses_general() && w_c.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "spurious-only classifier must have w_c = 0".into(),
            ));
        }
        Ok(Self {
            w_c,
            w_e,
            bias,
            trained_on,
        })
    }

    pub fn k(&self) -> usize {
        self.w_c.len()
    }

    pub fn l(&self) -> usize {
        self.w_e.len()
    }

    /// `[w_c ; w_e]`.
    pub fn weights(&self) -> Vector {
        Vector::from_iterator(
            self.k() + self.l(),
            self.w_c.iter().chain(self.w_e.iter()).cloned(),
        )
    }

    /// Scores `f(x_i)` for every row.
    pub fn decisions(&self, data: &Dataset) -> Result<Vector> {
        if data.k != self.k() || data.l != self.l() {
            return Err(Error::DimensionMismatch(format!(
                "classifier is ({}, {}) but data is ({}, {})",
                self.k(),
                self.l(),
                data.k,
                data.l
            )));
        }
        let mut scores = &data.x * self.weights();
        if self.bias != 0.0 {
            scores.add_scalar_mut(self.bias);
        }
        Ok(scores)
    }
}

/// Constants of the sufficiency and accuracy-on-the-line bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    /// Sub-Gaussian parameter of the spurious block.
    pub kappa: f64,
    /// Lipschitz constant of the shift map.
    pub l_phi: f64,
    /// Failure probability.
    pub delta: f64,
    /// Margin-density constant `B` of the Tsybakov condition.
    pub tsybakov_b: f64,
    /// Unspecified constant `c` inside `C = c·κ·max{‖w_e‖, L_φ‖w_e‖}`.
    pub lemma_c: f64,
    /// Accuracy-on-the-line slope `a`.
    pub slope_a: f64,
    /// Accuracies are assumed to lie in `[α, 1 − α]`.
    pub clip_alpha: f64,
    /// Mean drift `‖Mμ_e − μ_e‖`; computed from the shift when absent.
    pub eps1: Option<f64>,
    /// Projected variance drift; computed from the shift when absent.
    pub eps2: Option<f64>,
    /// Reversal margin.
    pub gamma: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            l_phi: 1.0,
            delta: 0.1,
            tsybakov_b: 1.0,
            lemma_c: 1.0,
            slope_a: 1.0,
            clip_alpha: 0.1,
            eps1: None,
            eps2: None,
            gamma: 0.1,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be ≥ 0");
        }
        if !(self.l_phi >= 0.0 && self.l_phi.is_finite()) {
            return bad("l_phi must be ≥ 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0,1)");
        }
        if !(self.tsybakov_b > 0.0) {
            return bad("tsybakov_b must be > 0");
        }
        if !(self.lemma_c > 0.0) {
            return bad("lemma_c must be > 0");
        }
        if !self.slope_a.is_finite() {
            return bad("slope_a must be finite");
        }
        if !(self.clip_alpha > 0.0 && self.clip_alpha < 0.5) {
            return bad("clip_alpha must lie in (0, 0.5)");
        }
        if self.eps1.is_some_and(|e| !(e >= 0.0)) || self.eps2.is_some_and(|e| !(e >= 0.0)) {
            return bad("eps1 and eps2 must be ≥ 0");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be > 0");
        }
        Ok(())
    }
}
