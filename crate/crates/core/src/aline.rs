//! Accuracy-on-the-line auditing: probit-scale regression of OOD on ID
//! accuracy, the well-specified verdict, the correlation-property `ε` and the
//! bootstrap stopping rule for how many models are enough.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::probit;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};
use crate::special::student_t_two_sided;

pub const DEFAULT_CLIP_ALPHA: f64 = 1e-4;
pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPair {
    pub model_id: String,
    pub id_acc: f64,
    pub ood_acc: f64,
}

impl AccuracyPair {
    pub fn new(model_id: impl Into<String>, id_acc: f64, ood_acc: f64) -> Self {
        Self {
            model_id: model_id.into(),
            id_acc,
            ood_acc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlineFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
    pub p_value: f64,
    pub std_err: f64,
    pub n: usize,
    pub clip_alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WellSpecified,
    Misspecified,
}

/// `Φ⁻¹` of `p` clamped to `[α, 1 − α]`.
pub fn clipped_probit(p: f64, alpha: f64) -> f64 {
    let p = p.clamp(alpha, 1.0 - alpha);
    // α ∈ (0, 0.5) keeps p strictly inside (0, 1).
    probit(p).expect("clamped probability lies in (0,1)")
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("clip_alpha must lie in (0, 0.5), got {alpha}")))
    }
}

fn check_pair(p: &AccuracyPair) -> Result<()> {
    for a in [p.id_acc, p.ood_acc] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument(format!(
                "accuracy {a} of model {} outside [0,1]",
                p.model_id
            )));
        }
    }
    Ok(())
}

/// Least-squares line and Pearson statistics of `y` on `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineStats {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

pub fn line_stats(x: &[f64], y: &[f64]) -> LineStats {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let slope = sxy / sxx;
    let r = if syy > 0.0 && sxx > 0.0 {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    LineStats {
        slope,
        intercept: my - slope * mx,
        r,
        sxx,
        syy,
        sxy,
    }
}

/// Pearson correlation, `0` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    line_stats(x, y).r
}

/// Ordinary least squares of `probit(OOD)` on `probit(ID)`.
pub fn fit_probit_line(pairs: &[AccuracyPair], clip_alpha: f64) -> Result<AlineFit> {
    check_alpha(clip_alpha)?;
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!("need ≥ 3 pairs, got {}", pairs.len())));
    }
    pairs.iter().try_for_each(check_pair)?;
    let x: Vec<f64> = pairs.iter().map(|p| clipped_probit(p.id_acc, clip_alpha)).collect();
    let y: Vec<f64> = pairs.iter().map(|p| clipped_probit(p.ood_acc, clip_alpha)).collect();
    let s = line_stats(&x, &y);
    if !(s.sxx > 0.0) {
        return Err(Error::DegenerateSweep("zero ID variance after probit transform".into()));
    }
    let n = pairs.len();
    let df = (n - 2) as f64;
    let sse = (s.syy - s.slope * s.sxy).max(0.0);
    let std_err = if df > 0.0 { (sse / df / s.sxx).sqrt() } else { 0.0 };
    let p_value = if s.r.abs() >= 1.0 {
        0.0
    } else if s.syy == 0.0 {
        1.0
    } else {
        let t = s.r * (df / (1.0 - s.r * s.r)).sqrt();
        student_t_two_sided(t, df)
    };
    Ok(AlineFit {
        slope: s.slope,
        intercept: s.intercept,
        pearson_r: s.r,
        p_value,
        std_err,
        n,
        clip_alpha,
    })
}

/// Well-specified iff `R < threshold`.
pub fn classify_split(fit: &AlineFit, threshold: f64) -> Verdict {
    if fit.pearson_r < threshold {
        Verdict::WellSpecified
    } else {
        Verdict::Misspecified
    }
}

/// Smallest `ε` with `|Φ⁻¹(id) − a·Φ⁻¹(ood)| ≤ ε` for every pair.
pub fn correlation_epsilon(pairs: &[AccuracyPair], a: f64, clip_alpha: f64) -> Result<f64> {
    check_alpha(clip_alpha)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("need ≥ 1 pair".into()));
    }
    pairs.iter().try_for_each(check_pair)?;
    Ok(pairs
        .iter()
        .map(|p| (clipped_probit(p.id_acc, clip_alpha) - a * clipped_probit(p.ood_acc, clip_alpha)).abs())
        .fold(0.0, f64::max))
}

/// Slope `a` minimising `Σ (Φ⁻¹(id) − a·Φ⁻¹(ood))²`, i.e. the least-squares
/// fit in the direction the correlation property is written.
pub fn property_slope(pairs: &[AccuracyPair], clip_alpha: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for p in pairs {
        let x = clipped_probit(p.ood_acc, clip_alpha);
        let y = clipped_probit(p.id_acc, clip_alpha);
        num += x * y;
        den += x * x;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinCountOptions {
    pub rel_tol: f64,
    pub resamples: usize,
    pub confidence: f64,
    pub start: usize,
    pub step: usize,
    pub clip_alpha: f64,
    pub seed: u64,
}

impl Default for MinCountOptions {
    fn default() -> Self {
        Self {
            rel_tol: 0.01,
            resamples: 1000,
            confidence: 0.95,
            start: 10,
            step: 100,
            clip_alpha: DEFAULT_CLIP_ALPHA,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "minimum")]
pub enum MinCount {
    Reached(usize),
    NotReached,
}

/// Scans prefixes `start, start + step, …` and returns the first size whose
/// Pearson R moves by less than `rel_tol` (relative) when the next block of
/// models is added, at the requested bootstrap confidence.
///
/// Each replicate resamples the prefix with replacement and extends the
/// resample with a resample of the next block, so the two correlations share
/// their common models. Stability means the `confidence` percentile of the
/// relative change is strictly below `rel_tol`.
pub fn min_model_count(pairs: &[AccuracyPair], opts: &MinCountOptions) -> Result<MinCount> {
    if !(opts.rel_tol >= 0.0) {
        return Err(Error::InvalidArgument("rel_tol must be ≥ 0".into()));
    }
    if opts.resamples < 100 {
        return Err(Error::InvalidArgument(format!("need ≥ 100 resamples, got {}", opts.resamples)));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::InvalidArgument("confidence must lie in (0,1)".into()));
    }
    if opts.start < 3 || opts.step == 0 {
        return Err(Error::InvalidArgument("start must be ≥ 3 and step ≥ 1".into()));
    }
    check_alpha(opts.clip_alpha)?;
    if pairs.len() < opts.start {
        return Err(Error::InvalidArgument(format!(
            "need at least {} models, got {}",
            opts.start,
            pairs.len()
        )));
    }
    pairs.iter().try_for_each(check_pair)?;
    let x: Vec<f64> = pairs.iter().map(|p| clipped_probit(p.id_acc, opts.clip_alpha)).collect();
    let y: Vec<f64> = pairs.iter().map(|p| clipped_probit(p.ood_acc, opts.clip_alpha)).collect();

    let mut size = opts.start;
    let mut round = 0u64;
    while size < pairs.len() {
        let next = (size + opts.step).min(pairs.len());
        let mut deltas: Vec<f64> = (0..opts.resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = Stream::new(derive_seed(derive_seed(opts.seed, round), b as u64));
                let mut idx: Vec<usize> = (0..size).map(|_| rng.index(size)).collect();
                let r_small = pearson_at(&x, &y, &idx);
                idx.extend((0..next - size).map(|_| size + rng.index(next - size)));
                let r_large = pearson_at(&x, &y, &idx);
                relative_change(r_small, r_large)
            })
            .collect();
        deltas.sort_by(f64::total_cmp);
        if percentile(&deltas, opts.confidence) < opts.rel_tol {
            return Ok(MinCount::Reached(size));
        }
        size = next;
        round += 1;
    }
    Ok(MinCount::NotReached)
}

fn pearson_at(x: &[f64], y: &[f64], idx: &[usize]) -> f64 {
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    pearson(&xs, &ys)
}

fn relative_change(from: f64, to: f64) -> f64 {
    let diff = (to - from).abs();
    if diff == 0.0 {
        0.0
    } else if from == 0.0 {
        f64::INFINITY
    } else {
        diff / from.abs()
    }
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || !sorted[hi].is_finite() {
        return sorted[hi];
    }
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
