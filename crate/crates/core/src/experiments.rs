//! The simulation protocols: domain-general versus full classifiers under
//! random shifts, and ID/OOD accuracy tables for a sweep of classifiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{condition_report, ConditionReport};
use crate::error::{Error, Result};
use crate::ingest::AccuracyTable;
use crate::linalg::Matrix;
use crate::model::{Dataset, DomainSpec, FeatureMask, LinearClassifier, ShiftSpec};
use crate::rng::derive_seed;
use crate::synthgen::{interpolation_mixture, random_shift, sample_domain};
use crate::trainer::{evaluate_accuracy, fit_logistic, FitOptions};

/// How test shifts (and, for the mixture families, the training domain) are
/// built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftFamily {
    /// Gaussian training domain, each test shift a random linear `M`.
    #[default]
    Random,
    /// Training domain mixes four near-identity matrices; test shifts are
    /// random linear `M`, usually outside their hull.
    Extrapolation,
    /// Training domain mixes `{P₁, −P₁, P₂, −P₂}` with equal weights; each
    /// test domain re-weights the same four matrices.
    Interpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub n_per_domain: usize,
    pub n_shifts: usize,
    pub family: ShiftFamily,
    /// Entries of random shifts are uniform on `[−shift_scale, shift_scale]`.
    pub shift_scale: f64,
    /// Entry range of the random perturbations used to build mixture
    /// components.
    pub mixture_scale: f64,
    /// Ridge added to the definite interpolation components.
    pub mixture_ridge: f64,
    pub delta: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            n_per_domain: 1000,
            n_shifts: 50,
            family: ShiftFamily::Random,
            shift_scale: 2.0,
            mixture_scale: 0.5,
            mixture_ridge: 0.1,
            delta: 0.1,
        }
    }
}

/// One test shift of the domain-general versus full comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftOutcome {
    pub index: usize,
    pub conditions: ConditionReport,
    pub acc_dg: f64,
    pub acc_ds: f64,
}

impl ShiftOutcome {
    /// `acc_dg − acc_ds`
    pub fn advantage(&self) -> f64 {
        self.acc_dg - self.acc_ds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub general: LinearClassifier,
    pub full: LinearClassifier,
    pub shifts: Vec<ShiftOutcome>,
}

/// The four interpolation components `{P₁, −P₁, P₂, −P₂}` with
/// `Pᵢ = QᵢQᵢᵀ + ridge·I` and `Qᵢ` a random shift.
pub fn interpolation_components(l: usize, scale: f64, ridge: f64, seed: u64) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..2 {
        let q = random_shift(l, scale, derive_seed(seed, i))?;
        let p = &q * q.transpose() + Matrix::identity(l, l) * ridge;
        out.push(p.clone());
        out.push(-p);
    }
    Ok(out)
}

/// Four components `I + Eⱼ` with `Eⱼ` a random shift.
pub fn extrapolation_components(l: usize, scale: f64, seed: u64) -> Result<Vec<Matrix>> {
    (0..4)
        .map(|j| Ok(Matrix::identity(l, l) + random_shift(l, scale, derive_seed(seed, j))?))
        .collect()
}

fn equal_mixture(components: Vec<Matrix>) -> ShiftSpec {
    let w = 1.0 / components.len() as f64;
    ShiftSpec::mixture(components.into_iter().map(|m| (w, m)).collect())
}

/// Training domain and the generator of test shifts for a family.
pub fn family_setup(base: &DomainSpec, opts: &SimulateOptions, seed: u64) -> Result<(DomainSpec, Vec<ShiftSpec>)> {
    let l = base.l;
    let comp_seed = derive_seed(seed, 1);
    let train = match opts.family {
        ShiftFamily::Random => base.clone(),
        ShiftFamily::Extrapolation => {
            base.with_shift(equal_mixture(extrapolation_components(l, opts.mixture_scale, comp_seed)?))
        }
        ShiftFamily::Interpolation => base.with_shift(equal_mixture(interpolation_components(
            l,
            opts.mixture_scale,
            opts.mixture_ridge,
            comp_seed,
        )?)),
    };
    let shifts = (0..opts.n_shifts)
        .map(|i| {
            let s = derive_seed(derive_seed(seed, 2), i as u64);
            match opts.family {
                ShiftFamily::Random | ShiftFamily::Extrapolation => {
                    Ok(ShiftSpec::Linear(random_shift(l, opts.shift_scale, s)?))
                }
                ShiftFamily::Interpolation => interpolation_mixture(
                    &interpolation_components(l, opts.mixture_scale, opts.mixture_ridge, comp_seed)?,
                    s,
                ),
            }
        })
        .collect::<Result<_>>()?;
    Ok((train, shifts))
}

/// Trains a domain-general and a full classifier on the training domain of
/// the family and evaluates both on every test shift.
pub fn simulate(base: &DomainSpec, opts: &SimulateOptions, fit: &FitOptions, seed: u64) -> Result<SimulationResult> {
    if opts.n_shifts == 0 {
        return Err(Error::InvalidArgument("n_shifts must be ≥ 1".into()));
    }
    let (train_spec, shifts) = family_setup(base, opts, seed)?;
    let train = sample_domain(&train_spec, opts.n_per_domain, derive_seed(seed, 0))?;
    let general = fit_logistic(&train, FeatureMask::DomainGeneral, fit)?;
    let full = fit_logistic(&train, FeatureMask::Full, fit)?;
    let outcomes = shifts
        .par_iter()
        .enumerate()
        .map(|(index, shift)| {
            let test = sample_domain(
                &base.with_shift(shift.clone()),
                opts.n_per_domain,
                derive_seed(derive_seed(seed, 3), index as u64),
            )?;
            Ok(ShiftOutcome {
                index,
                conditions: condition_report(&full, base, shift, opts.delta)?,
                acc_dg: evaluate_accuracy(&general, &test)?,
                acc_ds: evaluate_accuracy(&full, &test)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SimulationResult {
        general,
        full,
        shifts: outcomes,
    })
}

/// A family of full classifiers that differ in how much they rely on the
/// spurious block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Extra penalties on `‖w_e‖²`; the first model is the reference.
    pub penalties: Vec<f64>,
    pub fit: FitOptions,
    pub shift_scale: f64,
    pub delta: f64,
}

/// `0` followed by `count − 1` log-spaced values on `[lo, hi]`.
pub fn penalty_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let steps = count.saturating_sub(1);
    for i in 0..steps {
        let t = if steps > 1 { i as f64 / (steps - 1) as f64 } else { 0.0 };
        out.push(10f64.powf(lo.log10() + t * (hi.log10() - lo.log10())));
    }
    out
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            penalties: penalty_grid(1e-2, 1e2, 40),
            fit: FitOptions::default(),
            shift_scale: 2.0,
            delta: 0.1,
        }
    }
}

pub fn train_sweep(data: &Dataset, opts: &SweepOptions) -> Result<Vec<LinearClassifier>> {
    if opts.penalties.len() < 3 {
        return Err(Error::InvalidArgument("a sweep needs at least 3 penalties".into()));
    }
    if let Some(p) = opts.penalties.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::InvalidArgument(format!("penalty {p} must be ≥ 0")));
    }
    opts.penalties
        .par_iter()
        .map(|&spurious_penalty| {
            let fit = FitOptions {
                spurious_penalty,
                ..opts.fit.clone()
            };
            fit_logistic(data, FeatureMask::Full, &fit)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterOptions {
    pub n_per_domain: usize,
    /// OOD domains `M = aI`, one column each.
    pub scales: Vec<f64>,
    /// Add a column where every classifier meets its own random `M` that
    /// satisfies the SNR condition.
    pub random_m: bool,
    /// Draws allowed per classifier when searching for such an `M`.
    pub max_draws: usize,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            n_per_domain: 1000,
            scales: vec![0.5, 2.0, -0.5, -2.0],
            random_m: true,
            max_draws: 10_000,
        }
    }
}

pub fn scale_column(a: f64) -> String {
    format!("scale_{a}")
}

pub const ID_COLUMN: &str = "id";
pub const RANDOM_M_COLUMN: &str = "random_m";

/// Accuracy table of the classifier sweep: held-out ID accuracy, one column
/// per `M = aI`, and optionally the random-`M` column.
pub fn scatter_table(spec: &DomainSpec, sweep: &SweepOptions, opts: &ScatterOptions, seed: u64) -> Result<AccuracyTable> {
    spec.check()?;
    let train = sample_domain(spec, opts.n_per_domain, derive_seed(seed, 0))?;
    let models = train_sweep(&train, sweep)?;
    let l = spec.l;

    let mut names = vec![ID_COLUMN.to_string()];
    let mut shifts = vec![ShiftSpec::Identity];
    for &a in &opts.scales {
        let name = scale_column(a);
        if names.contains(&name) {
            return Err(Error::InvalidArgument(format!("duplicate scale {a}")));
        }
        names.push(name);
        shifts.push(ShiftSpec::Linear(Matrix::identity(l, l) * a));
    }
    let mut columns: Vec<Vec<f64>> = shifts
        .par_iter()
        .enumerate()
        .map(|(c, shift)| {
            let test = sample_domain(&spec.with_shift(shift.clone()), opts.n_per_domain, derive_seed(seed, 1 + c as u64))?;
            models.iter().map(|m| evaluate_accuracy(m, &test)).collect()
        })
        .collect::<Result<_>>()?;

    if opts.random_m {
        names.push(RANDOM_M_COLUMN.to_string());
        let stream_seed = derive_seed(seed, 1_000_000);
        let col = models
            .par_iter()
            .enumerate()
            .map(|(i, model)| {
                let s = derive_seed(stream_seed, i as u64);
                let m = satisfying_shift(model, spec, sweep, opts.max_draws, s)?;
                let test = sample_domain(&spec.with_shift(ShiftSpec::Linear(m)), opts.n_per_domain, derive_seed(s, u64::MAX))?;
                evaluate_accuracy(model, &test)
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(col);
    }

    let mut table = AccuracyTable::new(names);
    table.meta_names.push("spurious_penalty".into());
    for (i, p) in sweep.penalties.iter().enumerate() {
        table.push(format!("f{i:03}"), columns.iter().map(|c| c[i]).collect())?;
        table.rows[i].meta.insert("spurious_penalty".into(), p.to_string());
    }
    Ok(table)
}

/// First random shift for which the SNR comparison calls the split
/// well-specified for `model`.
fn satisfying_shift(model: &LinearClassifier, spec: &DomainSpec, sweep: &SweepOptions, max_draws: usize, seed: u64) -> Result<Matrix> {
    for d in 0..max_draws {
        let m = random_shift(spec.l, sweep.shift_scale, derive_seed(seed, d as u64))?;
        let report = condition_report(model, spec, &ShiftSpec::Linear(m.clone()), sweep.delta)?;
        if report.theorem2_well_specified {
            return Ok(m);
        }
    }
    Err(Error::DegenerateSweep(format!(
        "no shift satisfying the SNR condition within {max_draws} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_grid_shape() {
        let g = penalty_grid(1e-2, 1e2, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert!((g[4] - 1e2).abs() < 1e-10);
    }

    #[test]
    fn interpolation_components_are_definite_pairs() {
        let c = interpolation_components(2, 0.5, 0.1, 4).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c[1], -&c[0]);
        assert_eq!(c[3], -&c[2]);
        assert!(c[0].clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0));
    }

    #[test]
    fn simulate_row_count() {
        let opts = SimulateOptions {
            n_per_domain: 200,
            n_shifts: 7,
            ..Default::default()
        };
        let r = simulate(&DomainSpec::default(), &opts, &FitOptions::default(), 5).unwrap();
        assert_eq!(r.shifts.len(), 7);
        assert!(r.general.w_e.iter().all(|&w| w == 0.0));
    }
}
