//! Sampling of Gaussian domains and construction of shift matrices.
//!
//! For each sample the label is drawn first, then `k` standard normals for the
//! domain-general block, then `l` for the spurious block, then (for mixtures)
//! one uniform selecting the component:
//!
//! ```text
//! Y   = +1 w.p. label_prior, else −1
//! Z_c = Y·μ_c + L_c ξ_c              (L_c L_cᵀ = Σ_c)
//! Z_e = M (Y·μ_e + L_e ξ_e)          (M = I, the linear M, or a mixture draw)
//! ```

use crate::error::{Error, Result};
use crate::linalg::{psd_factor_named, Matrix, Vector};
use crate::model::{Dataset, DomainSpec, ShiftSpec};
use crate::rng::Stream;

pub fn sample_domain(spec: &DomainSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be ≥ 1".into()));
    }
    spec.check()?;
    let chol_c = psd_factor_named(&spec.sigma_c, "sigma_c")?;
    let chol_e = psd_factor_named(&spec.sigma_e, "sigma_e")?;
    let (k, l) = (spec.k, spec.l);

    let components = spec.shift.components(l);
    let mut cumulative = Vec::with_capacity(components.len());
    let mut acc = 0.0;
    for (w, _) in &components {
        acc += w;
        cumulative.push(acc);
    }
    let is_mixture = matches!(spec.shift, ShiftSpec::Mixture(_));
    let is_identity = matches!(spec.shift, ShiftSpec::Identity);

    let mut stream = Stream::new(seed);
    let mut x = Matrix::zeros(n, k + l);
    let mut y = Vec::with_capacity(n);
    let mut xi_c = Vector::zeros(k);
    let mut xi_e = Vector::zeros(l);
    for i in 0..n {
        let label = if stream.bernoulli(spec.label_prior) { 1.0 } else { -1.0 };
        for v in xi_c.iter_mut() {
            *v = stream.standard_normal();
        }
        for v in xi_e.iter_mut() {
            *v = stream.standard_normal();
        }
        let zc = &spec.mu_c * label + &chol_c * &xi_c;
        let base = &spec.mu_e * label + &chol_e * &xi_e;
        let ze = if is_identity {
            base
        } else {
            let idx = if is_mixture {
                let u = stream.uniform() * acc;
                cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(components.len() - 1)
            } else {
                0
            };
            &components[idx].1 * base
        };
        for j in 0..k {
            x[(i, j)] = zc[j];
        }
        for j in 0..l {
            x[(i, k + j)] = ze[j];
        }
        y.push(label);
    }
    Dataset::new(x, y, k, l)
}

/// `l×l` matrix with entries i.i.d. uniform on `[−scale, scale]`.
pub fn random_shift(l: usize, scale: f64, seed: u64) -> Result<Matrix> {
    if l == 0 {
        return Err(Error::InvalidArgument("shift dimension must be ≥ 1".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument("shift scale must be > 0".into()));
    }
    let mut stream = Stream::new(seed);
    let mut m = Matrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            m[(i, j)] = stream.uniform_in(-scale, scale);
        }
    }
    Ok(m)
}

/// Weights drawn uniformly from the probability simplex (flat Dirichlet).
pub fn flat_simplex(n: usize, stream: &mut Stream) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| stream.exponential()).collect();
    let total: f64 = draws.iter().sum();
    let mut w: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // push the rounding residue onto the largest weight so the sum is 1
    let resid = 1.0 - w.iter().sum::<f64>();
    if let Some(imax) = (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[imax] += resid;
    }
    w
}

/// Same base matrices, fresh flat-simplex weights.
pub fn interpolation_mixture(base_shifts: &[Matrix], seed: u64) -> Result<ShiftSpec> {
    if base_shifts.len() < 2 {
        return Err(Error::InvalidArgument(
            "interpolation needs at least two base shifts".into(),
        ));
    }
    let shape = base_shifts[0].shape();
    if shape.0 != shape.1 || base_shifts.iter().any(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch(
            "base shifts must be square with a common dimension".into(),
        ));
    }
    let weights = flat_simplex(base_shifts.len(), &mut Stream::new(seed));
    Ok(ShiftSpec::mixture(
        weights.into_iter().zip(base_shifts.iter().cloned()).collect(),
    ))
}

/// `α (I − 2vvᵀ)` with `v = w_e / ‖w_e‖`: flips the component of the
/// spurious mean along `w_e`, so `w_eᵀ M μ_e = −α w_eᵀ μ_e`.
pub fn reflection_shift(w_e: &Vector, alpha: f64) -> Result<Matrix> {
    let norm = w_e.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("reflection needs a nonzero w_e".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be > 0".into()));
    }
    let v = w_e / norm;
    let l = w_e.len();
    Ok((Matrix::identity(l, l) - (&v * v.transpose()) * 2.0) * alpha)
}
