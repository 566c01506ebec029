use shiftspec::linalg::{Matrix, Vector};
use shiftspec::synthgen::sample_domain;
use shiftspec::{Dataset, DomainSpec, ShiftSpec};

fn spurious_block(d: &Dataset, label: f64) -> Vec<Vector> {
    (0..d.len())
        .filter(|&i| d.y[i] == label)
        .map(|i| Vector::from_fn(d.l, |j, _| d.x[(i, d.k + j)]))
        .collect()
}

fn covariance(rows: &[Vector]) -> Matrix {
    let n = rows.len() as f64;
    let l = rows[0].len();
    let mean = rows.iter().fold(Vector::zeros(l), |a, r| a + r) / n;
    rows.iter()
        .fold(Matrix::zeros(l, l), |a, r| a + (r - &mean) * (r - &mean).transpose())
        / (n - 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn linear_shift_covariance_converges() {
    let m = Matrix::from_row_slice(2, 2, &[1.5, -0.7, 0.4, 2.0]);
    let sigma_e = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let spec = DomainSpec {
        sigma_e: sigma_e.clone(),
        ..DomainSpec::default().with_shift(ShiftSpec::Linear(m.clone()))
    };
    let n = 100_000;
    let data = sample_domain(&spec, n, 17).unwrap();
    let target = &m * &sigma_e * m.transpose();
    let bound = 10.0 * target.norm() / (n as f64).sqrt();
    for label in [1.0, -1.0] {
        let got = covariance(&spurious_block(&data, label));
        assert!((&got - &target).norm() < bound, "label {label}: {got} vs {target}");
    }
}

#[test]
fn single_component_mixture_matches_linear() {
    let m = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 1.2, 0.3]);
    let base = DomainSpec::default();
    let linear = sample_domain(&base.with_shift(ShiftSpec::Linear(m.clone())), 10_000, 1).unwrap();
    let mixture = sample_domain(&base.with_shift(ShiftSpec::mixture(vec![(1.0, m)])), 10_000, 2).unwrap();
    let w = [0.3, -1.0, 0.8, 1.1];
    let project = |d: &Dataset| -> Vec<f64> {
        (0..d.len())
            .map(|i| (0..4).map(|j| w[j] * d.x[(i, j)]).sum::<f64>() * d.y[i])
            .collect()
    };
    let stat = ks(project(&linear), project(&mixture));
    // 1% critical value: 1.628·√(2/n).
    let critical = 1.628 * (2.0f64 / 10_000.0).sqrt();
    assert!(stat < critical, "KS {stat} ≥ {critical}");
}
