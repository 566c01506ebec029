use shiftspec::aline::Verdict;
use shiftspec::cmnist::{
    cmnist_sweep, color_classifier_accuracy, digit_classifier_accuracy, empirical_accuracy, generate_cmnist,
    CmnistSpec, CmnistSweepConfig,
};
use shiftspec::trainer::{fit_logistic, FitOptions};
use shiftspec::{Error, FeatureMask};

const N: usize = 50_000;

fn grid_spec() -> CmnistSpec {
    let mut p_e = vec![0.9];
    p_e.extend((0..=20).map(|i| i as f64 * 0.05));
    CmnistSpec {
        label_noise: 0.25,
        p_e,
    }
}

#[test]
fn trained_classifiers_hit_the_oracles() {
    let spec = grid_spec();
    let train = generate_cmnist(&spec, 0, N, 1).unwrap();
    let opts = FitOptions::default();
    let color = fit_logistic(&train, FeatureMask::SpuriousOnly, &opts).unwrap();
    let digit = fit_logistic(&train, FeatureMask::DomainGeneral, &opts).unwrap();
    assert!(color.w_e[0] > 0.0);
    let digit_oracle = digit_classifier_accuracy(&spec);
    for env in 0..spec.n_envs() {
        let p = spec.p_e[env];
        let c = empirical_accuracy(&color, &spec, env, N, 100 + env as u64).unwrap();
        let d = empirical_accuracy(&digit, &spec, env, N, 200 + env as u64).unwrap();
        assert!((c - color_classifier_accuracy(p, 1)).abs() < 0.01, "p_e {p}: color {c}");
        assert!((d - digit_oracle).abs() < 0.01, "p_e {p}: digit {d}");
    }
}

#[test]
fn crossover_at_three_quarters() {
    let spec = grid_spec();
    let digit = digit_classifier_accuracy(&spec);
    for &p in &spec.p_e[1..] {
        let color = color_classifier_accuracy(p, 1);
        if (p - 0.75).abs() < 1e-9 {
            assert!((color - digit).abs() < 1e-12);
        } else {
            assert_eq!(color > digit, p > 0.75, "p_e {p}");
        }
    }
}

#[test]
fn sweep_on_the_line_above_crossover() {
    let out = cmnist_sweep(&CmnistSweepConfig::default()).unwrap();
    assert_eq!(out.table.len(), 30);
    for a in &out.audits {
        assert!(a.fit.pearson_r > 0.9, "{}: R = {}", a.env, a.fit.pearson_r);
        assert_eq!(a.verdict, Verdict::Misspecified);
    }
}

#[test]
fn sweep_on_the_inverse_line_below_crossover() {
    let cfg = CmnistSweepConfig {
        test_grid: vec![0.01, 0.05, 0.1, 0.15, 0.2],
        ..Default::default()
    };
    let out = cmnist_sweep(&cfg).unwrap();
    for a in &out.audits {
        assert!(a.fit.pearson_r < -0.9, "{}: R = {}", a.env, a.fit.pearson_r);
        assert_eq!(a.verdict, Verdict::WellSpecified);
    }
}

#[test]
fn sweep_is_reproducible() {
    let cfg = CmnistSweepConfig {
        n: 5_000,
        n_models: 5,
        ..Default::default()
    };
    assert_eq!(cmnist_sweep(&cfg).unwrap(), cmnist_sweep(&cfg).unwrap());
}

#[test]
fn one_point_grid_is_degenerate() {
    let cfg = CmnistSweepConfig {
        test_grid: vec![0.1],
        ..Default::default()
    };
    assert!(matches!(cmnist_sweep(&cfg), Err(Error::DegenerateSweep(_))));
}
