use shiftspec::conditions::{tabulate_zero_measure, zero_measure_trials};
use shiftspec::experiments::{
    scatter_table, simulate, ScatterOptions, ShiftFamily, SimulateOptions, SweepOptions, ID_COLUMN,
};
use shiftspec::ingest::pairwise_pairs;
use shiftspec::aline::{fit_probit_line, DEFAULT_CLIP_ALPHA};
use shiftspec::trainer::FitOptions;
use shiftspec::DomainSpec;

#[test]
fn interpolation_shifts_barely_separate_the_classifiers() {
    let opts = SimulateOptions {
        family: ShiftFamily::Interpolation,
        ..Default::default()
    };
    let out = simulate(&DomainSpec::default(), &opts, &FitOptions::default(), 0).unwrap();
    let mean = out.shifts.iter().map(|s| s.advantage().abs()).sum::<f64>() / out.shifts.len() as f64;
    assert!(mean < 0.03, "mean |acc_dg − acc_ds| = {mean}");
}

#[test]
fn random_shifts_where_theorem2_holds_favor_the_general_classifier() {
    let out = simulate(&DomainSpec::default(), &SimulateOptions::default(), &FitOptions::default(), 3).unwrap();
    assert_eq!(out.shifts.len(), 50);
    let held: Vec<_> = out.shifts.iter().filter(|s| s.conditions.theorem2_well_specified).collect();
    assert!(!held.is_empty());
    let wins = held.iter().filter(|s| s.advantage() > 0.0).count();
    assert!(wins as f64 >= 0.9 * held.len() as f64, "{wins}/{}", held.len());
}

#[test]
fn scaled_identity_shift_sign_sets_the_line_direction() {
    let sweep = SweepOptions {
        penalties: shiftspec::experiments::penalty_grid(1e-2, 1e2, 20),
        ..Default::default()
    };
    let opts = ScatterOptions {
        scales: vec![2.0, -2.0],
        random_m: false,
        ..Default::default()
    };
    let table = scatter_table(&DomainSpec::default(), &sweep, &opts, 1).unwrap();
    assert_eq!(table.len(), 20);
    let r = |col: &str| {
        fit_probit_line(&pairwise_pairs(&table, ID_COLUMN, col).unwrap(), DEFAULT_CLIP_ALPHA)
            .unwrap()
            .pearson_r
    };
    assert!(r("scale_2") > 0.9);
    assert!(r("scale_-2") < -0.9);
}

#[test]
fn zero_measure_fractions_grow_with_epsilon() {
    let sweep = SweepOptions {
        penalties: shiftspec::experiments::penalty_grid(1e-2, 1e2, 10),
        delta: 0.5,
        ..Default::default()
    };
    let trials = zero_measure_trials(&DomainSpec::default(), 100, 500, 9, &sweep).unwrap();
    let rows = tabulate_zero_measure(&trials, &[0.0, 0.5, 1.0, 2.0, 4.0]);
    for w in rows.windows(2) {
        assert!(w[0].fraction <= w[1].fraction);
    }
    assert_eq!(rows[0].count, 0);
    assert_eq!(rows[0].trials, 100);
}

#[test]
fn zero_measure_needs_enough_trials() {
    assert!(zero_measure_trials(&DomainSpec::default(), 0, 100, 0, &SweepOptions::default()).is_err());
}
