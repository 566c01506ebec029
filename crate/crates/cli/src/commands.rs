use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shiftspec::aline::{
    classify_split, correlation_epsilon, fit_probit_line, min_model_count, property_slope, AccuracyPair, AlineFit,
    MinCount, MinCountOptions, Verdict,
};
use shiftspec::cmnist::{cmnist_sweep, color_classifier_accuracy, digit_classifier_accuracy, CmnistSpec, CmnistSweepConfig, EnvAudit};
use shiftspec::conditions::{tabulate_zero_measure, zero_measure_trials, ZeroMeasureRow};
use shiftspec::config::Config;
use shiftspec::experiments::{scatter_table, simulate as run_simulation, ShiftFamily, ID_COLUMN};
use shiftspec::ingest::{leave_one_out_pairs, load_accuracy_table, pairwise_pairs, AccuracyTable};
use shiftspec::rng::derive_seed;

use crate::svg::{probit_plot, Line, Plot, Series, PALETTE};
use crate::{AuditArgs, CmnistArgs, Mode, MincountArgs, PairArgs, SimulateArgs, ZeroMeasureArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] shiftspec::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(&path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn write_table(dir: &Path, name: &str, table: &AccuracyTable) -> Result<()> {
    let mut buf = Vec::new();
    table.write(&mut buf)?;
    write_text(dir, name, &String::from_utf8_lossy(&buf))
}

/// Table-1 column order.
const FIT_HEADER: &str = "slope,offset,R,p-value,std error";

/// Shortest round-trip float text, in exponent form for tiny or huge values.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn fit_row(fit: &AlineFit) -> String {
    format!(
        "{},{},{},{},{}",
        num(fit.slope),
        num(fit.intercept),
        num(fit.pearson_r),
        num(fit.p_value),
        num(fit.std_err)
    )
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::WellSpecified => "well_specified",
        Verdict::Misspecified => "misspecified",
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn audit_plot(title: &str, x_label: &str, pairs: &[AccuracyPair], fit: &AlineFit) -> Plot {
    let points: Vec<(f64, f64)> = pairs.iter().map(|p| (p.id_acc, p.ood_acc)).collect();
    let mut plot = probit_plot(title, x_label, "OOD accuracy", &points, fit.clip_alpha);
    plot.lines.push(Line {
        label: format!("fit: slope {:.3}, R {:.3}", fit.slope, fit.pearson_r),
        color: PALETTE[1],
        dashed: false,
        slope: fit.slope,
        intercept: fit.intercept,
    });
    plot
}

#[derive(Serialize)]
struct WeightsJson {
    w_c: Vec<f64>,
    w_e: Vec<f64>,
}

#[derive(Serialize)]
struct SimulationSummary {
    mean_abs_diff: f64,
    theorem1_count: usize,
    theorem1_dg_wins: usize,
    theorem2_count: usize,
    theorem2_dg_wins: usize,
}

#[derive(Serialize)]
struct SimulationJson<'a> {
    seed: u64,
    family: ShiftFamily,
    n_per_domain: usize,
    n_shifts: usize,
    general: WeightsJson,
    full: WeightsJson,
    summary: SimulationSummary,
    shifts: &'a [shiftspec::experiments::ShiftOutcome],
}

#[derive(Serialize)]
struct ColumnAudit {
    column: String,
    fit: AlineFit,
    verdict: Verdict,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let spec = cfg.spec()?;
    prepare_out(&args.out)?;

    let result = run_simulation(&spec, &cfg.simulate, &cfg.train, cfg.seed)?;
    let mut csv = String::from(
        "index,reversal_term,theorem1_margin,theorem1_well_specified,snr_id,snr_ood,theorem2_well_specified,acc_dg,acc_ds,acc_diff\n",
    );
    for s in &result.shifts {
        let c = &s.conditions;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            s.index,
            num(c.reversal_term),
            num(c.theorem1_margin),
            c.theorem1_well_specified,
            num(c.snr_id),
            num(c.snr_ood),
            c.theorem2_well_specified,
            num(s.acc_dg),
            num(s.acc_ds),
            num(s.advantage())
        );
    }
    write_text(&args.out, "shifts.csv", &csv)?;

    let count = |f: &dyn Fn(&shiftspec::experiments::ShiftOutcome) -> bool| result.shifts.iter().filter(|s| f(s)).count();
    let summary = SimulationSummary {
        mean_abs_diff: result.shifts.iter().map(|s| s.advantage().abs()).sum::<f64>() / result.shifts.len() as f64,
        theorem1_count: count(&|s| s.conditions.theorem1_well_specified),
        theorem1_dg_wins: count(&|s| s.conditions.theorem1_well_specified && s.advantage() > 0.0),
        theorem2_count: count(&|s| s.conditions.theorem2_well_specified),
        theorem2_dg_wins: count(&|s| s.conditions.theorem2_well_specified && s.advantage() > 0.0),
    };
    let weights = |m: &shiftspec::LinearClassifier| WeightsJson {
        w_c: m.w_c.iter().copied().collect(),
        w_e: m.w_e.iter().copied().collect(),
    };
    write_json(
        &args.out,
        "conditions.json",
        &SimulationJson {
            seed: cfg.seed,
            family: cfg.simulate.family,
            n_per_domain: cfg.simulate.n_per_domain,
            n_shifts: cfg.simulate.n_shifts,
            general: weights(&result.general),
            full: weights(&result.full),
            summary,
            shifts: &result.shifts,
        },
    )?;

    let split = |ws: bool| -> Vec<(f64, f64)> {
        result
            .shifts
            .iter()
            .filter(|s| s.conditions.theorem1_well_specified == ws)
            .map(|s| (s.conditions.theorem1_margin, s.advantage()))
            .collect()
    };
    let plot = Plot {
        title: "OOD accuracy gain of the domain-general classifier".into(),
        x_label: "w_eᵀMμ_e + c".into(),
        y_label: "acc_dg − acc_ds".into(),
        probit_axes: false,
        series: vec![
            Series {
                label: "margin < 0".into(),
                color: PALETTE[2],
                points: split(true),
            },
            Series {
                label: "margin ≥ 0".into(),
                color: PALETTE[1],
                points: split(false),
            },
        ],
        lines: vec![Line {
            label: "no difference".into(),
            color: "#888888",
            dashed: true,
            slope: 0.0,
            intercept: 0.0,
        }],
    };
    write_text(&args.out, "shifts.svg", &plot.render())?;

    let table = scatter_table(&spec, &cfg.sweep_options(), &cfg.scatter_options(), derive_seed(cfg.seed, 0x5eed))?;
    write_table(&args.out, "accuracy_table.csv", &table)?;
    let mut audits = Vec::new();
    for column in table.env_names.iter().filter(|c| c.as_str() != ID_COLUMN) {
        let pairs = pairwise_pairs(&table, ID_COLUMN, column)?;
        let fit = fit_probit_line(&pairs, shiftspec::aline::DEFAULT_CLIP_ALPHA)?;
        let plot = audit_plot(&format!("Classifier sweep, OOD = {column}"), "ID accuracy", &pairs, &fit);
        write_text(&args.out, &format!("sweep_{column}.svg"), &plot.render())?;
        audits.push(ColumnAudit {
            column: column.clone(),
            verdict: classify_split(&fit, shiftspec::aline::DEFAULT_THRESHOLD),
            fit,
        });
    }
    write_json(&args.out, "sweep_audit.json", &audits)?;

    if cfg.zero_measure.enabled {
        let rows = zero_measure_rows(&cfg, None)?;
        write_zero_measure(&args.out, &rows)?;
    }
    Ok(())
}

fn build_pairs(args: &PairArgs) -> Result<(AccuracyTable, Vec<AccuracyPair>)> {
    let table = load_accuracy_table(&args.table)?;
    let pairs = match args.mode {
        Mode::Loo => {
            if args.id_env.is_some() {
                return Err(CliError::Usage("--id-env only applies to --mode pairwise".into()));
            }
            leave_one_out_pairs(&table, &args.ood_env)?
        }
        Mode::Pairwise => {
            let id = args
                .id_env
                .as_deref()
                .ok_or_else(|| CliError::Usage("--mode pairwise requires --id-env".into()))?;
            pairwise_pairs(&table, id, &args.ood_env)?
        }
    };
    Ok((table, pairs))
}

#[derive(Serialize)]
struct CorrelationProperty {
    slope_a: f64,
    epsilon: f64,
}

#[derive(Serialize)]
struct AuditJson {
    table: String,
    mode: &'static str,
    id_env: Option<String>,
    ood_env: String,
    threshold: f64,
    fit: AlineFit,
    verdict: Verdict,
    correlation_property: CorrelationProperty,
}

pub fn audit(args: &AuditArgs) -> Result<()> {
    if !(args.threshold > 0.0) {
        return Err(CliError::Usage("--threshold must be > 0".into()));
    }
    let (_, pairs) = build_pairs(&args.pairs)?;
    let fit = fit_probit_line(&pairs, args.pairs.clip_alpha)?;
    let verdict = classify_split(&fit, args.threshold);
    let slope_a = property_slope(&pairs, args.pairs.clip_alpha);
    let epsilon = correlation_epsilon(&pairs, slope_a, args.pairs.clip_alpha)?;
    prepare_out(&args.out)?;
    let mode = match args.pairs.mode {
        Mode::Loo => "loo",
        Mode::Pairwise => "pairwise",
    };
    write_json(
        &args.out,
        "audit.json",
        &AuditJson {
            table: file_name(&args.pairs.table),
            mode,
            id_env: args.pairs.id_env.clone(),
            ood_env: args.pairs.ood_env.clone(),
            threshold: args.threshold,
            fit: fit.clone(),
            verdict,
            correlation_property: CorrelationProperty { slope_a, epsilon },
        },
    )?;
    write_text(&args.out, "audit.csv", &format!("{FIT_HEADER},verdict\n{},{}\n", fit_row(&fit), verdict_str(verdict)))?;
    let x_label = match &args.pairs.id_env {
        Some(id) => format!("{id} accuracy"),
        None => "mean ID accuracy".into(),
    };
    let plot = audit_plot(&format!("OOD = {}", args.pairs.ood_env), &x_label, &pairs, &fit);
    write_text(&args.out, "audit.svg", &plot.render())?;
    println!(
        "{}: R = {:.4}, slope = {:.4}, p = {:.3e}",
        verdict_str(verdict),
        fit.pearson_r,
        fit.slope,
        fit.p_value
    );
    Ok(())
}

#[derive(Serialize)]
struct MincountJson {
    table: String,
    ood_env: String,
    result: MinCount,
    total: usize,
    options: MinCountOptions,
}

pub fn mincount(args: &MincountArgs) -> Result<()> {
    let (_, pairs) = build_pairs(&args.pairs)?;
    let options = MinCountOptions {
        rel_tol: args.rel_tol,
        resamples: args.resamples,
        confidence: args.confidence,
        start: args.start,
        step: args.step,
        clip_alpha: args.pairs.clip_alpha,
        seed: args.seed,
    };
    let result = min_model_count(&pairs, &options)?;
    prepare_out(&args.out)?;
    let minimum = match result {
        MinCount::Reached(n) => n.to_string(),
        MinCount::NotReached => "not_reached".into(),
    };
    write_text(&args.out, "mincount.csv", &format!("minimum,total\n{minimum},{}\n", pairs.len()))?;
    write_json(
        &args.out,
        "mincount.json",
        &MincountJson {
            table: file_name(&args.pairs.table),
            ood_env: args.pairs.ood_env.clone(),
            result,
            total: pairs.len(),
            options,
        },
    )?;
    println!("minimum {minimum} of {}", pairs.len());
    Ok(())
}

#[derive(Serialize)]
struct CmnistOracle {
    env: String,
    p_e: f64,
    color_accuracy: f64,
    digit_accuracy: f64,
}

#[derive(Serialize)]
struct CmnistJson<'a> {
    config: &'a CmnistSweepConfig,
    oracles: Vec<CmnistOracle>,
    audits: &'a [EnvAudit],
}

pub fn cmnist(args: &CmnistArgs) -> Result<()> {
    let cfg = CmnistSweepConfig {
        label_noise: args.label_noise,
        train_p_e: args.train_pe,
        test_grid: args.test_grid.clone(),
        n: args.n,
        n_models: args.models,
        clip_alpha: args.clip_alpha,
        threshold: args.threshold,
        seed: args.seed,
    };
    let sweep = cmnist_sweep(&cfg)?;
    prepare_out(&args.out)?;
    write_table(&args.out, "cmnist_table.csv", &sweep.table)?;
    let digit = digit_classifier_accuracy(&CmnistSpec {
        label_noise: cfg.label_noise,
        p_e: vec![cfg.train_p_e],
    });
    let oracles = sweep
        .audits
        .iter()
        .map(|a| CmnistOracle {
            env: a.env.clone(),
            p_e: a.p_e,
            color_accuracy: color_classifier_accuracy(a.p_e, if cfg.train_p_e >= 0.5 { 1 } else { -1 }),
            digit_accuracy: digit,
        })
        .collect();
    write_json(
        &args.out,
        "cmnist_audit.json",
        &CmnistJson {
            config: &cfg,
            oracles,
            audits: &sweep.audits,
        },
    )?;
    let mut csv = format!("env,p_e,{FIT_HEADER},verdict\n");
    for a in &sweep.audits {
        let _ = writeln!(csv, "{},{},{},{}", a.env, a.p_e, fit_row(&a.fit), verdict_str(a.verdict));
    }
    write_text(&args.out, "cmnist_audit.csv", &csv)?;
    let train_col = &sweep.table.env_names[0];
    for a in &sweep.audits {
        let pairs = pairwise_pairs(&sweep.table, train_col, &a.env)?;
        let plot = audit_plot(&format!("ColoredMNIST, test p_e = {}", a.p_e), "train accuracy", &pairs, &a.fit);
        write_text(&args.out, &format!("cmnist_{}.svg", a.env), &plot.render())?;
        println!("{}: R = {:.4} ({})", a.env, a.fit.pearson_r, verdict_str(a.verdict));
    }
    Ok(())
}

fn zero_measure_rows(cfg: &Config, trials: Option<usize>) -> Result<Vec<ZeroMeasureRow>> {
    let spec = cfg.spec()?;
    let trials = zero_measure_trials(
        &spec,
        trials.unwrap_or(cfg.zero_measure.trials),
        cfg.simulate.n_per_domain,
        derive_seed(cfg.seed, 0x2e50),
        &cfg.sweep_options(),
    )?;
    Ok(tabulate_zero_measure(&trials, &cfg.zero_measure.eps_grid))
}

fn write_zero_measure(dir: &Path, rows: &[ZeroMeasureRow]) -> Result<()> {
    let mut csv = String::from("epsilon,count,trials,fraction\n");
    for r in rows {
        let _ = writeln!(csv, "{},{},{},{}", r.epsilon, r.count, r.trials, r.fraction);
    }
    write_text(dir, "zero_measure.csv", &csv)?;
    write_json(dir, "zero_measure.json", &rows)
}

pub fn zero_measure(args: &ZeroMeasureArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let rows = zero_measure_rows(&cfg, args.trials)?;
    prepare_out(&args.out)?;
    write_zero_measure(&args.out, &rows)?;
    for r in &rows {
        println!("epsilon {}: {}/{}", r.epsilon, r.count, r.trials);
    }
    Ok(())
}
