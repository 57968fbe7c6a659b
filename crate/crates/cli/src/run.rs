//! Detection, sweep and trajectory commands.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use pnr_core::architecture::{build_architecture, ArchitectureKind, ArchitectureParams};
use pnr_core::hierarchy::{integrate_hierarchy, HierarchyOptions};
use pnr_core::metrics::{
    dark_count_rate, efficiency, jitter, snr0, system_jitter, DarkCountChannel, MetricsReport,
};
use pnr_core::oracles::{pnr_rate_relations, single_element_count_rate};
use pnr_core::pulse::fock_input;
use pnr_core::simulation::{bandwidth_scan, default_settle, minimum_satisfying, simulate_detection, DetectionRun};
use pnr_core::trajectory::{
    ensemble_average, extract_clicks, simulate_ensemble, window_statistics, TrajectoryOptions, WindowStatistics,
};
use pnr_core::Error as CoreError;

use crate::config::{set_total_coupling, total_coupling, Metric, Point, Resolved, RunConfig, SweepValue};
use crate::error::CliError;
use crate::output::{fmt_f64, fmt_opt, Outputs};

/// Metrics and raw run of one configuration point.
#[derive(Debug)]
pub struct PointResult {
    pub report: MetricsReport,
    pub run: DetectionRun,
    /// Smallest `n_d` reaching the search target, when a search was asked for.
    pub n_d_required: Option<Option<usize>>,
}

fn wants(cfg: &RunConfig, m: Metric) -> bool {
    cfg.metrics.requested.as_ref().map_or(true, |r| r.contains(&m))
}

/// Channels contributing to the dark-count rate.
fn dark_channels(p: &ArchitectureParams) -> usize {
    match p.kind {
        ArchitectureKind::Single | ArchitectureKind::Band => 1,
        ArchitectureKind::Array => p.n_d,
        ArchitectureKind::Pnr | ArchitectureKind::PnrSymmetric if p.n_a > 0 => p.n_a,
        ArchitectureKind::Pnr | ArchitectureKind::PnrSymmetric => p.n_d,
    }
}

pub fn evaluate(resolved: &Resolved, point: &Point) -> Result<PointResult, CliError> {
    let cfg = &resolved.config;
    let params = &point.architecture;
    let arch = build_architecture(params)?;
    let run = simulate_detection(&arch, &point.field, &point.detection)?;
    let photons = point.field.max_photons();
    let n = photons.max(1);
    let mut report = MetricsReport {
        config_hash: resolved.hash.clone(),
        photons,
        max_trace_deviation: run.hierarchy.max_trace_deviation,
        error_estimate: run.hierarchy.stats.error_estimate,
        rel_tol: point.detection.integrator.rel_tol,
        abs_tol: point.detection.integrator.abs_tol,
        ..Default::default()
    };
    let eff = efficiency(&run.distribution, n)?;
    if wants(cfg, Metric::Efficiency) {
        report.efficiency = Some(eff);
    }
    if wants(cfg, Metric::Jitter) {
        match jitter(&run.distribution, n) {
            Ok(j) => {
                let (sys, imaginary) = system_jitter(j.sigma, point.field.envelope.sigma0());
                report.sigma = Some(j.sigma);
                report.sigma_sys = Some(sys);
                report.sigma_sys_imaginary = imaginary;
                report.jitter_unreliable = j.unreliable;
            }
            Err(CoreError::ZeroEfficiency) => report.notes.push("jitter undefined at zero efficiency".into()),
            Err(e) => return Err(e.into()),
        }
    }
    let t_m = cfg.metrics.t_m.or((point.detection.t_min > 0.0).then_some(point.detection.t_min));
    let snr = match t_m {
        Some(t) if params.k > 0.0 => Some(snr0(params.k, t, params.chi)),
        _ => None,
    };
    if wants(cfg, Metric::Snr0) {
        report.snr0 = snr;
        if snr.is_none() {
            report.notes.push("SNR0 needs a readout rate k > 0 and a window t_m".into());
        }
    }
    if wants(cfg, Metric::DarkCount) {
        match (t_m, params.k > 0.0) {
            (Some(t), true) => {
                let pi0 = if photons == 0 {
                    *run.distribution.at_least[1].last().unwrap_or(&0.0)
                } else {
                    let vac = simulate_detection(&arch, &fock_input(0, point.field.envelope.clone()), &point.detection)?;
                    *vac.distribution.at_least[1].last().unwrap_or(&0.0)
                };
                let c = dark_channels(params);
                let ch = DarkCountChannel { pi0: pi0.max(0.0) / c as f64, k: params.k, delta_i_hit: params.chi };
                report.dark_count_rate = Some(dark_count_rate(&vec![ch; c], t)?);
            }
            _ => report.notes.push("dark-count rate needs a readout rate k > 0 and a window t_m".into()),
        }
    }
    if wants(cfg, Metric::CountRate) {
        let t_min = point.detection.t_min;
        let pnr = matches!(params.kind, ArchitectureKind::Pnr | ArchitectureKind::PnrSymmetric) && params.n_a > 0;
        if params.delta == 0.0 {
            report.notes.push("count rate needs a reset rate delta > 0".into());
        } else if pnr && t_min > 0.0 {
            report.count_rate = Some(pnr_rate_relations(n, params.delta, t_min, snr.unwrap_or(0.0))?.r_c);
        } else if pnr {
            report.notes.push("count rate of a pnr detector needs t_min > 0".into());
        } else {
            report.count_rate = Some(single_element_count_rate(params.delta, t_min, cfg.metrics.eff_loss, false)?.value);
        }
    }
    if wants(cfg, Metric::Bandwidth) {
        if let Some(d) = &cfg.metrics.detunings {
            let grid = d.numbers()?;
            match bandwidth_scan(params, &point.field.envelope, &grid, cfg.metrics.bandwidth_threshold, &point.detection) {
                Ok((_, b)) => {
                    if b.clipped {
                        report.notes.push("bandwidth interval touches the detuning grid edge".into());
                    }
                    report.bandwidth = Some(b);
                }
                Err(CoreError::ThresholdNotReached(t)) => {
                    report.notes.push(format!("efficiency never reaches {t} on the detuning grid"))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let n_d_required = match &cfg.search {
        Some(s) => Some(search_n_d(point, s.target, s.max_n_d, s.hold_total_coupling)?),
        None => None,
    };
    Ok(PointResult { report, run, n_d_required })
}

fn search_n_d(point: &Point, target: f64, max_n_d: usize, hold: bool) -> Result<Option<usize>, CliError> {
    let base = &point.architecture;
    let total = total_coupling(base);
    let n = point.field.max_photons().max(1);
    let eval = |n_d: usize| -> Result<f64, CoreError> {
        let mut p = ArchitectureParams { n_d, ..base.clone() };
        if hold {
            set_total_coupling(&mut p, total).map_err(|e| CoreError::InvalidParameter(e.to_string()))?;
        }
        let arch = build_architecture(&p)?;
        let run = simulate_detection(&arch, &point.field, &point.detection)?;
        efficiency(&run.distribution, n)
    };
    Ok(minimum_satisfying(eval, target, max_n_d)?)
}

const METRIC_COLUMNS: &[&str] = &[
    "photons",
    "efficiency",
    "sigma",
    "sigma_sys",
    "sigma_sys_imaginary",
    "jitter_unreliable",
    "dark_count_rate",
    "count_rate",
    "snr0",
    "bandwidth_lo",
    "bandwidth_hi",
    "bandwidth_width",
    "max_trace_deviation",
    "error_estimate",
    "rel_tol",
    "abs_tol",
];

fn metric_row(r: &PointResult) -> Vec<String> {
    let m = &r.report;
    let mut row = vec![
        m.photons.to_string(),
        fmt_opt(m.efficiency),
        fmt_opt(m.sigma),
        fmt_opt(m.sigma_sys),
        m.sigma_sys_imaginary.to_string(),
        m.jitter_unreliable.to_string(),
        fmt_opt(m.dark_count_rate),
        fmt_opt(m.count_rate),
        fmt_opt(m.snr0),
        fmt_opt(m.bandwidth.map(|b| b.lo)),
        fmt_opt(m.bandwidth.map(|b| b.hi)),
        fmt_opt(m.bandwidth.map(|b| b.width)),
        fmt_f64(m.max_trace_deviation),
        fmt_f64(m.error_estimate),
        fmt_f64(m.rel_tol),
        fmt_f64(m.abs_tol),
    ];
    if let Some(req) = r.n_d_required {
        row.push(req.map(|n| n.to_string()).unwrap_or_default());
    }
    row
}

fn metric_columns(search: bool) -> Vec<String> {
    let mut c: Vec<String> = METRIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    if search {
        c.push("n_d_required".into());
    }
    c
}

fn final_table(run: &DetectionRun) -> Vec<f64> {
    run.distribution.table().iter().map(|row| *row.last().unwrap_or(&0.0)).collect()
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a RunConfig,
    metrics: &'a MetricsReport,
    n_d_required: Option<Option<usize>>,
    registration: pnr_core::simulation::Registration,
    settle_extensions: usize,
    integration: &'a pnr_core::integrate::IntegrationStats,
    /// `P_N(M, t_end)` for `N = 0..=M`.
    final_probabilities: Vec<f64>,
    architecture_metadata: BTreeMap<String, String>,
}

pub fn simulate(resolved: &Resolved) -> Result<Outputs, CliError> {
    if !resolved.config.sweep.is_empty() {
        return Err(CliError::config("`simulate` takes no sweep axes; use `sweep`"));
    }
    let point = resolved.points()?.remove(0);
    let r = evaluate(resolved, &point)?;
    let mut out = Outputs::new(&resolved.hash);
    let dist = &r.run.distribution;
    let table = dist.table();
    let m = dist.max_photons;

    let mut columns = vec!["t".to_string()];
    columns.extend((0..=m).map(|n| format!("P_{n}")));
    columns.extend((0..=m).map(|n| format!("P_at_least_{n}")));
    let rows: Vec<Vec<String>> = dist
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![fmt_f64(*t)];
            row.extend(table.iter().map(|s| fmt_f64(s[i])));
            row.extend(dist.at_least.iter().map(|s| fmt_f64(s[i])));
            row
        })
        .collect();
    out.csv("distribution.csv", &columns, &rows)?;
    out.csv("metrics.csv", &metric_columns(r.n_d_required.is_some()), &[metric_row(&r)])?;
    for (n, s) in table.iter().enumerate() {
        let pts: Vec<(f64, f64)> = dist.times.iter().copied().zip(s.iter().copied()).collect();
        out.plot(format!("plots/P_{n}.dat"), "t", &format!("P_{n}"), &pts);
    }
    let arch = build_architecture(&point.architecture)?;
    out.json(
        "report.json",
        &SimulateReport {
            config: &resolved.config,
            metrics: &r.report,
            n_d_required: r.n_d_required,
            registration: r.run.registration,
            settle_extensions: r.run.extensions,
            integration: &r.run.hierarchy.stats,
            final_probabilities: final_table(&r.run),
            architecture_metadata: arch.metadata,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct PointArtifact<'a> {
    index: usize,
    values: BTreeMap<String, &'a SweepValue>,
    metrics: &'a MetricsReport,
    n_d_required: Option<Option<usize>>,
    final_probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config: &'a RunConfig,
    points: usize,
    axes: Vec<String>,
}

pub fn check_points(resolved: &Resolved, allow_large: bool) -> Result<Vec<Point>, CliError> {
    let points = resolved.points()?;
    let limit = resolved.config.limits.max_sweep_points;
    if !allow_large && points.len() > limit {
        return Err(CliError::Guard(format!(
            "resource guard: {} sweep points exceed the limit of {limit}; raise limits.max_sweep_points or pass --allow-large",
            points.len()
        )));
    }
    Ok(points)
}

pub fn sweep(resolved: &Resolved, allow_large: bool) -> Result<Outputs, CliError> {
    let points = check_points(resolved, allow_large)?;
    let results: Vec<PointResult> = points.par_iter().map(|p| evaluate(resolved, p)).collect::<Result<_, _>>()?;
    let axes = resolved.axis_names();
    let search = resolved.config.search.is_some();
    let mut out = Outputs::new(&resolved.hash);

    let metric_cols = metric_columns(search);
    let mut columns = vec!["index".to_string()];
    // Axis names that clash with a metric column get an `axis_` prefix.
    columns.extend(axes.iter().map(|a| if metric_cols.contains(a) { format!("axis_{a}") } else { a.clone() }));
    columns.extend(metric_cols);
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (p, r))| {
            let mut row = vec![i.to_string()];
            row.extend(p.values.iter().map(|v| v.to_string()));
            row.extend(metric_row(r));
            row
        })
        .collect();
    out.csv("sweep.csv", &columns, &rows)?;
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        out.json(
            format!("points/point_{i:04}.json"),
            &PointArtifact {
                index: i,
                values: axes.iter().cloned().zip(&p.values).collect(),
                metrics: &r.report,
                n_d_required: r.n_d_required,
                final_probabilities: final_table(&r.run),
            },
        )?;
    }
    write_curves(&mut out, &axes, &points, &results);
    out.json("summary.json", &SweepSummary { config: &resolved.config, points: points.len(), axes })?;
    Ok(out)
}

/// One plot file per metric and per combination of the trailing axes, with
/// the first numeric axis on the abscissa.
fn write_curves(out: &mut Outputs, axes: &[String], points: &[Point], results: &[PointResult]) {
    let Some(first) = axes.first() else { return };
    if !points.iter().all(|p| matches!(p.values[0], SweepValue::Number(_))) {
        return;
    }
    let metrics: [(&str, fn(&PointResult) -> Option<f64>); 6] = [
        ("efficiency", |r| r.report.efficiency),
        ("sigma", |r| r.report.sigma),
        ("sigma_sys", |r| r.report.sigma_sys),
        ("dark_count_rate", |r| r.report.dark_count_rate),
        ("count_rate", |r| r.report.count_rate),
        ("n_d_required", |r| r.n_d_required.flatten().map(|n| n as f64)),
    ];
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let key: Vec<String> = axes[1..].iter().zip(&p.values[1..]).map(|(a, v)| format!("{a}={v}")).collect();
        let key = if key.is_empty() { String::new() } else { format!("_{}", key.join("_")) };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    for (name, get) in metrics {
        for (key, idx) in &groups {
            let pts: Vec<(f64, f64)> = idx
                .iter()
                .filter_map(|&i| match (&points[i].values[0], get(&results[i])) {
                    (SweepValue::Number(x), Some(y)) => Some((*x, y)),
                    _ => None,
                })
                .collect();
            if !pts.is_empty() {
                out.plot(format!("plots/{name}{key}.dat"), first, name, &pts);
            }
        }
    }
}

#[derive(Serialize)]
struct ChannelSummary {
    tag: String,
    k: f64,
    snr0: f64,
    statistics: WindowStatistics,
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    config: &'a RunConfig,
    trajectories: usize,
    seed: u64,
    threshold: f64,
    t_m: f64,
    channels: Vec<ChannelSummary>,
    clicks: usize,
}

pub fn trajectories(resolved: &Resolved, allow_large: bool) -> Result<Outputs, CliError> {
    let cfg = &resolved.config;
    let tc = cfg.trajectories.as_ref().ok_or_else(|| CliError::config("missing [trajectories] section"))?;
    if !cfg.sweep.is_empty() {
        return Err(CliError::config("`trajectories` takes no sweep axes"));
    }
    if !allow_large && tc.count > cfg.limits.max_trajectories {
        return Err(CliError::Guard(format!(
            "resource guard: {} trajectories exceed the limit of {}; pass --allow-large",
            tc.count, cfg.limits.max_trajectories
        )));
    }
    let point = resolved.points()?.remove(0);
    let params = &point.architecture;
    let arch = build_architecture(params)?;
    let liou = arch.liouvillian()?;
    if liou.amp_channels().is_empty() {
        return Err(CliError::config("trajectories need an amplified readout; set k > 0"));
    }
    let env = &point.field.envelope;
    let (lo, hi) = env.support();
    let end = tc.t_end.unwrap_or_else(|| hi + point.detection.settle.unwrap_or_else(|| default_settle(params, env)));
    if !(end > lo) {
        return Err(CliError::config(format!("trajectory end time {end} precedes the pulse start {lo}")));
    }
    let times: Vec<f64> = (0..tc.n_times).map(|i| lo + (end - lo) * i as f64 / (tc.n_times - 1) as f64).collect();
    let t_m = tc.t_m.unwrap_or(times[1] - times[0]);
    let threshold = tc.threshold.unwrap_or(params.chi / 2.0);
    let w = vec![arch.monitored_mean(&liou)?];
    let opts = TrajectoryOptions { dt: tc.dt, seed: cfg.seed, trace_tolerance: tc.trace_tolerance };
    let records = simulate_ensemble(&liou, &point.field, &liou.ground_state(), &times, &w, &opts, tc.count as u64)?;
    let avg = ensemble_average(&records, 0)?;
    let exact = integrate_hierarchy(
        &liou,
        &point.field,
        &liou.ground_state(),
        &times,
        &w,
        &HierarchyOptions { freeze_after_pulse: true, ..HierarchyOptions::from(point.detection.integrator.clone()) },
    )?;

    let mut out = Outputs::new(&resolved.hash);
    let columns: Vec<String> = ["t", "mean", "stderr", "master_equation"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..times.len())
        .map(|i| vec![fmt_f64(times[i]), fmt_f64(avg.mean[i]), fmt_f64(avg.stderr[i]), fmt_f64(exact.values[0][i])])
        .collect();
    out.csv("ensemble.csv", &columns, &rows)?;
    out.plot("plots/ensemble_mean.dat", "t", "mean_monitored", &times.iter().copied().zip(avg.mean.iter().copied()).collect::<Vec<_>>());
    out.plot(
        "plots/master_equation_mean.dat",
        "t",
        "mean_monitored",
        &times.iter().copied().zip(exact.values[0].iter().copied()).collect::<Vec<_>>(),
    );

    let tags = records[0].channel_tags.clone();
    let mut click_rows = Vec::new();
    for r in &records {
        for c in 0..tags.len() {
            for e in extract_clicks(r, c, threshold, t_m)? {
                click_rows.push(vec![r.index.to_string(), tags[c].clone(), fmt_f64(e.t), fmt_f64(e.mean_current)]);
            }
        }
    }
    let click_cols: Vec<String> = ["trajectory", "channel", "t", "mean_current"].iter().map(|s| s.to_string()).collect();
    out.csv("clicks.csv", &click_cols, &click_rows)?;

    for r in records.iter().take(tc.save_records) {
        let mut cols = vec!["t".to_string(), "mean_monitored".to_string()];
        cols.extend(tags.iter().enumerate().map(|(c, t)| format!("current_{c}_{t}")));
        let rows: Vec<Vec<String>> = (0..times.len())
            .map(|i| {
                let mut row = vec![fmt_f64(times[i]), fmt_f64(r.values[0][i])];
                row.extend(r.currents.iter().map(|c| c.get(i).map(|x| fmt_f64(*x)).unwrap_or_default()));
                row
            })
            .collect();
        out.csv(format!("records/trajectory_{:04}.csv", r.index), &cols, &rows)?;
    }

    let channels = liou
        .amp_channels()
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            Ok(ChannelSummary {
                tag: tags[c].clone(),
                k: ch.k,
                snr0: snr0(ch.k, t_m, ch.chi),
                statistics: window_statistics(&records, c, threshold, t_m)?,
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    out.json(
        "summary.json",
        &TrajectorySummary {
            config: cfg,
            trajectories: records.len(),
            seed: cfg.seed,
            threshold,
            t_m,
            channels,
            clicks: click_rows.len(),
        },
    )?;
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Validation {
    pub config_hash: String,
    pub points: usize,
    pub kind: ArchitectureKind,
    pub state_dim: usize,
}

/// Parses, expands and builds the first point without integrating.
pub fn validate(resolved: &Resolved, allow_large: bool) -> Result<Validation, CliError> {
    let points = check_points(resolved, allow_large)?;
    let p = &points[0];
    let arch = build_architecture(&p.architecture)?;
    let liou = arch.liouvillian()?;
    Ok(Validation {
        config_hash: resolved.hash.clone(),
        points: points.len(),
        kind: p.architecture.kind,
        state_dim: liou.state_dim(),
    })
}
