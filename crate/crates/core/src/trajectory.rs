//! Conditional evolution under continuous amplifier readout.
//!
//! Every hierarchy member follows
//!
//! ```text
//! dϱ = (hierarchy drift) dt + Σ_c √(2k_c) (X_c ϱ + ϱ X_c† − 2⟨X_c⟩ ϱ) dW_c
//! dI_c = ⟨X_c⟩ dt + dW_c / √(8k_c)
//! ```
//!
//! with expectations taken in the normalised reduced matter state and the
//! same Wiener increments shared by all members. The drift is advanced with
//! a classical RK4 step and the noise with an Euler–Maruyama increment, so
//! the ensemble mean follows the deterministic hierarchy.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{assemble, eval_plan, Plan};
use crate::integrate::LinearSystem;
use crate::liouvillian::{Dynamics, Liouvillian};
use crate::pulse::FieldInput;
use crate::sparse::CsrMatrix;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryOptions {
    /// Largest stochastic step.
    pub dt: f64,
    pub seed: u64,
    /// Abort when the trace leaves `1 ± trace_tolerance` in a single step.
    #[serde(default = "default_trace_tolerance")]
    pub trace_tolerance: f64,
}

fn default_trace_tolerance() -> f64 {
    1e-3
}

impl TrajectoryOptions {
    pub fn new(dt: f64, seed: u64) -> Self {
        Self { dt, seed, trace_tolerance: default_trace_tolerance() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `values[k][i]`: functional `k` on the conditional state at `times[i]`.
    pub values: Vec<Vec<f64>>,
    pub channel_tags: Vec<String>,
    /// `currents[c][j]`: mean current of channel `c` over `[times[j], times[j+1]]`.
    pub currents: Vec<Vec<f64>>,
}

struct Readout {
    k: f64,
    measure: Vec<CsrMatrix>,
    expect: Plan,
}

/// Runs trajectory `index` of the ensemble seeded by `opts.seed`.
/// Functionals are on the basis of `liou`.
pub fn simulate_trajectory(
    liou: &Liouvillian,
    field: &FieldInput,
    rho0: &[C64],
    times: &[f64],
    functionals: &[Vec<C64>],
    opts: &TrajectoryOptions,
    index: u64,
) -> Result<TrajectoryRecord> {
    if !(opts.dt > 0.0) || !(opts.trace_tolerance > 0.0) {
        return Err(Error::invalid("dt and trace_tolerance must be positive"));
    }
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("output times must be strictly increasing with at least two entries"));
    }
    let asm = assemble(liou, field, rho0)?;
    if let Some(w) = functionals.iter().find(|w| w.len() != asm.dim) {
        return Err(Error::DimensionMismatch { expected: asm.dim, found: w.len() });
    }
    let sys = &asm.sys;
    let mut readouts = Vec::new();
    for ch in liou.amp_channels() {
        let m = ch
            .measure
            .as_ref()
            .ok_or_else(|| Error::invalid("trajectories need a vectorized Liouville basis"))?;
        readouts.push(Readout {
            k: ch.k,
            measure: sys.members.iter().map(|mem| m.restrict(&mem.idx, &mem.idx)).collect(),
            expect: sys.plan(&ch.expectation, field),
        });
    }
    let trace_plan = sys.plan(liou.trace_functional(), field);
    let plans: Vec<Plan> = functionals.iter().map(|w| sys.plan(w, field)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index);

    let mut y = asm.y0.clone();
    let tr0 = eval_plan(&trace_plan, &y).re;
    if !(tr0 > 0.0) {
        return Err(Error::invalid("initial state has zero trace"));
    }
    y.iter_mut().for_each(|v| *v /= tr0);

    let len = y.len();
    let mut rec = TrajectoryRecord {
        index,
        seed: opts.seed,
        times: times.to_vec(),
        values: vec![Vec::with_capacity(times.len()); plans.len()],
        channel_tags: liou.amp_channels().iter().map(|c| c.tag.clone()).collect(),
        currents: vec![Vec::with_capacity(times.len() - 1); readouts.len()],
    };
    let record = |rec: &mut TrajectoryRecord, y: &[C64]| {
        for (k, p) in plans.iter().enumerate() {
            rec.values[k].push(eval_plan(p, y).re);
        }
    };
    record(&mut rec, &y);

    let mut k1 = vec![ZERO; len];
    let mut k2 = vec![ZERO; len];
    let mut k3 = vec![ZERO; len];
    let mut k4 = vec![ZERO; len];
    let mut tmp = vec![ZERO; len];
    let mut noise = vec![ZERO; len];
    let mut my = vec![ZERO; len];
    let mut charge = vec![0.0; readouts.len()];

    for j in 0..times.len() - 1 {
        let span = times[j + 1] - times[j];
        let n_sub = (span / opts.dt).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        charge.iter_mut().for_each(|q| *q = 0.0);
        for s in 0..n_sub {
            let t = times[j] + s as f64 * h;
            noise.iter_mut().for_each(|v| *v = ZERO);
            for (c, r) in readouts.iter().enumerate() {
                let e = eval_plan(&r.expect, &y).re;
                if r.k == 0.0 {
                    charge[c] += e * h;
                    continue;
                }
                let dw: f64 = rng.sample::<f64, _>(StandardNormal) * h.sqrt();
                charge[c] += e * h + dw / (8.0 * r.k).sqrt();
                my.iter_mut().for_each(|v| *v = ZERO);
                for (mem, m) in sys.members.iter().zip(&r.measure) {
                    let sl = mem.offset..mem.offset + mem.idx.len();
                    m.mul_vec_acc(C64::new(1.0, 0.0), &y[sl.clone()], &mut my[sl]);
                }
                let a = (2.0 * r.k).sqrt() * dw;
                for ((n, m), v) in noise.iter_mut().zip(&my).zip(&y) {
                    *n += a * (m - 2.0 * e * v);
                }
            }

            sys.apply(t, &y, &mut k1);
            axpy(&mut tmp, &y, 0.5 * h, &k1);
            sys.apply(t + 0.5 * h, &tmp, &mut k2);
            axpy(&mut tmp, &y, 0.5 * h, &k2);
            sys.apply(t + 0.5 * h, &tmp, &mut k3);
            axpy(&mut tmp, &y, h, &k3);
            sys.apply(t + h, &tmp, &mut k4);
            for i in 0..len {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) + noise[i];
            }

            let tr = eval_plan(&trace_plan, &y).re;
            if !((tr - 1.0).abs() <= opts.trace_tolerance) {
                return Err(Error::TraceDrift { t: t + h, drift: (tr - 1.0).abs() });
            }
            y.iter_mut().for_each(|v| *v /= tr);
        }
        for (c, q) in charge.iter().enumerate() {
            rec.currents[c].push(q / span);
        }
        record(&mut rec, &y);
    }
    Ok(rec)
}

fn axpy(out: &mut [C64], y: &[C64], a: f64, k: &[C64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}

/// Trajectories `0..count`, run in parallel and returned in index order.
pub fn simulate_ensemble(
    liou: &Liouvillian,
    field: &FieldInput,
    rho0: &[C64],
    times: &[f64],
    functionals: &[Vec<C64>],
    opts: &TrajectoryOptions,
    count: u64,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count)
        .into_par_iter()
        .map(|i| simulate_trajectory(liou, field, rho0, times, functionals, opts, i))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAverage {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean.
    pub stderr: Vec<f64>,
}

/// Mean and standard error of functional `k` across records.
pub fn ensemble_average(records: &[TrajectoryRecord], k: usize) -> Result<EnsembleAverage> {
    let first = records.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
    if records.iter().any(|r| r.times != first.times || r.values.len() <= k) {
        return Err(Error::Mismatch("records differ in time grid or functionals".into()));
    }
    let n = records.len() as f64;
    let nt = first.times.len();
    let mut mean = vec![0.0; nt];
    let mut stderr = vec![0.0; nt];
    for i in 0..nt {
        let m = records.iter().map(|r| r.values[k][i]).sum::<f64>() / n;
        let var = if records.len() > 1 {
            records.iter().map(|r| (r.values[k][i] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean[i] = m;
        stderr[i] = (var / n).sqrt();
    }
    Ok(EnsembleAverage { times: first.times.clone(), mean, stderr })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub channel: usize,
    /// End of the integration window.
    pub t: f64,
    pub mean_current: f64,
}

fn windows(record: &TrajectoryRecord, t_m: f64) -> Result<usize> {
    let dt = record.times[1] - record.times[0];
    if record.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::invalid("click extraction needs a uniform output grid"));
    }
    let w = (t_m / dt).round();
    if w < 1.0 || (w * dt - t_m).abs() > 1e-6 * t_m {
        return Err(Error::invalid(format!("t_m = {t_m} is not a multiple of the output spacing {dt}")));
    }
    Ok(w as usize)
}

/// Non-overlapping windows of length `t_m` whose mean current reaches
/// `threshold`.
pub fn extract_clicks(record: &TrajectoryRecord, channel: usize, threshold: f64, t_m: f64) -> Result<Vec<ClickEvent>> {
    let cur = record.currents.get(channel).ok_or_else(|| Error::invalid(format!("no channel {channel}")))?;
    let w = windows(record, t_m)?;
    Ok(cur
        .chunks_exact(w)
        .enumerate()
        .filter_map(|(i, c)| {
            let mean = c.iter().sum::<f64>() / w as f64;
            (mean >= threshold).then(|| ClickEvent { channel, t: record.times[(i + 1) * w], mean_current: mean })
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStatistics {
    pub windows: u64,
    pub clicks: u64,
    /// Clicks per unit time.
    pub rate: f64,
    /// Clicks per window.
    pub probability: f64,
}

/// Threshold-crossing statistics over every window of every record.
pub fn window_statistics(records: &[TrajectoryRecord], channel: usize, threshold: f64, t_m: f64) -> Result<WindowStatistics> {
    let mut windows_total = 0u64;
    let mut clicks = 0u64;
    for r in records {
        let w = windows(r, t_m)?;
        windows_total += (r.currents.get(channel).map_or(0, |c| c.len()) / w) as u64;
        clicks += extract_clicks(r, channel, threshold, t_m)?.len() as u64;
    }
    if windows_total == 0 {
        return Err(Error::invalid("no complete windows"));
    }
    let p = clicks as f64 / windows_total as f64;
    Ok(WindowStatistics { windows: windows_total, clicks, rate: p / t_m, probability: p })
}
