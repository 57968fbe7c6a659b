//! `pnrdet`: simulations, sweeps, trajectories and design arithmetic for
//! photon-number-resolving detectors.

mod config;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sha2::{Digest, Sha256};

use pnr_core::design::{
    effective_coupling, film_thickness, log_grid, max_count_rate, required_absorbers, snr0_transport, tradeoff_curve,
    TradeoffPoint, TransportAmplifier,
};
use pnr_core::oracles::{band_efficiency, check_ideal_conditions, jitter_model, pnr_rate_relations, single_element_count_rate};

use config::{resolve, RunConfig};
use error::CliError;
use output::{fmt_f64, Outputs};

const WORKERS_ENV: &str = "PNRDET_WORKERS";

#[derive(Parser)]
#[command(name = "pnrdet", version, about = "Photon-number-resolving detector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lift the dimension, sweep-size and trajectory-count guards.
    #[arg(long)]
    allow_large: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one detection simulation.
    Simulate(RunArgs),
    /// Run the Cartesian product of the sweep axes.
    Sweep(RunArgs),
    /// Run a stochastic trajectory ensemble with amplified readout.
    Trajectories(RunArgs),
    /// Check a configuration and build its first point without running it.
    ValidateConfig {
        config: PathBuf,
        #[arg(long)]
        allow_large: bool,
    },
    /// Closed-form predictions.
    #[command(subcommand)]
    Oracle(Oracle),
    /// Physical-realization arithmetic.
    #[command(subcommand)]
    Design(Design),
}

#[derive(Subcommand)]
enum Oracle {
    /// Single-photon efficiency of a band element (amplitudes; rates are squares).
    BandEff {
        #[arg(long, default_value_t = 1.0)]
        n_b: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        big_gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        zeta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta_omega: f64,
    },
    /// Largest count rate of a resetting single element.
    CountRate {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        t_min: f64,
        #[arg(long, default_value_t = 0.01)]
        eff_loss: f64,
        /// Use the small-loss branch.
        #[arg(long)]
        approx: bool,
    },
    /// Count and dark-count rates of an N-photon detector.
    PnrRates {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        snr0: f64,
    },
    /// Transfer-limited system jitter of an acceptor pool.
    Jitter {
        #[arg(long)]
        sigma0: f64,
        #[arg(long)]
        n_a: usize,
        #[arg(long)]
        k_a2: f64,
        #[arg(long)]
        n: usize,
    },
    /// Structural ideal-efficiency conditions of a configured architecture.
    IdealConditions {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum Design {
    /// Shot-noise-limited SNR0 of a transport amplifier.
    Snr0 {
        #[arg(long)]
        f: f64,
        /// Bias current in amperes.
        #[arg(long = "I")]
        current: f64,
        /// Integration window in seconds.
        #[arg(long)]
        tm: f64,
    },
    /// Equivalent absorbing film thickness for absorption coefficient alpha (1/m).
    Thickness {
        #[arg(long)]
        alpha: f64,
    },
    /// Waveguide-enhanced optical coupling rate.
    Coupling {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        area: f64,
        #[arg(long)]
        n_d: f64,
        #[arg(long)]
        gamma_free2: f64,
    },
    /// Absorbers needed for ideal coupling in a mode of the given area.
    Absorbers {
        #[arg(long)]
        area: f64,
        /// Absorption cross-section in m^2.
        #[arg(long)]
        sigma: f64,
    },
    /// Count-rate versus dark-count trade-off curve as CSV.
    Tradeoff {
        #[command(flatten)]
        op: Operating,
        #[arg(long, default_value_t = 1e-10)]
        t_lo: f64,
        #[arg(long, default_value_t = 1e-6)]
        t_hi: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Highest count rate with dark-count rate at or below a bound.
    MaxRate {
        #[command(flatten)]
        op: Operating,
        #[arg(long)]
        r_dc_max: f64,
        #[arg(long, default_value_t = 1e-12)]
        t_lo: f64,
        #[arg(long, default_value_t = 1e-3)]
        t_hi: f64,
    },
}

#[derive(Args)]
struct Operating {
    /// Photons to resolve.
    #[arg(long)]
    n: usize,
    /// Monitored acceptor channels; 2N by default.
    #[arg(long)]
    n_a: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    eff_loss: f64,
    #[arg(long, default_value_t = 0.1)]
    f: f64,
    #[arg(long = "I", default_value_t = 10e-6)]
    current: f64,
}

impl Operating {
    fn n_a(&self) -> usize {
        self.n_a.unwrap_or(2 * self.n)
    }

    fn amplifier(&self) -> Result<TransportAmplifier, CliError> {
        snr0_transport(self.f, self.current, 1.0)?;
        Ok(TransportAmplifier { f: self.f, current: self.current })
    }
}

fn init_workers() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(())
}

fn load(path: &Path, allow_large: bool) -> Result<config::Resolved, CliError> {
    let cfg = RunConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(cfg, base, allow_large)
}

fn out_dir(args: &RunArgs, resolved: &config::Resolved) -> PathBuf {
    args.out
        .clone()
        .or_else(|| resolved.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn run_command(args: &RunArgs, f: impl FnOnce(&config::Resolved) -> Result<Outputs, CliError>) -> Result<(), CliError> {
    let resolved = load(&args.config, args.allow_large)?;
    let outputs = f(&resolved)?;
    let dir = out_dir(args, &resolved);
    let n = outputs.len();
    outputs.write(&dir)?;
    println!("config_hash {}", resolved.hash);
    println!("wrote {n} files to {}", dir.display());
    Ok(())
}

fn print_point(p: &TradeoffPoint) {
    println!("t_min {}", fmt_f64(p.t_min));
    println!("delta {}", fmt_f64(p.delta));
    println!("r_c {}", fmt_f64(p.r_c));
    println!("r_dc {}", fmt_f64(p.r_dc));
    println!("snr0 {}", fmt_f64(p.snr0));
    println!("n_a {}", p.n_a);
}

fn oracle(cmd: Oracle) -> Result<(), CliError> {
    match cmd {
        Oracle::BandEff { n_b, gamma, big_gamma, zeta, delta_omega } => {
            println!("{}", show(band_efficiency(n_b, gamma, big_gamma, zeta, delta_omega)?.value));
        }
        Oracle::CountRate { delta, t_min, eff_loss, approx } => {
            println!("{}", show(single_element_count_rate(delta, t_min, eff_loss, approx)?.value));
        }
        Oracle::PnrRates { n, delta, t_min, snr0 } => {
            let r = pnr_rate_relations(n, delta, t_min, snr0)?;
            for (k, v) in [
                ("eff_loss", r.eff_loss),
                ("r_c", r.r_c),
                ("r_c_approx", r.r_c_approx),
                ("r_c_printed", r.r_c_printed),
                ("r_dc", r.r_dc),
                ("ratio", r.ratio),
                ("ratio_approx", r.ratio_approx),
            ] {
                println!("{k} {}", fmt_f64(v));
            }
        }
        Oracle::Jitter { sigma0, n_a, k_a2, n } => {
            println!("{}", show(jitter_model(sigma0, n_a, k_a2, n)?.value));
        }
        Oracle::IdealConditions { config, tol } => {
            let resolved = load(&config, false)?;
            let point = resolved.points()?.remove(0);
            let arch = pnr_core::architecture::build_architecture(&point.architecture)?;
            let report = check_ideal_conditions(&arch, tol);
            for c in &report.conditions {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("all {}", if report.all_pass() { "PASS" } else { "FAIL" });
        }
    }
    Ok(())
}

fn design(cmd: Design) -> Result<(), CliError> {
    match cmd {
        Design::Snr0 { f, current, tm } => println!("{}", show(snr0_transport(f, current, tm)?)),
        Design::Thickness { alpha } => println!("{}", show(film_thickness(alpha)?)),
        Design::Coupling { lambda, area, n_d, gamma_free2 } => {
            println!("{}", show(effective_coupling(lambda, area, n_d, gamma_free2)?))
        }
        Design::Absorbers { area, sigma } => println!("{}", required_absorbers(area, sigma)?),
        Design::Tradeoff { op, t_lo, t_hi, points, out } => {
            if !(t_lo > 0.0 && t_hi > t_lo) || points < 2 {
                return Err(CliError::config("need 0 < t_lo < t_hi and at least 2 points"));
            }
            let amp = op.amplifier()?;
            let curve = tradeoff_curve(op.n, op.n_a(), op.eff_loss, |t| amp.snr0(t), &log_grid(t_lo, t_hi, points))?;
            let key = format!(
                "tradeoff n={} n_a={} eff_loss={} f={} I={} t_lo={t_lo} t_hi={t_hi} points={points}",
                op.n,
                op.n_a(),
                op.eff_loss,
                op.f,
                op.current
            );
            let mut o = Outputs::new(hex::encode(Sha256::digest(key.as_bytes())));
            let cols: Vec<String> = ["t_MIN", "Delta", "r_C", "r_DC", "SNR0", "n_A"].iter().map(|s| s.to_string()).collect();
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| {
                    vec![fmt_f64(p.t_min), fmt_f64(p.delta), fmt_f64(p.r_c), fmt_f64(p.r_dc), fmt_f64(p.snr0), p.n_a.to_string()]
                })
                .collect();
            o.csv("tradeoff.csv", &cols, &rows)?;
            let bytes = o.into_files().remove(0).1;
            match out {
                Some(path) => std::fs::write(path, bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
        Design::MaxRate { op, r_dc_max, t_lo, t_hi } => {
            let amp = op.amplifier()?;
            match max_count_rate(op.n, op.n_a(), op.eff_loss, |t| amp.snr0(t), r_dc_max, t_lo, t_hi)? {
                Some(p) => print_point(&p),
                None => {
                    return Err(CliError::Numeric(format!(
                        "no dwell time in [{t_lo}, {t_hi}] keeps the dark-count rate below {r_dc_max}"
                    )))
                }
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_workers()?;
    match cli.command {
        Command::Simulate(a) => run_command(&a, run::simulate),
        Command::Sweep(a) => {
            let large = a.allow_large;
            run_command(&a, |r| run::sweep(r, large))
        }
        Command::Trajectories(a) => {
            let large = a.allow_large;
            run_command(&a, |r| run::trajectories(r, large))
        }
        Command::ValidateConfig { config, allow_large } => {
            let resolved = load(&config, allow_large)?;
            let v = run::validate(&resolved, allow_large)?;
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))?);
            Ok(())
        }
        Command::Oracle(o) => oracle(o),
        Command::Design(d) => design(d),
    }
}

/// Numeric arguments may be negative everywhere.
fn with_negatives(c: clap::Command) -> clap::Command {
    c.allow_negative_numbers(true).mut_subcommands(with_negatives)
}

fn show(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        x.to_string()
    } else {
        fmt_f64(x)
    }
}

fn main() -> ExitCode {
    let matches = with_negatives(Cli::command()).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pnrdet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
