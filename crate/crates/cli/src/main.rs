//! `omm`: steady-state entanglement of the driven atom-cavity-phonon-magnon
//! system from a JSON parameter document.

mod config;

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use omm_core::experiments::{
    fmt_float, optimal_detuning_csv, optimal_detuning_scan, sweep2d, temperature_sweep, AxisUnit,
    SearchOptions, SweepAxis, SweepParam, SweepResult,
};
use omm_core::{excitation_numbers, Error, ModePair};

use config::RunConfig;

const THREADS_ENV: &str = "OMM_THREADS";
const DEFAULT_GRID: usize = 101;

#[derive(Debug)]
pub enum Failure {
    /// Configuration or validation problem, exit code 1.
    Input(String),
    /// Numerical failure, exit code 2.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "omm", version, about = "Steady-state entanglement in a hybrid atom-cavity-magnomechanical system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON parameter document.
    #[arg(short, long)]
    config: PathBuf,
    /// Dotted-path override, e.g. `G_m=1.5e6` or `delta_a.rad_per_s=-2.5e8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Artifact path.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Classical steady state and excitation report.
    Steady(Common),
    /// Solve for the steady covariance matrix and dump it.
    Cm(Common),
    /// Logarithmic negativity for selected mode pairs.
    Entangle {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pairs from the letters a, c, b, m.
        #[arg(long, default_value = "cb,ab,am,cm")]
        pairs: String,
    },
    /// Two-dimensional grid sweep.
    Sweep2d {
        #[command(flatten)]
        common: Common,
        /// `name:start:stop:count:unit`; an empty count means 101.
        #[arg(long, allow_hyphen_values = true)]
        axis1: String,
        #[arg(long, allow_hyphen_values = true)]
        axis2: String,
        #[arg(long, default_value = "cb,ab,am,cm")]
        pairs: String,
    },
    /// Optimal cavity detuning versus G_m.
    Optdet {
        #[command(flatten)]
        common: Common,
        /// G_m/2π scan in Hz, `start:stop:count`.
        #[arg(long, default_value = "0.5e6:4e6:30")]
        coupling_m: String,
        /// Search interval for Δ̃_c in units of ω_b, `lo:hi`.
        #[arg(long, default_value = "0.01:1.5")]
        range: String,
        #[arg(long, default_value_t = 150)]
        prescan: usize,
        #[arg(long, default_value_t = 3)]
        brackets: usize,
    },
    /// E_am versus bath temperature.
    Tempsweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "T:0.01:0.5:50:abs")]
        axis: String,
    },
    /// Validate the configuration and check stability.
    Check(Common),
}

fn parse_pairs(s: &str) -> Result<Vec<ModePair>, Failure> {
    let pairs = s
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<ModePair>, _>>()
        .map_err(Failure::from)?;
    if pairs.is_empty() {
        return Err(Failure::Input("pairs: at least one pair required".into()));
    }
    Ok(pairs)
}

fn parse_number(what: &str, s: &str) -> Result<f64, Failure> {
    s.trim()
        .parse()
        .map_err(|_| Failure::Input(format!("{what}: cannot parse {s:?} as a number")))
}

fn parse_axis(flag: &str, spec: &str) -> Result<SweepAxis, Failure> {
    let fail = |reason: String| Failure::Input(format!("axis {flag} ({spec}): {reason}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 5 {
        return Err(fail("expected name:start:stop:count:unit".into()));
    }
    let param: SweepParam = parts[0].parse().map_err(|e: Error| fail(e.to_string()))?;
    let start = parse_number(flag, parts[1])?;
    let stop = parse_number(flag, parts[2])?;
    let count = if parts[3].is_empty() {
        DEFAULT_GRID
    } else {
        parts[3]
            .parse()
            .map_err(|_| fail(format!("count {:?} is not a non-negative integer", parts[3])))?
    };
    let unit: AxisUnit = parts[4].parse().map_err(|e: Error| fail(e.to_string()))?;
    SweepAxis::new(param, start, stop, count, unit).map_err(|e| fail(e.to_string()))
}

fn parse_range(what: &str, s: &str, parts: usize) -> Result<Vec<f64>, Failure> {
    let v: Vec<&str> = s.split(':').collect();
    if v.len() != parts {
        return Err(Failure::Input(format!("{what}: expected {parts} colon-separated values, got {s:?}")));
    }
    v.iter().map(|x| parse_number(what, x)).collect()
}

fn write_artifact(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn require_out(common: &Common, command: &str) -> Result<PathBuf, Failure> {
    common
        .out
        .clone()
        .ok_or_else(|| Failure::Input(format!("{command}: --out is required")))
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    RunConfig::load(&common.config, &common.set)
}

/// Prints `summary` and, when requested, writes it after the preamble.
fn report(cfg: &RunConfig, common: &Common, command: &str, summary: &str) -> Result<(), Failure> {
    print!("{summary}");
    if let Some(out) = &common.out {
        write_artifact(out, &format!("{}{summary}", cfg.preamble(command)))?;
    }
    Ok(())
}

fn steady(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let m = &cfg.model;
    let ss = omm_core::solve_steady_state(m)?;
    let rep = excitation_numbers(&ss, m);
    let c = |z: omm_core::Complex64| format!("{} {}", fmt_float(z.re), fmt_float(z.im));
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_float);
    let mut s = String::new();
    writeln!(s, "amp_a = {}", c(ss.amp_a)).unwrap();
    writeln!(s, "amp_c = {}", c(ss.amp_c)).unwrap();
    writeln!(s, "amp_m = {}", c(ss.amp_m)).unwrap();
    writeln!(s, "q_mean = {}", fmt_float(ss.q_mean)).unwrap();
    writeln!(s, "delta_c = {}", fmt_float(ss.delta_c)).unwrap();
    writeln!(s, "delta_m = {}", fmt_float(ss.delta_m)).unwrap();
    writeln!(s, "delta_c_eff = {}", fmt_float(ss.delta_c_eff)).unwrap();
    writeln!(s, "delta_m_eff = {}", fmt_float(ss.delta_m_eff)).unwrap();
    writeln!(s, "G_c = {} (|G_c|/2pi = {} Hz)", c(ss.coupling_c), fmt_float(ss.coupling_c.norm() / TAU)).unwrap();
    writeln!(s, "G_m = {} (|G_m|/2pi = {} Hz)", c(ss.coupling_m), fmt_float(ss.coupling_m.norm() / TAU)).unwrap();
    writeln!(s, "iterations = {}", ss.iterations).unwrap();
    writeln!(s, "residual = {}", fmt_float(ss.residual)).unwrap();
    writeln!(s, "magnons = {}", fmt_float(rep.magnons)).unwrap();
    writeln!(s, "magnon_capacity = {}", fmt_float(rep.magnon_capacity)).unwrap();
    writeln!(s, "magnon_ratio = {}", fmt_float(rep.magnon_ratio)).unwrap();
    writeln!(s, "atoms = {}", fmt_float(rep.atoms)).unwrap();
    writeln!(s, "atom_capacity = {}", opt(rep.atom_capacity)).unwrap();
    writeln!(s, "atom_ratio = {}", opt(rep.atom_ratio)).unwrap();
    writeln!(s, "low_excitation = {}", if rep.warning() { "violated" } else { "ok" }).unwrap();
    report(&cfg, common, "steady", &s)
}

fn solve_cm(cfg: &RunConfig) -> Result<omm_core::CovarianceMatrix, Failure> {
    let m = &cfg.model;
    let ss = omm_core::solve_steady_state(m)?;
    let a = omm_core::build_drift(&ss, m)?;
    let d = omm_core::build_diffusion(m, m.temperature)?;
    Ok(omm_core::solve_lyapunov(&a, &d)?)
}

fn cm(common: &Common) -> Result<(), Failure> {
    let out = require_out(common, "cm")?;
    let cfg = load(common)?;
    let v = solve_cm(&cfg)?;
    write_artifact(&out, &format!("{}{}", cfg.preamble("cm"), v.to_text()))?;
    println!("wrote covariance matrix to {}", out.display());
    Ok(())
}

fn entangle(common: &Common, pairs: &str) -> Result<(), Failure> {
    let pairs = parse_pairs(pairs)?;
    let cfg = load(common)?;
    let v = solve_cm(&cfg)?;
    if !v.is_physical()? {
        return Err(Failure::Numerical(format!(
            "unphysical covariance: min symplectic eigenvalue {}",
            v.min_symplectic_eigenvalue()?
        )));
    }
    let mut s = String::new();
    for p in pairs {
        let n = omm_core::log_negativity(&omm_core::reduced_cm(&v, p)?)?;
        writeln!(s, "E_{p} = {}", fmt_float(n.value)).unwrap();
    }
    report(&cfg, common, "entangle", &s)
}

fn write_sweep(cfg: &RunConfig, out: &Path, command: &str, res: &SweepResult) -> Result<(), Failure> {
    write_artifact(out, &format!("{}{}", cfg.preamble(command), res.to_csv()))?;
    let stable = res.records.iter().filter(|r| r.stable()).count();
    println!("wrote {} points ({stable} stable) to {}", res.records.len(), out.display());
    Ok(())
}

fn sweep(common: &Common, axis1: &str, axis2: &str, pairs: &str) -> Result<(), Failure> {
    let out = require_out(common, "sweep2d")?;
    let a1 = parse_axis("axis1", axis1)?;
    let a2 = parse_axis("axis2", axis2)?;
    let pairs = parse_pairs(pairs)?;
    let cfg = load(common)?;
    let res = sweep2d(&cfg.model, a1, a2, &pairs)?;
    write_sweep(&cfg, &out, "sweep2d", &res)
}

fn optdet(common: &Common, coupling_m: &str, range: &str, prescan: usize, brackets: usize) -> Result<(), Failure> {
    let out = require_out(common, "optdet")?;
    let g = parse_range("coupling-m", coupling_m, 3)?;
    let count = g[2] as usize;
    if g[2].fract() != 0.0 || count < 2 {
        return Err(Failure::Input(format!("coupling-m: count must be an integer >= 2, got {}", g[2])));
    }
    let r = parse_range("range", range, 2)?;
    let opts = SearchOptions {
        range: (r[0], r[1]),
        prescan_points: prescan,
        brackets,
        ..SearchOptions::default()
    };
    let cfg = load(common)?;
    let couplings: Vec<f64> = (0..count)
        .map(|i| TAU * (g[0] + (g[1] - g[0]) * i as f64 / (count - 1) as f64))
        .collect();
    let rows = optimal_detuning_scan(&cfg.model, &couplings, &opts)?;
    write_artifact(&out, &format!("{}{}", cfg.preamble("optdet"), optimal_detuning_csv(&cfg.model, &rows)))?;
    println!("wrote {} optimal detunings to {}", rows.len(), out.display());
    Ok(())
}

fn tempsweep(common: &Common, axis: &str) -> Result<(), Failure> {
    let out = require_out(common, "tempsweep")?;
    let axis = parse_axis("axis", axis)?;
    let cfg = load(common)?;
    let res = temperature_sweep(&cfg.model, axis)?;
    write_sweep(&cfg, &out, "tempsweep", &res)
}

fn check(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let m = &cfg.model;
    let ss = omm_core::solve_steady_state(m)?;
    let st = omm_core::is_stable(&omm_core::build_drift(&ss, m)?)?;
    let rep = excitation_numbers(&ss, m);
    let verdict = if st.stable { "stable" } else { "unstable" };
    let mut s = String::new();
    writeln!(s, "{verdict}").unwrap();
    writeln!(s, "margin = {} rad/s ({} omega_b)", fmt_float(st.margin), fmt_float(st.margin / m.omega_b)).unwrap();
    if rep.warning() {
        writeln!(s, "warning: low-excitation condition violated").unwrap();
    }
    report(&cfg, common, "check", &s)?;
    if st.stable {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("drift matrix is unstable (margin {:e})", st.margin)))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("{THREADS_ENV}: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(format!("{THREADS_ENV}: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Steady(c) => steady(c),
        Command::Cm(c) => cm(c),
        Command::Entangle { common, pairs } => entangle(common, pairs),
        Command::Sweep2d {
            common,
            axis1,
            axis2,
            pairs,
        } => sweep(common, axis1, axis2, pairs),
        Command::Optdet {
            common,
            coupling_m,
            range,
            prescan,
            brackets,
        } => optdet(common, coupling_m, range, *prescan, *brackets),
        Command::Tempsweep { common, axis } => tempsweep(common, axis),
        Command::Check(c) => check(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_specs() {
        let a = parse_axis("axis1", "delta_a:-1.5:-0.5::omega_b").unwrap();
        assert_eq!((a.param, a.count, a.unit), (SweepParam::DeltaA, DEFAULT_GRID, AxisUnit::OmegaB));
        let err = parse_axis("axis2", "G_m:0:0.5:1:G_c").unwrap_err();
        assert_eq!(err.code(), 1);
        assert!(err.message().contains("axis2") && err.message().contains("G_m"), "{}", err.message());
        assert!(parse_axis("axis1", "delta_a:-1.5:-0.5").is_err());
        assert!(parse_axis("axis1", "bogus:0:1:3:abs").is_err());
    }

    #[test]
    fn pair_lists() {
        assert_eq!(parse_pairs("am,cb").unwrap(), vec![ModePair::AM, ModePair::CB]);
        assert_eq!(parse_pairs("aa").unwrap_err().code(), 1);
    }

    #[test]
    fn error_classes() {
        assert_eq!(Failure::from(Error::Unstable { margin: 1.0 }).code(), 2);
        assert_eq!(
            Failure::from(Error::InvalidAxis {
                axis: "T".into(),
                reason: String::new()
            })
            .code(),
            1
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let _ = omm_core::experiments::presets::baseline();
    }
}
