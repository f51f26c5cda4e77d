use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ftqkd::config::{Mode, NoiseMode, SessionConfig};
use ftqkd::security::{bound_crossing, curve_csv, keyrate_gain, qber_curve, security_threshold};
use ftqkd::session::{run_session, run_spectrometer};
use ftqkd::units::{parse_quantity, Dimension, PhysParams};
use ftqkd::Error;

#[derive(Parser)]
#[command(name = "ftqkd", version, about = "Frequency-time coding QKD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo session and print its JSON report.
    Simulate(SimulateArgs),
    /// Asymptotic key rate per pulse for a given QBER and gain.
    Keyrate {
        #[arg(long)]
        qber: f64,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long, default_value_t = 1.0)]
        f: f64,
    },
    /// Tabulate the QBER bound against detector jitter as CSV.
    QberCurve(CurveArgs),
    /// Measure the pair spectrum with equal-sign dispersion at both arms.
    Spectrometer(SpectrometerArgs),
    /// Print the full default configuration of a mode.
    PrintConfig {
        #[arg(value_enum, default_value = "epr")]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pm,
    Epr,
    EprMidpoint,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pm => Mode::Pm,
            ModeArg::Epr => Mode::EprSourceAtAlice,
            ModeArg::EprMidpoint => Mode::EprMidpoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Eq7,
    Microscopic,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; omitted fields take the mode defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pulses: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Process slot batches on one thread.
    #[arg(long)]
    serial: bool,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    mode: ModeArg,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    noise_mode: Option<NoiseArg>,
    /// Write the public transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value = "10 ps", value_parser = time)]
    jitter_min: f64,
    #[arg(long, default_value = "200 ps", value_parser = time)]
    jitter_max: f64,
    #[arg(long, default_value_t = 191)]
    steps: usize,
    #[arg(long, default_value = "7000 ps/nm", value_parser = dispersion)]
    dispersion: f64,
    #[arg(long, default_value = "1550 nm", value_parser = length)]
    wavelength: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrometerArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 200)]
    bins: usize,
}

fn time(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Time).map_err(|e| e.to_string())
}

fn dispersion(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Dispersion).map_err(|e| e.to_string())
}

fn length(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dimension::Length).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(mode: Mode, run: &RunArgs) -> Result<SessionConfig, Failure> {
    let mut value = match &run.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => serde_json::json!({}),
    };
    if let Some(obj) = value.as_object_mut() {
        obj.insert("mode".into(), serde_json::to_value(mode).expect("mode serializes"));
        if let Some(p) = run.pulses {
            obj.insert("pulses".into(), p.into());
        }
        if let Some(s) = run.seed {
            obj.insert("seed".into(), s.into());
        }
        if run.serial {
            obj.insert("parallel".into(), false.into());
        }
    }
    Ok(SessionConfig::from_json(&value.to_string())?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = load_config(args.mode.into(), &args.run)?;
            if let Some(n) = args.noise_mode {
                cfg.noise_mode = match n {
                    NoiseArg::Eq7 => NoiseMode::Eq7,
                    NoiseArg::Microscopic => NoiseMode::Microscopic,
                };
            }
            let report = match &args.transcript {
                Some(path) => {
                    let file = fs::File::create(path).map_err(io_err(path))?;
                    let mut w = BufWriter::new(file);
                    let r = run_session(&cfg, Some(&mut w))?;
                    w.flush().map_err(io_err(path))?;
                    r
                }
                None => run_session(&cfg, None)?,
            };
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(&args.run.out, &(report.to_json_pretty() + "\n"))
        }
        Command::Keyrate { qber, gain, f } => {
            let r = keyrate_gain(gain, qber, f)?;
            println!("{r:.6}");
            Ok(())
        }
        Command::QberCurve(a) => {
            let phys = PhysParams {
                wavelength: a.wavelength,
                ..PhysParams::default()
            };
            let rows = qber_curve(a.jitter_min, a.jitter_max, a.steps, a.dispersion, &phys)?;
            emit(&a.out, &curve_csv(&rows))?;
            let threshold = security_threshold(1.0)?;
            let crossing = bound_crossing(threshold, a.dispersion, &phys)?;
            let row = rows.iter().position(|r| r.qber >= threshold);
            eprintln!(
                "security threshold {threshold:.6} (f = 1) is reached at jitter {:.3} ps; {}",
                crossing * 1e12,
                match row {
                    Some(i) => format!("first row at or above it: {}", i + 1),
                    None => "no row reaches it".to_string(),
                }
            );
            Ok(())
        }
        Command::Spectrometer(a) => {
            let cfg = load_config(Mode::EprSourceAtAlice, &a.run)?;
            let res = run_spectrometer(&cfg, a.bins)?;
            emit(&a.run.out, &res.histogram.to_csv())?;
            let report = serde_json::json!({
                "coincidences": res.differences.len(),
                "rms_difference_s": res.rms_difference,
                "recovered_bandwidth_hz": res.recovered_bandwidth,
                "configured_bandwidth_hz": cfg.spdc_source.bandwidth_a,
                "recovered_center_hz": res.recovered_center,
                "jitter_floor_hz": res.jitter_floor,
                "at_jitter_floor": res.at_jitter_floor,
            });
            let text = serde_json::to_string_pretty(&report).expect("json");
            if a.run.out.is_some() {
                println!("{text}");
            } else {
                eprintln!("{text}");
            }
            Ok(())
        }
        Command::PrintConfig { mode } => {
            println!("{}", SessionConfig::default_for(mode.into()).to_json_pretty());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
