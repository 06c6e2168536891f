mod error;
mod sweep;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpasim::clements::MeshProgram;
use cpasim::dilation::{dilate, reduce_ancillas};
use cpasim::experiment::{fisher_report, CpaCircuit, InputState};
use cpasim::hardware::{fit_fringe, fit_iv, heater_settings, heater_table_csv, load_store, HeaterCalibration};
use cpasim::lossybs::LossyBeamSplitter;
use cpasim::metrology::heralded_g2;
use cpasim::numerics::ComplexMatrix;
use cpasim::Complex64;
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "cpasim",
    version,
    about = "Compile and simulate lossy beam splitters on an MZI mesh"
)]
struct Cli {
    /// Read angle flags and print angles in degrees instead of radians.
    #[arg(long, global = true)]
    degrees: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the amplitudes of a Type 1 or Type 2 device.
    SolveBs {
        #[arg(long = "type", value_enum)]
        kind: PresetKind,
        #[arg(long)]
        alpha: f64,
    },
    /// Dilate a device onto signal and ancilla modes.
    Dilate(DeviceArgs),
    /// Compile a device to a mesh program, optionally with heater currents.
    Compile {
        #[command(flatten)]
        device: DeviceArgs,
        /// Heater calibration store (JSON object keyed by heater id).
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Write the heater table here instead of appending it to stdout.
        #[arg(long, requires = "calibration")]
        table: Option<PathBuf>,
    },
    /// Run an absorption × phase sweep and write CSV, analysis and manifest.
    Sweep(sweep::SweepArgs),
    /// Fisher information of one device and input state.
    Fisher {
        #[command(flatten)]
        device: DeviceArgs,
        #[arg(long, value_enum, default_value = "single-photon")]
        input: InputArg,
        /// Include the total Fisher information curve.
        #[arg(long)]
        curve: bool,
    },
    /// Fit heater I-V and fringe data into a calibration entry.
    CalibrateFit {
        /// CSV of current (A), voltage (V).
        #[arg(long)]
        iv: PathBuf,
        /// CSV of electrical power (mW), optical power.
        #[arg(long)]
        fringe: PathBuf,
        #[arg(long, default_value = cpasim::hardware::DEFAULT_HEATER)]
        heater: String,
        /// Merge the entry into this calibration store, creating it if needed.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Heralded g2(0) from coincidence rates.
    G2 {
        #[arg(long)]
        abh: f64,
        #[arg(long)]
        ah: f64,
        #[arg(long)]
        bh: f64,
        #[arg(long)]
        h: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetKind {
    Type1,
    Type2,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum DeviceKind {
    Type1,
    Type2,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum InputArg {
    SinglePhoton,
    Noon,
}

impl From<InputArg> for InputState {
    fn from(v: InputArg) -> Self {
        match v {
            InputArg::SinglePhoton => Self::SinglePhoton,
            InputArg::Noon => Self::Noon,
        }
    }
}

#[derive(Args)]
struct DeviceArgs {
    #[arg(long = "type", value_enum, default_value = "type1")]
    kind: DeviceKind,
    /// Absorption |A|^2 in [0, 0.5].
    #[arg(long, required_if_eq_any = [("kind", "type1"), ("kind", "type2")])]
    alpha: Option<f64>,
    /// Transmission amplitude as `re,im` (custom devices).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, required_if_eq("kind", "custom"))]
    t: Option<Complex64>,
    /// Reflection amplitude as `re,im` (custom devices).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, required_if_eq("kind", "custom"))]
    r: Option<Complex64>,
}

impl DeviceArgs {
    fn device(&self) -> Result<LossyBeamSplitter, CliError> {
        let alpha = || self.alpha.ok_or_else(|| CliError::input("--alpha is required"));
        Ok(match self.kind {
            DeviceKind::Type1 => LossyBeamSplitter::solve_type1(alpha()?)?,
            DeviceKind::Type2 => LossyBeamSplitter::solve_type2(alpha()?)?,
            DeviceKind::Custom => match (self.t, self.r) {
                (Some(t), Some(r)) => LossyBeamSplitter::custom(t, r)?,
                _ => return Err(CliError::input("custom devices need --t and --r")),
            },
        })
    }
}

pub(crate) fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re,im`, got {s:?}")),
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Angles {
    pub degrees: bool,
}

impl Angles {
    pub fn read(self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }

    pub fn show(self, v: f64) -> f64 {
        if self.degrees {
            v.to_degrees()
        } else {
            v
        }
    }
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

fn device_json(bs: &LossyBeamSplitter, angles: Angles) -> Value {
    let (s1, s2) = bs.singular_value_pair();
    json!({
        "kind": bs.kind.to_string(),
        "absorption": bs.absorption,
        "t": complex_json(bs.t),
        "r": complex_json(bs.r),
        "t_abs": bs.t.norm(),
        "r_abs": bs.r.norm(),
        "internal_phase": angles.show(bs.internal_phase),
        "singular_values": [s1, s2],
        "violations": bs.validate(),
    })
}

fn program_in(program: &MeshProgram, angles: Angles) -> MeshProgram {
    let mut p = program.clone();
    for m in &mut p.mzis {
        m.theta = angles.show(m.theta);
        m.phi = angles.show(m.phi);
    }
    p.output_phases.iter_mut().for_each(|d| *d = angles.show(*d));
    p
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let fields: Vec<Result<f64, _>> = record.iter().take(2).map(str::parse::<f64>).collect();
        match fields.as_slice() {
            [Ok(x), Ok(y)] => {
                xs.push(*x);
                ys.push(*y);
            }
            // a non-numeric first row is a header
            [_, _] if line == 0 => {}
            _ => {
                return Err(CliError::input(format!(
                    "{}: row {} needs two numeric columns",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok((xs, ys))
}

fn pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::numeric(e.to_string()))
}

fn run(cli: Cli) -> Result<String, CliError> {
    let angles = Angles { degrees: cli.degrees };
    match cli.command {
        Command::SolveBs { kind, alpha } => {
            let bs = match kind {
                PresetKind::Type1 => LossyBeamSplitter::solve_type1(alpha)?,
                PresetKind::Type2 => LossyBeamSplitter::solve_type2(alpha)?,
            };
            pretty(&device_json(&bs, angles))
        }
        Command::Dilate(args) => {
            let bs = args.device()?;
            let full = dilate(&bs.matrix())?;
            let d = reduce_ancillas(&full, 1e-9);
            pretty(&json!({
                "device": device_json(&bs, angles),
                "n_modes": d.n_modes(),
                "signal_modes": d.signal_modes,
                "ancilla_modes": d.ancilla_modes,
                "singular_values": d.singular_values,
                "embedding_error": d.embedding_error(),
                "unitarity_residual": d.matrix.unitarity_residual(),
                "matrix": matrix_json(&d.matrix),
            }))
        }
        Command::Compile {
            device,
            calibration,
            table,
        } => {
            let bs = device.device()?;
            let circuit = CpaCircuit::compile(&bs)?;
            let mut out = pretty(&program_in(&circuit.program, angles))?;
            out.push('\n');
            if let Some(path) = calibration {
                let store = load_store(&read_file(&path)?)?;
                let csv = heater_table_csv(&heater_settings(&circuit.program, &store)?);
                match table {
                    Some(t) => write_file(&t, &csv)?,
                    None => {
                        out.push('\n');
                        out.push_str(&csv);
                    }
                }
            }
            Ok(out.trim_end().to_string())
        }
        Command::Sweep(args) => sweep::run(args, angles),
        Command::Fisher { device, input, curve } => {
            let bs = device.device()?;
            let circuit = CpaCircuit::compile(&bs)?;
            let report = fisher_report(&circuit, input.into())?;
            let mut v = json!({
                "device": device_json(&bs, angles),
                "labels": report.labels,
                "per_outcome_max": report.per_outcome_max,
                "total_max": report.total_max,
                "total_argmax": angles.show(report.total_argmax),
            });
            if curve {
                let phis: Vec<f64> = report.total.phis.iter().map(|p| angles.show(*p)).collect();
                v["curve"] = json!({ "phi": phis, "fisher_total": report.total.values });
            }
            pretty(&v)
        }
        Command::CalibrateFit {
            iv,
            fringe,
            heater,
            store,
        } => {
            let (currents, voltages) = read_pairs(&iv)?;
            let (power, optical) = read_pairs(&fringe)?;
            let iv_fit = fit_iv(&currents, &voltages)?;
            let fringe_fit = fit_fringe(&power, &optical)?;
            let cal = HeaterCalibration {
                resistance: iv_fit.resistance,
                cubic_coeff: iv_fit.cubic_coeff,
                amplitude: fringe_fit.amplitude,
                modulation: fringe_fit.modulation,
                offset: fringe_fit.offset,
                baseline: fringe_fit.baseline,
            };
            cal.validate()?;
            if let Some(path) = &store {
                let mut existing = if path.exists() {
                    load_store(&read_file(path)?)?
                } else {
                    Default::default()
                };
                existing.insert(heater.clone(), cal);
                write_file(path, &(pretty(&existing)? + "\n"))?;
            }
            pretty(&json!({
                "heater_id": heater,
                "calibration": cal,
                "iv_fit": iv_fit,
                "fringe_fit": fringe_fit,
                "period_mw": fringe_fit.period_mw(),
                "visibility": fringe_fit.visibility(),
            }))
        }
        Command::G2 { abh, ah, bh, h } => pretty(&json!({ "g2": heralded_g2(abh, ah, bh, h)? })),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("CPASIM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("CPASIM_THREADS must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return Err(CliError::input("CPASIM_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::input(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code);
        }
    };
    match configure_threads().and_then(|_| run(cli)) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{out}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code)
        }
    }
}
