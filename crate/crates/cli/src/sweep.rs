use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;
use cpasim::experiment::{analyze, run_sweep, write_csv, DeviceSpec, InputState, PhiGrid, SweepConfig};
use cpasim::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::{parse_complex, read_file, write_file, Angles, DeviceKind, InputArg};

const CSV_NAME: &str = "sweep.csv";
const ANALYSIS_NAME: &str = "analysis.json";
const MANIFEST_NAME: &str = "manifest.json";

#[derive(Args)]
pub struct SweepArgs {
    /// JSON sweep configuration; flags below override its fields.
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long = "type", value_enum)]
    kind: Option<DeviceKind>,
    /// Comma-separated absorptions.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    t: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    r: Option<Complex64>,
    #[arg(long, value_enum)]
    input: Option<InputArg>,
    #[arg(long, allow_hyphen_values = true)]
    phi_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi_stop: Option<f64>,
    #[arg(long)]
    phi_points: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated detector efficiencies.
    #[arg(long, value_delimiter = ',')]
    efficiencies: Option<Vec<f64>>,
}

fn default_config() -> SweepConfig {
    SweepConfig {
        bs_kind: DeviceSpec::Type1,
        absorptions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        phi_grid: PhiGrid::full_turn(201),
        input_state: InputState::SinglePhoton,
        shots: None,
        seed: 0,
        efficiencies: None,
    }
}

impl SweepArgs {
    fn config(&self, angles: Angles) -> Result<SweepConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => serde_json::from_str(&read_file(path)?)?,
            None => default_config(),
        };
        match self.kind {
            Some(DeviceKind::Type1) => c.bs_kind = DeviceSpec::Type1,
            Some(DeviceKind::Type2) => c.bs_kind = DeviceSpec::Type2,
            Some(DeviceKind::Custom) => match (self.t, self.r) {
                (Some(t), Some(r)) => c.bs_kind = DeviceSpec::Custom { t, r },
                _ => return Err(CliError::input("custom devices need --t and --r")),
            },
            None => {
                if let (DeviceSpec::Custom { t, r }, true) = (&mut c.bs_kind, self.t.is_some() || self.r.is_some()) {
                    *t = self.t.unwrap_or(*t);
                    *r = self.r.unwrap_or(*r);
                }
            }
        }
        if let Some(a) = &self.alpha {
            c.absorptions = a.clone();
        }
        if let Some(i) = self.input {
            c.input_state = i.into();
        }
        if let Some(v) = self.phi_start {
            c.phi_grid.start = angles.read(v);
        }
        if let Some(v) = self.phi_stop {
            c.phi_grid.stop = angles.read(v);
        }
        if let Some(n) = self.phi_points {
            c.phi_grid.count = n;
        }
        if self.shots.is_some() {
            c.shots = self.shots;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.efficiencies.is_some() {
            c.efficiencies = self.efficiencies.clone();
        }
        Ok(c)
    }
}

/// Written next to every sweep output.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_path: Option<String>,
    outputs: Vec<String>,
    version: &'static str,
    /// SHA-256 of the effective configuration after flag overrides.
    config_hash: String,
    seed: u64,
    config: SweepConfig,
    /// Seconds since the Unix epoch; the only field that differs between runs.
    timestamp: u64,
}

pub fn run(args: SweepArgs, angles: Angles) -> Result<String, CliError> {
    let config = args.config(angles)?;
    let result = run_sweep(&config)?;
    let analysis = analyze(&result)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let csv_path = args.out_dir.join(CSV_NAME);
    let analysis_path = args.out_dir.join(ANALYSIS_NAME);
    let manifest_path = args.out_dir.join(MANIFEST_NAME);
    write_file(&csv_path, &write_csv(&result))?;
    let analysis_json = serde_json::to_string_pretty(&analysis).map_err(|e| CliError::numeric(e.to_string()))?;
    write_file(&analysis_path, &(analysis_json + "\n"))?;

    let canonical = serde_json::to_string(&config).map_err(|e| CliError::numeric(e.to_string()))?;
    let manifest = RunManifest {
        command: "sweep",
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        outputs: [&csv_path, &analysis_path]
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: format!("sha256:{:x}", Sha256::digest(canonical.as_bytes())),
        seed: config.seed,
        config,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::numeric(e.to_string()))?;
    write_file(&manifest_path, &(manifest_json.clone() + "\n"))?;
    Ok(manifest_json)
}
