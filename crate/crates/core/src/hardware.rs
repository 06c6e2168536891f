//! Thermo-optic heater calibration.
//!
//! A heater driven with current `I` has voltage `V(I) = R·I + β·I³`, so its
//! electrical power is `p = R·I² + β·I⁴`. The optical output of the MZI it
//! tunes follows `A·cos(b·p + c) + d` with `p` in milliwatts, which makes
//! `b·p + c` the phase the heater imprints.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clements::MeshProgram;
use crate::format::sig17;
use crate::numerics::{least_squares, wrap_2pi, NumericsError};

/// Largest drive current the heater electronics deliver, in amperes.
pub const MAX_CURRENT: f64 = 0.024;
/// Key in a calibration store used for heaters without their own entry.
pub const DEFAULT_HEATER: &str = "default";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardwareError {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("not enough data: {0}")]
    Insufficient(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("signal is constant; there is no fringe to fit")]
    NoFringe,
    #[error("data span {span:.4} mW covers less than one fringe period {period:.4} mW")]
    SpanTooShort { span: f64, period: f64 },
    #[error("required current {required_ma:.4} mA exceeds the {limit_ma} mA limit")]
    CurrentOutOfRange { required_ma: f64, limit_ma: f64 },
    #[error("electrical power must be finite and nonnegative, got {0}")]
    InvalidPower(f64),
    #[error("no calibration for heater {0}")]
    MissingCalibration(String),
}

impl From<NumericsError> for HardwareError {
    fn from(e: NumericsError) -> Self {
        Self::Fit(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeaterCalibration {
    /// Ohms.
    pub resistance: f64,
    /// Ohms per ampere².
    pub cubic_coeff: f64,
    /// Fringe amplitude, optical power units.
    pub amplitude: f64,
    /// Radians per milliwatt.
    pub modulation: f64,
    /// Radians.
    pub offset: f64,
    /// Fringe baseline, optical power units.
    pub baseline: f64,
}

impl HeaterCalibration {
    pub fn validate(&self) -> Result<(), HardwareError> {
        let fields = [
            self.resistance,
            self.cubic_coeff,
            self.amplitude,
            self.modulation,
            self.offset,
            self.baseline,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(HardwareError::InvalidCalibration("non-finite field".into()));
        }
        if self.resistance <= 0.0 {
            return Err(HardwareError::InvalidCalibration(format!(
                "resistance {} must be positive",
                self.resistance
            )));
        }
        if self.modulation <= 0.0 {
            return Err(HardwareError::InvalidCalibration(format!(
                "modulation {} must be positive",
                self.modulation
            )));
        }
        if self.baseline <= 0.0 {
            return Err(HardwareError::InvalidCalibration(format!(
                "baseline {} must be positive",
                self.baseline
            )));
        }
        Ok(())
    }

    /// Electrical power per 2π of phase, in milliwatts.
    pub fn period_mw(&self) -> f64 {
        TAU / self.modulation
    }

    /// Phase imprinted at `electrical_power` milliwatts, not reduced.
    pub fn phase_at(&self, electrical_power: f64) -> f64 {
        self.modulation * electrical_power + self.offset
    }

    pub fn optical_power(&self, electrical_power: f64) -> f64 {
        self.amplitude * self.phase_at(electrical_power).cos() + self.baseline
    }

    /// Electrical power in milliwatts at `current` amperes.
    pub fn electrical_power(&self, current: f64) -> f64 {
        let i2 = current * current;
        1e3 * (self.resistance * i2 + self.cubic_coeff * i2 * i2)
    }

    pub fn voltage(&self, current: f64) -> f64 {
        self.resistance * current + self.cubic_coeff * current.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvFit {
    pub resistance: f64,
    pub cubic_coeff: f64,
    pub residual_rms: f64,
}

/// Least squares of `V = R·I + β·I³`.
pub fn fit_iv(currents: &[f64], voltages: &[f64]) -> Result<IvFit, HardwareError> {
    if currents.len() != voltages.len() {
        return Err(HardwareError::Insufficient(format!(
            "{} currents for {} voltages",
            currents.len(),
            voltages.len()
        )));
    }
    if currents.len() < 4 {
        return Err(HardwareError::Insufficient(format!(
            "{} points, need at least 4",
            currents.len()
        )));
    }
    let mut sorted = currents.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(HardwareError::Fit("currents must be distinct".into()));
    }
    let cubes: Vec<f64> = currents.iter().map(|i| i.powi(3)).collect();
    let beta = least_squares(&[currents.to_vec(), cubes], voltages)?;
    let (resistance, cubic_coeff) = (beta[0], beta[1]);
    let ss: f64 = currents
        .iter()
        .zip(voltages)
        .map(|(i, v)| (resistance * i + cubic_coeff * i.powi(3) - v).powi(2))
        .sum();
    Ok(IvFit {
        resistance,
        cubic_coeff,
        residual_rms: (ss / currents.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub amplitude: f64,
    /// Radians per milliwatt.
    pub modulation: f64,
    /// Radians in `[0, 2π)`.
    pub offset: f64,
    pub baseline: f64,
    pub residual_rms: f64,
}

impl FringeFit {
    pub fn period_mw(&self) -> f64 {
        TAU / self.modulation
    }

    /// `A / d`.
    pub fn visibility(&self) -> f64 {
        self.amplitude / self.baseline
    }
}

// Linear fit of p·cos(bx) + q·sin(bx) + d for fixed b: (p, q, d, sse).
fn fringe_linear(x: &[f64], y: &[f64], b: f64) -> Option<([f64; 3], f64)> {
    let cos: Vec<f64> = x.iter().map(|v| (b * v).cos()).collect();
    let sin: Vec<f64> = x.iter().map(|v| (b * v).sin()).collect();
    let beta = least_squares(&[cos.clone(), sin.clone(), vec![1.0; x.len()]], y).ok()?;
    let sse = (0..x.len())
        .map(|i| (beta[0] * cos[i] + beta[1] * sin[i] + beta[2] - y[i]).powi(2))
        .sum();
    Some(([beta[0], beta[1], beta[2]], sse))
}

fn fringe_sse(x: &[f64], y: &[f64], params: &[f64; 4]) -> f64 {
    let [p, q, b, d] = *params;
    x.iter()
        .zip(y)
        .map(|(&v, &t)| (p * (b * v).cos() + q * (b * v).sin() + d - t).powi(2))
        .sum()
}

/// Nonlinear least squares of `A·cos(b·p + c) + d` over electrical power `p`.
///
/// `b` is seeded by scanning candidate periods between the data span and
/// twice the mean sample spacing, refined by golden-section search on the
/// variable-projection residual, then polished with Gauss-Newton on all
/// four parameters.
pub fn fit_fringe(electrical_power: &[f64], optical_power: &[f64]) -> Result<FringeFit, HardwareError> {
    let (x, y) = (electrical_power, optical_power);
    if x.len() != y.len() {
        return Err(HardwareError::Insufficient(format!(
            "{} powers for {} readings",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 6 {
        return Err(HardwareError::Insufficient(format!(
            "{} points, need at least 6",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(HardwareError::Fit("non-finite data".into()));
    }
    let n = x.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if spread <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err(HardwareError::NoFringe);
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = hi - lo;
    if span <= 0.0 {
        return Err(HardwareError::Fit("all powers are equal".into()));
    }

    let b_min = TAU / span;
    let b_max = (std::f64::consts::PI * (n - 1.0) / span).max(b_min * 1.5);
    let step = b_min / 8.0;
    let sse_at = |b: f64| fringe_linear(x, y, b).map_or(f64::INFINITY, |(_, e)| e);
    let candidates = ((b_max - b_min) / step).ceil() as usize + 1;
    let (best, _) = (0..candidates)
        .map(|k| b_min * 0.5 + k as f64 * step)
        .map(|b| (b, sse_at(b)))
        .fold(
            (b_min, f64::INFINITY),
            |acc, (b, e)| if e < acc.1 { (b, e) } else { acc },
        );

    let (mut l, mut h) = ((best - step).max(step * 0.5), best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c1 = h - g * (h - l);
    let mut c2 = l + g * (h - l);
    let (mut f1, mut f2) = (sse_at(c1), sse_at(c2));
    for _ in 0..100 {
        if f1 < f2 {
            h = c2;
            c2 = c1;
            f2 = f1;
            c1 = h - g * (h - l);
            f1 = sse_at(c1);
        } else {
            l = c1;
            c1 = c2;
            f1 = f2;
            c2 = l + g * (h - l);
            f2 = sse_at(c2);
        }
    }
    let b0 = 0.5 * (l + h);
    let (lin, _) = fringe_linear(x, y, b0).ok_or_else(|| HardwareError::Fit("degenerate design".into()))?;
    let mut params = [lin[0], lin[1], b0, lin[2]];
    let mut sse = fringe_sse(x, y, &params);

    for _ in 0..50 {
        let [p, q, b, _] = params;
        let jc: Vec<f64> = x.iter().map(|v| (b * v).cos()).collect();
        let js: Vec<f64> = x.iter().map(|v| (b * v).sin()).collect();
        let jb: Vec<f64> = x.iter().map(|v| v * (-p * (b * v).sin() + q * (b * v).cos())).collect();
        let resid: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(&v, &t)| t - (p * (b * v).cos() + q * (b * v).sin() + params[3]))
            .collect();
        let Ok(delta) = least_squares(&[jc, js, jb, vec![1.0; x.len()]], &resid) else {
            break;
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = [
                params[0] + scale * delta[0],
                params[1] + scale * delta[1],
                params[2] + scale * delta[2],
                params[3] + scale * delta[3],
            ];
            let e = fringe_sse(x, y, &trial);
            if e <= sse {
                improved = e < sse;
                params = trial;
                sse = e;
                break;
            }
            scale *= 0.5;
        }
        if !improved || delta[2].abs() <= 1e-15 * params[2].abs() {
            break;
        }
    }

    let [p, q, modulation, baseline] = params;
    if !params.iter().all(|v| v.is_finite()) || modulation <= 0.0 {
        return Err(HardwareError::Fit("did not converge".into()));
    }
    let period = TAU / modulation;
    if span < period * (1.0 - 1e-6) {
        return Err(HardwareError::SpanTooShort { span, period });
    }
    Ok(FringeFit {
        amplitude: p.hypot(q),
        modulation,
        offset: wrap_2pi((-q).atan2(p)),
        baseline,
        residual_rms: (sse / n).sqrt(),
    })
}

/// Smallest nonnegative electrical power (mW) imprinting `target_phase`.
///
/// `target_phase` is taken as an absolute setting: the result is
/// `(target − c)/b` when that is nonnegative, otherwise the same point moved
/// up by whole periods. A target one full turn above `c` therefore costs one
/// period rather than nothing.
pub fn phase_to_power(target_phase: f64, cal: &HeaterCalibration) -> Result<f64, HardwareError> {
    cal.validate()?;
    if !target_phase.is_finite() {
        return Err(HardwareError::InvalidPower(target_phase));
    }
    let raw = (target_phase - cal.offset) / cal.modulation;
    if raw >= 0.0 {
        return Ok(raw);
    }
    let period = cal.period_mw();
    let turns = (-raw / period).ceil();
    Ok((raw + turns * period).max(0.0))
}

/// Drive current in amperes delivering `electrical_power` milliwatts.
///
/// Solves `β·I⁴ + R·I² − p = 0` as `I² = 2p / (R + √(R² + 4βp))`.
pub fn power_to_current(electrical_power: f64, cal: &HeaterCalibration) -> Result<f64, HardwareError> {
    if !electrical_power.is_finite() || electrical_power < 0.0 {
        return Err(HardwareError::InvalidPower(electrical_power));
    }
    if !(cal.resistance > 0.0 && cal.cubic_coeff.is_finite()) {
        return Err(HardwareError::InvalidCalibration("resistance must be positive".into()));
    }
    let p = electrical_power * 1e-3;
    let disc = cal.resistance * cal.resistance + 4.0 * cal.cubic_coeff * p;
    if disc < 0.0 {
        return Err(HardwareError::CurrentOutOfRange {
            required_ma: f64::INFINITY,
            limit_ma: MAX_CURRENT * 1e3,
        });
    }
    let current = (2.0 * p / (cal.resistance + disc.sqrt())).sqrt();
    if current > MAX_CURRENT * (1.0 + 1e-12) {
        return Err(HardwareError::CurrentOutOfRange {
            required_ma: current * 1e3,
            limit_ma: MAX_CURRENT * 1e3,
        });
    }
    Ok(current)
}

/// Heater id → calibration, stored as a flat JSON object.
pub type CalibrationStore = BTreeMap<String, HeaterCalibration>;

pub fn load_store(json: &str) -> Result<CalibrationStore, serde_json::Error> {
    serde_json::from_str(json)
}

fn lookup<'a>(store: &'a CalibrationStore, id: &str) -> Result<&'a HeaterCalibration, HardwareError> {
    store
        .get(id)
        .or_else(|| store.get(DEFAULT_HEATER))
        .ok_or_else(|| HardwareError::MissingCalibration(id.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeaterSetting {
    pub heater_id: String,
    /// Target phase in radians.
    pub phase: f64,
    pub power_mw: f64,
    pub current_ma: f64,
}

/// Drive settings for every phase shifter of a mesh.
///
/// Heaters are named `mzi<k>_theta`, `mzi<k>_phi` (1-based, light order) and
/// `out<j>` for the output phases (1-based mode).
pub fn heater_settings(program: &MeshProgram, store: &CalibrationStore) -> Result<Vec<HeaterSetting>, HardwareError> {
    let mut targets = Vec::new();
    for (k, mzi) in program.mzis.iter().enumerate() {
        targets.push((format!("mzi{}_theta", k + 1), mzi.theta));
        targets.push((format!("mzi{}_phi", k + 1), mzi.phi));
    }
    for (j, &delta) in program.output_phases.iter().enumerate() {
        targets.push((format!("out{}", j + 1), delta));
    }
    targets
        .into_iter()
        .map(|(heater_id, phase)| {
            let cal = lookup(store, &heater_id)?;
            let power_mw = phase_to_power(phase, cal)?;
            let current_ma = power_to_current(power_mw, cal)? * 1e3;
            Ok(HeaterSetting {
                heater_id,
                phase,
                power_mw,
                current_ma,
            })
        })
        .collect()
}

/// CSV with columns `heater_id,theta_or_phi,power_mW,current_mA`.
pub fn heater_table_csv(settings: &[HeaterSetting]) -> String {
    let mut out = String::from("heater_id,theta_or_phi,power_mW,current_mA\n");
    for s in settings {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.heater_id,
            sig17(s.phase),
            sig17(s.power_mw),
            sig17(s.current_ma)
        );
    }
    out
}
