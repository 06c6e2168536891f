//! Phase-sensitivity and distribution-similarity analysis.
//!
//! Classical Fisher information `F(φ) = Σᵢ (∂φ Pᵢ)² / Pᵢ`, Bhattacharyya
//! overlap, sinusoid and triangle fits, fringe visibility and heralded g².

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::fock::ProbabilityDistribution;
use crate::numerics::{least_squares, wrap_pi};

/// Probabilities below this are treated as zero when dividing.
pub const ZERO_PROBABILITY: f64 = 1e-12;
const ZERO_SLOPE: f64 = 1e-9;
const NEGATIVE_TOL: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrologyError {
    #[error("invalid phase grid: {0}")]
    Grid(String),
    #[error("probability {value} at index {index} is negative")]
    NegativeProbability { index: usize, value: f64 },
    #[error("not enough data: {0}")]
    Insufficient(String),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("distributions do not match: {0}")]
    Mismatch(String),
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("g² is undefined when the two-fold rates multiply to zero")]
    UndefinedG2,
    #[error("rates must be nonnegative and finite")]
    InvalidRate,
}

/// Values of one outcome over a strictly increasing phase grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCurve {
    pub label: String,
    pub phis: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhaseCurve {
    pub fn new(label: impl Into<String>, phis: Vec<f64>, values: Vec<f64>) -> Result<Self, MetrologyError> {
        if phis.len() != values.len() {
            return Err(MetrologyError::Grid(format!(
                "{} phases for {} values",
                phis.len(),
                values.len()
            )));
        }
        if phis.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(MetrologyError::Grid("non-finite entry".into()));
        }
        if phis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MetrologyError::Grid("phases must be strictly increasing".into()));
        }
        Ok(Self {
            label: label.into(),
            phis,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    /// `(φ, value)` at the largest value; the first on ties.
    pub fn max(&self) -> Option<(f64, f64)> {
        self.phis
            .iter()
            .zip(&self.values)
            .fold(None, |best: Option<(f64, f64)>, (&p, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((p, v)),
            })
    }

    pub fn max_value(&self) -> f64 {
        self.max().map_or(0.0, |(_, v)| v)
    }
}

fn is_uniform(phis: &[f64]) -> bool {
    if phis.len() < 3 {
        return true;
    }
    let h = (phis[phis.len() - 1] - phis[0]) / (phis.len() - 1) as f64;
    phis.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
}

/// First derivative on the grid.
///
/// Uniform grids with at least five points use fourth-order stencils: the
/// five-point central one in the interior and the matching one-sided ones on
/// the first and last two points. Shorter or non-uniform grids fall back to
/// three-point Lagrange differences.
pub fn derivative(phis: &[f64], values: &[f64]) -> Vec<f64> {
    let n = phis.len();
    match n {
        0 => return vec![],
        1 => return vec![0.0],
        2 => {
            let d = (values[1] - values[0]) / (phis[1] - phis[0]);
            return vec![d, d];
        }
        _ => {}
    }
    let mut out = vec![0.0; n];
    if n >= 5 && is_uniform(phis) {
        let h = (phis[n - 1] - phis[0]) / (n - 1) as f64;
        let f = values;
        for i in 2..n - 2 {
            out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        }
        let edge0 =
            |f: &dyn Fn(usize) -> f64| (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / 12.0;
        let edge1 = |f: &dyn Fn(usize) -> f64| (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) / 12.0;
        let head = |k: usize| f[k];
        let tail = |k: usize| f[n - 1 - k];
        out[0] = edge0(&head) / h;
        out[1] = edge1(&head) / h;
        out[n - 1] = -edge0(&tail) / h;
        out[n - 2] = -edge1(&tail) / h;
        return out;
    }
    for i in 0..n {
        // three nodes around i, shifted inward at the ends
        let c = i.clamp(1, n - 2);
        let (x0, x1, x2) = (phis[c - 1], phis[c], phis[c + 1]);
        let (y0, y1, y2) = (values[c - 1], values[c], values[c + 1]);
        let x = phis[i];
        out[i] = y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
    }
    out
}

/// Fisher information of one outcome, `(∂φ P)² / P`, at every grid point.
///
/// Where `P < 1e-12` the ratio is 0/0 (or ill-conditioned). Such points take
/// the limit extrapolated quadratically from the regular points on each side,
/// averaged over the sides available; a point with no regular neighbours
/// within three steps contributes 0.
pub fn fisher_per_outcome(curve: &PhaseCurve) -> Result<PhaseCurve, MetrologyError> {
    if let Some((index, &value)) = curve.values.iter().enumerate().find(|(_, &v)| v < -NEGATIVE_TOL) {
        return Err(MetrologyError::NegativeProbability { index, value });
    }
    let n = curve.len();
    let slope = derivative(&curve.phis, &curve.values);
    let regular: Vec<bool> = curve.values.iter().map(|&p| p >= ZERO_PROBABILITY).collect();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            if regular[i] {
                slope[i] * slope[i] / curve.values[i]
            } else {
                0.0
            }
        })
        .collect();

    let side = |i: usize, step: isize| -> Option<f64> {
        let at = |k: isize| -> Option<f64> {
            let j = i as isize + k * step;
            (j >= 0 && (j as usize) < n && regular[j as usize]).then(|| raw[j as usize])
        };
        match (at(1), at(2), at(3)) {
            (Some(f1), Some(f2), Some(f3)) => Some(3.0 * f1 - 3.0 * f2 + f3),
            (Some(f1), Some(f2), None) => Some(2.0 * f1 - f2),
            (Some(f1), None, _) => Some(f1),
            _ => None,
        }
    };

    let values = (0..n)
        .map(|i| {
            if regular[i] {
                return raw[i];
            }
            if slope[i].abs() >= ZERO_SLOPE && curve.values[i] > 0.0 {
                return slope[i] * slope[i] / curve.values[i];
            }
            let sides: Vec<f64> = [side(i, -1), side(i, 1)].into_iter().flatten().collect();
            if sides.is_empty() {
                0.0
            } else {
                (sides.iter().sum::<f64>() / sides.len() as f64).max(0.0)
            }
        })
        .collect();
    PhaseCurve::new(format!("fisher_{}", curve.label), curve.phis.clone(), values)
}

/// Pointwise sum of per-outcome Fisher information.
pub fn fisher_total(curves: &[PhaseCurve]) -> Result<PhaseCurve, MetrologyError> {
    let first = curves
        .first()
        .ok_or_else(|| MetrologyError::Insufficient("no outcome curves".into()))?;
    let mut total = vec![0.0; first.len()];
    for c in curves {
        let same = c.len() == first.len()
            && c.phis
                .iter()
                .zip(&first.phis)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if !same {
            return Err(MetrologyError::Grid(format!(
                "curve {} uses a different phase grid",
                c.label
            )));
        }
        let fi = fisher_per_outcome(c)?;
        total.iter_mut().zip(&fi.values).for_each(|(t, v)| *t += v);
    }
    PhaseCurve::new("fisher_total", first.phis.clone(), total)
}

/// Fisher information of an outcome whose probability follows a fitted sinusoid.
pub fn fisher_from_fit(fit: &SinusoidFit, phis: &[f64]) -> Vec<f64> {
    phis.iter()
        .map(|&phi| {
            let p = fit.eval(phi);
            let d = fit.derivative(phi);
            if p < ZERO_PROBABILITY {
                0.0
            } else {
                d * d / p
            }
        })
        .collect()
}

/// Bhattacharyya coefficient `Σ √(pᵢ qᵢ)` of two raw probability vectors.
///
/// Each vector must sum to 1 within 1e-6 and is renormalized first.
pub fn bhattacharyya_slices(p: &[f64], q: &[f64]) -> Result<f64, MetrologyError> {
    if p.len() != q.len() {
        return Err(MetrologyError::Mismatch(format!("{} vs {} outcomes", p.len(), q.len())));
    }
    let normalize = |v: &[f64]| -> Result<Vec<f64>, MetrologyError> {
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| x < -NEGATIVE_TOL || !x.is_finite()) {
            return Err(MetrologyError::NegativeProbability { index, value });
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MetrologyError::NotNormalized(total));
        }
        Ok(v.iter().map(|x| x.max(0.0) / total).collect())
    };
    let (p, q) = (normalize(p)?, normalize(q)?);
    let b: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(b.clamp(0.0, 1.0))
}

pub fn bhattacharyya(p: &ProbabilityDistribution, q: &ProbabilityDistribution) -> Result<f64, MetrologyError> {
    if p.basis != q.basis {
        return Err(MetrologyError::Mismatch("different Fock bases".into()));
    }
    bhattacharyya_slices(&p.probabilities, &q.probabilities)
}

/// `a·cos(kφ + c) + d` fitted with `k` fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub frequency: u32,
    /// In `(−π, π]`; 0 when the amplitude vanishes.
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

impl SinusoidFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.amplitude * (self.frequency as f64 * phi + self.phase).cos() + self.offset
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        let k = self.frequency as f64;
        -self.amplitude * k * (k * phi + self.phase).sin()
    }

    /// `a / d`.
    pub fn visibility(&self) -> Result<f64, MetrologyError> {
        self.visibility_with(VisibilityFormula::AmplitudeOverOffset)
    }

    pub fn visibility_with(&self, formula: VisibilityFormula) -> Result<f64, MetrologyError> {
        if self.offset <= 0.0 {
            return Err(MetrologyError::Degenerate(format!(
                "fringe offset {} is not positive",
                self.offset
            )));
        }
        Ok(match formula {
            VisibilityFormula::AmplitudeOverOffset => self.amplitude / self.offset,
            VisibilityFormula::PeakMinusOffset => (self.amplitude - self.offset) / self.offset,
        })
    }
}

/// Linear least-squares fit in the `{cos kφ, sin kφ, 1}` basis.
pub fn fit_sinusoid(curve: &PhaseCurve, k: u32) -> Result<SinusoidFit, MetrologyError> {
    if k == 0 {
        return Err(MetrologyError::Degenerate("frequency must be positive".into()));
    }
    if curve.len() < 4 {
        return Err(MetrologyError::Insufficient(format!(
            "{} points, need at least 4",
            curve.len()
        )));
    }
    let kf = k as f64;
    let span = curve.phis[curve.len() - 1] - curve.phis[0];
    let period = TAU / kf;
    if span < period * (1.0 - 1e-9) {
        return Err(MetrologyError::Insufficient(format!(
            "phase span {span:.6} is shorter than one period {period:.6}"
        )));
    }
    let cos: Vec<f64> = curve.phis.iter().map(|p| (kf * p).cos()).collect();
    let sin: Vec<f64> = curve.phis.iter().map(|p| (kf * p).sin()).collect();
    let one = vec![1.0; curve.len()];
    let beta = least_squares(&[cos, sin, one], &curve.values).map_err(|e| MetrologyError::Degenerate(e.to_string()))?;
    let (a_cos, a_sin, offset) = (beta[0], beta[1], beta[2]);
    let amplitude = a_cos.hypot(a_sin);
    let phase = if amplitude <= 1e-12 {
        0.0
    } else {
        wrap_pi((-a_sin).atan2(a_cos))
    };
    let mut fit = SinusoidFit {
        amplitude,
        frequency: k,
        phase,
        offset,
        residual_rms: 0.0,
    };
    let ss: f64 = curve
        .phis
        .iter()
        .zip(&curve.values)
        .map(|(&p, &y)| (fit.eval(p) - y).powi(2))
        .sum();
    fit.residual_rms = (ss / curve.len() as f64).sqrt();
    Ok(fit)
}

/// Which expression [`visibility_and_phase`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityFormula {
    /// `a / d`.
    #[default]
    AmplitudeOverOffset,
    /// `(a − d) / d`, as sometimes printed; near zero for high-contrast fringes.
    PeakMinusOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityPhase {
    pub visibility_s1: f64,
    pub visibility_s2: f64,
    /// `c₂ − c₁` in `(−π, π]`.
    pub relative_phase: f64,
}

pub fn visibility_and_phase(s1: &SinusoidFit, s2: &SinusoidFit) -> Result<VisibilityPhase, MetrologyError> {
    visibility_and_phase_with(s1, s2, VisibilityFormula::default())
}

pub fn visibility_and_phase_with(
    s1: &SinusoidFit,
    s2: &SinusoidFit,
    formula: VisibilityFormula,
) -> Result<VisibilityPhase, MetrologyError> {
    Ok(VisibilityPhase {
        visibility_s1: s1.visibility_with(formula)?,
        visibility_s2: s2.visibility_with(formula)?,
        relative_phase: wrap_pi(s2.phase - s1.phase),
    })
}

/// Shift in φ between two fringes of the same frequency, `(c_b − c_a)/k`,
/// with the phase difference reduced to `(−π, π]` first.
pub fn fringe_shift(a: &SinusoidFit, b: &SinusoidFit) -> Result<f64, MetrologyError> {
    if a.frequency != b.frequency {
        return Err(MetrologyError::Mismatch(format!(
            "frequencies {} and {} differ",
            a.frequency, b.frequency
        )));
    }
    Ok(wrap_pi(b.phase - a.phase) / a.frequency as f64)
}

/// `y = a − b·|x − x0|` with `b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangularFit {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub residual_rms: f64,
}

impl TriangularFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a - self.b * (x - self.x0).abs()
    }
}

// Closed-form (a, b) for a fixed apex, returning the fit and its squared error.
fn triangle_at(xs: &[f64], ys: &[f64], x0: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let u: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
    let mu = u.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|v| (v - mu).powi(2)).sum();
    let suy: f64 = u.iter().zip(ys).map(|(v, y)| (v - mu) * (y - my)).sum();
    let mut b = if suu > 0.0 { -suy / suu } else { 0.0 };
    if b < 0.0 {
        b = 0.0;
    }
    let a = my + b * mu;
    let sse = u.iter().zip(ys).map(|(v, y)| (a - b * v - y).powi(2)).sum();
    (a, b, sse)
}

/// Least-squares triangle: scan the apex over the data abscissae, then refine
/// by golden-section search between the neighbours of the best one.
pub fn fit_triangular(xs: &[f64], ys: &[f64]) -> Result<TriangularFit, MetrologyError> {
    if xs.len() != ys.len() {
        return Err(MetrologyError::Mismatch(format!(
            "{} x values for {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 5 {
        return Err(MetrologyError::Insufficient(format!(
            "{} points, need at least 5",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(MetrologyError::Grid("non-finite entry".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let sse = |x0: f64| triangle_at(xs, ys, x0).2;
    let (best, _) = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, sse(x)))
        .fold((0, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });

    let mut lo = sorted[best.saturating_sub(1)];
    let mut hi = sorted[(best + 1).min(sorted.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = sse(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = sse(d);
        }
    }
    let refined = 0.5 * (lo + hi);
    let mut x0 = if sse(refined) <= sse(sorted[best]) {
        refined
    } else {
        sorted[best]
    };
    let (mut a, mut b, mut err) = triangle_at(xs, ys, x0);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if b * span <= 1e-12 * scale {
        // a flat fit has no apex; pin it to the middle of the data
        x0 = 0.5 * (sorted[0] + sorted[sorted.len() - 1]);
        b = 0.0;
        a = ys.iter().sum::<f64>() / ys.len() as f64;
        err = ys.iter().map(|y| (y - a).powi(2)).sum();
    }
    Ok(TriangularFit {
        a,
        b,
        x0,
        residual_rms: (err / xs.len() as f64).sqrt(),
    })
}

/// Heralded second-order correlation `R_abh·R_h / (R_ah·R_bh)`.
pub fn heralded_g2(r_abh: f64, r_ah: f64, r_bh: f64, r_h: f64) -> Result<f64, MetrologyError> {
    if [r_abh, r_ah, r_bh, r_h].iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(MetrologyError::InvalidRate);
    }
    let denom = r_ah * r_bh;
    if denom <= 0.0 {
        return Err(MetrologyError::UndefinedG2);
    }
    Ok(r_abh * r_h / denom)
}
