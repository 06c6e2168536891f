//! Port-symmetric lossy beam splitters `S = [[t, r], [r, t]]`.
//!
//! Physical devices satisfy energy balance `|t|² + |r|² + |A|² = 1`, the
//! commutator-preserving phase relation `2|t||r|cos φ_rt = ±|A|²`, and hence
//! `|A|² ≤ 1/2`. The constructors here always use the minus branch of the
//! phase relation; the plus branch is reachable only through
//! [`LossyBeamSplitter::custom`].

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{wrap_2pi, ComplexMatrix};

/// Largest intrinsic absorption a port-symmetric lossy beam splitter admits.
pub const MAX_ABSORPTION: f64 = 0.5;
/// Tolerance used by [`LossyBeamSplitter::validate`].
pub const VALIDATION_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossyBsError {
    #[error(
        "absorption {0} outside [0, 0.5]: a port-symmetric lossy beam splitter obeys |A|^2 <= 2|t||r| <= 1 - |A|^2, so |A|^2 <= 0.5"
    )]
    Domain(f64),
    #[error("amplitudes must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamSplitterKind {
    /// Fixed internal phase `φ_rt = π`; `|r|/|t|` grows with absorption.
    Type1,
    /// Equal magnitudes `|t| = |r|`; `φ_rt` moves from π/2 to π.
    Type2,
    Custom,
}

impl fmt::Display for BeamSplitterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Type1 => "type1",
            Self::Type2 => "type2",
            Self::Custom => "custom",
        })
    }
}

/// Root of the Type 1 quadratic for `|t|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Type1Branch {
    /// `|t| → 1` as absorption → 0.
    #[default]
    Transmissive,
    /// Mirror root, `|r| → 1` as absorption → 0.
    Reflective,
}

/// Which physicality constraint a device breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// `2|t||r|cos φ_rt = −|A|²` does not hold.
    PhaseRelation,
    /// `|t|² + |r|² + |A|² = 1` does not hold.
    EnergyConservation,
    /// `|A|² > 1/2` (or negative).
    AbsorptionBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossyBeamSplitter {
    pub t: Complex64,
    pub r: Complex64,
    /// Intrinsic absorption coefficient `|A|²`.
    pub absorption: f64,
    /// `arg(r) − arg(t)` in `[0, 2π)`.
    pub internal_phase: f64,
    pub kind: BeamSplitterKind,
}

fn check_absorption(alpha: f64) -> Result<(), LossyBsError> {
    if alpha.is_finite() && (0.0..=MAX_ABSORPTION).contains(&alpha) {
        Ok(())
    } else {
        Err(LossyBsError::Domain(alpha))
    }
}

impl LossyBeamSplitter {
    /// Type 1 device (`φ_rt = π`) on the branch with `|t| → 1` for vanishing loss.
    pub fn solve_type1(absorption: f64) -> Result<Self, LossyBsError> {
        Self::solve_type1_branch(absorption, Type1Branch::Transmissive)
    }

    pub fn solve_type1_branch(absorption: f64, branch: Type1Branch) -> Result<Self, LossyBsError> {
        check_absorption(absorption)?;
        // 4x(1 − α − x) = α² with x = |t|²
        let disc = (1.0 - 2.0 * absorption).max(0.0).sqrt();
        let x = match branch {
            Type1Branch::Transmissive => (1.0 - absorption + disc) / 2.0,
            Type1Branch::Reflective => (1.0 - absorption - disc) / 2.0,
        };
        let t_mag = x.sqrt();
        let r_mag = (1.0 - absorption - x).max(0.0).sqrt();
        Ok(Self {
            t: Complex64::new(t_mag, 0.0),
            r: Complex64::new(-r_mag, 0.0),
            absorption,
            internal_phase: PI,
            kind: BeamSplitterKind::Type1,
        })
    }

    /// Type 2 device (`|t| = |r|`), internal phase `arccos(−α/(1−α))`.
    pub fn solve_type2(absorption: f64) -> Result<Self, LossyBsError> {
        check_absorption(absorption)?;
        let mag = ((1.0 - absorption) / 2.0).sqrt();
        let phase = (-absorption / (1.0 - absorption)).clamp(-1.0, 1.0).acos();
        Ok(Self {
            t: Complex64::new(mag, 0.0),
            r: Complex64::from_polar(mag, phase),
            absorption,
            internal_phase: phase,
            kind: BeamSplitterKind::Type2,
        })
    }

    pub fn solve(kind: BeamSplitterKind, absorption: f64) -> Result<Self, LossyBsError> {
        match kind {
            BeamSplitterKind::Type1 => Self::solve_type1(absorption),
            BeamSplitterKind::Type2 => Self::solve_type2(absorption),
            BeamSplitterKind::Custom => Err(LossyBsError::Domain(absorption)),
        }
    }

    /// Arbitrary amplitudes. Absorption is inferred from energy balance and
    /// may violate the physical constraints; see [`Self::validate`].
    pub fn custom(t: Complex64, r: Complex64) -> Result<Self, LossyBsError> {
        if ![t.re, t.im, r.re, r.im].iter().all(|x| x.is_finite()) {
            return Err(LossyBsError::NonFinite);
        }
        Ok(Self {
            t,
            r,
            absorption: 1.0 - t.norm_sqr() - r.norm_sqr(),
            internal_phase: wrap_2pi(r.arg() - t.arg()),
            kind: BeamSplitterKind::Custom,
        })
    }

    /// The 2×2 scattering matrix.
    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_rows(&[[self.t, self.r], [self.r, self.t]])
    }

    /// Constraints broken beyond [`VALIDATION_TOL`]; empty for a physical device.
    pub fn validate(&self) -> Vec<Violation> {
        let (tm, rm) = (self.t.norm(), self.r.norm());
        let mut out = Vec::new();
        if (2.0 * tm * rm * self.internal_phase.cos() + self.absorption).abs() > VALIDATION_TOL {
            out.push(Violation::PhaseRelation);
        }
        if (tm * tm + rm * rm + self.absorption - 1.0).abs() > VALIDATION_TOL {
            out.push(Violation::EnergyConservation);
        }
        if self.absorption > MAX_ABSORPTION + VALIDATION_TOL || self.absorption < -VALIDATION_TOL {
            out.push(Violation::AbsorptionBound);
        }
        out
    }

    /// Probability that the input `(e^{iφ}|10⟩ − |01⟩)/√2` is absorbed.
    pub fn absorbed_intensity(&self, phi: f64) -> f64 {
        let e = Complex64::from_polar(1.0, phi);
        1.0 - 0.5 * (self.t * e - self.r).norm_sqr() - 0.5 * (self.r * e - self.t).norm_sqr()
    }

    /// Singular values of `S`, i.e. `(|t − r|, |t + r|)` sorted nonincreasing.
    pub fn singular_value_pair(&self) -> (f64, f64) {
        let a = (self.t - self.r).norm();
        let b = (self.t + self.r).norm();
        if a >= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}
