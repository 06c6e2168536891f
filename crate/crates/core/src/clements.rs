//! Rectangular Mach-Zehnder mesh compilation.
//!
//! Each MZI on adjacent modes `(m, m+1)` has the transfer matrix
//!
//! ```text
//! T(θ, φ) = e^{i(θ/2 + π/2)} · [[e^{iφ} sin(θ/2),  cos(θ/2)],
//!                               [e^{iφ} cos(θ/2), −sin(θ/2)]]
//! ```
//!
//! so `θ = π` is the bar state and `θ = 0` the cross state. [`decompose`]
//! nulls the unitary along alternating anti-diagonals, multiplying by `T⁻¹`
//! from the right on even diagonals and by `T` from the left on odd ones, and
//! then commutes the left factors through the residual diagonal so that every
//! leftover phase ends up on the output side:
//!
//! ```text
//! U = diag(e^{iδ}) · T_K ⋯ T_2 · T_1
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lossybs::LossyBeamSplitter;
use crate::numerics::{arg_or_zero, wrap_2pi, wrap_pi, ComplexMatrix};

/// Largest mesh [`decompose`] accepts.
pub const MAX_MODES: usize = 16;
/// Unitarity required of [`decompose`] input.
pub const UNITARITY_TOL: f64 = 1e-10;
// Both entries of a nulling pair below this count as already null.
const NULL_PAIR_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClementsError {
    #[error("input is not unitary (max |U†U − I| = {0:.3e})")]
    NotUnitary(f64),
    #[error("mesh size {0} outside 1..={MAX_MODES}")]
    BadSize(usize),
    #[error("invalid mesh: {0}")]
    InvalidProgram(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziSetting {
    /// Mesh column, counted from the input side.
    pub layer: usize,
    /// Adjacent modes `[m, m + 1]`.
    pub modes: [usize; 2],
    /// Internal phase in `[0, 2π)`.
    pub theta: f64,
    /// External phase in `[0, 2π)`.
    pub phi: f64,
}

/// A compiled mesh: MZIs in the order light meets them, then output phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshProgram {
    pub n_modes: usize,
    pub mzis: Vec<MziSetting>,
    pub output_phases: Vec<f64>,
}

impl MeshProgram {
    pub fn validate(&self) -> Result<(), ClementsError> {
        if self.output_phases.len() != self.n_modes {
            return Err(ClementsError::InvalidProgram(format!(
                "{} output phases for {} modes",
                self.output_phases.len(),
                self.n_modes
            )));
        }
        for (k, mzi) in self.mzis.iter().enumerate() {
            let [a, b] = mzi.modes;
            if b != a + 1 || b >= self.n_modes {
                return Err(ClementsError::InvalidProgram(format!(
                    "mzi {k} acts on non-adjacent or out-of-range modes {a}, {b}"
                )));
            }
            if !(mzi.theta.is_finite() && mzi.phi.is_finite()) {
                return Err(ClementsError::InvalidProgram(format!("mzi {k} has a non-finite phase")));
            }
        }
        Ok(())
    }

    /// Number of mesh columns.
    pub fn depth(&self) -> usize {
        self.mzis.iter().map(|m| m.layer + 1).max().unwrap_or(0)
    }
}

/// The 2×2 MZI transfer matrix.
pub fn mzi_matrix(theta: f64, phi: f64) -> ComplexMatrix {
    let g = Complex64::from_polar(1.0, theta / 2.0 + FRAC_PI_2);
    let e = Complex64::from_polar(1.0, phi);
    let (s, c) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_rows(&[[g * e * s, g * c], [g * e * c, -g * s]])
}

/// Multiplies every column of `w` on rows `m, m+1` by `T(θ, φ)` from the left.
fn apply_left(w: &mut ComplexMatrix, m: usize, theta: f64, phi: f64) {
    let t = mzi_matrix(theta, phi);
    for j in 0..w.cols() {
        let (a, b) = (w[(m, j)], w[(m + 1, j)]);
        w[(m, j)] = t[(0, 0)] * a + t[(0, 1)] * b;
        w[(m + 1, j)] = t[(1, 0)] * a + t[(1, 1)] * b;
    }
}

/// Multiplies `w` on columns `m, m+1` by `T(θ, φ)†` from the right.
fn apply_right_inverse(w: &mut ComplexMatrix, m: usize, theta: f64, phi: f64) {
    let t = mzi_matrix(theta, phi).adjoint();
    for i in 0..w.rows() {
        let (a, b) = (w[(i, m)], w[(i, m + 1)]);
        w[(i, m)] = a * t[(0, 0)] + b * t[(1, 0)];
        w[(i, m + 1)] = a * t[(0, 1)] + b * t[(1, 1)];
    }
}

/// Phases nulling `(U·T⁻¹)[row, m]` given `first = U[row, m]`, `second = U[row, m+1]`.
fn right_null(first: Complex64, second: Complex64) -> (f64, f64) {
    if first.norm() < NULL_PAIR_TOL && second.norm() < NULL_PAIR_TOL {
        // Any setting works; use the balanced splitter.
        return (FRAC_PI_2, PI);
    }
    let theta = 2.0 * second.norm().atan2(first.norm());
    let phi = arg_or_zero(first) - arg_or_zero(second) + PI;
    (theta, phi)
}

/// Phases nulling `(T·U)[m+1, col]` given `upper = U[m, col]`, `lower = U[m+1, col]`.
fn left_null(upper: Complex64, lower: Complex64) -> (f64, f64) {
    if upper.norm() < NULL_PAIR_TOL && lower.norm() < NULL_PAIR_TOL {
        return (FRAC_PI_2, PI);
    }
    let theta = 2.0 * upper.norm().atan2(lower.norm());
    let phi = arg_or_zero(lower) - arg_or_zero(upper);
    (theta, phi)
}

/// Compiles a unitary into a rectangular mesh of `N(N−1)/2` MZIs.
pub fn decompose(u: &ComplexMatrix) -> Result<MeshProgram, ClementsError> {
    let n = u.rows();
    if !u.is_square() || n == 0 || n > MAX_MODES {
        return Err(ClementsError::BadSize(n.max(u.cols())));
    }
    let residual = u.unitarity_residual().unwrap_or(f64::INFINITY);
    if residual >= UNITARITY_TOL {
        return Err(ClementsError::NotUnitary(residual));
    }

    let mut w = u.clone();
    // (mode, θ, φ) triples in the order they were applied
    let mut from_right = Vec::new();
    let mut from_left = Vec::new();
    for i in 0..n.saturating_sub(1) {
        if i % 2 == 0 {
            for j in 0..=i {
                let row = n - 1 - j;
                let m = i - j;
                let (theta, phi) = right_null(w[(row, m)], w[(row, m + 1)]);
                apply_right_inverse(&mut w, m, theta, phi);
                w[(row, m)] = Complex64::new(0.0, 0.0);
                from_right.push((m, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let row = n + j - i - 2;
                let col = j - 1;
                let m = row - 1;
                let (theta, phi) = left_null(w[(m, col)], w[(row, col)]);
                apply_left(&mut w, m, theta, phi);
                w[(row, col)] = Complex64::new(0.0, 0.0);
                from_left.push((m, theta, phi));
            }
        }
    }

    // U = L_1⁻¹ ⋯ L_k⁻¹ · D · R; rewrite T⁻¹·D as D'·T' starting from L_k.
    let mut d = w.diagonal();
    let mut commuted = Vec::with_capacity(from_left.len());
    for &(m, theta, phi) in from_left.iter().rev() {
        let g2_conj = Complex64::from_polar(1.0, -(theta + PI));
        let (d1, d2) = (d[m], d[m + 1]);
        let new_phi = arg_or_zero(d1) - arg_or_zero(d2);
        d[m] = g2_conj * Complex64::from_polar(1.0, -phi) * d2;
        d[m + 1] = g2_conj * d2;
        commuted.push((m, theta, new_phi));
    }

    let mut depth = vec![0usize; n];
    let mzis = from_right
        .into_iter()
        .chain(commuted)
        .map(|(m, theta, phi)| {
            let layer = depth[m].max(depth[m + 1]);
            depth[m] = layer + 1;
            depth[m + 1] = layer + 1;
            MziSetting {
                layer,
                modes: [m, m + 1],
                theta: wrap_2pi(theta),
                phi: wrap_2pi(phi),
            }
        })
        .collect();
    Ok(MeshProgram {
        n_modes: n,
        mzis,
        output_phases: d.iter().map(|&z| wrap_2pi(arg_or_zero(z))).collect(),
    })
}

/// Evaluates a mesh back into its unitary.
pub fn reconstruct(p: &MeshProgram) -> ComplexMatrix {
    let mut u = ComplexMatrix::identity(p.n_modes);
    for mzi in &p.mzis {
        apply_left(&mut u, mzi.modes[0], mzi.theta, mzi.phi);
    }
    for (i, &delta) in p.output_phases.iter().enumerate() {
        let e = Complex64::from_polar(1.0, delta);
        for j in 0..p.n_modes {
            u[(i, j)] *= e;
        }
    }
    u
}

/// Closed-form MZI₂ internal phase and MZI₃ − MZI₂ external phase difference
/// for the three-mode coherent-absorption circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpaPhases {
    pub theta2: f64,
    /// `φ₃ − φ₂` reduced to `[0, 2π)`.
    pub phi3_minus_phi2: f64,
}

/// Sign of the `arg((t+r)/(t−r))` term in `φ₃ − φ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpaSign {
    /// `φ₃ − φ₂ = −arg((t+r)/(t−r)) + θ₂/2 + π/2`, which follows from
    /// `t + r ∝ B` and `t − r ∝ e^{iφ₃}` and is what [`decompose`] produces.
    #[default]
    Derived,
    /// The same relation with `+arg(…)`, as commonly printed. Identical to
    /// `Derived` whenever `sin φ_rt = 0` (Type 1); off by `2·arg(…)` otherwise.
    Printed,
}

pub fn cpa_phases(bs: &LossyBeamSplitter) -> CpaPhases {
    cpa_phases_with(bs, CpaSign::Derived)
}

pub fn cpa_phases_with(bs: &LossyBeamSplitter, sign: CpaSign) -> CpaPhases {
    let theta2 = 2.0 * (2.0 * bs.absorption).clamp(0.0, 1.0).sqrt().acos();
    let (tm, rm) = (bs.t.norm(), bs.r.norm());
    let sin = bs.internal_phase.sin();
    // arg((t+r)/(t−r)), with arg(0) = 0 when t + r vanishes
    let ratio_arg = if (bs.t + bs.r).norm() < 1e-14 {
        0.0
    } else {
        (2.0 * tm * rm * sin).atan2(tm * tm - rm * rm)
    };
    let ratio_term = match sign {
        CpaSign::Derived => -ratio_arg,
        CpaSign::Printed => ratio_arg,
    };
    CpaPhases {
        theta2,
        phi3_minus_phi2: wrap_2pi(ratio_term + theta2 / 2.0 + FRAC_PI_2),
    }
}

/// The three MZIs of a compiled coherent-absorption mesh, in light order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpaMesh {
    /// Balanced splitter on the two signal modes.
    pub mzi1: MziSetting,
    /// Routes part of signal mode 2 into the ancilla; sets the absorption.
    pub mzi2: MziSetting,
    /// Recombines the signal modes.
    pub mzi3: MziSetting,
}

impl CpaMesh {
    pub fn from_program(p: &MeshProgram) -> Option<Self> {
        match p.mzis.as_slice() {
            [a, b, c] if p.n_modes == 3 && a.modes == [0, 1] && b.modes == [1, 2] && c.modes == [0, 1] => Some(Self {
                mzi1: *a,
                mzi2: *b,
                mzi3: *c,
            }),
            _ => None,
        }
    }

    pub fn phi3_minus_phi2(&self) -> f64 {
        wrap_2pi(self.mzi3.phi - self.mzi2.phi)
    }
}

/// `δ₂ − δ₁` of the first two output phases, reduced to `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputPhaseRelation {
    pub difference: f64,
    /// Whether `|δ₂ − δ₁| = π` within 1e-8.
    pub antiphase: bool,
}

pub fn output_phase_relation(p: &MeshProgram) -> Option<OutputPhaseRelation> {
    let (d1, d2) = (*p.output_phases.first()?, *p.output_phases.get(1)?);
    let difference = wrap_pi(d2 - d1);
    Some(OutputPhaseRelation {
        difference,
        antiphase: (difference.abs() - PI).abs() < 1e-8,
    })
}

/// Smallest distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}
