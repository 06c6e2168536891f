//! Quasi-unitary dilation of a lossy (sub-unitary) transformation.
//!
//! `M = U·Σ·W` is embedded as `S_total = S_U · S_D · S_W` on the signal modes
//! plus one ancilla per lossy singular mode. `S_D` couples singular mode `i`
//! to its ancilla with the real block `[[σ, √(1−σ²)], [√(1−σ²), −σ]]`, so the
//! signal block of `S_total` is exactly `M`.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{svd, ComplexMatrix, NumericsError};

/// A singular value below `1 − LOSSY_THRESHOLD` gets an ancilla.
pub const LOSSY_THRESHOLD: f64 = 1e-9;
const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilationError {
    #[error("singular value {0} exceeds 1: gain would need parametric amplification, which is not supported")]
    GainUnsupported(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone)]
pub struct DilatedUnitary {
    /// Unitary on `signal_modes.len() + ancilla_modes.len()` modes.
    pub matrix: ComplexMatrix,
    pub signal_modes: Vec<usize>,
    /// Ancilla inputs are vacuum by convention.
    pub ancilla_modes: Vec<usize>,
    /// The transformation being emulated.
    pub source: ComplexMatrix,
    /// Singular values of `source`, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl DilatedUnitary {
    pub fn n_modes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn signal_block(&self) -> ComplexMatrix {
        self.matrix.select(&self.signal_modes, &self.signal_modes)
    }

    /// Largest deviation of the signal block from `source`.
    pub fn embedding_error(&self) -> f64 {
        self.signal_block().max_abs_diff(&self.source)
    }

    /// Pads with vacuum ancillas (identity blocks) until the unitary acts on `n` modes.
    pub fn padded_to(&self, n: usize) -> Self {
        let current = self.n_modes();
        if n <= current {
            return self.clone();
        }
        let mut matrix = ComplexMatrix::identity(n);
        for i in 0..current {
            for j in 0..current {
                matrix[(i, j)] = self.matrix[(i, j)];
            }
        }
        let mut ancilla_modes = self.ancilla_modes.clone();
        ancilla_modes.extend(current..n);
        Self {
            matrix,
            signal_modes: self.signal_modes.clone(),
            ancilla_modes,
            source: self.source.clone(),
            singular_values: self.singular_values.clone(),
        }
    }
}

/// Dilates `m` with one ancilla per singular value below `1 − LOSSY_THRESHOLD`.
///
/// Ancillas are appended after the signal modes in singular-value order.
pub fn dilate(m: &ComplexMatrix) -> Result<DilatedUnitary, DilationError> {
    dilate_with(m, |sigma| sigma < 1.0 - LOSSY_THRESHOLD)
}

/// Dilates `m` with one ancilla for every signal mode, lossy or not.
///
/// Lossless singular modes get an ancilla that is decoupled from everything;
/// [`reduce_ancillas`] strips those again.
pub fn dilate_every_mode(m: &ComplexMatrix) -> Result<DilatedUnitary, DilationError> {
    dilate_with(m, |_| true)
}

fn dilate_with(m: &ComplexMatrix, needs_ancilla: impl Fn(f64) -> bool) -> Result<DilatedUnitary, DilationError> {
    let dec = svd(m)?;
    if let Some(&s) = dec.singular_values.first() {
        if s > 1.0 + GAIN_TOL {
            return Err(DilationError::GainUnsupported(s));
        }
    }
    let size = m.rows();
    let lossy: Vec<usize> = (0..size).filter(|&i| needs_ancilla(dec.singular_values[i])).collect();
    let n = size + lossy.len();

    let mut s_d = ComplexMatrix::identity(n);
    for (k, &i) in lossy.iter().enumerate() {
        let mut sigma = dec.singular_values[i].min(1.0);
        if 1.0 - sigma < GAIN_TOL {
            // rounding residue; √(1−σ²) would otherwise amplify it to ~1e-8
            sigma = 1.0;
        }
        let leak = (1.0 - sigma * sigma).max(0.0).sqrt();
        let a = size + k;
        s_d[(i, i)] = Complex64::new(sigma, 0.0);
        s_d[(i, a)] = Complex64::new(leak, 0.0);
        s_d[(a, i)] = Complex64::new(leak, 0.0);
        s_d[(a, a)] = Complex64::new(-sigma, 0.0);
    }
    let s_u = dec.left.embed(n, 0);
    let s_w = dec.right_conjugate.embed(n, 0);
    let matrix = &(&s_u * &s_d) * &s_w;

    Ok(DilatedUnitary {
        matrix,
        signal_modes: (0..size).collect(),
        ancilla_modes: (size..n).collect(),
        source: m.clone(),
        singular_values: dec.singular_values,
    })
}

/// Drops every ancilla that is decoupled from all other modes.
///
/// An ancilla qualifies when all off-diagonal entries of its row and column
/// are below `tol` and its diagonal entry has modulus in `[1 − tol, 1]`.
pub fn reduce_ancillas(d: &DilatedUnitary, tol: f64) -> DilatedUnitary {
    let n = d.n_modes();
    let decoupled = |a: usize| {
        (0..n).all(|k| k == a || (d.matrix[(a, k)].norm() < tol && d.matrix[(k, a)].norm() < tol))
            && d.matrix[(a, a)].norm() >= 1.0 - tol
    };
    let keep: Vec<usize> = (0..n)
        .filter(|&k| !d.ancilla_modes.contains(&k) || !decoupled(k))
        .collect();
    if keep.len() == n {
        return d.clone();
    }
    let remap = |mode: usize| keep.iter().position(|&k| k == mode);
    DilatedUnitary {
        matrix: d.matrix.select(&keep, &keep),
        signal_modes: d.signal_modes.iter().filter_map(|&s| remap(s)).collect(),
        ancilla_modes: d.ancilla_modes.iter().filter_map(|&a| remap(a)).collect(),
        source: d.source.clone(),
        singular_values: d.singular_values.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lossybs::LossyBeamSplitter;
    use crate::numerics::is_unitary;

    #[test]
    fn identity_needs_no_ancilla() {
        let d = dilate(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(d.n_modes(), 2);
        assert!(d.ancilla_modes.is_empty());
        let r = reduce_ancillas(&d, 1e-9);
        assert_eq!(r.matrix, d.matrix);
    }

    #[test]
    fn full_absorber_swaps_dark_mode_into_ancilla() {
        let bs = LossyBeamSplitter::solve_type1(0.5).unwrap();
        let d = dilate(&bs.matrix()).unwrap();
        assert_eq!(d.n_modes(), 3);
        assert_eq!(d.ancilla_modes, vec![2]);
        assert!((d.singular_values[0] - 1.0).abs() < 1e-12);
        assert!(d.singular_values[1].abs() < 1e-12);
        assert!(is_unitary(&d.matrix, 1e-12));
        assert!(d.embedding_error() < 1e-12);
        // unit coupling: the ancilla output carries no ancilla input
        assert!(d.matrix[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn partial_absorber_coupling() {
        let bs = LossyBeamSplitter::solve_type1(0.3).unwrap();
        let d = dilate(&bs.matrix()).unwrap();
        assert_eq!(d.n_modes(), 3);
        assert!((d.singular_values[1] - 0.4f64.sqrt()).abs() < 1e-12);
        // the ancilla column has norm √(1−σ²)=√(2α) on the signal outputs
        let leak: f64 = (0..2).map(|i| d.matrix[(i, 2)].norm_sqr()).sum::<f64>().sqrt();
        assert!((leak - 0.6f64.sqrt()).abs() < 1e-12);
        assert!(d.embedding_error() < 1e-12);
    }

    #[test]
    fn tiny_loss_still_dilates() {
        let bs = LossyBeamSplitter::solve_type2(1e-8).unwrap();
        let d = dilate(&bs.matrix()).unwrap();
        assert_eq!(d.ancilla_modes.len(), 1);
        assert!(d.embedding_error() < 1e-12);
    }

    #[test]
    fn gain_is_rejected() {
        let m = ComplexMatrix::from_real_rows(&[[1.2, 0.0], [0.0, 0.5]]);
        assert!(matches!(dilate(&m), Err(DilationError::GainUnsupported(_))));
    }

    #[test]
    fn redundant_ancilla_is_removed() {
        for bs in [
            LossyBeamSplitter::solve_type1(0.3).unwrap(),
            LossyBeamSplitter::solve_type2(0.25).unwrap(),
        ] {
            let full = dilate_every_mode(&bs.matrix()).unwrap();
            assert_eq!(full.ancilla_modes.len(), 2);
            let reduced = reduce_ancillas(&full, 1e-9);
            assert_eq!(reduced.ancilla_modes, vec![2]);
            assert!(is_unitary(&reduced.matrix, 1e-12));
            assert!(reduced.embedding_error() < 1e-12);
        }
    }

    #[test]
    fn type2_quarter_absorption_has_single_ancilla() {
        let bs = LossyBeamSplitter::solve_type2(0.25).unwrap();
        let d = reduce_ancillas(&dilate(&bs.matrix()).unwrap(), 1e-9);
        assert_eq!(d.ancilla_modes.len(), 1);
        assert!((d.singular_values[1] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn padding_keeps_unitarity() {
        let d = dilate(&ComplexMatrix::identity(2)).unwrap().padded_to(3);
        assert_eq!(d.ancilla_modes, vec![2]);
        assert!(is_unitary(&d.matrix, 1e-15));
    }
}
