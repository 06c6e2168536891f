//! Multi-photon Fock-space evolution via the permanent rule.
//!
//! Basis states are occupation tuples in lexicographically decreasing order,
//! so the two-photon three-mode basis is
//! `200, 110, 101, 020, 011, 002`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{permanent, ComplexMatrix, NumericsError};

/// Largest basis [`enumerate_basis`] builds.
pub const MAX_BASIS_SIZE: usize = 10_000;
/// Unitarity required of mode-space matrices.
pub const UNITARITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("{n_photons} photons in {n_modes} modes needs more than {MAX_BASIS_SIZE} basis states")]
    Capacity { n_modes: usize, n_photons: usize },
    #[error("a Fock basis needs at least one mode")]
    NoModes,
    #[error("mode matrix is not unitary (max |U†U − I| = {0:.3e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error("state norm² {0} is not 1")]
    NotNormalized(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    n_modes: usize,
    n_photons: usize,
    states: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.states.iter().position(|s| s == occupation)
    }

    /// Occupation string such as `"101"`; `_`-separated if any count exceeds 9.
    pub fn label(&self, i: usize) -> String {
        occupation_label(&self.states[i])
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

pub fn occupation_label(occupation: &[usize]) -> String {
    let parts: Vec<String> = occupation.iter().map(|n| n.to_string()).collect();
    if occupation.iter().all(|&n| n < 10) {
        parts.concat()
    } else {
        parts.join("_")
    }
}

/// Number of ways to put `n_photons` into `n_modes`, or `None` past `u128`.
pub fn basis_size(n_modes: usize, n_photons: usize) -> Option<u128> {
    if n_modes == 0 {
        return Some(u128::from(n_photons == 0));
    }
    // C(n_photons + n_modes − 1, n_modes − 1), built up incrementally
    let k = (n_modes - 1).min(n_photons) as u128;
    let n = (n_photons + n_modes - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

pub fn enumerate_basis(n_modes: usize, n_photons: usize) -> Result<FockBasis, FockError> {
    if n_modes == 0 {
        return Err(FockError::NoModes);
    }
    match basis_size(n_modes, n_photons) {
        Some(size) if size <= MAX_BASIS_SIZE as u128 => {}
        _ => return Err(FockError::Capacity { n_modes, n_photons }),
    }
    fn fill(remaining: usize, prefix: &mut Vec<usize>, n_modes: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n_modes - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            fill(remaining - k, prefix, n_modes, out);
            prefix.pop();
        }
    }
    let mut states = Vec::new();
    fill(n_photons, &mut Vec::with_capacity(n_modes), n_modes, &mut states);
    Ok(FockBasis {
        n_modes,
        n_photons,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Checks the amplitude count and that the norm is 1 within 1e-12.
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        if amplitudes.len() != basis.len() {
            return Err(FockError::Mismatch(format!(
                "{} amplitudes for a basis of {}",
                amplitudes.len(),
                basis.len()
            )));
        }
        let s = Self { basis, amplitudes };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(FockError::NotNormalized(n));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn n_photons(&self) -> usize {
        self.basis.n_photons()
    }

    pub fn amplitude(&self, occupation: &[usize]) -> Option<Complex64> {
        self.basis.index_of(occupation).map(|i| self.amplitudes[i])
    }

    pub fn probabilities(&self) -> ProbabilityDistribution {
        ProbabilityDistribution {
            basis: Arc::clone(&self.basis),
            probabilities: self.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    pub basis: Arc<FockBasis>,
    pub probabilities: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn get(&self, occupation: &[usize]) -> Option<f64> {
        self.basis.index_of(occupation).map(|i| self.probabilities[i])
    }

    pub fn labels(&self) -> Vec<String> {
        self.basis.labels()
    }
}

impl fmt::Display for ProbabilityDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.probabilities.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}:{p:.6}", self.basis.label(i))?;
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A mode-space unitary lifted to the fixed-photon-number Fock space.
#[derive(Debug, Clone)]
pub struct FockPropagator {
    pub basis: Arc<FockBasis>,
    pub matrix: ComplexMatrix,
}

impl FockPropagator {
    pub fn new(u: &ComplexMatrix, n_photons: usize) -> Result<Self, FockError> {
        let residual = u
            .unitarity_residual()
            .ok_or_else(|| FockError::Mismatch(format!("{}x{} mode matrix is not square", u.rows(), u.cols())))?;
        if residual > UNITARITY_TOL {
            return Err(FockError::NotUnitary(residual));
        }
        let basis = Arc::new(enumerate_basis(u.rows(), n_photons)?);
        let dim = basis.len();
        // expand each occupation tuple into the list of mode indices it repeats
        let expanded: Vec<Vec<usize>> = basis
            .states()
            .iter()
            .map(|s| {
                s.iter()
                    .enumerate()
                    .flat_map(|(mode, &k)| std::iter::repeat_n(mode, k))
                    .collect()
            })
            .collect();
        let norms: Vec<f64> = basis
            .states()
            .iter()
            .map(|s| s.iter().map(|&k| factorial(k)).product::<f64>().sqrt())
            .collect();
        let mut matrix = ComplexMatrix::zeros(dim, dim);
        for out in 0..dim {
            for inp in 0..dim {
                let sub = u.select(&expanded[out], &expanded[inp]);
                matrix[(out, inp)] = permanent(&sub)? / (norms[out] * norms[inp]);
            }
        }
        Ok(Self { basis, matrix })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector, FockError> {
        if *state.basis != *self.basis {
            return Err(FockError::Mismatch(format!(
                "state has {} photons in {} modes, propagator {} in {}",
                state.n_photons(),
                state.n_modes(),
                self.basis.n_photons(),
                self.basis.n_modes()
            )));
        }
        let amplitudes = self.matrix.mul_vec(&state.amplitudes)?;
        Ok(StateVector {
            basis: Arc::clone(&self.basis),
            amplitudes,
        })
    }

    pub fn probabilities(&self, state: &StateVector) -> Result<ProbabilityDistribution, FockError> {
        Ok(self.apply(state)?.probabilities())
    }
}

/// The Fock-space matrix `⟨n|Φ(u)|m⟩ = per(u[n|m]) / √(Π nᵢ! Π mⱼ!)`.
pub fn photon_unitary(u: &ComplexMatrix, n_photons: usize) -> Result<ComplexMatrix, FockError> {
    Ok(FockPropagator::new(u, n_photons)?.matrix)
}

pub fn output_probabilities(u: &ComplexMatrix, state: &StateVector) -> Result<ProbabilityDistribution, FockError> {
    if u.rows() != state.n_modes() {
        return Err(FockError::Mismatch(format!(
            "{}-mode matrix applied to a {}-mode state",
            u.rows(),
            state.n_modes()
        )));
    }
    FockPropagator::new(u, state.n_photons())?.probabilities(state)
}

/// `(e^{iφ}|1,0⟩ − |0,1⟩)/√2` on the first two modes, vacuum elsewhere.
pub fn prepare_single_photon_in(n_modes: usize, phi: f64) -> Result<StateVector, FockError> {
    if n_modes < 2 {
        return Err(FockError::Mismatch(format!(
            "single-photon input needs 2 modes, got {n_modes}"
        )));
    }
    let basis = Arc::new(enumerate_basis(n_modes, 1)?);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
    amplitudes[0] = Complex64::from_polar(FRAC_1_SQRT_2, phi);
    amplitudes[1] = Complex64::new(-FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { basis, amplitudes })
}

/// Single-photon input on two signal modes plus one vacuum ancilla.
pub fn prepare_single_photon(phi: f64) -> StateVector {
    prepare_single_photon_in(3, phi).expect("three modes")
}

/// `(e^{2iφ}|2,0⟩ − |0,2⟩)/√2` on the first two modes, vacuum elsewhere.
pub fn prepare_noon_in(n_modes: usize, phi: f64) -> Result<StateVector, FockError> {
    if n_modes < 2 {
        return Err(FockError::Mismatch(format!("NOON input needs 2 modes, got {n_modes}")));
    }
    let basis = Arc::new(enumerate_basis(n_modes, 2)?);
    let mut first = vec![0; n_modes];
    first[0] = 2;
    let mut second = vec![0; n_modes];
    second[1] = 2;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.len()];
    amplitudes[basis.index_of(&first).expect("in basis")] = Complex64::from_polar(FRAC_1_SQRT_2, 2.0 * phi);
    amplitudes[basis.index_of(&second).expect("in basis")] = Complex64::new(-FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { basis, amplitudes })
}

/// Two-photon NOON input on two signal modes plus one vacuum ancilla.
pub fn prepare_noon(phi: f64) -> StateVector {
    prepare_noon_in(3, phi).expect("three modes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::dilate;
    use crate::lossybs::{BeamSplitterKind, LossyBeamSplitter};
    use crate::numerics::{is_unitary, random_unitary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn dilated(kind: BeamSplitterKind, alpha: f64) -> ComplexMatrix {
        let bs = LossyBeamSplitter::solve(kind, alpha).unwrap();
        dilate(&bs.matrix()).unwrap().padded_to(3).matrix
    }

    #[test]
    fn basis_examples() {
        let b = enumerate_basis(3, 2).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(b.states(), expected.as_slice());
        assert_eq!(b.labels(), ["200", "110", "101", "020", "011", "002"]);
        assert_eq!(enumerate_basis(2, 1).unwrap().states(), &[vec![1, 0], vec![0, 1]]);
        assert_eq!(enumerate_basis(3, 0).unwrap().states(), &[vec![0, 0, 0]]);
    }

    #[test]
    fn basis_capacity() {
        assert_eq!(basis_size(16, 4), Some(3876));
        assert!(enumerate_basis(16, 4).is_ok());
        assert!(matches!(enumerate_basis(20, 10), Err(FockError::Capacity { .. })));
        assert!(matches!(enumerate_basis(0, 1), Err(FockError::NoModes)));
    }

    #[test]
    fn hong_ou_mandel() {
        let h = ComplexMatrix::from_real_rows(&[[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]]);
        let basis = Arc::new(enumerate_basis(2, 2).unwrap());
        let mut amps = vec![Complex64::new(0.0, 0.0); 3];
        amps[basis.index_of(&[1, 1]).unwrap()] = Complex64::new(1.0, 0.0);
        let state = StateVector::new(basis, amps).unwrap();
        let p = output_probabilities(&h, &state).unwrap();
        assert!((p.get(&[2, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((p.get(&[0, 2]).unwrap() - 0.5).abs() < 1e-15);
        assert!(p.get(&[1, 1]).unwrap() < 1e-30);
    }

    #[test]
    fn identity_lifts_to_identity() {
        let phi = photon_unitary(&ComplexMatrix::identity(3), 2).unwrap();
        assert!(phi.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-15);
    }

    #[test]
    fn lifted_unitaries_stay_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = random_unitary(&mut rng, 3);
            assert!(is_unitary(&photon_unitary(&u, 2).unwrap(), 1e-10));
        }
        let u = random_unitary(&mut rng, 4);
        assert!(is_unitary(&photon_unitary(&u, 3).unwrap(), 1e-10));
    }

    #[test]
    fn rejects_non_unitary() {
        let m = ComplexMatrix::from_real_rows(&[[0.5, 0.0], [0.0, 1.0]]);
        assert!(matches!(photon_unitary(&m, 1), Err(FockError::NotUnitary(_))));
        let s = prepare_single_photon(0.0);
        assert!(matches!(
            output_probabilities(&ComplexMatrix::identity(2), &s),
            Err(FockError::Mismatch(_))
        ));
    }

    #[test]
    fn input_states() {
        let s = prepare_single_photon(0.0);
        assert!((s.amplitudes[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitudes[1].re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(s.amplitudes[2], Complex64::new(0.0, 0.0));
        let s = prepare_single_photon(PI);
        assert!((s.amplitudes[0].re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(s.amplitudes[0].im.abs() < 1e-15);

        let n = prepare_noon(0.0);
        assert!((n.amplitude(&[2, 0, 0]).unwrap().re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((n.amplitude(&[0, 2, 0]).unwrap().re + FRAC_1_SQRT_2).abs() < 1e-15);
        let n = prepare_noon(FRAC_PI_2);
        assert!((n.amplitude(&[2, 0, 0]).unwrap().re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(n.basis.index_of(&[0, 2, 0]), Some(3));
    }

    proptest! {
        #[test]
        fn prepared_states_are_normalized(phi in -10.0f64..10.0) {
            prop_assert!((prepare_single_photon(phi).norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((prepare_noon(phi).norm_sqr() - 1.0).abs() < 1e-12);
            let a = prepare_noon(phi).amplitudes[0];
            let b = prepare_noon(phi + PI).amplitudes[0];
            prop_assert!((a - b).norm() < 1e-12);
        }

        #[test]
        fn probability_is_conserved(alpha in 0.0f64..=0.5, phi in 0.0f64..TAU, type2 in any::<bool>()) {
            let kind = if type2 { BeamSplitterKind::Type2 } else { BeamSplitterKind::Type1 };
            let u = dilated(kind, alpha);
            for state in [prepare_single_photon(phi), prepare_noon(phi)] {
                let p = output_probabilities(&u, &state).unwrap();
                prop_assert!((p.total() - 1.0).abs() < 1e-10);
                prop_assert!(p.probabilities.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn perfect_absorption_single_photon() {
        let u = dilated(BeamSplitterKind::Type1, 0.5);
        let p = output_probabilities(&u, &prepare_single_photon(PI)).unwrap();
        assert!((p.probabilities[2] - 1.0).abs() < 1e-10);
        assert!(p.probabilities[0] < 1e-10 && p.probabilities[1] < 1e-10);
        let p = output_probabilities(&u, &prepare_single_photon(0.0)).unwrap();
        assert!((p.probabilities[0] - 0.5).abs() < 1e-10);
        assert!((p.probabilities[1] - 0.5).abs() < 1e-10);
        assert!(p.probabilities[2] < 1e-10);
    }

    #[test]
    fn noon_deterministic_regimes() {
        let u = dilated(BeamSplitterKind::Type1, 0.5);
        let p = output_probabilities(&u, &prepare_noon(0.0)).unwrap();
        assert!((p.get(&[1, 0, 1]).unwrap() - 0.5).abs() < 1e-10);
        assert!((p.get(&[0, 1, 1]).unwrap() - 0.5).abs() < 1e-10);
        let p = output_probabilities(&u, &prepare_noon(FRAC_PI_2)).unwrap();
        assert!((p.get(&[0, 0, 2]).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ancilla_matches_closed_form() {
        for kind in [BeamSplitterKind::Type1, BeamSplitterKind::Type2] {
            for k in 0..=10 {
                let alpha = k as f64 * 0.05;
                let bs = LossyBeamSplitter::solve(kind, alpha).unwrap();
                let prop = FockPropagator::new(&dilated(kind, alpha), 1).unwrap();
                for i in 0..64 {
                    let phi = i as f64 * TAU / 63.0;
                    let p = prop.probabilities(&prepare_single_photon(phi)).unwrap();
                    assert!((p.probabilities[2] - bs.absorbed_intensity(phi)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn periodicity() {
        for kind in [BeamSplitterKind::Type1, BeamSplitterKind::Type2] {
            let u = dilated(kind, 0.3);
            let one = FockPropagator::new(&u, 1).unwrap();
            let two = FockPropagator::new(&u, 2).unwrap();
            for i in 0..50 {
                let phi = i as f64 * 0.13;
                let a = one.probabilities(&prepare_single_photon(phi)).unwrap();
                let b = one.probabilities(&prepare_single_photon(phi + TAU)).unwrap();
                let c = two.probabilities(&prepare_noon(phi)).unwrap();
                let d = two.probabilities(&prepare_noon(phi + PI)).unwrap();
                for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
                    assert!((x - y).abs() < 1e-10);
                }
                for (x, y) in c.probabilities.iter().zip(&d.probabilities) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lossless_type2_noon_never_reaches_ancilla() {
        let prop = FockPropagator::new(&dilated(BeamSplitterKind::Type2, 0.0), 2).unwrap();
        for i in 0..40 {
            let p = prop.probabilities(&prepare_noon(i as f64 * 0.1)).unwrap();
            for occ in [[1, 0, 1], [0, 1, 1], [0, 0, 2]] {
                assert!(p.get(&occ).unwrap() < 1e-12);
            }
        }
        // bunching at φ=0 turns into antibunching a quarter turn later
        let p0 = prop.probabilities(&prepare_noon(0.0)).unwrap().get(&[1, 1, 0]).unwrap();
        let p1 = prop
            .probabilities(&prepare_noon(FRAC_PI_2))
            .unwrap()
            .get(&[1, 1, 0])
            .unwrap();
        assert!((p0 - p1).abs() > 1.0 - 1e-10);
    }
}
