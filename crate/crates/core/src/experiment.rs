//! Sweep engine: lossy device → dilation → mesh → Fock-space probabilities
//! over a grid of absorptions and input phases, with optional emulation of
//! coincidence counting and the corrections applied to measured counts.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clements::{decompose, reconstruct, ClementsError, MeshProgram};
use crate::dilation::{dilate, reduce_ancillas, DilatedUnitary, DilationError};
use crate::fock::{
    prepare_noon_in, prepare_single_photon_in, FockBasis, FockError, FockPropagator, ProbabilityDistribution,
    StateVector,
};
use crate::format::sig17;
use crate::lossybs::{BeamSplitterKind, LossyBeamSplitter, LossyBsError, MAX_ABSORPTION};
use crate::metrology::{
    bhattacharyya, fisher_per_outcome, fit_sinusoid, visibility_and_phase, MetrologyError, PhaseCurve, SinusoidFit,
    VisibilityPhase,
};
use crate::numerics::ComplexMatrix;

/// Mesh reconstruction must reproduce the dilated unitary this closely.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Points in the dense grid used for Fisher information, a step below 1e-3 rad.
pub const FISHER_GRID_POINTS: usize = 6285;
const REDUCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Device(#[from] LossyBsError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
    #[error(transparent)]
    Mesh(#[from] ClementsError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Metrology(#[from] MetrologyError),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("no counts to normalize")]
    EmptyData,
    #[error("the number-resolving correction applies only to two-photon data")]
    NotTwoPhoton,
}

impl ExperimentError {
    /// Whether the error stems from user input rather than a numeric failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Self::Config(_) | Self::Device(_) | Self::EmptyData | Self::NotTwoPhoton => true,
            Self::Dilation(DilationError::GainUnsupported(_)) => true,
            Self::Metrology(e) => !matches!(e, MetrologyError::Degenerate(_)),
            _ => false,
        }
    }
}

/// The three-mode (or larger) circuit emulating one lossy beam splitter.
#[derive(Debug, Clone)]
pub struct CpaCircuit {
    pub device: LossyBeamSplitter,
    /// Dilation with redundant ancillas removed, padded to at least 3 modes.
    pub dilation: DilatedUnitary,
    pub program: MeshProgram,
    /// The unitary the mesh implements.
    pub unitary: ComplexMatrix,
}

impl CpaCircuit {
    pub fn compile(device: &LossyBeamSplitter) -> Result<Self, ExperimentError> {
        let dilation = reduce_ancillas(&dilate(&device.matrix())?, REDUCE_TOL);
        let n = dilation.n_modes().max(3);
        let dilation = dilation.padded_to(n);
        let program = decompose(&dilation.matrix)?;
        let unitary = reconstruct(&program);
        let err = unitary.max_abs_diff(&dilation.matrix);
        if err.is_nan() || err > RECONSTRUCTION_TOL {
            return Err(ExperimentError::Numeric(format!(
                "mesh reconstruction error {err:.3e} exceeds {RECONSTRUCTION_TOL:e}"
            )));
        }
        Ok(Self {
            device: *device,
            dilation,
            program,
            unitary,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.unitary.rows()
    }

    pub fn propagator(&self, n_photons: usize) -> Result<FockPropagator, ExperimentError> {
        Ok(FockPropagator::new(&self.unitary, n_photons)?)
    }

    pub fn probabilities(&self, state: &StateVector) -> Result<ProbabilityDistribution, ExperimentError> {
        Ok(self.propagator(state.n_photons())?.probabilities(state)?)
    }
}

/// Which lossy device a sweep emulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceSpec {
    Type1,
    Type2,
    /// Fixed amplitudes; the absorption list of the sweep is ignored.
    Custom {
        t: Complex64,
        r: Complex64,
    },
}

impl DeviceSpec {
    pub fn kind(&self) -> BeamSplitterKind {
        match self {
            Self::Type1 => BeamSplitterKind::Type1,
            Self::Type2 => BeamSplitterKind::Type2,
            Self::Custom { .. } => BeamSplitterKind::Custom,
        }
    }

    pub fn solve(&self, absorption: f64) -> Result<LossyBeamSplitter, LossyBsError> {
        match *self {
            Self::Type1 => LossyBeamSplitter::solve_type1(absorption),
            Self::Type2 => LossyBeamSplitter::solve_type2(absorption),
            Self::Custom { t, r } => LossyBeamSplitter::custom(t, r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    SinglePhoton,
    Noon,
}

impl InputState {
    pub fn n_photons(self) -> usize {
        match self {
            Self::SinglePhoton => 1,
            Self::Noon => 2,
        }
    }

    /// Fringe frequency in φ.
    pub fn harmonic(self) -> u32 {
        self.n_photons() as u32
    }

    pub fn prepare(self, n_modes: usize, phi: f64) -> Result<StateVector, FockError> {
        match self {
            Self::SinglePhoton => prepare_single_photon_in(n_modes, phi),
            Self::Noon => prepare_noon_in(n_modes, phi),
        }
    }

    /// Detectors behind each output mode: one for single photons, a 50:50
    /// split onto two for the two-photon runs.
    pub fn detectors_per_mode(self) -> usize {
        match self {
            Self::SinglePhoton => 1,
            Self::Noon => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl PhiGrid {
    pub fn full_turn(count: usize) -> Self {
        Self {
            start: 0.0,
            stop: TAU,
            count,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        phi_grid(self.start, self.stop, self.count)
    }
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn phi_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub bs_kind: DeviceSpec,
    #[serde(default)]
    pub absorptions: Vec<f64>,
    pub phi_grid: PhiGrid,
    pub input_state: InputState,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Per detector: one per output mode for single photons, two per mode for NOON.
    #[serde(default)]
    pub efficiencies: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let g = &self.phi_grid;
        if g.count < 2 {
            return Err(ExperimentError::Config(format!(
                "phi grid needs at least 2 points, got {}",
                g.count
            )));
        }
        if !(g.start.is_finite() && g.stop.is_finite()) || g.stop <= g.start {
            return Err(ExperimentError::Config("phi grid must have finite start < stop".into()));
        }
        if !matches!(self.bs_kind, DeviceSpec::Custom { .. }) {
            if self.absorptions.is_empty() {
                return Err(ExperimentError::Config("absorptions must not be empty".into()));
            }
            if let Some(a) = self
                .absorptions
                .iter()
                .find(|a| !a.is_finite() || **a < 0.0 || **a > MAX_ABSORPTION)
            {
                return Err(ExperimentError::Device(LossyBsError::Domain(*a)));
            }
        }
        if self.shots == Some(0) {
            return Err(ExperimentError::Config("shots must be at least 1".into()));
        }
        if let Some(eff) = &self.efficiencies {
            if eff.iter().any(|e| !e.is_finite() || *e <= 0.0 || *e > 1.0) {
                return Err(ExperimentError::Config("efficiencies must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    fn absorption_rows(&self) -> Result<Vec<f64>, ExperimentError> {
        match self.bs_kind {
            DeviceSpec::Custom { t, r } => Ok(vec![LossyBeamSplitter::custom(t, r)?.absorption]),
            _ => Ok(self.absorptions.clone()),
        }
    }
}

/// Detector-level counts aggregated onto Fock outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Counts {
    pub basis: Arc<FockBasis>,
    pub counts: Vec<u64>,
    /// Factor each outcome was multiplied by after sampling.
    pub scale: Vec<f64>,
    /// Trials in which no detection or coincidence registered.
    pub missed: u64,
}

impl Counts {
    pub fn new(basis: Arc<FockBasis>, counts: Vec<u64>) -> Result<Self, ExperimentError> {
        if counts.len() != basis.len() {
            return Err(ExperimentError::Config(format!(
                "{} counts for {} outcomes",
                counts.len(),
                basis.len()
            )));
        }
        let scale = vec![1.0; counts.len()];
        Ok(Self {
            basis,
            counts,
            scale,
            missed: 0,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, occupation: &[usize]) -> Option<u64> {
        self.basis.index_of(occupation).map(|i| self.counts[i])
    }
}

/// Sequential-binomial multinomial draw.
fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probabilities: &[f64]) -> Vec<u64> {
    let mut remaining = trials;
    let mut mass: f64 = probabilities.iter().sum();
    let mut out = Vec::with_capacity(probabilities.len());
    for &p in probabilities {
        if remaining == 0 || p <= 0.0 || mass <= 0.0 {
            out.push(0);
            mass -= p.max(0.0);
            continue;
        }
        let ratio = (p / mass).clamp(0.0, 1.0);
        let k = if ratio >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, ratio).expect("ratio in [0, 1]").sample(rng)
        };
        out.push(k);
        remaining -= k;
        mass -= p;
    }
    out
}

fn detectors_for(basis: &FockBasis, efficiencies: &[f64]) -> Result<usize, ExperimentError> {
    let n = basis.n_modes();
    if efficiencies.len() == n {
        Ok(1)
    } else if efficiencies.len() == 2 * n {
        Ok(2)
    } else {
        Err(ExperimentError::Config(format!(
            "{} efficiencies for {n} output modes; expected {n} or {}",
            efficiencies.len(),
            2 * n
        )))
    }
}

/// Probability that a detector pair clicks for each outcome of the basis.
///
/// Returns, per outcome, the list of `(detector_a, detector_b, probability)`
/// splits including efficiencies. Only one- and two-photon outcomes occur.
fn detection_channels(basis: &FockBasis, per_mode: usize, eff: &[f64]) -> Vec<Vec<(usize, usize, f64)>> {
    basis
        .states()
        .iter()
        .map(|occ| {
            let modes: Vec<usize> = occ
                .iter()
                .enumerate()
                .flat_map(|(m, &k)| std::iter::repeat_n(m, k))
                .collect();
            match (modes.as_slice(), per_mode) {
                ([m], _) => (0..per_mode)
                    .map(|x| (m * per_mode + x, usize::MAX, eff[m * per_mode + x] / per_mode as f64))
                    .collect(),
                ([a, b], 1) if a == b => vec![],
                ([a, b], 1) => vec![(*a, *b, eff[*a] * eff[*b])],
                ([a, b], _) if a == b => {
                    // two photons in one mode reach distinct detectors half the time
                    let (d0, d1) = (2 * a, 2 * a + 1);
                    vec![(d0, d1, 0.5 * eff[d0] * eff[d1])]
                }
                ([a, b], _) => {
                    let mut v = Vec::with_capacity(4);
                    for x in 0..2 {
                        for y in 0..2 {
                            let (da, db) = (2 * a + x, 2 * b + y);
                            v.push((da, db, 0.25 * eff[da] * eff[db]));
                        }
                    }
                    v
                }
                _ => vec![],
            }
        })
        .collect()
}

/// Emulates detection of `shots` trials of `dist`.
///
/// Single photons land on one detector per output mode. Two-photon runs use
/// two detectors per mode and sample at the level of detector pairs, so two
/// photons in one mode register only when they split onto different
/// detectors; pair counts are then aggregated back onto Fock outcomes.
/// `efficiencies` holds one entry per detector (values in `[0, 1]`).
pub fn sample_counts(
    dist: &ProbabilityDistribution,
    shots: u64,
    efficiencies: &[f64],
    seed: u64,
) -> Result<Counts, ExperimentError> {
    if shots == 0 {
        return Err(ExperimentError::Config("shots must be at least 1".into()));
    }
    if efficiencies.iter().any(|e| !e.is_finite() || *e < 0.0 || *e > 1.0) {
        return Err(ExperimentError::Config("efficiencies must lie in [0, 1]".into()));
    }
    let basis = &dist.basis;
    if basis.n_photons() == 0 || basis.n_photons() > 2 {
        return Err(ExperimentError::Config(format!(
            "counting emulation supports 1 or 2 photons, got {}",
            basis.n_photons()
        )));
    }
    let per_mode = detectors_for(basis, efficiencies)?;
    let channels = detection_channels(basis, per_mode, efficiencies);

    // flatten to detector-level categories, remembering the outcome of each
    let mut owners = Vec::new();
    let mut probs = Vec::new();
    for (outcome, list) in channels.iter().enumerate() {
        for &(_, _, p) in list {
            owners.push(outcome);
            probs.push(dist.probabilities[outcome].max(0.0) * p);
        }
    }
    let detected: f64 = probs.iter().sum();
    probs.push((1.0 - detected).max(0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = multinomial(&mut rng, shots, &probs);
    let mut counts = vec![0u64; basis.len()];
    for (k, &outcome) in owners.iter().enumerate() {
        counts[outcome] += draws[k];
    }
    Ok(Counts {
        basis: Arc::clone(basis),
        counts,
        scale: vec![1.0; basis.len()],
        missed: draws[draws.len() - 1],
    })
}

/// Doubles the counts of outcomes with two photons in one mode, undoing the
/// half of those events a split onto two detectors cannot see.
pub fn number_resolving_correction(raw: &Counts) -> Result<Counts, ExperimentError> {
    if raw.basis.n_photons() != 2 {
        return Err(ExperimentError::NotTwoPhoton);
    }
    let mut out = raw.clone();
    for (i, occ) in raw.basis.states().iter().enumerate() {
        if occ.contains(&2) {
            out.counts[i] *= 2;
            out.scale[i] *= 2.0;
        }
    }
    Ok(out)
}

/// Overall detection efficiency of each outcome, after the ×2 correction for
/// bunched two-photon outcomes.
pub fn outcome_efficiencies(basis: &FockBasis, efficiencies: &[f64]) -> Result<Vec<f64>, ExperimentError> {
    let per_mode = detectors_for(basis, efficiencies)?;
    Ok(detection_channels(basis, per_mode, efficiencies)
        .iter()
        .zip(basis.states())
        .map(|(list, occ)| {
            let sum: f64 = list.iter().map(|c| c.2).sum();
            if per_mode == 2 && occ.contains(&2) {
                2.0 * sum
            } else {
                sum
            }
        })
        .collect())
}

/// Normalized, efficiency-corrected distribution with Poisson errors.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCounts {
    pub distribution: ProbabilityDistribution,
    /// One standard deviation per outcome.
    pub sigma: Vec<f64>,
}

/// Divides each outcome by its detection efficiency and renormalizes.
///
/// Counts are treated as Poisson in their raw (pre-scaling) units, so an
/// outcome scaled by `s` has variance `s·count`; errors are propagated
/// through the efficiency division and the normalization.
pub fn normalize_counts(counts: &Counts, efficiencies: &[f64]) -> Result<NormalizedCounts, ExperimentError> {
    let per_outcome = outcome_efficiencies(&counts.basis, efficiencies)?;
    let mut x = Vec::with_capacity(counts.counts.len());
    let mut var = Vec::with_capacity(counts.counts.len());
    for ((&c, &s), &e) in counts.counts.iter().zip(&counts.scale).zip(&per_outcome) {
        let c = c as f64;
        if e > 0.0 {
            x.push(c / e);
            var.push(s * c / (e * e));
        } else if c > 0.0 {
            return Err(ExperimentError::Config(
                "counts recorded on an outcome with zero efficiency".into(),
            ));
        } else {
            x.push(0.0);
            var.push(0.0);
        }
    }
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return Err(ExperimentError::EmptyData);
    }
    let p: Vec<f64> = x.iter().map(|v| v / total).collect();
    let var_sum: f64 = var.iter().sum();
    let sigma = p
        .iter()
        .zip(&var)
        .map(|(&pi, &vi)| {
            let others = var_sum - vi;
            (((1.0 - pi).powi(2) * vi + pi * pi * others) / (total * total))
                .max(0.0)
                .sqrt()
        })
        .collect();
    Ok(NormalizedCounts {
        distribution: ProbabilityDistribution {
            basis: Arc::clone(&counts.basis),
            probabilities: p,
        },
        sigma,
    })
}

/// Seed of the random stream for one grid point.
pub fn point_seed(seed: u64, alpha_index: usize, phi_index: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ alpha_index as u64) ^ (phi_index as u64).rotate_left(32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha_index: usize,
    pub phi_index: usize,
    pub alpha: f64,
    pub phi: f64,
    pub theory: ProbabilityDistribution,
    /// Counts after the number-resolving correction, when sampling.
    pub counts: Option<Counts>,
    pub normalized: Option<NormalizedCounts>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub circuits: Vec<CpaCircuit>,
    pub phis: Vec<f64>,
    /// Row-major: all φ for the first absorption, then the next.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn labels(&self) -> Vec<String> {
        self.points.first().map(|p| p.theory.labels()).unwrap_or_default()
    }

    pub fn row(&self, alpha_index: usize) -> &[SweepPoint] {
        let n = self.phis.len();
        &self.points[alpha_index * n..(alpha_index + 1) * n]
    }

    /// Theory curve of one outcome at one absorption.
    pub fn theory_curve(&self, alpha_index: usize, outcome: usize) -> Result<PhaseCurve, ExperimentError> {
        let row = self.row(alpha_index);
        let label = row[0].theory.basis.label(outcome);
        Ok(PhaseCurve::new(
            label,
            self.phis.clone(),
            row.iter().map(|p| p.theory.probabilities[outcome]).collect(),
        )?)
    }
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Sync, U: Send, E: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U, E> + Sync + Send,
) -> Result<Vec<U>, E> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T: Sync, U: Send, E: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U, E> + Sync + Send,
) -> Result<Vec<U>, E> {
    items.iter().map(f).collect()
}

/// Evaluates the pipeline on every `(absorption, φ)` grid point.
///
/// Points are computed concurrently when the `parallel` feature is on; each
/// point draws from its own seeded stream so the output is independent of
/// scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let alphas = config.absorption_rows()?;
    let phis = config.phi_grid.points();
    let circuits = map_ordered(&alphas, |&a| {
        let device = config.bs_kind.solve(a)?;
        CpaCircuit::compile(&device)
    })?;
    let n_photons = config.input_state.n_photons();
    let propagators = map_ordered(&circuits, |c| c.propagator(n_photons))?;
    let n_modes = circuits[0].n_modes();
    let efficiencies = match &config.efficiencies {
        Some(e) => e.clone(),
        None => vec![1.0; n_modes * config.input_state.detectors_per_mode()],
    };
    if efficiencies.len() != n_modes * config.input_state.detectors_per_mode() {
        return Err(ExperimentError::Config(format!(
            "expected {} detector efficiencies, got {}",
            n_modes * config.input_state.detectors_per_mode(),
            efficiencies.len()
        )));
    }

    let grid: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|ia| (0..phis.len()).map(move |ip| (ia, ip)))
        .collect();
    let points = map_ordered(&grid, |&(ia, ip)| -> Result<SweepPoint, ExperimentError> {
        let circuit = &circuits[ia];
        let state = config.input_state.prepare(circuit.n_modes(), phis[ip])?;
        let theory = propagators[ia].probabilities(&state)?;
        let total = theory.total();
        if (total - 1.0).abs() > 1e-10 {
            return Err(ExperimentError::Numeric(format!(
                "probabilities sum to {total} at absorption {}, phi {}",
                alphas[ia], phis[ip]
            )));
        }
        let (counts, normalized) = match config.shots {
            None => (None, None),
            Some(shots) => {
                let raw = sample_counts(&theory, shots, &efficiencies, point_seed(config.seed, ia, ip))?;
                let corrected = if n_photons == 2 {
                    number_resolving_correction(&raw)?
                } else {
                    raw
                };
                let normalized = match normalize_counts(&corrected, &efficiencies) {
                    Ok(n) => Some(n),
                    Err(ExperimentError::EmptyData) => None,
                    Err(e) => return Err(e),
                };
                (Some(corrected), normalized)
            }
        };
        Ok(SweepPoint {
            alpha_index: ia,
            phi_index: ip,
            alpha: alphas[ia],
            phi: phis[ip],
            theory,
            counts,
            normalized,
        })
    })?;
    Ok(SweepResult {
        config: config.clone(),
        circuits,
        phis,
        points,
    })
}

/// CSV with one row per `(absorption, φ)`.
///
/// Columns: `alpha, phi`, then `outcome_<label>_theory` for every outcome,
/// and when sampling also `_counts`, `_normalized` and `_sigma` groups.
/// Floats use 17 significant digits; lines end in LF.
pub fn write_csv(result: &SweepResult) -> String {
    let labels = result.labels();
    let sampled = result.config.shots.is_some();
    let mut out = String::from("alpha,phi");
    let groups: &[&str] = if sampled {
        &["theory", "counts", "normalized", "sigma"]
    } else {
        &["theory"]
    };
    for g in groups {
        for l in &labels {
            let _ = write!(out, ",outcome_{l}_{g}");
        }
    }
    out.push('\n');
    for p in &result.points {
        out.push_str(&sig17(p.alpha));
        out.push(',');
        out.push_str(&sig17(p.phi));
        for v in &p.theory.probabilities {
            out.push(',');
            out.push_str(&sig17(*v));
        }
        if sampled {
            let n = labels.len();
            match &p.counts {
                Some(c) => c.counts.iter().for_each(|v| {
                    let _ = write!(out, ",{v}");
                }),
                None => out.push_str(&",".repeat(n)),
            }
            match &p.normalized {
                Some(nc) => {
                    for v in nc.distribution.probabilities.iter().chain(&nc.sigma) {
                        out.push(',');
                        out.push_str(&sig17(*v));
                    }
                }
                None => out.push_str(&",".repeat(2 * n)),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-outcome and total Fisher information of one circuit and input state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    pub labels: Vec<String>,
    /// Maximum over φ for each outcome.
    pub per_outcome_max: Vec<f64>,
    pub total: PhaseCurve,
    pub total_max: f64,
    pub total_argmax: f64,
}

/// Fisher information evaluated on `FISHER_GRID_POINTS` points over one
/// period of the input phase (`2π/N` for `N` photons).
pub fn fisher_report(circuit: &CpaCircuit, input: InputState) -> Result<FisherReport, ExperimentError> {
    let phis = phi_grid(0.0, TAU, FISHER_GRID_POINTS);
    let prop = circuit.propagator(input.n_photons())?;
    let dists = phis
        .iter()
        .map(|&phi| Ok(prop.probabilities(&input.prepare(circuit.n_modes(), phi)?)?))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let labels = dists[0].labels();
    let mut total = vec![0.0; phis.len()];
    let mut per_outcome_max = Vec::with_capacity(labels.len());
    for (k, label) in labels.iter().enumerate() {
        let curve = PhaseCurve::new(
            label.clone(),
            phis.clone(),
            dists.iter().map(|d| d.probabilities[k]).collect(),
        )?;
        let fi = fisher_per_outcome(&curve)?;
        per_outcome_max.push(fi.max_value());
        total.iter_mut().zip(&fi.values).for_each(|(t, v)| *t += v);
    }
    let total = PhaseCurve::new("fisher_total", phis, total)?;
    let (total_argmax, total_max) = total.max().unwrap_or((0.0, 0.0));
    Ok(FisherReport {
        labels,
        per_outcome_max,
        total,
        total_max,
        total_argmax,
    })
}

/// Summary of one absorption row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowAnalysis {
    pub alpha: f64,
    pub fisher_max: Vec<f64>,
    pub fisher_total_max: f64,
    pub fisher_total_argmax: f64,
    /// Fringe fit of every outcome, when the grid spans a full fringe.
    pub fringe_fits: Option<Vec<SinusoidFit>>,
    /// Signal-port visibility and relative phase (single photons only).
    pub signal_visibility: Option<VisibilityPhase>,
    /// Bhattacharyya overlap of normalized counts with theory, per φ.
    pub bhattacharyya: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAnalysis {
    pub device: DeviceSpec,
    pub input_state: InputState,
    pub labels: Vec<String>,
    pub phis: Vec<f64>,
    pub rows: Vec<RowAnalysis>,
    /// Fisher total curve per absorption, on the dense analysis grid.
    pub fisher_total_phis: Vec<f64>,
    pub fisher_total: Vec<Vec<f64>>,
}

/// Fisher tables, fringe fits and count overlaps for a finished sweep.
pub fn analyze(result: &SweepResult) -> Result<SweepAnalysis, ExperimentError> {
    let input = result.config.input_state;
    let labels = result.labels();
    let k = input.harmonic();
    let spans_fringe =
        result.phis.len() >= 4 && result.phis[result.phis.len() - 1] - result.phis[0] >= TAU / k as f64 * (1.0 - 1e-9);
    let reports = map_ordered(&result.circuits, |c| fisher_report(c, input))?;
    let mut rows = Vec::with_capacity(result.circuits.len());
    for (ia, report) in reports.iter().enumerate() {
        let fringe_fits = if spans_fringe {
            Some(
                (0..labels.len())
                    .map(|o| Ok(fit_sinusoid(&result.theory_curve(ia, o)?, k)?))
                    .collect::<Result<Vec<_>, ExperimentError>>()?,
            )
        } else {
            None
        };
        let signal_visibility = match (&fringe_fits, input) {
            (Some(fits), InputState::SinglePhoton) => visibility_and_phase(&fits[0], &fits[1]).ok(),
            _ => None,
        };
        let bhattacharyya_row = if result.config.shots.is_some() {
            Some(
                result
                    .row(ia)
                    .iter()
                    .map(|p| match &p.normalized {
                        Some(n) => Ok(bhattacharyya(&n.distribution, &p.theory)?),
                        None => Ok(0.0),
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()?,
            )
        } else {
            None
        };
        rows.push(RowAnalysis {
            alpha: result.row(ia)[0].alpha,
            fisher_max: report.per_outcome_max.clone(),
            fisher_total_max: report.total_max,
            fisher_total_argmax: report.total_argmax,
            fringe_fits,
            signal_visibility,
            bhattacharyya: bhattacharyya_row,
        });
    }
    Ok(SweepAnalysis {
        device: result.config.bs_kind,
        input_state: input,
        labels,
        phis: result.phis.clone(),
        rows,
        fisher_total_phis: reports.first().map(|r| r.total.phis.clone()).unwrap_or_default(),
        fisher_total: reports.into_iter().map(|r| r.total.values).collect(),
    })
}
