//! Emulation of coherent absorption with programmable linear optics.
//!
//! The crate takes a port-symmetric lossy beam splitter, embeds its 2×2
//! scattering matrix into a unitary on signal plus ancilla modes, compiles
//! that unitary into a rectangular Mach-Zehnder mesh, and simulates single
//! photon and two-photon NOON inputs through it. Analysis helpers cover
//! classical Fisher information, Bhattacharyya overlap, fringe fitting and
//! thermo-optic heater calibration.
//!
//! ```
//! use cpasim::lossybs::LossyBeamSplitter;
//! use cpasim::experiment::CpaCircuit;
//! use cpasim::fock::prepare_single_photon;
//!
//! let bs = LossyBeamSplitter::solve_type1(0.5).unwrap();
//! let circuit = CpaCircuit::compile(&bs).unwrap();
//! let probs = circuit.probabilities(&prepare_single_photon(std::f64::consts::PI)).unwrap();
//! assert!((probs.probabilities[2] - 1.0).abs() < 1e-10);
//! ```

pub mod clements;
pub mod dilation;
pub mod experiment;
pub mod fock;
pub mod format;
pub mod hardware;
pub mod lossybs;
pub mod metrology;
pub mod numerics;

pub use num_complex::Complex64;
