//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; the `*_json` functions hold the logic
//! so they can be tested natively.

use cpasim::experiment::{phi_grid, CpaCircuit, InputState};
use cpasim::lossybs::{BeamSplitterKind, LossyBeamSplitter};
use cpasim::metrology::{fisher_per_outcome, PhaseCurve};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 4001;

#[derive(Serialize)]
struct Curves {
    kind: String,
    absorption: f64,
    phis: Vec<f64>,
    labels: Vec<String>,
    /// One probability curve per outcome.
    probabilities: Vec<Vec<f64>>,
    fisher_total: Vec<f64>,
    fisher_max: f64,
}

#[derive(Serialize)]
struct Mzi {
    modes: [usize; 2],
    layer: usize,
    theta: f64,
    phi: f64,
}

#[derive(Serialize)]
struct Mesh {
    kind: String,
    absorption: f64,
    t: [f64; 2],
    r: [f64; 2],
    internal_phase: f64,
    n_modes: usize,
    mzis: Vec<Mzi>,
    output_phases: Vec<f64>,
    reconstruction_error: f64,
}

fn parse_kind(kind: &str) -> Result<BeamSplitterKind, String> {
    match kind {
        "type1" => Ok(BeamSplitterKind::Type1),
        "type2" => Ok(BeamSplitterKind::Type2),
        other => Err(format!("unknown device type {other:?}; use type1 or type2")),
    }
}

fn compile(kind: &str, alpha: f64) -> Result<CpaCircuit, String> {
    let bs = LossyBeamSplitter::solve(parse_kind(kind)?, alpha).map_err(|e| e.to_string())?;
    CpaCircuit::compile(&bs).map_err(|e| e.to_string())
}

fn curves(kind: &str, alpha: f64, input: InputState, points: usize) -> Result<String, String> {
    if !(3..=MAX_POINTS).contains(&points) {
        return Err(format!("points must lie in 3..={MAX_POINTS}"));
    }
    let circuit = compile(kind, alpha)?;
    let prop = circuit.propagator(input.n_photons()).map_err(|e| e.to_string())?;
    let phis = phi_grid(0.0, std::f64::consts::TAU, points);
    let dists = phis
        .iter()
        .map(|&phi| {
            let state = input.prepare(circuit.n_modes(), phi).map_err(|e| e.to_string())?;
            prop.probabilities(&state).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, String>>()?;
    let labels = dists[0].labels();
    let probabilities: Vec<Vec<f64>> = (0..labels.len())
        .map(|k| dists.iter().map(|d| d.probabilities[k]).collect())
        .collect();
    let mut fisher_total = vec![0.0; points];
    for (label, values) in labels.iter().zip(&probabilities) {
        let curve = PhaseCurve::new(label.clone(), phis.clone(), values.clone()).map_err(|e| e.to_string())?;
        let fi = fisher_per_outcome(&curve).map_err(|e| e.to_string())?;
        fisher_total.iter_mut().zip(&fi.values).for_each(|(t, v)| *t += v);
    }
    let fisher_max = fisher_total.iter().cloned().fold(0.0, f64::max);
    serde_json::to_string(&Curves {
        kind: kind.to_string(),
        absorption: alpha,
        phis,
        labels,
        probabilities,
        fisher_total,
        fisher_max,
    })
    .map_err(|e| e.to_string())
}

pub fn single_photon_curves_json(kind: &str, alpha: f64, points: usize) -> Result<String, String> {
    curves(kind, alpha, InputState::SinglePhoton, points)
}

pub fn noon_curves_json(kind: &str, alpha: f64, points: usize) -> Result<String, String> {
    curves(kind, alpha, InputState::Noon, points)
}

pub fn compile_mesh_json(kind: &str, alpha: f64) -> Result<String, String> {
    let c = compile(kind, alpha)?;
    let mesh = Mesh {
        kind: kind.to_string(),
        absorption: c.device.absorption,
        t: [c.device.t.re, c.device.t.im],
        r: [c.device.r.re, c.device.r.im],
        internal_phase: c.device.internal_phase,
        n_modes: c.program.n_modes,
        mzis: c
            .program
            .mzis
            .iter()
            .map(|m| Mzi {
                modes: m.modes,
                layer: m.layer,
                theta: m.theta,
                phi: m.phi,
            })
            .collect(),
        output_phases: c.program.output_phases.clone(),
        reconstruction_error: c.unitary.max_abs_diff(&c.dilation.matrix),
    };
    serde_json::to_string(&mesh).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn single_photon_curves(kind: &str, alpha: f64, points: usize) -> Result<String, JsValue> {
    single_photon_curves_json(kind, alpha, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn noon_curves(kind: &str, alpha: f64, points: usize) -> Result<String, JsValue> {
    noon_curves_json(kind, alpha, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compile_mesh(kind: &str, alpha: f64) -> Result<String, JsValue> {
    compile_mesh_json(kind, alpha).map_err(|e| JsValue::from_str(&e))
}
