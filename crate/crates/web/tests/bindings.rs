use cpasim_web::{compile_mesh_json, noon_curves_json, single_photon_curves_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn single_photon_curves_sum_to_one_and_absorb_at_pi() {
    let v = parse(single_photon_curves_json("type2", 0.5, 5));
    let probs = v["probabilities"].as_array().unwrap();
    assert_eq!(v["labels"], serde_json::json!(["100", "010", "001"]));
    for i in 0..5 {
        let total: f64 = probs.iter().map(|c| c[i].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    // phi = pi is the middle point
    assert!((probs[2][2].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn noon_fisher_reaches_four_for_lossless_type2() {
    let v = parse(noon_curves_json("type2", 0.0, 721));
    assert_eq!(v["labels"].as_array().unwrap().len(), 6);
    assert!((v["fisher_max"].as_f64().unwrap() - 4.0).abs() < 1e-3);
}

#[test]
fn mesh_has_three_mzis() {
    let v = parse(compile_mesh_json("type1", 0.3));
    assert_eq!(v["mzis"].as_array().unwrap().len(), 3);
    assert!((v["mzis"][1]["theta"].as_f64().unwrap() - 1.36944).abs() < 1e-5);
    assert!(v["reconstruction_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn bad_input_is_an_error_string() {
    assert!(compile_mesh_json("type3", 0.1).unwrap_err().contains("type3"));
    assert!(single_photon_curves_json("type1", 0.7, 10).is_err());
    assert!(noon_curves_json("type1", 0.1, 1).is_err());
}
