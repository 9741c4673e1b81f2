use irs_ho_wasm::{analyze_json, connection_states_json, serving_distance_json};
use serde_json::Value;

#[test]
fn analysis_curves_line_up() {
    let v: Value =
        serde_json::from_str(&analyze_json(r#"{"lambda_r_per_km2": 200}"#).unwrap()).unwrap();
    let n = v["irs"]["x_over_l"].as_array().unwrap().len();
    assert!(n > 1000);
    for k in ["trigger", "execution"] {
        assert_eq!(v["irs"][k].as_array().unwrap().len(), n);
        assert_eq!(v["baseline"][k].as_array().unwrap().len(), n);
    }
    let p = v["irs"]["p_pp"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["serving_distance_m"].as_f64().unwrap(), 50.0);
}

#[test]
fn bad_config_is_an_error_message() {
    let e = analyze_json(r#"{"t_p_s": 0.1}"#).unwrap_err();
    assert!(e.contains("t_p_s"));
    assert!(connection_states_json("{").is_err());
}

#[test]
fn connection_states_sum_to_one() {
    let v: Value = serde_json::from_str(&connection_states_json("{}").unwrap()).unwrap();
    let n = v["x_over_l"].as_array().unwrap().len();
    for side in ["original", "target"] {
        for i in (0..n).step_by(97) {
            let s: f64 = (0..4).map(|k| v[side][k][i].as_f64().unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn serving_distance_round_trip() {
    let v: Value =
        serde_json::from_str(&serving_distance_json(100, 40.0, 3.0, 4.0, f64::NAN, 50.0).unwrap())
            .unwrap();
    let g = v["gamma_irs_db"].as_f64().unwrap();
    let back: Value =
        serde_json::from_str(&serving_distance_json(100, 40.0, 3.0, 4.0, g, 0.0).unwrap()).unwrap();
    assert!((back["serving_distance_m"].as_f64().unwrap() - 50.0).abs() < 1e-9);
    assert!(serving_distance_json(0, 40.0, 3.0, 4.0, -10.0, 0.0).is_err());
}
