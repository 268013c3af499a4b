use predprey_web::{portrait, switching, turing};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn portrait_has_nullclines_and_orbit() {
    let v = parse(portrait(0.25, 1.4, 0.5, 0.1, 200.0).unwrap());
    assert!(v["prey_nullcline"].as_array().unwrap().len() > 100);
    assert!(v["equilibria"].as_array().unwrap().len() >= 4);
    let orbit = v["orbit"].as_array().unwrap();
    assert!(orbit.len() > 10 && orbit.len() <= 4002);
    assert_eq!(v["outcome"], "ToEstar");
    let none = parse(portrait(0.25, 1.4, 0.0, 0.0, 0.0).unwrap());
    assert!(none["orbit"].as_array().unwrap().is_empty());
}

#[test]
fn turing_segments_and_errors() {
    let v = parse(turing(0.25, 1.4, 2.0, 1.3, 8.0).unwrap());
    let modes: Vec<u64> = v["segments"].as_array().unwrap().iter().map(|s| s["n"].as_u64().unwrap()).collect();
    assert_eq!(modes, [5, 4, 3, 2]);
    assert!(turing(0.25, 1.6, 2.0, 1.3, 8.0).is_err());
    assert!(portrait(-1.0, 1.4, 0.5, 0.1, 1.0).is_err());
}

#[test]
fn switching_curves_and_root_count() {
    let v = parse(switching(0.25, 1.2, 0.3, 0.4, 2.0, 8, (5.0, 20.0), (0.1, 0.1)).unwrap());
    assert!(!v["curves"].as_array().unwrap().is_empty());
    assert_eq!(v["unstable_roots"], 0);
    let v = parse(switching(0.25, 1.2, 0.3, 0.4, 2.0, 8, (5.0, 20.0), (f64::NAN, 0.0)).unwrap());
    assert!(v["unstable_roots"].is_null());
}
