use serde_json::Value;
use xdac_wasm::{convert, run_scenario, sample_scenario, trust_trajectory};

#[test]
fn trajectory_has_one_point_per_step_and_stays_bounded() {
    let v: Value = serde_json::from_str(&trust_trajectory(0.5, 0.5, 0.5, "honest", 40, 5, 1).unwrap()).unwrap();
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 40);
    for p in pts {
        for key in ["ex", "qos", "dtd", "td", "rp"] {
            let x = p[key].as_f64().unwrap();
            assert!((-1.0..=1.0).contains(&x), "{key} = {x}");
        }
    }
    // honest behaviour pushes the subject above the neutral 0.25
    assert!(pts.last().unwrap()["td"].as_f64().unwrap() > 0.25);
}

#[test]
fn malicious_subject_ends_below_honest_one() {
    let last = |profile| {
        let v: Value = serde_json::from_str(&trust_trajectory(0.5, 0.5, 0.5, profile, 30, 5, 3).unwrap()).unwrap();
        v.as_array().unwrap().last().unwrap()["td"].as_f64().unwrap()
    };
    assert!(last("malicious") < last("honest"));
}

#[test]
fn trajectory_rejects_bad_input() {
    assert!(trust_trajectory(1.5, 0.5, 0.5, "honest", 10, 5, 1).is_err());
    assert!(trust_trajectory(0.5, 0.5, 0.5, "sneaky", 10, 5, 1).is_err());
}

#[test]
fn conversion_with_and_without_guest_floor() {
    let v: Value = serde_json::from_str(&convert("Manager", true).unwrap()).unwrap();
    assert_eq!(v["local_role"], "DM0/Professor");
    let v: Value = serde_json::from_str(&convert("Engineer", true).unwrap()).unwrap();
    assert_eq!(v["local_role"], "DM0/Guest");
    let v: Value = serde_json::from_str(&convert("Engineer", false).unwrap()).unwrap();
    assert!(v["local_role"].is_null());
    assert!(convert("Janitor", true).is_err());
}

#[test]
fn sample_scenario_runs() {
    let v: Value = serde_json::from_str(&run_scenario(&sample_scenario()).unwrap()).unwrap();
    assert!(!v["trace"].as_array().unwrap().is_empty());
    assert!(!v["trajectories"].as_array().unwrap().is_empty());
    assert!(run_scenario("{}").is_err());
}
