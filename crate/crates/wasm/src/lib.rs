//! Browser bindings for the demo page in `www/`.
//!
//! Each operation is a plain function returning JSON so it can be tested
//! natively; the `#[wasm_bindgen]` wrappers only forward.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use xdac::conversion::{convert_role, CorrelationSet};
use xdac::fixtures::{campus_corp, campus_corp_correlations};
use xdac::sim::{run, BehaviorProfile, Scenario};
use xdac::trust::{TrustLedger, TrustParams};
use xdac::{DomainId, EntityId, RoleId};

const SAMPLE: &str = include_str!("../../../scenarios/two_domain.json");

#[derive(Serialize)]
struct Point {
    k: u64,
    ex: f64,
    qos: f64,
    dtd: f64,
    /// Subject's domain trust after the latest epoch.
    td: f64,
    rp: f64,
}

/// Two raters take turns rating one subject whose behaviour follows
/// `profile` (`honest`, `malicious`, `oscillating`); an epoch closes every
/// `epoch_every` interactions.
pub fn trust_trajectory(
    alpha: f64,
    beta: f64,
    gamma: f64,
    profile: &str,
    steps: u32,
    epoch_every: u32,
    seed: u64,
) -> Result<String, String> {
    let profile = BehaviorProfile::builtin(profile).ok_or_else(|| format!("unknown profile {profile:?}"))?;
    let params = TrustParams { alpha, beta, gamma, ..TrustParams::default() };
    let domain = DomainId::new("D").map_err(|e| e.to_string())?;
    let mut ledger = TrustLedger::new(domain, params).map_err(|e| e.to_string())?;
    let raters = [EntityId::of("D", "r1"), EntityId::of("D", "r2")];
    let subject = EntityId::of("D", "s");
    for e in raters.iter().chain([&subject]) {
        ledger.register(e.clone()).map_err(|e| e.to_string())?;
    }
    let mut points = Vec::with_capacity(steps as usize);
    for i in 0..u64::from(steps) {
        let ex = profile.sample(seed, i, 0);
        let rater = &raters[(i % 2) as usize];
        ledger.record_experience(rater, &subject, ex).map_err(|e| e.to_string())?;
        if epoch_every > 0 && (i + 1) % u64::from(epoch_every) == 0 {
            ledger.advance_epoch();
        }
        let p = ledger.pair(&raters[0], &subject);
        let view = ledger.view();
        points.push(Point {
            k: i + 1,
            ex: ex.value(),
            qos: p.map_or(0.0, |p| p.qos),
            dtd: p.map_or(0.0, |p| p.dtd),
            td: view.trust(&subject).unwrap_or(f64::NAN),
            rp: view.reputation(&subject).unwrap_or(f64::NAN),
        });
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

/// Converts a role of the outer company hierarchy (DM1) into the university
/// hierarchy (DM0), optionally without the guest floor.
pub fn convert(outer_role: &str, guest_floor: bool) -> Result<String, String> {
    let (h0, h1) = campus_corp();
    let role = RoleId::of("DM1", outer_role);
    let rules = campus_corp_correlations()
        .into_iter()
        .filter(|c| guest_floor || Some(&c.outer_role) != h1.guest());
    let set = CorrelationSet::new(&h1, &h0, rules).map_err(|e| e.to_string())?;
    let res = convert_role(&role, &set, &h1, &h0).map_err(|e| e.to_string())?;
    serde_json::to_string(&res).map_err(|e| e.to_string())
}

/// Runs a scenario document and returns its trace and trajectories.
pub fn run_scenario(text: &str) -> Result<String, String> {
    let sc = Scenario::from_json(text).map_err(|e| e.to_string())?;
    let out = run(&sc).map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn sample_scenario() -> String {
    SAMPLE.to_string()
}

#[wasm_bindgen(js_name = trustTrajectory)]
pub fn trust_trajectory_js(
    alpha: f64,
    beta: f64,
    gamma: f64,
    profile: &str,
    steps: u32,
    epoch_every: u32,
    seed: u64,
) -> Result<String, JsError> {
    trust_trajectory(alpha, beta, gamma, profile, steps, epoch_every, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = convertRole)]
pub fn convert_js(outer_role: &str, guest_floor: bool) -> Result<String, JsError> {
    convert(outer_role, guest_floor).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = runScenario)]
pub fn run_scenario_js(text: &str) -> Result<String, JsError> {
    run_scenario(text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sampleScenario)]
pub fn sample_scenario_js() -> String {
    sample_scenario()
}
