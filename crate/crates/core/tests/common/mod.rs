#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xdac::conversion::{Correlation, CorrelationKind, CorrelationSet};
use xdac::federation::{Federation, Step, StepOutcome};
use xdac::policy::{DenyReason, Outcome};
use xdac::roles::RoleHierarchy;
use xdac::sim::{Event, RunOutput, Scenario, Simulation, TraceBody};
use xdac::{DomainId, PermissionId, RoleId};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    Scenario::from_json(&text).expect("scenario parses")
}

pub const BUNDLED: [&str; 6] = [
    "two_domain.json",
    "campus_corp.json",
    "default_policy.json",
    "no_default.json",
    "high_trust.json",
    "distrust.json",
];

/// Runs the whole schedule and keeps the live federation for inspection.
pub fn run_live(sc: &Scenario) -> (RunOutput, Federation) {
    let mut sim = Simulation::new(sc).expect("scenario builds");
    sim.replay(sc).expect("events apply");
    let fed = sim.federation().clone();
    (sim.into_output(), fed)
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Stats {
    pub local: usize,
    pub cross: usize,
    pub permits: usize,
    pub feedback: usize,
    /// deny counts keyed by the step the trace ended at ("local" for local)
    pub denies: BTreeMap<String, usize>,
}

fn bounded(v: f64) -> bool {
    (-1.0..=1.0).contains(&v)
}

/// Checks every structural rule on a finished run: pipeline and protocol
/// step order, deny placement, containment, feedback conservation and
/// value bounds.
pub fn check_run(out: &RunOutput, fed: &Federation) -> Result<Stats, String> {
    let all: Vec<&str> = Step::ALL.iter().map(|s| s.label()).collect();
    let mut st = Stats::default();
    for (i, ev) in out.trace.iter().enumerate() {
        if ev.seq != i as u64 {
            return Err(format!("seq {} at position {i}", ev.seq));
        }
        match &ev.body {
            TraceBody::LocalDecision { stages, decision, role, resource, .. } => {
                st.local += 1;
                if stages.labels() != ["b", "c", "d", "e", "f"] {
                    return Err(format!("event {i}: local stages {:?}", stages.labels()));
                }
                if decision.outcome == Outcome::Permit {
                    st.permits += 1;
                    let h = fed.domain(&role.domain).unwrap().hierarchy();
                    if !grants(h, role, resource) {
                        return Err(format!("event {i}: permit beyond {role}'s permissions"));
                    }
                } else {
                    *st.denies.entry("local".into()).or_default() += 1;
                }
                if !bounded(decision.trust_at_decision) {
                    return Err(format!("event {i}: trust out of range"));
                }
            }
            TraceBody::CrossDecision { protocol, decision, converted_role, resource, effective_trust, .. } => {
                st.cross += 1;
                let labels = protocol.labels();
                if labels.len() > 12 || labels[..] != all[..labels.len()] {
                    return Err(format!("event {i}: steps {labels:?} out of order"));
                }
                let last = protocol.steps.last().unwrap();
                match decision.outcome {
                    Outcome::Permit => {
                        st.permits += 1;
                        if labels.len() != 12 {
                            return Err(format!("event {i}: permit with {} steps", labels.len()));
                        }
                        let role = converted_role.as_ref().ok_or("permit without role")?;
                        let h = fed.domain(&role.domain).unwrap().hierarchy();
                        if !grants(h, role, resource) {
                            return Err(format!("event {i}: visitor exceeds {role}"));
                        }
                    }
                    Outcome::Deny => {
                        let want = match decision.reason {
                            Some(DenyReason::InterDomainDistrust) => "iii",
                            Some(DenyReason::NoConversion) => "v",
                            Some(DenyReason::BelowTrustThreshold | DenyReason::NoPermission) => "viii",
                            r => return Err(format!("event {i}: unexpected reason {r:?}")),
                        };
                        if last.step != want || last.outcome != StepOutcome::Deny {
                            return Err(format!("event {i}: {:?} ended at {}", decision.reason, last.step));
                        }
                        *st.denies.entry(want.into()).or_default() += 1;
                    }
                }
                let early = &protocol.steps[..protocol.steps.len().min(9) - 1];
                if early.iter().any(|s| s.outcome != StepOutcome::Ok) {
                    return Err(format!("event {i}: non-ok step before the end"));
                }
                if effective_trust.is_some_and(|t| !bounded(t)) || !bounded(decision.trust_at_decision) {
                    return Err(format!("event {i}: trust out of range"));
                }
            }
            TraceBody::Feedback { sides, .. } => {
                st.feedback += 1;
                if sides.len() != 2 {
                    return Err(format!("event {i}: {} feedback sides", sides.len()));
                }
                for s in sides {
                    if !(s.ex > -1.0 && s.ex < 1.0) || !bounded(s.qos) || !bounded(s.dtd) {
                        return Err(format!("event {i}: feedback out of range"));
                    }
                }
            }
            TraceBody::Epoch { entities, pairs, .. } => {
                if entities.iter().any(|e| !bounded(e.rp) || !bounded(e.td)) {
                    return Err(format!("event {i}: entity trust out of range"));
                }
                if pairs.iter().any(|p| !bounded(p.cross_dtd) || !bounded(p.cross_rp) || !bounded(p.cross_td)) {
                    return Err(format!("event {i}: pair trust out of range"));
                }
            }
        }
    }
    if st.permits != st.feedback {
        return Err(format!("{} permits but {} feedback pairs", st.permits, st.feedback));
    }
    if out.trajectories.iter().any(|p| !bounded(p.value)) {
        return Err("trajectory value out of range".into());
    }
    Ok(st)
}

fn grants(h: &RoleHierarchy, role: &RoleId, resource: &xdac::ResourceId) -> bool {
    h.effective_permissions(role)
        .unwrap()
        .iter()
        .any(|p: &PermissionId| &p.resource == resource)
}

/// The bundled two-domain world with `n` random requests, a random
/// inter-domain gate and, sometimes, the guest floors removed.
pub fn random_protocol_scenario(seed: u64, n: usize) -> Scenario {
    let mut sc = load("two_domain.json");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sc.seed = seed;
    sc.epochs = 1;
    sc.federation.interdomain_threshold = rng.random_range(-0.3..0.5);
    sc.federation.mutual_update = rng.random_bool(0.5);
    if rng.random_bool(0.5) {
        for c in &mut sc.correlations {
            c.rules.retain(|r| r.outer_role != "Guest");
        }
    }
    for d in &mut sc.domains {
        d.policy.permit_threshold = rng.random_range(-0.2..0.5);
        d.policy.resource_thresholds.clear();
    }
    let entities = sc.entities.clone();
    let mut schedule = Vec::new();
    while schedule.len() < n {
        if rng.random_bool(0.05) {
            schedule.push(Event::EpochAdvance { repeat: 1 });
            continue;
        }
        let e = &entities[rng.random_range(0..entities.len())];
        let role = e.roles[rng.random_range(0..e.roles.len())].clone();
        let home = e.id.domain.as_str();
        let cross = rng.random_bool(0.6);
        let host = if cross {
            sc.domains.iter().find(|d| d.id != home).unwrap()
        } else {
            sc.domains.iter().find(|d| d.id == home).unwrap()
        };
        let resources: Vec<&String> = host
            .providers
            .iter()
            .filter(|(_, who)| cross || **who != e.id.local_name)
            .map(|(r, _)| r)
            .collect();
        if resources.is_empty() {
            continue;
        }
        let resource = resources[rng.random_range(0..resources.len())].clone();
        schedule.push(if cross {
            Event::CrossRequest { requester: e.id.clone(), role, target: host.id.clone(), resource, repeat: 1 }
        } else {
            Event::LocalRequest { requester: e.id.clone(), role, resource, repeat: 1 }
        });
    }
    sc.schedule = schedule;
    sc
}

pub struct ConversionInstance {
    pub outer: RoleHierarchy,
    pub local: RoleHierarchy,
    pub set: CorrelationSet,
}

fn random_hierarchy(rng: &mut ChaCha8Rng, domain: &str) -> RoleHierarchy {
    let d = DomainId::new(domain).unwrap();
    let n = rng.random_range(1..=12usize);
    // the last role is the guest; names are shuffled so that tie-breaks
    // are not aligned with the topological order
    let mut names: Vec<String> = (0..n - 1).map(|i| format!("R{:03}{:02}", rng.random_range(0..1000), i)).collect();
    names.push("Guest".into());
    let ids: Vec<RoleId> = names.iter().map(|s| RoleId::new(&d, s.clone()).unwrap()).collect();
    let mut edges = BTreeSet::new();
    for j in 0..n - 1 {
        for i in 0..j {
            if rng.random_bool(0.3) {
                edges.insert((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    // every role without children sits directly above the guest
    for i in 0..n - 1 {
        if !edges.iter().any(|(p, _)| p == &ids[i]) {
            edges.insert((ids[i].clone(), ids[n - 1].clone()));
        }
    }
    let h = RoleHierarchy::from_parts(
        d,
        ids.iter().cloned().collect(),
        edges,
        BTreeMap::new(),
        Some(ids[n - 1].clone()),
    );
    assert!(h.validate().is_empty(), "{:?}", h.validate());
    h
}

pub fn random_conversion_instance(rng: &mut ChaCha8Rng) -> ConversionInstance {
    let outer = random_hierarchy(rng, "OUT");
    let local = random_hierarchy(rng, "LOC");
    let o: Vec<&RoleId> = outer.roles().collect();
    let l: Vec<&RoleId> = local.roles().collect();
    let k = rng.random_range(0..=10usize);
    let mut corr = Vec::new();
    for _ in 0..k {
        corr.push(Correlation {
            outer_role: o[rng.random_range(0..o.len())].clone(),
            local_role: l[rng.random_range(0..l.len())].clone(),
            kind: if rng.random_bool(0.5) { CorrelationKind::Transitive } else { CorrelationKind::NonTransitive },
        });
    }
    // the guest floor shows up often enough to exercise the fallback
    if rng.random_bool(0.4) {
        corr.push(Correlation {
            outer_role: outer.guest().unwrap().clone(),
            local_role: local.guest().unwrap().clone(),
            kind: if rng.random_bool(0.5) { CorrelationKind::Transitive } else { CorrelationKind::NonTransitive },
        });
    }
    let set = CorrelationSet::new(&outer, &local, corr).unwrap();
    ConversionInstance { outer, local, set }
}

/// Reflexive-transitive closure by Floyd-Warshall over the edge list.
pub fn closure(h: &RoleHierarchy) -> (Vec<RoleId>, Vec<Vec<bool>>) {
    let roles: Vec<RoleId> = h.roles().cloned().collect();
    let ix = |r: &RoleId| roles.iter().position(|x| x == r).unwrap();
    let n = roles.len();
    let mut m = vec![vec![false; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = true;
    }
    for (p, c) in h.edges() {
        m[ix(p)][ix(c)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if m[i][k] && m[k][j] {
                    m[i][j] = true;
                }
            }
        }
    }
    (roles, m)
}

#[derive(Debug, PartialEq)]
pub struct OracleResult {
    pub local_role: Option<RoleId>,
    pub candidates: BTreeSet<RoleId>,
    pub tie_broken: bool,
    pub guest_fallback: bool,
}

/// Enumerates every local role and keeps the obtainable, undominated ones.
pub fn oracle_convert(outer_role: &RoleId, inst: &ConversionInstance) -> OracleResult {
    let (oroles, osen) = closure(&inst.outer);
    let (lroles, lsen) = closure(&inst.local);
    let oi = |r: &RoleId| oroles.iter().position(|x| x == r).unwrap();
    let li = |r: &RoleId| lroles.iter().position(|x| x == r).unwrap();
    let me = oi(outer_role);
    let mut candidates = BTreeSet::new();
    for c in inst.set.correlations() {
        let other = oi(&c.outer_role);
        let own = other == me;
        let inherited = c.kind == CorrelationKind::Transitive && other != me && osen[me][other];
        if own || inherited {
            candidates.insert(c.local_role.clone());
        }
    }
    if candidates.is_empty() {
        let floor = inst.set.correlations().any(|c| {
            Some(&c.outer_role) == inst.outer.guest() && Some(&c.local_role) == inst.local.guest()
        });
        // a Default set is exactly this floor, so checking the floor covers it
        let fallback = floor;
        let guest = inst.local.guest().cloned();
        return OracleResult {
            local_role: if fallback { guest.clone() } else { None },
            candidates: if fallback { guest.into_iter().collect() } else { BTreeSet::new() },
            tie_broken: false,
            guest_fallback: fallback,
        };
    }
    let mut maxima = Vec::new();
    for r in &lroles {
        if !candidates.contains(r) {
            continue;
        }
        let dominated = candidates.iter().any(|d| d != r && lsen[li(d)][li(r)]);
        if !dominated {
            maxima.push(r.clone());
        }
    }
    OracleResult {
        local_role: maxima.first().cloned(),
        candidates,
        tie_broken: maxima.len() > 1,
        guest_fallback: false,
    }
}
