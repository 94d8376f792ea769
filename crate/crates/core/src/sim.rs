//! Scenario files and the deterministic simulator.
//!
//! A scenario declares domains (roles, policy, resource providers), entities
//! with behavior profiles, correlation sets, optional pre-run rating history
//! and a schedule of `local_request`, `cross_request` and `epoch_advance`
//! events. [`run`] replays the schedule `epochs` times and returns the event
//! trace plus trust trajectories sampled at start and after every epoch.
//!
//! Every sampled experience rating is a pure function of
//! `(seed, event index, slot)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversion::{Correlation, CorrelationKind, CorrelationSet};
use crate::crossdomain::DomainPairTrust;
use crate::federation::{
    CrossDomainRequest, Federation, FederationConfig, FederationError, ProtocolTrace,
};
use crate::ids::{DomainId, EntityId, PermissionId, ResourceId, RoleId};
use crate::policy::{AccessRequest, Aac, Credential, Decision, PipelineTrace, PolicyDatabase, PolicyError, SigningKey};
use crate::roles::RoleHierarchy;
use crate::trust::{ExperienceRating, PairwiseTrust};

/// Largest magnitude a sampled rating may take.
const EX_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorProfile {
    /// `mean ± spread`, uniformly, clamped just inside (-1, 1).
    Uniform { mean: f64, spread: f64 },
    /// `+amplitude` for `period` interactions, then `-amplitude`, and so on.
    Oscillating { amplitude: f64, period: u64 },
}

impl BehaviorProfile {
    pub fn honest() -> Self {
        BehaviorProfile::Uniform { mean: 0.8, spread: 0.1 }
    }

    pub fn malicious() -> Self {
        BehaviorProfile::Uniform { mean: -0.6, spread: 0.2 }
    }

    pub fn oscillating() -> Self {
        BehaviorProfile::Oscillating { amplitude: 0.7, period: 5 }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "honest" => Some(Self::honest()),
            "malicious" => Some(Self::malicious()),
            "oscillating" => Some(Self::oscillating()),
            _ => None,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match *self {
            BehaviorProfile::Uniform { mean, spread } => {
                if !(mean > -1.0 && mean < 1.0) {
                    out.push(format!("mean = {mean} must lie in (-1, 1)"));
                }
                if !(0.0..=2.0).contains(&spread) {
                    out.push(format!("spread = {spread} must lie in [0, 2]"));
                }
            }
            BehaviorProfile::Oscillating { amplitude, period } => {
                if !(amplitude > 0.0 && amplitude < 1.0) {
                    out.push(format!("amplitude = {amplitude} must lie in (0, 1)"));
                }
                if period == 0 {
                    out.push("period must be at least 1".into());
                }
            }
        }
        out
    }

    /// Rating produced when an entity with this profile is evaluated at
    /// `event`. `slot` separates the draws made within one event.
    pub fn sample(&self, seed: u64, event: u64, slot: u64) -> ExperienceRating {
        let v = match *self {
            BehaviorProfile::Uniform { mean, spread } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(event);
                rng.set_word_pos(u128::from(slot) * 16);
                let u: f64 = rng.random();
                mean + spread * (2.0 * u - 1.0)
            }
            BehaviorProfile::Oscillating { amplitude, period } => {
                if (event / period.max(1)) % 2 == 0 {
                    amplitude
                } else {
                    -amplitude
                }
            }
        };
        ExperienceRating::new(v.clamp(-EX_LIMIT, EX_LIMIT)).expect("clamped into range")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleSpec {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
    /// `"action:resource"` strings.
    #[serde(default)]
    pub permissions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: String,
    pub roles: Vec<RoleSpec>,
    pub guest: Option<String>,
    #[serde(default)]
    pub policy: PolicyDatabase,
    /// resource → local name of the entity serving it
    #[serde(default)]
    pub providers: BTreeMap<String, String>,
}

fn default_profile() -> String {
    "honest".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub id: EntityId,
    pub secret: String,
    #[serde(default)]
    pub roles: Vec<String>,
    #[serde(default = "default_profile")]
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub outer_role: String,
    pub local_role: String,
    pub kind: CorrelationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub outer: String,
    pub local: String,
    pub rules: Vec<RuleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTrustSpec {
    pub observer: String,
    pub observed: String,
    pub cross_dtd: f64,
    pub cross_rp: f64,
}

fn one() -> u32 {
    1
}

/// Rating applied in the rater's home ledger before the run starts. A
/// ratee from another domain stands for an earlier visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub rater: EntityId,
    pub ratee: EntityId,
    pub ex: f64,
    #[serde(default = "one")]
    pub repeat: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    LocalRequest {
        requester: EntityId,
        role: String,
        resource: String,
        #[serde(default = "one")]
        repeat: u32,
    },
    CrossRequest {
        requester: EntityId,
        role: String,
        target: String,
        resource: String,
        #[serde(default = "one")]
        repeat: u32,
    },
    EpochAdvance {
        #[serde(default = "one")]
        repeat: u32,
    },
}

impl Event {
    fn repeat(&self) -> u32 {
        match self {
            Event::LocalRequest { repeat, .. }
            | Event::CrossRequest { repeat, .. }
            | Event::EpochAdvance { repeat } => *repeat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    /// How many times the schedule is replayed.
    #[serde(default = "one")]
    pub epochs: u32,
    #[serde(default)]
    pub federation: FederationConfig,
    pub domains: Vec<DomainSpec>,
    #[serde(default)]
    pub profiles: BTreeMap<String, BehaviorProfile>,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub correlations: Vec<CorrelationSpec>,
    #[serde(default)]
    pub pair_trust: Vec<PairTrustSpec>,
    #[serde(default)]
    pub history: Vec<HistorySpec>,
    #[serde(default)]
    pub schedule: Vec<Event>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn profile(&self, name: &str) -> Option<BehaviorProfile> {
        self.profiles
            .get(name)
            .cloned()
            .or_else(|| BehaviorProfile::builtin(name))
    }

    fn domain_spec(&self, id: &str) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.id == id)
    }

    fn entity_spec(&self, id: &EntityId) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| &e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioViolation {
    /// Path into the scenario, e.g. `schedule[3]`.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario ({} violation(s)); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidScenario(Vec<ScenarioViolation>),
    #[error("bad identifier: {0}")]
    BadIdentifier(String),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Default)]
struct Violations(Vec<ScenarioViolation>);

impl Violations {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(ScenarioViolation {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Builds the hierarchy of one domain spec, reporting every problem.
pub fn build_hierarchy(spec: &DomainSpec) -> Result<RoleHierarchy, Vec<String>> {
    let domain = DomainId::new(spec.id.clone()).map_err(|e| vec![e.to_string()])?;
    let mut errors = Vec::new();
    let mut role = |name: &str| match RoleId::new(&domain, name) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let mut roles = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut permissions: BTreeMap<RoleId, BTreeSet<PermissionId>> = BTreeMap::new();
    let mut bad_perms = Vec::new();
    for r in &spec.roles {
        let Some(id) = role(&r.name) else { continue };
        if !roles.insert(id.clone()) {
            bad_perms.push(format!("role {} declared twice", r.name));
        }
        for p in &r.parents {
            if let Some(parent) = role(p) {
                edges.insert((parent, id.clone()));
            }
        }
        for p in &r.permissions {
            match p.split_once(':').map(|(a, res)| PermissionId::new(a, res)) {
                Some(Ok(perm)) => {
                    permissions.entry(id.clone()).or_default().insert(perm);
                }
                _ => bad_perms.push(format!("permission {p:?} is not action:resource")),
            }
        }
    }
    let guest = spec.guest.as_deref().and_then(&mut role);
    errors.extend(bad_perms);
    let h = RoleHierarchy::from_parts(domain, roles, edges, permissions, guest);
    errors.extend(h.validate().iter().map(|v| v.to_string()));
    if errors.is_empty() {
        Ok(h)
    } else {
        Err(errors)
    }
}

fn build_correlations(
    spec: &CorrelationSpec,
    outer: &RoleHierarchy,
    local: &RoleHierarchy,
) -> Result<CorrelationSet, String> {
    let mut rules = Vec::new();
    for r in &spec.rules {
        let o = RoleId::new(outer.domain(), r.outer_role.clone()).map_err(|e| e.to_string())?;
        let l = RoleId::new(local.domain(), r.local_role.clone()).map_err(|e| e.to_string())?;
        rules.push(Correlation { outer_role: o, local_role: l, kind: r.kind });
    }
    CorrelationSet::new(outer, local, rules).map_err(|e| e.to_string())
}

/// Every problem that would stop the scenario from running; empty when it
/// is well formed.
pub fn validate_scenario(sc: &Scenario) -> Vec<ScenarioViolation> {
    let mut v = Violations::default();
    for m in sc.federation.violations() {
        v.push("federation", m);
    }
    for (name, p) in &sc.profiles {
        for m in p.violations() {
            v.push(format!("profiles.{name}"), m);
        }
    }

    let mut hierarchies: BTreeMap<&str, RoleHierarchy> = BTreeMap::new();
    for (i, d) in sc.domains.iter().enumerate() {
        let loc = format!("domains[{i}]");
        if sc.domains.iter().filter(|o| o.id == d.id).count() > 1 {
            v.push(&loc, format!("domain {} declared twice", d.id));
        }
        match build_hierarchy(d) {
            Ok(h) => {
                hierarchies.insert(&d.id, h);
            }
            Err(errs) => errs.into_iter().for_each(|m| v.push(format!("{loc}.roles"), m)),
        }
        for m in d.policy.violations() {
            v.push(format!("{loc}.policy"), m);
        }
        for (res, who) in &d.providers {
            let declared = sc
                .entities
                .iter()
                .any(|e| e.id.domain.as_str() == d.id && e.id.local_name == *who);
            if !declared {
                v.push(format!("{loc}.providers.{res}"), format!("undeclared entity {}/{who}", d.id));
            }
        }
    }

    let role_in = |domain: &str, name: &str| {
        hierarchies
            .get(domain)
            .is_some_and(|h| h.role(name).is_some())
    };

    for (i, e) in sc.entities.iter().enumerate() {
        let loc = format!("entities[{i}]");
        if sc.domain_spec(e.id.domain.as_str()).is_none() {
            v.push(&loc, format!("undeclared domain {}", e.id.domain));
        }
        if sc.entities.iter().filter(|o| o.id == e.id).count() > 1 {
            v.push(&loc, format!("entity {} declared twice", e.id));
        }
        if e.secret.is_empty() {
            v.push(&loc, "secret must be non-empty");
        }
        for r in &e.roles {
            if !role_in(e.id.domain.as_str(), r) {
                v.push(&loc, format!("unknown role {}/{r}", e.id.domain));
            }
        }
        if sc.profile(&e.profile).is_none() {
            v.push(&loc, format!("unknown profile {}", e.profile));
        }
    }

    for (i, c) in sc.correlations.iter().enumerate() {
        let loc = format!("correlations[{i}]");
        if sc.correlations[..i]
            .iter()
            .any(|o| o.outer == c.outer && o.local == c.local)
        {
            v.push(&loc, format!("second correlation set for {} -> {}", c.outer, c.local));
        }
        match (hierarchies.get(c.outer.as_str()), hierarchies.get(c.local.as_str())) {
            (Some(o), Some(l)) => {
                if let Err(m) = build_correlations(c, o, l) {
                    v.push(&loc, m);
                }
            }
            _ => v.push(&loc, format!("undeclared or invalid domain in {} -> {}", c.outer, c.local)),
        }
    }

    for (i, p) in sc.pair_trust.iter().enumerate() {
        let loc = format!("pair_trust[{i}]");
        if sc.domain_spec(&p.observer).is_none() || sc.domain_spec(&p.observed).is_none() {
            v.push(&loc, "undeclared domain");
        }
        if p.observer == p.observed {
            v.push(&loc, "observer and observed must differ");
        }
        for (n, x) in [("cross_dtd", p.cross_dtd), ("cross_rp", p.cross_rp)] {
            if !(-1.0..=1.0).contains(&x) {
                v.push(&loc, format!("{n} = {x} must lie in [-1, 1]"));
            }
        }
    }

    for (i, h) in sc.history.iter().enumerate() {
        let loc = format!("history[{i}]");
        for who in [&h.rater, &h.ratee] {
            if sc.entity_spec(who).is_none() {
                v.push(&loc, format!("undeclared entity {who}"));
            }
        }
        if h.rater == h.ratee {
            v.push(&loc, "an entity cannot rate itself");
        }
        if let Err(e) = ExperienceRating::new(h.ex) {
            v.push(&loc, e.to_string());
        }
        if h.repeat == 0 {
            v.push(&loc, "repeat must be at least 1");
        }
    }

    for (i, ev) in sc.schedule.iter().enumerate() {
        let loc = format!("schedule[{i}]");
        if ev.repeat() == 0 {
            v.push(&loc, "repeat must be at least 1");
        }
        let (requester, role, host, resource) = match ev {
            Event::EpochAdvance { .. } => continue,
            Event::LocalRequest { requester, role, resource, .. } => {
                (requester, role, requester.domain.as_str(), resource)
            }
            Event::CrossRequest { requester, role, target, resource, .. } => {
                if target == requester.domain.as_str() {
                    v.push(&loc, "cross request must target another domain");
                }
                if sc.domain_spec(target).is_none() {
                    v.push(&loc, format!("undeclared domain {target}"));
                }
                (requester, role, target.as_str(), resource)
            }
        };
        match sc.entity_spec(requester) {
            None => v.push(&loc, format!("undeclared entity {requester}")),
            Some(e) if !e.roles.contains(role) => {
                v.push(&loc, format!("{requester} does not hold {role}"))
            }
            Some(_) => {}
        }
        if let Some(d) = sc.domain_spec(host) {
            match d.providers.get(resource) {
                None => v.push(&loc, format!("resource {resource} has no provider in {host}")),
                Some(p) if requester.domain.as_str() == host && *p == requester.local_name => {
                    v.push(&loc, format!("{requester} provides {resource} itself"))
                }
                Some(_) => {}
            }
        }
    }
    v.0
}

/// One rating recorded in a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSide {
    pub ledger: DomainId,
    pub rater: EntityId,
    pub ratee: EntityId,
    pub ex: f64,
    pub k: u64,
    pub qos: f64,
    pub dtd: f64,
}

impl FeedbackSide {
    fn new(ledger: &DomainId, p: &PairwiseTrust) -> Self {
        Self {
            ledger: ledger.clone(),
            rater: p.rater.clone(),
            ratee: p.ratee.clone(),
            ex: p.last_ex,
            k: p.k,
            qos: p.qos,
            dtd: p.dtd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySnapshot {
    pub domain: DomainId,
    pub entity: EntityId,
    pub rp: f64,
    pub td: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum TraceBody {
    LocalDecision {
        requester: EntityId,
        role: RoleId,
        resource: ResourceId,
        decision: Decision,
        stages: PipelineTrace,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        certificate: Option<String>,
    },
    CrossDecision {
        requester: EntityId,
        outer_role: RoleId,
        target: DomainId,
        resource: ResourceId,
        converted_role: Option<RoleId>,
        effective_trust: Option<f64>,
        decision: Decision,
        protocol: ProtocolTrace,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        certificate: Option<String>,
    },
    /// Both sides of one permitted interaction.
    Feedback {
        request_id: String,
        sides: Vec<FeedbackSide>,
    },
    Epoch {
        epoch: u64,
        entities: Vec<EntitySnapshot>,
        pairs: Vec<DomainPairTrust>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub body: TraceBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    EntityTd,
    EntityRp,
    PairTd,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::EntityTd => "entity_td",
            SeriesKind::EntityRp => "entity_rp",
            SeriesKind::PairTd => "pair_td",
        }
    }
}

/// One sample of a trust time series. For entity series `domain` is the
/// ledger holding the value; for pair series it is the observer and
/// `subject` the observed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: u64,
    pub kind: SeriesKind,
    pub domain: String,
    pub subject: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOutput {
    pub trace: Vec<TraceEvent>,
    pub trajectories: Vec<TrajectoryPoint>,
}

/// A scenario loaded into a live federation.
pub struct Simulation {
    seed: u64,
    federation: Federation,
    profiles: BTreeMap<EntityId, BehaviorProfile>,
    /// Requests processed so far; doubles as the logical clock.
    tick: u64,
    epoch: u64,
    out: RunOutput,
}

impl Simulation {
    /// Validates `sc`, builds every domain, applies the history and, when
    /// there was any, one epoch so that it shows in trust degrees. Pair
    /// trust is then derived from the ledgers; explicit `pair_trust`
    /// entries override it.
    pub fn new(sc: &Scenario) -> Result<Self, SimError> {
        let violations = validate_scenario(sc);
        if !violations.is_empty() {
            return Err(SimError::InvalidScenario(violations));
        }
        let mut federation = Federation::new(sc.federation.clone(), SigningKey::derive("federation", sc.seed))?;
        let mut hierarchies = BTreeMap::new();
        for d in &sc.domains {
            let h = build_hierarchy(d).expect("validated");
            hierarchies.insert(d.id.clone(), h.clone());
            let mut aac = Aac::new(h, d.policy.clone(), SigningKey::derive(&d.id, sc.seed))?;
            for e in sc.entities.iter().filter(|e| e.id.domain.as_str() == d.id) {
                aac.register_entity(e.id.clone(), &e.secret)?;
                for r in &e.roles {
                    aac.assign_role(&e.id, &RoleId::new(aac.domain(), r.clone()).expect("validated"))?;
                }
                aac.authenticate(&Credential { entity: e.id.clone(), secret: e.secret.clone() })?;
            }
            for (res, who) in &d.providers {
                let provider = EntityId::new(aac.domain(), who.clone()).expect("validated");
                aac.register_provider(ResourceId::new(res.clone()), provider)?;
            }
            federation.register_domain(aac)?;
        }
        for c in &sc.correlations {
            let cs = build_correlations(c, &hierarchies[&c.outer], &hierarchies[&c.local]).expect("validated");
            federation.set_correlations(cs)?;
        }
        for h in &sc.history {
            let aac = federation.domain_mut(&h.rater.domain)?;
            let ex = ExperienceRating::new(h.ex).expect("validated");
            aac.ledger_mut().admit(&h.ratee);
            for _ in 0..h.repeat {
                aac.ledger_mut()
                    .record_experience(&h.rater, &h.ratee, ex)
                    .map_err(PolicyError::from)?;
            }
        }
        if !sc.history.is_empty() {
            federation.advance_epoch();
        }
        let ids: Vec<DomainId> = federation.domains().cloned().collect();
        for x in &ids {
            for y in ids.iter().filter(|y| *y != x) {
                federation.update_pair_trust(x, y)?;
            }
        }
        for p in &sc.pair_trust {
            let (o, d) = (DomainId::new(p.observer.clone()).expect("validated"), DomainId::new(p.observed.clone()).expect("validated"));
            federation.set_pair_trust(&o, &d, p.cross_dtd, p.cross_rp)?;
        }
        let profiles = sc
            .entities
            .iter()
            .map(|e| (e.id.clone(), sc.profile(&e.profile).expect("validated")))
            .collect();
        let mut sim = Self {
            seed: sc.seed,
            federation,
            profiles,
            tick: 0,
            epoch: 0,
            out: RunOutput::default(),
        };
        sim.sample_trajectories();
        Ok(sim)
    }

    pub fn federation(&self) -> &Federation {
        &self.federation
    }

    pub fn federation_mut(&mut self) -> &mut Federation {
        &mut self.federation
    }

    pub fn output(&self) -> &RunOutput {
        &self.out
    }

    pub fn into_output(self) -> RunOutput {
        self.out
    }

    fn emit(&mut self, body: TraceBody) {
        let seq = self.out.trace.len() as u64;
        self.out.trace.push(TraceEvent { seq, body });
    }

    /// Rating an entity earns at the current tick.
    fn rating_for(&self, ratee: &EntityId, slot: u64) -> ExperienceRating {
        let profile = self.profiles.get(ratee).cloned().unwrap_or_else(BehaviorProfile::honest);
        profile.sample(self.seed, self.tick, slot)
    }

    fn sample_trajectories(&mut self) {
        let epoch = self.epoch;
        for aac in self.federation.domains().map(|d| self.federation.domain(d).expect("registered")) {
            let view = aac.ledger().view();
            for (entity, td) in &view.domain_trust {
                let rp = view.reputation(entity).unwrap_or_default();
                for (kind, value) in [(SeriesKind::EntityTd, *td), (SeriesKind::EntityRp, rp)] {
                    self.out.trajectories.push(TrajectoryPoint {
                        epoch,
                        kind,
                        domain: aac.domain().to_string(),
                        subject: entity.to_string(),
                        value,
                    });
                }
            }
        }
        for p in self.federation.pair_trust_matrix() {
            self.out.trajectories.push(TrajectoryPoint {
                epoch,
                kind: SeriesKind::PairTd,
                domain: p.observer.to_string(),
                subject: p.observed.to_string(),
                value: p.cross_td,
            });
        }
    }

    pub fn local_request(&mut self, requester: &EntityId, role: &str, resource: &str) -> Result<(), SimError> {
        self.tick += 1;
        self.federation.set_clock(self.tick);
        let request_id = format!("q{}", self.tick);
        let aac = self.federation.domain_mut(&requester.domain)?;
        let req = AccessRequest {
            request_id: request_id.clone(),
            requester: requester.clone(),
            role: RoleId::new(aac.domain(), role).map_err(|e| SimError::BadIdentifier(e.to_string()))?,
            resource: ResourceId::new(resource),
        };
        let auth = aac.authorize_local(&req)?;
        let provider = aac.provider_of(&req.resource).cloned();
        let permitted = auth.decision.is_permit();
        self.emit(TraceBody::LocalDecision {
            requester: req.requester.clone(),
            role: req.role.clone(),
            resource: req.resource.clone(),
            decision: auth.decision,
            stages: auth.trace,
            certificate: auth.certificate.map(|c| c.digest()),
        });
        if let (true, Some(provider)) = (permitted, provider) {
            let on_provider = self.rating_for(&provider, 0);
            let on_user = self.rating_for(requester, 1);
            let aac = self.federation.domain_mut(&requester.domain)?;
            let a = aac.post_interaction_feedback(requester, &provider, on_provider)?;
            let b = aac.post_interaction_feedback(&provider, requester, on_user)?;
            let d = requester.domain.clone();
            self.emit(TraceBody::Feedback {
                request_id,
                sides: vec![FeedbackSide::new(&d, &a), FeedbackSide::new(&d, &b)],
            });
        }
        Ok(())
    }

    pub fn cross_request(&mut self, requester: &EntityId, role: &str, target: &str, resource: &str) -> Result<(), SimError> {
        self.tick += 1;
        self.federation.set_clock(self.tick);
        let bad = |e: crate::ids::IdError| SimError::BadIdentifier(e.to_string());
        let target = DomainId::new(target).map_err(bad)?;
        let outer_role = RoleId::new(&requester.domain, role).map_err(bad)?;
        let req = CrossDomainRequest::new(
            &format!("x{}", self.tick),
            requester.clone(),
            outer_role,
            target.clone(),
            ResourceId::new(resource),
        );
        // slot 0: host provider rates the visitor, slot 1: visitor rates provider
        let (seed, tick) = (self.seed, self.tick);
        let profiles = &self.profiles;
        let mut feedback = |rater: &EntityId, ratee: &EntityId| {
            let slot = u64::from(rater.domain != target);
            let profile = profiles.get(ratee).cloned().unwrap_or_else(BehaviorProfile::honest);
            Some(profile.sample(seed, tick, slot))
        };
        let out = self.federation.request_cross_domain_access(&req, &mut feedback)?;
        self.emit(TraceBody::CrossDecision {
            requester: req.requester.clone(),
            outer_role: req.outer_role.clone(),
            target: req.target_domain.clone(),
            resource: req.resource.clone(),
            converted_role: out.conversion.as_ref().and_then(|c| c.local_role.clone()),
            effective_trust: out.effective_trust,
            decision: out.decision,
            protocol: out.trace,
            certificate: out.certificate.map(|c| c.digest()),
        });
        if let Some(fb) = out.feedback {
            self.emit(TraceBody::Feedback {
                request_id: req.request_id,
                sides: vec![
                    FeedbackSide::new(&req.target_domain, &fb.host_side),
                    FeedbackSide::new(&req.home_domain, &fb.home_side),
                ],
            });
        }
        Ok(())
    }

    pub fn advance_epoch(&mut self) {
        self.federation.advance_epoch();
        self.epoch += 1;
        let mut entities = Vec::new();
        for d in self.federation.domains() {
            let view = self.federation.domain(d).expect("registered").ledger().view();
            for (entity, td) in &view.domain_trust {
                entities.push(EntitySnapshot {
                    domain: d.clone(),
                    entity: entity.clone(),
                    rp: view.reputation(entity).unwrap_or_default(),
                    td: *td,
                });
            }
        }
        let pairs = self.federation.pair_trust_matrix().cloned().collect();
        self.emit(TraceBody::Epoch { epoch: self.epoch, entities, pairs });
        self.sample_trajectories();
    }

    pub fn apply(&mut self, ev: &Event) -> Result<(), SimError> {
        for _ in 0..ev.repeat() {
            match ev {
                Event::LocalRequest { requester, role, resource, .. } => {
                    self.local_request(requester, role, resource)?
                }
                Event::CrossRequest { requester, role, target, resource, .. } => {
                    self.cross_request(requester, role, target, resource)?
                }
                Event::EpochAdvance { .. } => self.advance_epoch(),
            }
        }
        Ok(())
    }

    /// Replays the schedule `sc.epochs` times.
    pub fn replay(&mut self, sc: &Scenario) -> Result<(), SimError> {
        for _ in 0..sc.epochs {
            for ev in &sc.schedule {
                self.apply(ev)?;
            }
        }
        Ok(())
    }
}

pub fn run(sc: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(sc)?;
    sim.replay(sc)?;
    Ok(sim.into_output())
}

/// One JSON object per line, newline terminated.
pub fn trace_jsonl(trace: &[TraceEvent]) -> String {
    let mut s = String::new();
    for ev in trace {
        s.push_str(&serde_json::to_string(ev).expect("trace events serialize"));
        s.push('\n');
    }
    s
}

pub fn trajectories_csv(points: &[TrajectoryPoint]) -> String {
    let mut s = String::from("epoch,kind,domain,subject,value\n");
    for p in points {
        s.push_str(&format!("{},{},{},{},{}\n", p.epoch, p.kind.as_str(), p.domain, p.subject, p.value));
    }
    s
}
