//! The Advanced Authentication and Authorization Center (AAAC).
//!
//! Holds every domain's [`Aac`], the matrix of domain-pair trust and the
//! correlation sets, and runs the twelve-step cross-domain protocol:
//!
//! | step | action |
//! |------|--------|
//! | i    | requester holds the outer role at home |
//! | ii   | home trust of the requester looked up (advisory) |
//! | iii  | host trust in the home domain gated; inter-domain certificate |
//! | iv   | request forwarded to the host AAC |
//! | v    | outer role converted to a host role |
//! | vi   | certificate linked to the converted role |
//! | vii  | effective trust mapped into the host |
//! | viii | host policy evaluated |
//! | ix   | result returned, host certificate on permit |
//! | x    | provider rates visitor in the host ledger |
//! | xi   | visitor rates provider in the home ledger |
//! | xii  | domain-pair trust recomputed |

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversion::{convert_role, ConversionError, ConversionResult, CorrelationSet};
use crate::crossdomain::{recompute_pair, CrossError, DomainPairTrust};
use crate::ids::{DomainId, EntityId, ResourceId, RoleId};
use crate::policy::{short_digest, Aac, Certificate, Decision, DenyReason, PolicyError, SigningKey};
use crate::trust::{check_signed_unit, ExperienceRating, PairwiseTrust};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("domain {0} is already registered")]
    DuplicateDomain(DomainId),
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("{entity} does not hold {role}")]
    RoleNotHeld { entity: EntityId, role: RoleId },
    #[error("home and target domain are both {0}")]
    SameDomain(DomainId),
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Conversion(#[from] ConversionError),
    #[error(transparent)]
    Cross(#[from] CrossError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    /// Step iii passes when TD(host, home) is at least this value.
    pub interdomain_threshold: f64,
    /// Recompute both directions at step xii, not only the host's view.
    pub mutual_update: bool,
    /// Validity of inter-domain certificates, in logical ticks.
    pub certificate_ttl: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            interdomain_threshold: 0.0,
            mutual_update: false,
            certificate_ttl: 100,
        }
    }
}

impl FederationConfig {
    pub fn violations(&self) -> Vec<String> {
        check_signed_unit("interdomain_threshold", self.interdomain_threshold)
            .err()
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossDomainRequest {
    pub request_id: String,
    pub requester: EntityId,
    pub home_domain: DomainId,
    pub target_domain: DomainId,
    pub outer_role: RoleId,
    pub resource: ResourceId,
}

impl CrossDomainRequest {
    /// Home domain taken from the requester.
    pub fn new(request_id: &str, requester: EntityId, outer_role: RoleId, target: DomainId, resource: ResourceId) -> Self {
        Self {
            request_id: request_id.to_string(),
            home_domain: requester.domain.clone(),
            requester,
            target_domain: target,
            outer_role,
            resource,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
    XI,
    XII,
}

impl Step {
    pub const ALL: [Step; 12] = [
        Step::I,
        Step::II,
        Step::III,
        Step::IV,
        Step::V,
        Step::VI,
        Step::VII,
        Step::VIII,
        Step::IX,
        Step::X,
        Step::XI,
        Step::XII,
    ];

    pub fn label(self) -> &'static str {
        ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "xii"][self as usize]
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    Deny,
    /// Step xii skipped because a feedback side was missing.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: String,
    pub outcome: StepOutcome,
    pub detail: String,
    /// Digest of the step's payload.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub request_id: String,
    pub steps: Vec<StepRecord>,
}

impl ProtocolTrace {
    fn push(&mut self, step: Step, outcome: StepOutcome, detail: String) {
        let digest = short_digest(&format!("{}|{}|{}", self.request_id, step, detail));
        self.steps.push(StepRecord {
            step: step.label().to_string(),
            outcome,
            detail,
            digest,
        });
    }

    pub fn labels(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.step.as_str()).collect()
    }

    pub fn last_step(&self) -> Option<&str> {
        self.steps.last().map(|s| s.step.as_str())
    }
}

/// Supplies the two post-interaction ratings of a permitted cross request.
pub trait FeedbackSource {
    /// Rating of `ratee` by `rater`; `None` withholds it.
    fn rate(&mut self, rater: &EntityId, ratee: &EntityId) -> Option<ExperienceRating>;
}

impl<F> FeedbackSource for F
where
    F: FnMut(&EntityId, &EntityId) -> Option<ExperienceRating>,
{
    fn rate(&mut self, rater: &EntityId, ratee: &EntityId) -> Option<ExperienceRating> {
        self(rater, ratee)
    }
}

/// Withholds every rating.
pub struct NoFeedback;

impl FeedbackSource for NoFeedback {
    fn rate(&mut self, _: &EntityId, _: &EntityId) -> Option<ExperienceRating> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    /// Host provider's rating of the visitor, in the host ledger.
    pub host_side: PairwiseTrust,
    /// Visitor's rating of the provider, in the home ledger.
    pub home_side: PairwiseTrust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossOutcome {
    pub decision: Decision,
    pub trace: ProtocolTrace,
    pub conversion: Option<ConversionResult>,
    pub effective_trust: Option<f64>,
    pub certificate: Option<Certificate>,
    pub feedback: Option<Feedback>,
    pub updated_pairs: Vec<DomainPairTrust>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    config: FederationConfig,
    domains: BTreeMap<DomainId, Aac>,
    /// (observer, observed)
    pair_trust: BTreeMap<(DomainId, DomainId), DomainPairTrust>,
    /// (outer, local)
    correlation_sets: BTreeMap<(DomainId, DomainId), CorrelationSet>,
    key: SigningKey,
    clock: u64,
}

impl Federation {
    pub fn new(config: FederationConfig, key: SigningKey) -> Result<Self, FederationError> {
        if let Some(v) = config.violations().into_iter().next() {
            return Err(FederationError::InvalidConfig(v));
        }
        Ok(Self {
            config,
            domains: BTreeMap::new(),
            pair_trust: BTreeMap::new(),
            correlation_sets: BTreeMap::new(),
            key,
            clock: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainId> {
        self.domains.keys()
    }

    pub fn domain(&self, id: &DomainId) -> Result<&Aac, FederationError> {
        self.domains
            .get(id)
            .ok_or_else(|| FederationError::UnknownDomain(id.clone()))
    }

    pub fn domain_mut(&mut self, id: &DomainId) -> Result<&mut Aac, FederationError> {
        self.domains
            .get_mut(id)
            .ok_or_else(|| FederationError::UnknownDomain(id.clone()))
    }

    fn neutral_pair(&self, observer: &Aac, observed: &DomainId) -> DomainPairTrust {
        let policy = observer.policy();
        DomainPairTrust::neutral(
            observer.domain().clone(),
            observed.clone(),
            policy.trust_params.initial_rp,
            policy.cross_params.delta,
        )
    }

    /// Joins a domain; pair trust with every existing domain starts neutral
    /// in both directions.
    pub fn register_domain(&mut self, aac: Aac) -> Result<(), FederationError> {
        let id = aac.domain().clone();
        if self.domains.contains_key(&id) {
            return Err(FederationError::DuplicateDomain(id));
        }
        let mut fresh = Vec::new();
        for (other_id, other) in &self.domains {
            fresh.push(self.neutral_pair(&aac, other_id));
            fresh.push(self.neutral_pair(other, &id));
        }
        for p in fresh {
            self.pair_trust.insert((p.observer.clone(), p.observed.clone()), p);
        }
        self.domains.insert(id, aac);
        Ok(())
    }

    /// Installs the correlations from `cs.outer_domain()` into
    /// `cs.local_domain()`, replacing any earlier set for that direction.
    pub fn set_correlations(&mut self, cs: CorrelationSet) -> Result<(), FederationError> {
        let outer = self.domain(cs.outer_domain())?;
        let local = self.domain(cs.local_domain())?;
        cs.check_hierarchies(outer.hierarchy(), local.hierarchy())?;
        self.correlation_sets
            .insert((cs.outer_domain().clone(), cs.local_domain().clone()), cs);
        Ok(())
    }

    pub fn correlations(&self, outer: &DomainId, local: &DomainId) -> Option<&CorrelationSet> {
        self.correlation_sets.get(&(outer.clone(), local.clone()))
    }

    pub fn pair_trust(&self, observer: &DomainId, observed: &DomainId) -> Result<&DomainPairTrust, FederationError> {
        self.domain(observer)?;
        self.domain(observed)?;
        self.pair_trust
            .get(&(observer.clone(), observed.clone()))
            .ok_or_else(|| FederationError::SameDomain(observer.clone()))
    }

    pub fn pair_trust_matrix(&self) -> impl Iterator<Item = &DomainPairTrust> {
        self.pair_trust.values()
    }

    /// Overrides the stored opinion of `observed`, e.g. from a scenario file.
    pub fn set_pair_trust(
        &mut self,
        observer: &DomainId,
        observed: &DomainId,
        cross_dtd: f64,
        cross_rp: f64,
    ) -> Result<&DomainPairTrust, FederationError> {
        for (name, v) in [("cross_dtd", cross_dtd), ("cross_rp", cross_rp)] {
            check_signed_unit(name, v).map_err(FederationError::InvalidConfig)?;
        }
        let delta = self.domain(observer)?.policy().cross_params.delta;
        self.domain(observed)?;
        let pair = self
            .pair_trust
            .get_mut(&(observer.clone(), observed.clone()))
            .ok_or_else(|| FederationError::SameDomain(observer.clone()))?;
        pair.cross_dtd = cross_dtd;
        pair.cross_rp = cross_rp;
        pair.cross_td = crate::crossdomain::cross_trust_degree(delta, cross_dtd, cross_rp);
        Ok(pair)
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock of the coordinator and every domain.
    pub fn set_clock(&mut self, now: u64) {
        self.clock = self.clock.max(now);
        for aac in self.domains.values_mut() {
            aac.set_clock(now);
        }
    }

    pub fn advance_epoch(&mut self) {
        for aac in self.domains.values_mut() {
            aac.advance_epoch();
        }
    }

    /// Trust of `requester` carried into `target`:
    /// `TD(target, home) * max(TD(requester, home), 0)`, clamped to [-1, 1].
    pub fn map_trust(&self, requester: &EntityId, target: &DomainId) -> Result<f64, FederationError> {
        let home = self.domain(&requester.domain)?;
        if !home.is_member(requester) {
            return Err(FederationError::UnknownEntity(requester.clone()));
        }
        let pair = self.pair_trust(target, &requester.domain)?.cross_td;
        let own = home.trust_of(requester)?;
        Ok(map_trust_value(pair, own))
    }

    /// Recomputes `observer`'s opinion of `observed` from the observer's
    /// ledger. Without any rated visitor from `observed` the stored value
    /// is kept.
    pub fn update_pair_trust(&mut self, observer: &DomainId, observed: &DomainId) -> Result<DomainPairTrust, FederationError> {
        let aac = self.domain(observer)?;
        let current = self.pair_trust(observer, observed)?.clone();
        let next = recompute_pair(aac.ledger(), observed, &aac.policy().cross_params)?;
        match next {
            Some(p) => {
                self.pair_trust.insert((observer.clone(), observed.clone()), p.clone());
                Ok(p)
            }
            None => Ok(current),
        }
    }

    /// Runs steps i-xii for one request. Denials end the trace at the
    /// gating step (iii, v or viii); a permit records all twelve steps.
    pub fn request_cross_domain_access(
        &mut self,
        req: &CrossDomainRequest,
        feedback: &mut dyn FeedbackSource,
    ) -> Result<CrossOutcome, FederationError> {
        let (x, y) = (&req.target_domain, &req.home_domain);
        if x == y {
            return Err(FederationError::SameDomain(x.clone()));
        }
        let home = self.domain(y)?;
        self.domain(x)?;
        if req.requester.domain != *y {
            return Err(FederationError::UnknownEntity(req.requester.clone()));
        }
        if !home.is_member(&req.requester) {
            return Err(FederationError::UnknownEntity(req.requester.clone()));
        }
        if !home.holds_role(&req.requester, &req.outer_role) {
            return Err(FederationError::RoleNotHeld {
                entity: req.requester.clone(),
                role: req.outer_role.clone(),
            });
        }

        let mut out = CrossOutcome {
            decision: Decision::permit(&req.request_id, 0.0),
            trace: ProtocolTrace {
                request_id: req.request_id.clone(),
                steps: Vec::new(),
            },
            conversion: None,
            effective_trust: None,
            certificate: None,
            feedback: None,
            updated_pairs: Vec::new(),
        };
        let trace = &mut out.trace;
        trace.push(
            Step::I,
            StepOutcome::Ok,
            format!("{} holds {}, requests {} in {}", req.requester, req.outer_role, req.resource, x),
        );

        let home_td = home.trust_of(&req.requester)?;
        let home_gate = home.policy().permit_threshold;
        trace.push(
            Step::II,
            StepOutcome::Ok,
            format!(
                "TD({},{}) = {:.6}; home gate {:.4} {}",
                req.requester,
                y,
                home_td,
                home_gate,
                if home_td > home_gate { "passed" } else { "not met (advisory)" }
            ),
        );

        let pair_td = self.pair_trust(x, y)?.cross_td;
        if pair_td < self.config.interdomain_threshold {
            trace.push(
                Step::III,
                StepOutcome::Deny,
                format!("TD({x},{y}) = {pair_td:.6} < {:.4}", self.config.interdomain_threshold),
            );
            out.decision = Decision::deny(&req.request_id, DenyReason::InterDomainDistrust, pair_td);
            return Ok(out);
        }
        let link = Certificate {
            holder: req.requester.clone(),
            granted_role: req.outer_role.clone(),
            resource: req.resource.clone(),
            trust_snapshot: pair_td,
            issued_at: self.clock,
            expires_at: self.clock + self.config.certificate_ttl,
            issuer: y.clone(),
            signature: String::new(),
        }
        .seal(&self.key);
        trace.push(
            Step::III,
            StepOutcome::Ok,
            format!("TD({x},{y}) = {pair_td:.6}; inter-domain certificate {}", link.digest()),
        );
        trace.push(
            Step::IV,
            StepOutcome::Ok,
            format!("forwarded to {x} with {} and certificate {}", req.outer_role, link.digest()),
        );

        let host = self.domain(x)?;
        let conversion = match self.correlation_sets.get(&(y.clone(), x.clone())) {
            Some(cs) => convert_role(&req.outer_role, cs, home.hierarchy(), host.hierarchy())?,
            None => {
                let empty = CorrelationSet::new(home.hierarchy(), host.hierarchy(), [])?;
                convert_role(&req.outer_role, &empty, home.hierarchy(), host.hierarchy())?
            }
        };
        let Some(local_role) = conversion.local_role.clone() else {
            trace.push(
                Step::V,
                StepOutcome::Deny,
                format!("{} has no conversion into {x} ({} policy)", req.outer_role, conversion.policy),
            );
            out.decision = Decision::deny(&req.request_id, DenyReason::NoConversion, pair_td);
            out.conversion = Some(conversion);
            return Ok(out);
        };
        trace.push(
            Step::V,
            StepOutcome::Ok,
            format!(
                "{} -> {} via {} ({} policy)",
                req.outer_role,
                local_role,
                conversion.via.as_ref().map_or("-".to_string(), |c| c.to_string()),
                conversion.policy
            ),
        );
        out.conversion = Some(conversion);
        debug_assert!(link.verify_with(&self.key, self.clock));
        trace.push(
            Step::VI,
            StepOutcome::Ok,
            format!("certificate {} linked to {}", link.digest(), local_role),
        );

        let effective = map_trust_value(pair_td, home_td);
        out.effective_trust = Some(effective);
        trace.push(
            Step::VII,
            StepOutcome::Ok,
            format!("effective trust {pair_td:.6} * max({home_td:.6}, 0) = {effective:.6}"),
        );

        let decision = host.evaluate(&req.request_id, &local_role, &req.resource, effective)?;
        let threshold = host.policy().threshold_for(&req.resource);
        if !decision.is_permit() {
            trace.push(
                Step::VIII,
                StepOutcome::Deny,
                format!("{decision} against threshold {threshold:.4}"),
            );
            out.decision = decision;
            return Ok(out);
        }
        trace.push(
            Step::VIII,
            StepOutcome::Ok,
            format!("{decision} against threshold {threshold:.4}"),
        );
        let cert = host.issue_certificate(&req.requester, &local_role, &req.resource, &decision)?;
        trace.push(
            Step::IX,
            StepOutcome::Ok,
            format!("granted {} as {}; certificate {}", req.resource, local_role, cert.digest()),
        );
        out.decision = decision;
        out.certificate = Some(cert);

        // x, xi: both ratings are gathered before either is applied
        let provider = host.provider_of(&req.resource).cloned();
        let ratings = provider.as_ref().and_then(|p| {
            let host_side = feedback.rate(p, &req.requester);
            let home_side = feedback.rate(&req.requester, p);
            host_side.zip(home_side).map(|r| (p.clone(), r))
        });
        let Some((provider, (host_ex, home_ex))) = ratings else {
            let why = match &provider {
                None => format!("{} has no provider", req.resource),
                Some(_) => "rating withheld".to_string(),
            };
            let trace = &mut out.trace;
            trace.push(Step::X, StepOutcome::Stalled, why.clone());
            trace.push(Step::XI, StepOutcome::Stalled, why);
            trace.push(Step::XII, StepOutcome::Stalled, "pair trust unchanged".into());
            return Ok(out);
        };

        let host = self.domain_mut(x)?;
        host.ledger_mut().admit(&req.requester);
        host.open_interaction(&provider, &req.requester);
        let host_side = host.post_interaction_feedback(&provider, &req.requester, host_ex)?;
        let home = self.domain_mut(y)?;
        home.ledger_mut().admit(&provider);
        home.open_interaction(&req.requester, &provider);
        let home_side = home.post_interaction_feedback(&req.requester, &provider, home_ex)?;
        out.trace.push(
            Step::X,
            StepOutcome::Ok,
            format!(
                "{provider} rated {} ex={:.6}; qos={:.6} dtd={:.6}",
                req.requester,
                host_ex.value(),
                host_side.qos,
                host_side.dtd
            ),
        );
        out.trace.push(
            Step::XI,
            StepOutcome::Ok,
            format!(
                "{} rated {provider} ex={:.6}; qos={:.6} dtd={:.6}",
                req.requester,
                home_ex.value(),
                home_side.qos,
                home_side.dtd
            ),
        );
        out.feedback = Some(Feedback { host_side, home_side });

        out.updated_pairs.push(self.update_pair_trust(x, y)?);
        if self.config.mutual_update {
            out.updated_pairs.push(self.update_pair_trust(y, x)?);
        }
        let detail = out
            .updated_pairs
            .iter()
            .map(|p| format!("TD({},{}) = {:.6}", p.observer, p.observed, p.cross_td))
            .collect::<Vec<_>>()
            .join("; ");
        out.trace.push(Step::XII, StepOutcome::Ok, detail);
        Ok(out)
    }
}

/// `pair * max(own, 0)` clamped to [-1, 1].
pub fn map_trust_value(pair: f64, own: f64) -> f64 {
    (pair * own.max(0.0)).clamp(-1.0, 1.0)
}
