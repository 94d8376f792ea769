//! The per-domain Authentication and Authorization Center (AAC).
//!
//! A local request travels PEP → PDP → PIP → TMP → PDP → PEP. The trust
//! management point reads the requester's current trust degree from the
//! domain ledger; the decision point compares it with the resource threshold
//! and checks the role's effective permissions. Ledger writes happen only
//! through [`Aac::post_interaction_feedback`] and [`Aac::advance_epoch`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crossdomain::CrossParams;
use crate::ids::{DomainId, EntityId, ResourceId, RoleId};
use crate::roles::{RoleError, RoleHierarchy, Violation};
use crate::trust::{
    check_signed_unit, ExperienceRating, PairwiseTrust, TrustError, TrustLedger, TrustParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {0} is already registered")]
    DuplicateEntity(EntityId),
    #[error("unknown role {0}")]
    UnknownRole(RoleId),
    #[error("wrong secret for {0}")]
    BadSecret(EntityId),
    #[error("{0} has not authenticated")]
    NotAuthenticated(EntityId),
    #[error("{entity} does not hold role {role}")]
    RoleNotGranted { entity: EntityId, role: RoleId },
    #[error("no permitted interaction between {rater} and {ratee} awaits feedback")]
    NoPriorInteraction { rater: EntityId, ratee: EntityId },
    #[error("certificates are only issued for permitted requests")]
    NotPermitted,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid role hierarchy: {0:?}")]
    InvalidHierarchy(Vec<Violation>),
    #[error("{entity} belongs to {found}, not {expected}")]
    WrongDomain {
        entity: EntityId,
        expected: DomainId,
        found: DomainId,
    },
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Role(#[from] RoleError),
}

/// User ID and password presented to the AAC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub entity: EntityId,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub request_id: String,
    pub requester: EntityId,
    pub role: RoleId,
    pub resource: ResourceId,
}

/// Security policy of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyDatabase {
    pub trust_params: TrustParams,
    pub cross_params: CrossParams,
    /// Trust must exceed this value for a permit.
    pub permit_threshold: f64,
    pub resource_thresholds: BTreeMap<ResourceId, f64>,
    /// Validity window of issued certificates, in logical ticks.
    pub certificate_ttl: u64,
}

impl Default for PolicyDatabase {
    fn default() -> Self {
        Self {
            trust_params: TrustParams::default(),
            cross_params: CrossParams::default(),
            permit_threshold: 0.25,
            resource_thresholds: BTreeMap::new(),
            certificate_ttl: 100,
        }
    }
}

impl PolicyDatabase {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.trust_params.violations();
        out.extend(self.cross_params.violations());
        out.extend(check_signed_unit("permit_threshold", self.permit_threshold).err());
        for (res, t) in &self.resource_thresholds {
            out.extend(check_signed_unit(&format!("threshold for {res}"), *t).err());
        }
        out
    }

    pub fn threshold_for(&self, resource: &ResourceId) -> f64 {
        self.resource_thresholds
            .get(resource)
            .copied()
            .unwrap_or(self.permit_threshold)
    }

    /// The gate shared by local and cross-domain evaluation.
    pub fn admits(&self, resource: &ResourceId, trust: f64) -> bool {
        trust > self.threshold_for(resource)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Permit,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    BelowTrustThreshold,
    NoPermission,
    AuthenticationFailed,
    NoConversion,
    InterDomainDistrust,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenyReason::BelowTrustThreshold => "BelowTrustThreshold",
            DenyReason::NoPermission => "NoPermission",
            DenyReason::AuthenticationFailed => "AuthenticationFailed",
            DenyReason::NoConversion => "NoConversion",
            DenyReason::InterDomainDistrust => "InterDomainDistrust",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub request_id: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<DenyReason>,
    pub trust_at_decision: f64,
}

impl Decision {
    pub fn permit(request_id: &str, trust: f64) -> Self {
        Self {
            request_id: request_id.to_string(),
            outcome: Outcome::Permit,
            reason: None,
            trust_at_decision: trust,
        }
    }

    pub fn deny(request_id: &str, reason: DenyReason, trust: f64) -> Self {
        Self {
            request_id: request_id.to_string(),
            outcome: Outcome::Deny,
            reason: Some(reason),
            trust_at_decision: trust,
        }
    }

    pub fn is_permit(&self) -> bool {
        self.outcome == Outcome::Permit
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            None => write!(f, "Permit (trust {:.4})", self.trust_at_decision),
            Some(r) => write!(f, "Deny({r}) (trust {:.4})", self.trust_at_decision),
        }
    }
}

/// Capability token handed to an entity after a permit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holder: EntityId,
    pub granted_role: RoleId,
    pub resource: ResourceId,
    pub trust_snapshot: f64,
    pub issued_at: u64,
    pub expires_at: u64,
    pub issuer: DomainId,
    /// Hex keyed digest over the payload fields.
    pub signature: String,
}

impl Certificate {
    fn payload(&self) -> String {
        format!(
            "{}|{}|{}|{:016x}|{}|{}|{}",
            self.holder,
            self.granted_role,
            self.resource,
            self.trust_snapshot.to_bits(),
            self.issued_at,
            self.expires_at,
            self.issuer
        )
    }

    /// Fills in the signature under `key`.
    pub fn seal(mut self, key: &SigningKey) -> Self {
        self.signature = key.sign(&self.payload());
        self
    }

    /// Untampered under `key` and `now` within the validity window.
    pub fn verify_with(&self, key: &SigningKey, now: u64) -> bool {
        key.verify(&self.payload(), &self.signature) && self.issued_at <= now && now <= self.expires_at
    }

    /// Short digest identifying this certificate in traces.
    pub fn digest(&self) -> String {
        short_digest(&format!("{}|{}", self.payload(), self.signature))
    }
}

/// First 16 hex characters of the SHA-256 of `s`.
pub fn short_digest(s: &str) -> String {
    let full = hex::encode(Sha256::digest(s.as_bytes()));
    full[..16].to_string()
}

/// Desk-scale signing key shared by the issuers of one simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigningKey([u8; 32]);

impl SigningKey {
    pub fn derive(label: &str, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"xdac-signing-key\0");
        h.update(label.as_bytes());
        h.update(seed.to_le_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        Self(key)
    }

    pub fn sign(&self, payload: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(payload.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn verify(&self, payload: &str, signature: &str) -> bool {
        constant_time_eq(self.sign(payload).as_bytes(), signature.as_bytes())
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Stages of the local authorization pipeline, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStage {
    /// (b) enforcement point hands the request to the decision point
    PepToPdp,
    /// (c) decision point asks the information point for attributes
    PdpToPip,
    /// (d) trust management point supplies the trust degree
    TrustManagement,
    /// (e) decision point decides
    PdpDecision,
    /// (f) enforcement point answers, issuing a certificate on permit
    PepResponse,
}

impl LocalStage {
    pub const ORDER: [LocalStage; 5] = [
        LocalStage::PepToPdp,
        LocalStage::PdpToPip,
        LocalStage::TrustManagement,
        LocalStage::PdpDecision,
        LocalStage::PepResponse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LocalStage::PepToPdp => "b",
            LocalStage::PdpToPip => "c",
            LocalStage::TrustManagement => "d",
            LocalStage::PdpDecision => "e",
            LocalStage::PepResponse => "f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: LocalStage,
    pub label: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub request_id: String,
    pub stages: Vec<StageRecord>,
}

impl PipelineTrace {
    fn push(&mut self, stage: LocalStage, detail: String) {
        self.stages.push(StageRecord {
            stage,
            label: stage.label().to_string(),
            detail,
        });
    }

    pub fn labels(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Authorization {
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    pub trace: PipelineTrace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleGrant {
    pub entity: EntityId,
    pub role: RoleId,
    /// False when the entity already held the role.
    pub newly_granted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub entity: EntityId,
    pub issued_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aac {
    domain: DomainId,
    hierarchy: RoleHierarchy,
    policy: PolicyDatabase,
    ledger: TrustLedger,
    secrets: BTreeMap<EntityId, String>,
    grants: BTreeMap<EntityId, BTreeSet<RoleId>>,
    sessions: BTreeSet<EntityId>,
    providers: BTreeMap<ResourceId, EntityId>,
    /// Outstanding ratings owed after permits, keyed (rater, ratee).
    feedback_credits: BTreeMap<(EntityId, EntityId), u32>,
    clock: u64,
    key: SigningKey,
}

impl Aac {
    pub fn new(
        hierarchy: RoleHierarchy,
        policy: PolicyDatabase,
        key: SigningKey,
    ) -> Result<Self, PolicyError> {
        let violations = hierarchy.validate();
        if !violations.is_empty() {
            return Err(PolicyError::InvalidHierarchy(violations));
        }
        if let Some(v) = policy.violations().into_iter().next() {
            return Err(PolicyError::InvalidPolicy(v));
        }
        let domain = hierarchy.domain().clone();
        Ok(Self {
            ledger: TrustLedger::new(domain.clone(), policy.trust_params.clone())?,
            domain,
            hierarchy,
            policy,
            secrets: BTreeMap::new(),
            grants: BTreeMap::new(),
            sessions: BTreeSet::new(),
            providers: BTreeMap::new(),
            feedback_credits: BTreeMap::new(),
            clock: 0,
            key,
        })
    }

    pub fn domain(&self) -> &DomainId {
        &self.domain
    }

    pub fn hierarchy(&self) -> &RoleHierarchy {
        &self.hierarchy
    }

    pub fn policy(&self) -> &PolicyDatabase {
        &self.policy
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.ledger
    }

    pub(crate) fn ledger_mut(&mut self) -> &mut TrustLedger {
        &mut self.ledger
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock forward; earlier times are ignored.
    pub fn set_clock(&mut self, now: u64) {
        self.clock = self.clock.max(now);
    }

    pub fn trust_of(&self, entity: &EntityId) -> Result<f64, PolicyError> {
        Ok(self.ledger.trust_of(entity)?)
    }

    pub fn is_member(&self, entity: &EntityId) -> bool {
        self.secrets.contains_key(entity)
    }

    pub fn members(&self) -> impl Iterator<Item = &EntityId> {
        self.secrets.keys()
    }

    pub fn register_entity(&mut self, entity: EntityId, secret: &str) -> Result<(), PolicyError> {
        if entity.domain != self.domain {
            return Err(PolicyError::WrongDomain {
                expected: self.domain.clone(),
                found: entity.domain.clone(),
                entity,
            });
        }
        if secret.is_empty() {
            return Err(PolicyError::InvalidPolicy(format!("empty secret for {entity}")));
        }
        if self.secrets.contains_key(&entity) {
            return Err(PolicyError::DuplicateEntity(entity));
        }
        self.ledger.register(entity.clone())?;
        self.secrets.insert(entity, secret.to_string());
        Ok(())
    }

    /// Names `provider` as the entity that serves `resource` and rates its users.
    pub fn register_provider(
        &mut self,
        resource: ResourceId,
        provider: EntityId,
    ) -> Result<(), PolicyError> {
        self.require_member(&provider)?;
        self.providers.insert(resource, provider);
        Ok(())
    }

    pub fn provider_of(&self, resource: &ResourceId) -> Option<&EntityId> {
        self.providers.get(resource)
    }

    fn require_member(&self, entity: &EntityId) -> Result<(), PolicyError> {
        if self.secrets.contains_key(entity) {
            Ok(())
        } else {
            Err(PolicyError::UnknownEntity(entity.clone()))
        }
    }

    pub fn assign_role(&mut self, entity: &EntityId, role: &RoleId) -> Result<RoleGrant, PolicyError> {
        self.require_member(entity)?;
        if !self.hierarchy.contains(role) {
            return Err(PolicyError::UnknownRole(role.clone()));
        }
        let newly_granted = self
            .grants
            .entry(entity.clone())
            .or_default()
            .insert(role.clone());
        Ok(RoleGrant {
            entity: entity.clone(),
            role: role.clone(),
            newly_granted,
        })
    }

    pub fn holds_role(&self, entity: &EntityId, role: &RoleId) -> bool {
        self.grants.get(entity).is_some_and(|g| g.contains(role))
    }

    pub fn authenticate(&mut self, cred: &Credential) -> Result<AuthToken, PolicyError> {
        let stored = self
            .secrets
            .get(&cred.entity)
            .ok_or_else(|| PolicyError::UnknownEntity(cred.entity.clone()))?;
        if !constant_time_eq(stored.as_bytes(), cred.secret.as_bytes()) {
            return Err(PolicyError::BadSecret(cred.entity.clone()));
        }
        self.sessions.insert(cred.entity.clone());
        Ok(AuthToken {
            entity: cred.entity.clone(),
            issued_at: self.clock,
        })
    }

    /// Decision-point logic shared with cross-domain step viii: the
    /// permission check comes first so a missing permission is reported
    /// regardless of trust.
    pub fn evaluate(&self, request_id: &str, role: &RoleId, resource: &ResourceId, trust: f64) -> Result<Decision, PolicyError> {
        let allowed = self
            .hierarchy
            .effective_permissions(role)?
            .iter()
            .any(|p| &p.resource == resource);
        Ok(if !allowed {
            Decision::deny(request_id, DenyReason::NoPermission, trust)
        } else if !self.policy.admits(resource, trust) {
            Decision::deny(request_id, DenyReason::BelowTrustThreshold, trust)
        } else {
            Decision::permit(request_id, trust)
        })
    }

    /// Runs the local pipeline for an authenticated requester holding
    /// `req.role`. The trust ledger is only read.
    pub fn authorize_local(&mut self, req: &AccessRequest) -> Result<Authorization, PolicyError> {
        if !self.sessions.contains(&req.requester) {
            return Err(PolicyError::NotAuthenticated(req.requester.clone()));
        }
        if !self.holds_role(&req.requester, &req.role) {
            return Err(PolicyError::RoleNotGranted {
                entity: req.requester.clone(),
                role: req.role.clone(),
            });
        }
        let mut trace = PipelineTrace {
            request_id: req.request_id.clone(),
            stages: Vec::new(),
        };
        trace.push(
            LocalStage::PepToPdp,
            format!("{} as {} -> {}", req.requester, req.role, req.resource),
        );
        trace.push(
            LocalStage::PdpToPip,
            format!("attributes of {} at epoch {}", req.requester, self.ledger.view().epoch),
        );
        let trust = self.trust_of(&req.requester)?;
        trace.push(LocalStage::TrustManagement, format!("TD = {trust:.6}"));
        let decision = self.evaluate(&req.request_id, &req.role, &req.resource, trust)?;
        trace.push(
            LocalStage::PdpDecision,
            format!(
                "{} against threshold {:.4}",
                decision,
                self.policy.threshold_for(&req.resource)
            ),
        );
        let certificate = if decision.is_permit() {
            let cert = self.issue_certificate(&req.requester, &req.role, &req.resource, &decision)?;
            if let Some(provider) = self.providers.get(&req.resource).cloned() {
                self.open_interaction(&req.requester, &provider);
                self.open_interaction(&provider, &req.requester);
            }
            Some(cert)
        } else {
            None
        };
        trace.push(
            LocalStage::PepResponse,
            match &certificate {
                Some(c) => format!("certificate {}", c.digest()),
                None => "refused".to_string(),
            },
        );
        Ok(Authorization {
            decision,
            certificate,
            trace,
        })
    }

    /// Allows one rating from `rater` about `ratee`.
    pub(crate) fn open_interaction(&mut self, rater: &EntityId, ratee: &EntityId) {
        if rater != ratee {
            *self
                .feedback_credits
                .entry((rater.clone(), ratee.clone()))
                .or_default() += 1;
        }
    }

    pub fn pending_feedback(&self, rater: &EntityId, ratee: &EntityId) -> u32 {
        self.feedback_credits
            .get(&(rater.clone(), ratee.clone()))
            .copied()
            .unwrap_or(0)
    }

    /// Records one side's evaluation of a permitted interaction. Each permit
    /// allows exactly one rating in each direction.
    pub fn post_interaction_feedback(
        &mut self,
        rater: &EntityId,
        ratee: &EntityId,
        ex: ExperienceRating,
    ) -> Result<PairwiseTrust, PolicyError> {
        let key = (rater.clone(), ratee.clone());
        let Some(credit) = self.feedback_credits.get_mut(&key) else {
            return Err(PolicyError::NoPriorInteraction {
                rater: rater.clone(),
                ratee: ratee.clone(),
            });
        };
        let pair = self.ledger.record_experience(rater, ratee, ex)?;
        *credit -= 1;
        if *credit == 0 {
            self.feedback_credits.remove(&key);
        }
        Ok(pair)
    }

    pub fn issue_certificate(
        &self,
        holder: &EntityId,
        role: &RoleId,
        resource: &ResourceId,
        decision: &Decision,
    ) -> Result<Certificate, PolicyError> {
        if !decision.is_permit() {
            return Err(PolicyError::NotPermitted);
        }
        let cert = Certificate {
            holder: holder.clone(),
            granted_role: role.clone(),
            resource: resource.clone(),
            trust_snapshot: decision.trust_at_decision,
            issued_at: self.clock,
            expires_at: self.clock + self.policy.certificate_ttl,
            issuer: self.domain.clone(),
            signature: String::new(),
        };
        Ok(cert.seal(&self.key))
    }

    /// True iff the certificate is untampered and the clock is within its
    /// validity window.
    pub fn verify_certificate(&self, cert: &Certificate) -> bool {
        cert.verify_with(&self.key, self.clock)
    }

    /// Recomputes reputations and trust degrees; unused feedback allowances
    /// lapse with the epoch.
    pub fn advance_epoch(&mut self) {
        self.ledger.advance_epoch();
        self.feedback_credits.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::campus_corp;
    use crate::trust::TrustParams;

    fn e(n: &str) -> EntityId {
        EntityId::of("DM0", n)
    }
    fn r(n: &str) -> RoleId {
        RoleId::of("DM0", n)
    }
    fn ex(v: f64) -> ExperienceRating {
        ExperienceRating::new(v).unwrap()
    }

    /// DM0 with alice (Professor, provides lab-app), bob (Guest) and carol
    /// (Staff, provides records).
    fn aac(policy: PolicyDatabase) -> Aac {
        let (h0, _) = campus_corp();
        let mut aac = Aac::new(h0, policy, SigningKey::derive("DM0", 7)).unwrap();
        for n in ["alice", "bob", "carol"] {
            aac.register_entity(e(n), &format!("{n}-pw")).unwrap();
        }
        aac.register_provider(ResourceId::new("lab-app"), e("alice")).unwrap();
        aac.register_provider(ResourceId::new("records"), e("carol")).unwrap();
        aac
    }

    fn login(aac: &mut Aac, n: &str) {
        aac.authenticate(&Credential { entity: e(n), secret: format!("{n}-pw") }).unwrap();
    }

    fn req(id: &str, who: &str, role: &str, res: &str) -> AccessRequest {
        AccessRequest {
            request_id: id.into(),
            requester: e(who),
            role: r(role),
            resource: ResourceId::new(res),
        }
    }

    #[test]
    fn role_assignment() {
        let mut a = aac(PolicyDatabase::default());
        assert!(a.assign_role(&e("bob"), &r("Guest")).unwrap().newly_granted);
        assert!(!a.assign_role(&e("bob"), &r("Guest")).unwrap().newly_granted);
        assert_eq!(
            a.assign_role(&e("bob"), &r("Chancellor")),
            Err(PolicyError::UnknownRole(r("Chancellor")))
        );
        assert_eq!(
            a.assign_role(&e("nobody"), &r("Guest")),
            Err(PolicyError::UnknownEntity(e("nobody")))
        );
    }

    #[test]
    fn authentication() {
        let mut a = aac(PolicyDatabase::default());
        let tok = a
            .authenticate(&Credential { entity: e("bob"), secret: "bob-pw".into() })
            .unwrap();
        assert_eq!(tok.entity, e("bob"));
        assert_eq!(
            a.authenticate(&Credential { entity: e("bob"), secret: "nope".into() }),
            Err(PolicyError::BadSecret(e("bob")))
        );
        assert_eq!(
            a.authenticate(&Credential { entity: e("eve"), secret: "x".into() }),
            Err(PolicyError::UnknownEntity(e("eve")))
        );
    }

    #[test]
    fn preconditions_are_errors() {
        let mut a = aac(PolicyDatabase::default());
        assert_eq!(
            a.authorize_local(&req("r", "bob", "Guest", "portal")).unwrap_err(),
            PolicyError::NotAuthenticated(e("bob"))
        );
        login(&mut a, "bob");
        assert!(matches!(
            a.authorize_local(&req("r", "bob", "Guest", "portal")),
            Err(PolicyError::RoleNotGranted { .. })
        ));
    }

    /// Professor alice rated twice by bob and carol, then one epoch.
    /// Hand computation with α=β=γ=0.5, initial Rp 0.5:
    ///   bob→alice: ex 0.9 then 0.9 → qos 0.45, 0.675; dtd 0.45, 0.675
    ///   carol→alice: same
    ///   Rp(alice) = (0.675*0.5 + 0.675*0.5)/2 = 0.3375
    ///   TD(alice) = 0.5*0.675 + 0.5*0.3375 = 0.50625
    #[test]
    fn permit_with_certificate_at_hand_computed_trust() {
        let mut a = aac(PolicyDatabase { permit_threshold: 0.5, ..PolicyDatabase::default() });
        for rater in ["bob", "carol"] {
            for _ in 0..2 {
                a.ledger_mut().record_experience(&e(rater), &e("alice"), ex(0.9)).unwrap();
            }
        }
        a.advance_epoch();
        let td = a.trust_of(&e("alice")).unwrap();
        assert!((td - 0.50625).abs() < 1e-12);

        a.assign_role(&e("alice"), &r("Professor")).unwrap();
        login(&mut a, "alice");
        let out = a.authorize_local(&req("q1", "alice", "Professor", "lab-app")).unwrap();
        assert!(out.decision.is_permit());
        assert_eq!(out.trace.labels(), ["b", "c", "d", "e", "f"]);
        let cert = out.certificate.unwrap();
        assert!(a.verify_certificate(&cert));
        assert_eq!(cert.trust_snapshot, td);
    }

    #[test]
    fn deny_below_threshold_and_without_permission() {
        let mut a = aac(PolicyDatabase { permit_threshold: 0.5, ..PolicyDatabase::default() });
        a.assign_role(&e("bob"), &r("Guest")).unwrap();
        a.assign_role(&e("alice"), &r("Professor")).unwrap();
        login(&mut a, "bob");
        login(&mut a, "alice");
        // fresh TD is 0.25
        let out = a.authorize_local(&req("q", "alice", "Professor", "lab-app")).unwrap();
        assert_eq!(out.decision.reason, Some(DenyReason::BelowTrustThreshold));
        assert!(out.certificate.is_none());
        assert_eq!(out.trace.labels(), ["b", "c", "d", "e", "f"]);
        // permission check precedes and ignores trust
        let d = a.evaluate("q", &r("Guest"), &ResourceId::new("lab-app"), 0.9).unwrap();
        assert_eq!(d.reason, Some(DenyReason::NoPermission));
        assert_eq!(d.trust_at_decision, 0.9);
        let d = a.evaluate("q", &r("Professor"), &ResourceId::new("lab-app"), 0.2).unwrap();
        assert_eq!(d.reason, Some(DenyReason::BelowTrustThreshold));
        let d = a.evaluate("q", &r("Professor"), &ResourceId::new("lab-app"), 0.6).unwrap();
        assert!(d.is_permit());
        // Dean inherits Professor's access point
        assert!(a.evaluate("q", &r("Dean"), &ResourceId::new("lab-app"), 0.6).unwrap().is_permit());
    }

    #[test]
    fn fresh_entity_denied_under_default_threshold() {
        let mut a = aac(PolicyDatabase::default());
        a.assign_role(&e("bob"), &r("Guest")).unwrap();
        login(&mut a, "bob");
        let out = a.authorize_local(&req("q", "bob", "Guest", "portal")).unwrap();
        assert_eq!(out.decision.reason, Some(DenyReason::BelowTrustThreshold));
        assert_eq!(out.decision.trust_at_decision, 0.25);
    }

    #[test]
    fn authorization_does_not_touch_the_ledger() {
        let mut a = aac(PolicyDatabase { permit_threshold: -0.5, ..PolicyDatabase::default() });
        a.assign_role(&e("bob"), &r("Staff")).unwrap();
        login(&mut a, "bob");
        let before = a.ledger().clone();
        let out = a.authorize_local(&req("q", "bob", "Staff", "records")).unwrap();
        assert!(out.decision.is_permit());
        assert_eq!(a.ledger(), &before);
    }

    #[test]
    fn feedback_follows_permits() {
        let mut a = aac(PolicyDatabase { permit_threshold: -0.5, ..PolicyDatabase::default() });
        assert_eq!(
            a.post_interaction_feedback(&e("carol"), &e("bob"), ex(0.5)),
            Err(PolicyError::NoPriorInteraction { rater: e("carol"), ratee: e("bob") })
        );
        a.assign_role(&e("bob"), &r("Staff")).unwrap();
        login(&mut a, "bob");
        a.authorize_local(&req("q", "bob", "Staff", "records")).unwrap();
        // provider carol rates misuse; user bob rates the service
        let p = a.post_interaction_feedback(&e("carol"), &e("bob"), ex(-0.8)).unwrap();
        assert!((p.qos + 0.4).abs() < 1e-12);
        let q = a.post_interaction_feedback(&e("bob"), &e("carol"), ex(0.9)).unwrap();
        assert!((q.qos - 0.45).abs() < 1e-12);
        assert!(a.post_interaction_feedback(&e("carol"), &e("bob"), ex(-0.8)).is_err());
    }

    #[test]
    fn certificate_tamper_and_expiry() {
        let mut a = aac(PolicyDatabase { certificate_ttl: 10, ..PolicyDatabase::default() });
        let cert = a
            .issue_certificate(&e("bob"), &r("Guest"), &ResourceId::new("portal"), &Decision::permit("x", 0.4))
            .unwrap();
        assert!(a.verify_certificate(&cert));

        let mut forged = cert.clone();
        forged.granted_role = r("Dean");
        assert!(!a.verify_certificate(&forged));
        let mut forged = cert.clone();
        forged.trust_snapshot = 0.41;
        assert!(!a.verify_certificate(&forged));
        let mut forged = cert.clone();
        forged.expires_at += 1;
        assert!(!a.verify_certificate(&forged));

        a.set_clock(10);
        assert!(a.verify_certificate(&cert));
        a.set_clock(11);
        assert!(!a.verify_certificate(&cert));

        assert_eq!(
            a.issue_certificate(&e("bob"), &r("Guest"), &ResourceId::new("portal"), &Decision::deny("x", DenyReason::NoPermission, 0.0)),
            Err(PolicyError::NotPermitted)
        );
    }

    #[test]
    fn rejects_bad_configuration() {
        let (h0, _) = campus_corp();
        let bad = PolicyDatabase {
            permit_threshold: 1.5,
            trust_params: TrustParams { alpha: 1.0, ..TrustParams::default() },
            ..PolicyDatabase::default()
        };
        assert!(matches!(
            Aac::new(h0.clone(), bad, SigningKey::derive("x", 0)),
            Err(PolicyError::InvalidPolicy(_))
        ));
        let mut a = Aac::new(h0, PolicyDatabase::default(), SigningKey::derive("x", 0)).unwrap();
        assert!(matches!(a.register_entity(EntityId::of("DM1", "z"), "pw"), Err(PolicyError::WrongDomain { .. })));
        assert!(a.register_entity(e("z"), "").is_err());
        a.register_entity(e("z"), "pw").unwrap();
        assert_eq!(a.register_entity(e("z"), "pw"), Err(PolicyError::DuplicateEntity(e("z"))));
    }

    #[test]
    fn aac_is_send() {
        fn check<T: Send + Sync>() {}
        check::<Aac>();
    }
}
