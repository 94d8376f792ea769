//! Single-domain behavioral trust.
//!
//! Every rater→ratee pair keeps an exponentially blended interaction quality
//! (`qos`) and a direct trust degree (`dtd`). Once per epoch the ledger folds
//! those pairwise values into a reputation and a domain trust degree for each
//! participant. Reputations are weighted by the *rater's* reputation from the
//! previous epoch, so a round is a single Jacobi-style pass and replays are
//! bit-identical.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DomainId, EntityId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("{0} cannot rate itself")]
    SelfRating(EntityId),
    #[error("experience rating {0} is outside the open interval (-1, 1)")]
    RatingOutOfRange(f64),
    #[error("invalid trust parameter: {0}")]
    InvalidParams(String),
    #[error("entity {entity} is already registered in domain {domain}")]
    AlreadyRegistered { entity: EntityId, domain: DomainId },
}

/// Outcome of a single interaction, strictly inside (-1, 1). Positive means
/// the rater was satisfied.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct ExperienceRating(f64);

impl ExperienceRating {
    pub fn new(value: f64) -> Result<Self, TrustError> {
        // NaN fails both comparisons.
        if value > -1.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(TrustError::RatingOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for ExperienceRating {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Self::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Blending weights and neutral starting values for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustParams {
    /// History weight of the QoS update.
    pub alpha: f64,
    /// History weight of the direct-trust update.
    pub beta: f64,
    /// Direct trust vs. reputation weight in the domain trust degree.
    pub gamma: f64,
    pub initial_qos: f64,
    pub initial_dtd: f64,
    pub initial_rp: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
            initial_qos: 0.0,
            initial_dtd: 0.0,
            initial_rp: 0.5,
        }
    }
}

pub(crate) fn check_open_unit(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(format!("{name} = {v} must lie in the open interval (0, 1)"))
    }
}

pub(crate) fn check_signed_unit(name: &str, v: f64) -> Result<(), String> {
    if (-1.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{name} = {v} must lie in [-1, 1]"))
    }
}

impl TrustParams {
    /// All violated constraints, empty when the parameters are usable.
    pub fn violations(&self) -> Vec<String> {
        [
            check_open_unit("alpha", self.alpha),
            check_open_unit("beta", self.beta),
            check_open_unit("gamma", self.gamma),
            check_signed_unit("initial_qos", self.initial_qos),
            check_signed_unit("initial_dtd", self.initial_dtd),
            check_signed_unit("initial_rp", self.initial_rp),
        ]
        .into_iter()
        .filter_map(Result::err)
        .collect()
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        match self.violations().into_iter().next() {
            Some(v) => Err(TrustError::InvalidParams(v)),
            None => Ok(()),
        }
    }

    /// Trust degree of a participant nobody has rated yet.
    pub fn neutral_trust(&self) -> f64 {
        domain_trust_degree(self.gamma, self.initial_dtd, self.initial_rp)
    }
}

/// `weight * direct + (1 - weight) * reputation`. Accepts the closed unit
/// interval so the boundary cases can be evaluated directly.
pub fn domain_trust_degree(weight: f64, direct: f64, reputation: f64) -> f64 {
    weight * direct + (1.0 - weight) * reputation
}

/// Accumulated history of one rater toward one ratee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTrust {
    pub rater: EntityId,
    pub ratee: EntityId,
    /// Number of recorded interactions.
    pub k: u64,
    pub qos: f64,
    pub dtd: f64,
    pub last_ex: f64,
}

impl PairwiseTrust {
    pub fn fresh(rater: EntityId, ratee: EntityId, params: &TrustParams) -> Self {
        Self {
            rater,
            ratee,
            k: 0,
            qos: params.initial_qos,
            dtd: params.initial_dtd,
            last_ex: 0.0,
        }
    }

    /// Folds one more experience into the pair. The direct-trust update uses
    /// the QoS value from *before* this interaction as its history term.
    pub fn apply(&mut self, alpha: f64, beta: f64, ex: ExperienceRating) {
        let ex = ex.value();
        let qos_prev = self.qos;
        self.qos = alpha * qos_prev + (1.0 - alpha) * ex;
        self.dtd = beta * qos_prev + (1.0 - beta) * ex;
        self.last_ex = ex;
        self.k += 1;
    }
}

/// Per-epoch snapshot of reputations and domain trust degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTrustView {
    pub domain: DomainId,
    pub reputations: BTreeMap<EntityId, f64>,
    pub domain_trust: BTreeMap<EntityId, f64>,
    pub epoch: u64,
}

impl DomainTrustView {
    pub fn empty(domain: DomainId) -> Self {
        Self {
            domain,
            reputations: BTreeMap::new(),
            domain_trust: BTreeMap::new(),
            epoch: 0,
        }
    }

    pub fn reputation(&self, entity: &EntityId) -> Option<f64> {
        self.reputations.get(entity).copied()
    }

    pub fn trust(&self, entity: &EntityId) -> Option<f64> {
        self.domain_trust.get(entity).copied()
    }
}

/// Single-writer store of all trust state for one domain.
///
/// Participants are the domain's own entities plus any foreign visitors or
/// providers admitted while serving cross-domain requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustLedger {
    params: TrustParams,
    participants: BTreeSet<EntityId>,
    /// ratee → rater → history
    inbound: BTreeMap<EntityId, BTreeMap<EntityId, PairwiseTrust>>,
    view: DomainTrustView,
}

impl TrustLedger {
    pub fn new(domain: DomainId, params: TrustParams) -> Result<Self, TrustError> {
        params.validate()?;
        Ok(Self {
            params,
            participants: BTreeSet::new(),
            inbound: BTreeMap::new(),
            view: DomainTrustView::empty(domain),
        })
    }

    pub fn domain(&self) -> &DomainId {
        &self.view.domain
    }

    pub fn params(&self) -> &TrustParams {
        &self.params
    }

    pub fn view(&self) -> &DomainTrustView {
        &self.view
    }

    pub fn participants(&self) -> impl Iterator<Item = &EntityId> {
        self.participants.iter()
    }

    pub fn is_participant(&self, entity: &EntityId) -> bool {
        self.participants.contains(entity)
    }

    /// Adds a participant at neutral reputation and trust. Foreign entities
    /// are allowed: they are how visitors accumulate history in a host domain.
    pub fn register(&mut self, entity: EntityId) -> Result<(), TrustError> {
        if self.participants.contains(&entity) {
            return Err(TrustError::AlreadyRegistered {
                entity,
                domain: self.view.domain.clone(),
            });
        }
        self.view
            .reputations
            .insert(entity.clone(), self.params.initial_rp);
        self.view
            .domain_trust
            .insert(entity.clone(), self.params.neutral_trust());
        self.participants.insert(entity);
        Ok(())
    }

    /// Registers the entity unless it is already a participant.
    pub fn admit(&mut self, entity: &EntityId) {
        if !self.participants.contains(entity) {
            // cannot fail: membership was just checked
            let _ = self.register(entity.clone());
        }
    }

    fn require(&self, entity: &EntityId) -> Result<(), TrustError> {
        if self.participants.contains(entity) {
            Ok(())
        } else {
            Err(TrustError::UnknownEntity(entity.clone()))
        }
    }

    pub fn record_experience(
        &mut self,
        rater: &EntityId,
        ratee: &EntityId,
        ex: ExperienceRating,
    ) -> Result<PairwiseTrust, TrustError> {
        if rater == ratee {
            return Err(TrustError::SelfRating(rater.clone()));
        }
        self.require(rater)?;
        self.require(ratee)?;
        let params = &self.params;
        let pair = self
            .inbound
            .entry(ratee.clone())
            .or_default()
            .entry(rater.clone())
            .or_insert_with(|| PairwiseTrust::fresh(rater.clone(), ratee.clone(), params));
        pair.apply(params.alpha, params.beta, ex);
        Ok(pair.clone())
    }

    pub fn pair(&self, rater: &EntityId, ratee: &EntityId) -> Option<&PairwiseTrust> {
        self.inbound.get(ratee)?.get(rater)
    }

    /// Histories toward `ratee` from raters other than itself with at least
    /// one interaction, in rater order.
    pub fn inbound<'a>(&'a self, ratee: &'a EntityId) -> impl Iterator<Item = &'a PairwiseTrust> + 'a {
        self.inbound
            .get(ratee)
            .into_iter()
            .flat_map(|m| m.values())
            .filter(move |p| p.k > 0 && &p.rater != ratee)
    }

    pub fn has_inbound(&self, ratee: &EntityId) -> bool {
        self.inbound(ratee).next().is_some()
    }

    /// Mean direct trust toward `ratee`, `None` when nobody has rated it.
    pub fn mean_inbound_dtd(&self, ratee: &EntityId) -> Option<f64> {
        mean(self.inbound(ratee).map(|p| p.dtd))
    }

    /// Mean QoS toward `ratee`, `None` when nobody has rated it.
    pub fn mean_inbound_qos(&self, ratee: &EntityId) -> Option<f64> {
        mean(self.inbound(ratee).map(|p| p.qos))
    }

    /// Reputation of `ratee` given the prior-epoch reputations in `prior`:
    /// the mean over raters of `qos(rater → ratee) * Rp_prior(rater)`.
    pub fn compute_reputation(
        &self,
        ratee: &EntityId,
        prior: &DomainTrustView,
    ) -> Result<f64, TrustError> {
        self.require(ratee)?;
        let mut sum = 0.0;
        let mut raters = 0usize;
        for pair in self.inbound(ratee) {
            let weight = prior
                .reputation(&pair.rater)
                .unwrap_or(self.params.initial_rp);
            sum += pair.qos * weight;
            raters += 1;
        }
        Ok(if raters == 0 {
            self.params.initial_rp
        } else {
            sum / raters as f64
        })
    }

    /// Domain trust degree of `entity` using the reputation stored in `view`.
    pub fn compute_domain_trust(
        &self,
        entity: &EntityId,
        view: &DomainTrustView,
    ) -> Result<f64, TrustError> {
        self.require(entity)?;
        let direct = self
            .mean_inbound_dtd(entity)
            .unwrap_or(self.params.initial_dtd);
        let rp = view.reputation(entity).unwrap_or(self.params.initial_rp);
        Ok(domain_trust_degree(self.params.gamma, direct, rp))
    }

    /// Recomputes every reputation from the frozen previous snapshot, then
    /// every trust degree from the new reputations, and bumps the epoch.
    pub fn advance_epoch(&mut self) -> &DomainTrustView {
        let prior = self.view.clone();
        let mut next = DomainTrustView {
            domain: prior.domain.clone(),
            reputations: BTreeMap::new(),
            domain_trust: BTreeMap::new(),
            epoch: prior.epoch + 1,
        };
        for entity in &self.participants {
            let rp = self
                .compute_reputation(entity, &prior)
                .expect("participant is registered");
            next.reputations.insert(entity.clone(), rp);
        }
        for entity in &self.participants {
            let td = self
                .compute_domain_trust(entity, &next)
                .expect("participant is registered");
            next.domain_trust.insert(entity.clone(), td);
        }
        self.view = next;
        &self.view
    }

    /// Current trust degree of a participant.
    pub fn trust_of(&self, entity: &EntityId) -> Result<f64, TrustError> {
        self.view
            .trust(entity)
            .ok_or_else(|| TrustError::UnknownEntity(entity.clone()))
    }

    #[cfg(test)]
    pub(crate) fn set_pair(&mut self, pair: PairwiseTrust) {
        self.inbound
            .entry(pair.ratee.clone())
            .or_default()
            .insert(pair.rater.clone(), pair);
    }

    #[cfg(test)]
    pub(crate) fn set_view(&mut self, view: DomainTrustView) {
        self.view = view;
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
