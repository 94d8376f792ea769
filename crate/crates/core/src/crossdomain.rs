//! Trust between security domains.
//!
//! Foreign entities build up history in a host ledger while they visit. The
//! host's view of their whole home domain is derived from those records: a
//! mean of their direct trust, a θ-weighted reputation, and a δ-blend of the
//! two.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DomainId, EntityId};
use crate::trust::{check_open_unit, mean, TrustLedger};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrossError {
    #[error("foreign entity set spans several domains or includes the observer: {0:?}")]
    MixedDomains(Vec<DomainId>),
    #[error("all θ weights over the contributing entities are zero")]
    AllWeightsZero,
    #[error("invalid cross-domain parameter: {0}")]
    InvalidParams(String),
}

/// How per-entity θ weights are chosen before normalization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaWeights {
    #[default]
    Uniform,
    /// Explicit non-negative weights; entities not listed weigh 1.
    Configured(BTreeMap<EntityId, f64>),
    /// `(1 + dtd) / 2`, the entity's mean direct trust shifted into (0, 1).
    DirectTrust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossParams {
    /// Direct trust vs. reputation weight.
    pub delta: f64,
    pub theta: ThetaWeights,
}

impl Default for CrossParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            theta: ThetaWeights::Uniform,
        }
    }
}

impl CrossParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = check_open_unit("delta", self.delta).err().into_iter().collect();
        if let ThetaWeights::Configured(w) = &self.theta {
            for (e, v) in w {
                if !(*v >= 0.0) {
                    out.push(format!("theta weight for {e} = {v} must be >= 0"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CrossError> {
        match self.violations().into_iter().next() {
            Some(v) => Err(CrossError::InvalidParams(v)),
            None => Ok(()),
        }
    }

    fn raw_weight(&self, ledger: &TrustLedger, entity: &EntityId) -> f64 {
        match &self.theta {
            ThetaWeights::Uniform => 1.0,
            ThetaWeights::Configured(w) => w.get(entity).copied().unwrap_or(1.0),
            ThetaWeights::DirectTrust => {
                let dtd = ledger.mean_inbound_dtd(entity).unwrap_or(0.0);
                (1.0 + dtd) / 2.0
            }
        }
    }
}

/// The observer domain's current opinion of the observed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPairTrust {
    pub observer: DomainId,
    pub observed: DomainId,
    pub cross_dtd: f64,
    pub cross_rp: f64,
    pub cross_td: f64,
}

impl DomainPairTrust {
    /// Starting point before any visit: no direct trust, reputation at
    /// `initial_rp`.
    pub fn neutral(observer: DomainId, observed: DomainId, initial_rp: f64, delta: f64) -> Self {
        Self {
            observer,
            observed,
            cross_dtd: 0.0,
            cross_rp: initial_rp,
            cross_td: cross_trust_degree(delta, 0.0, initial_rp),
        }
    }
}

/// `delta * dtd + (1 - delta) * rp`; the closed unit interval is accepted.
pub fn cross_trust_degree(delta: f64, dtd: f64, rp: f64) -> f64 {
    delta * dtd + (1.0 - delta) * rp
}

pub fn compute_cross_td(pair: &DomainPairTrust, params: &CrossParams) -> f64 {
    cross_trust_degree(params.delta, pair.cross_dtd, pair.cross_rp)
}

fn check_foreign(ledger: &TrustLedger, foreign: &BTreeSet<EntityId>) -> Result<(), CrossError> {
    let domains: BTreeSet<&DomainId> = foreign.iter().map(|e| &e.domain).collect();
    if domains.len() > 1 || domains.contains(ledger.domain()) {
        return Err(CrossError::MixedDomains(domains.into_iter().cloned().collect()));
    }
    Ok(())
}

/// Members of `foreign` that have been rated at least once in the host.
fn contributors<'a>(
    ledger: &'a TrustLedger,
    foreign: &'a BTreeSet<EntityId>,
) -> impl Iterator<Item = &'a EntityId> + 'a {
    foreign.iter().filter(|e| ledger.has_inbound(e))
}

/// Mean host-side direct trust over the foreign entities that have
/// interacted; 0 when none have.
pub fn compute_cross_dtd(
    ledger: &TrustLedger,
    foreign: &BTreeSet<EntityId>,
) -> Result<f64, CrossError> {
    check_foreign(ledger, foreign)?;
    Ok(mean(
        contributors(ledger, foreign).filter_map(|e| ledger.mean_inbound_dtd(e)),
    )
    .unwrap_or(0.0))
}

/// θ̂-weighted sum of `qos_in_host(j) * Rp_in_host(j)` over contributors,
/// with θ̂ normalized to sum to 1; 0 when there are no contributors.
pub fn compute_cross_rp(
    ledger: &TrustLedger,
    foreign: &BTreeSet<EntityId>,
    params: &CrossParams,
) -> Result<f64, CrossError> {
    check_foreign(ledger, foreign)?;
    let terms: Vec<(f64, f64)> = contributors(ledger, foreign)
        .map(|e| {
            let qos = ledger.mean_inbound_qos(e).unwrap_or(0.0);
            let rp = ledger
                .view()
                .reputation(e)
                .unwrap_or(ledger.params().initial_rp);
            (params.raw_weight(ledger, e), qos * rp)
        })
        .collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = terms.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(CrossError::AllWeightsZero);
    }
    Ok(terms.iter().map(|(w, v)| (w / total) * v).sum())
}

/// Recomputes the observer's opinion of `observed` from the observer ledger.
/// Returns `None` when no entity of `observed` has been rated there yet.
pub fn recompute_pair(
    ledger: &TrustLedger,
    observed: &DomainId,
    params: &CrossParams,
) -> Result<Option<DomainPairTrust>, CrossError> {
    let foreign: BTreeSet<EntityId> = ledger
        .participants()
        .filter(|e| &e.domain == observed)
        .cloned()
        .collect();
    if contributors(ledger, &foreign).next().is_none() {
        return Ok(None);
    }
    let cross_dtd = compute_cross_dtd(ledger, &foreign)?;
    let cross_rp = compute_cross_rp(ledger, &foreign, params)?;
    Ok(Some(DomainPairTrust {
        observer: ledger.domain().clone(),
        observed: observed.clone(),
        cross_dtd,
        cross_rp,
        cross_td: cross_trust_degree(params.delta, cross_dtd, cross_rp),
    }))
}
