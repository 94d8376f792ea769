//! Dynamic conversion of outer-domain roles into local roles.
//!
//! A correlation `outer → local` lets holders of the outer role act as the
//! local role. Transitive correlations are inherited by every strict senior
//! of the correlated outer role; non-transitive ones apply to that exact role
//! only. A visiting role converts to the highest local role among its
//! candidates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DomainId, PermissionId, RoleId};
use crate::roles::{RoleError, RoleHierarchy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error(transparent)]
    Role(#[from] RoleError),
    #[error("correlation set must join two different domains, got {0} twice")]
    SameDomain(DomainId),
    #[error("role {role} is not in domain {expected}")]
    WrongDomain { role: RoleId, expected: DomainId },
    #[error("hierarchy for domain {found} supplied where {expected} was expected")]
    HierarchyMismatch { expected: DomainId, found: DomainId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Transitive,
    NonTransitive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Correlation {
    pub outer_role: RoleId,
    pub local_role: RoleId,
    pub kind: CorrelationKind,
}

impl Correlation {
    pub fn transitive(outer_role: RoleId, local_role: RoleId) -> Self {
        Self {
            outer_role,
            local_role,
            kind: CorrelationKind::Transitive,
        }
    }

    pub fn non_transitive(outer_role: RoleId, local_role: RoleId) -> Self {
        Self {
            outer_role,
            local_role,
            kind: CorrelationKind::NonTransitive,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.kind {
            CorrelationKind::Transitive => "->",
            CorrelationKind::NonTransitive => "->NT",
        };
        write!(f, "{} {} {}", self.outer_role, arrow, self.local_role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationPolicy {
    /// Only the outer guest is mapped, onto the local guest.
    Default,
    /// Every outer role has an explicit correlation.
    Clear,
    /// Anything else.
    Partial,
}

impl fmt::Display for CorrelationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationPolicy::Default => "Default",
            CorrelationPolicy::Clear => "Clear",
            CorrelationPolicy::Partial => "Partial",
        })
    }
}

fn check_hierarchy(h: &RoleHierarchy, expected: &DomainId) -> Result<(), ConversionError> {
    if h.domain() != expected {
        return Err(ConversionError::HierarchyMismatch {
            expected: expected.clone(),
            found: h.domain().clone(),
        });
    }
    Ok(())
}

fn check_member(h: &RoleHierarchy, role: &RoleId) -> Result<(), ConversionError> {
    if &role.domain != h.domain() {
        return Err(ConversionError::WrongDomain {
            role: role.clone(),
            expected: h.domain().clone(),
        });
    }
    if !h.contains(role) {
        return Err(RoleError::UnknownRole(role.clone()).into());
    }
    Ok(())
}

/// Classifies a set of correlations from `outer` into `local`.
///
/// A set consisting of exactly the guest→guest correlation is `Default`
/// even when the outer hierarchy has no other role.
pub fn classify_policy<'a>(
    correlations: impl IntoIterator<Item = &'a Correlation>,
    outer: &RoleHierarchy,
    local: &RoleHierarchy,
) -> Result<CorrelationPolicy, ConversionError> {
    let correlations: Vec<&Correlation> = correlations.into_iter().collect();
    for c in &correlations {
        check_member(outer, &c.outer_role)?;
        check_member(local, &c.local_role)?;
    }
    let is_guest_floor = |c: &Correlation| {
        Some(&c.outer_role) == outer.guest() && Some(&c.local_role) == local.guest()
    };
    if correlations.len() == 1 && is_guest_floor(correlations[0]) {
        return Ok(CorrelationPolicy::Default);
    }
    let mapped: BTreeSet<&RoleId> = correlations.iter().map(|c| &c.outer_role).collect();
    if !outer.is_empty() && outer.roles().all(|r| mapped.contains(r)) {
        Ok(CorrelationPolicy::Clear)
    } else {
        Ok(CorrelationPolicy::Partial)
    }
}

/// Correlations from one outer domain into one local domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationSet {
    outer_domain: DomainId,
    local_domain: DomainId,
    correlations: BTreeSet<Correlation>,
    classification: CorrelationPolicy,
}

impl CorrelationSet {
    pub fn new(
        outer: &RoleHierarchy,
        local: &RoleHierarchy,
        correlations: impl IntoIterator<Item = Correlation>,
    ) -> Result<Self, ConversionError> {
        if outer.domain() == local.domain() {
            return Err(ConversionError::SameDomain(outer.domain().clone()));
        }
        let correlations: BTreeSet<Correlation> = correlations.into_iter().collect();
        let classification = classify_policy(&correlations, outer, local)?;
        Ok(Self {
            outer_domain: outer.domain().clone(),
            local_domain: local.domain().clone(),
            correlations,
            classification,
        })
    }

    pub fn outer_domain(&self) -> &DomainId {
        &self.outer_domain
    }

    pub fn local_domain(&self) -> &DomainId {
        &self.local_domain
    }

    pub fn correlations(&self) -> impl Iterator<Item = &Correlation> {
        self.correlations.iter()
    }

    pub fn classification(&self) -> CorrelationPolicy {
        self.classification
    }

    /// Adds a correlation and refreshes the cached classification.
    pub fn insert(
        &mut self,
        correlation: Correlation,
        outer: &RoleHierarchy,
        local: &RoleHierarchy,
    ) -> Result<(), ConversionError> {
        self.check_hierarchies(outer, local)?;
        let mut next = self.correlations.clone();
        next.insert(correlation);
        self.classification = classify_policy(&next, outer, local)?;
        self.correlations = next;
        Ok(())
    }

    pub(crate) fn check_hierarchies(
        &self,
        outer: &RoleHierarchy,
        local: &RoleHierarchy,
    ) -> Result<(), ConversionError> {
        check_hierarchy(outer, &self.outer_domain)?;
        check_hierarchy(local, &self.local_domain)
    }

    fn guest_floor<'a>(
        &'a self,
        outer: &RoleHierarchy,
        local: &RoleHierarchy,
    ) -> Option<&'a Correlation> {
        self.correlations.iter().find(|c| {
            Some(&c.outer_role) == outer.guest() && Some(&c.local_role) == local.guest()
        })
    }
}

/// Local roles that `outer_role` may act as: targets of its own correlations
/// of either kind, plus targets of transitive correlations on any role it is
/// strictly senior to.
pub fn candidate_roles(
    outer_role: &RoleId,
    cs: &CorrelationSet,
    outer: &RoleHierarchy,
) -> Result<BTreeSet<RoleId>, ConversionError> {
    Ok(contributing(outer_role, cs, outer)?
        .into_iter()
        .map(|c| c.local_role.clone())
        .collect())
}

fn contributing<'a>(
    outer_role: &RoleId,
    cs: &'a CorrelationSet,
    outer: &RoleHierarchy,
) -> Result<Vec<&'a Correlation>, ConversionError> {
    check_hierarchy(outer, &cs.outer_domain)?;
    check_member(outer, outer_role)?;
    let juniors = outer.descendants(outer_role)?;
    Ok(cs
        .correlations
        .iter()
        .filter(|c| {
            &c.outer_role == outer_role
                || (c.kind == CorrelationKind::Transitive && juniors.contains(&c.outer_role))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionResult {
    pub outer_role: RoleId,
    /// `None` means the request must be denied.
    pub local_role: Option<RoleId>,
    pub candidates: BTreeSet<RoleId>,
    pub via: Option<Correlation>,
    pub policy: CorrelationPolicy,
    /// Set when several incomparable maximal candidates existed and the
    /// lexicographically smallest name was picked.
    pub tie_broken: bool,
    /// Set when the candidates came from the guest floor rather than from
    /// correlations on the role or its juniors.
    pub guest_fallback: bool,
}

/// Converts `outer_role` to the highest local role allowed by `cs`.
pub fn convert_role(
    outer_role: &RoleId,
    cs: &CorrelationSet,
    outer: &RoleHierarchy,
    local: &RoleHierarchy,
) -> Result<ConversionResult, ConversionError> {
    cs.check_hierarchies(outer, local)?;
    let hits = contributing(outer_role, cs, outer)?;
    let mut result = ConversionResult {
        outer_role: outer_role.clone(),
        local_role: None,
        candidates: hits.iter().map(|c| c.local_role.clone()).collect(),
        via: None,
        policy: cs.classification,
        tie_broken: false,
        guest_fallback: false,
    };

    if result.candidates.is_empty() {
        let floor = cs.guest_floor(outer, local);
        if floor.is_some() || cs.classification == CorrelationPolicy::Default {
            if let Some(guest) = local.guest() {
                result.candidates.insert(guest.clone());
                result.local_role = Some(guest.clone());
                result.via = floor.cloned();
                result.guest_fallback = true;
            }
        }
        return Ok(result);
    }

    let mut maxima = Vec::new();
    for c in &result.candidates {
        let mut dominated = false;
        for d in &result.candidates {
            if d != c && local.is_ancestor(d, c)? {
                dominated = true;
                break;
            }
        }
        if !dominated {
            maxima.push(c);
        }
    }
    // candidates iterate in sorted order, so the first maximum has the
    // smallest name
    let winner = maxima[0].clone();
    result.tie_broken = maxima.len() > 1;
    result.via = hits
        .iter()
        .copied()
        .filter(|c| c.local_role == winner)
        .min_by_key(|c| (&c.outer_role != outer_role, *c))
        .cloned();
    result.local_role = Some(winner);
    Ok(result)
}

/// For every outer role, the effective local permissions of the role it
/// converts to (empty when it does not convert).
pub fn build_access_point_list(
    cs: &CorrelationSet,
    outer: &RoleHierarchy,
    local: &RoleHierarchy,
) -> Result<BTreeMap<RoleId, BTreeSet<PermissionId>>, ConversionError> {
    let mut out = BTreeMap::new();
    for role in outer.roles() {
        let conv = convert_role(role, cs, outer, local)?;
        let perms = match &conv.local_role {
            Some(r) => local.effective_permissions(r)?,
            None => BTreeSet::new(),
        };
        out.insert(role.clone(), perms);
    }
    Ok(out)
}
