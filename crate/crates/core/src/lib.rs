//! Trust-gated role-based access control across multiple security domains.
//!
//! * [`trust`]: pairwise QoS / direct trust, reputation and domain trust.
//! * [`crossdomain`]: trust of one domain in another.
//! * [`roles`]: partial-order role hierarchies with permission inheritance.
//! * [`conversion`]: correlation policies and outer→local role conversion.
//! * [`policy`]: the per-domain authentication and authorization center.
//! * [`federation`]: the coordinator that runs the cross-domain protocol.
//! * [`sim`]: scenario files and the deterministic simulator.

pub mod conversion;
pub mod crossdomain;
pub mod federation;
pub mod fixtures;
pub mod ids;
pub mod policy;
pub mod roles;
pub mod sim;
pub mod trust;

pub use conversion::{
    build_access_point_list, candidate_roles, classify_policy, convert_role, ConversionResult,
    Correlation, CorrelationKind, CorrelationPolicy, CorrelationSet,
};
pub use crossdomain::{CrossParams, DomainPairTrust, ThetaWeights};
pub use ids::{DomainId, EntityId, PermissionId, ResourceId, RoleId};
pub use roles::{RoleHierarchy, Violation};
pub use trust::{DomainTrustView, ExperienceRating, PairwiseTrust, TrustLedger, TrustParams};
pub use policy::{
    AccessRequest, Aac, Authorization, Certificate, Credential, Decision, DenyReason, Outcome,
    PolicyDatabase, PolicyError, SigningKey,
};
pub use federation::{
    CrossDomainRequest, CrossOutcome, FeedbackSource, Federation, FederationConfig, FederationError,
    ProtocolTrace, Step,
};
pub use sim::{run, validate_scenario, RunOutput, Scenario, ScenarioViolation, SimError, Simulation, TraceEvent};
