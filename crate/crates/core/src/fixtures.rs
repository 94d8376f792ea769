//! The two-university/company hierarchies used throughout the tests and the
//! demo page.
//!
//! ```text
//! DM0 (local)                      DM1 (outer)
//!        Dean                           Director
//!       /    \                             |
//! Professor  Staff                      Manager
//!       \    /                          /     \
//!       Guest                       Clerk   Engineer
//!                                       \     /
//!                                        Guest
//! ```
//!
//! Correlations: `Manager -> Professor` (transitive), `Clerk ->NT Staff`,
//! `Guest -> Guest` (transitive).

use crate::conversion::{Correlation, CorrelationSet};
use crate::ids::{DomainId, PermissionId, RoleId};
use crate::roles::RoleHierarchy;

fn perm(name: &str, resource: &str) -> PermissionId {
    PermissionId::new(name, resource).expect("fixture permission")
}

/// Builds a hierarchy top-down from `(role, parents)` rows; the last row's
/// role becomes the guest.
fn build(domain: &str, rows: &[(&str, &[&str])], grants: &[(&str, &str, &str)]) -> RoleHierarchy {
    let d = DomainId::new(domain).expect("domain");
    let role = |n: &str| RoleId::of(domain, n);
    let mut h = RoleHierarchy::empty(d);
    for (name, parents) in rows {
        let parents: Vec<RoleId> = parents.iter().map(|p| role(p)).collect();
        h = h.add_role(role(name), &parents).expect("fixture role");
    }
    let guest = rows.last().expect("non-empty").0;
    h.set_guest(role(guest)).expect("member");
    for (r, p, res) in grants {
        h.grant(&role(r), [perm(p, res)]).expect("member");
    }
    h
}

/// `(H0, H1)`: the local DM0 hierarchy and the outer DM1 hierarchy.
pub fn campus_corp() -> (RoleHierarchy, RoleHierarchy) {
    let h0 = build(
        "DM0",
        &[
            ("Dean", &[]),
            ("Professor", &["Dean"]),
            ("Staff", &["Dean"]),
            ("Guest", &["Professor", "Staff"]),
        ],
        &[
            ("Guest", "read", "portal"),
            ("Staff", "file", "records"),
            ("Professor", "run", "lab-app"),
            ("Dean", "approve", "budget"),
        ],
    );
    let h1 = build(
        "DM1",
        &[
            ("Director", &[]),
            ("Manager", &["Director"]),
            ("Clerk", &["Manager"]),
            ("Engineer", &["Manager"]),
            ("Guest", &["Clerk", "Engineer"]),
        ],
        &[
            ("Guest", "view", "intranet"),
            ("Clerk", "file", "invoices"),
            ("Engineer", "deploy", "service"),
            ("Manager", "approve", "orders"),
            ("Director", "sign", "contracts"),
        ],
    );
    (h0, h1)
}

/// Correlations 1, 2 and 3 from DM1 into DM0.
pub fn campus_corp_correlations() -> Vec<Correlation> {
    vec![
        Correlation::transitive(RoleId::of("DM1", "Manager"), RoleId::of("DM0", "Professor")),
        Correlation::non_transitive(RoleId::of("DM1", "Clerk"), RoleId::of("DM0", "Staff")),
        Correlation::transitive(RoleId::of("DM1", "Guest"), RoleId::of("DM0", "Guest")),
    ]
}

pub fn campus_corp_set() -> CorrelationSet {
    let (h0, h1) = campus_corp();
    CorrelationSet::new(&h1, &h0, campus_corp_correlations()).expect("fixture correlations")
}
