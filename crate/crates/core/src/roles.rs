//! Per-domain role hierarchies.
//!
//! Edges run parent → child (senior → junior). `a ≥ b` is the
//! reflexive-transitive closure of the edge relation; seniors inherit every
//! permission held by their juniors.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{DomainId, PermissionId, RoleId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoleError {
    #[error("role {0} already exists")]
    DuplicateRole(RoleId),
    #[error("parent role {0} does not exist")]
    UnknownParent(RoleId),
    #[error("unknown role {0}")]
    UnknownRole(RoleId),
    #[error("role {role} does not belong to domain {domain}")]
    ForeignRole { role: RoleId, domain: DomainId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Cycle { roles: Vec<RoleId> },
    DanglingEdge { parent: RoleId, child: RoleId },
    ForeignRole { role: RoleId },
    MissingGuest,
    GuestNotMember { guest: RoleId },
    GuestNotMinimal { guest: RoleId, children: Vec<RoleId> },
    UnknownPermissionHolder { role: RoleId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { roles } => {
                let names: Vec<_> = roles.iter().map(ToString::to_string).collect();
                write!(f, "cycle among roles {}", names.join(", "))
            }
            Violation::DanglingEdge { parent, child } => {
                write!(f, "edge {parent} -> {child} references a non-member role")
            }
            Violation::ForeignRole { role } => write!(f, "role {role} belongs to another domain"),
            Violation::MissingGuest => f.write_str("non-empty hierarchy has no guest role"),
            Violation::GuestNotMember { guest } => write!(f, "guest {guest} is not a member role"),
            Violation::GuestNotMinimal { guest, .. } => {
                write!(f, "guest {guest} has junior roles")
            }
            Violation::UnknownPermissionHolder { role } => {
                write!(f, "permissions assigned to non-member role {role}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleHierarchy {
    domain: DomainId,
    roles: BTreeSet<RoleId>,
    /// (parent, child)
    edges: BTreeSet<(RoleId, RoleId)>,
    permissions: BTreeMap<RoleId, BTreeSet<PermissionId>>,
    guest: Option<RoleId>,
}

impl RoleHierarchy {
    pub fn empty(domain: DomainId) -> Self {
        Self {
            domain,
            roles: BTreeSet::new(),
            edges: BTreeSet::new(),
            permissions: BTreeMap::new(),
            guest: None,
        }
    }

    /// A hierarchy holding only its guest role.
    pub fn with_guest(domain: DomainId, guest: &str) -> Result<Self, RoleError> {
        let guest = RoleId {
            domain: domain.clone(),
            name: guest.to_string(),
        };
        let mut h = Self::empty(domain).add_role(guest.clone(), &[])?;
        h.guest = Some(guest);
        Ok(h)
    }

    /// Assembles a hierarchy without any checks; run [`validate`](Self::validate)
    /// before trusting the result.
    pub fn from_parts(
        domain: DomainId,
        roles: BTreeSet<RoleId>,
        edges: BTreeSet<(RoleId, RoleId)>,
        permissions: BTreeMap<RoleId, BTreeSet<PermissionId>>,
        guest: Option<RoleId>,
    ) -> Self {
        Self {
            domain,
            roles,
            edges,
            permissions,
            guest,
        }
    }

    pub fn domain(&self) -> &DomainId {
        &self.domain
    }

    pub fn roles(&self) -> impl Iterator<Item = &RoleId> {
        self.roles.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(RoleId, RoleId)> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn contains(&self, role: &RoleId) -> bool {
        self.roles.contains(role)
    }

    pub fn guest(&self) -> Option<&RoleId> {
        self.guest.as_ref()
    }

    pub fn role(&self, name: &str) -> Option<&RoleId> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn set_guest(&mut self, guest: RoleId) -> Result<(), RoleError> {
        self.require(&guest)?;
        self.guest = Some(guest);
        Ok(())
    }

    /// Adds `role` below each of `parents`. A new role has no juniors, so the
    /// edge graph stays acyclic.
    pub fn add_role(mut self, role: RoleId, parents: &[RoleId]) -> Result<Self, RoleError> {
        if role.domain != self.domain {
            return Err(RoleError::ForeignRole {
                role,
                domain: self.domain,
            });
        }
        if self.roles.contains(&role) {
            return Err(RoleError::DuplicateRole(role));
        }
        if let Some(missing) = parents.iter().find(|p| !self.roles.contains(*p)) {
            return Err(RoleError::UnknownParent(missing.clone()));
        }
        for parent in parents {
            self.edges.insert((parent.clone(), role.clone()));
        }
        self.roles.insert(role);
        Ok(self)
    }

    pub fn grant(
        &mut self,
        role: &RoleId,
        perms: impl IntoIterator<Item = PermissionId>,
    ) -> Result<(), RoleError> {
        self.require(role)?;
        self.permissions.entry(role.clone()).or_default().extend(perms);
        Ok(())
    }

    pub fn own_permissions(&self, role: &RoleId) -> Option<&BTreeSet<PermissionId>> {
        self.permissions.get(role)
    }

    fn require(&self, role: &RoleId) -> Result<(), RoleError> {
        if self.roles.contains(role) {
            Ok(())
        } else {
            Err(RoleError::UnknownRole(role.clone()))
        }
    }

    pub fn children<'a>(&'a self, role: &'a RoleId) -> impl Iterator<Item = &'a RoleId> + 'a {
        self.edges
            .iter()
            .filter(move |(p, _)| p == role)
            .map(|(_, c)| c)
    }

    /// Every role reachable from `role` by zero or more parent→child steps.
    pub fn descendants(&self, role: &RoleId) -> Result<BTreeSet<RoleId>, RoleError> {
        self.require(role)?;
        let mut seen = BTreeSet::from([role.clone()]);
        let mut queue = VecDeque::from([role.clone()]);
        while let Some(next) = queue.pop_front() {
            for child in self.children(&next) {
                if seen.insert(child.clone()) {
                    queue.push_back(child.clone());
                }
            }
        }
        Ok(seen)
    }

    /// `a ≥ b`: true when `a == b` or `a` is a (transitive) senior of `b`.
    pub fn is_ancestor(&self, a: &RoleId, b: &RoleId) -> Result<bool, RoleError> {
        self.require(b)?;
        Ok(self.descendants(a)?.contains(b))
    }

    /// `a > b`.
    pub fn is_strict_ancestor(&self, a: &RoleId, b: &RoleId) -> Result<bool, RoleError> {
        let ge = self.is_ancestor(a, b)?;
        Ok(ge && a != b)
    }

    /// Own permissions plus those of every junior role.
    pub fn effective_permissions(&self, role: &RoleId) -> Result<BTreeSet<PermissionId>, RoleError> {
        Ok(self
            .descendants(role)?
            .iter()
            .filter_map(|r| self.permissions.get(r))
            .flatten()
            .cloned()
            .collect())
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for role in &self.roles {
            if role.domain != self.domain {
                out.push(Violation::ForeignRole { role: role.clone() });
            }
        }
        for (parent, child) in &self.edges {
            if !self.roles.contains(parent) || !self.roles.contains(child) {
                out.push(Violation::DanglingEdge {
                    parent: parent.clone(),
                    child: child.clone(),
                });
            }
        }
        for role in self.permissions.keys() {
            if !self.roles.contains(role) {
                out.push(Violation::UnknownPermissionHolder { role: role.clone() });
            }
        }
        out.extend(self.cycles().into_iter().map(|roles| Violation::Cycle { roles }));
        match &self.guest {
            None if !self.roles.is_empty() => out.push(Violation::MissingGuest),
            None => {}
            Some(g) if !self.roles.contains(g) => {
                out.push(Violation::GuestNotMember { guest: g.clone() })
            }
            Some(g) => {
                let children: Vec<_> = self.children(g).cloned().collect();
                if !children.is_empty() {
                    out.push(Violation::GuestNotMinimal {
                        guest: g.clone(),
                        children,
                    });
                }
            }
        }
        out
    }

    /// Strongly connected groups that form cycles, one entry per group.
    fn cycles(&self) -> Vec<Vec<RoleId>> {
        let members: Vec<&RoleId> = self.roles.iter().collect();
        let reach: BTreeMap<&RoleId, BTreeSet<RoleId>> = members
            .iter()
            .map(|r| (*r, self.strict_reach(r)))
            .collect();
        let mut assigned = BTreeSet::new();
        let mut groups = Vec::new();
        for r in &members {
            if assigned.contains(*r) || !reach[r].contains(*r) {
                continue;
            }
            let group: Vec<RoleId> = members
                .iter()
                .filter(|o| reach[r].contains(**o) && reach[**o].contains(*r))
                .map(|o| (*o).clone())
                .collect();
            assigned.extend(group.iter().cloned());
            groups.push(group);
        }
        groups
    }

    /// Roles reachable in one or more steps (may include `role` on a cycle).
    fn strict_reach(&self, role: &RoleId) -> BTreeSet<RoleId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<RoleId> = self.children(role).cloned().collect();
        while let Some(next) = queue.pop_front() {
            if seen.insert(next.clone()) {
                queue.extend(self.children(&next).cloned());
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(name: &str) -> RoleId {
        RoleId::of("D", name)
    }

    fn dom() -> DomainId {
        DomainId::new("D").unwrap()
    }

    fn p(name: &str) -> PermissionId {
        PermissionId::new(name, name).unwrap()
    }

    #[test]
    fn guest_on_empty_hierarchy() {
        let h = RoleHierarchy::empty(dom()).add_role(r("Guest"), &[]).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.children(&r("Guest")).count(), 0);
        let h = RoleHierarchy::with_guest(dom(), "Guest").unwrap();
        assert!(h.validate().is_empty());
    }

    #[test]
    fn single_edge_ancestry() {
        let h = RoleHierarchy::with_guest(dom(), "Guest")
            .unwrap()
            .add_role(r("Dean"), &[])
            .unwrap()
            .add_role(r("Professor"), &[r("Dean")])
            .unwrap();
        assert!(h.is_ancestor(&r("Dean"), &r("Professor")).unwrap());
        assert!(!h.is_ancestor(&r("Professor"), &r("Dean")).unwrap());
    }

    #[test]
    fn add_role_errors() {
        let h = RoleHierarchy::with_guest(dom(), "Guest").unwrap();
        assert_eq!(
            h.clone().add_role(r("Guest"), &[]),
            Err(RoleError::DuplicateRole(r("Guest")))
        );
        assert_eq!(
            h.clone().add_role(r("A"), &[r("Nope")]),
            Err(RoleError::UnknownParent(r("Nope")))
        );
        assert!(matches!(
            h.add_role(RoleId::of("E", "A"), &[]),
            Err(RoleError::ForeignRole { .. })
        ));
    }

    #[test]
    fn reflexive_and_transitive() {
        let h = RoleHierarchy::with_guest(dom(), "c")
            .unwrap()
            .add_role(r("b"), &[])
            .unwrap();
        // rebuild so that a -> b -> c
        let h = RoleHierarchy::from_parts(
            dom(),
            [r("a"), r("b"), r("c")].into(),
            [(r("a"), r("b")), (r("b"), r("c"))].into(),
            BTreeMap::new(),
            h.guest().cloned(),
        );
        assert!(h.validate().is_empty());
        assert!(h.is_ancestor(&r("a"), &r("a")).unwrap());
        assert!(h.is_ancestor(&r("a"), &r("c")).unwrap());
        assert!(!h.is_strict_ancestor(&r("a"), &r("a")).unwrap());
        assert_eq!(
            h.is_ancestor(&r("a"), &r("zz")),
            Err(RoleError::UnknownRole(r("zz")))
        );
    }

    #[test]
    fn siblings_are_incomparable() {
        // top -> {left, right}, left -> bottom
        let h = RoleHierarchy::with_guest(dom(), "bottom").unwrap();
        let h = RoleHierarchy::from_parts(
            dom(),
            [r("top"), r("left"), r("right"), r("bottom")].into(),
            [(r("top"), r("left")), (r("top"), r("right")), (r("left"), r("bottom"))].into(),
            BTreeMap::new(),
            h.guest().cloned(),
        );
        assert!(!h.is_ancestor(&r("left"), &r("right")).unwrap());
        assert!(!h.is_ancestor(&r("right"), &r("left")).unwrap());
        assert!(h.is_ancestor(&r("top"), &r("bottom")).unwrap());
        assert!(!h.is_ancestor(&r("right"), &r("bottom")).unwrap());
    }

    #[test]
    fn permissions_inherit_upward() {
        let mut h = RoleHierarchy::with_guest(dom(), "Guest").unwrap();
        h.grant(&r("Guest"), [p("read")]).unwrap();
        assert_eq!(h.effective_permissions(&r("Guest")).unwrap(), [p("read")].into());
        let h = h.add_role(r("Boss"), &[]).unwrap();
        let h = RoleHierarchy::from_parts(
            dom(),
            h.roles().cloned().collect(),
            [(r("Boss"), r("Guest"))].into(),
            [(r("Guest"), BTreeSet::from([p("read")]))].into(),
            Some(r("Guest")),
        );
        assert_eq!(h.effective_permissions(&r("Boss")).unwrap(), [p("read")].into());
    }

    #[test]
    fn diamond_permissions_match_reachability() {
        // a -> {b, c} -> d -> e
        let roles = ["a", "b", "c", "d", "e"];
        let edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")];
        let mut perms = BTreeMap::new();
        for name in roles {
            perms.insert(r(name), BTreeSet::from([p(&format!("{name}-op"))]));
        }
        let h = RoleHierarchy::from_parts(
            dom(),
            roles.iter().map(|n| r(n)).collect(),
            edges.iter().map(|(x, y)| (r(x), r(y))).collect(),
            perms,
            Some(r("e")),
        );
        assert!(h.validate().is_empty());
        let reach = closure(&roles, &edges);
        for (i, name) in roles.iter().enumerate() {
            let expected: BTreeSet<_> = roles
                .iter()
                .enumerate()
                .filter(|(j, _)| reach[i][*j])
                .map(|(_, n)| p(&format!("{n}-op")))
                .collect();
            assert_eq!(h.effective_permissions(&r(name)).unwrap(), expected);
        }
    }

    #[test]
    fn validate_reports_each_defect() {
        assert!(RoleHierarchy::empty(dom()).validate().is_empty());

        let cyclic = RoleHierarchy::from_parts(
            dom(),
            [r("g"), r("x"), r("y")].into(),
            [(r("x"), r("y")), (r("y"), r("x"))].into(),
            BTreeMap::new(),
            Some(r("g")),
        );
        let v = cyclic.validate();
        assert_eq!(v, vec![Violation::Cycle { roles: vec![r("x"), r("y")] }]);

        let guest_parent = RoleHierarchy::from_parts(
            dom(),
            [r("g"), r("x")].into(),
            [(r("g"), r("x"))].into(),
            BTreeMap::new(),
            Some(r("g")),
        );
        assert_eq!(
            guest_parent.validate(),
            vec![Violation::GuestNotMinimal { guest: r("g"), children: vec![r("x")] }]
        );

        let dangling = RoleHierarchy::from_parts(
            dom(),
            [r("g")].into(),
            [(r("ghost"), r("g"))].into(),
            BTreeMap::new(),
            None,
        );
        let v = dangling.validate();
        assert!(v.contains(&Violation::MissingGuest));
        assert!(v.iter().any(|x| matches!(x, Violation::DanglingEdge { .. })));
    }

    /// Floyd-Warshall style reflexive-transitive closure over index pairs.
    fn closure(names: &[&str], edges: &[(&str, &str)]) -> Vec<Vec<bool>> {
        let n = names.len();
        let idx = |s: &str| names.iter().position(|x| *x == s).unwrap();
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in edges {
            m[idx(a)][idx(b)] = true;
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
        m
    }

    /// Random DAG over `n` roles: edges only from lower to higher index.
    fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..=12).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let len = pairs.len();
            (Just(n), proptest::sample::subsequence(pairs, 0..=len.min(20)))
        })
    }

    fn build(n: usize, edges: &[(usize, usize)]) -> (RoleHierarchy, Vec<String>) {
        let names: Vec<String> = (0..n).map(|i| format!("r{i:02}")).collect();
        let mut perms = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if i % 2 == 0 {
                perms.insert(r(name), BTreeSet::from([p(&format!("p{i}"))]));
            }
        }
        let h = RoleHierarchy::from_parts(
            dom(),
            names.iter().map(|s| r(s)).collect(),
            edges.iter().map(|(a, b)| (r(&names[*a]), r(&names[*b]))).collect(),
            perms,
            None,
        );
        (h, names)
    }

    proptest! {
        #[test]
        fn partial_order_laws((n, edges) in dag()) {
            let (h, names) = build(n, &edges);
            let ge = |a: &str, b: &str| h.is_ancestor(&r(a), &r(b)).unwrap();
            for a in &names {
                prop_assert!(ge(a, a));
                for b in &names {
                    if a != b && ge(a, b) {
                        prop_assert!(!ge(b, a));
                    }
                    for c in &names {
                        if ge(a, b) && ge(b, c) {
                            prop_assert!(ge(a, c));
                        }
                    }
                }
            }
        }

        #[test]
        fn ancestry_matches_closure_oracle((n, edges) in dag()) {
            let (h, names) = build(n, &edges);
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let named: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (refs[*a], refs[*b])).collect();
            let m = closure(&refs, &named);
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(h.is_ancestor(&r(refs[i]), &r(refs[j])).unwrap(), m[i][j]);
                }
            }
        }

        #[test]
        fn permissions_are_monotone((n, edges) in dag()) {
            let (h, names) = build(n, &edges);
            for a in &names {
                for b in &names {
                    if h.is_ancestor(&r(a), &r(b)).unwrap() {
                        let pa = h.effective_permissions(&r(a)).unwrap();
                        let pb = h.effective_permissions(&r(b)).unwrap();
                        prop_assert!(pa.is_superset(&pb));
                    }
                }
            }
        }
    }
}
