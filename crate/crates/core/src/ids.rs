//! Identifiers shared by every subsystem.
//!
//! Entities and roles are scoped to a security domain; their textual form is
//! `DOMAIN/name`, which is also what the scenario format and CLI accept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier must not be empty")]
    Empty,
    #[error("expected DOMAIN/name, got `{0}`")]
    Malformed(String),
}

/// Name of a security management domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(String);

impl DomainId {
    pub fn new(name: impl Into<String>) -> Result<Self, IdError> {
        let name = name.into();
        if name.is_empty() || name.contains('/') {
            return Err(IdError::Malformed(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn split_scoped(s: &str) -> Result<(DomainId, String), IdError> {
    let (domain, name) = s
        .split_once('/')
        .ok_or_else(|| IdError::Malformed(s.to_string()))?;
    if name.is_empty() {
        return Err(IdError::Empty);
    }
    Ok((DomainId::new(domain)?, name.to_string()))
}

macro_rules! scoped_id {
    ($(#[$meta:meta])* $name:ident, $field:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name {
            pub domain: DomainId,
            pub $field: String,
        }

        impl $name {
            pub fn new(domain: &DomainId, $field: impl Into<String>) -> Result<Self, IdError> {
                let $field = $field.into();
                if $field.is_empty() {
                    return Err(IdError::Empty);
                }
                Ok(Self { domain: domain.clone(), $field })
            }

            /// Convenience constructor for literals known to be valid; panics otherwise.
            pub fn of(domain: &str, $field: &str) -> Self {
                Self::new(&DomainId::new(domain).expect("valid domain"), $field)
                    .expect("valid name")
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}/{}", self.domain, self.$field)
            }
        }

        impl FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let (domain, $field) = split_scoped(s)?;
                Ok(Self { domain, $field })
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

scoped_id!(
    /// A cloud user, service, or resource provider, unique as `(domain, local_name)`.
    EntityId,
    local_name
);

scoped_id!(
    /// A role in one domain's hierarchy.
    RoleId,
    name
);

/// A resource or service identifier within a domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub String);

impl ResourceId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An access point: a named operation on a resource.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PermissionId {
    pub name: String,
    pub resource: ResourceId,
}

impl PermissionId {
    pub fn new(name: impl Into<String>, resource: impl Into<String>) -> Result<Self, IdError> {
        let name = name.into();
        if name.is_empty() {
            return Err(IdError::Empty);
        }
        Ok(Self {
            name,
            resource: ResourceId::new(resource),
        })
    }
}

impl fmt::Display for PermissionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.resource)
    }
}
