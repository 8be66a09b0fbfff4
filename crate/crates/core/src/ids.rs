//! String-backed identifiers for the entities a scenario names.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// A nomadic node. The reserved id `CORE` names the central core network.
    NodeId
);
string_id!(RegionId);
string_id!(AuthorityId);
string_id!(BandId);
string_id!(
    /// A bearer. Every bearer owns exactly one link, so this also keys the link table.
    BearerId
);
string_id!(UeId);
string_id!(SessionId);
string_id!(TokenId);
string_id!(GrantId);
string_id!(KeyId);

/// Reserved node id of the central core network.
pub const CORE: &str = "CORE";

impl NodeId {
    pub fn core() -> Self {
        Self(CORE.to_owned())
    }

    pub fn is_core(&self) -> bool {
        self.0 == CORE
    }
}
