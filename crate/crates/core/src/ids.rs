//! String identifiers for actors and model objects.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
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

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(
    /// Any party that can own resources or issue requests: InPs, tenants,
    /// end users, administrators and functional blocks.
    ActorId
);
string_id!(SliceId);
string_id!(
    /// An NFVI-PoP or WAN exchange point.
    SiteId
);
string_id!(LinkId);
string_id!(VnfId);
string_id!(
    /// A VM hosting exactly one VNF.
    HostId
);
string_id!(DescriptorId);
string_id!(BlueprintId);
string_id!(ContextId);
string_id!(ControllerId);
string_id!(ManagerId);
string_id!(InstanceId);
