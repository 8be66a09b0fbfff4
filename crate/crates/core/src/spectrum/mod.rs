//! Entitlement tokens, regional policy servers and short-term grants.

pub mod grant;
pub mod profile;
pub mod radio;
pub mod server;
pub mod token;

pub use grant::{check_conflict, ConflictCheck, Grant};
pub use profile::{AccessModel, ProfileError, RegionalProfile};
pub use radio::{RadioAction, RadioController, RadioParams, RadioStatus, SilentReason};
pub use server::{
    Decision, DenialReason, GrantRequest, InvalidReason, PolicyServer, TokenValidity, DEFAULT_MAX_GRANT_DURATION,
};
pub use token::{EntitlementToken, Issuer, OperatorClass, RegionScope, Subject, TokenError, TokenRequest};
