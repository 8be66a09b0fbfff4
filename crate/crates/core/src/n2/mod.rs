//! Dual-mode N2 control plane.

pub mod amf;
pub mod journal;
pub mod mode;
pub mod node;
pub mod op;
pub mod reconcile;

pub use amf::{AmfState, RadioConfig, Registration, SemanticError, SessionRecord, SessionState};
pub use journal::{Journal, JournalError};
pub use mode::{ModeMachine, ModeTransition, N2Mode};
pub use node::{ControlRequest, ControlResponse, Disposition, N2Node, ServedBy};
pub use op::{ControlAction, ControlOp, OpId, OpKind, PolicyTarget};
pub use reconcile::{merge_order, replay, Census, CentralAmf, DuplicateOpId, ReconcileReport, Rejection, Replay};
