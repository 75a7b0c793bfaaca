//! Timed input/output automata over integer clocks, two-party networks and
//! their step semantics.

mod extend;
mod model;
mod semantics;
mod validate;

pub use extend::{
    awaited_edges, extend_model, nominal_restriction, DeviationRule, DeviationRuleSet,
    ExtendError,
};
pub use model::*;
pub use semantics::{
    delay, emit_slack, enabled_edges, fire, ready_emit, ChannelMode, NetworkState, SemanticsError, Transition,
};
pub use validate::{validate, Issue, ValidationReport};
