//! Line-oriented text formats for networks (`.tioa`), deviation rules
//! (`.drs`) and test purposes (`.tp`). All formats accept `#` comments and
//! print canonically so that printed output reparses to an equal value.

use std::collections::BTreeMap;

mod lexer;
mod network;
mod purposes;
mod rules;

pub use lexer::Diagnostic;
pub use network::{parse_network, parse_network_document, print_network};
pub use purposes::{parse_test_purposes, print_test_purposes};
pub(crate) use purposes::parse_window;
pub use rules::{parse_rules, print_rules};

/// A parsed document with the source positions of its named nodes
/// (`channel.ID`, `ROLE.loc.NAME`, `ROLE.edge.INDEX`).
#[derive(Debug, Clone)]
pub struct ModelDocument<T> {
    pub source: String,
    pub value: T,
    pub spans: BTreeMap<String, (usize, usize)>,
}
