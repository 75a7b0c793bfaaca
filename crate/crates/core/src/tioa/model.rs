use std::collections::BTreeMap;
use std::fmt;

/// Clock valuation, keyed by clock identifier.
pub type Valuation = BTreeMap<String, u64>;

/// Role of an automaton inside a two-party network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Master,
    Slave,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::Master, Role::Slave];

    pub fn peer(self) -> Role {
        match self {
            Role::Master => Role::Slave,
            Role::Slave => Role::Master,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Master => "master",
            Role::Slave => "slave",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "master" => Some(Role::Master),
            "slave" => Some(Role::Slave),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    pub fn holds(self, value: u64, bound: u64) -> bool {
        match self {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound,
            Relation::Eq => value == bound,
            Relation::Ge => value >= bound,
            Relation::Gt => value > bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "==",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    pub fn parse(s: &str) -> Option<Relation> {
        Some(match s {
            "<" => Relation::Lt,
            "<=" => Relation::Le,
            "==" => Relation::Eq,
            ">=" => Relation::Ge,
            ">" => Relation::Gt,
            _ => return None,
        })
    }

    /// Integer interval `[lo, hi]` of values satisfying `x REL bound`; `None` for `hi` means unbounded.
    pub fn interval(self, bound: u64) -> (u64, Option<u64>) {
        match self {
            Relation::Lt => (0, (bound > 0).then(|| bound - 1)),
            Relation::Le => (0, Some(bound)),
            Relation::Eq => (bound, Some(bound)),
            Relation::Ge => (bound, None),
            Relation::Gt => (bound + 1, None),
        }
    }
}

/// One `clock REL bound` atom of a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Conjunct {
    pub clock: String,
    pub relation: Relation,
    pub bound: u64,
}

impl Conjunct {
    pub fn new(clock: impl Into<String>, relation: Relation, bound: u64) -> Self {
        Self {
            clock: clock.into(),
            relation,
            bound,
        }
    }

    pub fn holds(&self, clocks: &Valuation) -> bool {
        clocks
            .get(&self.clock)
            .is_some_and(|&v| self.relation.holds(v, self.bound))
    }

    /// `Lt 0` can never hold, which `interval` reports as an empty range.
    fn is_unsatisfiable(&self) -> bool {
        self.relation == Relation::Lt && self.bound == 0
    }
}

impl fmt::Display for Conjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.clock, self.relation.symbol(), self.bound)
    }
}

/// Conjunction of clock comparisons; the empty conjunction is `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ClockConstraint {
    pub conjuncts: Vec<Conjunct>,
}

impl ClockConstraint {
    pub fn truth() -> Self {
        Self::default()
    }

    pub fn new(conjuncts: Vec<Conjunct>) -> Self {
        Self { conjuncts }
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn holds(&self, clocks: &Valuation) -> bool {
        self.conjuncts.iter().all(|c| c.holds(clocks))
    }

    pub fn clocks(&self) -> impl Iterator<Item = &str> {
        self.conjuncts.iter().map(|c| c.clock.as_str())
    }

    /// Whether some valuation (treating clocks as independent) satisfies both constraints.
    pub fn overlaps(&self, other: &ClockConstraint) -> bool {
        let mut ranges: BTreeMap<&str, (u64, Option<u64>)> = BTreeMap::new();
        for c in self.conjuncts.iter().chain(&other.conjuncts) {
            if c.is_unsatisfiable() {
                return false;
            }
            let (lo, hi) = c.relation.interval(c.bound);
            let entry = ranges.entry(c.clock.as_str()).or_insert((0, None));
            entry.0 = entry.0.max(lo);
            entry.1 = match (entry.1, hi) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
        ranges
            .values()
            .all(|&(lo, hi)| hi.is_none_or(|hi| lo <= hi))
    }
}

impl fmt::Display for ClockConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjuncts.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LocationKind {
    #[default]
    Normal,
    Recovery,
    Error,
}

impl LocationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LocationKind::Normal => "normal",
            LocationKind::Recovery => "recovery",
            LocationKind::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "normal" => LocationKind::Normal,
            "recovery" => LocationKind::Recovery,
            "error" => LocationKind::Error,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub name: String,
    pub invariant: ClockConstraint,
    pub kind: LocationKind,
}

impl Location {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            invariant: ClockConstraint::truth(),
            kind: LocationKind::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Emit,
    Receive,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Emit => "emit",
            Direction::Receive => "receive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "emit" => Some(Direction::Emit),
            "receive" => Some(Direction::Receive),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Origin {
    #[default]
    Nominal,
    MinorDeviation,
    MajorDeviation,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Nominal => "nominal",
            Origin::MinorDeviation => "minor",
            Origin::MajorDeviation => "major",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "nominal" => Origin::Nominal,
            "minor" => Origin::MinorDeviation,
            "major" => Origin::MajorDeviation,
            _ => return None,
        })
    }
}

/// Payload constraint of an edge.
///
/// On emit edges the pattern must be fully concrete (or `Any`, which emits zero bytes);
/// on receive edges it filters which incoming payloads the edge accepts.
/// `None` entries are wildcard bytes, written `??`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum PayloadMatcher {
    #[default]
    Any,
    Bytes(Vec<Option<u8>>),
    Not(Vec<Option<u8>>),
}

impl PayloadMatcher {
    pub fn exact(bytes: &[u8]) -> Self {
        PayloadMatcher::Bytes(bytes.iter().copied().map(Some).collect())
    }

    pub fn matches(&self, payload: &[u8]) -> bool {
        match self {
            PayloadMatcher::Any => true,
            PayloadMatcher::Bytes(p) => pattern_matches(p, payload),
            PayloadMatcher::Not(p) => !pattern_matches(p, payload),
        }
    }

    pub fn is_any(&self) -> bool {
        matches!(self, PayloadMatcher::Any)
    }

    /// Concrete bytes when every position is fixed.
    pub fn concrete(&self) -> Option<Vec<u8>> {
        match self {
            PayloadMatcher::Bytes(p) => p.iter().copied().collect(),
            _ => None,
        }
    }

    /// Bytes emitted by an emit edge carrying this matcher on a channel of `len` bytes.
    pub fn emitted(&self, len: usize) -> Vec<u8> {
        self.concrete().unwrap_or_else(|| vec![0; len])
    }

    pub fn pattern_len(&self) -> Option<usize> {
        match self {
            PayloadMatcher::Any => None,
            PayloadMatcher::Bytes(p) | PayloadMatcher::Not(p) => Some(p.len()),
        }
    }

    /// Whether some payload of length `len` satisfies both matchers.
    pub fn overlaps(&self, other: &PayloadMatcher) -> bool {
        use PayloadMatcher::*;
        match (self, other) {
            (Any, _) | (_, Any) => true,
            (Bytes(a), Bytes(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| x.is_none() || y.is_none() || x == y)
            }
            (Bytes(a), Not(b)) | (Not(b), Bytes(a)) => !pattern_subsumes(b, a),
            (Not(_), Not(_)) => true,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        if text == "*" {
            return Some(PayloadMatcher::Any);
        }
        let (negated, body) = match text.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let pattern = parse_pattern(body)?;
        Some(if negated {
            PayloadMatcher::Not(pattern)
        } else {
            PayloadMatcher::Bytes(pattern)
        })
    }
}

fn pattern_matches(pattern: &[Option<u8>], payload: &[u8]) -> bool {
    pattern.len() == payload.len()
        && pattern
            .iter()
            .zip(payload)
            .all(|(p, b)| p.is_none_or(|p| p == *b))
}

/// Every payload matched by `inner` is matched by `outer`.
fn pattern_subsumes(outer: &[Option<u8>], inner: &[Option<u8>]) -> bool {
    outer.len() == inner.len()
        && outer
            .iter()
            .zip(inner)
            .all(|(o, i)| o.is_none() || o == i)
}

fn parse_pattern(text: &str) -> Option<Vec<Option<u8>>> {
    if text == "-" {
        return Some(Vec::new());
    }
    if text.is_empty() || !text.len().is_multiple_of(2) || !text.is_ascii() {
        return None;
    }
    (0..text.len())
        .step_by(2)
        .map(|i| match &text[i..i + 2] {
            "??" => Some(None),
            pair => u8::from_str_radix(pair, 16).ok().map(Some),
        })
        .collect()
}

impl fmt::Display for PayloadMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (neg, p) = match self {
            PayloadMatcher::Any => return f.write_str("*"),
            PayloadMatcher::Bytes(p) => ("", p),
            PayloadMatcher::Not(p) => ("!", p),
        };
        f.write_str(neg)?;
        if p.is_empty() {
            return f.write_str("-");
        }
        for b in p {
            match b {
                Some(b) => write!(f, "{b:02x}")?,
                None => f.write_str("??")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub channel: String,
    pub direction: Direction,
    pub guard: ClockConstraint,
    pub resets: Vec<String>,
    pub payload: PayloadMatcher,
    pub origin: Origin,
}

impl Edge {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        channel: impl Into<String>,
        direction: Direction,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            channel: channel.into(),
            direction,
            guard: ClockConstraint::truth(),
            resets: Vec::new(),
            payload: PayloadMatcher::Any,
            origin: Origin::Nominal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimedAutomaton {
    pub name: String,
    pub clocks: Vec<String>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub initial: String,
}

impl TimedAutomaton {
    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    /// Outgoing edges of `loc` with their declaration index.
    pub fn outgoing<'a>(&'a self, loc: &'a str) -> impl Iterator<Item = (usize, &'a Edge)> + 'a {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.source == loc)
    }

    pub fn initial_valuation(&self) -> Valuation {
        self.clocks.iter().map(|c| (c.clone(), 0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PayloadField {
    pub name: String,
    pub len: usize,
}

/// A typed, directed channel. `sender == receiver` declares a role-internal marker channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Channel {
    pub id: String,
    pub sender: Role,
    pub receiver: Role,
    pub fields: Vec<PayloadField>,
    pub deadline_slack: Option<u64>,
}

impl Channel {
    pub fn payload_len(&self) -> usize {
        self.fields.iter().map(|f| f.len).sum()
    }

    pub fn is_internal(&self) -> bool {
        self.sender == self.receiver
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimedNetwork {
    pub name: String,
    pub time_unit: String,
    /// Kept sorted by id.
    pub channels: Vec<Channel>,
    pub master: TimedAutomaton,
    pub slave: TimedAutomaton,
}

impl TimedNetwork {
    pub fn new(
        name: impl Into<String>,
        time_unit: impl Into<String>,
        mut channels: Vec<Channel>,
        master: TimedAutomaton,
        slave: TimedAutomaton,
    ) -> Self {
        channels.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            name: name.into(),
            time_unit: time_unit.into(),
            channels,
            master,
            slave,
        }
    }

    pub fn automaton(&self, role: Role) -> &TimedAutomaton {
        match role {
            Role::Master => &self.master,
            Role::Slave => &self.slave,
        }
    }

    pub fn automaton_mut(&mut self, role: Role) -> &mut TimedAutomaton {
        match role {
            Role::Master => &mut self.master,
            Role::Slave => &mut self.slave,
        }
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    /// Bytes an emit edge of this network puts on the wire.
    pub fn emitted_payload(&self, edge: &Edge) -> Vec<u8> {
        let len = self.channel(&edge.channel).map_or(0, Channel::payload_len);
        edge.payload.emitted(len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Model,
    FemInjected,
    FemMutated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Model => "model",
            Provenance::FemInjected => "fem-injected",
            Provenance::FemMutated => "fem-mutated",
        }
    }
}

/// One message on a channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelEvent {
    pub channel: String,
    pub payload: Vec<u8>,
    pub sent_at: u64,
    pub deliver_at: u64,
    pub provenance: Provenance,
}

impl ChannelEvent {
    pub fn new(channel: impl Into<String>, payload: Vec<u8>, at: u64) -> Self {
        Self {
            channel: channel.into(),
            payload,
            sent_at: at,
            deliver_at: at,
            provenance: Provenance::Model,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_bound_boundary() {
        let g = ClockConstraint::new(vec![Conjunct::new("t", Relation::Gt, 300)]);
        let at = |v| Valuation::from([("t".to_string(), v)]);
        assert!(!g.holds(&at(300)));
        assert!(g.holds(&at(301)));
    }

    #[test]
    fn payload_patterns() {
        let m = PayloadMatcher::parse("a1??").unwrap();
        assert!(m.matches(&[0xa1, 0x00]));
        assert!(!m.matches(&[0xa0, 0x00]));
        assert!(!m.matches(&[0xa1]));
        let n = PayloadMatcher::parse("!a1??").unwrap();
        assert!(n.matches(&[0xa0, 0x00]));
        assert!(!m.overlaps(&n));
        assert!(PayloadMatcher::exact(&[0xa0, 1]).overlaps(&n));
        assert_eq!(m.to_string(), "a1??");
        assert_eq!(PayloadMatcher::parse("-").unwrap().to_string(), "-");
        assert!(PayloadMatcher::parse("a").is_none());
    }

    #[test]
    fn guard_overlap() {
        let le = ClockConstraint::new(vec![Conjunct::new("c", Relation::Le, 60)]);
        let gt = ClockConstraint::new(vec![Conjunct::new("c", Relation::Gt, 60)]);
        let mid = ClockConstraint::new(vec![
            Conjunct::new("c", Relation::Gt, 50),
            Conjunct::new("c", Relation::Le, 90),
        ]);
        assert!(!le.overlaps(&gt));
        assert!(le.overlaps(&mid));
        assert!(gt.overlaps(&mid));
        assert!(le.overlaps(&ClockConstraint::truth()));
        let never = ClockConstraint::new(vec![Conjunct::new("c", Relation::Lt, 0)]);
        assert!(!never.overlaps(&ClockConstraint::truth()));
    }
}
