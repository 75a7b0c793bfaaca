use super::{AdapterError, Output, Subject, MAX_OUTPUTS_PER_INSTANT};
use crate::tioa::{emit_slack, ready_emit, Direction, Role, TimedNetwork, Valuation};

/// Executes one automaton of a network directly.
///
/// Outputs are eager: as soon as an emit edge is ready it fires, the first in
/// declaration order winning. Inputs take the first enabled receive edge and
/// are dropped when none is enabled.
#[derive(Debug, Clone)]
pub struct MilInterpreter {
    net: TimedNetwork,
    role: Role,
    location: String,
    clocks: Valuation,
    now: u64,
    timelock: Option<u64>,
}

impl MilInterpreter {
    pub fn new(net: &TimedNetwork, role: Role) -> Self {
        let ta = net.automaton(role);
        Self {
            net: net.clone(),
            role,
            location: ta.initial.clone(),
            clocks: ta.initial_valuation(),
            now: 0,
            timelock: None,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn location(&self) -> &str {
        &self.location
    }

    pub fn clocks(&self) -> &Valuation {
        &self.clocks
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Instant at which the current location's invariant was first violated.
    pub fn timelock(&self) -> Option<u64> {
        self.timelock
    }

    fn take(&mut self, idx: usize) -> Option<Output> {
        let ta = self.net.automaton(self.role);
        let edge = &ta.edges[idx];
        let slack = emit_slack(ta, edge, &self.clocks);
        let payload = self.net.emitted_payload(edge);
        let internal = self
            .net
            .channel(&edge.channel)
            .is_some_and(|c| c.is_internal());
        let out = (edge.direction == Direction::Emit && !internal).then(|| Output {
            channel: edge.channel.clone(),
            payload,
            at: self.now,
            slack,
        });
        for c in &edge.resets {
            if let Some(v) = self.clocks.get_mut(c) {
                *v = 0;
            }
        }
        self.location = edge.target.clone();
        out
    }

    fn settle(&mut self) -> Result<Vec<Output>, AdapterError> {
        let mut out = Vec::new();
        if self.timelock.is_some() {
            return Ok(out);
        }
        for _ in 0..MAX_OUTPUTS_PER_INSTANT {
            let ta = self.net.automaton(self.role);
            let Some(idx) = ready_emit(ta, &self.location, &self.clocks) else {
                return Ok(out);
            };
            out.extend(self.take(idx));
        }
        Err(AdapterError::Zeno(MAX_OUTPUTS_PER_INSTANT))
    }
}

impl Subject for MilInterpreter {
    fn reset(&mut self) -> Result<(), AdapterError> {
        *self = Self::new(&self.net, self.role);
        Ok(())
    }

    fn advance(&mut self, now: u64) -> Result<Vec<Output>, AdapterError> {
        if now < self.now {
            return Err(AdapterError::TimeReversal { from: self.now, to: now });
        }
        if self.timelock.is_none() && now > self.now {
            let d = now - self.now;
            for v in self.clocks.values_mut() {
                *v += d;
            }
            let ta = self.net.automaton(self.role);
            let ok = ta
                .location(&self.location)
                .is_some_and(|l| l.invariant.holds(&self.clocks));
            if !ok {
                self.timelock = Some(now);
            }
        }
        self.now = now;
        self.settle()
    }

    fn deliver(
        &mut self,
        channel: &str,
        payload: &[u8],
        now: u64,
    ) -> Result<Vec<Output>, AdapterError> {
        let mut out = self.advance(now)?;
        if self.timelock.is_some() {
            return Ok(out);
        }
        let ta = self.net.automaton(self.role);
        let hit = ta.outgoing(&self.location).find_map(|(i, e)| {
            if e.direction != Direction::Receive
                || e.channel != channel
                || !e.guard.holds(&self.clocks)
                || !e.payload.matches(payload)
            {
                return None;
            }
            let mut after = self.clocks.clone();
            for c in &e.resets {
                after.insert(c.clone(), 0);
            }
            ta.location(&e.target)
                .is_some_and(|l| l.invariant.holds(&after))
                .then_some(i)
        });
        if let Some(idx) = hit {
            self.take(idx);
            out.extend(self.settle()?);
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("mil:{}.{}", self.net.name, self.role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;

    fn echo() -> TimedNetwork {
        parse_network(
            "network n {
               channel ping master->slave payload (b:1);
               channel pong slave->master payload (b:1);
               automaton master { clock t; init a; loc a; edge a -> a on ping emit payload 01; edge a -> a on pong receive; }
               automaton slave { clock c; init i;
                 loc i; loc busy inv c <= 2;
                 edge i -> busy on ping receive guard c >= 3 payload 01 reset c;
                 edge busy -> i on pong emit guard c >= 2 payload 02;
               } }",
        )
        .unwrap()
    }

    #[test]
    fn eager_output_at_guard_bound() {
        let mut m = MilInterpreter::new(&echo(), Role::Slave);
        assert!(m.deliver("ping", &[1], 1).unwrap().is_empty());
        assert_eq!(m.location(), "i");
        assert!(m.deliver("ping", &[9], 3).unwrap().is_empty());
        assert!(m.deliver("ping", &[1], 3).unwrap().is_empty());
        assert!(m.advance(4).unwrap().is_empty());
        let out = m.advance(5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].channel.as_str(), out[0].at, out[0].slack), ("pong", 5, Some(0)));
        assert_eq!(out[0].payload, vec![2]);
    }

    #[test]
    fn reset_and_time_reversal() {
        let mut m = MilInterpreter::new(&echo(), Role::Slave);
        m.advance(10).unwrap();
        assert!(matches!(m.advance(3), Err(AdapterError::TimeReversal { .. })));
        m.reset().unwrap();
        assert_eq!(m.now(), 0);
        assert_eq!(m.clocks()["c"], 0);
    }
}
