//! Line protocol spoken with external subjects.
//!
//! ```text
//! RESET
//! READY
//! MSG 12 cmd_start receive a1e8070a100c1e00
//! MSG 12 ack emit 06
//! BYE
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tioa::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum WireMessage {
    Reset,
    Ready,
    Bye,
    Msg {
        time: u64,
        channel: String,
        direction: Direction,
        payload: Vec<u8>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed wire line `{line}`: {reason}")]
pub struct WireError {
    pub line: String,
    pub reason: String,
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireMessage::Reset => f.write_str("RESET"),
            WireMessage::Ready => f.write_str("READY"),
            WireMessage::Bye => f.write_str("BYE"),
            WireMessage::Msg {
                time,
                channel,
                direction,
                payload,
            } => {
                let body = if payload.is_empty() {
                    "-".to_string()
                } else {
                    hex::encode(payload)
                };
                write!(f, "MSG {time} {channel} {direction} {body}")
            }
        }
    }
}

impl FromStr for WireMessage {
    type Err = WireError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| WireError {
            line: line.to_string(),
            reason: reason.to_string(),
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["RESET"] => Ok(WireMessage::Reset),
            ["READY"] => Ok(WireMessage::Ready),
            ["BYE"] => Ok(WireMessage::Bye),
            ["MSG", time, channel, dir, body] => Ok(WireMessage::Msg {
                time: time.parse().map_err(|_| err("time is not an integer"))?,
                channel: channel.to_string(),
                direction: Direction::parse(dir).ok_or_else(|| err("direction must be emit or receive"))?,
                payload: if *body == "-" {
                    Vec::new()
                } else {
                    hex::decode(body).map_err(|_| err("payload is not hex"))?
                },
            }),
            _ => Err(err("expected RESET, READY, BYE or MSG TIME CHAN DIR HEX")),
        }
    }
}
