//! Subjects living in another process, reached over stdio or TCP with the
//! line protocol from [`super::wire`]. Model time maps to wall-clock time at a
//! fixed duration per unit.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::{AdapterError, Output, Subject, WireMessage};
use crate::tioa::Direction;

const HANDSHAKE: Duration = Duration::from_secs(5);

/// Maps model instants to wall-clock deadlines.
#[derive(Debug, Clone, Copy)]
pub struct RealTimeClock {
    pub unit: Duration,
    start: Instant,
}

impl RealTimeClock {
    pub fn new(unit: Duration) -> Self {
        Self {
            unit,
            start: Instant::now(),
        }
    }

    pub fn restart(&mut self) {
        self.start = Instant::now();
    }

    pub fn deadline(&self, t: u64) -> Instant {
        self.start + self.unit * u32::try_from(t).unwrap_or(u32::MAX)
    }

    /// Current model instant.
    pub fn now(&self) -> u64 {
        let nanos = self.unit.as_nanos().max(1);
        (self.start.elapsed().as_nanos() / nanos) as u64
    }

    pub fn sleep_until(&self, t: u64) {
        let at = self.deadline(t);
        let now = Instant::now();
        if at > now {
            thread::sleep(at - now);
        }
    }
}

fn spawn_reader(reader: impl BufRead + Send + 'static) -> Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

pub struct ExternalSubject {
    name: String,
    writer: Box<dyn Write + Send>,
    lines: Receiver<String>,
    clock: RealTimeClock,
    child: Option<Child>,
}

impl ExternalSubject {
    pub fn from_streams(
        name: impl Into<String>,
        reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
        unit: Duration,
    ) -> Self {
        Self {
            name: name.into(),
            writer: Box::new(writer),
            lines: spawn_reader(reader),
            clock: RealTimeClock::new(unit),
            child: None,
        }
    }

    /// Runs `command` through the shell and talks to it over stdin/stdout.
    pub fn spawn(command: &str, unit: Duration) -> Result<Self, AdapterError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| AdapterError::Protocol("no stdin".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| AdapterError::Protocol("no stdout".into()))?;
        let mut me = Self::from_streams(format!("stdio:{command}"), BufReader::new(stdout), stdin, unit);
        me.child = Some(child);
        Ok(me)
    }

    pub fn connect(addr: &str, unit: Duration) -> Result<Self, AdapterError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::from_streams(format!("tcp:{addr}"), reader, stream, unit))
    }

    fn send(&mut self, msg: &WireMessage) -> Result<(), AdapterError> {
        writeln!(self.writer, "{msg}")?;
        self.writer.flush()?;
        Ok(())
    }

    fn collect(&mut self, now: u64) -> Result<Vec<Output>, AdapterError> {
        let mut out = Vec::new();
        while let Ok(line) = self.lines.try_recv() {
            match line.parse::<WireMessage>().map_err(|e| AdapterError::Protocol(e.to_string()))? {
                WireMessage::Msg {
                    channel,
                    direction: Direction::Emit,
                    payload,
                    ..
                } => out.push(Output {
                    channel,
                    payload,
                    at: now,
                    slack: None,
                }),
                other => {
                    return Err(AdapterError::Protocol(format!("unexpected `{other}`")));
                }
            }
        }
        Ok(out)
    }
}

impl Subject for ExternalSubject {
    fn reset(&mut self) -> Result<(), AdapterError> {
        self.send(&WireMessage::Reset)?;
        // drop anything left over from a previous case
        let deadline = Instant::now() + HANDSHAKE;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) => match line.parse::<WireMessage>() {
                    Ok(WireMessage::Ready) => break,
                    Ok(WireMessage::Bye) => return Err(AdapterError::ResetUnsupported(self.name.clone())),
                    _ => continue,
                },
                Err(RecvTimeoutError::Timeout) => return Err(AdapterError::Timeout("READY".into())),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(AdapterError::ResetUnsupported(self.name.clone()))
                }
            }
        }
        self.clock.restart();
        Ok(())
    }

    fn advance(&mut self, now: u64) -> Result<Vec<Output>, AdapterError> {
        self.clock.sleep_until(now);
        self.collect(now)
    }

    fn deliver(
        &mut self,
        channel: &str,
        payload: &[u8],
        now: u64,
    ) -> Result<Vec<Output>, AdapterError> {
        self.send(&WireMessage::Msg {
            time: now,
            channel: channel.to_string(),
            direction: Direction::Receive,
            payload: payload.to_vec(),
        })?;
        self.collect(now)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

impl Drop for ExternalSubject {
    fn drop(&mut self) {
        let _ = self.send(&WireMessage::Bye);
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Serves `subject` over a line stream until `BYE` or end of input.
///
/// Incoming messages are delivered at the time they carry; in between, the
/// subject is advanced in step with the wall clock.
pub fn serve_mil(
    mut subject: Box<dyn Subject>,
    reader: impl BufRead + Send + 'static,
    mut writer: impl Write,
    unit: Duration,
) -> Result<(), AdapterError> {
    let lines = spawn_reader(reader);
    let mut clock = RealTimeClock::new(unit);
    let mut now = 0;
    let emit = |w: &mut dyn Write, outs: Vec<Output>| -> Result<(), AdapterError> {
        for o in outs {
            let msg = WireMessage::Msg {
                time: o.at,
                channel: o.channel,
                direction: Direction::Emit,
                payload: o.payload,
            };
            writeln!(w, "{msg}")?;
        }
        w.flush()?;
        Ok(())
    };
    loop {
        let left = clock.deadline(now + 1).saturating_duration_since(Instant::now());
        match lines.recv_timeout(left) {
            Ok(line) => match line.parse::<WireMessage>() {
                Ok(WireMessage::Reset) => {
                    subject.reset()?;
                    clock.restart();
                    now = 0;
                    writeln!(writer, "{}", WireMessage::Ready)?;
                    writer.flush()?;
                    let outs = subject.advance(0)?;
                    emit(&mut writer, outs)?;
                }
                Ok(WireMessage::Bye) => return Ok(()),
                Ok(WireMessage::Msg {
                    time,
                    channel,
                    direction: Direction::Receive,
                    payload,
                }) => {
                    now = now.max(time);
                    let outs = subject.deliver(&channel, &payload, now)?;
                    emit(&mut writer, outs)?;
                }
                Ok(other) => return Err(AdapterError::Protocol(format!("unexpected `{other}`"))),
                Err(e) => return Err(AdapterError::Protocol(e.to_string())),
            },
            Err(RecvTimeoutError::Timeout) => {
                let target = clock.now().max(now + 1);
                while now < target {
                    now += 1;
                    let outs = subject.advance(now)?;
                    emit(&mut writer, outs)?;
                }
            }
            Err(RecvTimeoutError::Disconnected) => return Ok(()),
        }
    }
}
