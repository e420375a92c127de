//! Execution trace records.
//!
//! One record per line, `tick_no,node_path,event,payload`, field order fixed
//! so golden-file tests can compare bytes. Within a root tick the TICK
//! records form a pre-order walk of the ticked prefix of the tree: a child's
//! record never precedes its parent's. HALT records keep execution order
//! (deepest-first, right-to-left).

use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Tick,
    Halt,
    StatusChange,
    BbWrite,
    SkillMsg,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Tick => "TICK",
            TraceKind::Halt => "HALT",
            TraceKind::StatusChange => "STATUS_CHANGE",
            TraceKind::BbWrite => "BB_WRITE",
            TraceKind::SkillMsg => "SKILL_MSG",
        }
    }

    pub fn parse(s: &str) -> Option<TraceKind> {
        Some(match s {
            "TICK" => TraceKind::Tick,
            "HALT" => TraceKind::Halt,
            "STATUS_CHANGE" => TraceKind::StatusChange,
            "BB_WRITE" => TraceKind::BbWrite,
            "SKILL_MSG" => TraceKind::SkillMsg,
            _ => return None,
        })
    }
}

/// A single trace record.
///
/// `payload` holds the status name for TICK/HALT/STATUS_CHANGE, `key=value`
/// for BB_WRITE, and `direction:op:detail` for SKILL_MSG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: u64,
    pub path: Arc<str>,
    pub kind: TraceKind,
    pub payload: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.tick,
            self.path,
            self.kind.name(),
            self.payload
        )
    }
}

/// Destination for trace records. Emission must be safe from the traversal
/// and from background action workers.
pub trait TraceSink: Send + Sync {
    fn emit(&self, event: &TraceEvent) -> std::io::Result<()>;

    /// Whether emitting is worth the record construction cost at all.
    fn enabled(&self) -> bool {
        true
    }

    /// Pushes buffered records to their destination.
    fn flush(&self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn emit(&self, _event: &TraceEvent) -> std::io::Result<()> {
        Ok(())
    }

    fn enabled(&self) -> bool {
        false
    }
}

/// Collects records in memory; the test harness's default.
#[derive(Default)]
pub struct VecSink {
    events: Mutex<Vec<TraceEvent>>,
}

impl VecSink {
    pub fn new() -> Arc<VecSink> {
        Arc::new(VecSink::default())
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().unwrap().clone()
    }

    /// Renders the collected records as the newline-delimited file format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for ev in self.events.lock().unwrap().iter() {
            out.push_str(&ev.to_string());
            out.push('\n');
        }
        out
    }
}

impl TraceSink for VecSink {
    fn emit(&self, event: &TraceEvent) -> std::io::Result<()> {
        self.events.lock().unwrap().push(event.clone());
        Ok(())
    }
}

/// Writes the line format to any `Write`, typically a buffered file.
pub struct WriterSink<W: Write + Send> {
    inner: Mutex<W>,
}

impl<W: Write + Send> WriterSink<W> {
    pub fn new(writer: W) -> WriterSink<W> {
        WriterSink {
            inner: Mutex::new(writer),
        }
    }
}

impl<W: Write + Send> TraceSink for WriterSink<W> {
    fn emit(&self, event: &TraceEvent) -> std::io::Result<()> {
        let mut w = self.inner.lock().unwrap();
        writeln!(w, "{event}")
    }

    fn flush(&self) -> std::io::Result<()> {
        self.inner.lock().unwrap().flush()
    }
}

/// Parses one line of the trace file format back into an event.
///
/// The payload may itself contain commas, so only the first three fields are
/// split off.
pub fn parse_line(line: &str) -> Option<TraceEvent> {
    let mut parts = line.splitn(4, ',');
    let tick = parts.next()?.parse().ok()?;
    let path = parts.next()?;
    let kind = TraceKind::parse(parts.next()?)?;
    let payload = parts.next()?.to_string();
    Some(TraceEvent {
        tick,
        path: Arc::from(path),
        kind,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format_is_fixed_field_order() {
        let ev = TraceEvent {
            tick: 3,
            path: Arc::from("root/seq.0/GotoObject"),
            kind: TraceKind::Tick,
            payload: "Running".to_string(),
        };
        assert_eq!(ev.to_string(), "3,root/seq.0/GotoObject,TICK,Running");
        assert_eq!(parse_line(&ev.to_string()).unwrap(), ev);
    }

    #[test]
    fn payload_commas_survive_round_trip() {
        let ev = TraceEvent {
            tick: 1,
            path: Arc::from("root/a"),
            kind: TraceKind::BbWrite,
            payload: "pose=1,2,3".to_string(),
        };
        assert_eq!(parse_line(&ev.to_string()).unwrap().payload, "pose=1,2,3");
    }
}
