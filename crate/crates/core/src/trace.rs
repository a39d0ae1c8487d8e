//! Contact traces (`time,a,b,up|down`) and message schedules
//! (`time,source,destination,size`) for replaying runs without mobility.

use std::collections::BTreeSet;

use crate::events::format_sig;
use crate::link::{ContactEvent, ContactKind, NodePair};
use crate::traffic::ScheduledMessage;

pub const TRACE_HEADER: &str = "time,a,b,event";
pub const MESSAGES_HEADER: &str = "time,source,destination,size";

pub fn trace_to_csv(events: &[ContactEvent]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&format!("{},{},{},{}\n", format_sig(e.time), e.pair.low(), e.pair.high(), e.kind));
    }
    out
}

/// Parses a contact trace. Rows must be in time order and each pair must
/// alternate up and down, starting with up. The header row is optional.
pub fn parse_trace(text: &str) -> Result<Vec<ContactEvent>, String> {
    let mut events = Vec::new();
    let mut up = BTreeSet::new();
    let mut last = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("time")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(format!("row {row}: expected 4 fields, found {}", f.len()));
        }
        let time: f64 = f[0].parse().map_err(|_| format!("row {row}: bad time `{}`", f[0]))?;
        let a: usize = f[1].parse().map_err(|_| format!("row {row}: bad node `{}`", f[1]))?;
        let b: usize = f[2].parse().map_err(|_| format!("row {row}: bad node `{}`", f[2]))?;
        let kind = match f[3] {
            "up" => ContactKind::Up,
            "down" => ContactKind::Down,
            other => return Err(format!("row {row}: expected up or down, found `{other}`")),
        };
        if !time.is_finite() || time < 0.0 {
            return Err(format!("row {row}: time must be finite and non-negative"));
        }
        if time < last {
            return Err(format!("row {row}: time {time} goes backwards"));
        }
        if a == b {
            return Err(format!("row {row}: node {a} cannot contact itself"));
        }
        last = time;
        let pair = NodePair::new(a, b);
        let fresh = match kind {
            ContactKind::Up => up.insert(pair),
            ContactKind::Down => up.remove(&pair),
        };
        if !fresh {
            return Err(format!("row {row}: {kind} for {a}-{b} does not alternate"));
        }
        events.push(ContactEvent { pair, kind, time });
    }
    Ok(events)
}

/// Highest node id mentioned in a trace, plus one.
pub fn trace_node_count(events: &[ContactEvent]) -> usize {
    events.iter().map(|e| e.pair.high() + 1).max().unwrap_or(0)
}

pub fn messages_to_csv(messages: &[ScheduledMessage]) -> String {
    let mut out = String::from(MESSAGES_HEADER);
    out.push('\n');
    for m in messages {
        out.push_str(&format!("{},{},{},{}\n", format_sig(m.time), m.source, m.destination, m.size));
    }
    out
}

pub fn parse_messages(text: &str) -> Result<Vec<ScheduledMessage>, String> {
    let mut out: Vec<ScheduledMessage> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("time")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(format!("row {row}: expected 4 fields, found {}", f.len()));
        }
        let bad = |what: &str, v: &str| format!("row {row}: bad {what} `{v}`");
        let m = ScheduledMessage {
            time: f[0].parse().map_err(|_| bad("time", f[0]))?,
            source: f[1].parse().map_err(|_| bad("source", f[1]))?,
            destination: f[2].parse().map_err(|_| bad("destination", f[2]))?,
            size: f[3].parse().map_err(|_| bad("size", f[3]))?,
        };
        if !m.time.is_finite() || m.time < 0.0 {
            return Err(format!("row {row}: time must be finite and non-negative"));
        }
        if out.last().is_some_and(|p| p.time > m.time) {
            return Err(format!("row {row}: time {} goes backwards", m.time));
        }
        if m.source == m.destination {
            return Err(format!("row {row}: source equals destination"));
        }
        if m.size == 0 {
            return Err(format!("row {row}: size must be positive"));
        }
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let text = "time,a,b,event\n10,0,1,up\n20,1,0,down\n40,1,2,up\n50,1,2,down\n";
        let ev = parse_trace(text).unwrap();
        assert_eq!(ev.len(), 4);
        assert_eq!(ev[1].pair, NodePair::new(0, 1));
        assert_eq!(trace_to_csv(&ev).replace("0,1,down", "1,0,down"), text);
        assert_eq!(trace_node_count(&ev), 3);
    }

    #[test]
    fn trace_rejects_bad_rows() {
        assert!(parse_trace("5,0,1,down\n").unwrap_err().contains("alternate"));
        assert!(parse_trace("5,0,1,up\n6,0,1,up\n").is_err());
        assert!(parse_trace("5,0,1,up\n4,0,1,down\n").unwrap_err().contains("backwards"));
        assert!(parse_trace("5,2,2,up\n").is_err());
        assert!(parse_trace("5,0,1,sideways\n").unwrap_err().contains("row 1"));
    }

    #[test]
    fn messages_round_trip() {
        let m = vec![ScheduledMessage { time: 0.0, source: 0, destination: 2, size: 524_288 }];
        assert_eq!(parse_messages(&messages_to_csv(&m)).unwrap(), m);
        assert!(parse_messages("0,1,1,10\n").is_err());
        assert!(parse_messages("0,0,1,0\n").is_err());
    }
}
