//! Ordered record of everything that happened to messages during a run.

use std::fmt;
use std::str::FromStr;

use crate::link::NodeId;
use crate::routing::MessageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Created,
    /// A completed node-to-node transfer, final delivery hops included.
    Relayed,
    /// First arrival at the destination.
    Delivered,
    /// Copy evicted from (or refused by) a full buffer.
    Dropped,
    /// Transfer cut off by the contact going down.
    Aborted,
    Expired,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Created => "created",
            EventKind::Relayed => "relayed",
            EventKind::Delivered => "delivered",
            EventKind::Dropped => "dropped",
            EventKind::Aborted => "aborted",
            EventKind::Expired => "expired",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "created" => EventKind::Created,
            "relayed" => EventKind::Relayed,
            "delivered" => EventKind::Delivered,
            "dropped" => EventKind::Dropped,
            "aborted" => EventKind::Aborted,
            "expired" => EventKind::Expired,
            other => return Err(format!("unknown event kind `{other}`")),
        })
    }
}

/// `from`/`to` carry source/destination for `Created`, sender/receiver for
/// transfers, and the affected node in `from` for drops and expiries.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub time: f64,
    pub kind: EventKind,
    pub message: MessageId,
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
    pub size: u64,
    pub hops: u32,
}

pub const CSV_HEADER: &str = "time,event,msg_id,from,to,size,hops";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. Returns an error if it would go back in time.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        time: f64,
        kind: EventKind,
        message: MessageId,
        from: Option<NodeId>,
        to: Option<NodeId>,
        size: u64,
        hops: u32,
    ) -> Result<(), String> {
        let seq = self.events.len() as u64;
        if let Some(last) = self.events.last() {
            if time < last.time {
                return Err(format!("event {seq} at t={time} precedes previous event at t={}", last.time));
            }
        }
        self.events.push(Event { seq, time, kind, message, from, to, size, hops });
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 40 + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |n: Option<NodeId>| n.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                format_sig(e.time),
                e.kind,
                e.message,
                opt(e.from),
                opt(e.to),
                e.size,
                e.hops
            ));
        }
        out
    }

    /// Reads a log back from its CSV form. Sequence numbers follow row order.
    pub fn from_csv(text: &str) -> Result<EventLog, String> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(format!("missing header `{CSV_HEADER}`")),
        }
        let mut log = EventLog::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row = i + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("row {row}: expected 7 fields, found {}", f.len()));
            }
            let err = |what: &str| format!("row {row}: bad {what}");
            let node = |s: &str| -> Result<Option<NodeId>, String> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| err("node id"))
                }
            };
            log.record(
                f[0].parse().map_err(|_| err("time"))?,
                f[1].parse()?,
                f[2].parse()?,
                node(f[3])?,
                node(f[4])?,
                f[5].parse().map_err(|_| err("size"))?,
                f[6].parse().map_err(|_| err("hops"))?,
            )?;
        }
        Ok(log)
    }
}

/// Formats a float with six significant digits, `%g` style.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(41.5), "41.5");
        assert_eq!(format_sig(0.30000000000000004), "0.3");
        assert_eq!(format_sig(43200.1), "43200.1");
        assert_eq!(format_sig(1234567.0), "1.23457e6");
        assert_eq!(format_sig(2.0 / 3.0), "0.666667");
        assert_eq!(format_sig(999999.5), "1e6");
        assert_eq!(format_sig(0.00001234), "1.234e-5");
        assert_eq!(format_sig(-12.5), "-12.5");
        assert_eq!(format_sig(100.0), "100");
    }

    #[test]
    fn records_must_not_go_back_in_time() {
        let mut log = EventLog::new();
        log.record(1.0, EventKind::Created, MessageId(1), Some(0), Some(1), 10, 0).unwrap();
        log.record(1.0, EventKind::Dropped, MessageId(1), Some(0), None, 10, 0).unwrap();
        assert!(log.record(0.5, EventKind::Expired, MessageId(1), Some(0), None, 10, 0).is_err());
        assert_eq!(log.events()[1].seq, 1);
    }

    #[test]
    fn csv_round_trip() {
        let mut log = EventLog::new();
        log.record(0.1, EventKind::Created, MessageId(1), Some(0), Some(2), 524288, 0).unwrap();
        log.record(11.5, EventKind::Relayed, MessageId(1), Some(0), Some(1), 524288, 1).unwrap();
        log.record(41.5, EventKind::Delivered, MessageId(1), Some(1), Some(2), 524288, 2).unwrap();
        log.record(50.0, EventKind::Dropped, MessageId(1), Some(1), None, 524288, 1).unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains("50,dropped,M1,1,,524288,1"));
        assert_eq!(EventLog::from_csv(&csv).unwrap(), log);
    }
}
