//! Run metrics and the CSV tables built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::config::{ScenarioConfig, MIB};
use crate::events::{format_sig, EventKind, EventLog};
use crate::routing::{MessageId, RouterKind};

/// Counters and latencies of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub created: usize,
    /// Unique messages that reached their destination.
    pub delivered: usize,
    /// Completed node-to-node transfers, final hops included.
    pub relayed: usize,
    pub dropped: usize,
    pub aborted: usize,
    pub expired: usize,
    /// Seconds from creation to first delivery, in delivery order.
    pub latencies: Vec<f64>,
    /// Whether aborted transfers count as relays in the overhead ratio.
    pub count_aborts: bool,
}

impl RunReport {
    pub fn from_log(log: &EventLog, count_aborts: bool) -> RunReport {
        let mut created_at: BTreeMap<MessageId, f64> = BTreeMap::new();
        let mut delivered: BTreeSet<MessageId> = BTreeSet::new();
        let mut r = RunReport {
            created: 0,
            delivered: 0,
            relayed: 0,
            dropped: 0,
            aborted: 0,
            expired: 0,
            latencies: Vec::new(),
            count_aborts,
        };
        for e in log.events() {
            match e.kind {
                EventKind::Created => {
                    created_at.insert(e.message, e.time);
                    r.created += 1;
                }
                EventKind::Relayed => r.relayed += 1,
                EventKind::Delivered => {
                    if delivered.insert(e.message) {
                        if let Some(t0) = created_at.get(&e.message) {
                            r.latencies.push(e.time - t0);
                        }
                    }
                }
                EventKind::Dropped => r.dropped += 1,
                EventKind::Aborted => r.aborted += 1,
                EventKind::Expired => r.expired += 1,
            }
        }
        r.delivered = delivered.len();
        r
    }

    /// `None` when nothing was created.
    pub fn delivery_probability(&self) -> Option<f64> {
        (self.created > 0).then(|| self.delivered as f64 / self.created as f64)
    }

    /// Seconds; `None` when nothing was delivered.
    pub fn average_latency(&self) -> Option<f64> {
        (!self.latencies.is_empty()).then(|| self.latencies.iter().sum::<f64>() / self.latencies.len() as f64)
    }

    /// Extra transfers per delivery; `None` when nothing was delivered.
    pub fn overhead_ratio(&self) -> Option<f64> {
        let relays = self.relayed + if self.count_aborts { self.aborted } else { 0 };
        (self.delivered > 0).then(|| (relays as f64 - self.delivered as f64) / self.delivered as f64)
    }

    /// `metric,value,unit` rows; undefined metrics are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,unit\n");
        let counts = [
            ("created", self.created),
            ("delivered", self.delivered),
            ("relayed", self.relayed),
            ("dropped", self.dropped),
            ("aborted", self.aborted),
            ("expired", self.expired),
        ];
        for (name, v) in counts {
            out.push_str(&format!("{name},{v},count\n"));
        }
        for m in Metric::ALL {
            out.push_str(&format!("{},{},{}\n", m.name(), fmt_opt(m.value(self)), m.unit()));
        }
        out
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_else(|| "NA".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    DeliveryProbability,
    AverageLatency,
    OverheadRatio,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::DeliveryProbability, Metric::AverageLatency, Metric::OverheadRatio];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::DeliveryProbability => "delivery_probability",
            Metric::AverageLatency => "average_latency",
            Metric::OverheadRatio => "overhead_ratio",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            Metric::AverageLatency => "s",
            _ => "ratio",
        }
    }

    pub fn value(&self, r: &RunReport) -> Option<f64> {
        match self {
            Metric::DeliveryProbability => r.delivery_probability(),
            Metric::AverageLatency => r.average_latency(),
            Metric::OverheadRatio => r.overhead_ratio(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One finished run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub router: RouterKind,
    pub size: u64,
    pub seed: u64,
    pub report: RunReport,
    /// Scenario settings other than router, size and seed; see [`fingerprint`].
    pub fingerprint: String,
}

/// Serialized configuration with the swept parameters neutralized. Runs
/// may only be aggregated together when their fingerprints match.
pub fn fingerprint(cfg: &ScenarioConfig) -> String {
    let mut c = cfg.clone();
    c.router = RouterKind::Epidemic;
    c.traffic.size = MIB;
    c.seed = 0;
    c.to_text()
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("no runs to tabulate")]
    Empty,
    #[error("runs {0} and {1} were made with different scenario settings")]
    MixedConfig(String, String),
}

fn sorted(records: &[RunRecord]) -> Result<Vec<&RunRecord>, TableError> {
    let first = records.first().ok_or(TableError::Empty)?;
    if let Some(r) = records.iter().find(|r| r.fingerprint != first.fingerprint) {
        let name = |r: &RunRecord| format!("{}/{}/{}", r.router, r.size, r.seed);
        return Err(TableError::MixedConfig(name(first), name(r)));
    }
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by_key(|r| (r.router, r.size, r.seed));
    Ok(v)
}

fn unit_header(metric: Metric) -> &'static str {
    if metric == Metric::AverageLatency {
        ",unit"
    } else {
        ""
    }
}

fn unit_cell(metric: Metric) -> String {
    if metric == Metric::AverageLatency {
        format!(",{}", metric.unit())
    } else {
        String::new()
    }
}

/// `router,size_bytes,seed,value` (latency tables add a unit column).
pub fn metric_table(records: &[RunRecord], metric: Metric) -> Result<String, TableError> {
    let mut out = format!("router,size_bytes,seed,value{}\n", unit_header(metric));
    for r in sorted(records)? {
        out.push_str(&format!(
            "{},{},{},{}{}\n",
            r.router,
            r.size,
            r.seed,
            fmt_opt(metric.value(&r.report)),
            unit_cell(metric)
        ));
    }
    Ok(out)
}

/// Mean and sample standard deviation over the runs where the metric is
/// defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub router: RouterKind,
    pub size: u64,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub n: usize,
}

pub fn mean_stddev(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(sd))
}

pub fn aggregate(records: &[RunRecord], metric: Metric) -> Result<Vec<Aggregate>, TableError> {
    let mut groups: BTreeMap<(RouterKind, u64), Vec<f64>> = BTreeMap::new();
    for r in sorted(records)? {
        let values = groups.entry((r.router, r.size)).or_default();
        if let Some(v) = metric.value(&r.report) {
            values.push(v);
        }
    }
    Ok(groups
        .into_iter()
        .map(|((router, size), values)| {
            let (mean, stddev) = mean_stddev(&values);
            Aggregate { router, size, mean, stddev, n: values.len() }
        })
        .collect())
}

/// `router,size_bytes,mean,stddev,n` (latency tables add a unit column).
pub fn aggregate_table(records: &[RunRecord], metric: Metric) -> Result<String, TableError> {
    let mut out = format!("router,size_bytes,mean,stddev,n{}\n", unit_header(metric));
    for a in aggregate(records, metric)? {
        out.push_str(&format!(
            "{},{},{},{},{}{}\n",
            a.router,
            a.size,
            fmt_opt(a.mean),
            fmt_opt(a.stddev),
            a.n,
            unit_cell(metric)
        ));
    }
    Ok(out)
}

/// Each run's overhead paired with its delivery probability, for one router.
pub fn scatter_table(records: &[RunRecord], router: RouterKind) -> Result<String, TableError> {
    let mut out = String::from("router,size_bytes,seed,overhead_ratio,delivery_probability\n");
    for r in sorted(records)?.into_iter().filter(|r| r.router == router) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.router,
            r.size,
            r.seed,
            fmt_opt(r.report.overhead_ratio()),
            fmt_opt(r.report.delivery_probability())
        ));
    }
    Ok(out)
}
