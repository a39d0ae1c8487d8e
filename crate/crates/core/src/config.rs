//! Flat `key = value` scenario configuration.
//!
//! ```text
//! # comments start with '#'
//! router = prophet
//! sim.duration = 7200
//! group2.count = 70
//! prophet.pInit = 0.75
//! ```
//!
//! All numbers are raw SI units: bytes, seconds, meters, meters/second and
//! bytes/second. Unknown and duplicate keys are errors. An empty document
//! yields the default river/town scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::link::LinkParams;
use crate::map::Terrain;
use crate::routing::{ProphetParams, RouterKind};

pub const MIB: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, line: usize, first: usize },
    #[error("line {line}: `{key}`: cannot read `{value}` as {expected}")]
    Type { key: String, line: usize, value: String, expected: &'static str },
    #[error("line {line}: `{key}`: {message}")]
    Range { key: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupConfig {
    pub name: String,
    pub count: usize,
    /// Meters per second.
    pub speed: f64,
    /// Seconds spent at each destination before re-routing.
    pub pause_time: f64,
    pub terrain: Terrain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    /// Bytes per message.
    pub size: u64,
    pub interval_min: f64,
    pub interval_max: f64,
    /// `None` means messages never expire.
    pub ttl: Option<f64>,
    /// No messages are created in the final `cooldown` seconds.
    pub cooldown: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapSource {
    Builtin,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub map: MapSource,
    pub groups: Vec<GroupConfig>,
    pub link: LinkParams,
    pub buffer_size: u64,
    pub router: RouterKind,
    pub prophet: ProphetParams,
    pub traffic: TrafficConfig,
    /// Count aborted transfers as relays in the overhead metric.
    pub count_aborts: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration: 43_200.0,
            tick: 0.1,
            seed: 1,
            map: MapSource::Builtin,
            groups: vec![default_group(1), default_group(2)],
            link: LinkParams::default(),
            buffer_size: 8 * MIB,
            router: RouterKind::Epidemic,
            prophet: ProphetParams::default(),
            traffic: TrafficConfig { size: MIB, interval_min: 25.0, interval_max: 35.0, ttl: None, cooldown: 1_800.0 },
            count_aborts: false,
        }
    }
}

fn default_group(n: usize) -> GroupConfig {
    match n {
        1 => GroupConfig { name: "bicycles".into(), count: 50, speed: 1.0, pause_time: 0.0, terrain: Terrain::Land },
        2 => {
            GroupConfig { name: "motorboats".into(), count: 70, speed: 15.0, pause_time: 0.0, terrain: Terrain::Water }
        }
        n => GroupConfig { name: format!("group{n}"), count: 1, speed: 1.0, pause_time: 0.0, terrain: Terrain::Any },
    }
}

impl ScenarioConfig {
    pub fn node_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Number of ticks a run executes.
    pub fn tick_count(&self) -> u64 {
        (self.duration / self.tick * (1.0 + 1e-12)).floor() as u64
    }

    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let entries = read_entries(text)?;
        let mut cfg = ScenarioConfig::default();

        let groups = match entries.get("sim.nrofGroups") {
            Some(e) => {
                let n: usize = e.parse("sim.nrofGroups", "an integer")?;
                if n == 0 {
                    return Err(e.range("sim.nrofGroups", "at least one group is required"));
                }
                n
            }
            None => 2,
        };
        cfg.groups = (1..=groups).map(default_group).collect();

        for (key, e) in &entries {
            let k = key.as_str();
            match k {
                "sim.nrofGroups" => {}
                "router" => {
                    cfg.router = e.value.parse().map_err(|_| e.type_err(k, "epidemic, maxprop or prophet"))?;
                }
                "sim.duration" => cfg.duration = e.parse(k, "a number")?,
                "sim.tick" => cfg.tick = e.parse(k, "a number")?,
                "sim.seed" => cfg.seed = e.parse(k, "an unsigned integer")?,
                "sim.map" => {
                    cfg.map =
                        if e.value == "builtin" { MapSource::Builtin } else { MapSource::File(PathBuf::from(&e.value)) }
                }
                "link.range" => cfg.link.range = e.parse(k, "a number")?,
                "link.speedBps" => cfg.link.speed_bps = e.parse(k, "a number")?,
                "link.speedAfterBps" => cfg.link.speed_after_bps = e.parse(k, "a number")?,
                "link.speedSwitchTime" => cfg.link.speed_switch_time = e.parse(k, "a number")?,
                "link.latency" => cfg.link.latency = e.parse(k, "a number")?,
                "link.bufferSize" => cfg.buffer_size = e.parse(k, "a byte count")?,
                "link.singleTransferPerNode" => cfg.link.single_transfer_per_node = e.parse(k, "true or false")?,
                "prophet.pInit" => cfg.prophet.p_init = e.parse(k, "a number")?,
                "prophet.beta" => cfg.prophet.transitivity_scale = e.parse(k, "a number")?,
                "prophet.gamma" => cfg.prophet.aging_base = e.parse(k, "a number")?,
                "prophet.secondsInTimeUnit" => cfg.prophet.seconds_in_time_unit = e.parse(k, "a number")?,
                "prophet.v2EncounterScaling" => cfg.prophet.v2_encounter_scaling = e.parse(k, "true or false")?,
                "prophet.typicalInterval" => cfg.prophet.typical_interval = e.parse(k, "a number")?,
                "traffic.size" => cfg.traffic.size = e.parse(k, "a byte count")?,
                "traffic.intervalMin" => cfg.traffic.interval_min = e.parse(k, "a number")?,
                "traffic.intervalMax" => cfg.traffic.interval_max = e.parse(k, "a number")?,
                "traffic.ttl" => {
                    cfg.traffic.ttl = if e.value == "inf" { None } else { Some(e.parse(k, "a number or `inf`")?) }
                }
                "traffic.cooldown" => cfg.traffic.cooldown = e.parse(k, "a number")?,
                "report.countAborts" => cfg.count_aborts = e.parse(k, "true or false")?,
                _ => {
                    let Some((n, field)) = group_key(k) else {
                        return Err(ConfigError::UnknownKey { key: key.clone(), line: e.line });
                    };
                    if n == 0 || n > groups {
                        return Err(ConfigError::UnknownKey { key: key.clone(), line: e.line });
                    }
                    let g = &mut cfg.groups[n - 1];
                    match field {
                        "name" => g.name = e.value.clone(),
                        "count" => g.count = e.parse(k, "an integer")?,
                        "speed" => g.speed = e.parse(k, "a number")?,
                        "pauseTime" => g.pause_time = e.parse(k, "a number")?,
                        "terrain" => {
                            g.terrain = Terrain::parse(&e.value).ok_or_else(|| e.type_err(k, "land, water or any"))?
                        }
                        _ => return Err(ConfigError::UnknownKey { key: key.clone(), line: e.line }),
                    }
                }
            }
        }

        cfg.validate_with(|key| entries.get(key).map(|e| e.line).unwrap_or(0))?;
        Ok(cfg)
    }

    /// Checks value ranges. Errors carry line 0 for values not read from text.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line_of: impl Fn(&str) -> usize) -> Result<(), ConfigError> {
        let fail = |key: &str, message: &str| ConfigError::Range {
            key: key.to_string(),
            line: line_of(key),
            message: message.to_string(),
        };
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(fail(key, "must be a positive finite number"))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(fail(key, "must be a non-negative finite number"))
            }
        };
        let unit =
            |key: &str, v: f64| if (0.0..=1.0).contains(&v) { Ok(()) } else { Err(fail(key, "must lie in [0, 1]")) };

        positive("sim.duration", self.duration)?;
        positive("sim.tick", self.tick)?;
        if self.tick > self.duration {
            return Err(fail("sim.tick", "must not exceed sim.duration"));
        }
        for (i, g) in self.groups.iter().enumerate() {
            let n = i + 1;
            if g.count == 0 {
                return Err(fail(&format!("group{n}.count"), "must be positive"));
            }
            positive(&format!("group{n}.speed"), g.speed)?;
            non_negative(&format!("group{n}.pauseTime"), g.pause_time)?;
        }
        positive("link.range", self.link.range)?;
        positive("link.speedBps", self.link.speed_bps)?;
        positive("link.speedAfterBps", self.link.speed_after_bps)?;
        non_negative("link.speedSwitchTime", self.link.speed_switch_time)?;
        non_negative("link.latency", self.link.latency)?;
        if self.buffer_size == 0 {
            return Err(fail("link.bufferSize", "must be positive"));
        }
        unit("prophet.pInit", self.prophet.p_init)?;
        unit("prophet.beta", self.prophet.transitivity_scale)?;
        unit("prophet.gamma", self.prophet.aging_base)?;
        positive("prophet.secondsInTimeUnit", self.prophet.seconds_in_time_unit)?;
        positive("prophet.typicalInterval", self.prophet.typical_interval)?;
        if self.traffic.size == 0 {
            return Err(fail("traffic.size", "must be at least 1 byte"));
        }
        positive("traffic.intervalMin", self.traffic.interval_min)?;
        positive("traffic.intervalMax", self.traffic.interval_max)?;
        if self.traffic.interval_max < self.traffic.interval_min {
            return Err(fail("traffic.intervalMax", "must not be below traffic.intervalMin"));
        }
        if let Some(ttl) = self.traffic.ttl {
            positive("traffic.ttl", ttl)?;
        }
        non_negative("traffic.cooldown", self.traffic.cooldown)?;
        Ok(())
    }

    /// Writes every key explicitly; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("router", self.router.to_string());
        kv("sim.duration", self.duration.to_string());
        kv("sim.tick", self.tick.to_string());
        kv("sim.seed", self.seed.to_string());
        kv(
            "sim.map",
            match &self.map {
                MapSource::Builtin => "builtin".into(),
                MapSource::File(p) => p.display().to_string(),
            },
        );
        kv("sim.nrofGroups", self.groups.len().to_string());
        for (i, g) in self.groups.iter().enumerate() {
            let n = i + 1;
            kv(&format!("group{n}.name"), g.name.clone());
            kv(&format!("group{n}.count"), g.count.to_string());
            kv(&format!("group{n}.speed"), g.speed.to_string());
            kv(&format!("group{n}.pauseTime"), g.pause_time.to_string());
            kv(&format!("group{n}.terrain"), g.terrain.to_string());
        }
        kv("link.range", self.link.range.to_string());
        kv("link.speedBps", self.link.speed_bps.to_string());
        kv("link.speedAfterBps", self.link.speed_after_bps.to_string());
        kv("link.speedSwitchTime", self.link.speed_switch_time.to_string());
        kv("link.latency", self.link.latency.to_string());
        kv("link.bufferSize", self.buffer_size.to_string());
        kv("link.singleTransferPerNode", self.link.single_transfer_per_node.to_string());
        kv("prophet.pInit", self.prophet.p_init.to_string());
        kv("prophet.beta", self.prophet.transitivity_scale.to_string());
        kv("prophet.gamma", self.prophet.aging_base.to_string());
        kv("prophet.secondsInTimeUnit", self.prophet.seconds_in_time_unit.to_string());
        kv("prophet.v2EncounterScaling", self.prophet.v2_encounter_scaling.to_string());
        kv("prophet.typicalInterval", self.prophet.typical_interval.to_string());
        kv("traffic.size", self.traffic.size.to_string());
        kv("traffic.intervalMin", self.traffic.interval_min.to_string());
        kv("traffic.intervalMax", self.traffic.interval_max.to_string());
        kv("traffic.ttl", self.traffic.ttl.map_or_else(|| "inf".to_string(), |t| t.to_string()));
        kv("traffic.cooldown", self.traffic.cooldown.to_string());
        kv("report.countAborts", self.count_aborts.to_string());
        s
    }
}

struct Entry {
    value: String,
    line: usize,
}

impl Entry {
    fn parse<T: std::str::FromStr>(&self, key: &str, expected: &'static str) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| self.type_err(key, expected))
    }

    fn type_err(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::Type { key: key.to_string(), line: self.line, value: self.value.clone(), expected }
    }

    fn range(&self, key: &str, message: &str) -> ConfigError {
        ConfigError::Range { key: key.to_string(), line: self.line, message: message.to_string() }
    }
}

fn read_entries(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if let Some(prev) = entries.get(key) {
            return Err(ConfigError::Duplicate { key: key.to_string(), line, first: prev.line });
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(entries)
}

fn group_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("group")?;
    let (n, field) = rest.split_once('.')?;
    Some((n.parse().ok()?, field))
}
