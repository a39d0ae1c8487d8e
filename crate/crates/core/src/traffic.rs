//! Message creation schedule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrafficConfig;
use crate::link::NodeId;

/// A message the engine should create at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledMessage {
    pub time: f64,
    pub source: NodeId,
    pub destination: NodeId,
    pub size: u64,
}

/// Creates messages at intervals drawn uniformly from
/// `[interval_min, interval_max]`, between a uniformly random pair of
/// distinct nodes. Nothing is created at or after `stop_at`.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    rng: ChaCha8Rng,
    cfg: TrafficConfig,
    nodes: usize,
    next_at: f64,
    stop_at: f64,
}

impl TrafficGenerator {
    pub fn new(cfg: TrafficConfig, nodes: usize, duration: f64, mut rng: ChaCha8Rng) -> Self {
        assert!(nodes >= 2, "traffic needs at least two nodes");
        let next_at = draw_interval(&mut rng, &cfg);
        let stop_at = duration - cfg.cooldown;
        TrafficGenerator { rng, cfg, nodes, next_at, stop_at }
    }

    /// Time of the next creation, if any remains.
    pub fn next_at(&self) -> Option<f64> {
        (self.next_at < self.stop_at).then_some(self.next_at)
    }

    /// All messages due at or before `now` (a small epsilon absorbs tick
    /// rounding).
    pub fn due(&mut self, now: f64) -> Vec<ScheduledMessage> {
        let mut out = Vec::new();
        while self.next_at < self.stop_at && self.next_at <= now + 1e-9 {
            let source = self.rng.gen_range(0..self.nodes);
            let mut destination = self.rng.gen_range(0..self.nodes - 1);
            if destination >= source {
                destination += 1;
            }
            out.push(ScheduledMessage { time: self.next_at, source, destination, size: self.cfg.size });
            self.next_at += draw_interval(&mut self.rng, &self.cfg);
        }
        out
    }

    /// The complete schedule up to the stop time.
    pub fn drain(mut self) -> Vec<ScheduledMessage> {
        self.due(f64::INFINITY)
    }
}

fn draw_interval(rng: &mut ChaCha8Rng, cfg: &TrafficConfig) -> f64 {
    if cfg.interval_max > cfg.interval_min {
        rng.gen_range(cfg.interval_min..=cfg.interval_max)
    } else {
        cfg.interval_min
    }
}
