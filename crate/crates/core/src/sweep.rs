//! Parameter sweeps over router, message size and seed.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::engine::{resolve_map, RunOutput, SimError, Simulation};
use crate::metrics::{fingerprint, RunRecord};
use crate::routing::RouterKind;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OPPORTUNET_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunSpec {
    pub router: RouterKind,
    pub size: u64,
    pub seed: u64,
}

impl RunSpec {
    pub fn config(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.router = self.router;
        cfg.traffic.size = self.size;
        cfg.seed = self.seed;
        cfg
    }

    /// Directory name used for this run's output.
    pub fn dir_name(&self) -> String {
        format!("run_{}_{}_{}", self.router, self.size, self.seed)
    }
}

/// The full grid, ordered by router, then size, then seed.
pub fn plan(routers: &[RouterKind], sizes: &[u64], seeds: &[u64]) -> Vec<RunSpec> {
    let mut specs = Vec::with_capacity(routers.len() * sizes.len() * seeds.len());
    for &router in routers {
        for &size in sizes {
            for &seed in seeds {
                specs.push(RunSpec { router, size, seed });
            }
        }
    }
    specs.sort();
    specs.dedup();
    specs
}

/// The default size grid: 0.25 MiB steps up to 3 MiB.
pub fn default_sizes() -> Vec<u64> {
    (1..=12).map(|k| k * 262_144).collect()
}

#[derive(Debug, Error)]
#[error("{} of {} runs failed (first: {}: {})", failures.len(), total, failures[0].0.dir_name(), failures[0].1)]
pub struct SweepError {
    /// Runs that completed before the sweep was abandoned.
    pub partial: Vec<RunRecord>,
    pub failures: Vec<(RunSpec, String)>,
    /// Runs never started because of an earlier failure.
    pub skipped: Vec<RunSpec>,
    pub total: usize,
}

/// Worker count from the environment, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

enum Outcome {
    Done(RunRecord),
    Failed(String),
    Skipped,
}

/// Runs every spec, in parallel on up to `threads` workers (rayon's
/// default when `None`). `on_run` sees each finished run, for example to
/// write its files; an error from it fails that run. Records come back in
/// spec order regardless of scheduling.
pub fn sweep<F>(
    base: &ScenarioConfig,
    specs: &[RunSpec],
    threads: Option<usize>,
    on_run: F,
) -> Result<Vec<RunRecord>, SweepError>
where
    F: Fn(&RunSpec, &RunOutput) -> Result<(), String> + Sync,
{
    let failed = AtomicBool::new(false);
    let graph = match resolve_map(&base.map) {
        Ok(g) => Some(g),
        Err(e) => {
            return Err(SweepError {
                partial: Vec::new(),
                failures: specs.iter().take(1).map(|s| (*s, e.to_string())).collect(),
                skipped: specs.iter().skip(1).copied().collect(),
                total: specs.len(),
            })
        }
    };
    let one = |spec: &RunSpec| -> Outcome {
        if failed.load(Ordering::SeqCst) {
            return Outcome::Skipped;
        }
        let cfg = spec.config(base);
        let result = Simulation::with_graph(&cfg, graph.clone().expect("map resolved"))
            .and_then(Simulation::run)
            .map_err(|e: SimError| e.to_string())
            .and_then(|out| {
                on_run(spec, &out)?;
                Ok(RunRecord {
                    router: spec.router,
                    size: spec.size,
                    seed: spec.seed,
                    report: out.report,
                    fingerprint: fingerprint(&cfg),
                })
            });
        match result {
            Ok(r) => Outcome::Done(r),
            Err(e) => {
                failed.store(true, Ordering::SeqCst);
                Outcome::Failed(e)
            }
        }
    };
    let outcomes: Vec<Outcome> = match threads {
        Some(1) => specs.iter().map(one).collect(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| specs.par_iter().map(one).collect()),
            Err(_) => specs.iter().map(one).collect(),
        },
        None => specs.par_iter().map(one).collect(),
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    for (spec, o) in specs.iter().zip(outcomes) {
        match o {
            Outcome::Done(r) => records.push(r),
            Outcome::Failed(e) => failures.push((*spec, e)),
            Outcome::Skipped => skipped.push(*spec),
        }
    }
    if failures.is_empty() {
        Ok(records)
    } else {
        Err(SweepError { partial: records, failures, skipped, total: specs.len() })
    }
}
