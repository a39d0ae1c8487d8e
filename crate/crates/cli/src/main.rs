use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use opportunet::config::ScenarioConfig;
use opportunet::engine::{replay, RunOutput, Simulation};
use opportunet::metrics::{aggregate_table, fmt_opt, metric_table, scatter_table, Metric, RunRecord};
use opportunet::routing::RouterKind;
use opportunet::sweep::{default_sizes, plan, sweep, thread_cap, RunSpec};
use opportunet::trace::{messages_to_csv, parse_messages, parse_trace, trace_to_csv};

#[derive(Parser)]
#[command(name = "opportunet", version, about = "Delay-tolerant network routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its event log and report.
    Run {
        /// Scenario file; the built-in scenario when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write contacts.csv and messages.csv for later replay.
        #[arg(long)]
        export_contacts: bool,
    },
    /// Run every router/size/seed combination and write aggregate tables.
    Sweep {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Message sizes in bytes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "epidemic,maxprop,prophet")]
        routers: Vec<RouterKind>,
        #[arg(short, long)]
        output: PathBuf,
        /// Worker threads (overrides OPPORTUNET_THREADS).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Drive routing from a recorded contact trace instead of mobility.
    Replay {
        #[arg(short, long)]
        trace: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Message schedule (`time,source,destination,size`); random
        /// traffic among the trace's nodes when omitted.
        #[arg(long)]
        messages: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let Some(path) = path else { return Ok(ScenarioConfig::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    // relative map paths are resolved against the config file's directory
    if let opportunet::config::MapSource::File(map) = &cfg.map {
        if map.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.map = opportunet::config::MapSource::File(dir.join(map));
            }
        }
    }
    Ok(cfg)
}

fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("events.csv"), out.log.to_csv())?;
    fs::write(dir.join("report.csv"), out.report.to_csv())?;
    Ok(())
}

fn summary(label: &str, out: &RunOutput) -> String {
    let r = &out.report;
    format!(
        "{label}: created {} delivered {} relayed {} delivery_probability {} average_latency_s {} overhead_ratio {}",
        r.created,
        r.delivered,
        r.relayed,
        fmt_opt(r.delivery_probability()),
        fmt_opt(r.average_latency()),
        fmt_opt(r.overhead_ratio())
    )
}

fn cmd_run(config: Option<&Path>, output: &Path, export: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let mut sim = Simulation::new(&cfg)?;
    sim.record_contacts(export);
    let out = sim.run()?;
    write_run(output, &out)?;
    if export {
        fs::write(output.join("contacts.csv"), trace_to_csv(&out.contacts))?;
        fs::write(output.join("messages.csv"), messages_to_csv(&out.messages))?;
    }
    println!("{}", summary(&format!("{} {} B seed {}", cfg.router, cfg.traffic.size, cfg.seed), &out));
    Ok(())
}

fn cmd_sweep(
    config: Option<&Path>,
    sizes: Option<Vec<u64>>,
    seeds: &[u64],
    routers: &[RouterKind],
    output: &Path,
    threads: Option<usize>,
) -> Result<()> {
    let base = load_config(config)?;
    let sizes = sizes.unwrap_or_else(default_sizes);
    if sizes.is_empty() || seeds.is_empty() || routers.is_empty() {
        bail!("sizes, seeds and routers must be non-empty");
    }
    if let Some(s) = sizes.iter().find(|&&s| s == 0) {
        bail!("message size {s} must be positive");
    }
    let specs = plan(routers, &sizes, seeds);
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    eprintln!("running {} simulations", specs.len());
    let threads = threads.or_else(thread_cap);
    let write = |spec: &RunSpec, out: &RunOutput| {
        write_run(&output.join(spec.dir_name()), out).map_err(|e| format!("{e:#}"))?;
        eprintln!("{}", summary(&spec.dir_name(), out));
        Ok(())
    };
    let records = match sweep(&base, &specs, threads, write) {
        Ok(r) => r,
        Err(e) => {
            write_tables(output, &e.partial, routers).ok();
            for (spec, msg) in &e.failures {
                eprintln!("failed: {}: {msg}", spec.dir_name());
            }
            if !e.skipped.is_empty() {
                eprintln!("{} runs skipped after the failure; tables hold partial results", e.skipped.len());
            }
            return Err(e.into());
        }
    };
    write_tables(output, &records, routers)?;
    Ok(())
}

fn write_tables(output: &Path, records: &[RunRecord], routers: &[RouterKind]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    for m in Metric::ALL {
        fs::write(output.join(format!("{}.csv", m.name())), metric_table(records, m)?)?;
        fs::write(output.join(format!("aggregate_{}.csv", m.name())), aggregate_table(records, m)?)?;
    }
    for &r in routers {
        fs::write(output.join(format!("scatter_{r}.csv")), scatter_table(records, r)?)?;
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<()> {
    let cfg = load_config(Some(config))?;
    // building the world checks each group's terrain is connected
    let graph = opportunet::engine::resolve_map(&cfg.map)?;
    opportunet::engine::World::new(&cfg, graph)?;
    println!("ok: {} nodes, {} s at {} s ticks, router {}", cfg.node_count(), cfg.duration, cfg.tick, cfg.router);
    Ok(())
}

fn cmd_replay(trace: &Path, config: Option<&Path>, messages: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let text = fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
    let events = parse_trace(&text).map_err(anyhow::Error::msg).with_context(|| format!("in {}", trace.display()))?;
    let schedule = match messages {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(parse_messages(&text).map_err(anyhow::Error::msg).with_context(|| format!("in {}", p.display()))?)
        }
        None => None,
    };
    let out = replay(&cfg, events, schedule)?;
    if let Some(dir) = output {
        write_run(dir, &out)?;
    }
    println!("{}", summary(&format!("replay {}", cfg.router), &out));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, output, export_contacts } => cmd_run(config.as_deref(), output, *export_contacts),
        Command::Sweep { config, sizes, seeds, routers, output, threads } => {
            cmd_sweep(config.as_deref(), sizes.clone(), seeds, routers, output, *threads)
        }
        Command::Validate { config } => cmd_validate(config),
        Command::Replay { trace, config, messages, output } => {
            cmd_replay(trace, config.as_deref(), messages.as_deref(), output.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
