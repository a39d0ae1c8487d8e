use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn opportunet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opportunet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.cfg", "");
    let out = opportunet(&["validate", "-c", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("ok: 120 nodes"), "{}", stdout(&out));
}

#[test]
fn bad_config_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "sim.duration = 60\nprophet.pInit = 1.5\n");
    let out = opportunet(&["validate", "-c", &cfg]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("prophet.pInit") && err.contains('2'), "{err}");

    let cfg = write(dir.path(), "typo.cfg", "sim.durration = 60\n");
    assert!(!opportunet(&["validate", "-c", &cfg]).status.success());
    assert!(!opportunet(&["validate", "-c", "/nonexistent/x.cfg"]).status.success());
}

#[test]
fn sweep_writes_one_directory_per_run_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.cfg", "sim.duration = 300\n");
    let out_dir = dir.path().join("out");
    let out = opportunet(&[
        "sweep",
        "-c",
        &cfg,
        "--sizes",
        "262144,524288",
        "--seeds",
        "1,2",
        "--routers",
        "epidemic",
        "--threads",
        "2",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut runs: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("run_"))
        .collect();
    runs.sort();
    assert_eq!(
        runs,
        ["run_epidemic_262144_1", "run_epidemic_262144_2", "run_epidemic_524288_1", "run_epidemic_524288_2"]
    );
    for r in &runs {
        assert!(out_dir.join(r).join("events.csv").is_file());
        assert!(out_dir.join(r).join("report.csv").is_file());
    }
    let agg = fs::read_to_string(out_dir.join("aggregate_delivery_probability.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3, "{agg}");
    assert!(agg.starts_with("router,size_bytes,mean,stddev,n\n"));
    let lat = fs::read_to_string(out_dir.join("average_latency.csv")).unwrap();
    assert!(lat.starts_with("router,size_bytes,seed,value,unit\n"), "{lat}");
    assert_eq!(fs::read_to_string(out_dir.join("overhead_ratio.csv")).unwrap().lines().count(), 5);
    assert!(out_dir.join("scatter_epidemic.csv").is_file());
}

#[test]
fn replay_of_line_trace_relays_through_the_middle_node() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(dir.path(), "line.csv", "time,a,b,event\n10,0,1,up\n20,0,1,down\n40,1,2,up\n50,1,2,down\n");
    let msgs = write(dir.path(), "msgs.csv", "time,source,destination,size\n0,0,2,524288\n");
    let cfg = write(dir.path(), "inf.cfg", "sim.duration = 60\nlink.bufferSize = 1099511627776\n");
    let out_dir = dir.path().join("replay");
    let out = opportunet(&["replay", "-t", &trace, "--messages", &msgs, "-c", &cfg, "-o", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("created 1 delivered 1 relayed 2"), "{text}");
    // control exchange, then latency plus 524288 B at 500 kB/s, rounded up to a tick
    assert!(text.contains("average_latency_s 41.5"), "{text}");
    let events = fs::read_to_string(out_dir.join("events.csv")).unwrap();
    assert!(events.contains("41.5,delivered,M1,1,2,524288,2"), "{events}");
}

#[test]
fn exported_contacts_replay_to_the_same_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "short.cfg",
        "sim.duration = 900\nrouter = maxprop\ntraffic.size = 524288\ntraffic.cooldown = 0\n",
    );
    let live = dir.path().join("live");
    let out = opportunet(&["run", "-c", &cfg, "-o", live.to_str().unwrap(), "--export-contacts"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let again = dir.path().join("again");
    let out = opportunet(&[
        "replay",
        "-t",
        live.join("contacts.csv").to_str().unwrap(),
        "--messages",
        live.join("messages.csv").to_str().unwrap(),
        "-c",
        &cfg,
        "-o",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(live.join("events.csv")).unwrap(),
        fs::read_to_string(again.join("events.csv")).unwrap()
    );
}

#[test]
fn relative_map_path_resolves_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.map", "LINE:both 0,0 10,0 10,10\n");
    let cfg = write(dir.path(), "tiny.cfg", "sim.duration = 30\nsim.map = tiny.map\n");
    let out = opportunet(&["run", "-c", &cfg, "-o", dir.path().join("o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn validate_rejects_disconnected_map() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "split.map", "LINE:land 0,0 10,0\nLINE:land 50,50 60,50\nLINE:water 0,5 10,5\n");
    let cfg = write(dir.path(), "split.cfg", "sim.map = split.map\n");
    let out = opportunet(&["validate", "-c", &cfg]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("disconnected"), "{}", stderr(&out));
}
