use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use deepsense::SessionConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepsense"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(n: usize, seed: u64, out: &Path) -> Output {
    run(&["simulate", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", p(out)])
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn validate_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[serve]\ntime_scale = 4.0\n").unwrap();
    let o = run(&["validate", "--config", p(&path)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = SessionConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg.serve.time_scale, 4.0);
    assert_eq!(cfg.device, SessionConfig::default().device);
}

#[test]
fn invalid_config_names_each_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[serve]\ntime_scale = -1.0\n[calibration]\nramp_rate = 0.0\n").unwrap();
    let o = run(&["validate", "--config", p(&path)]);
    assert_eq!(code(&o), 1);
    let lines: Vec<serde_json::Value> = stderr(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let fields: Vec<&str> = lines.iter().map(|l| l["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"serve.time_scale"), "{fields:?}");
    assert!(fields.contains(&"calibration.ramp_rate"), "{fields:?}");
    assert!(lines.iter().all(|l| l["kind"] == "config"));

    std::fs::write(&path, "[serve]\nspeed = 2\n").unwrap();
    assert_eq!(code(&run(&["validate", "--config", p(&path)])), 1);
    assert_eq!(code(&run(&["validate", "--config", p(&dir.path().join("absent.toml"))])), 1);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(0, 1, dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("at least 1"));
    assert_eq!(code(&run(&["simulate", "--out", p(dir.path())])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = simulate(1, 42, a.path());
    assert_eq!(code(&oa), 0, "{}", stderr(&oa));
    assert_eq!(code(&simulate(1, 42, b.path())), 0);
    let names = csv_names(a.path());
    assert_eq!(names, csv_names(b.path()));
    assert_eq!(names.len(), 2, "{names:?}");
    for n in &names {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap(), "{n}");
    }
    let stdout = String::from_utf8(oa.stdout).unwrap();
    assert!(stdout.contains("H nV") && stdout.contains("summary.csv"), "{stdout}");
}

#[test]
fn analyze_writes_every_table() {
    let sim = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(4, 7, sim.path())), 0);
    let o = run(&["analyze", "--in", p(sim.path()), "--out", p(out.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        csv_names(out.path()),
        ["angle.csv", "calibration.csv", "force.csv", "force_fit.csv", "learning.csv", "stats.csv", "summary.csv"]
    );

    let only = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--in", p(sim.path()), "--out", p(only.path()), "--tables", "calibration,angle"]);
    assert_eq!(code(&o), 0);
    assert_eq!(csv_names(only.path()), ["angle.csv", "calibration.csv"]);
    let o = run(&["analyze", "--in", p(sim.path()), "--out", p(only.path()), "--tables", "bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn analyze_without_logs_fails() {
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["analyze", "--in", p(empty.path()), "--out", p(out.path())])), 1);
    let missing = empty.path().join("nope");
    assert_eq!(code(&run(&["analyze", "--in", p(&missing), "--out", p(out.path())])), 1);

    let junk = empty.path().join("session_bad.csv");
    std::fs::write(&junk, "not,a,log\n").unwrap();
    let o = run(&["analyze", "--in", p(empty.path()), "--out", p(out.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("session_bad.csv"));
}

#[test]
fn analyze_skips_bad_files_and_reports_partial() {
    let sim = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(2, 3, sim.path())), 0);
    let bad: PathBuf = sim.path().join("session_zz_0.csv");
    std::fs::write(&bad, "# deepsense session log\ngarbage\n").unwrap();

    let o = run(&["analyze", "--in", p(sim.path()), "--out", p(out.path())]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let err = stderr(&o);
    let line: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(line["kind"], "log");
    assert!(line["field"].as_str().unwrap().ends_with("session_zz_0.csv"));
    assert!(csv_names(out.path()).contains(&"summary.csv".to_string()));
}

#[test]
fn serve_once_hosts_assets_and_exits_after_the_session() {
    let out = tempfile::tempdir().unwrap();
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<p>bundle</p>").unwrap();

    let mut child = bin()
        .args(["serve", "--port", "0", "--once", "--out", p(out.path()), "--assets", p(assets.path())])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first.strip_prefix("listening on http://").expect(&first).to_string();

    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        use futures_util::{SinkExt, StreamExt};
        use tokio::io::{AsyncReadExt, AsyncWriteExt};
        use tokio_tungstenite::tungstenite::Message;

        let mut tcp = tokio::net::TcpStream::connect(&addr).await.unwrap();
        tcp.write_all(format!("GET / HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").as_bytes())
            .await
            .unwrap();
        let mut resp = String::new();
        tcp.read_to_string(&mut resp).await.unwrap();
        assert!(resp.starts_with("HTTP/1.1 200") && resp.contains("bundle"), "{resp}");

        let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
        ws.next().await.unwrap().unwrap();
        let safety = deepsense_cli::wire::ClientMsg::Safety.to_json();
        ws.send(Message::text(safety)).await.unwrap();
        while let Some(Ok(msg)) = ws.next().await {
            if let Message::Text(t) = msg {
                if t.contains(r#""type":"end""#) {
                    assert!(t.contains("safety_stop"), "{t}");
                    break;
                }
            }
        }
    });

    let status = child.wait().unwrap();
    assert!(status.success());
    let rest: Vec<String> = lines.map(|l| l.unwrap()).collect();
    assert!(rest.iter().any(|l| l.starts_with("session ended: safety_stop")), "{rest:?}");
    assert_eq!(csv_names(out.path()).len(), 1);
}
