use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_orchestra-sim");

fn sim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn reference_json(edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let text = include_str!("../scenarios/reference.json");
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    edit(&mut v);
    v.to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_every_output_file() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "s.json",
        &reference_json(|v| {
            v["duration_ms"] = 60_000.into();
            v["events"] = serde_json::json!([]);
        }),
    );
    let out = tmp.path().join("out");
    let o = sim(&[
        "run",
        "--scenario",
        &sc,
        "--seed",
        "4",
        "--scheduler",
        "minimal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trickle.csv",
        "dio.csv",
        "energy.csv",
        "deliveries.csv",
        "events.log",
        "report.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let header = fs::read_to_string(out.join("trickle.csv")).unwrap();
    assert!(header.starts_with("time_ms,node,interval_ms\n"));
    let header = fs::read_to_string(out.join("dio.csv")).unwrap();
    assert!(header.starts_with("time_ms,node,trigger_index\n"));
    let header = fs::read_to_string(out.join("energy.csv")).unwrap();
    assert!(header.starts_with("window,node,on_ms,window_ms,percent\n"));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scheduler"], "minimal");
    assert_eq!(report["seed"], 4);
}

#[test]
fn compare_then_steady_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let o = sim(&[
        "compare",
        "--scenario",
        "scenarios/reference.json",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("window transient"), "{stdout}");
    assert!(out.join("comparison.csv").is_file());
    assert!(out.join("comparison.json").is_file());

    for kind in ["orchestra", "minimal"] {
        let dir = out.join(kind);
        let report: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
        let o = sim(&["steady", "--trace", dir.to_str().unwrap()]);
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        let expected = match report["steady_state_ms"].as_u64() {
            Some(ms) => format!("steady state   {:.2} s", ms as f64 / 1000.0),
            None => "steady state   none".to_string(),
        };
        assert!(text.contains(&expected), "{kind}: {text} vs {expected}");
        let rec = report["recoveries"][0]["recovery_ms"]
            .as_u64()
            .map(|ms| format!("{:.2} s", ms as f64 / 1000.0));
        assert!(
            text.contains(&format!(
                "removed at 180.00 s: {}",
                rec.unwrap_or("none".into())
            )),
            "{text}"
        );
    }
}

#[test]
fn invalid_scenario_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "two_roots",
            reference_json(|v| v["nodes"][1]["role"] = "root".into()),
        ),
        (
            "duplicate_id",
            reference_json(|v| v["nodes"][1]["id"] = v["nodes"][0]["id"].clone()),
        ),
        (
            "late_event",
            reference_json(|v| v["events"][0]["at"] = 10_000_000.into()),
        ),
        (
            "unknown_field",
            reference_json(|v| v["colour"] = "blue".into()),
        ),
        (
            "bad_channel",
            reference_json(|v| v["hopping_sequence"][0] = 40.into()),
        ),
        (
            "unknown_removal",
            reference_json(|v| v["events"][0]["node"] = 99.into()),
        ),
        ("not_json", "{ nodes: ".to_string()),
    ];
    for (name, text) in cases {
        let sc = write(tmp.path(), &format!("{name}.json"), &text);
        let out = tmp.path().join(format!("out_{name}"));
        for cmd in ["run", "compare"] {
            let o = sim(&[
                cmd,
                "--scenario",
                &sc,
                "--seed",
                "1",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(!o.status.success(), "{name}/{cmd} accepted");
            assert!(
                String::from_utf8_lossy(&o.stderr).contains("error"),
                "{name}/{cmd}"
            );
            assert!(!out.exists(), "{name}/{cmd} left partial output");
        }
    }
}

#[test]
fn compare_needs_an_open_scheduler() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(
        tmp.path(),
        "s.json",
        &reference_json(|v| v["scheduler"] = "orchestra".into()),
    );
    let out = tmp.path().join("out");
    let o = sim(&[
        "compare",
        "--scenario",
        &sc,
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn missing_inputs_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "--scenario",
        "/nonexistent/s.json",
        "--seed",
        "1",
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let o = sim(&["steady", "--trace", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let o = sim(&[
        "steady",
        "--trace",
        tmp.path().to_str().unwrap(),
        "--window-s",
        "0",
    ]);
    assert!(!o.status.success());
    let o = sim(&["run", "--seed", "1"]);
    assert!(!o.status.success());
}
