use std::path::PathBuf;
use std::process::{Command, Output};

fn tmflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmflow")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn encode_then_decode() {
    let o = tmflow(&["encode", "--tm", "succ", "--input", "11"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("c = 64"), "{}", stdout(&o));
    let o = tmflow(&["decode", "--tm", "succ", "64"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("tape = "), "{}", stdout(&o));
}

#[test]
fn compile_emits_an_expression() {
    let o = tmflow(&["compile", "--tm", "succ", "--delta", "0.1", "--emit-expr"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("sin(2*pi*"));
}

#[test]
fn malformed_machine_is_a_usage_error() {
    let tm = scratch("broken.tm");
    std::fs::write(&tm, "states: a b\nalphabet 1\n").unwrap();
    let o = tmflow(&["encode", "--tm", tm.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(tmflow(&["encode", "--tm", "/no/such/machine"]).status.code(), Some(2));
}

#[test]
fn malformed_config_and_flags_are_usage_errors() {
    let cfg = scratch("broken.cfg");
    std::fs::write(&cfg, "delta = 0.1\nthis line has no equals sign\n").unwrap();
    let o = tmflow(&["--config", cfg.to_str().unwrap(), "encode", "--tm", "succ"]);
    assert_eq!(o.status.code(), Some(2));

    let o = tmflow(&["iterate-map", "--tm", "succ", "--delta", "0.5", "--epsilon", "0", "--steps", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("delta") && err.contains("epsilon"), "{err}");
    assert_eq!(tmflow(&["iterate-map", "--tm", "succ", "--noise", "loud"]).status.code(), Some(2));
    assert_eq!(tmflow(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn leaving_the_band_is_a_violation() {
    let o = tmflow(&[
        "iterate-map", "--tm", "succ", "--input", "11", "--delta", "0.1", "--epsilon", "0.11", "--offset", "0.19",
        "--noise", "const+", "--steps", "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("violation"));
}

#[test]
fn same_seed_gives_identical_csv() {
    let run = |name: &str| {
        let out = scratch(name);
        let o = tmflow(&[
            "iterate-map", "--tm", "bb2", "--delta", "0.1", "--noise", "uniform", "--seed", "42", "--steps", "12",
            "--offset", "0.15", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("map-a.csv");
    assert_eq!(a, run("map-b.csv"));
    assert!(a.starts_with(b"step,value,nearest,expected,distance,ok\n"));

    let other = scratch("map-c.csv");
    tmflow(&[
        "iterate-map", "--tm", "bb2", "--delta", "0.1", "--noise", "uniform", "--seed", "43", "--steps", "12",
        "--offset", "0.15", "--out", other.to_str().unwrap(),
    ]);
    assert_ne!(a, std::fs::read(other).unwrap());
}

#[test]
fn trace_is_reproducible() {
    let run = |name: &str| {
        let prefix = scratch(name);
        let o = tmflow(&["trace", "--tm", "succ", "--input", "11", "--steps", "2", "--out", prefix.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let svg = std::fs::read_to_string(prefix.with_extension("svg")).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        std::fs::read(prefix.with_extension("csv")).unwrap()
    };
    let a = run("trace-a");
    assert_eq!(a, run("trace-b"));
    assert!(a.starts_with(b"t,z1,z2,orbit\n"));
}

#[test]
fn omega_and_verify_report_json() {
    let o = tmflow(&["omega-ode", "--which", "J21", "--steps", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["pass"], true);

    let o = tmflow(&["verify", "--suite", "map,pairing", "--scale", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v.as_array().unwrap().iter().all(|s| s["pass"] == true));
    assert_eq!(tmflow(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
}
