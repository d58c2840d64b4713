use std::path::Path;
use std::process::{Command, Output};

fn backreach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backreach"))
        .args(args)
        .env("BACKREACH_THREADS", "1")
        .output()
        .expect("run backreach")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let safe = backreach(&["certify", &scenario("double_integrator")]);
    assert_eq!(safe.status.code(), Some(0), "{}", stdout(&safe));
    assert!(stdout(&safe).contains("verdict: CertifiedSafe"));

    let bad = backreach(&["certify", &scenario("ground_robot_linear_faulty")]);
    assert_eq!(bad.status.code(), Some(2), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("PossibleCollision"));
}

#[test]
fn benchmark_names_work_in_place_of_files() {
    let o = backreach(&["certify", "quadrotor_6d", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("invariance: true"));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"schema_version\": 1,").unwrap();
    let o = backreach(&["certify", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let o = backreach(&["certify", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));

    let o = backreach(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1), "usage errors must not look like a verdict");
    assert_eq!(backreach(&["--help"]).status.code(), Some(0));
}

#[test]
fn bp_then_render() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.json");
    let fig = dir.path().join("fig.svg");
    let o = backreach(&["bp", &scenario("double_integrator"), "--out", sets.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sets).unwrap()).unwrap();
    assert!(json.get("X_0").is_some());

    let o = backreach(&["render", sets.to_str().unwrap(), "--out", fig.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(&fig).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<title>P t=").count(), 5);
}

#[test]
fn render_needs_axes_beyond_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.json");
    let fig = dir.path().join("fig.svg");
    assert_eq!(backreach(&["bp", "quadrotor_6d", "--out", sets.to_str().unwrap()]).status.code(), Some(0));
    let o = backreach(&["render", sets.to_str().unwrap(), "--out", fig.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = backreach(&["render", sets.to_str().unwrap(), "--out", fig.to_str().unwrap(), "--axes", "0,2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sweep_prints_csv() {
    let o = backreach(&["sweep", "double_integrator", "--partitions", "4,16", "--samples", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "r,error,lp_count,wall_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,"));

    let o = backreach(&["sweep", "double_integrator", "--period", "2"]);
    assert_eq!(o.status.code(), Some(1), "period sweeps need a nonlinear scenario");
}

#[test]
fn oracle_finds_no_violations() {
    let o = backreach(&["oracle", "double_integrator", "--samples", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("samples outside their BP set: 0"));
}

#[test]
fn policy_build_writes_a_network() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/robot_policy.json");
    let o = backreach(&[
        "policy",
        "build",
        spec.to_str().unwrap(),
        "--out",
        net.to_str().unwrap(),
        "--smoke",
        "ground_robot_linear",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = backreach::nn::load_network(&net).unwrap();
    assert_eq!(loaded.input_dim(), 2);

    let faulty = dir.path().join("faulty.json");
    std::fs::write(&faulty, r#"{"family":"ground_robot","resolution":1.0,"half_width":10.0,"faulty":true}"#).unwrap();
    let o = backreach(&["policy", "build", faulty.to_str().unwrap(), "--smoke", "ground_robot_linear_faulty"]);
    assert_eq!(o.status.code(), Some(1));
}
