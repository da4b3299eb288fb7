use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_krylov-lie"))
}

#[test]
fn list_shows_six_builtins() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(
        names,
        ["su4_sech", "ho_quench", "virasoro_sector", "rotating_spin", "dragged_oscillator", "so7_two_sector"]
    );
}

#[test]
fn unknown_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "no_such_scenario", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_sigma_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"name":"bad","sector":{"sigma":3,"lowest_weight":-1.0},
            "drive":{"tag":"sech_pulse","omega0":1.0,"width":1.0},"grid":{"t_end":1.0}}"#,
    )
    .unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    fs::write(
        &cfg,
        r#"{"name":"typo","sector":{"sigma":1,"lowest_weight":-1.0},
            "drive":{"tag":"sech_pulse","omega0":1.0,"widht":1.0},"grid":{"t_end":1.0}}"#,
    )
    .unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    fs::write(
        &cfg,
        r#"{"name":"strict","sector":{"sigma":1,"lowest_weight":-1.0},
            "drive":{"tag":"sech_pulse","omega0":1.0,"width":1.0},"grid":{"t_end":20.0},
            "closed_form":{"tag":"long_time_complexity","value":1.5}}"#,
    )
    .unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path()).arg("--no-oracle").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("long_time_complexity"));
}

#[test]
fn su4_summary_and_bit_stable_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = bin().args(["run", "su4_sech", "--out"]).arg(d.path()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["su4_sech_series.csv", "su4_sech_generator.csv", "su4_sech_summary.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
        assert!(!x.contains(&b'\r'));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("su4_sech_summary.json")).unwrap()).unwrap();
    assert!((summary["k_final"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(summary["passed"], true);
    let csv = fs::read_to_string(a.path().join("su4_sech_series.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,re_z,im_z,re_eta,im_eta,K,dK,dK_dt,bound,gap,P_0"), "{header}");
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn batch_runs_in_parallel_with_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("KRYLOV_LIE_THREADS", "2")
        .args(["run", "rotating_spin", "so7_two_sector", "--no-oracle", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["rotating_spin_series.csv", "so7_two_sector_series.csv", "so7_two_sector_sector1_series.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
