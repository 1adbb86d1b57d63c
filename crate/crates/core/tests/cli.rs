//! End-to-end runs of the `bpre` binary.

use std::path::Path;
use std::process::{Command, Output};

const M0: &str = r#"
[model]
kind = "finite_mixture"
laws = [{ kind = "explicit", pmf = [0.2, 0.3, 0.5] }, { kind = "explicit", pmf = [0.1, 0.2, 0.7] }]
weights = [0.5, 0.5]
"#;

fn bpre(dir: &Path, experiment: &str, config: &str, extra: &[&str]) -> Output {
    let path = dir.join(format!("{experiment}.toml"));
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bpre"))
        .arg(experiment)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn edgeworth_order_above_moment_index_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "experiment = \"edgeworth\"\n{M0}\n[sim]\nseed = 1\nn = [10]\ntrajectories = 100\n\n[edgeworth]\nr = 5\nq = 4\np = 2\n"
    );
    let o = bpre(dir.path(), "edgeworth", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("r in [3, q-1]"), "{}", stderr(&o));
}

#[test]
fn renewal_on_binary_splitting_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
experiment = "renewal"

[model]
kind = "finite_mixture"
laws = [{ kind = "dirac", m = 2 }]

[sim]
seed = 1
trajectories = 100

[renewal]
B = 0.0
C = 1.0
y_list = [10.0]
"#;
    let o = bpre(dir.path(), "renewal", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonlattice required"), "{}", stderr(&o));
}

#[test]
fn configuration_mistakes_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let good = format!("experiment = \"simulate\"\n{M0}\n[sim]\nseed = 1\nn = [3]\ntrajectories = 100\n");
    for bad in [
        good.replace("trajectories", "trajectorys"),
        good.replace("seed = 1\n", ""),
        good.replace(M0, ""),
    ] {
        let o = bpre(dir.path(), "simulate", &bad, &[]);
        assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    }
    let o = bpre(dir.path(), "clt", &good, &[]);
    assert_eq!(o.status.code(), Some(1), "experiment mismatch: {}", stderr(&o));
}

#[test]
fn subcritical_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
experiment = "simulate"

[model]
kind = "finite_mixture"
laws = [{ kind = "explicit", pmf = [0.5, 0.3, 0.2] }]

[sim]
seed = 1
n = [3]
trajectories = 100
"#;
    let o = bpre(dir.path(), "simulate", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("supercriticality"), "{}", stderr(&o));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = format!(
        "experiment = \"charfn\"\n{M0}\n[sim]\nseed = 5\nn = [1, 2, 3, 4, 5, 6]\ntrajectories = 20000\nsurvival_margin = 0\n\n[grid]\ns_max = 0.5\npoints = 11\n"
    );
    let read = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = bpre(dir.path(), "charfn", &cfg, &["--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let one = read("1");
    assert!(one.iter().any(|(n, _)| n == "charfn.csv"));
    assert!(one.iter().any(|(n, _)| n == "convergence_fit.csv"));
    assert_eq!(one, read("8"));
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = format!("experiment = \"simulate\"\n{M0}\n[sim]\nseed = 1\nn = [4]\ntrajectories = 500\n");
    let dump = |extra: &[&str]| {
        let dir = tempfile::tempdir().unwrap();
        let o = bpre(dir.path(), "simulate", &cfg, extra);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join("out/ensemble.csv")).unwrap()
    };
    let base = dump(&[]);
    assert_eq!(base, dump(&["--seed", "1"]));
    assert_ne!(base, dump(&["--seed", "2"]));
    assert!(base.starts_with("stream_id,alive_n,logZ_4\n"));
}

#[test]
fn oracle_check_writes_summary_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("experiment = \"oracle-check\"\n{M0}\n[sim]\nseed = 3\nn = [2, 3]\ntrajectories = 50000\n");
    let o = bpre(dir.path(), "oracle-check", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let mut keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["anchor", "criterion", "pass", "threshold", "value"]);
        assert_eq!(r["pass"], true);
    }
    let law = std::fs::read_to_string(dir.path().join("out/oracle_law_n3.csv")).unwrap();
    assert!(law.starts_with("k,exact,empirical\n"));
    let survival = std::fs::read_to_string(dir.path().join("out/survival.csv")).unwrap();
    assert!(survival.starts_with("t,survival\n1,0.85"));
}

#[test]
fn full_acceptance_lists_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    // 2% of the reference sample sizes.
    let cfg = "experiment = \"full-acceptance\"\n\n[sim]\nseed = 11\ntrajectories = 20000\n";
    let o = bpre(dir.path(), "full-acceptance", cfg, &[]);
    let text = std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 10);
    for (i, r) in rows.iter().enumerate() {
        assert!(r["criterion"].as_str().unwrap().starts_with(&format!("C{} ", i + 1)));
    }
    let all_pass = rows.iter().all(|r| r["pass"] == true);
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 3 }));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let first = stdout.lines().nth(1).unwrap();
    if !all_pass {
        assert!(first.starts_with("NO"), "failing rows come first: {first}");
    }
}
