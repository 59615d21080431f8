use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use manipcost::commands::entries;
use manipcost::csvio::Table;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manipcost"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn table(path: &Path) -> Table {
    Table::read(path).unwrap()
}

#[test]
fn evaluate_mean_of_symmetric_triangle_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["evaluate", scenario("mean_k0_triangular.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let t = table(&dir.path().join("evaluate.csv"));
    assert_eq!(t.header, ["benchmark", "value"]);
    assert_eq!(t.rows, vec![vec!["mean".to_string(), "0".to_string()]]);
}

#[test]
fn verify_p4_reports_the_optimal_trimming() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--prop", "P4", scenario("trimmed_k8.toml").to_str().unwrap()], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("tau* = 0.16666666666666666"), "{text}");
    assert!(text.contains("closed form 6.000000 vs oracle 6.000000"), "{text}");
    let t = table(&dir.path().join("verify.csv"));
    assert_eq!(t.header, manipcost::csvio::VERIFY_HEADER);
    assert_eq!(t.rows[0][0], "P4");
    assert_eq!(t.rows[0][6], "pass");
}

#[test]
fn sweep_cost_column_strictly_decreases_when_the_mean_dominates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep-tau", scenario("trimmed_k2.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let t = table(&dir.path().join("sweep_tau.csv"));
    assert_eq!(t.header, ["tau", "delta", "Delta_mass", "cost"]);
    let costs: Vec<f64> = t.rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(costs.len(), 5);
    assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
}

#[test]
fn attack_csv_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["attack", scenario("trimmed_k8.toml").to_str().unwrap()], d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("attack.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let t = table(&a.path().join("attack.csv"));
    assert_eq!(t.header, manipcost::csvio::ATTACK_HEADER);
}

#[test]
fn verify_csv_does_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sc = scenario("median_k1_triangular.toml");
    let o1 = run(&["verify", sc.to_str().unwrap(), "--threads", "1"], a.path());
    let o4 = run(&["verify", sc.to_str().unwrap(), "--threads", "4"], b.path());
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o4.status.code(), Some(0));
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("verify.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn every_table_reads_back_through_compare() {
    let dir = tempfile::tempdir().unwrap();
    let w = scenario("weighted_two_costs.toml");
    let k8 = scenario("trimmed_k8.toml");
    for args in [
        vec!["evaluate", k8.to_str().unwrap()],
        vec!["attack", k8.to_str().unwrap()],
        vec!["sweep-tau", k8.to_str().unwrap()],
        vec!["compare", k8.to_str().unwrap()],
        vec!["attack", w.to_str().unwrap()],
        vec!["verify", "--prop", "P6_weighted", w.to_str().unwrap()],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stdout(&o));
    }
    let mut seen = 0;
    for f in std::fs::read_dir(dir.path()).unwrap() {
        let path = f.unwrap().path();
        if path.file_name().unwrap() == "compare.csv" {
            continue;
        }
        let t = table(&path);
        entries(&t).unwrap();
        let back = tempfile::tempdir().unwrap();
        let o = run(&["compare", "--from", path.to_str().unwrap()], back.path());
        assert_eq!(o.status.code(), Some(0), "{}", path.display());
        seen += 1;
    }
    // evaluate, attack, sweep, verify and two hetero tables
    assert_eq!(seen, 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "targets = [1.0]\nbenchmarks = ['nope']\n").unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code();
    assert_eq!(code(&["attack", bad.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["attack", "/nonexistent/scenario.toml"]), Some(2));
    assert_eq!(code(&["frobnicate", bad.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["attack", scenario("split_uniform.toml").to_str().unwrap()]), Some(3));
    assert_eq!(code(&["verify", "--prop", "P4", scenario("trimmed_k2.toml").to_str().unwrap()]), Some(3));
    assert_eq!(code(&["verify", scenario("medians_unequal_gas.toml").to_str().unwrap()]), Some(4));
}

#[test]
fn distinct_messages_for_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "targets = [1.0]\nbenchmarks = ['nope']\n").unwrap();
    let err = |args: &[&str]| String::from_utf8_lossy(&run(args, dir.path()).stderr).into_owned();
    let schema = err(&["attack", bad.to_str().unwrap()]);
    let missing = err(&["attack", "/nonexistent/scenario.toml"]);
    let unknown = err(&["frobnicate"]);
    assert!(schema.contains("schema"), "{schema}");
    assert!(missing.contains("cannot read"), "{missing}");
    assert!(unknown.contains("unrecognized subcommand"), "{unknown}");
}
