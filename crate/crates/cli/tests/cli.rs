use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tqa"))
        .current_dir(dir)
        .env_remove("TQA_SEED")
        .env_remove("TQA_OUT")
        .args(args)
        .output()
        .expect("spawn tqa")
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const TOY: &str = r#"{"n_languages": 1, "n_translators": 2, "n_reviewers": 2, "n_jobs": 10}"#;

fn toy_world(dir: &Path) {
    write(dir, "toy.json", TOY);
    let o = tqa(dir, &["--seed", "3", "--out", "world", "--config", "toy.json", "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn quick_fit(dir: &Path, model: &str) -> Output {
    tqa(
        dir,
        &[
            "--seed", "5", "--out", "fits", "fit", "--data", "world/dataset.csv", "--model", model, "--chains", "2",
            "--warmup", "150", "--samples", "100",
        ],
    )
}

#[test]
fn minimal_world_has_ten_rows() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    let mut rdr = csv::Reader::from_path(tmp.path().join("world/dataset.csv")).unwrap();
    assert_eq!(rdr.records().count(), 10);
    for f in ["truth.csv", "labels.csv", "config.json", "manifest.json", "dataset_quantized.csv"] {
        assert!(tmp.path().join("world").join(f).exists(), "{f}");
    }
}

#[test]
fn same_seed_gives_identical_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "toy.json", TOY);
    for out in ["a", "b"] {
        assert!(tqa(tmp.path(), &["--seed", "11", "--out", out, "--config", "toy.json", "simulate"]).status.success());
    }
    for f in ["dataset.csv", "truth.csv", "labels.csv", "config.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn bad_fractions_exit_two_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "bad.json",
        r#"{"n_jobs": 10, "skill": {"fractions": {"L1": 0.5, "L2": 0.5, "unknown": 0.5}}}"#,
    );
    let o = tqa(tmp.path(), &["--config", "bad.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("skill.fractions"));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.json", r#"{"n_jobz": 10}"#);
    assert_eq!(tqa(tmp.path(), &["--config", "bad.json", "simulate"]).status.code(), Some(2));
}

#[test]
fn missing_dataset_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tqa(tmp.path(), &["fit", "--data", "nope.csv", "--model", "hurdle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hurdle_toy_fit_lists_every_factor() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    let o = quick_fit(tmp.path(), "hurdle");
    assert!(matches!(o.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&tmp.path().join("fits/hurdle/lang00/summary.json"));
    let names: Vec<&str> = s["params"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(&names[..3], ["pi_l", "mu_l", "sigma_l"]);
    let translators = names.iter().filter(|n| n.starts_with("pi_t[")).count();
    let reviewers = names.iter().filter(|n| n.starts_with("pi_r[")).count();
    assert!(translators >= 1 && reviewers >= 1);
    assert_eq!(names.len(), 3 * (1 + translators + reviewers));
    assert!(tmp.path().join("fits/hurdle/lang00/draws.csv").exists());
    assert!(tmp.path().join("fits/hurdle/manifest.json").exists());
}

#[test]
fn gaussian_toy_fit_lists_q_per_job() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    let o = quick_fit(tmp.path(), "gaussian");
    assert!(matches!(o.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&tmp.path().join("fits/gaussian/lang00/summary.json"));
    let names: Vec<&str> = s["params"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("q[")).count(), 10);
    let betas = names.iter().filter(|n| n.starts_with("beta[")).count();
    assert_eq!(betas, names.iter().filter(|n| n.starts_with("sigma[")).count());
    assert_eq!(names.len(), 10 + 2 * betas);
}

#[test]
fn absent_language_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    let o = tqa(tmp.path(), &["fit", "--data", "world/dataset.csv", "--model", "hurdle", "--language", "xx-yy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xx-yy"));
}

#[test]
fn failed_gate_exits_three_with_table() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    write(tmp.path(), "strict.json", r#"{"gate": {"max_r_hat": 1.0, "min_ess": 1e9}}"#);
    let o = tqa(
        tmp.path(),
        &[
            "--config", "strict.json", "--out", "fits", "fit", "--data", "world/dataset.csv", "--model", "hurdle",
            "--chains", "2", "--warmup", "50", "--samples", "50",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("r_hat") && err.contains("ess"));
    assert!(tmp.path().join("fits/hurdle/lang00/summary.json").exists());
}

#[test]
fn single_replication_mae_is_one_difference() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    quick_fit(tmp.path(), "hurdle");
    let o = tqa(tmp.path(), &["--out", "ppc", "ppc", "--fit", "fits", "--data", "world/dataset.csv", "--reps", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("ppc/ppc_report.json"));
    let e = &r["entries"][0];
    let obs = e["observed_zero_fraction"].as_f64().unwrap();
    let rep = e["hurdle"]["zero_fraction"].as_f64().unwrap();
    assert_eq!(e["hurdle"]["n_reps"], 1);
    assert!((e["hurdle"]["mae_zero_ratio"].as_f64().unwrap() - (rep - obs).abs()).abs() < 1e-12);
    // no Gaussian fit: explicit nulls
    assert!(e["gaussian"].is_null() && e["kl_ratio"].is_null());
    assert!(tmp.path().join("ppc/histograms/lang00.svg").exists());
}

#[test]
fn all_l1_labels_give_one_group() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    quick_fit(tmp.path(), "hurdle");
    let mut ids = Vec::new();
    for row in csv::Reader::from_path(tmp.path().join("world/dataset.csv")).unwrap().records() {
        let row = row.unwrap();
        ids.push(row[2].to_owned());
        ids.push(row[3].to_owned());
    }
    ids.sort();
    ids.dedup();
    let body: String = std::iter::once("linguist_id,level\n".to_owned())
        .chain(ids.iter().map(|i| format!("{i},L1\n")))
        .collect();
    write(tmp.path(), "all_l1.csv", &body);
    let o = tqa(tmp.path(), &["--out", "rep", "report", "--fit", "fits", "--labels", "all_l1.csv", "--n-boot", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let groups = json(&tmp.path().join("rep/groups.json"));
    let names: Vec<&str> = groups["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["group"].as_str().unwrap())
        .collect();
    // one level group, and its aggregated twin
    assert!(names.iter().all(|g| *g == "L1" || *g == "skilled"), "{names:?}");
    assert!(names.contains(&"L1"));
}

#[test]
fn empty_labels_put_everyone_in_unknown() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    quick_fit(tmp.path(), "hurdle");
    write(tmp.path(), "empty.csv", "linguist_id,level\n");
    let o = tqa(tmp.path(), &["--out", "rep", "report", "--fit", "fits", "--labels", "empty.csv", "--n-boot", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join("rep/linguists.csv")).unwrap();
    let level = rdr.headers().unwrap().iter().position(|h| h == "level").unwrap();
    assert!(rdr.records().all(|r| &r.unwrap()[level] == "unknown"));
}

#[test]
fn unknown_label_ids_warn_and_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    quick_fit(tmp.path(), "hurdle");
    write(tmp.path(), "labels.csv", "linguist_id,level\nghost,L1\n");
    let o = tqa(tmp.path(), &["--out", "rep", "report", "--fit", "fits", "--labels", "labels.csv", "--n-boot", "200"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("ghost"));
}

#[test]
fn inputs_are_not_modified() {
    let tmp = tempfile::tempdir().unwrap();
    toy_world(tmp.path());
    let before = fs::read(tmp.path().join("world/dataset.csv")).unwrap();
    quick_fit(tmp.path(), "hurdle");
    tqa(tmp.path(), &["--out", "ppc", "ppc", "--fit", "fits", "--data", "world/dataset.csv", "--reps", "5"]);
    assert_eq!(before, fs::read(tmp.path().join("world/dataset.csv")).unwrap());
}
