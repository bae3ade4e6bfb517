use std::path::Path;
use std::process::{Command, Output};

fn symforecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symforecast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = symforecast(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// synth → ingest → split on a cohort of `patients`; returns (train, test) paths.
fn prepare(dir: &Path, patients: usize, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data");
    let (n, s) = (patients.to_string(), seed.to_string());
    ok(&["synth", "--out-dir", p(&data), "--patients", &n, "--seed", &s]);
    let transitions = dir.join("transitions.csv");
    ok(&[
        "ingest",
        "--profiles",
        p(&data.join("profiles.csv")),
        "--surveys",
        p(&data.join("surveys.csv")),
        "--out",
        p(&transitions),
    ]);
    let (train, test) = (dir.join("train.csv"), dir.join("test.csv"));
    ok(&[
        "split",
        "--in",
        p(&transitions),
        "--date",
        "2017-10-04",
        "--out-train",
        p(&train),
        "--out-test",
        p(&test),
    ]);
    (train, test)
}

#[test]
fn full_pipeline_writes_per_level_table() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = prepare(dir.path(), 2000, 0);

    let audit: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("data/audit.json")).unwrap()).unwrap();
    let frac = audit["train_fraction"].as_f64().unwrap();
    assert!((frac - 0.75).abs() <= 0.05, "train fraction {frac}");
    let n_train = std::fs::read_to_string(&train).unwrap().lines().count() - 1;
    let n_test = std::fs::read_to_string(&test).unwrap().lines().count() - 1;
    assert!((n_train as f64 / (n_train + n_test) as f64 - frac).abs() < 1e-12);

    let mut models = Vec::new();
    for v in ["lt1", "lt2"] {
        let m = dir.path().join(format!("{v}.json"));
        ok(&[
            "train", "--train", p(&train), "--variant", v, "--depth", "4", "--smote", "--seed", "3", "--rounds", "30",
            "--out", p(&m),
        ]);
        models.push(m);
    }
    let table = dir.path().join("table.csv");
    let report = dir.path().join("report.json");
    ok(&[
        "evaluate",
        "--model",
        p(&models[0]),
        "--model",
        p(&models[1]),
        "--test",
        p(&test),
        "--baselines",
        "np,pv",
        "--out",
        p(&report),
        "--table",
        p(&table),
    ]);
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["class", "NP", "PV", "LT1", "LT2"]);
    assert_eq!(rows.len() - 1, 12);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows[1][0], "MAE_0");
    assert_eq!(rows[12][0], "WMAE");
    // NP predicts level 0, so its error on level c is c
    for c in 0..11 {
        if !rows[c + 1][1].is_empty() {
            assert_eq!(rows[c + 1][1].parse::<f64>().unwrap(), c as f64);
        }
    }

    let shap = dir.path().join("shap.csv");
    ok(&["explain", "--model", p(&models[1]), "--data", p(&test), "--out", p(&shap)]);
    let shap = std::fs::read_to_string(&shap).unwrap();
    let mut lines = shap.lines();
    assert_eq!(lines.next(), Some("feature,class,mean_abs_shap,total_gain"));
    assert_eq!(lines.count(), 7 * 11);
}

#[test]
fn same_seed_gives_byte_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = prepare(dir.path(), 200, 1);
    let mut bytes = Vec::new();
    for i in 0..2 {
        let m = dir.path().join(format!("m{i}.json"));
        ok(&[
            "train", "--train", p(&train), "--variant", "lp2", "--depth", "5", "--smote", "--seed", "17", "--rounds",
            "10", "--out", p(&m),
        ]);
        bytes.push(std::fs::read(&m).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn cv_output_does_not_depend_on_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = prepare(dir.path(), 150, 2);
    let mut outs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("cv{jobs}.json"));
        ok(&[
            "--jobs", jobs, "cv", "--train", p(&train), "--variant", "lp1", "--depths", "1..4", "--folds", "3", "--seed",
            "5", "--rounds", "8", "--out", p(&out),
        ]);
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let cv: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
    assert_eq!(cv["depths"], serde_json::json!([1, 2, 3, 4]));
    assert!(cv["patient_disjoint"].as_bool().unwrap());
    assert!(cv["smote_contained"].as_bool().unwrap());
}

#[test]
fn exit_codes_follow_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("out.csv");

    // usage: unknown subcommand, bad flag value, bad depth list
    assert_eq!(symforecast(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        symforecast(&["split", "--in", "x.csv", "--date", "yesterday", "--out-train", "a", "--out-test", "b"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        symforecast(&["cv", "--train", "x.csv", "--variant", "lp1", "--depths", "0..3", "--out", "o"])
            .status
            .code(),
        Some(2)
    );

    // data: missing file, malformed row
    assert_eq!(
        symforecast(&["split", "--in", p(&missing), "--out-train", p(&out), "--out-test", p(&out)])
            .status
            .code(),
        Some(3)
    );
    let profiles = dir.path().join("profiles.csv");
    let surveys = dir.path().join("surveys.csv");
    std::fs::write(&profiles, "patient_id,sex,age,cancer_type,diagnosis_date\np1,female,50,breast,2014-01-01\n").unwrap();
    std::fs::write(&surveys, "patient_id,survey_date,pain,tiredness\np1,2014-02-01,11,3\n").unwrap();
    let bad = symforecast(&["ingest", "--profiles", p(&profiles), "--surveys", p(&surveys), "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("pain"));

    // usage: invalid hyperparameter reaching the library
    let (train, _) = prepare(dir.path(), 60, 0);
    let m = dir.path().join("m.json");
    assert_eq!(
        symforecast(&["train", "--train", p(&train), "--variant", "lp1", "--depth", "0", "--out", p(&m)])
            .status
            .code(),
        Some(2)
    );
}
