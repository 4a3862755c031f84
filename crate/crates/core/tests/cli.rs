use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn siseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siseg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_and_infer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let weights_dir = d.join("weights");
    let o = siseg(&["gen-network", "--arch", "cnn4", "--n", "64", "--seed", "32", "--out", s(&weights_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = stdout(&o).trim().to_string();
    assert!(Path::new(&manifest).exists());

    let image = d.join("img.bin");
    let o = siseg(&["gen-image", "--n", "64", "--seed", "3", "--delta-mu", "3", "--out", s(&image)]);
    assert!(o.status.success());

    let dump = d.join("path.jsonl");
    let o = siseg(&[
        "infer", "--weights", &manifest, "--image", s(&image), "--sigma", "1", "--oc", "--permutations", "200",
        "--dump-path", s(&dump),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "tested");
    for key in ["p_naive", "p_selective", "p_oc", "p_permutation"] {
        let p = v[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p), "{key} = {p}");
    }
    let regions = fs::read_to_string(&dump).unwrap().lines().count() as u64;
    assert_eq!(regions, v["region_count"].as_u64().unwrap());

    let reference = d.join("ref.bin");
    assert!(siseg(&["gen-image", "--n", "64", "--seed", "4", "--out", s(&reference)]).status.success());
    let o = siseg(&["infer", "--weights", &manifest, "--image", s(&image), "--estimate-from", s(&reference)]);
    assert!(o.status.success());
}

#[test]
fn experiment_and_oracle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("exp.toml");
    fs::write(&cfg, "n = 16\ntrials = 5\noracle_networks = 2\noracle_images = 2\n").unwrap();

    let out = d.join("fpr");
    let o = siseg(&["experiment", "fpr", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.json").exists() && out.join("trials.jsonl").exists());

    let o = siseg(&["oracle-check", "--config", s(&cfg), "--out", s(&d.join("oracle"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4 cases") && stdout(&o).trim_end().ends_with("PASS"));
    assert!(d.join("oracle/oracle.json").exists());
}

#[test]
fn errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = siseg(&["infer", "--weights", s(&missing), "--image", s(&missing), "--sigma", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = siseg(&["gen-image", "--n", "15", "--out", s(&dir.path().join("x.bin"))]);
    assert_eq!(o.status.code(), Some(2));
}
