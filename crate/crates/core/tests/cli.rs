use std::fs;
use std::path::Path;
use std::process::Command;

fn bin(dir: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_photon-distill"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn params_presets() {
    let dir = tempfile::tempdir().unwrap();
    for (preset, f1) in [("paper", 0.819), ("fiber", 0.9594), ("uncoupled", 0.0)] {
        assert_eq!(bin(dir.path(), &["params", "--preset", preset]), 0);
        let v = json(dir.path().join("params.json"));
        let got = v["f1_max"].as_f64().unwrap();
        assert!((got - f1).abs() < 1e-3, "{preset}: {got}");
    }
}

#[test]
fn sweep_is_deterministic_and_listed_in_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(bin(dir.path(), &["sweep", "--grid", "0:2:21", "--corrected"]), 0);
    }
    let sa = fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(sa, fs::read(b.path().join("sweep.csv")).unwrap());
    let text = String::from_utf8(sa).unwrap();
    assert_eq!(text.lines().count(), 22);
    let manifest = json(a.path().join("manifest.json"));
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["outputs"], serde_json::json!(["sweep.csv"]));
}

#[test]
fn seeded_tomography_reproduces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let args = ["tomography", "simulate", "--samples", "3000", "--seed", "5", "--dim", "8"];
        assert_eq!(bin(dir.path(), &args), 0);
    }
    let samples = a.path().join("samples.csv");
    assert_eq!(fs::read(&samples).unwrap(), fs::read(b.path().join("samples.csv")).unwrap());

    let input = samples.to_str().unwrap();
    let code = bin(a.path(), &["tomography", "reconstruct", "--input", input, "--dim", "6", "--max-iter", "3"]);
    assert_eq!(code, 4);
    assert!(a.path().join("reconstruction.json").exists());
    let code = bin(a.path(), &["tomography", "reconstruct", "--input", input, "--dim", "6", "--loss-correct", "0.1"]);
    assert_eq!(code, 0);
    let manifest = json(a.path().join("manifest.json"));
    assert_eq!(
        manifest["outputs"],
        serde_json::json!(["reconstruction.json", "reconstruction_loss_corrected.json"])
    );
}

#[test]
fn budget_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["budget", "--l-fit", "0.352"]), 0);
    let v = json(dir.path().join("budget.json"));
    assert!((v["total"].as_f64().unwrap() - 0.2514).abs() < 1e-3);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "label,loss\n").unwrap();
    assert_eq!(bin(dir.path(), &["budget", "--budget", empty.to_str().unwrap()]), 0);
    assert_eq!(json(dir.path().join("budget.json"))["total"].as_f64(), Some(0.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(bin(p, &["fit", "--observations", "/no/such/file.csv"]), 2);
    assert_eq!(bin(p, &["sweep", "--grid", "1:0:3"]), 2);
    assert_eq!(bin(p, &["frobnicate"]), 2);
    assert_eq!(bin(p, &["wigner", "--alpha-sq", "-1"]), 3);
    assert_eq!(bin(p, &["g2", "--alpha-sq", "0.1", "--efficiency", "1.5"]), 3);
}

#[test]
fn g2_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let code = bin(dir.path(), &["g2", "--alpha-sq", "0.11", "--mc", "--trials", "20000", "--seed", "3"]);
    assert_eq!(code, 0);
    for f in ["g2.csv", "g2_tau.csv", "bandwidth.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(json(dir.path().join("bandwidth.json"))["valid"], true);
}
