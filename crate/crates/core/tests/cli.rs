use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_promptraj"));
    c.env_remove("PROMPTRAJ_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: [&str; 10] = [
    "--width", "8", "--cmt-layers", "1", "--cmt-heads", "2", "--st-layers", "1", "--st-heads", "2",
];

fn gen(dir: &Path, seed: &str) {
    ok(&[
        "gen-data", "--out", p(dir), "--seed", seed, "--train", "12", "--val", "4", "--test", "6",
        "--keypoints", "5", "--agents-max", "2",
    ]);
}

#[test]
fn gen_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "7");
    gen(&b, "7");
    for f in ["train.jsonl", "val.jsonl", "test.jsonl", "spec.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let spec = std::fs::read_to_string(a.join("spec.toml")).unwrap();
    assert!(spec.contains("seed = 7"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = run(&["eval", "--model", p(&missing), "--data", p(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));

    assert_eq!(run(&["eval", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let infeasible = run(&["gen-data", "--out", p(&tmp.path().join("x")), "--agents-min", "4", "--agents-max", "2"]);
    assert_eq!(infeasible.status.code(), Some(1));

    // a diverging run is a runtime failure
    let data = tmp.path().join("data");
    gen(&data, "1");
    let m = tmp.path().join("m");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&m), "--lr", "1e300", "--epochs", "3"];
    args.extend_from_slice(&TINY);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn config_file_from_env_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "train = 3\nval = 1\ntest = 2\nseed = 4\nkeypoints = 9\n").unwrap();
    let out_dir = tmp.path().join("d");
    let out = bin()
        .env("PROMPTRAJ_CONFIG", &cfg)
        .args(["gen-data", "--out", p(&out_dir), "--test", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spec = std::fs::read_to_string(out_dir.join("spec.toml")).unwrap();
    assert!(spec.contains("train = 3") && spec.contains("test = 5") && spec.contains("keypoints = 9"));
    let lines = |f: &str| std::fs::read_to_string(out_dir.join(f)).unwrap().lines().count();
    assert_eq!((lines("train.jsonl"), lines("val.jsonl"), lines("test.jsonl")), (3, 1, 5));

    std::fs::write(&cfg, "trian = 3\n").unwrap();
    let bad = bin().env("PROMPTRAJ_CONFIG", &cfg).args(["gen-data", "--out", p(&out_dir)]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    gen(&data, "3");

    let mut args = vec!["train", "--data", p(&data), "--out", p(&model), "--epochs", "2", "--batch-size", "4", "--lr", "1e-3"];
    args.extend_from_slice(&TINY);
    ok(&args);
    for f in ["model.ckpt", "model.toml", "train.toml", "runlog.csv"] {
        assert!(model.join(f).exists(), "{f}");
    }
    let runlog = std::fs::read_to_string(model.join("runlog.csv")).unwrap();
    assert_eq!(runlog.lines().count(), 3);

    let t = ok(&["eval", "--model", p(&model), "--data", p(&data), "--cues", "T"]);
    assert!(t.contains("cues T"));
    let rep = tmp.path().join("rep");
    let masked = ok(&[
        "eval", "--model", p(&model), "--data", p(&data), "--cues", "T,P3d", "--keep-fraction", "T=0.5,P3d=0.5",
        "--noise-std", "0.05", "--occlusion", "random-limb", "--out", p(&rep),
    ]);
    assert!(masked.contains("vs reference"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["cues"], serde_json::json!(["T", "P3d"]));
    assert!(json["degradation_pct"]["ade"].is_number());
    assert_eq!(std::fs::read_to_string(rep.join("report.csv")).unwrap().lines().count(), 6 + 2);

    let pred = tmp.path().join("pred");
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&pred), "--limit", "3"]);
    assert_eq!(std::fs::read_to_string(pred.join("predictions.jsonl")).unwrap().lines().count(), 3);
    assert!(pred.join("svg/test-00000.svg").exists());

    let att = tmp.path().join("att");
    let text = ok(&["attention", "--model", p(&model), "--data", p(&data), "--out", p(&att)]);
    assert!(text.contains("temporal attention"));
    let csv = std::fs::read_to_string(att.join("temporal.csv")).unwrap();
    assert!(csv.starts_with("row,t0,t1,"));
    assert!(csv.lines().last().unwrap().starts_with("mean,"));
    assert!(att.join("spatial.svg").exists());

    let abl = tmp.path().join("abl");
    let mut args = vec!["ablate", "--data", p(&data), "--out", p(&abl), "--steps", "3", "--batch-size", "4"];
    args.extend_from_slice(&TINY);
    let table = ok(&args);
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["CMT-ST", "MLP-ST", "ST-CMT", "CMT"]);
    assert!(abl.join("ablation.csv").exists());

    let bad = run(&["eval", "--model", p(&model), "--data", p(&data), "--cues", "P3d"]);
    assert_eq!(bad.status.code(), Some(1));
}
