use std::path::Path;
use std::process::{Command, Output};

fn modclass(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modclass"))
        .args(args)
        .current_dir(cwd)
        .env("MODCLASS_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_then_spectrogram() {
    let dir = tempfile::tempdir().unwrap();
    let o = modclass(&["synth", "--scheme", "2fsk", "--snr", "-4", "--seed", "7", "--out", "sig.f32"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::metadata(dir.path().join("sig.f32")).unwrap().len(), 2240 * 4);
    let meta = std::fs::read_to_string(dir.path().join("sig.f32.json")).unwrap();
    assert!(meta.contains("\"2FSK\"") && meta.contains("16000"));

    let o = modclass(&["spectrogram", "--in", "sig.f32", "--out", "img.png", "--raw", "img.tfa"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = modclass::tfa::read_tfa(dir.path().join("img.tfa")).unwrap();
    assert_eq!(img.shape(), (64, 64, 3));
    assert!(dir.path().join("img.png").exists());

    // same seed, same bytes
    modclass(&["synth", "--scheme", "2fsk", "--snr", "-4", "--seed", "7", "--out", "again.f32"], dir.path());
    assert_eq!(
        std::fs::read(dir.path().join("sig.f32")).unwrap(),
        std::fs::read(dir.path().join("again.f32")).unwrap()
    );
}

#[test]
fn dataset_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "modulation_set": ["2ask", "2fsk"],
        "snr_list_db": [0, 10],
        "signals_per_class_per_snr": 3,
        "scenario": {"mimo": {"nt": 1, "nr": 2}},
        "image": {"target": 32},
        "train": {"epochs": 1, "batch_size": 4},
        "master_seed": 3
    }"#;
    std::fs::write(dir.path().join("exp.json"), cfg).unwrap();
    for split in ["train", "test"] {
        let o = modclass(&["dataset", "--config", "exp.json", "--split", split, "--out-dir", split], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = modclass(&["train", "--config", "exp.json", "--data", "train", "--model", "m.cnn1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("m.history.csv").exists());
    let o = modclass(
        &["eval", "--config", "exp.json", "--data", "test", "--model", "m.cnn1", "--report", "out"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("overall accuracy"));
    let rows = modclass::harness::read_accuracy_csv(dir.path().join("out/mimo1x2_custom2_accuracy.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].samples, 6);
}

#[test]
fn fuse_demo() {
    let dir = tempfile::tempdir().unwrap();
    let o = modclass(
        &["fuse-demo", "--labels", "2PSK,2PSK,4PSK,8PSK", "--rule", "majority", "--seed", "1"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("decision: 2PSK"));
    let o = modclass(&["fuse-demo", "--labels", "2PSK,4PSK,4PSK,8PSK", "--rule", "3-out-of"], dir.path());
    assert!(stdout(&o).contains("undecided"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(modclass(&["bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(modclass(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(
        modclass(&["synth", "--scheme", "3psk", "--out", "x"], dir.path()).status.code(),
        Some(1)
    );
    std::fs::write(dir.path().join("bad.json"), r#"{"snr_list": [1]}"#).unwrap();
    let o = modclass(&["dataset", "--config", "bad.json", "--split", "train", "--out-dir", "d"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snr_list"));

    std::fs::write(dir.path().join("ok.json"), "{}").unwrap();
    let o = modclass(&["train", "--config", "ok.json", "--data", "nowhere", "--model", "m"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));

    std::fs::write(dir.path().join("nan.f32"), f32::NAN.to_le_bytes().repeat(2240)).unwrap();
    let o = modclass(&["spectrogram", "--in", "nan.f32", "--raw", "x.tfa"], dir.path());
    assert_eq!(o.status.code(), Some(3));

    let o = Command::new(env!("CARGO_BIN_EXE_modclass"))
        .args(["fuse-demo", "--labels", "2ask"])
        .env("MODCLASS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
