use std::path::Path;
use std::process::{Command, Output};

fn duet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duet"))
        .args(args)
        .env_remove("DUET_SEED")
        .output()
        .expect("binary runs")
}

fn assert_status(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = duet(&["--help"]);
    assert_status(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["extract-features", "synth-data", "train", "generate", "evaluate"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert_status(&duet(&["train", "--help"]), 0);
}

#[test]
fn bad_invocations_exit_one() {
    assert_status(&duet(&["frobnicate"]), 1);
    assert_status(&duet(&[]), 1);
    assert_status(&duet(&["train", "--task", "dancer", "--data", ".", "--out", "x"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert_status(&duet(&["synth-data", "--set", "no_such_key=1", "--out", p(&out)]), 1);
    assert_status(
        &duet(&["synth-data", "--set", "num_conversations=0", "--out", p(&out)]),
        1,
    );
    assert_status(
        &duet(&["evaluate", "--manifests", ".", "--method", "oracle", "--out", p(&out)]),
        1,
    );
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.vcaf");
    let missing = dir.path().join("missing.wav");
    let run = duet(&["extract-features", "--audio", p(&missing), "--out", p(&out)]);
    assert_status(&run, 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("audio:"));
}

#[test]
fn extracts_features_from_a_fixture() {
    let wav = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/dsp/sine_440.wav");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sine.vcaf");
    assert_status(
        &duet(&["extract-features", "--audio", p(&wav), "--fps", "30", "--out", p(&out)]),
        0,
    );
    let features = duet_core::FeatureSequence::load(&out).unwrap();
    assert!(!features.is_empty());
}

#[test]
fn synth_train_generate_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let synth = duet(&[
        "synth-data",
        "--set",
        "num_conversations=4",
        "--set",
        "val_conversations=1",
        "--set",
        "test_conversations=1",
        "--set",
        "turns_per_conversation=2",
        "--set",
        "min_frames=12",
        "--set",
        "max_frames=20",
        "--seed",
        "7",
        "--out",
        p(&corpus),
    ]);
    assert_status(&synth, 0);
    assert!(String::from_utf8_lossy(&synth.stderr).contains("resolved config"));

    let config = dir.path().join("train.json");
    std::fs::write(
        &config,
        r#"{"model": {"hidden": 8, "fused": 8, "audio_proj": 4, "motion_proj": 4}, "train": {"epochs": 2}}"#,
    )
    .unwrap();
    let runs = dir.path().join("runs");
    for task in ["listener", "talker"] {
        let out = runs.join(task);
        let run = duet(&[
            "train",
            "--task",
            task,
            "--config",
            p(&config),
            "--data",
            p(&corpus),
            "--out",
            p(&out),
        ]);
        assert_status(&run, 0);
        for file in ["checkpoint.vckp", "last.vckp", "metrics.jsonl", "config.json"] {
            assert!(out.join(file).is_file(), "{task}: {file}");
        }
        let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
        let records: Vec<serde_json::Value> = metrics.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.iter().filter(|r| r["split"] == "train").count(), 2);
        assert_eq!(records.iter().filter(|r| r["split"] == "val").count(), 2);
    }
    let agent = runs.join("agent");
    let run = duet(&[
        "train",
        "--task",
        "agent",
        "--set",
        "train.epochs=1",
        "--listener",
        p(&runs.join("listener/checkpoint.vckp")),
        "--talker",
        p(&runs.join("talker/checkpoint.vckp")),
        "--data",
        p(&corpus),
        "--out",
        p(&agent),
    ]);
    assert_status(&run, 0);

    let manifest = corpus.join("test/conv_0003/manifest.json");
    let generated = dir.path().join("generated");
    let run = duet(&[
        "generate",
        "--manifest",
        p(&manifest),
        "--agent",
        "Q",
        "--policy",
        "reset",
        "--checkpoint",
        p(&agent.join("checkpoint.vckp")),
        "--out-dir",
        p(&generated),
    ]);
    assert_status(&run, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(generated.join("report.json")).unwrap()).unwrap();
    let turns = report["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2);
    assert_ne!(turns[0]["role"], turns[1]["role"]);
    for t in turns {
        let file = generated.join(t["file"].as_str().unwrap());
        let seq = duet_core::coeffs::load_sequence(&file, 30.0).unwrap();
        assert_eq!(seq.len() as u64, t["frames"].as_u64().unwrap());
    }

    let test_dir = corpus.join("test");
    for method in [
        "mirror".to_string(),
        "random".to_string(),
        format!("ckpt:{}", p(&runs.join("listener/checkpoint.vckp"))),
    ] {
        let out = dir.path().join("report.json");
        let run = duet(&[
            "evaluate",
            "--manifests",
            p(&test_dir),
            "--method",
            &method,
            "--out",
            p(&out),
        ]);
        assert_status(&run, 0);
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let clips = report["clip_count"].as_u64().unwrap();
        assert_eq!(clips, 2, "{method}");
        assert_eq!(report["clips"].as_array().unwrap().len() as u64, clips);
        assert_eq!(report["target"], "listener");
        assert_eq!(report["dataset"], "test");
        for key in ["exp_fd", "angle_fd", "trans_fd"] {
            let v = report["mean"][key].as_f64().unwrap();
            assert!(v.is_finite() && v >= 0.0, "{method} {key}: {v}");
        }
    }
}

#[test]
fn seed_environment_variable_sets_default_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_duet"))
            .args([
                "synth-data",
                "--set",
                "num_conversations=1",
                "--set",
                "val_conversations=0",
                "--set",
                "test_conversations=0",
                "--out",
                p(&out),
            ])
            .env("DUET_SEED", seed)
            .output()
            .unwrap();
        assert_status(&status, 0);
        std::fs::read(out.join("train/conv_0000/turn_01_p.vcof")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
}
