//! End-to-end exercises of the `bradyscore` binary: every subcommand,
//! the documented exit codes, and output determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bradyscore"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bradyscore-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    
    cmd.output().expect("binary should run")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// synth -> train-arrest -> extract -> train-classifier -> score ->
/// evaluate -> sigtest, all through the binary.
#[test]
fn full_pipeline_through_the_binary() {
    let dir = workdir("pipeline");
    let data = dir.join("data");

    let out = run(bin()
        .args(["synth", "--counts", "0=9,1=14,2=14,3=11", "--seed", "5"])
        .arg("--out")
        .arg(&data));
    assert_success(&out);
    assert!(data.join("manifest.json").is_file());

    let model = dir.join("arrest.bin");
    let out = run(bin()
        .args(["train-arrest", "--seed", "5"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&model)
        .arg("--loss-out")
        .arg(dir.join("loss.json")));
    assert_success(&out);
    let loss: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("loss.json")).unwrap()).unwrap();
    let history = loss["loss_history"].as_array().unwrap();
    assert!(history.last().unwrap().as_f64().unwrap() < history[0].as_f64().unwrap());

    let features = dir.join("features.csv");
    let out = run(bin()
        .args(["extract", "--debug"])
        .arg("--out")
        .arg(&features)
        .arg("--arrest-model")
        .arg(&model)
        .arg(&data));
    assert_success(&out);
    let text = fs::read_to_string(&features).unwrap();
    assert!(text.starts_with(
        "subject_id,movement,side,mean_amp,rsd_amp,mean_int,rsd_int,fatigue,arrest,score"
    ));
    assert_eq!(text.lines().count(), 49, "header plus one row per recording");
    // --debug produced per-recording dumps
    let debug_dir = dir.join("features_debug");
    assert!(debug_dir.is_dir());
    let dumps = fs::read_dir(&debug_dir).unwrap().count();
    assert_eq!(dumps, 48);
    let one = fs::read_dir(&debug_dir).unwrap().next().unwrap().unwrap();
    let dump = fs::read_to_string(one.path()).unwrap();
    assert!(dump.starts_with("frame,raw,smoothed,is_peak,is_trough"));

    let classifier = dir.join("model.json");
    let out = run(bin()
        .args(["train-classifier", "--folds", "4", "--seed", "5"])
        .arg("--features")
        .arg(&features)
        .arg("--out")
        .arg(&classifier)
        .arg("--report-out")
        .arg(dir.join("cv.json"))
        .arg("--trees-out")
        .arg(dir.join("trees.txt")));
    assert_success(&out);
    let cv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("cv.json")).unwrap()).unwrap();
    assert!(cv["overall"]["exact_accuracy"].as_f64().unwrap() > 0.25);
    assert!(fs::read_to_string(dir.join("trees.txt"))
        .unwrap()
        .contains("round 0 class 0"));

    let sheet = dir.join("sheet.json");
    let out = run(bin()
        .arg("score")
        .arg("--features")
        .arg(&features)
        .arg("--model")
        .arg(&classifier)
        .arg("--out")
        .arg(&sheet));
    assert_success(&out);

    let eval = dir.join("eval.json");
    let out = run(bin()
        .arg("evaluate")
        .arg("--features")
        .arg(&features)
        .arg("--scoresheet")
        .arg(&sheet)
        .arg("--out")
        .arg(&eval));
    assert_success(&out);
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&eval).unwrap()).unwrap();
    assert!(eval["overall"]["exact_accuracy"].as_f64().unwrap() > 0.5);
    assert!(eval["per_movement"].get("finger_tapping").is_some());

    // sigtest on a small set: cells exist (most will be under-sized)
    let sig = dir.join("sig.json");
    let out = run(bin()
        .args(["sigtest", "--bootstrap", "15", "--seed", "5"])
        .arg("--features")
        .arg(&features)
        .arg("--out")
        .arg(&sig));
    assert_success(&out);
    let sig: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sig).unwrap()).unwrap();
    assert!(!sig["cells"].as_array().unwrap().is_empty());

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn scoring_is_byte_deterministic() {
    let dir = workdir("determinism");
    let data = dir.join("data");
    assert_success(&run(bin()
        .args(["synth", "--counts", "0=6,1=6,2=6,3=6", "--seed", "11"])
        .arg("--out")
        .arg(&data)));

    let features = dir.join("features.csv");
    assert_success(&run(bin()
        .arg("extract")
        .arg("--out")
        .arg(&features)
        .arg(&data)));
    let classifier = dir.join("model.json");
    assert_success(&run(bin()
        .args(["train-classifier", "--seed", "11", "--folds", "3"])
        .arg("--features")
        .arg(&features)
        .arg("--out")
        .arg(&classifier)));

    let sheet_a = dir.join("a.json");
    let sheet_b = dir.join("b.json");
    for sheet in [&sheet_a, &sheet_b] {
        assert_success(&run(bin()
            .arg("score")
            .arg("--features")
            .arg(&features)
            .arg("--model")
            .arg(&classifier)
            .arg("--out")
            .arg(sheet)));
    }
    assert_eq!(fs::read(&sheet_a).unwrap(), fs::read(&sheet_b).unwrap());

    // extract with more worker threads produces identical bytes
    let f1 = dir.join("f1.csv");
    let f4 = dir.join("f4.csv");
    assert_success(&run(bin()
        .args(["--threads", "1", "extract"])
        .arg("--out")
        .arg(&f1)
        .arg(&data)));
    assert_success(&run(bin()
        .args(["--threads", "4", "extract"])
        .arg("--out")
        .arg(&f4)
        .arg(&data)));
    assert_eq!(fs::read(&f1).unwrap(), fs::read(&f4).unwrap());

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn extract_partial_failure_keeps_good_rows() {
    let dir = workdir("partial");
    let data = dir.join("data");
    assert_success(&run(bin()
        .args(["synth", "--counts", "1=2", "--seed", "3"])
        .arg("--out")
        .arg(&data)));
    fs::write(data.join("broken.jsonl"), "this is not a recording\n").unwrap();

    let features = dir.join("features.csv");
    let out = run(bin()
        .arg("extract")
        .arg("--out")
        .arg(&features)
        .arg(&data));
    assert_success(&out); // exit 0: at least one input succeeded
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("broken.jsonl"), "stderr: {stderr}");
    let rows = fs::read_to_string(&features).unwrap().lines().count() - 1;
    assert_eq!(rows, 2);

    // all inputs malformed: exit 1
    let bad_dir = dir.join("bad");
    fs::create_dir_all(&bad_dir).unwrap();
    fs::write(bad_dir.join("junk.jsonl"), "nonsense\n").unwrap();
    let out = run(bin()
        .arg("extract")
        .arg("--out")
        .arg(dir.join("none.csv"))
        .arg(&bad_dir));
    assert_eq!(out.status.code(), Some(1));

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn evaluate_length_mismatch_exits_2() {
    let dir = workdir("mismatch");
    let data = dir.join("data");
    assert_success(&run(bin()
        .args(["synth", "--counts", "0=3,1=3,2=3,3=3", "--seed", "9"])
        .arg("--out")
        .arg(&data)));
    let features = dir.join("features.csv");
    assert_success(&run(bin()
        .arg("extract")
        .arg("--out")
        .arg(&features)
        .arg(&data)));
    let classifier = dir.join("model.json");
    assert_success(&run(bin()
        .args(["train-classifier", "--folds", "3", "--seed", "9"])
        .arg("--features")
        .arg(&features)
        .arg("--out")
        .arg(&classifier)));
    let sheet = dir.join("sheet.json");
    assert_success(&run(bin()
        .arg("score")
        .arg("--features")
        .arg(&features)
        .arg("--model")
        .arg(&classifier)
        .arg("--out")
        .arg(&sheet)));

    // drop one feature row and re-evaluate
    let text = fs::read_to_string(&features).unwrap();
    let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    let short = dir.join("short.csv");
    fs::write(&short, truncated.join("\n")).unwrap();
    let out = run(bin()
        .args(["--json", "evaluate"])
        .arg("--features")
        .arg(&short)
        .arg("--scoresheet")
        .arg(&sheet)
        .arg("--out")
        .arg(dir.join("eval.json")));
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr should be machine-readable JSON");
    assert_eq!(err["error"]["kind"], "length_mismatch");

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn dump_config_round_trips_and_bad_config_exits_2() {
    let dir = workdir("config");
    let out = run(bin().arg("--dump-config"));
    assert_success(&out);
    let dumped = dir.join("config.json");
    fs::write(&dumped, &out.stdout).unwrap();

    // re-feeding the dump parses and dumps identically
    let again = run(bin().arg("--config").arg(&dumped).arg("--dump-config"));
    assert_success(&again);
    assert_eq!(out.stdout, again.stdout);

    // unknown keys are a config error (exit 2)
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"not_a_setting": true}"#).unwrap();
    let out = run(bin()
        .arg("--config")
        .arg(&bad)
        .args(["synth", "--out"])
        .arg(dir.join("x")));
    assert_eq!(out.status.code(), Some(2));

    // missing subcommand is a usage error (exit 2)
    let out = run(&mut bin());
    assert_eq!(out.status.code(), Some(2));

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn csv_input_with_sidecar_is_accepted() {
    let dir = workdir("csvload");
    let data = dir.join("data");
    assert_success(&run(bin()
        .args(["synth", "--counts", "2=1", "--seed", "21"])
        .arg("--out")
        .arg(&data)));

    // convert the JSONL recording to the CSV + sidecar layout
    let jsonl: PathBuf = fs::read_dir(&data)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .unwrap();
    let text = fs::read_to_string(&jsonl).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let csv_dir = dir.join("csv");
    fs::create_dir_all(&csv_dir).unwrap();
    let mut csv_text = String::from("frame,t");
    for p in 0..21 {
        csv_text.push_str(&format!(",p{p}_x,p{p}_y,p{p}_z"));
    }
    csv_text.push('\n');
    for (i, line) in lines.enumerate() {
        let frame: serde_json::Value = serde_json::from_str(line).unwrap();
        csv_text.push_str(&format!("{i},{}", frame["t"]));
        for point in frame["landmarks"].as_array().unwrap() {
            for c in 0..3 {
                csv_text.push_str(&format!(",{}", point[c]));
            }
        }
        csv_text.push('\n');
    }
    fs::write(csv_dir.join("rec.csv"), csv_text).unwrap();
    fs::write(
        csv_dir.join("rec.meta.json"),
        serde_json::to_string(&header).unwrap(),
    )
    .unwrap();

    let from_jsonl = dir.join("a.csv");
    let from_csv = dir.join("b.csv");
    assert_success(&run(bin()
        .arg("extract")
        .arg("--out")
        .arg(&from_jsonl)
        .arg(&jsonl)));
    assert_success(&run(bin()
        .arg("extract")
        .arg("--out")
        .arg(&from_csv)
        .arg(csv_dir.join("rec.csv"))));
    assert_eq!(
        fs::read_to_string(&from_jsonl).unwrap(),
        fs::read_to_string(&from_csv).unwrap(),
        "both formats must yield identical feature rows"
    );

    let _ = fs::remove_dir_all(&dir);
}

/// Feature-level power check: rows with a genuine fatigue effect on the
/// score must show a small fatigue p-value in the significance report.
#[test]
fn sigtest_detects_injected_fatigue_effect() {
    let dir = workdir("sigpower");
    // build a feature CSV directly: six cells of 60 rows, the score
    // driven hard by the fatigue column (realistic tiny magnitudes)
    let mut csv = String::from(
        "subject_id,movement,side,mean_amp,rsd_amp,mean_int,rsd_int,fatigue,arrest,score\n",
    );
    let mut state = 99u64;
    let mut next = || {
        // splitmix-style generator, plenty for a fixture
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    };
    for movement in ["finger_tapping", "hand_movement", "rapid_am"] {
        for side in ["left", "right"] {
            for i in 0..60 {
                let fatigue = (next() - 0.5) * 0.004; // +-0.002, pipeline scale
                let arrest = (next() * 4.0) as u8;
                // proportional-odds draw: strong but not separating
                // fatigue effect (about 1.8 per standardized unit)
                let z = fatigue / 0.00115;
                let u = next().clamp(1e-9, 1.0 - 1e-9);
                let latent = 1.8 * z + (u / (1.0 - u)).ln();
                let score = match latent {
                    x if x < -2.0 => 0u8,
                    x if x < 0.0 => 1,
                    x if x < 2.0 => 2,
                    _ => 3,
                };
                csv.push_str(&format!(
                    "{movement}-{side}-{i},{movement},{side},{:.4},{:.4},{:.4},{:.4},{:.6},{arrest},{score}\n",
                    0.6 + 0.4 * next(),
                    0.05 + 0.1 * next(),
                    0.3 + 0.1 * next(),
                    0.05 + 0.1 * next(),
                    fatigue,
                ));
            }
        }
    }
    let features = dir.join("features.csv");
    fs::write(&features, csv).unwrap();

    let sig = dir.join("sig.json");
    let out = run(bin()
        .args(["sigtest", "--bootstrap", "60", "--seed", "4"])
        .arg("--features")
        .arg(&features)
        .arg("--out")
        .arg(&sig));
    assert_success(&out);
    let sig: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sig).unwrap()).unwrap();
    let cells = sig["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    for cell in cells {
        assert!(cell["error"].is_null(), "cell failed: {cell}");
        let p = cell["fatigue_p"].as_f64().unwrap();
        assert!(
            p < 0.05,
            "fatigue p {p} not significant for {} {}",
            cell["movement"],
            cell["side"]
        );
    }

    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn corrupt_model_is_refused() {
    let dir = workdir("badmodel");
    let data = dir.join("data");
    assert_success(&run(bin()
        .args(["synth", "--counts", "1=2,3=2", "--seed", "2"])
        .arg("--out")
        .arg(&data)));
    let model = dir.join("arrest.bin");
    assert_success(&run(bin()
        .args(["train-arrest", "--seed", "2"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&model)));

    // flip one byte in the middle
    let mut bytes = fs::read(&model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    fs::write(&model, bytes).unwrap();

    let out = run(bin()
        .arg("extract")
        .arg("--out")
        .arg(dir.join("f.csv"))
        .arg("--arrest-model")
        .arg(&model)
        .arg(&data));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("checksum"), "stderr: {stderr}");

    let _ = fs::remove_dir_all(&dir);
}
