use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn advisor(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_advisor"));
    cmd.args(args).env_remove("ADVISOR_OUT");
    if let Some(p) = out_env {
        cmd.env("ADVISOR_OUT", p);
    }
    cmd.output().expect("failed to spawn advisor")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn unknown_ids_fail_with_the_valid_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = advisor(&["train", "--task", "pd", "--method", "a2c", "--steps", "0", "--out", out], None);
    assert!(!o.status.success());
    let msg = text(&o);
    assert!(msg.contains("a2c") && msg.contains("DAgger→ADV") && msg.contains("BCdemo+PPO"), "{msg}");

    let o = advisor(&["train", "--task", "minigrid", "--method", "adv", "--steps", "0", "--out", out], None);
    assert!(!o.status.success());
    let msg = text(&o);
    assert!(msg.contains("minigrid") && msg.contains("lc-once-switch-s9"), "{msg}");
}

#[test]
fn train_writes_one_record_and_eval_reads_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = advisor(
        &["train", "--task", "pd", "--method", "adv", "--steps", "2000", "--seed", "1", "--out", out, "--validation-episodes", "10", "--quiet"],
        None,
    );
    assert!(o.status.success(), "{}", text(&o));
    let rec = dir.path().join("pd").join("ADV-seed1.jsonl");
    let body = fs::read_to_string(&rec).unwrap();
    assert!(body.lines().next().unwrap().contains("\"schema\":1"));
    assert_eq!(body.lines().filter(|l| l.contains("\"point\"")).count(), 1);

    let ckpt = dir.path().join("pd").join("ADV-seed1.ckpt");
    let o = advisor(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--n", "7"], None);
    assert!(o.status.success(), "{}", text(&o));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["episodes"], 7);
}

#[test]
fn sweep_samples_distinct_hps_and_report_builds_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = advisor(
        &["sweep", "--task", "pd", "--method", "dagger->adv", "--steps", "2000", "--n", "3", "--seed", "10", "--validation-episodes", "5", "--quiet"],
        Some(dir.path()),
    );
    assert!(o.status.success(), "{}", text(&o));
    let task_dir = dir.path().join("pd");
    let mut lrs = Vec::new();
    for seed in 10..13 {
        let body = fs::read_to_string(task_dir.join(format!("DAgger-to-ADV-seed{seed}.jsonl"))).unwrap();
        let header: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
        assert!(header["hps"]["alpha"].is_number() && header["hps"]["stage_split"].is_number());
        lrs.push(header["hps"]["lr"].as_f64().unwrap());
    }
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    assert_eq!(lrs.len(), 3);

    let rep_dir = dir.path().join("reports");
    let o = advisor(&["report", task_dir.to_str().unwrap(), "--out", rep_dir.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(rep_dir.join("pd.report.json")).unwrap()).unwrap();
    let curve = rep["methods"][0]["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(rep["methods"][0]["method"], "DAgger→ADV");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("from-config");
    fs::write(
        &cfg,
        format!(
            "task = \"pd\"\nmethod = \"PPO\"\nsteps = 2000\nseed = 4\nvalidation_episodes = 5\nsave_checkpoint = false\nout = \"{}\"\n[hps]\nlr = 0.002\n",
            out.display()
        ),
    )
    .unwrap();
    let o = advisor(&["train", "--config", cfg.to_str().unwrap(), "--seed", "6", "--quiet"], None);
    assert!(o.status.success(), "{}", text(&o));
    let body = fs::read_to_string(out.join("pd").join("PPO-seed6.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
    assert_eq!(header["hps"]["lr"], 0.002);
    assert!(!out.join("pd").join("PPO-seed6.ckpt").exists());
}

#[test]
fn demos_then_demo_training() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("pd.demo");
    let o = advisor(&["demos", "--task", "pd", "--n", "20", "--seed", "2", "--out", demo.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("20 episodes"));
    let out = dir.path().to_str().unwrap();
    let o = advisor(
        &["train", "--task", "pd", "--method", "bcdemo", "--steps", "2000", "--seed", "2", "--demos", demo.to_str().unwrap(), "--out", out, "--validation-episodes", "5", "--quiet"],
        None,
    );
    assert!(o.status.success(), "{}", text(&o));
    let o = advisor(
        &["train", "--task", "lh2d-n7", "--method", "bcdemo", "--steps", "2000", "--seed", "2", "--demos", demo.to_str().unwrap(), "--out", out, "--quiet"],
        None,
    );
    assert!(!o.status.success());
    assert!(text(&o).contains("demonstrations are for `pd`"));
}
