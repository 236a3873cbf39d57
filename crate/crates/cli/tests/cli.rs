use std::path::Path;
use std::process::Command;

fn moseac(out: &Path, args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_moseac"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .env_remove("MOSEAC_SEED")
        .output()
        .expect("spawn moseac");
    assert!(o.status.success(), "moseac {args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn train_twice_is_byte_identical_and_evaluates() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        moseac(d.path(), &["--seed", "3", "train", "--preset", "moseac", "--steps", "400"]);
    }
    let run_a = a.path().join("moseac-seed3");
    let run_b = b.path().join("moseac-seed3");
    for f in ["metrics.csv", "eval.csv", "agent.ckpt", "manifest.json"] {
        assert_eq!(std::fs::read(run_a.join(f)).unwrap(), std::fs::read(run_b.join(f)).unwrap(), "{f} differs");
    }

    let out = moseac(a.path(), &["eval", run_a.to_str().unwrap(), "--episodes", "7"]);
    assert!(out.contains("success"));
    let eval = std::fs::read_to_string(a.path().join("eval-moseac-seed3/eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 8);

    let plot = moseac(a.path(), &["plotdata", &format!("m={}", run_a.display()), "--window", "5"]);
    assert!(plot.contains("files"));
    assert!(a.path().join("plotdata/m_return.csv").exists());
}

#[test]
fn dump_config_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let text = moseac(d.path(), &["train", "--preset", "sac60", "--dump-config"]);
    let path = d.path().join("sac60.toml");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(moseac(d.path(), &["train", "--config", path.to_str().unwrap(), "--dump-config"]), text);
}

#[test]
fn theory_with_small_suite() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("theory.toml");
    std::fs::write(&cfg, "mdps = 2\npairs_per_mdp = 20\ninitializations = 2\n").unwrap();
    let out = moseac(d.path(), &["theory", "--config", cfg.to_str().unwrap()]);
    assert!(out.contains("contraction"), "{out}");
    assert!(!out.contains("FAIL"));
    assert!(d.path().join("theory/theory.csv").exists());
}

#[test]
fn unknown_preset_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_moseac"))
        .arg("--output-dir")
        .arg(d.path())
        .args(["train", "--preset", "sac45"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sac45"));
}
