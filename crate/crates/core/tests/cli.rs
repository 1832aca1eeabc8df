use std::path::Path;
use std::process::{Command, Output};

use fwsvd::io::{load_fisher, load_model};

fn fwsvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwsvd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = fwsvd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let demo = root.join("nested/demo");
    ok(&["train-demo", "--seed", "3", "--out", s(&demo)]);
    let model = demo.join("model.fwsv");
    let data = demo.join("data.fwsv");
    assert!(model.with_extension("manifest").exists());

    let fisher = root.join("fisher.fwsv");
    ok(&["fisher", "--model", s(&model), "--data", s(&data), "--out", s(&fisher)]);
    let m = load_model(&model).unwrap();
    let f = load_fisher(&fisher).unwrap();
    assert_eq!(f.weights.keys().cloned().collect::<Vec<_>>(), m.layer_names());

    let full = root.join("full");
    ok(&["compress", "--model", s(&model), "--fisher", s(&fisher), "--ratio", "1.0", "--out", s(&full)]);
    let c = load_model(&full.join("model.fwsv")).unwrap();
    for (a, b) in m.stages().iter().zip(c.stages()) {
        assert!(a.layer.effective_weight().sub(&b.layer.effective_weight()).max_abs() <= 1e-8);
    }
    let csv = std::fs::read_to_string(full.join("compression.csv")).unwrap();
    assert!(csv.starts_with("# method=fwsvd ratio=1"));

    let group = root.join("g/group.csv");
    ok(&[
        "group-truncation", "--model", s(&model), "--fisher", s(&fisher), "--data", s(&data), "--out", s(&group),
    ]);
    let rows = std::fs::read_to_string(&group).unwrap();
    let body: Vec<&str> = rows.lines().skip(2).collect();
    assert_eq!(body.iter().filter(|l| l.starts_with("svd,")).count(), 10);
    assert_eq!(body.iter().filter(|l| l.starts_with("fwsvd,")).count(), 10);

    let sweep = root.join("sweep.csv");
    ok(&[
        "rank-sweep", "--model", s(&model), "--fisher", s(&fisher), "--data", s(&data), "--ratios", "0.5,1.0", "--out",
        s(&sweep),
    ]);
    assert_eq!(std::fs::read_to_string(&sweep).unwrap().lines().count(), 2 + 4);

    let code = |args: &[&str]| fwsvd(args).status.code();
    assert_eq!(code(&["compress", "--model", s(&model), "--ratio", "0.5", "--out", s(root)]), Some(2));
    assert_eq!(
        code(&["compress", "--model", s(&model), "--method", "nope", "--ratio", "0.5", "--out", s(root)]),
        Some(2)
    );
    assert_eq!(
        code(&["compress", "--model", s(&model), "--method", "svd", "--ratio", "0.5", "--finetune-epochs", "1", "--out", s(root)]),
        Some(2)
    );
    assert_eq!(code(&["bogus"]), Some(2));
    assert_eq!(
        code(&["compress", "--model", s(&model), "--method", "svd", "--ratio", "1.5", "--out", s(root)]),
        Some(3)
    );
    assert_eq!(
        code(&["fisher", "--model", s(&root.join("missing.fwsv")), "--data", s(&data), "--out", s(&fisher)]),
        Some(5)
    );
    std::fs::write(root.join("junk.fwsv"), b"nope").unwrap();
    std::fs::copy(model.with_extension("manifest"), root.join("junk.manifest")).unwrap();
    let junk = fwsvd(&["fisher", "--model", s(&root.join("junk.fwsv")), "--data", s(&data), "--out", s(&fisher)]);
    assert_ne!(junk.status.code(), Some(0));
    assert!(!String::from_utf8_lossy(&junk.stderr).is_empty());
}
