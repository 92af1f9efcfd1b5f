use std::path::Path;
use std::process::{Command, Output};

fn poco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poco"))
        .args(args)
        .env("POCO_THREADS", "2")
        .output()
        .expect("spawn poco")
}

fn ok(args: &[&str]) -> Output {
    let out = poco(args);
    assert!(
        out.status.success(),
        "poco {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "latent_size = 8\nneighbors = 8\nheads = 2\nencoder_layers = 1\n\
                     encoder_neighbors = 6\nhidden = 8\nsteps = 20\ntrain_points = 200\n\
                     train_queries = 64\nnoise_sigma = 0.01\n";

/// Trains a small model and samples an input cloud in `dir`.
fn fixtures(dir: &Path) {
    let cfg = dir.join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    ok(&["train", "--shape", "sphere", "--out", s(&dir.join("m.poco")), "--config", s(&cfg)]);
    ok(&[
        "sample", "--shape", "sphere", "--count", "300", "--noise", "0.005", "--seed", "4",
        "--out", s(&dir.join("in.xyz")),
    ]);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = poco(&["reconstruct", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--no-such-flag"));
}

#[test]
fn missing_input_reports_an_error() {
    let out = poco(&["eval", "--pred", "/nonexistent/mesh.obj", "--gt-shape", "sphere"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "heads = 4\nwidth = 3\n").unwrap();
    let out = poco(&["train", "--shape", "box", "--out", s(&dir.path().join("m")), "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:2"));
}

#[test]
fn train_reconstruct_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    let mesh = d.join("out.obj");
    ok(&[
        "reconstruct", "--model", s(&d.join("m.poco")), "--input", s(&d.join("in.xyz")),
        "--out", s(&mesh), "--grid-res", "24",
    ]);
    let text = std::fs::read_to_string(&mesh).unwrap();
    assert!(text.starts_with('#'));
    let out = ok(&[
        "eval", "--pred", s(&mesh), "--gt-shape", "sphere", "--samples", "2000",
        "--fs-threshold", "0.05", "--key-value",
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Chamfer-L1 x100"));
    let fscore: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("fscore="))
        .expect("fscore line")
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&fscore));
    assert!(stdout.contains("fscore_threshold=0.05"));
}

#[test]
fn single_view_tta_matches_plain_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    let run = |name: &str, extra: &[&str]| {
        let out = d.join(name);
        let (model, input) = (d.join("m.poco"), d.join("in.xyz"));
        let mut args = vec![
            "reconstruct", "--model", s(&model), "--input", s(&input),
            "--out", s(&out), "--grid-res", "20", "--dense",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(out).unwrap()
    };
    let plain = run("plain.obj", &[]);
    let tta = run("tta.obj", &["--tta", "1"]);
    assert!(plain == tta);
}

#[test]
fn probe_lists_the_point_itself() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixtures(d);
    let out = ok(&["probe", "--model", s(&d.join("m.poco")), "--input", s(&d.join("in.xyz")), "--index", "7"]);
    let ids: Vec<usize> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(ids.contains(&7));
    assert!(ids.len() <= 6, "one layer reaches only the 6 encoder neighbors");
}
