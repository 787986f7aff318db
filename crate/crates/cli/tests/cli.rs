use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aol_core::imaging::{add_gaussian_noise, psnr, shepp_logan};
use aol_core::{AnalysisOperator, RandomSource, Stream};

fn aol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aol")).args(args).output().expect("binary runs")
}

fn run(cmd: &str, dir: &Path, config: &str) -> Output {
    let path = dir.join(format!("{cmd}.conf"));
    fs::write(&path, config).unwrap();
    aol(&[cmd, path.to_str().unwrap()])
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_random_operator(path: &Path, k: usize, d: usize) {
    let op = AnalysisOperator::random(k, d, &mut RandomSource::seed_from_u64(3)).unwrap();
    op.write_text(fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn version() {
    let out = aol(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("aol "));
}

#[test]
fn minimal_synthetic_config_uses_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train-synthetic", dir.path(), "# all defaults\n");
    assert!(out.status.success(), "{}", stderr(&out));
    let res = dir.path().join("output");
    for seed in 0..5 {
        assert!(res.join(format!("history_seed{seed}.csv")).exists());
        assert!(res.join(format!("operator_seed{seed}.txt")).exists());
        assert!(res.join(format!("target_seed{seed}.txt")).exists());
    }
    let mean = fs::read_to_string(res.join("history_mean.csv")).unwrap();
    assert!(mean.starts_with("iter,objective,recovered,replacements,seconds\n"));
    assert_eq!(mean.lines().count(), 501);
    let manifest = fs::read_to_string(res.join("manifest.txt")).unwrap();
    assert!(manifest.contains("algorithm=FAOL\n"));
    assert!(manifest.contains("rows=32\n") && manifest.contains("dim=16\n") && manifest.contains("cosparsity=12\n"));
}

#[test]
fn saol_defaults_eps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "train-synthetic",
        dir.path(),
        "algorithm=SAOL\nsignals=256\niterations=3\nseeds=1\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("output/manifest.txt")).unwrap();
    assert!(manifest.contains("eps=0.1\n"), "{manifest}");
    assert_eq!(csv_rows(&dir.path().join("output/history_seed1.csv")).len(), 3);
}

#[test]
fn unknown_algorithm_lists_tags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train-synthetic", dir.path(), "algorithm=KSVD\n");
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("algorithm"), "{err}");
    for tag in ["FAOL", "SAOL", "IAOL", "SVAOL"] {
        assert!(err.contains(tag), "{err}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train-synthetic", dir.path(), "iterations=2\nbogus=1\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
    let out = run("train-synthetic", dir.path(), "cosparsity=40\n");
    assert_eq!(out.status.code(), Some(2));
    let out = run("train-synthetic", dir.path(), "rows=many\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rows"));
    let out = aol(&["train-synthetic", dir.path().join("absent.conf").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rerun_from_manifest_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "train-synthetic",
        dir.path(),
        "algorithm=SVAOL\nsignals=300\niterations=5\nseeds=2,3\nreplacement=on\nmax_workers=2\noutput=first\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let first = dir.path().join("first");
    let manifest = fs::read_to_string(first.join("manifest.txt")).unwrap();
    let again = dir.path().join("again");
    let replay = manifest.replace(&format!("output={}", first.display()), &format!("output={}", again.display()));
    let out = run("train-synthetic", dir.path(), &replay);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["history_seed2.csv", "history_seed3.csv", "history_mean.csv", "operator_seed3.txt"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn checkpoints_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "train-synthetic",
        dir.path(),
        "signals=128\niterations=4\nseeds=0\ncheckpoint_every=2\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let cp = dir.path().join("output/checkpoints");
    assert!(cp.join("operator_seed0_iter2.txt").exists());
    assert!(cp.join("operator_seed0_iter4.txt").exists());
    assert!(!cp.join("operator_seed0_iter3.txt").exists());
    assert_eq!(
        fs::read(cp.join("operator_seed0_iter4.txt")).unwrap(),
        fs::read(dir.path().join("output/operator_seed0.txt")).unwrap()
    );
}

#[test]
fn init_from_file() {
    let dir = tempfile::tempdir().unwrap();
    write_random_operator(&dir.path().join("start.txt"), 32, 16);
    let out = run(
        "train-synthetic",
        dir.path(),
        "signals=128\niterations=0\nseeds=0\ninit=file\ninit_file=start.txt\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("start.txt")).unwrap(),
        fs::read(dir.path().join("output/operator_seed0.txt")).unwrap()
    );
    let out = run("train-synthetic", dir.path(), "init=file\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phantom_square_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "train-image",
        dir.path(),
        "image=shepplogan:256\nrows=64\ncosparsity=57\nsignals=2000\niterations=3\nalgorithm=FAOL\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let res = dir.path().join("output");
    assert_eq!(csv_rows(&res.join("history_seed0.csv")).len(), 3);
    assert!(res.join("operator_seed0.txt").exists());
    let montage = fs::read(res.join("montage_seed0.pgm")).unwrap();
    assert!(montage.starts_with(b"P5"));
}

#[test]
fn noisy_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "train-image",
        dir.path(),
        "image=shepplogan:64\nnoise=45\nrows=32\ncosparsity=28\nsignals=500\niterations=2\nalgorithm=IAOL\nmontage=off\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!dir.path().join("output/montage_seed0.pgm").exists());
}

#[test]
fn missing_image_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train-image", dir.path(), "image=nowhere.pgm\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("image"));
}

#[test]
fn denoise_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_random_operator(&dir.path().join("op.txt"), 32, 16);
    let out = run(
        "denoise",
        dir.path(),
        "operator=op.txt\nimage=shepplogan:24\nlambda=0.002,0.01,0.05,0.1,0.3,0.5\nseeds=0,1\nmax_iter=50\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("output/denoise.csv"));
    assert_eq!(rows.len(), 12);
    let lambdas: Vec<&str> = rows[..6].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(lambdas, ["0.002", "0.01", "0.05", "0.1", "0.3", "0.5"]);
    assert!(fs::read(dir.path().join("output/best.pgm")).unwrap().starts_with(b"P5"));
    assert!(fs::read_to_string(dir.path().join("output/denoise.csv")).unwrap().starts_with("ell,lambda,seed,psnr\n"));
}

#[test]
fn denoise_single_entry_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    write_random_operator(&dir.path().join("op.txt"), 32, 16);
    let out = run(
        "denoise",
        dir.path(),
        "operator=op.txt\nell=28\nimage=shepplogan:32\nlambda=0\nnoise=20\nseeds=4\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("output/denoise.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "28");
    assert_eq!(rows[0][2], "4");
    let clean = shepp_logan(32).unwrap();
    let noisy = add_gaussian_noise(&clean, 20.0, &mut RandomSource::substream(4, Stream::Noise)).unwrap();
    let expected = psnr(&clean, &noisy, 255.0).unwrap();
    let got: f64 = rows[0][3].parse().unwrap();
    assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
}

#[test]
fn denoise_operator_per_ell() {
    let dir = tempfile::tempdir().unwrap();
    write_random_operator(&dir.path().join("op_10.txt"), 16, 16);
    write_random_operator(&dir.path().join("op_12.txt"), 16, 16);
    let out = run(
        "denoise",
        dir.path(),
        "operator=op_{ell}.txt\nell=10,12\nimage=shepplogan:16\nlambda=0.1\nmax_iter=20\n",
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&dir.path().join("output/denoise.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["10", "12"]);
    let out = run("denoise", dir.path(), "operator=op_{ell}.txt\n");
    assert_eq!(out.status.code(), Some(2));
    let out = run("denoise", dir.path(), "operator=missing.txt\n");
    assert_eq!(out.status.code(), Some(2));
    let out = run("denoise", dir.path(), "image=shepplogan:16\n");
    assert_eq!(out.status.code(), Some(2));
}
