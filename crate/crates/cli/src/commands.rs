//! The subcommands.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aol_core::harness::{mean_curve_csv, train_with_observer, DataSource, InitMode, TrainConfig, TrainOutcome};
use aol_core::imaging::{
    add_gaussian_noise, denoise_image, extract_patches, psnr, read_pgm, shepp_logan, write_pgm, DenoiseConfig, Fidelity,
    GrayImage, PgmFormat, DEFAULT_PEAK,
};
use aol_core::learners::{Algorithm, DEFAULT_IAOL_ALPHA, DEFAULT_SAOL_EPS, IMAGE_THRESHOLD, SYNTHETIC_THRESHOLD};
use aol_core::{AnalysisOperator, RandomSource, SignalModelConfig, Stream};

use crate::config::Config;
use crate::error::CliError;
use crate::montage::{operator_montage, patch_side};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The λ grid used when the config gives none.
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.002, 0.01, 0.05, 0.1, 0.3, 0.5];

fn write_manifest(out: &Path, command: &str, cfg: &Config) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", out.display())))?;
    let mut text = format!("# aol {VERSION}\n# command: {command}\n");
    for (k, v) in cfg.resolved() {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(out.join("manifest.txt"), text)?;
    Ok(())
}

fn write_operator(op: &AnalysisOperator, path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    op.write_text(std::io::BufWriter::new(file))?;
    Ok(())
}

fn read_operator(path: &Path) -> Result<AnalysisOperator, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::config(format!("cannot open operator {}: {e}", path.display())))?;
    Ok(AnalysisOperator::read_text(std::io::BufReader::new(file))?)
}

/// `shepplogan:N` or a PGM path relative to the config.
fn load_image(cfg: &mut Config) -> Result<GrayImage, CliError> {
    let spec = cfg.string_or("image", "shepplogan:256");
    if let Some(size) = spec.strip_prefix("shepplogan:") {
        let n: usize = size
            .parse()
            .map_err(|_| CliError::config(format!("key 'image': bad phantom size '{size}'")))?;
        return shepp_logan(n).map_err(|e| CliError::config(format!("key 'image': {e}")));
    }
    let path = cfg.resolve(&spec);
    read_pgm(&path).map_err(|e| CliError::config(format!("key 'image': cannot read {}: {e}", path.display())))
}

/// Learner keys shared by both training commands.
struct LearnerKeys {
    base: TrainConfig,
    init_file: Option<PathBuf>,
    seeds: Vec<u64>,
    workers: usize,
    checkpoint_every: usize,
}

/// Per-command defaults for the learner keys.
struct LearnerDefaults {
    rows: usize,
    cosparsity: usize,
    signals: usize,
    iterations: usize,
    mu0: f64,
    seeds: &'static [u64],
}

fn learner_keys(cfg: &mut Config, dim: usize, defaults: LearnerDefaults) -> Result<LearnerKeys, CliError> {
    let algorithm: Algorithm = cfg.get_or("algorithm", Algorithm::Faol)?;
    let rows = cfg.get_or("rows", defaults.rows)?;
    let cosparsity = cfg.get_or("cosparsity", defaults.cosparsity)?;
    let batch_size = cfg.get_or("signals", defaults.signals)?;
    let iterations = cfg.get_or("iterations", defaults.iterations)?;
    let alpha = cfg.get_or("alpha", DEFAULT_IAOL_ALPHA)?;
    let eps = cfg.get_or("eps", DEFAULT_SAOL_EPS)?;
    let replacement = cfg.bool_or("replacement", false)?;
    let mu0 = cfg.get_or("mu0", defaults.mu0)?;
    let init = cfg.string_or("init", "random");
    let init_file = if init == "file" {
        Some(cfg.optional_path("init_file").ok_or_else(|| CliError::config("key 'init_file' is required with init=file"))?)
    } else {
        None
    };
    let init = match init.as_str() {
        "random" => InitMode::Random,
        "closeby" => InitMode::Closeby,
        "file" => InitMode::Random,
        other => return Err(CliError::config(format!("key 'init': expected random, closeby or file, got '{other}'"))),
    };
    let seeds = cfg.list_or("seeds", defaults.seeds)?;
    let workers = cfg.get_or("max_workers", 1usize)?.max(1);
    let checkpoint_every = cfg.get_or("checkpoint_every", 0usize)?;
    let record_time = cfg.bool_or("record_time", false)?;
    let base = TrainConfig {
        algorithm,
        rows,
        dim,
        cosparsity,
        batch_size,
        iterations,
        alpha,
        eps,
        replacement: replacement.then_some(mu0),
        init,
        seed: 0,
        record_time,
    };
    base.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(LearnerKeys {
        base,
        init_file,
        seeds,
        workers,
        checkpoint_every,
    })
}

/// Runs `job` over `seeds` on up to `workers` threads, keeping seed order.
fn over_seeds<T, F>(seeds: &[u64], workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = workers.min(seeds.len()).max(1);
    if workers == 1 {
        return seeds.iter().map(|&s| job(s)).collect();
    }
    let mut slots: Vec<Option<T>> = seeds.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let job = &job;
                scope.spawn(move || {
                    (w..seeds.len())
                        .step_by(workers)
                        .map(|i| (i, job(seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every seed ran")).collect()
}

fn run_seed(
    keys: &LearnerKeys,
    seed: u64,
    source: &DataSource,
    init: Option<&AnalysisOperator>,
    out: &Path,
) -> Result<TrainOutcome, CliError> {
    let mut cfg = keys.base.clone();
    cfg.seed = seed;
    if let Some(op) = init {
        cfg.init = InitMode::Given(op.clone());
    }
    let checkpoints = out.join("checkpoints");
    let mut checkpoint_error = None;
    let result = train_with_observer(&cfg, source, |iter, op| {
        if keys.checkpoint_every > 0 && iter % keys.checkpoint_every == 0 && checkpoint_error.is_none() {
            let path = checkpoints.join(format!("operator_seed{seed}_iter{iter}.txt"));
            if let Err(e) = fs::create_dir_all(&checkpoints).map_err(CliError::from).and_then(|_| write_operator(op, &path)) {
                checkpoint_error = Some(e);
            }
        }
    });
    if let Some(e) = checkpoint_error {
        return Err(e);
    }
    match result {
        Ok(outcome) => {
            fs::write(out.join(format!("history_seed{seed}.csv")), outcome.history.to_csv())?;
            write_operator(&outcome.operator, &out.join(format!("operator_seed{seed}.txt")))?;
            Ok(outcome)
        }
        Err(failure) => {
            // Keep what was learned before the failure.
            let _ = fs::write(out.join(format!("history_seed{seed}.csv")), failure.partial.history.to_csv());
            Err(CliError::from(failure).context(format!("seed {seed}")))
        }
    }
}

fn finish_runs(results: Vec<Result<TrainOutcome, CliError>>, seeds: &[u64], out: &Path) -> Result<(), CliError> {
    let mut outcomes = Vec::new();
    for r in results {
        outcomes.push(r?);
    }
    let histories: Vec<_> = outcomes.iter().map(|o| o.history.clone()).collect();
    fs::write(out.join("history_mean.csv"), mean_curve_csv(&histories)?)?;
    let mut stdout = std::io::stdout().lock();
    for (seed, o) in seeds.iter().zip(&outcomes) {
        let last = o.history.last();
        let objective = last.map(|r| format!("{:.6e}", r.objective)).unwrap_or_else(|| "-".into());
        let recovered = last
            .and_then(|r| r.recovered)
            .map(|f| format!(" recovered {f:.4}"))
            .unwrap_or_default();
        writeln!(stdout, "seed {seed}: objective {objective}{recovered}")?;
    }
    Ok(())
}

pub fn train_synthetic(config: &Path) -> Result<(), CliError> {
    let mut cfg = Config::load(config)?;
    let dim = cfg.get_or("dim", 16usize)?;
    let keys = learner_keys(
        &mut cfg,
        dim,
        LearnerDefaults {
            rows: 32,
            cosparsity: 12,
            signals: 4096,
            iterations: 500,
            mu0: SYNTHETIC_THRESHOLD,
            seeds: &[0, 1, 2, 3, 4],
        },
    )?;
    let noise = cfg.get_or("noise", 0.0f64)?;
    let out = cfg.path_or("output", "output");
    cfg.finish()?;
    let init = match &keys.init_file {
        Some(p) => Some(read_operator(p)?),
        None => None,
    };
    let model = SignalModelConfig {
        cosparsity: keys.base.cosparsity,
        noise,
    };
    write_manifest(&out, "train-synthetic", &cfg)?;
    let results = over_seeds(&keys.seeds, keys.workers, |seed| {
        let mut rng = RandomSource::substream(seed, Stream::Target);
        let target = AnalysisOperator::random(keys.base.rows, keys.base.dim, &mut rng)?;
        model.validate(&target).map_err(|e| CliError::config(e.to_string()))?;
        write_operator(&target, &out.join(format!("target_seed{seed}.txt")))?;
        let source = DataSource::Synthetic { target, model };
        run_seed(&keys, seed, &source, init.as_ref(), &out)
    });
    finish_runs(results, &keys.seeds, &out)
}

pub fn train_image(config: &Path) -> Result<(), CliError> {
    let mut cfg = Config::load(config)?;
    let image = load_image(&mut cfg)?;
    let patch = cfg.get_or("patch", 8usize)?;
    let sigma = cfg.get_or("noise", 0.0f64)?;
    let keys = learner_keys(
        &mut cfg,
        patch * patch,
        LearnerDefaults {
            rows: 64,
            cosparsity: 57,
            signals: 16384,
            iterations: 100,
            mu0: IMAGE_THRESHOLD,
            seeds: &[0],
        },
    )?;
    let montage = cfg.bool_or("montage", true)?;
    let out = cfg.path_or("output", "output");
    cfg.finish()?;
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(CliError::config(format!("key 'noise': must be non-negative, got {sigma}")));
    }
    let init = match &keys.init_file {
        Some(p) => Some(read_operator(p)?),
        None => None,
    };
    if matches!(keys.base.init, InitMode::Closeby) {
        return Err(CliError::config("key 'init': closeby needs a target operator, which image data lacks"));
    }
    write_manifest(&out, "train-image", &cfg)?;
    let results = over_seeds(&keys.seeds, keys.workers, |seed| {
        let data = if sigma > 0.0 {
            add_gaussian_noise(&image, sigma, &mut RandomSource::substream(seed, Stream::Noise))?
        } else {
            image.clone()
        };
        let pool = extract_patches(&data, patch)?.batch;
        let outcome = run_seed(&keys, seed, &DataSource::Patches(pool), init.as_ref(), &out)?;
        if montage {
            let tiles = operator_montage(&outcome.operator, patch)?;
            write_pgm(&tiles, out.join(format!("montage_seed{seed}.pgm")), 255, PgmFormat::Binary)?;
        }
        Ok(outcome)
    });
    finish_runs(results, &keys.seeds, &out)
}

pub fn denoise(config: &Path) -> Result<(), CliError> {
    let mut cfg = Config::load(config)?;
    let template = cfg.string_or("operator", "");
    if template.is_empty() {
        return Err(CliError::config("key 'operator' is required"));
    }
    let ells: Vec<Option<usize>> = if template.contains("{ell}") {
        if !cfg.has("ell") {
            return Err(CliError::config("key 'ell' is required when 'operator' contains {ell}"));
        }
        cfg.list_or::<usize>("ell", &[])?.into_iter().map(Some).collect()
    } else {
        vec![cfg.optional::<usize>("ell")?]
    };
    let image = load_image(&mut cfg)?;
    let sigma = cfg.get_or("noise", 12.8f64)?;
    let seeds = cfg.list_or("seeds", &[0u64])?;
    let lambdas = cfg.list_or("lambda", &DEFAULT_LAMBDAS)?;
    let defaults = DenoiseConfig::default();
    let fidelity: Fidelity = cfg.get_or("fidelity", defaults.fidelity)?;
    let max_iter = cfg.get_or("max_iter", defaults.max_iter)?;
    let tol = cfg.get_or("tol", defaults.tol)?;
    let penalty = cfg.get_or("penalty", defaults.penalty)?;
    let workers = cfg.get_or("max_workers", 1usize)?.max(1);
    let out = cfg.path_or("output", "output");
    cfg.finish()?;
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(CliError::config(format!("key 'noise': must be non-negative, got {sigma}")));
    }

    let mut operators = Vec::new();
    for ell in &ells {
        let path = match ell {
            Some(l) => template.replace("{ell}", &l.to_string()),
            None => template.clone(),
        };
        let op = read_operator(&cfg.resolve(&path))?;
        let patch = patch_side(op.dim())
            .ok_or_else(|| CliError::config(format!("operator {path} has non-square dimension {}", op.dim())))?;
        operators.push((*ell, op, patch));
    }
    let base = DenoiseConfig {
        lambda: 0.0,
        max_iter,
        tol,
        penalty,
        fidelity,
        peak: DEFAULT_PEAK,
        max_workers: workers,
        ..defaults
    };
    for &lambda in &lambdas {
        DenoiseConfig { lambda, ..base.clone() }
            .validate()
            .map_err(|e| CliError::config(format!("key 'lambda': {e}")))?;
    }
    write_manifest(&out, "denoise", &cfg)?;

    let mut csv = String::from("ell,lambda,seed,psnr\n");
    let mut best: Option<(f64, GrayImage)> = None;
    let mut stdout = std::io::stdout().lock();
    for &seed in &seeds {
        let noisy = add_gaussian_noise(&image, sigma, &mut RandomSource::substream(seed, Stream::Noise))?;
        for (ell, op, patch) in &operators {
            for &lambda in &lambdas {
                let dcfg = DenoiseConfig {
                    lambda,
                    patch: *patch,
                    ..base.clone()
                };
                let report = denoise_image(&noisy, op, &dcfg)?;
                let value = psnr(&image, &report.image, DEFAULT_PEAK)?;
                let ell_text = ell.map(|l| l.to_string()).unwrap_or_default();
                csv.push_str(&format!("{ell_text},{lambda},{seed},{value}\n"));
                writeln!(stdout, "ell {ell_text} lambda {lambda} seed {seed}: psnr {value:.4}")?;
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, report.image));
                }
            }
        }
    }
    fs::write(out.join("denoise.csv"), csv)?;
    if let Some((_, img)) = best {
        write_pgm(&img, out.join("best.pgm"), 255, PgmFormat::Binary)?;
    }
    Ok(())
}
