use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use evonet::data::{load_cube, save_cube, synth_cube, HsiCube};
use evonet::engine::{denoise_cube, evolve as run_evolution, final_train};
use evonet::genome::{validate, GenomeFile};
use evonet::metrics::{report, MetricConfig};
use evonet::parallel::with_jobs;
use evonet::pipeline::{prepare_splits, score_patches, PatchScores};
use evonet::rng::{derived_rng, stream};
use evonet::{checkpoint, Error};
use serde::Serialize;

use crate::config;
use crate::Failure;

type CmdResult = Result<(), Failure>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Format errors in an input cube are usage errors; I/O failures are not.
fn read_cube(path: &Path) -> Result<HsiCube, Failure> {
    load_cube(path).map_err(|e| match e {
        Error::Format { .. } => Failure::Usage(anyhow!("{}: {e}", path.display())),
        other => Failure::Runtime(other.into()),
    })
}

pub fn synth(out: &Path, height: usize, width: usize, bands: usize, seed: u64) -> CmdResult {
    let cube = synth_cube(height, width, bands, &mut derived_rng(seed, &[stream::SYNTH]))?;
    save_cube(&cube, out)?;
    Ok(())
}

pub fn evolve(config_path: &Path, out_dir: Option<&Path>, jobs: Option<usize>) -> CmdResult {
    let cfg = config::load(config_path)?;
    let out_dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("no --out-dir given and config has no [output] dir")))?;
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let started = Instant::now();
    let clean = load_cube(&cfg.clean)?;
    let splits = prepare_splits(&clean, &cfg.noise, &cfg.patches, cfg.seed)?;
    log::info!(
        "patches: {} train, {} eval, {} test",
        splits.train.len(),
        splits.eval.len(),
        splits.test.len()
    );
    let (train, eval) = (splits.train_set(), splits.eval_set());
    let result = with_jobs(jobs, || run_evolution(&cfg.evolution, &train, &eval, cfg.seed))?;

    write(&out_dir.join("history.jsonl"), result.history.to_jsonl())?;
    write(&out_dir.join("summary.json"), result.history.summary_json())?;
    let genome = GenomeFile::new(&result.best, &cfg.evolution.encoding).with_channels(clean.channels());
    write(&out_dir.join("best_genome.json"), genome.to_json())?;
    write(&out_dir.join("config.json"), cfg.to_json())?;
    write(
        &out_dir.join("run.log"),
        format!(
            "elapsed_seconds={:.3}\njobs={}\n",
            started.elapsed().as_secs_f64(),
            jobs.map_or("all".to_string(), |j| j.to_string())
        ),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainReport {
    genome_digest: String,
    model_digest: String,
    epochs: usize,
    best_epoch: usize,
    test: PatchScores,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn train(genome_path: &Path, config_path: &Path, out: &Path, jobs: Option<usize>) -> CmdResult {
    let cfg = config::load(config_path)?;
    let text = fs::read_to_string(genome_path)
        .with_context(|| format!("reading {}", genome_path.display()))?;
    let genome = GenomeFile::from_json(&text).map_err(|e| Failure::Usage(anyhow!("{}: {e}", genome_path.display())))?;
    let chromosome = genome.chromosome();
    let violations = validate(&chromosome, &cfg.evolution.encoding);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(anyhow!("genome does not satisfy the configured encoding: {}", list.join("; ")).into());
    }

    let clean = load_cube(&cfg.clean)?;
    if let Some(c) = genome.in_channels {
        if c != clean.channels() {
            return Err(anyhow!(
                "genome was evolved for {c} bands but the configured cube has {}",
                clean.channels()
            )
            .into());
        }
    }
    let splits = prepare_splits(&clean, &cfg.noise, &cfg.patches, cfg.seed)?;
    let combined = splits.combined_set()?;
    let trained = with_jobs(jobs, || final_train(&chromosome, &combined, &cfg.evolution, cfg.seed))?;

    checkpoint::save(&trained.network, out)?;
    write(&sibling(out, ".curve.csv"), trained.curve_csv())?;
    let report = TrainReport {
        genome_digest: chromosome.digest(),
        model_digest: checkpoint::digest(&trained.network),
        epochs: trained.curve.len(),
        best_epoch: trained.best_epoch,
        test: score_patches(&trained.network, &splits.test)?,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&sibling(out, ".report.json"), format!("{json}\n"))?;
    println!("{json}");
    Ok(())
}

pub fn denoise(model: &Path, input: &Path, out: &Path, tile: usize, overlap: usize) -> CmdResult {
    let net = checkpoint::load(model)?;
    let noisy = read_cube(input)?;
    let denoised = denoise_cube(&net, &noisy, tile, overlap)?;
    save_cube(&denoised, out)?;
    Ok(())
}

pub fn metrics(clean: &Path, test: &Path) -> CmdResult {
    let clean = read_cube(clean)?;
    let test = read_cube(test)?;
    let r = report(&clean, &test, &MetricConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(())
}
