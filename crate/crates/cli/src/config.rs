//! Run configuration: a TOML file layered over a built-in profile.
//!
//! ```toml
//! profile = "desk"          # or "paper"
//! seed = 7
//!
//! [data]
//! clean = "clean.hsc"       # relative to this file
//! patch_size = 16
//! stride = 8
//! split = [0.665, 0.152, 0.183]
//!
//! [noise]
//! sigma = 0.1
//!
//! [evolution]               # scalar fields of the evolution config
//! population_size = 8
//!
//! [encoding]                # also [variation], [selection], [adam]
//! max_feature_maps = 32
//! ```

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use evonet::data::NoiseConfig;
use evonet::pipeline::PatchConfig;
use evonet::EvolutionConfig;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "EVONET_SEED";

const SECTIONS: [&str; 4] = ["encoding", "variation", "selection", "adam"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    clean: PathBuf,
    patch_size: Option<usize>,
    stride: Option<usize>,
    split: Option<(f64, f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<String>,
    seed: Option<u64>,
    data: DataSection,
    noise: NoiseConfig,
    evolution: Option<toml::Table>,
    encoding: Option<toml::Table>,
    variation: Option<toml::Table>,
    selection: Option<toml::Table>,
    adam: Option<toml::Table>,
    output: Option<OutputSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Config,
    Env,
}

/// Fully resolved configuration; serialized as the run's config snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub clean: PathBuf,
    pub patches: PatchConfig,
    pub noise: NoiseConfig,
    pub evolution: EvolutionConfig,
    pub output_dir: Option<PathBuf>,
}

/// Errors from reading and resolving a config file; always a usage error.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl From<anyhow::Error> for ConfigError {
    fn from(e: anyhow::Error) -> Self {
        ConfigError(e)
    }
}

fn default_patches(profile: &str) -> PatchConfig {
    match profile {
        "desk" => PatchConfig {
            patch_size: 16,
            stride: 8,
            ..PatchConfig::default()
        },
        _ => PatchConfig::default(),
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    parse_with_seed(text, base_dir, env::var(SEED_ENV).ok())
}

/// `env_seed` is the raw value of the seed override, if set.
fn parse_with_seed(text: &str, base_dir: &Path, env_seed: Option<String>) -> Result<RunConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
    let profile = file.profile.unwrap_or_else(|| "paper".to_string());
    let base = EvolutionConfig::profile(&profile)
        .ok_or_else(|| anyhow!("unknown profile {profile:?} (expected \"paper\" or \"desk\")"))?;

    let mut table = toml::Table::try_from(&base).context("serializing base profile")?;
    if let Some(evo) = file.evolution {
        for (k, v) in evo {
            if SECTIONS.contains(&k.as_str()) {
                return Err(anyhow!("[evolution].{k} must be given as its own [{k}] section").into());
            }
            table.insert(k, v);
        }
    }
    for (name, section) in SECTIONS.iter().zip([file.encoding, file.variation, file.selection, file.adam]) {
        if let Some(section) = section {
            let target = table
                .get_mut(*name)
                .and_then(|v| v.as_table_mut())
                .expect("profile has every section");
            target.extend(section);
        }
    }
    let evolution: EvolutionConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| anyhow!("config error: {e}"))?;
    evolution.check().map_err(|e| anyhow!("config error: {e}"))?;

    let (seed, seed_source) = match env_seed {
        Some(s) => (
            s.trim()
                .parse()
                .map_err(|e| anyhow!("{SEED_ENV}={s:?} is not a u64 seed: {e}"))?,
            SeedSource::Env,
        ),
        None => (
            file.seed
                .ok_or_else(|| anyhow!("config has no seed and {SEED_ENV} is unset"))?,
            SeedSource::Config,
        ),
    };

    let defaults = default_patches(&profile);
    let patches = PatchConfig {
        patch_size: file.data.patch_size.unwrap_or(defaults.patch_size),
        stride: file.data.stride.unwrap_or(defaults.stride),
        split: file.data.split.unwrap_or(defaults.split),
    };
    if !(file.noise.sigma >= 0.0) {
        return Err(anyhow!("noise sigma must be >= 0").into());
    }
    let clean = resolve_path(base_dir, &file.data.clean);
    Ok(RunConfig {
        profile,
        seed,
        seed_source,
        clean,
        patches,
        noise: file.noise,
        evolution,
        output_dir: file.output.and_then(|o| o.dir).map(|d| resolve_path(base_dir, &d)),
    })
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = parse(&text, base)?;
    if !cfg.clean.exists() {
        return Err(anyhow!("data file {} does not exist", cfg.clean.display()).into());
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
