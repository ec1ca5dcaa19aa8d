use serde::{Deserialize, Serialize};

use crate::config::EvolutionConfig;
use crate::genome::Chromosome;
use crate::selection::FitnessRecord;

/// One line of `history.jsonl`: a single individual's evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub generation: usize,
    pub index: usize,
    pub id: u64,
    pub digest: String,
    pub genome: Chromosome,
    /// `None` when training diverged.
    pub mse: Option<f64>,
    pub complexity: usize,
    pub parents: Vec<u64>,
    pub operator: String,
    pub cache_hit: bool,
    /// Seed of the weight initialization that produced this fitness.
    pub weight_seed: u64,
}

impl EvaluationRecord {
    pub fn fitness(&self) -> FitnessRecord {
        FitnessRecord {
            mse: self.mse.unwrap_or(f64::INFINITY),
            complexity: self.complexity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best_mse: Option<f64>,
    /// Mean over members with finite MSE.
    pub mean_mse: Option<f64>,
    pub diverged: usize,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub population: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config: EvolutionConfig,
    pub generations: Vec<GenerationSummary>,
    pub best_id: u64,
    pub best_digest: String,
    pub best_mse: Option<f64>,
    pub best_complexity: usize,
    pub total_evaluations: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub records: Vec<EvaluationRecord>,
    pub summary: RunSummary,
}

impl RunHistory {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Best recorded MSE of each generation's population.
    pub fn best_mse_per_generation(&self) -> Vec<f64> {
        self.summary
            .generations
            .iter()
            .map(|g| g.best_mse.unwrap_or(f64::INFINITY))
            .collect()
    }
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
