//! The generational loop: evaluate, breed, evaluate offspring, select.

pub mod dataset;
pub mod denoise;
pub mod history;
pub mod train;

use std::collections::HashMap;

pub use dataset::Dataset;
pub use denoise::denoise_cube;
pub use history::{EvaluationRecord, GenerationSummary, RunHistory, RunSummary};
pub use train::{evaluate_fitness, final_train, train_network, EpochStats, FinalTraining};

use crate::config::EvolutionConfig;
use crate::error::Result;
use crate::genome::{validate, Chromosome, Violation};
use crate::parallel::map_indexed;
use crate::rng::{derived_rng, stream, weight_seed};
use crate::selection::{best_individual, environmental_selection, FitnessRecord};
use crate::variation::{generate_offspring, init_population};
use history::finite;

#[derive(Debug, Clone)]
struct Individual {
    id: u64,
    chromosome: Chromosome,
    fitness: FitnessRecord,
}

struct Candidate {
    chromosome: Chromosome,
    parents: Vec<u64>,
    operator: &'static str,
}

struct Evaluator<'a> {
    cfg: &'a EvolutionConfig,
    train: &'a Dataset,
    eval: &'a Dataset,
    seed: u64,
    cache: HashMap<String, (FitnessRecord, u64)>,
    records: Vec<EvaluationRecord>,
    next_id: u64,
}

impl Evaluator<'_> {
    /// Evaluates one generation's candidates. Genomes already seen (earlier
    /// in the run or earlier in this batch) reuse the cached fitness; the
    /// rest train concurrently, each from its own weight seed.
    fn evaluate(&mut self, generation: usize, batch: Vec<Candidate>) -> Result<Vec<Individual>> {
        let digests: Vec<String> = batch.iter().map(|c| c.chromosome.digest()).collect();
        let mut fresh: Vec<usize> = Vec::new();
        for (i, d) in digests.iter().enumerate() {
            if !self.cache.contains_key(d) && !fresh.iter().any(|&j| digests[j] == *d) {
                fresh.push(i);
            }
        }
        let results = map_indexed(fresh.len(), |k| {
            let i = fresh[k];
            let ws = weight_seed(self.seed, generation, i);
            evaluate_fitness(&batch[i].chromosome, self.train, self.eval, self.cfg, ws).map(|f| (f, ws))
        });
        for (&i, r) in fresh.iter().zip(results) {
            self.cache.insert(digests[i].clone(), r?);
        }

        let mut out = Vec::with_capacity(batch.len());
        for (index, (cand, digest)) in batch.into_iter().zip(digests).enumerate() {
            let (fitness, ws) = self.cache[&digest];
            let cache_hit = !fresh.contains(&index);
            let id = self.next_id;
            self.next_id += 1;
            self.records.push(EvaluationRecord {
                generation,
                index,
                id,
                digest,
                genome: cand.chromosome.clone(),
                mse: finite(fitness.mse),
                complexity: fitness.complexity,
                parents: cand.parents,
                operator: cand.operator.to_string(),
                cache_hit,
                weight_seed: ws,
            });
            out.push(Individual {
                id,
                chromosome: cand.chromosome,
                fitness,
            });
        }
        Ok(out)
    }
}

fn summarize(generation: usize, pop: &[Individual], records: &[EvaluationRecord]) -> GenerationSummary {
    let finite_mse: Vec<f64> = pop.iter().map(|i| i.fitness.mse).filter(|m| m.is_finite()).collect();
    let evaluated: Vec<&EvaluationRecord> = records.iter().filter(|r| r.generation == generation).collect();
    GenerationSummary {
        generation,
        best_mse: finite_mse.iter().copied().reduce(f64::min),
        mean_mse: (!finite_mse.is_empty()).then(|| finite_mse.iter().sum::<f64>() / finite_mse.len() as f64),
        diverged: pop.len() - finite_mse.len(),
        evaluations: evaluated.len(),
        cache_hits: evaluated.iter().filter(|r| r.cache_hit).count(),
        population: pop.iter().map(|i| i.id).collect(),
    }
}

/// Outcome of [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub history: RunHistory,
    pub best: Chromosome,
    pub best_fitness: FitnessRecord,
}

/// Runs the full generational search. Parallel evaluation uses the
/// current rayon pool; results do not depend on its size.
pub fn evolve(cfg: &EvolutionConfig, train: &Dataset, eval: &Dataset, seed: u64) -> Result<EvolutionResult> {
    cfg.check()?;
    let mut rng = derived_rng(seed, &[stream::EVOLVE]);
    let mut evaluator = Evaluator {
        cfg,
        train,
        eval,
        seed,
        cache: HashMap::new(),
        records: Vec::new(),
        next_id: 0,
    };
    let n = cfg.population_size;
    let initial = init_population(n, &cfg.encoding, &mut rng)
        .into_iter()
        .map(|chromosome| Candidate {
            chromosome,
            parents: Vec::new(),
            operator: "init",
        })
        .collect();
    let mut population = evaluator.evaluate(0, initial)?;
    let mut generations = vec![summarize(0, &population, &evaluator.records)];
    log::info!("generation 0: best mse {:?}", generations[0].best_mse);

    for generation in 1..=cfg.generations {
        let chromosomes: Vec<Chromosome> = population.iter().map(|i| i.chromosome.clone()).collect();
        let fitness: Vec<FitnessRecord> = population.iter().map(|i| i.fitness).collect();
        let offspring = generate_offspring(
            &chromosomes,
            &fitness,
            n,
            &cfg.variation,
            &cfg.encoding,
            &cfg.selection,
            &mut rng,
        )?;
        let candidates = offspring
            .into_iter()
            .map(|o| Candidate {
                parents: o.parents.iter().map(|&p| population[p].id).collect(),
                operator: o.operator(),
                chromosome: o.chromosome,
            })
            .collect();
        let children = evaluator.evaluate(generation, candidates)?;
        let pool: Vec<Individual> = population.into_iter().chain(children).collect();
        let pool_fitness: Vec<FitnessRecord> = pool.iter().map(|i| i.fitness).collect();
        let survivors = environmental_selection(&pool_fitness, n, &cfg.selection, &mut rng)?;
        population = survivors.into_iter().map(|i| pool[i].clone()).collect();
        let summary = summarize(generation, &population, &evaluator.records);
        log::info!(
            "generation {generation}: best mse {:?}, mean {:?}, cache hits {}",
            summary.best_mse,
            summary.mean_mse,
            summary.cache_hits
        );
        generations.push(summary);
    }

    let fitness: Vec<FitnessRecord> = population.iter().map(|i| i.fitness).collect();
    let best = &population[best_individual(&fitness)?];
    let records = evaluator.records;
    let summary = RunSummary {
        seed,
        config: cfg.clone(),
        best_id: best.id,
        best_digest: best.chromosome.digest(),
        best_mse: finite(best.fitness.mse),
        best_complexity: best.fitness.complexity,
        total_evaluations: records.len(),
        cache_hits: records.iter().filter(|r| r.cache_hit).count(),
        generations,
    };
    Ok(EvolutionResult {
        best: best.chromosome.clone(),
        best_fitness: best.fitness,
        history: RunHistory { records, summary },
    })
}

/// Every genome recorded in `history` that violates the encoding.
pub fn invalid_records(history: &RunHistory) -> Vec<(u64, Vec<Violation>)> {
    history
        .records
        .iter()
        .filter_map(|r| {
            let v = validate(&r.genome, &history.summary.config.encoding);
            (!v.is_empty()).then_some((r.id, v))
        })
        .collect()
}
