//! Seeded simulation harness: optimize, sample, privatize and estimate per budget.

use std::fs;
use std::io::Write;
use std::path::Path;

use pram_core::inference::{em_from_counts, risk_indices, EmOptions};
use pram_core::mechanism::{build_matrix, privatize};
use pram_core::optimizer::{
    dominance_check, optimize, DominanceCheck, OptimizationReport, OptimizeOptions, PatternSummary,
};
use pram_core::{frequencies, CategoricalDistribution, FrequencyTable, MicrodataColumn, PrivacyLevel};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{reference_pattern, ScenarioConfig};
use crate::error::{CliError, CliResult};

/// Stream id of the held population; replications use `(alpha index << 32) | rep`.
const POPULATION_STREAM: u64 = u64::MAX;

/// Independent ChaCha8 stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` iid draws from `p` as a column with ids `1..=S`.
pub fn sample_column(p: &CategoricalDistribution, n: usize, rng: &mut impl Rng) -> MicrodataColumn {
    let dist = WeightedIndex::new(p.probs()).expect("validated distribution");
    let records = (0..n).map(|_| dist.sample(rng) as u32 + 1).collect();
    MicrodataColumn::new(records, p.categories()).expect("ids within range")
}

#[derive(Debug, Clone, Serialize)]
pub struct Replication {
    pub replication: usize,
    pub p_hat: Vec<f64>,
    pub total_variation: f64,
    pub em_iterations: usize,
    pub likelihood_monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaOutcome {
    pub alpha: f64,
    pub report: OptimizationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PatternSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceCheck>,
    pub mean_estimate: Vec<f64>,
    pub mean_total_variation: f64,
    #[serde(skip)]
    pub replications: Vec<Replication>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskSummary {
    pub population: usize,
    pub mean_tau1: f64,
    pub mean_tau2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub p: Vec<f64>,
    pub alphas: Vec<AlphaOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskSummary>,
}

/// Optimizes `q` for `alpha` and, for the built-in scenarios, compares it
/// with the reported level counts.
pub fn optimize_for(
    cfg: &ScenarioConfig,
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
) -> CliResult<(OptimizationReport, Option<PatternSummary>)> {
    let options = OptimizeOptions {
        strategy: cfg.strategy,
        seed: cfg.seed,
        restarts: cfg.restarts,
    };
    let mut report = optimize(p, alpha, &options).map_err(CliError::Optimizer)?;
    let reference = reference_pattern(cfg.scenario, alpha.value());
    if let Some(r) = reference {
        report.dominance = dominance_check(p, alpha, &report, r);
    }
    Ok((report, reference))
}

fn replicate(
    p: &CategoricalDistribution,
    report: &OptimizationReport,
    cfg: &ScenarioConfig,
    alpha_index: usize,
    rep: usize,
    population: Option<&MicrodataColumn>,
) -> CliResult<Replication> {
    let mut rng = stream_rng(cfg.seed, ((alpha_index as u64) << 32) | rep as u64);
    let privatize_seed = rng.next_u64();
    let (x, risk) = match population {
        Some(pop) => {
            let idx = rand::seq::index::sample(&mut rng, pop.len(), cfg.n);
            let records = idx.iter().map(|i| pop.records()[i]).collect();
            let x = pop.with_records(records).map_err(CliError::input)?;
            let r = risk_indices(&frequencies(&x), &frequencies(pop)).map_err(CliError::input)?;
            (x, Some(r))
        }
        None => (sample_column(p, cfg.n, &mut rng), None),
    };
    let m = build_matrix(report.q_star.clone()).map_err(CliError::input)?;
    let z = privatize(&x, &m, privatize_seed).map_err(CliError::input)?;
    let mut counts = frequencies(&z).counts().to_vec();
    counts.resize(p.categories(), 0);
    let est = em_from_counts(&FrequencyTable::new(counts), &m, EmOptions::default())
        .map_err(CliError::input)?;
    let likelihood_monotone = est
        .log_likelihood_trace
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12);
    Ok(Replication {
        replication: rep,
        total_variation: est.p_hat.total_variation(p).map_err(CliError::input)?,
        p_hat: est.p_hat.probs().to_vec(),
        em_iterations: est.iterations,
        likelihood_monotone,
        tau1: risk.as_ref().map(|r| r.tau1),
        tau2: risk.as_ref().map(|r| r.tau2),
    })
}

/// Runs every budget in `cfg`. Replications run in parallel, each on its own
/// seeded stream, so results do not depend on the thread count.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<ScenarioOutcome> {
    cfg.validate()?;
    let p = cfg.distribution()?;
    let population = cfg
        .population
        .map(|size| sample_column(&p, size, &mut stream_rng(cfg.seed, POPULATION_STREAM)));
    let mut alphas = Vec::with_capacity(cfg.alphas.len());
    for (ai, alpha) in cfg.privacy_levels()?.into_iter().enumerate() {
        let (report, reference) = optimize_for(cfg, &p, alpha)?;
        let replications = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| replicate(&p, &report, cfg, ai, rep, population.as_ref()))
            .collect::<CliResult<Vec<_>>>()?;
        let reps = replications.len() as f64;
        let mean_estimate = (0..p.categories())
            .map(|k| replications.iter().map(|r| r.p_hat[k]).sum::<f64>() / reps)
            .collect();
        let mean_total_variation = replications.iter().map(|r| r.total_variation).sum::<f64>() / reps;
        alphas.push(AlphaOutcome {
            alpha: alpha.value(),
            dominance: report.dominance.clone(),
            report,
            reference,
            mean_estimate,
            mean_total_variation,
            replications,
        });
    }
    let risk = cfg.population.map(|size| {
        let all: Vec<&Replication> = alphas.iter().flat_map(|a| &a.replications).collect();
        let count = all.len() as f64;
        RiskSummary {
            population: size,
            mean_tau1: all.iter().filter_map(|r| r.tau1).sum::<f64>() / count,
            mean_tau2: all.iter().filter_map(|r| r.tau2).sum::<f64>() / count,
        }
    });
    Ok(ScenarioOutcome {
        config: cfg.clone(),
        p: p.probs().to_vec(),
        alphas,
        risk,
    })
}

/// Writes `patterns.json`, `estimates.csv`, `scatter.csv` and, when risk was
/// requested, `risk.json` into `dir`.
pub fn write_bundle(outcome: &ScenarioOutcome, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut patterns = fs::File::create(dir.join("patterns.json"))?;
    serde_json::to_writer_pretty(&mut patterns, outcome)?;
    patterns.write_all(b"\n")?;

    let mut estimates = String::from("alpha,category,p_true,p_mean\n");
    let mut scatter = String::from("alpha,replication,category,p_hat\n");
    for a in &outcome.alphas {
        for (k, (truth, mean)) in outcome.p.iter().zip(&a.mean_estimate).enumerate() {
            estimates.push_str(&format!("{},{},{},{}\n", a.alpha, k + 1, truth, mean));
        }
        for r in &a.replications {
            for (k, v) in r.p_hat.iter().enumerate() {
                scatter.push_str(&format!("{},{},{},{}\n", a.alpha, r.replication, k + 1, v));
            }
        }
    }
    fs::write(dir.join("estimates.csv"), estimates)?;
    fs::write(dir.join("scatter.csv"), scatter)?;
    if let Some(risk) = &outcome.risk {
        fs::write(dir.join("risk.json"), serde_json::to_string_pretty(risk)? + "\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScenarioId, SCENARIO_I};

    fn small(id: ScenarioId) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::builtin(id, 11);
        cfg.n = 2_000;
        cfg.replications = 4;
        cfg.alphas = vec![1.0, 2.0];
        cfg
    }

    #[test]
    fn sampling_is_seeded() {
        let p = CategoricalDistribution::new(SCENARIO_I.to_vec()).unwrap();
        let a = sample_column(&p, 100, &mut stream_rng(1, 0));
        let b = sample_column(&p, 100, &mut stream_rng(1, 0));
        let c = sample_column(&p, 100, &mut stream_rng(1, 1));
        assert_eq!(a.records(), b.records());
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn scenario_runs_are_reproducible() {
        let cfg = small(ScenarioId::I);
        let a = run_scenario(&cfg).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = one.install(|| run_scenario(&cfg)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for alpha in &a.alphas {
            assert!(alpha.reference.is_some());
            assert!(alpha.dominance.is_some());
            assert!(alpha.replications.iter().all(|r| r.likelihood_monotone));
        }
    }

    #[test]
    fn held_population_risk() {
        let mut cfg = small(ScenarioId::II);
        cfg.population = Some(5_000);
        let out = run_scenario(&cfg).unwrap();
        let risk = out.risk.unwrap();
        assert!(risk.mean_tau1 <= risk.mean_tau2);
    }

    #[test]
    fn bundle_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&small(ScenarioId::I)).unwrap();
        write_bundle(&out, dir.path()).unwrap();
        let est = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
        assert_eq!(est.lines().count(), 1 + 2 * 10);
        let scatter = fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        assert_eq!(scatter.lines().count(), 1 + 2 * 4 * 10);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("patterns.json")).unwrap()).unwrap();
        assert_eq!(json["alphas"].as_array().unwrap().len(), 2);
        assert!(!dir.path().join("risk.json").exists());
    }
}
