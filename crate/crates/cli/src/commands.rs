//! Subcommand definitions and their implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pram_core::dp::{certify, Certificate, FEASIBILITY_TOL};
use pram_core::inference::{risk_indices, RiskReport};
use pram_core::info::{mutual_information, plugin_mi};
use pram_core::mechanism::{build_matrix, load_column, privatize, save_column, save_run, PrivatizationRun};
use pram_core::optimizer::{
    optimize, optimize_binary, OptimizationReport, OptimizeOptions, PatternSummary, Strategy,
    DEFAULT_RESTARTS,
};
use pram_core::{frequencies, CategoricalDistribution, FrequencyTable, RetentionVector};
use serde::Serialize;

use crate::config::{parse_alpha, ConfigPatch, ScenarioConfig, ScenarioId};
use crate::error::{CliError, CliResult};
use crate::pipeline::{optimize_for, run_scenario, sample_column, stream_rng, write_bundle};

#[derive(Debug, Parser)]
#[command(name = "pram-forge", version, about = "Differentially private PRAM calibration and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the retention vector maximizing I(X; Z) for each budget.
    Optimize(OptimizeArgs),
    /// Calibrate, certify and apply PRAM to one CSV column.
    Privatize(PrivatizeArgs),
    /// Run a seeded simulation scenario and write a report bundle.
    Scenario(ScenarioArgs),
    /// Mutual information along the feasible interval of a binary variable.
    MiCurve(MiCurveArgs),
    /// Disclosure-risk indices from sample and population cell counts.
    Risk(RiskArgs),
    /// Check a retention vector against a privacy budget.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Exhaustive,
    LocalSearch,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Exhaustive => Strategy::Exhaustive,
            StrategyArg::LocalSearch => Strategy::LocalSearch,
        }
    }
}

/// Options shared by `optimize` and `scenario`.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario: I, II, III, IV or custom.
    #[arg(long)]
    pub scenario: Option<ScenarioId>,
    /// Comma-separated category probabilities.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,
    /// Number of categories (checked against --p).
    #[arg(long = "S", visible_alias = "categories")]
    pub categories: Option<usize>,
    /// Privacy budgets, comma-separated.
    #[arg(long, alias = "alphas", value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Local-search restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
}

impl ConfigArgs {
    fn patch(&self) -> CliResult<ConfigPatch> {
        let file = match &self.config {
            Some(path) => ConfigPatch::from_file(path)?,
            None => ConfigPatch::default(),
        };
        let flags = ConfigPatch {
            scenario: self.scenario,
            categories: self.categories,
            p: self.p.clone(),
            alphas: self.alpha.clone(),
            strategy: self.strategy.map(Strategy::from),
            seed: self.seed,
            restarts: self.restarts,
            ..Default::default()
        };
        Ok(file.overlay(flags))
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrivatizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: String,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest path; defaults to `<out>.run.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Use this retention vector instead of the optimizer's.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub q: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "auto")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Sample size per replication.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, alias = "replications")]
    pub reps: Option<usize>,
    /// Held population size; enables risk indices.
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MiCurveArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 6)]
    pub grid_points: usize,
    /// Also report plug-in estimates from samples of this size.
    #[arg(long)]
    pub plugin_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// Sample cell counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub sample: Vec<u64>,
    /// Population cell counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub population: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub q: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), out)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Optimize(a) => {
            let reports = cmd_optimize(&a)?;
            match reports.as_slice() {
                [single] => emit_json(single, a.out.as_deref()),
                many => emit_json(&many, a.out.as_deref()),
            }
        }
        Command::Privatize(a) => emit_json(&cmd_privatize(&a)?, None),
        Command::Scenario(a) => emit_json(&cmd_scenario(&a)?, None),
        Command::MiCurve(a) => emit(&cmd_mi_curve(&a)?, a.out.as_deref()),
        Command::Risk(a) => emit_json(&cmd_risk(&a)?, a.out.as_deref()),
        Command::Certify(a) => {
            let cert = cmd_certify(&a)?;
            emit_json(&cert, a.out.as_deref())?;
            if cert.pass {
                Ok(())
            } else {
                Err(CliError::Certification(pram_core::Error::CertificationFailed {
                    alpha: a.alpha,
                    ratio: cert.dp_ratio,
                    bound: cert.exp_alpha,
                }))
            }
        }
    }
}

/// One report per budget.
pub fn cmd_optimize(args: &OptimizeArgs) -> CliResult<Vec<OptimizationReport>> {
    let mut patch = args.config.patch()?;
    if patch.scenario.is_none() && patch.p.is_none() && patch.gamma.is_none() {
        return Err(CliError::Config("either --p or --scenario is required".into()));
    }
    if patch.alphas.is_none() && patch.scenario.is_none() {
        return Err(CliError::Config("--alpha is required".into()));
    }
    // optimization alone needs no sampling parameters
    patch.n.get_or_insert(1);
    patch.replications.get_or_insert(1);
    let cfg = ScenarioConfig::from_patch(patch)?;
    let p = cfg.distribution()?;
    cfg.privacy_levels()?
        .into_iter()
        .map(|alpha| optimize_for(&cfg, &p, alpha).map(|(r, _)| r))
        .collect()
}

pub fn cmd_privatize(args: &PrivatizeArgs) -> CliResult<PrivatizationRun> {
    let alpha = parse_alpha(args.alpha)?;
    let x = load_column(&args.input, &args.column, None).map_err(CliError::input)?;
    let q = match &args.q {
        Some(q) => {
            let q = RetentionVector::new(q.clone()).map_err(CliError::input)?;
            if q.len() != x.categories() {
                return Err(CliError::Config(format!(
                    "--q has {} entries but the column has {} categories",
                    q.len(),
                    x.categories()
                )));
            }
            q
        }
        None => {
            let p = CategoricalDistribution::from_counts(&frequencies(&x)).map_err(CliError::input)?;
            let options = OptimizeOptions {
                strategy: args.strategy.into(),
                seed: args.seed,
                restarts: args.restarts,
            };
            optimize(&p, alpha, &options).map_err(CliError::Optimizer)?.q_star
        }
    };
    let matrix = build_matrix(q).map_err(CliError::input)?;
    let run = PrivatizationRun::new(&x, matrix, alpha, args.seed).map_err(CliError::Certification)?;
    let z = run.apply(&x).map_err(CliError::input)?;
    save_column(&z, &args.out, &args.column).map_err(CliError::input)?;
    let manifest = args.manifest.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".run.json");
        PathBuf::from(name)
    });
    save_run(&run, manifest).map_err(CliError::input)?;
    Ok(run)
}

#[derive(Debug, Serialize)]
pub struct PatternRow {
    pub alpha: f64,
    pub pattern_summary: PatternSummary,
    pub mi_nats: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PatternSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominates_reference: Option<bool>,
    pub mean_total_variation: f64,
}

pub fn cmd_scenario(args: &ScenarioArgs) -> CliResult<Vec<PatternRow>> {
    let patch = args.config.patch()?.overlay(ConfigPatch {
        n: args.n,
        replications: args.reps,
        population: args.population,
        ..Default::default()
    });
    let cfg = ScenarioConfig::from_patch(patch)?;
    let outcome = run_scenario(&cfg)?;
    write_bundle(&outcome, &args.out_dir)?;
    Ok(outcome
        .alphas
        .iter()
        .map(|a| PatternRow {
            alpha: a.alpha,
            pattern_summary: a.report.pattern_summary,
            mi_nats: a.report.mi_nats.value(),
            reference: a.reference,
            dominates_reference: a.dominance.as_ref().map(|d| d.dominates),
            mean_total_variation: a.mean_total_variation,
        })
        .collect())
}

/// `grid_points` equally spaced values spanning the interval, endpoints included.
pub fn binary_grid(alpha: pram_core::PrivacyLevel, grid_points: usize) -> Vec<f64> {
    let (v, w) = optimize_binary(alpha);
    let (lo, hi) = (w.as_slice()[0], v.as_slice()[0]);
    if grid_points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..grid_points)
        .map(|i| {
            if i + 1 == grid_points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (grid_points - 1) as f64
            }
        })
        .collect()
}

/// CSV with columns `q,mi_exact` and, with `--plugin-n`, `mi_plugin`.
pub fn cmd_mi_curve(args: &MiCurveArgs) -> CliResult<String> {
    let alpha = parse_alpha(args.alpha)?;
    if args.p.len() != 2 {
        return Err(CliError::Config(format!(
            "mi-curve sweeps a binary variable; got {} probabilities",
            args.p.len()
        )));
    }
    if args.grid_points == 0 {
        return Err(CliError::Config("grid-points must be at least 1".into()));
    }
    let p = CategoricalDistribution::new(args.p.clone()).map_err(CliError::input)?;
    let mut out = String::from(if args.plugin_n.is_some() {
        "q,mi_exact,mi_plugin\n"
    } else {
        "q,mi_exact\n"
    });
    for (i, q) in binary_grid(alpha, args.grid_points).into_iter().enumerate() {
        let retention = RetentionVector::new(vec![q, q]).map_err(CliError::input)?;
        let exact = mutual_information(&p, &retention).map_err(CliError::input)?.value();
        match args.plugin_n {
            Some(n) => {
                let mut rng = stream_rng(args.seed, i as u64);
                let x = sample_column(&p, n, &mut rng);
                let m = build_matrix(retention).map_err(CliError::input)?;
                let z = privatize(&x, &m, rand::RngCore::next_u64(&mut rng)).map_err(CliError::input)?;
                let est = plugin_mi(&x, &z).map_err(CliError::input)?.value();
                out.push_str(&format!("{q},{exact},{est}\n"));
            }
            None => out.push_str(&format!("{q},{exact}\n")),
        }
    }
    Ok(out)
}

pub fn cmd_risk(args: &RiskArgs) -> CliResult<RiskReport> {
    risk_indices(
        &FrequencyTable::new(args.sample.clone()),
        &FrequencyTable::new(args.population.clone()),
    )
    .map_err(CliError::input)
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<Certificate> {
    let alpha = parse_alpha(args.alpha)?;
    let q = RetentionVector::new(args.q.clone()).map_err(CliError::input)?;
    let m = build_matrix(q).map_err(CliError::input)?;
    Ok(certify(&m, alpha, FEASIBILITY_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("pram-forge").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn negative_alpha_parses_then_fails_validation() {
        let Command::Optimize(a) = parse(&["optimize", "--p", "0.5,0.5", "--alpha", "-1"]).command else {
            panic!("wrong subcommand");
        };
        let err = cmd_optimize(&a).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn binary_optimum_from_flags() {
        let Command::Optimize(a) = parse(&["optimize", "--S", "2", "--p", "0.48,0.52", "--alpha", "0.05"]).command
        else {
            panic!("wrong subcommand");
        };
        let r = &cmd_optimize(&a).unwrap()[0];
        let q = r.q_star.as_slice();
        assert!((q[0] - 0.512_497_396).abs() < 1e-9 || (q[0] - 0.487_502_604).abs() < 1e-9);
        assert_eq!(q[0], q[1]);
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = binary_grid(parse_alpha(0.05).unwrap(), 6);
        let (v, w) = optimize_binary(parse_alpha(0.05).unwrap());
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], w.as_slice()[0]);
        assert_eq!(g[5], v.as_slice()[0]);
        assert!(g.windows(2).all(|x| x[0] < x[1]));
    }

    #[test]
    fn mi_curve_rejects_non_binary() {
        let Command::MiCurve(a) = parse(&["mi-curve", "--p", "0.2,0.3,0.5", "--alpha", "1"]).command else {
            panic!("wrong subcommand");
        };
        assert_eq!(cmd_mi_curve(&a).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn certify_override() {
        let Command::Certify(a) = parse(&["certify", "--q", "0.9,0.9", "--alpha", "0.5"]).command else {
            panic!("wrong subcommand");
        };
        let c = cmd_certify(&a).unwrap();
        assert!(!c.pass);
        assert!((c.dp_ratio - 9.0).abs() < 1e-12);
    }
}
