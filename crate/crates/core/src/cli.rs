//! The `rmab` command line.

use crate::baseline::{
    monte_carlo_random_error, sigma_multiple, BaselineStats, MonteCarloEstimate,
};
use crate::error::{invalid, Error, Result};
use crate::estimation::{EstimationConfig, DEFAULT_NUM_CLUSTERS};
use crate::io;
use crate::kmeans::DEFAULT_MAX_ITERS;
use crate::metrics::{DEFAULT_BINS, DEFAULT_EPSILON};
use crate::model::DiscountFactor;
use crate::pipeline::{evaluate, weekly_summary_csv, EvaluateConfig, Evaluation, DEFAULT_K};
use crate::simulator::{
    engagement_drops_prevented, generate_cohort, run_study, CohortSpec, Policy, StudyConfig,
    StudyTotals, RNG_ALGORITHM,
};
use crate::whittle::{RewardConvention, DEFAULT_INDEX_TOL, REWARD_CONVENTION};
use crate::VERSION;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "rmab",
    version,
    about = "Restless-bandit study simulation and Whittle-index ranking evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a study on a synthetic cohort and write its trajectories.
    Simulate(SimulateArgs),
    /// Estimate observed models from trajectories and score the predictions.
    Evaluate(EvaluateArgs),
    /// Random-policy baseline statistics and sigma multiples.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    /// Weekly intervention budget.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub weeks: usize,
    /// whittle, random, round_robin or csoc.
    #[arg(long)]
    pub policy: Policy,
    /// Seed for the transitions and the random policy.
    #[arg(long)]
    pub seed: u64,
    /// Seed for drawing the cohort; defaults to --seed.
    #[arg(long)]
    pub cohort_seed: Option<u64>,
    #[arg(long, default_value_t = DiscountFactor::DEFAULT.get())]
    pub beta: f64,
    /// JSON cohort description; its `n` is replaced by --n.
    #[arg(long)]
    pub cohort_spec: Option<PathBuf>,
    /// Overrides the cohort's prediction noise.
    #[arg(long)]
    pub prediction_noise: Option<f64>,
    /// Random policy only: draw k arms with replacement.
    #[arg(long)]
    pub with_replacement: bool,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Predicted-model CSV.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Trajectory CSV.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Seed for clustering.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DiscountFactor::DEFAULT.get())]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_INDEX_TOL)]
    pub index_tol: f64,
    #[arg(long, default_value_t = DEFAULT_NUM_CLUSTERS)]
    pub num_clusters: usize,
    #[arg(long, default_value_t = 1)]
    pub passive_min_support: u64,
    #[arg(long, default_value_t = 1)]
    pub active_min_support: u64,
    #[arg(long, default_value_t = 1)]
    pub pooled_min_support: u64,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Only score the first N weeks.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Observed top-k footrule error; repeatable.
    #[arg(long)]
    pub observed: Vec<f64>,
    /// Number of Monte Carlo trials for a cross-check.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    /// Required with --monte-carlo.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write baseline.json here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, B: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng_algorithm: &'static str,
    config: &'a C,
    #[serde(flatten)]
    body: B,
}

fn report<'a, C: Serialize, B: Serialize>(
    command: &'static str,
    config: &'a C,
    body: B,
) -> Report<'a, C, B> {
    Report {
        tool: "rmab",
        version: VERSION,
        command,
        rng_algorithm: RNG_ALGORITHM,
        config,
        body,
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        invalid(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| invalid(e.to_string()))?;
    execute(cli, out)
}

pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Evaluate(a) => evaluate_cmd(&a, out),
        Command::Baseline(a) => baseline(&a, out),
    }
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    args: &'a SimulateArgs,
    cohort_seed: u64,
    cohort: &'a CohortSpec,
    study: &'a StudyConfig,
    reward_convention: RewardConvention,
}

#[derive(Serialize)]
struct SimulateBody {
    totals: StudyTotals,
    csoc_totals: StudyTotals,
    engagement_drops_prevented: f64,
    /// `None` when the policy made no calls.
    engagement_drops_prevented_per_call: Option<f64>,
    files: [&'static str; 3],
}

fn simulate(a: &SimulateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let beta = DiscountFactor::new(a.beta)?;
    if a.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    if a.weeks == 0 {
        return Err(invalid("--weeks must be at least 1"));
    }
    if a.k > a.n {
        return Err(invalid(format!("--k {} exceeds --n {}", a.k, a.n)));
    }
    if a.with_replacement && a.policy != Policy::Random {
        return Err(invalid(
            "--with-replacement applies only to the random policy",
        ));
    }
    let mut spec = match &a.cohort_spec {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
        None => CohortSpec::synthetic(a.n),
    };
    spec.n = a.n;
    if let Some(noise) = a.prediction_noise {
        spec.prediction_noise = noise;
    }
    spec.validate()?;
    prepare_dir(&a.output_dir)?;

    let cohort_seed = a.cohort_seed.unwrap_or(a.seed);
    let arms = generate_cohort(&spec, cohort_seed)?;
    let study = StudyConfig {
        beta,
        with_replacement: a.with_replacement,
        ..StudyConfig::new(a.weeks, a.k, a.policy, a.seed)
    };
    let log = run_study(&arms, &study)?;
    let csoc = run_study(
        &arms,
        &StudyConfig {
            policy: Policy::Csoc,
            with_replacement: false,
            ..study.clone()
        },
    )?;
    let prevented = engagement_drops_prevented(&log, &csoc, false)?;
    let per_call = (log.service_calls() > 0)
        .then(|| engagement_drops_prevented(&log, &csoc, true))
        .transpose()?;

    let dir = &a.output_dir;
    io::write_trajectory_csv(&dir.join("trajectory.csv"), &log)?;
    let predicted: Vec<_> = arms.iter().map(|x| (x.arm_id, x.predicted_model)).collect();
    io::write_models_csv(&dir.join("predicted.csv"), &predicted)?;
    let truth: Vec<_> = arms.iter().map(|x| (x.arm_id, x.true_model)).collect();
    io::write_models_csv(&dir.join("truth.csv"), &truth)?;

    let config = SimulateConfig {
        args: a,
        cohort_seed,
        cohort: &spec,
        study: &study,
        reward_convention: REWARD_CONVENTION,
    };
    let body = SimulateBody {
        totals: log.totals(),
        csoc_totals: csoc.totals(),
        engagement_drops_prevented: prevented,
        engagement_drops_prevented_per_call: per_call,
        files: ["trajectory.csv", "predicted.csv", "truth.csv"],
    };
    io::write_json(&dir.join("study.json"), &report("simulate", &config, body))?;
    writeln!(out, "wrote {}", dir.join("study.json").display())?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluateConfigEcho<'a> {
    args: &'a EvaluateArgs,
    resolved: &'a EvaluateConfig,
    reward_convention: RewardConvention,
}

fn evaluate_cmd(a: &EvaluateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let config = EvaluateConfig {
        k: a.k,
        beta: DiscountFactor::new(a.beta)?,
        index_tol: a.index_tol,
        seed: a.seed,
        estimation: EstimationConfig {
            passive_min_support: a.passive_min_support,
            active_min_support: a.active_min_support,
            pooled_min_support: a.pooled_min_support,
            num_clusters: a.num_clusters,
            max_iters: a.max_iters,
            smoothing: a.smoothing,
        },
        bins: a.bins,
        epsilon: a.epsilon,
        window: a.window,
    };
    config.validate()?;
    let predicted = io::read_models_csv(&a.predicted)?;
    let rows = io::read_trajectory_csv(&a.trajectory)?;
    prepare_dir(&a.output_dir)?;

    let eval: Evaluation = evaluate(&predicted, &rows, &config)?;
    let dir = &a.output_dir;
    io::write_atomic(
        &dir.join("observed.csv"),
        &io::observed_csv(&eval.observed)?,
    )?;
    io::write_atomic(&dir.join("weekly_summary.csv"), &weekly_summary_csv(&eval)?)?;
    let echo = EvaluateConfigEcho {
        args: a,
        resolved: &config,
        reward_convention: REWARD_CONVENTION,
    };
    io::write_json(
        &dir.join("evaluation.json"),
        &report("evaluate", &echo, &eval),
    )?;
    writeln!(out, "wrote {}", dir.join("evaluation.json").display())?;
    Ok(())
}

#[derive(Serialize)]
struct SigmaMultiple {
    observed: f64,
    c: f64,
}

#[derive(Serialize)]
struct BaselineBody {
    #[serde(flatten)]
    stats: BaselineStats,
    sigma_multiples: Vec<SigmaMultiple>,
    monte_carlo: Option<MonteCarloEstimate>,
}

fn baseline(a: &BaselineArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let stats = BaselineStats::new(a.n, a.k)?;
    if a.monte_carlo.is_some() && a.seed.is_none() {
        return Err(invalid("--monte-carlo needs --seed"));
    }
    if a.monte_carlo == Some(0) {
        return Err(invalid("--monte-carlo needs at least one trial"));
    }
    if let Some(v) = a.observed.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("observed error {v} is not finite")));
    }
    if let Some(dir) = &a.output_dir {
        prepare_dir(dir)?;
    }

    let sigma_multiples = a
        .observed
        .iter()
        .map(|&observed| {
            Ok(SigmaMultiple {
                observed,
                c: sigma_multiple(stats.expected_error, stats.std_bound, observed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monte_carlo = match (a.monte_carlo, a.seed) {
        (Some(trials), Some(seed)) => Some(monte_carlo_random_error(a.n, a.k, trials, seed)?),
        _ => None,
    };
    let body = BaselineBody {
        stats,
        sigma_multiples,
        monte_carlo,
    };
    let rep = report("baseline", a, body);
    let mut text = serde_json::to_string_pretty(&rep)?;
    text.push('\n');
    if let Some(dir) = &a.output_dir {
        io::write_atomic(&dir.join("baseline.json"), text.as_bytes())?;
    }
    out.write_all(text.as_bytes()).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> Result<String> {
        let mut out = Vec::new();
        run(
            std::iter::once("rmab").chain(args.iter().copied()),
            &mut out,
        )?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn baseline_reports_sigma_multiple() {
        let text = run_capture(&[
            "baseline",
            "--n",
            "3000",
            "--k",
            "200",
            "--observed",
            "0.436",
        ])
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], VERSION);
        assert!((v["expected_error"].as_f64().unwrap() - 0.4681481).abs() < 1e-6);
        assert_eq!(v["bound_valid"], true);
        assert!(v["monte_carlo"].is_null());
        let c = v["sigma_multiples"][0]["c"].as_f64().unwrap();
        assert!((c - (0.4681481111 - 0.436) / 0.0204124).abs() < 1e-3);
    }

    #[test]
    fn baseline_single_pick() {
        let text = run_capture(&["baseline", "--n", "100", "--k", "1"]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["expected_error"].as_f64().unwrap() - 0.495).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_fail_before_work() {
        assert!(run_capture(&["baseline", "--n", "10", "--k", "11"]).is_err());
        assert!(run_capture(&["baseline", "--n", "10", "--k", "2", "--monte-carlo", "5"]).is_err());
        assert!(run_capture(&[
            "simulate", "--n", "10", "--k", "2", "--weeks", "1", "--policy", "whittle"
        ])
        .is_err());
        assert!(run_capture(&[
            "simulate", "--n", "10", "--k", "2", "--weeks", "1", "--policy", "nope", "--seed", "1"
        ])
        .is_err());
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("never");
        assert!(run_capture(&[
            "simulate",
            "--n",
            "10",
            "--k",
            "20",
            "--weeks",
            "1",
            "--policy",
            "random",
            "--seed",
            "1",
            "--output-dir",
            target.to_str().unwrap()
        ])
        .is_err());
        assert!(!target.exists());
    }
}
