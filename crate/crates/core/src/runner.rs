//! Experiment orchestration: seeded replicates, sweeps, and file emission.
//!
//! `run_experiment` expands the sweep axis into points, runs every
//! `(point, policy, replicate)` episode with a seed derived from the base
//! seed and a stable textual label, and aggregates regret and efficiency
//! across replicates at a decimated checkpoint grid (every period up to
//! 1000, then every 10th; `full_resolution` keeps every period).
//!
//! Outputs per run directory:
//! - `aggregate_<point>.csv`: per-checkpoint means with standard errors and
//!   the theorem bound where one applies,
//! - `sweep.csv`: one final-efficiency row per (point, policy),
//! - `metadata.json`: config echo, fingerprint, measured solver rating,
//!   bound constants when enumerable, and modeling notes,
//! - `traces/`: optional per-episode trace CSVs.
//!
//! Outputs are byte-identical across repeated runs of the same
//! configuration: seeds never depend on execution order, and aggregation
//! reduces replicates in index order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{Catalog, PopularityProfile};
use crate::config::{ExperimentConfig, SweepAxis};
use crate::metrics::bounds::{
    compute_bound_constants, eq7_rhs, theorem1_bound, theorem2_bound, BoundConstants,
    Theorem1Params, Theorem2Params,
};
use crate::metrics::{cache_efficiency, efficiency_series, RegretLedger};
use crate::policies::{gamma_lower_bound, PolicyKind, ScheduleKind, SolverKind};
use crate::seeding::derive_seed;
use crate::simulator::{run_episode, write_trace_csv, SimEnv};
use crate::spo::{expected_reward, measure_alpha, solve_exact, solve_greedy};
use crate::{Error, Result};

/// Command-line level options layered over a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides `seed_base`.
    pub seed: Option<u64>,
    /// Overrides `replicates`.
    pub replicates: Option<usize>,
    /// Overrides the policy list.
    pub policies: Option<Vec<String>>,
    /// Keep every period in the aggregate instead of the decimated grid.
    pub full_resolution: bool,
    /// Dump the first N replicate traces per (point, policy).
    pub dump_traces: usize,
}

/// Final per-policy efficiency at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyRow {
    pub sweep_value: String,
    pub policy: String,
    pub efficiency_mean: f64,
    pub efficiency_stderr: f64,
}

/// What `run_experiment` produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub aggregate_files: Vec<PathBuf>,
    pub sweep_file: PathBuf,
    pub metadata_file: PathBuf,
    /// `(point label, policy) -> final mean efficiency`.
    pub final_efficiency: BTreeMap<(String, String), f64>,
}

/// The decimated checkpoint grid: every period up to 1000, then every 10th,
/// always including the horizon.
pub fn checkpoints(horizon: u64, full_resolution: bool) -> Vec<u64> {
    if full_resolution {
        return (1..=horizon).collect();
    }
    let mut grid: Vec<u64> = (1..=horizon.min(1000)).collect();
    let mut t = 1010;
    while t <= horizon {
        grid.push(t);
        t += 10;
    }
    if grid.last() != Some(&horizon) && horizon > 0 {
        grid.push(horizon);
    }
    grid
}

/// Seed for one episode; stable under policy-list and grid edits.
pub fn episode_seed(seed_base: u64, point: &str, policy: &str, replicate: usize) -> u64 {
    derive_seed(seed_base, &format!("{point}|{policy}|{replicate}"))
}

struct EpisodeSummary {
    sampling: Vec<f64>,
    switching: Vec<f64>,
    total: Vec<f64>,
    efficiency: Vec<Option<f64>>,
    final_efficiency: f64,
}

#[derive(Clone)]
struct SeriesAccumulator {
    n: Vec<u64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl SeriesAccumulator {
    fn new(len: usize) -> Self {
        SeriesAccumulator {
            n: vec![0; len],
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    fn add(&mut self, i: usize, v: f64) {
        self.n[i] += 1;
        self.sum[i] += v;
        self.sum_sq[i] += v * v;
    }

    fn mean(&self, i: usize) -> Option<f64> {
        (self.n[i] > 0).then(|| self.sum[i] / self.n[i] as f64)
    }

    fn stderr(&self, i: usize) -> Option<f64> {
        let n = self.n[i] as f64;
        if self.n[i] < 2 {
            return (self.n[i] == 1).then_some(0.0);
        }
        let mean = self.sum[i] / n;
        let var = (self.sum_sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0);
        Some((var / n).sqrt())
    }
}

/// Solver rating and baseline for one instance; falls back to the greedy
/// reward with `alpha = 1` when the exact DP exceeds its budget.
struct Baseline {
    r_opt: f64,
    alpha: f64,
    beta: f64,
    exact_feasible: bool,
}

fn baseline(catalog: &Catalog, profile: &PopularityProfile) -> Baseline {
    match solve_exact(profile.theta(), catalog) {
        Ok(exact) => {
            let r_exact = expected_reward(&exact, catalog, profile);
            let rating = measure_alpha(catalog, profile).expect("exact solve already succeeded");
            Baseline {
                r_opt: r_exact,
                alpha: rating.alpha,
                beta: rating.beta,
                exact_feasible: true,
            }
        }
        Err(_) => {
            let greedy = solve_greedy(profile.theta(), catalog);
            log::warn!(
                "exact solver budget exceeded; using the greedy reward as r_opt with alpha = 1"
            );
            Baseline {
                r_opt: expected_reward(&greedy, catalog, profile),
                alpha: 1.0,
                beta: 1.0,
                exact_feasible: false,
            }
        }
    }
}

/// Which closed-form bound (if any) applies to a policy under this config.
fn bound_for_policy(
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    constants: Option<&BoundConstants>,
    num_files: usize,
    t: u64,
) -> Option<f64> {
    let constants = constants?;
    match kind {
        PolicyKind::Cucb | PolicyKind::CucbscConst { .. } => {
            // the constant-gap bound is proven in the alpha = beta = 1 regime
            if cfg.solver != SolverKind::Exact {
                return None;
            }
            let l = match kind {
                PolicyKind::CucbscConst { l } => l,
                _ => 1,
            };
            theorem2_bound(
                constants,
                &Theorem2Params {
                    w: cfg.w,
                    l,
                    num_files,
                },
                t,
            )
            .ok()
        }
        PolicyKind::CucbscSqrt { gamma } => theorem1_bound(
            constants,
            &Theorem1Params {
                w: cfg.w,
                gamma,
                beta: 1.0,
                num_files,
            },
            t,
        )
        .ok(),
        _ => None,
    }
}

#[derive(Serialize)]
struct PointMetadata {
    label: String,
    fingerprint: String,
    alpha: f64,
    beta: f64,
    r_opt: f64,
    exact_solver_feasible: bool,
    bound_constants: BTreeMap<String, BoundConstants>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct RunMetadata {
    config_fingerprint: String,
    config: ExperimentConfig,
    aggregation: &'static str,
    stderr_columns: bool,
    demand_model: &'static str,
    random_cache_law: &'static str,
    mcucbsc_mean_users: &'static str,
    seed_scheme: &'static str,
    checkpoint_grid: String,
    points: Vec<PointMetadata>,
}

fn format_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sanitize(label: &str) -> String {
    label.replace('=', "_")
}

/// Runs the full experiment described by `config` (with `opts` layered on
/// top) and writes all output files under `opts.out_dir`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed_base = seed;
    }
    if let Some(replicates) = opts.replicates {
        cfg.replicates = replicates;
    }
    if let Some(policies) = &opts.policies {
        cfg.policy = None;
        cfg.policies = policies.clone();
    }
    cfg.validate()?;

    fs::create_dir_all(&opts.out_dir)?;
    if opts.dump_traces > 0 {
        fs::create_dir_all(opts.out_dir.join("traces"))?;
    }

    let fingerprint = cfg.fingerprint();
    let points = cfg.sweep_points()?;
    let policy_names = cfg.policy_names();

    let mut aggregate_files = Vec::new();
    let mut sweep_rows: Vec<EfficiencyRow> = Vec::new();
    let mut final_efficiency = BTreeMap::new();
    let mut metadata_points = Vec::new();

    for (label, point_cfg) in &points {
        let catalog = point_cfg.catalog()?;
        let profile = point_cfg.profile()?;
        let base = baseline(&catalog, &profile);
        let grid = checkpoints(point_cfg.horizon, opts.full_resolution);
        let point_fingerprint = point_cfg.fingerprint();

        let mut warnings = Vec::new();
        if !base.exact_feasible {
            warnings.push(
                "exact solver budget exceeded; r_opt from the greedy solver with alpha = 1"
                    .to_string(),
            );
        }

        // bound constants per schedule kind actually used (small instances)
        let mut constants_by_policy: BTreeMap<String, BoundConstants> = BTreeMap::new();
        for name in &policy_names {
            let kind = point_cfg.parse_policy(name)?;
            if let Some(schedule) = kind.schedule_kind() {
                if let ScheduleKind::SqrtGamma { gamma } = schedule {
                    if gamma < gamma_lower_bound(catalog.num_files()) {
                        warnings.push(format!(
                            "policy {name}: gamma {gamma} below 2 + 1/sqrt(F+1); \
                             bound validity not guaranteed"
                        ));
                    }
                }
                let alpha_for_bound = if point_cfg.solver == SolverKind::Exact {
                    1.0
                } else {
                    base.alpha
                };
                match compute_bound_constants(&catalog, &profile, alpha_for_bound, schedule) {
                    Ok(c) => {
                        constants_by_policy.insert(name.clone(), c);
                    }
                    Err(e) => warnings.push(format!("policy {name}: no bound constants ({e})")),
                }
            }
        }

        let path = opts
            .out_dir
            .join(format!("aggregate_{}.csv", sanitize(label)));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "t",
            "policy",
            "mean_sampling_regret",
            "mean_switching_regret",
            "mean_total_regret",
            "theorem_bound",
            "efficiency",
            "se_sampling_regret",
            "se_switching_regret",
            "se_total_regret",
            "se_efficiency",
        ])?;

        for name in &policy_names {
            let kind = point_cfg.parse_policy(name)?;
            let env = SimEnv::new(&catalog, &profile, point_cfg.zipf_rho)
                .with_solver(point_cfg.solver)
                .with_greedy_mode(point_cfg.greedy_mode());

            let summaries: Vec<EpisodeSummary> = (0..point_cfg.replicates)
                .into_par_iter()
                .map(|replicate| -> Result<EpisodeSummary> {
                    let seed = episode_seed(point_cfg.seed_base, label, name, replicate);
                    let trace =
                        run_episode(env, kind, point_cfg.horizon, seed, &point_fingerprint)?;
                    if replicate < opts.dump_traces {
                        let file = opts.out_dir.join("traces").join(format!(
                            "{}_{}_r{}.csv",
                            sanitize(label),
                            name,
                            replicate
                        ));
                        write_trace_csv(&trace, name, fs::File::create(file)?)?;
                    }
                    let ledger = RegretLedger::from_trace(
                        &trace, &catalog, &profile, base.r_opt, base.alpha, base.beta,
                        point_cfg.w,
                    )?;
                    let eff = efficiency_series(&trace, point_cfg.w);
                    let final_eff = cache_efficiency(&trace, point_cfg.w)?;
                    let sample =
                        |s: &[f64]| grid.iter().map(|&t| s[(t - 1) as usize]).collect::<Vec<_>>();
                    Ok(EpisodeSummary {
                        sampling: sample(&ledger.sampling),
                        switching: sample(&ledger.switching),
                        total: sample(&ledger.total),
                        efficiency: grid.iter().map(|&t| eff[(t - 1) as usize]).collect(),
                        final_efficiency: final_eff,
                    })
                })
                .collect::<Result<Vec<_>>>()?;

            // deterministic reduction in replicate order
            let len = grid.len();
            let mut sampling = SeriesAccumulator::new(len);
            let mut switching = SeriesAccumulator::new(len);
            let mut total = SeriesAccumulator::new(len);
            let mut efficiency = SeriesAccumulator::new(len);
            let mut final_eff = SeriesAccumulator::new(1);
            for s in &summaries {
                for i in 0..len {
                    sampling.add(i, s.sampling[i]);
                    switching.add(i, s.switching[i]);
                    total.add(i, s.total[i]);
                    if let Some(e) = s.efficiency[i] {
                        efficiency.add(i, e);
                    }
                }
                final_eff.add(0, s.final_efficiency);
            }

            let constants = constants_by_policy.get(name);
            for (i, &t) in grid.iter().enumerate() {
                let bound =
                    bound_for_policy(point_cfg, kind, constants, catalog.num_files(), t);
                w.write_record([
                    t.to_string(),
                    name.clone(),
                    format_cell(sampling.mean(i)),
                    format_cell(switching.mean(i)),
                    format_cell(total.mean(i)),
                    format_cell(bound),
                    format_cell(efficiency.mean(i)),
                    format_cell(sampling.stderr(i)),
                    format_cell(switching.stderr(i)),
                    format_cell(total.stderr(i)),
                    format_cell(efficiency.stderr(i)),
                ])?;
            }

            let mean = final_eff.mean(0).unwrap_or(f64::NAN);
            sweep_rows.push(EfficiencyRow {
                sweep_value: label.clone(),
                policy: name.clone(),
                efficiency_mean: mean,
                efficiency_stderr: final_eff.stderr(0).unwrap_or(f64::NAN),
            });
            final_efficiency.insert((label.clone(), name.clone()), mean);
        }
        w.flush()?;
        aggregate_files.push(path);

        metadata_points.push(PointMetadata {
            label: label.clone(),
            fingerprint: point_fingerprint,
            alpha: base.alpha,
            beta: base.beta,
            r_opt: base.r_opt,
            exact_solver_feasible: base.exact_feasible,
            bound_constants: constants_by_policy,
            warnings,
        });
    }

    let sweep_file = opts.out_dir.join("sweep.csv");
    {
        let mut w = csv::Writer::from_path(&sweep_file)?;
        w.write_record([
            "sweep_axis",
            "sweep_value",
            "policy",
            "efficiency_mean",
            "efficiency_stderr",
            "replicates",
        ])?;
        let axis = match cfg.sweep {
            SweepAxis::None => "none",
            SweepAxis::Rho => "rho",
            SweepAxis::Capacity => "capacity",
            SweepAxis::MeanUsers => "mean-users",
            SweepAxis::NumFiles => "num-files",
        };
        for row in &sweep_rows {
            w.write_record([
                axis.to_string(),
                row.sweep_value.clone(),
                row.policy.clone(),
                row.efficiency_mean.to_string(),
                row.efficiency_stderr.to_string(),
                cfg.replicates.to_string(),
            ])?;
        }
        w.flush()?;
    }

    let metadata_file = opts.out_dir.join("metadata.json");
    let metadata = RunMetadata {
        config_fingerprint: fingerprint,
        config: cfg.clone(),
        aggregation: "mean",
        stderr_columns: true,
        demand_model: "uniform integer user count on {0..U}; iid categorical file requests",
        random_cache_law: "uniform permutation prefix fill, stopping at the first non-fitting file",
        mcucbsc_mean_users: "true mean user count from the configuration",
        seed_scheme: "splitmix64(seed_base xor fnv1a(point|policy|replicate))",
        checkpoint_grid: if opts.full_resolution {
            "every period".to_string()
        } else {
            "every period through 1000, then every 10th".to_string()
        },
        points: metadata_points,
    };
    let mut f = fs::File::create(&metadata_file)?;
    serde_json::to_writer_pretty(&mut f, &metadata)?;
    f.write_all(b"\n")?;

    Ok(RunSummary {
        out_dir: opts.out_dir.clone(),
        aggregate_files,
        sweep_file,
        metadata_file,
        final_efficiency,
    })
}

/// Evaluates the closed-form bounds on the configured instance and writes
/// `bounds.csv` (per-checkpoint theorem bound and bad-period RHS per
/// schedule policy) plus `bound_constants.json`.
///
/// Small instances only: propagates the enumeration guard.
pub fn bounds_report(config: &ExperimentConfig, t_max: u64, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let catalog = config.catalog()?;
    let profile = config.profile()?;
    let base = baseline(&catalog, &profile);
    if !base.exact_feasible {
        return Err(Error::EnumerationBudget(
            "bound evaluation needs the exact solver on this instance".into(),
        ));
    }
    fs::create_dir_all(out_dir)?;
    let grid = checkpoints(t_max, false);

    let mut constants_out: BTreeMap<String, BoundConstants> = BTreeMap::new();
    let path = out_dir.join("bounds.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["t", "policy", "theorem_bound", "eq7_rhs"])?;
    for name in config.policy_names() {
        let kind = config.parse_policy(&name)?;
        // bounds are stated for the unmodified perturbation only
        let schedule = match kind {
            PolicyKind::Cucb | PolicyKind::CucbscConst { .. } | PolicyKind::CucbscSqrt { .. } => {
                kind.schedule_kind().expect("bandit schedule")
            }
            _ => continue,
        };
        let alpha_for_bound = if config.solver == SolverKind::Exact {
            1.0
        } else {
            base.alpha
        };
        let constants = compute_bound_constants(&catalog, &profile, alpha_for_bound, schedule)?;
        for &t in &grid {
            let bound = bound_for_policy(config, kind, Some(&constants), catalog.num_files(), t);
            let rhs = eq7_rhs(&constants, schedule, catalog.num_files(), base.beta, t);
            w.write_record([
                t.to_string(),
                name.clone(),
                format_cell(bound),
                rhs.to_string(),
            ])?;
        }
        constants_out.insert(name, constants);
    }
    w.flush()?;

    let json_path = out_dir.join("bound_constants.json");
    let mut f = fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(
        &mut f,
        &serde_json::json!({
            "config_fingerprint": config.fingerprint(),
            "alpha": base.alpha,
            "beta": base.beta,
            "r_opt": base.r_opt,
            "constants": constants_out,
        }),
    )?;
    f.write_all(b"\n")?;
    Ok(path)
}
