//! Cache placement policies.
//!
//! All policies share the same observation constraint: demands are seen only
//! for files currently cached. The bandit family (CUCB, CUCBSC, MCUCBSC)
//! spends periods `1..F` caching each file once, then re-solves the
//! single-period optimization on perturbed estimates at every switching
//! period. The practical family (epsilon-greedy, (delta,epsilon)-greedy,
//! delta-myopic) starts from a random feasible cache at `t = 1` and follows
//! its own refresh rule. The informed upper bound (IUB) knows the true
//! profile, caches the solver's choice once, and never switches.

mod schedule;

pub use schedule::{gamma_lower_bound, gamma_upper_bound, ScheduleKind, SwitchingSchedule};

pub use crate::spo::GreedyMode;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, DemandVector, PopularityProfile};
use crate::spo::{exact_select, greedy_select, CacheContent, DEFAULT_DP_BUDGET};
use crate::{Error, Result};

/// Which single-period-optimization solver a policy calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Greedy (alpha, beta)-solver; the default.
    Greedy,
    /// Exact dynamic-programming solver (alpha = beta = 1); used for
    /// small-instance bound verification.
    Exact,
}

/// A policy plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// CUCBSC with the every-period schedule (the unmodified comparator).
    Cucb,
    /// CUCBSC with a constant switching gap.
    CucbscConst { l: u64 },
    /// CUCBSC with the `ceil(gamma sqrt(n_b))` schedule.
    CucbscSqrt { gamma: f64 },
    /// MCUCBSC (Zipf- and user-aware perturbation), constant gap.
    McucbscConst { l: u64 },
    /// MCUCBSC, square-root gap.
    McucbscSqrt { gamma: f64 },
    /// Exploit the estimate with probability `1 - epsilon`, otherwise cache
    /// a random feasible set; decided every period.
    EpsGreedy { epsilon: f64 },
    /// Same decision, but only every `delta` periods.
    DeltaEpsGreedy { delta: u64, epsilon: f64 },
    /// Every `delta` periods keep the cached files observed at least once in
    /// the window and fill the rest randomly.
    DeltaMyopic { delta: u64 },
    /// Informed upper bound: solver on the true profile, fixed forever.
    Iub,
}

impl PolicyKind {
    /// Stable configuration identifier (also the CSV `policy` column).
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Cucb => "cucb",
            PolicyKind::CucbscConst { .. } => "cucbsc-L",
            PolicyKind::CucbscSqrt { .. } => "cucbsc-sqrt",
            PolicyKind::McucbscConst { .. } => "mcucbsc-L",
            PolicyKind::McucbscSqrt { .. } => "mcucbsc-sqrt",
            PolicyKind::EpsGreedy { .. } => "eps-greedy",
            PolicyKind::DeltaEpsGreedy { .. } => "delta-eps-greedy",
            PolicyKind::DeltaMyopic { .. } => "delta-myopic",
            PolicyKind::Iub => "iub",
        }
    }

    /// True for the UCB-family policies that need the `1..F` initialization
    /// sweep and a switching schedule.
    pub fn is_bandit(&self) -> bool {
        matches!(
            self,
            PolicyKind::Cucb
                | PolicyKind::CucbscConst { .. }
                | PolicyKind::CucbscSqrt { .. }
                | PolicyKind::McucbscConst { .. }
                | PolicyKind::McucbscSqrt { .. }
        )
    }

    /// The switching schedule of a bandit policy.
    pub fn schedule_kind(&self) -> Option<ScheduleKind> {
        match *self {
            PolicyKind::Cucb => Some(ScheduleKind::EveryPeriod),
            PolicyKind::CucbscConst { l } | PolicyKind::McucbscConst { l } => {
                Some(ScheduleKind::Constant { l })
            }
            PolicyKind::CucbscSqrt { gamma } | PolicyKind::McucbscSqrt { gamma } => {
                Some(ScheduleKind::SqrtGamma { gamma })
            }
            _ => None,
        }
    }

    fn uses_modified_perturbation(&self) -> bool {
        matches!(
            self,
            PolicyKind::McucbscConst { .. } | PolicyKind::McucbscSqrt { .. }
        )
    }
}

/// CUCB perturbation: `theta_hat + sqrt(3 ln t / (2 T_f))`.
pub fn perturb_cucb(theta_hat: f64, plays: u64, t: u64) -> Result<f64> {
    if plays == 0 {
        return Err(Error::InvalidArgument(
            "perturbation undefined for an unplayed arm".into(),
        ));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("period index starts at 1".into()));
    }
    Ok(theta_hat + (3.0 * (t as f64).ln() / (2.0 * plays as f64)).sqrt())
}

/// MCUCBSC perturbation:
/// `theta_hat + F^(-rho) * sqrt(3 ln(Ubar t) / (2 Ubar T_f))`.
///
/// The `F^(-rho)` factor promotes exploitation when the popularity profile
/// is skewed; scaling by the mean user count accounts for the `Ubar`
/// independent demand realizations observed per period.
pub fn perturb_mcucb(
    theta_hat: f64,
    plays: u64,
    t: u64,
    num_files: usize,
    rho: f64,
    mean_users: f64,
) -> Result<f64> {
    if plays == 0 {
        return Err(Error::InvalidArgument(
            "perturbation undefined for an unplayed arm".into(),
        ));
    }
    if mean_users <= 0.0 {
        return Err(Error::InvalidArgument(
            "modified perturbation needs a positive mean user count".into(),
        ));
    }
    let scaled_t = mean_users * t as f64;
    if scaled_t < 1.0 {
        return Err(Error::InvalidArgument(
            "modified perturbation needs mean_users * t >= 1".into(),
        ));
    }
    let factor = (num_files as f64).powf(-rho);
    Ok(theta_hat + factor * (3.0 * scaled_t.ln() / (2.0 * mean_users * plays as f64)).sqrt())
}

/// Per-file sample means and play counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    theta_hat: Vec<f64>,
    plays: Vec<u64>,
}

impl ArmStats {
    pub fn new(num_files: usize) -> Self {
        ArmStats {
            theta_hat: vec![0.0; num_files],
            plays: vec![0; num_files],
        }
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    /// Running-mean update with one demand sample in `[0, 1]`:
    /// `theta_hat <- (theta_hat * T + sample) / (T + 1)`, `T <- T + 1`.
    pub fn update(&mut self, file: usize, sample: f64) {
        let t = self.plays[file] as f64;
        self.theta_hat[file] = (self.theta_hat[file] * t + sample) / (t + 1.0);
        self.plays[file] += 1;
    }
}

/// The mutable state of one policy over one episode.
#[derive(Debug, Clone)]
pub struct PolicyState {
    kind: PolicyKind,
    solver: SolverKind,
    greedy_mode: GreedyMode,
    num_files: usize,
    arms: ArmStats,
    schedule: Option<SwitchingSchedule>,
    cache: CacheContent,
    /// delta-myopic only: per-file observed-hit flags for the current window.
    window_hits: Vec<bool>,
    /// MCUCBSC only: (zipf rho, mean user count).
    modified_params: Option<(f64, f64)>,
}

impl PolicyState {
    /// Prepares a fresh policy.
    ///
    /// Bandit policies reject catalogs containing a file that can never be
    /// cached (`S_f > M`), since such an arm could never be sampled. The IUB
    /// computes its fixed cache here from the true profile.
    pub fn initialize(
        kind: PolicyKind,
        catalog: &Catalog,
        profile: &PopularityProfile,
        zipf_rho: f64,
        solver: SolverKind,
        greedy_mode: GreedyMode,
    ) -> Result<Self> {
        let num_files = catalog.num_files();
        if kind.is_bandit() {
            for (f, &s) in catalog.sizes().iter().enumerate() {
                if s > catalog.capacity() {
                    return Err(Error::UnsampleableFile {
                        file: f,
                        size: s,
                        capacity: catalog.capacity(),
                    });
                }
            }
        }
        let schedule = kind
            .schedule_kind()
            .map(|sk| SwitchingSchedule::new(sk, num_files));
        let modified_params = kind
            .uses_modified_perturbation()
            .then_some((zipf_rho, profile.mean_users()));

        let mut state = PolicyState {
            kind,
            solver,
            greedy_mode,
            num_files,
            arms: ArmStats::new(num_files),
            schedule,
            cache: CacheContent::empty(),
            window_hits: vec![false; num_files],
            modified_params,
        };
        if kind == PolicyKind::Iub {
            state.cache = state.solve(profile.theta(), catalog)?;
        }
        Ok(state)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn arms(&self) -> &ArmStats {
        &self.arms
    }

    pub fn schedule(&self) -> Option<&SwitchingSchedule> {
        self.schedule.as_ref()
    }

    pub fn cache(&self) -> &CacheContent {
        &self.cache
    }

    fn solve(&self, values: &[f64], catalog: &Catalog) -> Result<CacheContent> {
        match self.solver {
            SolverKind::Greedy => Ok(greedy_select(
                values,
                catalog.sizes(),
                catalog.capacity(),
                self.greedy_mode,
            )),
            SolverKind::Exact => {
                exact_select(values, catalog.sizes(), catalog.capacity(), DEFAULT_DP_BUDGET)
            }
        }
    }

    fn perturbed_estimates(&self, t: u64) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.num_files);
        for f in 0..self.num_files {
            let v = match self.modified_params {
                Some((rho, mean_users)) => perturb_mcucb(
                    self.arms.theta_hat[f],
                    self.arms.plays[f],
                    t,
                    self.num_files,
                    rho,
                    mean_users,
                )?,
                None => perturb_cucb(self.arms.theta_hat[f], self.arms.plays[f], t)?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Uniform random feasible cache: keeps `base`, then walks a random
    /// permutation of `candidates` adding whole files while they fit,
    /// stopping at the first file that does not fit (the solver's stop
    /// rule).
    fn random_fill(
        &self,
        base: Vec<u32>,
        mut candidates: Vec<u32>,
        catalog: &Catalog,
        rng: &mut impl Rng,
    ) -> CacheContent {
        candidates.shuffle(rng);
        let mut files = base;
        let mut used: u64 = files.iter().map(|&f| catalog.size(f as usize)).sum();
        for f in candidates {
            let s = catalog.size(f as usize);
            if used + s <= catalog.capacity() {
                files.push(f);
                used += s;
            } else {
                break;
            }
        }
        CacheContent::from_files(files, catalog.sizes())
    }

    fn all_files(&self) -> Vec<u32> {
        (0..self.num_files as u32).collect()
    }

    /// Decides the cache content for period `t` (periods start at 1).
    ///
    /// Bandit policies cache file `t` during `t <= F`, re-solve on perturbed
    /// estimates exactly at switching periods, and hold otherwise. See the
    /// kind documentation for the practical policies' rules.
    pub fn choose_cache(
        &mut self,
        t: u64,
        catalog: &Catalog,
        rng: &mut impl Rng,
    ) -> Result<&CacheContent> {
        match self.kind {
            PolicyKind::Cucb
            | PolicyKind::CucbscConst { .. }
            | PolicyKind::CucbscSqrt { .. }
            | PolicyKind::McucbscConst { .. }
            | PolicyKind::McucbscSqrt { .. } => {
                if t <= self.num_files as u64 {
                    // initialization sweep: cache exactly one file per period
                    self.cache =
                        CacheContent::from_files(vec![(t - 1) as u32], catalog.sizes());
                } else {
                    let schedule = self.schedule.as_mut().expect("bandit has a schedule");
                    if t == schedule.n_current() {
                        schedule.advance();
                        let values = self.perturbed_estimates(t)?;
                        self.cache = self.solve(&values, catalog)?;
                    }
                }
            }
            PolicyKind::EpsGreedy { epsilon } => {
                // t = 1 starts random without consuming a Bernoulli draw
                let explore = t == 1 || rng.gen::<f64>() < epsilon;
                self.cache = if explore {
                    self.random_fill(Vec::new(), self.all_files(), catalog, rng)
                } else {
                    self.solve(self.arms.theta_hat(), catalog)?
                };
            }
            PolicyKind::DeltaEpsGreedy { delta, epsilon } => {
                if t == 1 {
                    self.cache = self.random_fill(Vec::new(), self.all_files(), catalog, rng);
                } else if (t - 1).is_multiple_of(delta) {
                    if rng.gen::<f64>() < epsilon {
                        self.cache =
                            self.random_fill(Vec::new(), self.all_files(), catalog, rng);
                    } else {
                        self.cache = self.solve(self.arms.theta_hat(), catalog)?;
                    }
                }
            }
            PolicyKind::DeltaMyopic { delta } => {
                if t == 1 {
                    self.cache = self.random_fill(Vec::new(), self.all_files(), catalog, rng);
                } else if (t - 1).is_multiple_of(delta) {
                    let retained: Vec<u32> = self
                        .cache
                        .files()
                        .iter()
                        .copied()
                        .filter(|&f| self.window_hits[f as usize])
                        .collect();
                    let candidates: Vec<u32> = (0..self.num_files as u32)
                        .filter(|&f| !self.cache.contains(f))
                        .collect();
                    self.cache = self.random_fill(retained, candidates, catalog, rng);
                    self.window_hits.fill(false);
                }
            }
            PolicyKind::Iub => {
                // fixed since initialize
            }
        }
        Ok(&self.cache)
    }

    /// Delivers one period of demand.
    ///
    /// Estimates are updated only for files in the current cache, since only
    /// their requests are observed. The delta-myopic window flags record
    /// which cached files saw at least one request.
    pub fn observe(&mut self, demand: &DemandVector) {
        match self.kind {
            PolicyKind::Iub => {}
            PolicyKind::DeltaMyopic { .. } => {
                for &f in self.cache.files() {
                    if demand.counts()[f as usize] > 0 {
                        self.window_hits[f as usize] = true;
                    }
                }
            }
            _ => {
                for &f in self.cache.files() {
                    self.arms.update(f as usize, demand.demand(f as usize));
                }
            }
        }
    }
}
