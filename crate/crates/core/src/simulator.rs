//! The period loop: decide, pay, realize demand, collect reward, observe.
//!
//! Within a period the order of events is fixed: (1) the policy chooses the
//! cache for period `t`, paying `S_f` for every newly stored file; (2) demand
//! is realized; (3) the cache earns `U * d_f * S_f` for every cached file;
//! (4) the observation is delivered to the policy. The cache starts empty,
//! so every policy pays for its first fill.
//!
//! Episodes are deterministic given `(config, seed)`: the demand stream and
//! the policy's private randomness are two independent ChaCha streams split
//! from the episode seed, so paired-seed runs of different policies see
//! identical demand sample paths.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{sample_demand, Catalog, DemandVector, PopularityProfile};
use crate::policies::{GreedyMode, PolicyKind, PolicyState, SolverKind};
use crate::seeding::splitmix64;
use crate::spo::CacheContent;
use crate::Result;

/// Everything fixed over one episode.
#[derive(Debug, Clone, Copy)]
pub struct SimEnv<'a> {
    pub catalog: &'a Catalog,
    pub profile: &'a PopularityProfile,
    /// Zipf skewness of the demand model (consumed by MCUCBSC).
    pub zipf_rho: f64,
    pub solver: SolverKind,
    pub greedy_mode: GreedyMode,
}

impl<'a> SimEnv<'a> {
    pub fn new(catalog: &'a Catalog, profile: &'a PopularityProfile, zipf_rho: f64) -> Self {
        SimEnv {
            catalog,
            profile,
            zipf_rho,
            solver: SolverKind::Greedy,
            greedy_mode: GreedyMode::StopAtBlocker,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_greedy_mode(mut self, mode: GreedyMode) -> Self {
        self.greedy_mode = mode;
        self
    }
}

/// One period of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    /// Period index, starting at 1.
    pub t: u64,
    /// Cache content chosen for this period.
    pub cache: CacheContent,
    /// Offloaded data this period: `sum_{f in cache} U * d_f * S_f`.
    pub reward: f64,
    /// Replacement cost charged this period (newly added sizes).
    pub cost: f64,
    /// Users who issued a request this period.
    pub num_users: u32,
    /// Data requested across ALL files (cache hits plus cellular).
    pub requested_total: f64,
    /// Files newly added relative to the previous period.
    pub num_switched: usize,
    /// Sparse demand realization: (file, request count), nonzero entries.
    pub demand: Vec<(u32, u32)>,
}

/// A full episode: per-period records plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<PeriodRecord>,
    /// Fingerprint of the generating configuration.
    pub fingerprint: String,
    pub seed: u64,
}

impl EpisodeTrace {
    pub fn horizon(&self) -> u64 {
        self.records.len() as u64
    }
}

/// A running episode; call [`Episode::step`] once per period.
pub struct Episode<'a> {
    env: SimEnv<'a>,
    policy: PolicyState,
    prev_cache: CacheContent,
    t: u64,
    demand_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
}

impl<'a> Episode<'a> {
    pub fn new(env: SimEnv<'a>, kind: PolicyKind, seed: u64) -> Result<Self> {
        let policy = PolicyState::initialize(
            kind,
            env.catalog,
            env.profile,
            env.zipf_rho,
            env.solver,
            env.greedy_mode,
        )?;
        Ok(Episode {
            env,
            policy,
            prev_cache: CacheContent::empty(),
            t: 0,
            demand_rng: ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x64656d616e64)),
            policy_rng: ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x706f6c696379)),
        })
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    /// Runs one period with freshly sampled demand.
    pub fn step(&mut self) -> Result<PeriodRecord> {
        let t = self.t + 1;
        let cache = self
            .policy
            .choose_cache(t, self.env.catalog, &mut self.policy_rng)?
            .clone();
        let demand = sample_demand(self.env.profile, self.env.catalog, &mut self.demand_rng);
        self.finish_step(t, cache, demand)
    }

    /// Runs one period against an externally supplied demand realization.
    /// Used by replay checks and hand-built trajectories.
    pub fn step_with_demand(&mut self, demand: DemandVector) -> Result<PeriodRecord> {
        let t = self.t + 1;
        let cache = self
            .policy
            .choose_cache(t, self.env.catalog, &mut self.policy_rng)?
            .clone();
        self.finish_step(t, cache, demand)
    }

    fn finish_step(
        &mut self,
        t: u64,
        cache: CacheContent,
        demand: DemandVector,
    ) -> Result<PeriodRecord> {
        let sizes = self.env.catalog.sizes();
        let cost = cache.switch_cost(&self.prev_cache, sizes);
        let num_switched = cache.num_switched(&self.prev_cache);

        // rewards are integer units (count * size); keep the arithmetic exact
        let mut reward: u64 = 0;
        for &f in cache.files() {
            reward += u64::from(demand.counts()[f as usize]) * sizes[f as usize];
        }
        let mut requested: u64 = 0;
        let mut sparse = Vec::new();
        for (f, &c) in demand.counts().iter().enumerate() {
            if c > 0 {
                requested += u64::from(c) * sizes[f];
                sparse.push((f as u32, c));
            }
        }

        self.policy.observe(&demand);
        self.t = t;
        self.prev_cache = cache.clone();
        Ok(PeriodRecord {
            t,
            cache,
            reward: reward as f64,
            cost: cost as f64,
            num_users: demand.num_users(),
            requested_total: requested as f64,
            num_switched,
            demand: sparse,
        })
    }
}

/// Runs `horizon` sequential periods; deterministic given `(env, seed)`.
pub fn run_episode(
    env: SimEnv<'_>,
    kind: PolicyKind,
    horizon: u64,
    seed: u64,
    fingerprint: &str,
) -> Result<EpisodeTrace> {
    let mut episode = Episode::new(env, kind, seed)?;
    let mut records = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        records.push(episode.step()?);
    }
    Ok(EpisodeTrace {
        records,
        fingerprint: fingerprint.to_string(),
        seed,
    })
}

/// Writes a trace as CSV with one row per period.
///
/// Columns: `t, policy, seed, num_users, reward, cost, requested_total,
/// cache_used, num_switched_files`.
pub fn write_trace_csv<W: Write>(trace: &EpisodeTrace, policy: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "policy",
        "seed",
        "num_users",
        "reward",
        "cost",
        "requested_total",
        "cache_used",
        "num_switched_files",
    ])?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            policy.to_string(),
            trace.seed.to_string(),
            r.num_users.to_string(),
            r.reward.to_string(),
            r.cost.to_string(),
            r.requested_total.to_string(),
            r.cache.used().to_string(),
            r.num_switched.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
