//! Regret decomposition, cache efficiency, and bad-period counters.
//!
//! Regret compares a trajectory against the informed baseline that knows the
//! popularity profile: the sampling regret accumulates the expected-reward
//! gap `alpha * beta * r_opt - r_Theta(M^t)` and the switching regret
//! accumulates replacement cost in excess of the one-time fill `M`. The
//! total regret is their `w`-weighted sum, an exact identity at every
//! period.
//!
//! Regret uses expected rewards of the realized caches (not sampled
//! rewards), which removes demand noise from the estimate.

pub mod bounds;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, PopularityProfile};
use crate::simulator::EpisodeTrace;
use crate::spo::{expected_reward, CacheContent};
use crate::{Error, Result};

/// Relative slack used when comparing rewards against `alpha * r_opt`, so a
/// measured alpha classifies the greedy solution itself as good.
pub(crate) const CLASSIFY_REL_TOL: f64 = 1e-12;

/// Good/bad label of an arm combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `r_Theta(M) >= alpha * r_opt`.
    Good,
    Bad,
}

/// Classifies a cache content against the `alpha * r_opt` threshold.
pub fn classify_good_bad(
    cache: &CacheContent,
    catalog: &Catalog,
    profile: &PopularityProfile,
    alpha: f64,
    r_opt: f64,
) -> Classification {
    let reward = expected_reward(cache, catalog, profile);
    let threshold = alpha * r_opt;
    if reward >= threshold - CLASSIFY_REL_TOL * threshold.abs() {
        Classification::Good
    } else {
        Classification::Bad
    }
}

fn check_trace(trace: &EpisodeTrace, num_files: usize) -> Result<()> {
    for r in &trace.records {
        if let Some(&f) = r.cache.files().last() {
            if f as usize >= num_files {
                return Err(Error::LengthMismatch(format!(
                    "trace references file {f} but the profile has {num_files} files"
                )));
            }
        }
    }
    Ok(())
}

/// Sampling regret series: `R_Sa(t) = t * alpha * beta * r_opt -
/// sum_{i<=t} r_Theta(M^i)`, with `r_Theta` the expected reward of the
/// realized cache under the true profile.
pub fn sampling_regret(
    trace: &EpisodeTrace,
    catalog: &Catalog,
    profile: &PopularityProfile,
    r_opt: f64,
    alpha: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    if catalog.num_files() != profile.num_files() {
        return Err(Error::LengthMismatch(
            "catalog and profile disagree on the number of files".into(),
        ));
    }
    check_trace(trace, profile.num_files())?;
    let per_period = alpha * beta * r_opt;
    let mut acc = 0.0;
    Ok(trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            acc += expected_reward(&r.cache, catalog, profile);
            (i + 1) as f64 * per_period - acc
        })
        .collect())
}

/// Switching regret series: cumulative replacement cost minus the one-time
/// fill `M`.
pub fn switching_regret(trace: &EpisodeTrace, capacity: u64) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .records
        .iter()
        .map(|r| {
            acc += r.cost;
            acc - capacity as f64
        })
        .collect()
}

/// Regret decomposition of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub sampling: Vec<f64>,
    pub switching: Vec<f64>,
    /// `total[t] = sampling[t] + w * switching[t]`, exactly.
    pub total: Vec<f64>,
    pub cum_reward: f64,
    pub cum_cost: f64,
    pub r_opt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub w: f64,
}

impl RegretLedger {
    pub fn from_trace(
        trace: &EpisodeTrace,
        catalog: &Catalog,
        profile: &PopularityProfile,
        r_opt: f64,
        alpha: f64,
        beta: f64,
        w: f64,
    ) -> Result<Self> {
        let sampling = sampling_regret(trace, catalog, profile, r_opt, alpha, beta)?;
        let switching = switching_regret(trace, catalog.capacity());
        let total = sampling
            .iter()
            .zip(&switching)
            .map(|(sa, sw)| sa + w * sw)
            .collect();
        Ok(RegretLedger {
            sampling,
            switching,
            total,
            cum_reward: trace.records.iter().map(|r| r.reward).sum(),
            cum_cost: trace.records.iter().map(|r| r.cost).sum(),
            r_opt,
            alpha,
            beta,
            w,
        })
    }
}

/// Final cache efficiency of a trace:
/// `(sum reward - w * sum cost) / sum requested`, as a fraction.
///
/// Errors when no data was requested over the horizon.
pub fn cache_efficiency(trace: &EpisodeTrace, w: f64) -> Result<f64> {
    let requested: f64 = trace.records.iter().map(|r| r.requested_total).sum();
    if requested <= 0.0 {
        return Err(Error::NoDemand);
    }
    let reward: f64 = trace.records.iter().map(|r| r.reward).sum();
    let cost: f64 = trace.records.iter().map(|r| r.cost).sum();
    Ok((reward - w * cost) / requested)
}

/// Running efficiency at every period; `None` while nothing has been
/// requested yet.
pub fn efficiency_series(trace: &EpisodeTrace, w: f64) -> Vec<Option<f64>> {
    let mut reward = 0.0;
    let mut cost = 0.0;
    let mut requested = 0.0;
    trace
        .records
        .iter()
        .map(|r| {
            reward += r.reward;
            cost += r.cost;
            requested += r.requested_total;
            (requested > 0.0).then(|| (reward - w * cost) / requested)
        })
        .collect()
}

/// Per-arm bad-period counters `N_{f,t}`.
///
/// On a bad period exactly one counter is incremented: the cached arm with
/// the smallest current count (lowest index on ties), so the counter total
/// equals the number of bad periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadPeriodCounters {
    counts: Vec<u64>,
}

impl BadPeriodCounters {
    pub fn new(num_files: usize) -> Self {
        BadPeriodCounters {
            counts: vec![0; num_files],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total bad periods so far.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Records one period. Only bad periods mutate the counters.
    pub fn observe_period(&mut self, cache: &CacheContent, class: Classification) {
        if class == Classification::Good {
            return;
        }
        let arm = cache
            .files()
            .iter()
            .copied()
            .min_by_key(|&f| (self.counts[f as usize], f))
            .map(|f| f as usize)
            // empty bad cache: charge the globally smallest counter so the
            // total still counts every bad period
            .unwrap_or_else(|| {
                (0..self.counts.len())
                    .min_by_key(|&f| (self.counts[f], f))
                    .expect("at least one file")
            });
        self.counts[arm] += 1;
    }
}

/// Series of `sum_f N_{f,t}` over a trace.
pub fn bad_period_totals(
    trace: &EpisodeTrace,
    catalog: &Catalog,
    profile: &PopularityProfile,
    alpha: f64,
    r_opt: f64,
) -> Vec<u64> {
    let mut counters = BadPeriodCounters::new(catalog.num_files());
    trace
        .records
        .iter()
        .map(|r| {
            let class = classify_good_bad(&r.cache, catalog, profile, alpha, r_opt);
            counters.observe_period(&r.cache, class);
            counters.total()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_zipf_profile;
    use crate::policies::PolicyKind;
    use crate::simulator::{run_episode, PeriodRecord, SimEnv};
    use crate::spo::{measure_alpha, solve_exact, solve_greedy};

    fn f5_instance() -> (Catalog, PopularityProfile) {
        let catalog = Catalog::new(vec![1, 1, 2, 2, 3], 4, 10).unwrap();
        let profile = build_zipf_profile(5, 0.8, 5.0, 10).unwrap();
        (catalog, profile)
    }

    /// Builds a synthetic trace that caches the same set every period.
    fn fixed_cache_trace(cache: &CacheContent, periods: u64) -> EpisodeTrace {
        let records = (1..=periods)
            .map(|t| PeriodRecord {
                t,
                cache: cache.clone(),
                reward: 0.0,
                cost: if t == 1 { cache.used() as f64 } else { 0.0 },
                num_users: 0,
                requested_total: 0.0,
                num_switched: if t == 1 { cache.len() } else { 0 },
                demand: Vec::new(),
            })
            .collect();
        EpisodeTrace {
            records,
            fingerprint: "synthetic".into(),
            seed: 0,
        }
    }

    #[test]
    fn iub_has_zero_sampling_regret_with_exact_solver() {
        let (catalog, profile) = f5_instance();
        // on this instance greedy = exact, so alpha = 1
        let rating = measure_alpha(&catalog, &profile).unwrap();
        assert_eq!(rating.alpha, 1.0);
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        let trace = run_episode(
            SimEnv::new(&catalog, &profile, 0.8),
            PolicyKind::Iub,
            200,
            3,
            "t",
        )
        .unwrap();
        let sampling = sampling_regret(&trace, &catalog, &profile, r_opt, 1.0, 1.0).unwrap();
        for (i, v) in sampling.iter().enumerate() {
            assert!(
                v.abs() < 1e-9,
                "IUB sampling regret not zero at t={}: {v}",
                i + 1
            );
        }
        let switching = switching_regret(&trace, catalog.capacity());
        for v in &switching {
            assert!(*v <= 0.0);
        }
        assert_eq!(switching[0], switching[199]);
    }

    #[test]
    fn fixed_suboptimal_cache_has_linear_sampling_regret() {
        let (catalog, profile) = f5_instance();
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        let bad = CacheContent::from_files(vec![3, 4], catalog.sizes()); // fits, suboptimal
        let trace = fixed_cache_trace(&bad, 50);
        let sampling = sampling_regret(&trace, &catalog, &profile, r_opt, 1.0, 1.0).unwrap();
        let gap = r_opt - expected_reward(&bad, &catalog, &profile);
        assert!(gap > 0.0);
        for (i, v) in sampling.iter().enumerate() {
            let t = (i + 1) as f64;
            assert!((v - t * gap).abs() < 1e-9, "t={t}: {v} vs {}", t * gap);
        }
    }

    #[test]
    fn cucbsc_sampling_regret_is_sublinear() {
        // averaged over seeds, R_Sa(t)/t shrinks as the policy learns; the
        // arm gaps here are wide enough for the confidence bonuses to
        // separate within the horizon
        let catalog = Catalog::new(vec![1, 1, 1, 1, 1], 2, 20).unwrap();
        let profile =
            PopularityProfile::new(vec![0.55, 0.35, 0.05, 0.03, 0.02], 10.0, 20).unwrap();
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        let seeds = 100u64;
        let horizon = 10_000u64;
        let mut at_1k = 0.0;
        let mut at_10k = 0.0;
        for seed in 0..seeds {
            let trace = run_episode(
                SimEnv::new(&catalog, &profile, 0.0),
                PolicyKind::CucbscConst { l: 5 },
                horizon,
                seed,
                "t",
            )
            .unwrap();
            let sampling = sampling_regret(&trace, &catalog, &profile, r_opt, 1.0, 1.0).unwrap();
            at_1k += sampling[999];
            at_10k += sampling[9999];
        }
        let slope_1k = at_1k / seeds as f64 / 1_000.0;
        let slope_10k = at_10k / seeds as f64 / 10_000.0;
        assert!(
            slope_10k < slope_1k / 2.0,
            "mean R_Sa(t)/t did not shrink: {slope_1k} -> {slope_10k}"
        );
        assert!(slope_10k < 0.05 * r_opt, "per-period regret still large");
    }

    #[test]
    fn full_replacement_switching_regret_grows_linearly() {
        let (catalog, _) = f5_instance();
        let cache = CacheContent::from_files(vec![0, 1, 2], catalog.sizes());
        let mut trace = fixed_cache_trace(&cache, 30);
        for r in &mut trace.records {
            r.cost = cache.used() as f64; // adversarial: replace everything
        }
        let sw = switching_regret(&trace, catalog.capacity());
        let m = catalog.capacity() as f64;
        for (i, v) in sw.iter().enumerate() {
            let t = (i + 1) as f64;
            assert!((v - (t * cache.used() as f64 - m)).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_identity_is_exact() {
        let (catalog, profile) = f5_instance();
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        for w in [0.0, 0.5, 1.0, 2.5] {
            let trace = run_episode(
                SimEnv::new(&catalog, &profile, 0.8),
                PolicyKind::EpsGreedy { epsilon: 0.3 },
                300,
                17,
                "t",
            )
            .unwrap();
            let ledger =
                RegretLedger::from_trace(&trace, &catalog, &profile, r_opt, 1.0, 1.0, w).unwrap();
            for i in 0..ledger.total.len() {
                assert_eq!(
                    ledger.total[i],
                    ledger.sampling[i] + w * ledger.switching[i],
                    "identity broken at index {i} (w={w})"
                );
            }
        }
    }

    #[test]
    fn efficiency_guard_and_adversarial_sign() {
        let (catalog, profile) = f5_instance();
        // zero-demand horizon with an empty cache: undefined efficiency
        let empty = fixed_cache_trace(&CacheContent::empty(), 10);
        assert!(matches!(cache_efficiency(&empty, 1.0), Err(Error::NoDemand)));

        // full replacement every period with zero demand but nonzero
        // requested data elsewhere: negative efficiency
        let cache = CacheContent::from_files(vec![0, 1], catalog.sizes());
        let mut trace = fixed_cache_trace(&cache, 10);
        for r in &mut trace.records {
            r.cost = cache.used() as f64;
            r.requested_total = 5.0;
            r.reward = 0.0;
        }
        let eff = cache_efficiency(&trace, 1.0).unwrap();
        assert!(eff < 0.0);
        let _ = profile;
    }

    #[test]
    fn iub_uniform_efficiency_matches_relative_cache_size() {
        // uniform popularity: efficiency ~ M / total_size regardless of the
        // cached set's composition
        let sizes: Vec<u64> = (0..8).flat_map(|i| vec![1u64 << i; 5]).collect();
        let catalog = Catalog::new(sizes, 64, 20).unwrap();
        let profile = build_zipf_profile(40, 0.0, 10.0, 20).unwrap();
        let trace = run_episode(
            SimEnv::new(&catalog, &profile, 0.0),
            PolicyKind::Iub,
            20_000,
            5,
            "t",
        )
        .unwrap();
        let eff = cache_efficiency(&trace, 1.0).unwrap();
        let relative = catalog.capacity() as f64 / catalog.total_size() as f64;
        assert!(
            (eff - relative).abs() < 0.01,
            "efficiency {eff} vs relative size {relative}"
        );
    }

    #[test]
    fn classification_examples() {
        let (catalog, profile) = f5_instance();
        let exact = solve_exact(profile.theta(), &catalog).unwrap();
        let r_opt = expected_reward(&exact, &catalog, &profile);
        // the exact-optimal cache is good for any alpha <= 1
        for alpha in [0.2, 0.7692, 1.0] {
            assert_eq!(
                classify_good_bad(&exact, &catalog, &profile, alpha, r_opt),
                Classification::Good
            );
        }
        // the empty cache is bad whenever alpha * r_opt > 0
        assert_eq!(
            classify_good_bad(&CacheContent::empty(), &catalog, &profile, 0.5, r_opt),
            Classification::Bad
        );
        // the measured-alpha greedy solution always classifies good
        let greedy = solve_greedy(profile.theta(), &catalog);
        let rating = measure_alpha(&catalog, &profile).unwrap();
        assert_eq!(
            classify_good_bad(&greedy, &catalog, &profile, rating.alpha, r_opt),
            Classification::Good
        );
    }

    #[test]
    fn classification_agrees_with_enumeration_on_f3() {
        let catalog = Catalog::new(vec![2, 2, 1], 3, 10).unwrap();
        let theta = [0.5, 0.4, 0.3];
        let sum: f64 = theta.iter().sum();
        let probs: Vec<f64> = theta.iter().map(|t| t / sum).collect();
        let profile = PopularityProfile::new(probs, 5.0, 10).unwrap();
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        let alpha = measure_alpha(&catalog, &profile).unwrap().alpha;
        let mut good = 0;
        let mut bad = 0;
        for mask in 0u32..8 {
            let files: Vec<u32> = (0..3).filter(|f| mask >> f & 1 == 1).collect();
            let cache = CacheContent::from_files(files, catalog.sizes());
            if cache.used() > catalog.capacity() {
                continue;
            }
            // independent classification: direct reward comparison
            let reward = expected_reward(&cache, &catalog, &profile);
            let expect = if reward >= alpha * r_opt - 1e-12 {
                Classification::Good
            } else {
                Classification::Bad
            };
            let got = classify_good_bad(&cache, &catalog, &profile, alpha, r_opt);
            assert_eq!(got, expect, "mask {mask}");
            match got {
                Classification::Good => good += 1,
                Classification::Bad => bad += 1,
            }
        }
        assert!(good >= 1);
        assert!(bad >= 1);
    }

    #[test]
    fn bad_period_counters_sum_to_bad_periods() {
        let (catalog, profile) = f5_instance();
        let r_opt = expected_reward(
            &solve_exact(profile.theta(), &catalog).unwrap(),
            &catalog,
            &profile,
        );
        let trace = run_episode(
            SimEnv::new(&catalog, &profile, 0.8),
            PolicyKind::CucbscConst { l: 5 },
            500,
            9,
            "t",
        )
        .unwrap();
        let totals = bad_period_totals(&trace, &catalog, &profile, 1.0, r_opt);
        // recount independently
        let mut expected = 0u64;
        for (r, &total) in trace.records.iter().zip(&totals) {
            if classify_good_bad(&r.cache, &catalog, &profile, 1.0, r_opt) == Classification::Bad {
                expected += 1;
            }
            assert_eq!(total, expected);
        }
        assert!(expected > 0, "initialization periods should be bad");
    }

    #[test]
    fn counter_tie_break_prefers_low_index() {
        let mut counters = BadPeriodCounters::new(3);
        let sizes = [1u64, 1, 1];
        let cache = CacheContent::from_files(vec![1, 2], &sizes);
        counters.observe_period(&cache, Classification::Bad);
        assert_eq!(counters.counts(), &[0, 1, 0]);
        counters.observe_period(&cache, Classification::Bad);
        assert_eq!(counters.counts(), &[0, 1, 1]);
        counters.observe_period(&cache, Classification::Bad);
        assert_eq!(counters.counts(), &[0, 2, 1]);
        counters.observe_period(&cache, Classification::Good);
        assert_eq!(counters.total(), 3);
    }
}
