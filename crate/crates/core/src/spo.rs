//! Single-period optimization: which files to cache given value estimates.
//!
//! The problem is a 0/1 knapsack: maximize `sum_{f in M} S_f * theta_f`
//! subject to `sum_{f in M} S_f <= M`. Two solvers are provided:
//!
//! - [`solve_greedy`]: sorts files by estimated popularity and caches whole
//!   files until the first one that does not fit, mirroring the LP-relaxation
//!   argument that discards the single fractional file. This is the
//!   (alpha, beta)-solver used by every policy (beta = 1, alpha measured).
//! - [`solve_exact`]: integer-capacity dynamic programming, used as the test
//!   oracle and for regret baselines on instances within a table budget.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, PopularityProfile};
use crate::{Error, Result};

/// Default cap on `(F + 1) * (M + 1)` DP table entries for the exact solver.
pub const DEFAULT_DP_BUDGET: usize = 16_000_000;

/// A feasible cache content: a duplicate-free set of file indices plus the
/// storage it occupies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheContent {
    files: Vec<u32>,
    used: u64,
}

impl CacheContent {
    pub fn empty() -> Self {
        CacheContent {
            files: Vec::new(),
            used: 0,
        }
    }

    /// Builds from arbitrary-order indices; sorts and computes `used`.
    pub fn from_files(mut files: Vec<u32>, sizes: &[u64]) -> Self {
        files.sort_unstable();
        files.dedup();
        let used = files.iter().map(|&f| sizes[f as usize]).sum();
        CacheContent { files, used }
    }

    /// Cached file indices in ascending order.
    pub fn files(&self) -> &[u32] {
        &self.files
    }

    /// Total storage units occupied.
    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn contains(&self, file: u32) -> bool {
        self.files.binary_search(&file).is_ok()
    }

    /// Replacement cost of moving from `prev` to `self`: the summed size of
    /// files present here but not in `prev`.
    pub fn switch_cost(&self, prev: &CacheContent, sizes: &[u64]) -> u64 {
        self.files
            .iter()
            .filter(|&&f| !prev.contains(f))
            .map(|&f| sizes[f as usize])
            .sum()
    }

    /// Number of newly added files relative to `prev`.
    pub fn num_switched(&self, prev: &CacheContent) -> usize {
        self.files.iter().filter(|&&f| !prev.contains(f)).count()
    }
}

/// Greedy iteration behavior at the first file that does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyMode {
    /// Stop at the first non-fitting file (discard the fractional file of
    /// the LP relaxation). Used for all paper-reproduction runs.
    StopAtBlocker,
    /// Skip non-fitting files and keep trying smaller ones. Experimental
    /// variant, reachable only through configuration.
    SkipBlocked,
}

/// Quality rating of the greedy solver on one instance.
///
/// The greedy output is, with probability `beta`, at least `alpha` times the
/// optimal reward; the deterministic greedy solver has `beta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverRating {
    pub alpha: f64,
    pub beta: f64,
}

/// Core greedy selection over raw sizes, usable with degenerate inputs
/// (empty catalog, zero capacity).
///
/// Files are ranked by `theta` descending with ties broken by lower index,
/// then added whole while they fit.
pub fn greedy_select(theta: &[f64], sizes: &[u64], capacity: u64, mode: GreedyMode) -> CacheContent {
    debug_assert_eq!(theta.len(), sizes.len());
    let mut order: Vec<u32> = (0..theta.len() as u32).collect();
    order.sort_by(|&a, &b| {
        theta[b as usize]
            .partial_cmp(&theta[a as usize])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut files = Vec::new();
    let mut used = 0u64;
    for f in order {
        let s = sizes[f as usize];
        if used + s <= capacity {
            files.push(f);
            used += s;
        } else if mode == GreedyMode::StopAtBlocker {
            break;
        }
    }
    files.sort_unstable();
    CacheContent { files, used }
}

/// Greedy (alpha, beta)-solver on a catalog; stops at the first blocker.
pub fn solve_greedy(theta: &[f64], catalog: &Catalog) -> CacheContent {
    greedy_select(theta, catalog.sizes(), catalog.capacity(), GreedyMode::StopAtBlocker)
}

/// Exact 0/1 knapsack over integer capacities with an explicit table budget.
///
/// Returns the lexicographically smallest optimal set: walking files in
/// index order, a file is included whenever doing so still achieves the
/// optimum. Errors if `(F + 1) * (M + 1)` exceeds `budget`.
pub fn exact_select(
    theta: &[f64],
    sizes: &[u64],
    capacity: u64,
    budget: usize,
) -> Result<CacheContent> {
    debug_assert_eq!(theta.len(), sizes.len());
    let f_count = theta.len();
    if f_count == 0 || capacity == 0 {
        return Ok(CacheContent::empty());
    }
    let width = usize::try_from(capacity)
        .ok()
        .and_then(|c| c.checked_add(1))
        .ok_or_else(|| Error::InvalidArgument("capacity too large for DP".into()))?;
    let entries = (f_count + 1).checked_mul(width).ok_or(Error::DpBudget {
        files: f_count,
        capacity,
        budget,
    })?;
    if entries > budget {
        return Err(Error::DpBudget {
            files: f_count,
            capacity,
            budget,
        });
    }

    // best[f][c] = optimal value over files f..F with capacity c, stored as a
    // suffix table so the reconstruction can fix small indices first.
    let mut best = vec![0.0f64; entries];
    for f in (0..f_count).rev() {
        let s = sizes[f] as usize;
        let v = sizes[f] as f64 * theta[f];
        let (row, next) = best[f * width..].split_at_mut(width);
        for c in 0..width {
            let skip = next[c];
            row[c] = if s <= c {
                let take = v + next[c - s];
                if take >= skip {
                    take
                } else {
                    skip
                }
            } else {
                skip
            };
        }
    }

    let mut files = Vec::new();
    let mut used = 0u64;
    let mut c = width - 1;
    for f in 0..f_count {
        let s = sizes[f] as usize;
        if s <= c {
            let take = sizes[f] as f64 * theta[f] + best[(f + 1) * width + (c - s)];
            let skip = best[(f + 1) * width + c];
            // prefer inclusion on ties: yields the lexicographically
            // smallest optimal set
            if take >= skip {
                files.push(f as u32);
                used += sizes[f];
                c -= s;
            }
        }
    }
    Ok(CacheContent { files, used })
}

/// Exact solver on a catalog with the default table budget.
pub fn solve_exact(theta: &[f64], catalog: &Catalog) -> Result<CacheContent> {
    exact_select(theta, catalog.sizes(), catalog.capacity(), DEFAULT_DP_BUDGET)
}

/// Expected per-period reward of a cache under the true profile:
/// `r_Theta(M) = U * sum_{f in M} S_f * theta_f`.
///
/// This is the canonical summation used for `r_opt`, alpha measurement, and
/// good/bad classification, so equal sets always produce bit-equal rewards.
pub fn expected_reward(cache: &CacheContent, catalog: &Catalog, profile: &PopularityProfile) -> f64 {
    let theta = profile.theta();
    let per_user: f64 = cache
        .files()
        .iter()
        .map(|&f| catalog.size(f as usize) as f64 * theta[f as usize])
        .sum();
    f64::from(catalog.max_users()) * per_user
}

/// Measures the greedy solver's approximation ratio on one instance:
/// `alpha = reward(greedy) / reward(exact)`, `beta = 1`.
pub fn measure_alpha(catalog: &Catalog, profile: &PopularityProfile) -> Result<SolverRating> {
    let greedy = solve_greedy(profile.theta(), catalog);
    let exact = solve_exact(profile.theta(), catalog)?;
    let r_greedy = expected_reward(&greedy, catalog, profile);
    let r_exact = expected_reward(&exact, catalog, profile);
    let alpha = if r_exact > 0.0 { r_greedy / r_exact } else { 1.0 };
    Ok(SolverRating { alpha, beta: 1.0 })
}
