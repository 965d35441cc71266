//! File universe and stochastic per-period demand generation.
//!
//! A [`Catalog`] fixes the file sizes, cache capacity, and the maximum number
//! of users served per period. A [`PopularityProfile`] holds the mean
//! normalized demand `theta_f` of every file together with the per-request
//! file choice distribution. Demands are realized per period by
//! [`sample_demand`]: a uniform random number of users each independently
//! request one file, and the demand for file `f` is the request count
//! normalized by the maximum user count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The file universe: sizes, cache capacity, and user bound.
///
/// Immutable after construction; safe to share across threads. A file larger
/// than the capacity is allowed here (it simply can never be cached), but
/// bandit policies reject such catalogs at initialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    sizes: Vec<u64>,
    capacity: u64,
    max_users: u32,
    total_size: u64,
}

impl Catalog {
    /// Builds a catalog, validating `F >= 1`, every `S_f >= 1`, `M >= 1`.
    pub fn new(sizes: Vec<u64>, capacity: u64, max_users: u32) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::config("num_files", "catalog must contain at least one file"));
        }
        if let Some(f) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::config(
                "size_classes",
                format!("file {f} has size 0; sizes must be positive integers"),
            ));
        }
        if capacity == 0 {
            return Err(Error::config("capacity", "cache capacity must be >= 1"));
        }
        let total_size = sizes.iter().sum();
        Ok(Catalog {
            sizes,
            capacity,
            max_users,
            total_size,
        })
    }

    pub fn num_files(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn size(&self, file: usize) -> u64 {
        self.sizes[file]
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn max_users(&self) -> u32 {
        self.max_users
    }

    /// Total size of all files, computed once at construction.
    pub fn total_size(&self) -> u64 {
        self.total_size
    }
}

/// Mean demand profile `Theta` plus the generative request distribution.
///
/// The built-in demand model draws the user count uniformly from the
/// integers `{0..U}` and lets each user request file `f` with probability
/// `request_probs[f]`, which yields the identity
/// `theta_f = (mean_users / U) * request_probs[f]`. Theta is always derived
/// from the generative model, never configured directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityProfile {
    theta: Vec<f64>,
    request_probs: Vec<f64>,
    mean_users: f64,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl PopularityProfile {
    /// Builds a profile from a request distribution and a mean user count.
    ///
    /// `request_probs` must sum to 1 within 1e-12 and `mean_users` must lie
    /// in `[0, max_users]`.
    pub fn new(request_probs: Vec<f64>, mean_users: f64, max_users: u32) -> Result<Self> {
        if request_probs.is_empty() {
            return Err(Error::config("num_files", "profile needs at least one file"));
        }
        if request_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::config(
                "request_probs",
                "every request probability must lie in [0, 1]",
            ));
        }
        let sum: f64 = request_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "request_probs",
                format!("request probabilities sum to {sum}, expected 1 within 1e-12"),
            ));
        }
        if !(0.0..=f64::from(max_users)).contains(&mean_users) {
            return Err(Error::config(
                "mean_users",
                format!("mean user count {mean_users} outside [0, {max_users}]"),
            ));
        }
        let user_fraction = if max_users == 0 {
            0.0
        } else {
            mean_users / f64::from(max_users)
        };
        let theta = request_probs.iter().map(|&p| user_fraction * p).collect();
        let cdf = cumulative(&request_probs);
        Ok(PopularityProfile {
            theta,
            request_probs,
            mean_users,
            cdf,
        })
    }

    pub fn num_files(&self) -> usize {
        self.theta.len()
    }

    /// True mean normalized demand per file (`theta_f`).
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn request_probs(&self) -> &[f64] {
        &self.request_probs
    }

    /// Mean number of users per period (`U-bar`).
    pub fn mean_users(&self) -> f64 {
        self.mean_users
    }

    /// Draws one file index from the request distribution.
    fn draw_file(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        // partition_point returns the first index with cdf > u
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

/// Builds a Zipf-like popularity profile with skewness `rho`.
///
/// File index 0 is the most popular: `request_probs[f] proportional to
/// (f+1)^(-rho)`, normalized over the catalog. `theta` follows from the
/// demand-model identity.
pub fn build_zipf_profile(
    num_files: usize,
    rho: f64,
    mean_users: f64,
    max_users: u32,
) -> Result<PopularityProfile> {
    if num_files == 0 {
        return Err(Error::config("num_files", "Zipf profile needs at least one file"));
    }
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::config("zipf_rho", "skewness must be finite and >= 0"));
    }
    let weights: Vec<f64> = (1..=num_files).map(|k| (k as f64).powf(-rho)).collect();
    // accumulate smallest terms first to limit rounding error
    let norm: f64 = weights.iter().rev().sum();
    let probs = weights.iter().map(|w| w / norm).collect();
    PopularityProfile::new(probs, mean_users, max_users)
}

/// One period's realized demand, stored as integer request counts.
///
/// `demand(f) = counts[f] / U`, so `U * sum_f demand(f) == num_users` holds
/// exactly as an integer identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandVector {
    counts: Vec<u32>,
    max_users: u32,
}

impl DemandVector {
    pub fn new(counts: Vec<u32>, max_users: u32) -> Self {
        DemandVector { counts, max_users }
    }

    pub fn num_files(&self) -> usize {
        self.counts.len()
    }

    /// Number of users who issued a request this period.
    pub fn num_users(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Request counts per file.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Normalized demand `d_f in [0, 1]`.
    pub fn demand(&self, file: usize) -> f64 {
        if self.max_users == 0 {
            0.0
        } else {
            f64::from(self.counts[file]) / f64::from(self.max_users)
        }
    }

    pub fn demands(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|f| self.demand(f)).collect()
    }
}

/// Samples one period of demand.
///
/// The user count is uniform on the integers `{0, 1, ..., U}` and each user
/// independently requests file `f` with probability `request_probs[f]`.
pub fn sample_demand(
    profile: &PopularityProfile,
    catalog: &Catalog,
    rng: &mut impl Rng,
) -> DemandVector {
    debug_assert_eq!(profile.num_files(), catalog.num_files());
    let max_users = catalog.max_users();
    let mut counts = vec![0u32; profile.num_files()];
    if max_users > 0 {
        let num_users = rng.gen_range(0..=max_users);
        for _ in 0..num_users {
            counts[profile.draw_file(rng)] += 1;
        }
    }
    DemandVector::new(counts, max_users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zipf_two_files_rho_one() {
        let p = build_zipf_profile(2, 1.0, 1.0, 1).unwrap();
        assert!((p.request_probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.request_probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zipf_rho_zero_is_uniform() {
        let p = build_zipf_profile(5, 0.0, 2.0, 4).unwrap();
        for &q in p.request_probs() {
            assert!((q - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zipf_head_mass_f400() {
        // Independent series-summation oracle: 1 / sum_{k=1..400} k^-0.56
        // accumulated smallest-first, cross-checked against a 40-digit
        // computation frozen below.
        let mut norm = 0.0f64;
        for k in (1..=400u32).rev() {
            norm += f64::from(k).powf(-0.56);
        }
        let oracle = 1.0 / norm;
        let p = build_zipf_profile(400, 0.56, 25.0, 50).unwrap();
        assert!((p.request_probs()[0] - oracle).abs() < 1e-15);
        assert!((p.request_probs()[0] - 0.033_313_571_322_986_06).abs() < 1e-15);
    }

    #[test]
    fn zipf_theta_identity() {
        let p = build_zipf_profile(7, 0.56, 25.0, 50).unwrap();
        for f in 0..7 {
            let expected = 25.0 / 50.0 * p.request_probs()[f];
            assert!((p.theta()[f] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zipf_head_mass_monotone_in_rho() {
        let mut last = 0.0;
        for i in 0..30 {
            let rho = 0.1 * f64::from(i);
            let p = build_zipf_profile(50, rho, 1.0, 2).unwrap();
            assert!(
                p.request_probs()[0] >= last,
                "head mass decreased at rho={rho}"
            );
            last = p.request_probs()[0];
        }
    }

    #[test]
    fn zipf_rejects_bad_inputs() {
        assert!(build_zipf_profile(0, 1.0, 0.0, 1).is_err());
        assert!(build_zipf_profile(3, 1.0, 5.0, 4).is_err());
        assert!(build_zipf_profile(3, -1.0, 1.0, 4).is_err());
    }

    #[test]
    fn catalog_validation() {
        assert!(Catalog::new(vec![], 4, 1).is_err());
        assert!(Catalog::new(vec![1, 0], 4, 1).is_err());
        assert!(Catalog::new(vec![1, 2], 0, 1).is_err());
        let c = Catalog::new(vec![1, 2, 3], 2, 5).unwrap();
        assert_eq!(c.total_size(), 6);
        // a file larger than the capacity is allowed at this layer
        assert_eq!(c.size(2), 3);
    }

    #[test]
    fn demand_zero_users() {
        let catalog = Catalog::new(vec![1, 1], 1, 0).unwrap();
        let profile = PopularityProfile::new(vec![0.5, 0.5], 0.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = sample_demand(&profile, &catalog, &mut rng);
        assert_eq!(d.num_users(), 0);
        assert_eq!(d.demands(), vec![0.0, 0.0]);
    }

    #[test]
    fn demand_point_mass() {
        let catalog = Catalog::new(vec![1, 1, 1], 1, 20).unwrap();
        let profile = PopularityProfile::new(vec![1.0, 0.0, 0.0], 10.0, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = sample_demand(&profile, &catalog, &mut rng);
            assert_eq!(d.counts()[1], 0);
            assert_eq!(d.counts()[2], 0);
            assert_eq!(d.counts()[0], d.num_users());
            assert!((d.demand(0) - f64::from(d.num_users()) / 20.0).abs() < 1e-15);
        }
    }

    #[test]
    fn demand_integer_identity() {
        let catalog = Catalog::new(vec![1, 2, 4], 4, 13).unwrap();
        let profile = build_zipf_profile(3, 0.9, 6.5, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = sample_demand(&profile, &catalog, &mut rng);
            let total: u32 = d.counts().iter().sum();
            assert_eq!(total, d.num_users());
            assert!(d.num_users() <= 13);
            assert!(d.demands().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn demand_long_run_mean_matches_theta() {
        // Monte-Carlo check of theta_f = (U-bar/U) p_f at three standard errors.
        let max_users = 50;
        let catalog = Catalog::new(vec![1, 1, 1], 1, max_users).unwrap();
        let profile = build_zipf_profile(3, 0.0, 25.0, max_users).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20240517);
        let periods = 100_000usize;
        let mut sums = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        for _ in 0..periods {
            let d = sample_demand(&profile, &catalog, &mut rng);
            for f in 0..3 {
                let x = d.demand(f);
                sums[f] += x;
                sq[f] += x * x;
            }
        }
        for f in 0..3 {
            let mean = sums[f] / periods as f64;
            let var = sq[f] / periods as f64 - mean * mean;
            let se = (var / periods as f64).sqrt();
            let want = profile.theta()[f];
            assert!(
                (mean - want).abs() <= 3.0 * se,
                "file {f}: mean {mean} vs theta {want} (se {se})"
            );
        }
    }
}
