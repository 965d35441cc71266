//! Experiment configuration: flat TOML keys, validation, and sweeps.
//!
//! A configuration describes one experiment: the catalog (`size_classes`,
//! `capacity`, `max_users`, `size_layout`), the demand model (`zipf_rho`),
//! the run shape (`horizon`, `replicates`, `w`, `seed_base`), the policy
//! list with shared parameters (`L`, `gamma`, `epsilon`, `delta_refresh`),
//! and an optional sweep axis with its grid. Defaults reproduce the
//! reference experiment: M = 512 units, eight file-size classes `2^i` of 50
//! files each (total 12750 units, so the cache holds about 4%), U = 50,
//! rho = 0.56, w = 1, a horizon of 50000 periods, and 500 replicates.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{build_zipf_profile, Catalog, PopularityProfile};
use crate::policies::{PolicyKind, SolverKind};
use crate::spo::GreedyMode;
use crate::{Error, Result};

/// How size classes map onto popularity ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeLayout {
    /// Classes occupy consecutive rank blocks in listed order (the default:
    /// listing classes by ascending size puts small files at popular ranks).
    Blocks,
    /// Classes are interleaved round-robin across ranks so every class spans
    /// the popularity range.
    Interleave,
}

/// Sweep axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    None,
    /// Vary the Zipf skewness.
    Rho,
    /// Vary the cache capacity (storage units).
    Capacity,
    /// Vary the mean user count; the maximum scales as `U = 2 * mean`.
    MeanUsers,
    /// Vary the number of files; capacity rescales to keep the relative
    /// cache size fixed.
    NumFiles,
}

fn default_num_files() -> Option<usize> {
    None
}

fn default_size_classes() -> Vec<(u64, usize)> {
    (0..8).map(|i| (1u64 << i, 50)).collect()
}

fn default_capacity() -> u64 {
    512
}

fn default_max_users() -> u32 {
    50
}

fn default_zipf_rho() -> f64 {
    0.56
}

fn default_size_layout() -> SizeLayout {
    SizeLayout::Blocks
}

fn default_horizon() -> u64 {
    50_000
}

fn default_replicates() -> usize {
    500
}

fn default_w() -> f64 {
    1.0
}

fn default_seed_base() -> u64 {
    1729
}

fn default_policy() -> Option<String> {
    None
}

fn default_policies() -> Vec<String> {
    [
        "cucb",
        "cucbsc-L",
        "cucbsc-sqrt",
        "eps-greedy",
        "delta-eps-greedy",
        "mcucbsc-L",
        "mcucbsc-sqrt",
        "delta-myopic",
        "iub",
    ]
    .map(str::to_string)
    .to_vec()
}

fn default_l() -> u64 {
    10
}

fn default_gamma() -> f64 {
    2.0
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta_refresh() -> u64 {
    10
}

fn default_solver() -> SolverKind {
    SolverKind::Greedy
}

fn default_greedy_skip_blocked() -> bool {
    false
}

fn default_sweep() -> SweepAxis {
    SweepAxis::None
}

fn default_sweep_grid() -> Vec<f64> {
    Vec::new()
}

/// One experiment: catalog, demand model, policies, and sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional cross-check; must equal the sum of class counts when set.
    #[serde(default = "default_num_files", skip_serializing_if = "Option::is_none")]
    pub num_files: Option<usize>,
    /// `(size, count)` pairs.
    #[serde(default = "default_size_classes")]
    pub size_classes: Vec<(u64, usize)>,
    #[serde(default = "default_capacity")]
    pub capacity: u64,
    #[serde(default = "default_max_users")]
    pub max_users: u32,
    #[serde(default = "default_zipf_rho")]
    pub zipf_rho: f64,
    #[serde(default = "default_size_layout")]
    pub size_layout: SizeLayout,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_w")]
    pub w: f64,
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    /// Single-policy shorthand; merged in front of `policies` when set.
    #[serde(default = "default_policy", skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default = "default_policies")]
    pub policies: Vec<String>,
    /// Constant switching gap for `cucbsc-L` / `mcucbsc-L`.
    #[serde(rename = "L", default = "default_l")]
    pub l: u64,
    /// Sqrt-schedule coefficient for `cucbsc-sqrt` / `mcucbsc-sqrt`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Exploration probability for the greedy family.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Refresh interval for `delta-eps-greedy` / `delta-myopic`.
    #[serde(default = "default_delta_refresh")]
    pub delta_refresh: u64,
    /// SPO solver used by all policies.
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    /// Experimental greedy variant that skips the blocking file.
    #[serde(default = "default_greedy_skip_blocked")]
    pub greedy_skip_blocked: bool,
    #[serde(default = "default_sweep")]
    pub sweep: SweepAxis,
    #[serde(default = "default_sweep_grid")]
    pub sweep_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_files: default_num_files(),
            size_classes: default_size_classes(),
            capacity: default_capacity(),
            max_users: default_max_users(),
            zipf_rho: default_zipf_rho(),
            size_layout: default_size_layout(),
            horizon: default_horizon(),
            replicates: default_replicates(),
            w: default_w(),
            seed_base: default_seed_base(),
            policy: default_policy(),
            policies: default_policies(),
            l: default_l(),
            gamma: default_gamma(),
            epsilon: default_epsilon(),
            delta_refresh: default_delta_refresh(),
            solver: default_solver(),
            greedy_skip_blocked: default_greedy_skip_blocked(),
            sweep: default_sweep(),
            sweep_grid: default_sweep_grid(),
        }
    }
}

impl ExperimentConfig {
    /// The reference experiment configuration (see the module docs).
    pub fn paper_defaults() -> Self {
        Self::default()
    }

    /// Parses a TOML string; unknown keys are rejected with a span
    /// diagnostic.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Total size of all files in the catalog.
    pub fn total_size(&self) -> u64 {
        self.size_classes
            .iter()
            .map(|&(size, count)| size * count as u64)
            .sum()
    }

    fn num_files_from_classes(&self) -> usize {
        self.size_classes.iter().map(|&(_, count)| count).sum()
    }

    /// Fails fast with the offending key's name.
    pub fn validate(&self) -> Result<()> {
        if self.size_classes.is_empty() {
            return Err(Error::config("size_classes", "must not be empty"));
        }
        for &(size, count) in &self.size_classes {
            if size == 0 {
                return Err(Error::config("size_classes", "file sizes must be >= 1"));
            }
            if count == 0 {
                return Err(Error::config("size_classes", "class counts must be >= 1"));
            }
        }
        if let Some(n) = self.num_files {
            let from_classes = self.num_files_from_classes();
            if n != from_classes {
                return Err(Error::config(
                    "num_files",
                    format!("{n} disagrees with the {from_classes} files in size_classes"),
                ));
            }
        }
        if self.capacity == 0 {
            return Err(Error::config("capacity", "must be >= 1"));
        }
        if !self.zipf_rho.is_finite() || self.zipf_rho < 0.0 {
            return Err(Error::config("zipf_rho", "must be finite and >= 0"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be >= 1"));
        }
        if !self.w.is_finite() {
            return Err(Error::config("w", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon", "must lie in [0, 1]"));
        }
        if self.l == 0 {
            return Err(Error::config("L", "must be >= 1"));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::config("gamma", "must be finite and > 0"));
        }
        if self.delta_refresh == 0 {
            return Err(Error::config("delta_refresh", "must be >= 1"));
        }
        let names = self.policy_names();
        if names.is_empty() {
            return Err(Error::config("policies", "must name at least one policy"));
        }
        for name in &names {
            self.parse_policy(name)?;
        }
        match self.sweep {
            SweepAxis::None => {}
            _ => {
                if self.sweep_grid.is_empty() {
                    return Err(Error::config(
                        "sweep_grid",
                        "must not be empty when a sweep axis is set",
                    ));
                }
                for &v in &self.sweep_grid {
                    self.check_sweep_value(v)?;
                }
            }
        }
        Ok(())
    }

    fn check_sweep_value(&self, v: f64) -> Result<()> {
        match self.sweep {
            SweepAxis::None => Ok(()),
            SweepAxis::Rho => {
                if !v.is_finite() || v < 0.0 {
                    Err(Error::config("sweep_grid", "rho values must be >= 0"))
                } else {
                    Ok(())
                }
            }
            SweepAxis::Capacity => {
                if v < 1.0 || v.fract() != 0.0 {
                    Err(Error::config(
                        "sweep_grid",
                        "capacity values must be positive integers",
                    ))
                } else {
                    Ok(())
                }
            }
            SweepAxis::MeanUsers => {
                let u = 2.0 * v;
                if v <= 0.0 || (u - u.round()).abs() > 1e-9 || u.round() < 1.0 {
                    Err(Error::config(
                        "sweep_grid",
                        "mean-user values must be positive half-integers (U = 2 * mean)",
                    ))
                } else {
                    Ok(())
                }
            }
            SweepAxis::NumFiles => {
                if v < 1.0 || v.fract() != 0.0 {
                    Err(Error::config(
                        "sweep_grid",
                        "file counts must be positive integers",
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The effective policy list: the `policy` shorthand, then `policies`,
    /// deduplicated in order.
    pub fn policy_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if let Some(p) = &self.policy {
            names.push(p.clone());
        }
        for p in &self.policies {
            if !names.contains(p) {
                names.push(p.clone());
            }
        }
        names
    }

    /// Maps a policy name to a kind using this config's parameters.
    pub fn parse_policy(&self, name: &str) -> Result<PolicyKind> {
        match name {
            "cucb" => Ok(PolicyKind::Cucb),
            "cucbsc-L" => Ok(PolicyKind::CucbscConst { l: self.l }),
            "cucbsc-sqrt" => Ok(PolicyKind::CucbscSqrt { gamma: self.gamma }),
            "mcucbsc-L" => Ok(PolicyKind::McucbscConst { l: self.l }),
            "mcucbsc-sqrt" => Ok(PolicyKind::McucbscSqrt { gamma: self.gamma }),
            "eps-greedy" => Ok(PolicyKind::EpsGreedy {
                epsilon: self.epsilon,
            }),
            "delta-eps-greedy" => Ok(PolicyKind::DeltaEpsGreedy {
                delta: self.delta_refresh,
                epsilon: self.epsilon,
            }),
            "delta-myopic" => Ok(PolicyKind::DeltaMyopic {
                delta: self.delta_refresh,
            }),
            "iub" => Ok(PolicyKind::Iub),
            other => Err(Error::config(
                "policies",
                format!(
                    "unknown policy `{other}`; expected one of cucb, cucbsc-L, cucbsc-sqrt, \
                     mcucbsc-L, mcucbsc-sqrt, eps-greedy, delta-eps-greedy, delta-myopic, iub"
                ),
            )),
        }
    }

    /// File sizes laid out over popularity ranks.
    pub fn file_sizes(&self) -> Vec<u64> {
        let total = self.num_files_from_classes();
        match self.size_layout {
            SizeLayout::Blocks => self
                .size_classes
                .iter()
                .flat_map(|&(size, count)| std::iter::repeat_n(size, count))
                .collect(),
            SizeLayout::Interleave => {
                let mut remaining: Vec<usize> =
                    self.size_classes.iter().map(|&(_, c)| c).collect();
                let mut sizes = Vec::with_capacity(total);
                let mut class = 0usize;
                while sizes.len() < total {
                    if remaining[class] > 0 {
                        sizes.push(self.size_classes[class].0);
                        remaining[class] -= 1;
                    }
                    class = (class + 1) % self.size_classes.len();
                }
                sizes
            }
        }
    }

    pub fn catalog(&self) -> Result<Catalog> {
        Catalog::new(self.file_sizes(), self.capacity, self.max_users)
    }

    /// Mean user count of the uniform-integer demand model: `U / 2`.
    pub fn mean_users(&self) -> f64 {
        f64::from(self.max_users) / 2.0
    }

    pub fn profile(&self) -> Result<PopularityProfile> {
        build_zipf_profile(
            self.num_files_from_classes(),
            self.zipf_rho,
            self.mean_users(),
            self.max_users,
        )
    }

    pub fn greedy_mode(&self) -> GreedyMode {
        if self.greedy_skip_blocked {
            GreedyMode::SkipBlocked
        } else {
            GreedyMode::StopAtBlocker
        }
    }

    /// Stable hex fingerprint of the full configuration.
    pub fn fingerprint(&self) -> String {
        let text = self.to_toml_string().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Expands the sweep axis into labeled per-point configurations.
    ///
    /// The `num-files` sweep distributes files evenly over the size classes
    /// (remainder to the earlier classes) and rescales the capacity to keep
    /// the configured relative cache size, rounded to the nearest unit.
    pub fn sweep_points(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        let mut points = Vec::new();
        match self.sweep {
            SweepAxis::None => points.push(("none".to_string(), self.clone())),
            SweepAxis::Rho => {
                for &v in &self.sweep_grid {
                    let mut cfg = self.clone();
                    cfg.zipf_rho = v;
                    points.push((format!("rho={v}"), cfg));
                }
            }
            SweepAxis::Capacity => {
                for &v in &self.sweep_grid {
                    let mut cfg = self.clone();
                    cfg.capacity = v as u64;
                    points.push((format!("capacity={v}"), cfg));
                }
            }
            SweepAxis::MeanUsers => {
                for &v in &self.sweep_grid {
                    let mut cfg = self.clone();
                    cfg.max_users = (2.0 * v).round() as u32;
                    points.push((format!("mean_users={v}"), cfg));
                }
            }
            SweepAxis::NumFiles => {
                let ratio = self.capacity as f64 / self.total_size() as f64;
                let classes = self.size_classes.len();
                for &v in &self.sweep_grid {
                    let files = v as usize;
                    let mut cfg = self.clone();
                    let per = files / classes;
                    let extra = files % classes;
                    cfg.size_classes = self
                        .size_classes
                        .iter()
                        .enumerate()
                        .map(|(i, &(size, _))| (size, per + usize::from(i < extra)))
                        .filter(|&(_, count)| count > 0)
                        .collect();
                    cfg.num_files = Some(files);
                    cfg.capacity = ((ratio * cfg.total_size() as f64).round() as u64).max(1);
                    points.push((format!("num_files={v}"), cfg));
                }
            }
        }
        for (label, cfg) in &points {
            cfg.validate().map_err(|e| {
                Error::config("sweep_grid", format!("point `{label}` is invalid: {e}"))
            })?;
        }
        Ok(points)
    }
}
