//! Closed-form evaluation of the theoretical regret bounds.
//!
//! The bounds are written in terms of instance constants obtained by
//! enumerating the good and bad arm combinations, which is feasible only for
//! small catalogs (the enumeration is guarded). The reward-to-estimate link
//! is the linear envelope `g(Lambda) = U * M * Lambda`, the tightest
//! catalog-independent choice satisfying
//! `|r_Theta(M) - r_Theta'(M)| <= U * Lambda * sum_{f in M} S_f`, so
//! `g^{-1}(x) = x / (U * M)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, PopularityProfile};
use crate::policies::{gamma_lower_bound, gamma_upper_bound, ScheduleKind};
use crate::{Error, Result};

/// Hard cap on catalog size for good/bad enumeration.
pub const MAX_ENUM_FILES: usize = 20;
/// Cap on the number of good combinations for pairwise switch-cost search.
const GOOD_PAIR_CAP: usize = 8192;

/// Instance constants feeding the regret bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Optimal expected per-period reward.
    pub r_opt: f64,
    /// Solver rating the good/bad threshold was computed at.
    pub alpha: f64,
    /// `alpha * r_opt - min { r_Theta(B) : B bad }`.
    pub delta_u: f64,
    /// `alpha * r_opt - max { r_Theta(B) : B bad }`.
    pub delta_l: f64,
    /// Maximum switch cost = maximum achievable cache fill.
    pub m_u: f64,
    /// Maximum switch cost between two good combinations.
    pub m_l: f64,
    /// Schedule constant `K_1 = 2 sum_j Delta(j) / n_j^2` (closed form).
    pub k1: f64,
    /// Slope of `g^{-1}`: `1 / (U * M)`, per data unit.
    pub g_inv_slope: f64,
    /// Additive constant of the sqrt-schedule bound; `None` for other
    /// schedules.
    pub c: Option<f64>,
    /// Diagnostics: feasible / good combination counts.
    pub num_feasible: usize,
    pub num_good: usize,
}

impl BoundConstants {
    /// `g^{-1}(x) = x / (U * M)`.
    pub fn g_inv(&self, x: f64) -> f64 {
        x * self.g_inv_slope
    }

    /// `l_t = 6 log t / (g^{-1}(Delta_l))^2`.
    pub fn l_t(&self, t: u64) -> f64 {
        6.0 * (t as f64).ln() / self.g_inv(self.delta_l).powi(2)
    }
}

/// Closed-form `K_1` per schedule kind: `pi^2/3 + 4.12 gamma` for the
/// square-root schedule, `pi^2 / (3 L)` for the constant schedule (the
/// every-period schedule is the `L = 1` case).
pub fn k1_closed_form(kind: ScheduleKind) -> f64 {
    match kind {
        ScheduleKind::EveryPeriod => PI * PI / 3.0,
        ScheduleKind::Constant { l } => PI * PI / (3.0 * l as f64),
        ScheduleKind::SqrtGamma { gamma } => PI * PI / 3.0 + 4.12 * gamma,
    }
}

/// Direct partial sum `2 sum_{j<=terms} Delta(j) / n_j^2` of the defining
/// series.
pub fn k1_partial_sum(kind: ScheduleKind, num_files: usize, terms: usize) -> f64 {
    let mut n = num_files as u64 + 1;
    let mut sum = 0.0;
    for _ in 0..terms {
        let d = kind.delta_at(n);
        sum += 2.0 * d as f64 / (n as f64 * n as f64);
        n += d;
    }
    sum
}

/// Analytic bound on the tail `2 sum_{j>terms} Delta(j) / n_j^2`.
pub fn k1_tail_bound(kind: ScheduleKind, num_files: usize, terms: usize) -> f64 {
    let mut n = num_files as u64 + 1;
    for _ in 0..terms {
        n += kind.delta_at(n);
    }
    match kind {
        // Delta(j)/n_j^2 summed against the integral of x^-2
        ScheduleKind::EveryPeriod | ScheduleKind::Constant { .. } => 2.0 / n as f64,
        ScheduleKind::SqrtGamma { .. } => {
            // sum (n_{j+1}-n_j)/n_j^2 <= (n_{j+1}/n_j) * integral; the ratio
            // is maximal at the first tail term
            let next = n + kind.delta_at(n);
            2.0 * (next as f64 / n as f64) / n as f64
        }
    }
}

/// Enumerates good/bad combinations and assembles the bound constants.
///
/// Guarded: errors for more than [`MAX_ENUM_FILES`] files or when the
/// pairwise good-combination search would exceed its budget.
pub fn compute_bound_constants(
    catalog: &Catalog,
    profile: &PopularityProfile,
    alpha: f64,
    schedule: ScheduleKind,
) -> Result<BoundConstants> {
    let f = catalog.num_files();
    if f > MAX_ENUM_FILES {
        return Err(Error::EnumerationBudget(format!(
            "good/bad enumeration needs 2^{f} subsets; limit is 2^{MAX_ENUM_FILES}"
        )));
    }
    if catalog.max_users() == 0 {
        return Err(Error::DegenerateInstance(
            "g^{-1} undefined with zero users".into(),
        ));
    }
    let sizes = catalog.sizes();
    let theta = profile.theta();
    let users = f64::from(catalog.max_users());
    let full = 1usize << f;

    // exact fills for every subset
    let mut fills = vec![0u64; full];
    for m in 1..full {
        let low = m.trailing_zeros() as usize;
        fills[m] = fills[m & (m - 1)] + sizes[low];
    }

    // canonical ascending-index reward, matching spo::expected_reward
    let reward_of = |m: usize| -> f64 {
        let mut acc = 0.0;
        for (file, &size) in sizes.iter().enumerate() {
            if m >> file & 1 == 1 {
                acc += size as f64 * theta[file];
            }
        }
        users * acc
    };

    let capacity = catalog.capacity();
    let mut feasible: Vec<(usize, f64)> = Vec::new();
    let mut r_opt = 0.0f64;
    for (m, &fill) in fills.iter().enumerate() {
        if fill <= capacity {
            let r = reward_of(m);
            r_opt = r_opt.max(r);
            feasible.push((m, r));
        }
    }

    let threshold = alpha * r_opt;
    let tol = super::CLASSIFY_REL_TOL * threshold.abs();
    let mut good: Vec<usize> = Vec::new();
    let mut min_bad = f64::INFINITY;
    let mut max_bad = f64::NEG_INFINITY;
    let mut m_u = 0u64;
    for &(m, r) in &feasible {
        m_u = m_u.max(fills[m]);
        if r >= threshold - tol {
            good.push(m);
        } else {
            min_bad = min_bad.min(r);
            max_bad = max_bad.max(r);
        }
    }
    if !min_bad.is_finite() {
        return Err(Error::DegenerateInstance(
            "every feasible combination is good; Delta_u/Delta_l undefined".into(),
        ));
    }
    if good.len() > GOOD_PAIR_CAP {
        return Err(Error::EnumerationBudget(format!(
            "{} good combinations exceed the pairwise budget {GOOD_PAIR_CAP}",
            good.len()
        )));
    }
    // switch cost between good pairs: size of A \ B
    let mut m_l = 0u64;
    for &a in &good {
        for &b in &good {
            m_l = m_l.max(fills[a & !b]);
        }
    }

    let g_inv_slope = 1.0 / (users * capacity as f64);
    let delta_l = threshold - max_bad;
    let c = match schedule {
        ScheduleKind::SqrtGamma { gamma } => Some(theorem1_constant_c(
            f,
            gamma,
            delta_l * g_inv_slope,
            m_u as f64,
            m_l as f64,
        )),
        _ => None,
    };

    Ok(BoundConstants {
        r_opt,
        alpha,
        delta_u: threshold - min_bad,
        delta_l,
        m_u: m_u as f64,
        m_l: m_l as f64,
        k1: k1_closed_form(schedule),
        g_inv_slope,
        c,
        num_feasible: feasible.len(),
        num_good: good.len(),
    })
}

/// The additive constant of the sqrt-schedule bound, reassembled from the
/// constant terms of the switching-regret chain:
/// the non-`t` part of the bad-switch bound times `2 (M_u - M_l)`, the
/// `-M_l` left over from counting good switches, and the `F M_u`
/// initialization fill.
fn theorem1_constant_c(num_files: usize, gamma: f64, g_inv_delta_l: f64, m_u: f64, m_l: f64) -> f64 {
    let f = num_files as f64;
    let n1 = f + 1.0;
    let delta1 = (gamma * n1.sqrt()).ceil();
    let delta2 = (gamma * (n1 + delta1).sqrt()).ceil();
    let bracket = 6.0 * f / g_inv_delta_l.powi(2) * n1.ln() / delta1
        + f * (1.0 + PI * PI / 6.0 + gamma)
        + f * (PI * PI / 3.0 + 4.12 * gamma) / delta2
        - f / delta1;
    2.0 * (m_u - m_l) * bracket + f * m_u - m_l
}

/// Parameters of the square-root-schedule bound.
#[derive(Debug, Clone, Copy)]
pub struct Theorem1Params {
    pub w: f64,
    pub gamma: f64,
    pub beta: f64,
    pub num_files: usize,
}

/// Evaluates the square-root-schedule regret bound at period `t`:
///
/// `log t * [6/(g^{-1}(Dl))^2 * (w + Du/(2(Mu-Ml))) + w g/2] * 2F(Mu-Ml)
///  + sqrt(t) * [w Mu + w(Mu-Ml)(1-2b) + F Du g]
///  + (pi^2/3 + 4.12 g + 1) F Du + w C`.
pub fn theorem1_bound(constants: &BoundConstants, params: &Theorem1Params, t: u64) -> Result<f64> {
    let lo = gamma_lower_bound(params.num_files);
    let hi = gamma_upper_bound(params.num_files);
    if !(lo..=hi).contains(&params.gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {} outside the proven range [{lo:.4}, {hi:.4}]",
            params.gamma
        )));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("period index starts at 1".into()));
    }
    let gap = constants.m_u - constants.m_l;
    if gap <= 0.0 {
        return Err(Error::DegenerateInstance(
            "M_u = M_l; the log coefficient divides by their difference".into(),
        ));
    }
    let c = constants.c.ok_or_else(|| {
        Error::InvalidArgument("constants were not computed for a sqrt schedule".into())
    })?;
    let f = params.num_files as f64;
    let gil = constants.g_inv(constants.delta_l);
    let log_term = (t as f64).ln()
        * (6.0 / gil.powi(2) * (params.w + constants.delta_u / (2.0 * gap))
            + params.w * params.gamma / 2.0)
        * 2.0
        * f
        * gap;
    let sqrt_term = (t as f64).sqrt()
        * (params.w * constants.m_u
            + params.w * gap * (1.0 - 2.0 * params.beta)
            + f * constants.delta_u * params.gamma);
    let const_term = (PI * PI / 3.0 + 4.12 * params.gamma + 1.0) * f * constants.delta_u;
    Ok(log_term + sqrt_term + const_term + params.w * c)
}

/// Parameters of the constant-schedule bound (`alpha = beta = 1` regime).
#[derive(Debug, Clone, Copy)]
pub struct Theorem2Params {
    pub w: f64,
    pub l: u64,
    pub num_files: usize,
}

/// Evaluates the constant-schedule regret bound at period `t`:
///
/// `(6F log t/(g^{-1}(Dl))^2) (Du + w 2Mu/L) + F Du (pi^2/3 + L)
///  + (w F 2Mu/L) (pi^2/(3L) + 3/(2L) - 1 + log(1+(L-1)/(F+1))/(g^{-1}(Dl))^2)`.
pub fn theorem2_bound(constants: &BoundConstants, params: &Theorem2Params, t: u64) -> Result<f64> {
    if params.l < 1 {
        return Err(Error::InvalidArgument("L must be >= 1".into()));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("period index starts at 1".into()));
    }
    let f = params.num_files as f64;
    let l = params.l as f64;
    let gil = constants.g_inv(constants.delta_l);
    let log_term = 6.0 * f * (t as f64).ln() / gil.powi(2)
        * (constants.delta_u + params.w * 2.0 * constants.m_u / l);
    let lock_term = f * constants.delta_u * (PI * PI / 3.0 + l);
    let switch_term = params.w * f * 2.0 * constants.m_u / l
        * (PI * PI / (3.0 * l) + 3.0 / (2.0 * l) - 1.0
            + (1.0 + (l - 1.0) / (f + 1.0)).ln() / gil.powi(2));
    Ok(log_term + lock_term + switch_term)
}

/// Right-hand side of the bad-period bound:
/// `(1-beta)(t-F) + F (K_1 + l_t + max_{1<=j<=b} Delta(j))` with `b` the last
/// switching period at or before `t`.
pub fn eq7_rhs(
    constants: &BoundConstants,
    schedule: ScheduleKind,
    num_files: usize,
    beta: f64,
    t: u64,
) -> f64 {
    let f = num_files as f64;
    let max_delta = schedule.max_delta_through(num_files, t) as f64;
    (1.0 - beta) * (t as f64 - f) + f * (k1_closed_form(schedule) + constants.l_t(t) + max_delta)
}

/// Checks the seed-averaged bad-period totals against the bound at every
/// checkpoint `(t, mean of sum_f N_{f,t})`.
pub fn bad_period_bound_check(
    mean_totals: &[(u64, f64)],
    constants: &BoundConstants,
    schedule: ScheduleKind,
    num_files: usize,
    beta: f64,
) -> bool {
    mean_totals
        .iter()
        .all(|&(t, mean)| mean <= eq7_rhs(constants, schedule, num_files, beta, t))
}
