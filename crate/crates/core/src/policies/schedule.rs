//! Switching-period schedules.
//!
//! Bandit policies may change the cache only at switching periods. The first
//! switching period is `n_1 = F + 1` (right after every file has been cached
//! once), and subsequent ones follow the schedule kind:
//!
//! - every period: `n_{b+1} = n_b + 1` (plain CUCB),
//! - constant: `n_{b+1} = n_b + L`,
//! - square root: `n_{b+1} = n_b + ceil(gamma * sqrt(n_b))`.
//!
//! For `gamma >= 2 + 1/sqrt(F + 1)` the square-root schedule satisfies two
//! properties used by the regret analysis: `Delta(j)/n_j` is nonincreasing in
//! `j`, and the number of switching periods obeys `b <= sqrt(n_b)`.

use serde::{Deserialize, Serialize};

/// How switching periods are spaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// A switch is allowed every period.
    EveryPeriod,
    /// Constant gap of `l` periods between switches.
    Constant { l: u64 },
    /// Gap grows as `ceil(gamma * sqrt(n_b))`.
    SqrtGamma { gamma: f64 },
}

impl ScheduleKind {
    /// Gap after the switching period at `n`.
    pub fn delta_at(&self, n: u64) -> u64 {
        match *self {
            ScheduleKind::EveryPeriod => 1,
            ScheduleKind::Constant { l } => l,
            ScheduleKind::SqrtGamma { gamma } => {
                let d = (gamma * (n as f64).sqrt()).ceil();
                d.max(1.0) as u64
            }
        }
    }

    /// `max_{1 <= j <= b} Delta(j)` where `b` is the last switching period
    /// with `n_b <= t`; zero before the first switching period.
    pub fn max_delta_through(&self, num_files: usize, t: u64) -> u64 {
        match *self {
            ScheduleKind::EveryPeriod => u64::from(t > num_files as u64),
            ScheduleKind::Constant { l } => {
                if t > num_files as u64 {
                    l
                } else {
                    0
                }
            }
            ScheduleKind::SqrtGamma { .. } => {
                // Delta is monotone in n for the sqrt schedule
                let mut n = num_files as u64 + 1;
                let mut max_delta = 0;
                while n <= t {
                    let d = self.delta_at(n);
                    max_delta = max_delta.max(d);
                    n += d;
                }
                max_delta
            }
        }
    }
}

/// Lower end of the gamma range for which Properties 1-2 are proven.
pub fn gamma_lower_bound(num_files: usize) -> f64 {
    2.0 + 1.0 / ((num_files as f64 + 1.0).sqrt())
}

/// Upper end of the gamma range of Theorem 1.
pub fn gamma_upper_bound(num_files: usize) -> f64 {
    let f = num_files as f64;
    (f * f + f - 1.0) / ((f + 1.0).sqrt())
}

/// The live schedule state: the active switching period `n_b` and its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    kind: ScheduleKind,
    n_current: u64,
    b: u64,
}

impl SwitchingSchedule {
    /// Starts the schedule at `n_1 = F + 1`.
    ///
    /// Allows sqrt gammas below the proven range (the reference experiments
    /// use gamma = 2) but logs a warning because the bound analysis does not
    /// cover them.
    pub fn new(kind: ScheduleKind, num_files: usize) -> Self {
        if let ScheduleKind::SqrtGamma { gamma } = kind {
            let lo = gamma_lower_bound(num_files);
            if gamma < lo {
                log::warn!(
                    "sqrt schedule gamma={gamma} is below {lo:.4}; \
                     bound validity requires gamma >= 2 + 1/sqrt(F+1)"
                );
            }
        }
        SwitchingSchedule {
            kind,
            n_current: num_files as u64 + 1,
            b: 1,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Period index of the active switching period (`n_b`).
    pub fn n_current(&self) -> u64 {
        self.n_current
    }

    /// Switching-period counter (`b`).
    pub fn counter(&self) -> u64 {
        self.b
    }

    /// Gap to the next switching period (`Delta(b)`).
    pub fn delta(&self) -> u64 {
        self.kind.delta_at(self.n_current)
    }

    /// Advances to the next switching period.
    pub fn advance(&mut self) {
        self.n_current += self.delta();
        self.b += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_schedule_first_steps() {
        let mut s = SwitchingSchedule::new(ScheduleKind::SqrtGamma { gamma: 2.0 }, 400);
        assert_eq!(s.n_current(), 401);
        assert_eq!(s.delta(), 41); // ceil(2 * sqrt(401))
        s.advance();
        assert_eq!(s.n_current(), 442);
        assert_eq!(s.counter(), 2);
    }

    #[test]
    fn constant_schedule_is_affine() {
        let mut s = SwitchingSchedule::new(ScheduleKind::Constant { l: 10 }, 400);
        for b in 1..200u64 {
            assert_eq!(s.n_current(), 401 + 10 * (b - 1));
            s.advance();
        }
    }

    #[test]
    fn every_period_schedule() {
        let mut s = SwitchingSchedule::new(ScheduleKind::EveryPeriod, 3);
        assert_eq!(s.n_current(), 4);
        s.advance();
        assert_eq!(s.n_current(), 5);
        assert_eq!(s.delta(), 1);
    }

    #[test]
    fn sqrt_properties_hold_on_sample_grid() {
        // Property 1: Delta(j)/n_j nonincreasing (checked exactly by
        // cross-multiplication); Property 2: b^2 <= n_b.
        for num_files in [2usize, 10, 400] {
            let lo = gamma_lower_bound(num_files);
            let hi = gamma_upper_bound(num_files).min(10.0);
            for i in 0..5 {
                let gamma = lo + (hi - lo) * f64::from(i) / 4.0;
                let mut s = SwitchingSchedule::new(ScheduleKind::SqrtGamma { gamma }, num_files);
                let mut prev: Option<(u64, u64)> = None;
                while s.n_current() < 100_000 {
                    let (d, n) = (s.delta(), s.n_current());
                    if let Some((pd, pn)) = prev {
                        assert!(
                            u128::from(d) * u128::from(pn) <= u128::from(pd) * u128::from(n),
                            "Property 1 failed: F={num_files} gamma={gamma} n={n}"
                        );
                    }
                    assert!(
                        s.counter() * s.counter() <= n,
                        "Property 2 failed: F={num_files} gamma={gamma} b={}",
                        s.counter()
                    );
                    prev = Some((d, n));
                    s.advance();
                }
            }
        }
    }

    #[test]
    fn max_delta_through_matches_walk() {
        let kind = ScheduleKind::SqrtGamma { gamma: 2.1 };
        assert_eq!(kind.max_delta_through(400, 400), 0);
        assert_eq!(kind.max_delta_through(400, 401), kind.delta_at(401));
        let m = kind.max_delta_through(400, 10_000);
        assert!(m >= kind.delta_at(401));
        assert_eq!(ScheduleKind::EveryPeriod.max_delta_through(5, 4), 0);
        assert_eq!(ScheduleKind::EveryPeriod.max_delta_through(5, 100), 1);
        assert_eq!(ScheduleKind::Constant { l: 7 }.max_delta_through(5, 100), 7);
    }
}
