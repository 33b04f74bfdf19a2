//! Exponential-stride UCB.
//!
//! The outer loop keeps an upper estimate `θ̂` of the optimal revenue and a
//! stride `ε` that shrinks by 2/3 per iteration. Each iteration runs a
//! *check* for `t_max` steps which offers `argmax Σ v̂_i (r_i − θ)` at a fixed
//! `θ`, so the offered set only moves when a UCB moves. The check answers
//! whether revenue `θ̂ − ε` looks unattainable; if so `θ̂` drops by `ε`.
//!
//! Log conventions: `L = ln(NT/δ)` enters `t_max` and the optimistic
//! revenue bonus as `L³`; the per-item radius uses `ln(NT/δ + 1)`.

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::model::{switch_deltas, Assortment, Instance};
use crate::optimizer::static_linear_argmax;

use super::estimator::{ucb_radius_check, EstimatorState, UcbUpdate};
use super::{EpochStep, Policy, PolicyKind, PolicyStats};

pub const DEFAULT_C1: f64 = 44840.0;
pub const DEFAULT_C2: f64 = 688.0;
pub const DEFAULT_C3: f64 = 21732.0;
pub const INITIAL_STRIDE: f64 = 1.0 / 3.0;
pub const STRIDE_RATIO: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsucbConfig {
    /// Confidence level; `1/T` when absent.
    pub delta: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Multiplies `c1`, `c2` and `c3`.
    pub constant_scale: f64,
    /// Re-initialize per-item statistics at every check. `false` keeps
    /// them across checks, which caps UCB updates at `O(log T)` overall.
    pub reset_counters: bool,
}

impl Default for EsucbConfig {
    fn default() -> Self {
        Self {
            delta: None,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            c3: DEFAULT_C3,
            constant_scale: 1.0,
            reset_counters: true,
        }
    }
}

impl EsucbConfig {
    pub fn delta_for(&self, horizon: u64) -> f64 {
        self.delta.unwrap_or(1.0 / horizon as f64)
    }

    /// `ln(NT/δ)`.
    pub fn log_term(&self, n_items: usize, horizon: u64) -> f64 {
        (n_items as f64 * horizon as f64 / self.delta_for(horizon)).ln()
    }

    /// `constant_scale` that makes the first check last `fraction · T` steps.
    pub fn scale_for_first_check(&self, n_items: usize, horizon: u64, fraction: f64) -> f64 {
        let unscaled = esucb_t_max(self.c1, n_items, self.log_term(n_items, horizon), INITIAL_STRIDE);
        fraction * horizon as f64 / unscaled
    }

    /// `t_max` of outer iteration `tau` (1-based).
    pub fn t_max(&self, n_items: usize, horizon: u64, tau: u32) -> f64 {
        let stride = INITIAL_STRIDE * STRIDE_RATIO.powi(tau as i32 - 1);
        esucb_t_max(
            self.c1 * self.constant_scale,
            n_items,
            self.log_term(n_items, horizon),
            stride,
        )
    }
}

/// `t_max = c₁·N·L³/ε²` with `L = ln(NT/δ)`.
pub fn esucb_t_max(c1: f64, n_items: usize, log_term: f64, stride: f64) -> f64 {
    c1 * n_items as f64 * log_term.powi(3) / (stride * stride)
}

/// State at the start of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterIteration {
    pub tau: u32,
    pub theta_hat: f64,
    pub stride: f64,
    pub t_max: f64,
    pub start_t: u64,
}

/// Instrumentation for one check invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub tau: u32,
    pub theta_l: f64,
    pub theta_r: f64,
    pub t_max: f64,
    pub steps: u64,
    pub epochs: u64,
    /// `None` when the horizon ran out first.
    pub result: Option<bool>,
    /// Times the UCB update line fired.
    pub ucb_updates: u64,
    /// Item switches between consecutive epochs of this check.
    pub item_switches: u64,
    /// The subset of `item_switches` between epochs that used the same `θ`.
    pub same_branch_item_switches: u64,
    /// Of `ucb_updates`, those fired between two same-`θ` epochs.
    pub same_branch_ucb_updates: u64,
}

#[derive(Debug, Clone)]
struct CheckState {
    theta_l: f64,
    theta_r: f64,
    t_max: f64,
    bonus: f64,
    rho: f64,
    rho_hat: f64,
    flag: bool,
    t: u64,
    last: Option<(Assortment, bool)>,
    updates_since_last: u64,
    summary: CheckSummary,
}

#[derive(Debug, Clone)]
pub struct Esucb {
    cfg: EsucbConfig,
    horizon: u64,
    capacity: usize,
    log_term: f64,
    ucb_log_term: f64,
    c2: f64,
    c3: f64,
    theta_hat: f64,
    stride: f64,
    tau: u32,
    est: EstimatorState,
    check: Option<CheckState>,
    segment: u32,
    outer: Vec<OuterIteration>,
    checks: Vec<CheckSummary>,
    stats: PolicyStats,
    history: Vec<UcbUpdate>,
}

impl Esucb {
    pub fn new(inst: &Instance, horizon: u64, cfg: EsucbConfig) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        let delta = cfg.delta_for(horizon);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
        }
        for (name, c) in [("c1", cfg.c1), ("c2", cfg.c2), ("c3", cfg.c3), ("constant_scale", cfg.constant_scale)] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::param(name, format!("must be positive and finite, got {c}")));
            }
        }
        let n = inst.n_items();
        let log_term = cfg.log_term(n, horizon);
        let ucb_log_term = (n as f64 * horizon as f64 / delta + 1.0).ln();
        Ok(Self {
            c2: cfg.c2 * cfg.constant_scale,
            c3: cfg.c3 * cfg.constant_scale,
            cfg,
            horizon,
            capacity: inst.capacity(),
            log_term,
            ucb_log_term,
            theta_hat: 1.0,
            stride: INITIAL_STRIDE,
            tau: 0,
            est: EstimatorState::new(n),
            check: None,
            segment: 0,
            outer: Vec::new(),
            checks: Vec::new(),
            stats: PolicyStats::new(n),
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &EsucbConfig {
        &self.cfg
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    /// One entry per outer iteration started so far.
    pub fn outer_iterations(&self) -> &[OuterIteration] {
        &self.outer
    }

    /// Finished (or horizon-cut) check invocations.
    pub fn checks(&self) -> &[CheckSummary] {
        &self.checks
    }

    fn n_items(&self) -> usize {
        self.stats.ucb_updates.len()
    }

    /// Starts a check; per-item statistics restart unless the no-reset
    /// variant is configured.
    pub fn begin_check(&mut self, theta_l: f64, theta_r: f64, t_max: f64) -> Result<()> {
        if !(theta_l <= theta_r) {
            return Err(Error::param("theta_l", format!("{theta_l} exceeds theta_r = {theta_r}")));
        }
        if self.cfg.reset_counters {
            self.est.reset_items();
            self.segment += 1;
        }
        let n = self.n_items() as f64;
        let l3 = self.log_term.powi(3);
        self.check = Some(CheckState {
            theta_l,
            theta_r,
            t_max,
            bonus: self.c2 * (n * t_max * l3).sqrt() + self.c3 * n * l3,
            rho: 0.0,
            rho_hat: 1.0,
            flag: false,
            t: 0,
            last: None,
            updates_since_last: 0,
            summary: CheckSummary {
                tau: self.tau,
                theta_l,
                theta_r,
                t_max,
                steps: 0,
                epochs: 0,
                result: None,
                ucb_updates: 0,
                item_switches: 0,
                same_branch_item_switches: 0,
                same_branch_ucb_updates: 0,
            },
        });
        Ok(())
    }

    /// One epoch of the active check; `Some(b)` once `t ≥ t_max`.
    fn check_epoch(&mut self, env: &mut Environment) -> Result<(EpochStep, Option<bool>)> {
        let rewards = env.instance().rewards().to_vec();
        let n_items = self.n_items();
        let check = self.check.as_mut().expect("no active check");
        let low = check.rho_hat < check.theta_r;
        if low {
            check.flag = true;
        }
        let theta = if low { check.theta_l } else { check.theta_r };
        let s = static_linear_argmax(self.est.ucbs(), &rewards, theta, self.capacity);

        if let Some((prev, prev_low)) = &check.last {
            let d = switch_deltas(prev, &s).items;
            check.summary.item_switches += d;
            if *prev_low == low {
                check.summary.same_branch_item_switches += d;
                check.summary.same_branch_ucb_updates += check.updates_since_last;
            }
            if check.updates_since_last > 0 || *prev_low != low {
                self.stats.assortment_recomputations += 1;
            }
        }
        check.updates_since_last = 0;

        let epoch = self.est.begin_epoch();
        let outcome = env.run_epoch(&s)?;
        self.stats.epochs += 1;
        check.t += outcome.epoch_length;
        check.summary.steps = check.t;
        check.summary.epochs += 1;
        if !low {
            check.rho += s
                .items()
                .iter()
                .map(|&i| outcome.purchases[i] as f64 * rewards[i])
                .sum::<f64>();
            check.rho_hat = (check.rho + check.bonus) / check.t as f64;
        }
        check.last = Some((s.clone(), low));

        if check.t as f64 >= check.t_max {
            let b = check.flag;
            return Ok((EpochStep { assortment: s, outcome }, Some(b)));
        }

        for &i in s.items() {
            let epochs = self.est.fold(i, outcome.purchases[i]);
            if epochs.is_power_of_two() {
                let log_term = self.ucb_log_term;
                let value = self.est.refresh(i, |mean, t| ucb_radius_check(mean, t, log_term))?;
                self.stats.ucb_updates[i] += 1;
                check.summary.ucb_updates += 1;
                check.updates_since_last += 1;
                self.history.push(UcbUpdate {
                    epoch,
                    segment: self.segment,
                    item: i,
                    value,
                });
            }
        }
        debug_assert_eq!(self.est.ucbs().len(), n_items);
        Ok((EpochStep { assortment: s, outcome }, None))
    }

    fn close_check(&mut self, result: Option<bool>) {
        if let Some(mut check) = self.check.take() {
            check.summary.result = result;
            self.checks.push(check.summary);
        }
    }

    /// Runs a whole check invocation. Returns `None` if the horizon ends it.
    pub fn check(&mut self, env: &mut Environment, theta_l: f64, theta_r: f64, t_max: f64) -> Result<Option<bool>> {
        self.begin_check(theta_l, theta_r, t_max)?;
        loop {
            let (_, result) = self.check_epoch(env)?;
            if result.is_some() || env.is_exhausted() {
                self.close_check(result);
                return Ok(result);
            }
        }
    }

    fn begin_outer(&mut self, start_t: u64) -> Result<()> {
        self.tau += 1;
        let t_max = esucb_t_max(
            self.cfg.c1 * self.cfg.constant_scale,
            self.n_items(),
            self.log_term,
            self.stride,
        );
        self.outer.push(OuterIteration {
            tau: self.tau,
            theta_hat: self.theta_hat,
            stride: self.stride,
            t_max,
            start_t,
        });
        self.begin_check(self.theta_hat - 3.0 * self.stride, self.theta_hat - self.stride, t_max)
    }

    fn end_outer(&mut self, passed: bool) {
        self.close_check(Some(passed));
        if passed {
            self.theta_hat -= self.stride;
        }
        self.stride *= STRIDE_RATIO;
    }

    /// Runs the outer loop until the horizon is reached.
    pub fn run(&mut self, env: &mut Environment) -> Result<()> {
        while !env.is_exhausted() {
            self.step(env)?;
        }
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }
}

impl Policy for Esucb {
    fn kind(&self) -> PolicyKind {
        if self.cfg.reset_counters {
            PolicyKind::Esucb
        } else {
            PolicyKind::EsucbNoreset
        }
    }

    fn step(&mut self, env: &mut Environment) -> Result<EpochStep> {
        if self.check.is_none() {
            self.begin_outer(env.t())?;
        }
        let (step, result) = self.check_epoch(env)?;
        match result {
            Some(passed) => self.end_outer(passed),
            None if env.is_exhausted() => self.close_check(None),
            None => {}
        }
        Ok(step)
    }

    fn stats(&self) -> &PolicyStats {
        &self.stats
    }

    fn ucb_history(&self) -> &[UcbUpdate] {
        &self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn instance() -> Instance {
        Instance::new(5, 2, vec![0.9, 0.7, 0.6, 0.4, 0.2], vec![0.3, 0.8, 0.5, 0.9, 0.6]).unwrap()
    }

    #[test]
    fn stride_schedule() {
        let cfg = EsucbConfig::default();
        let l = cfg.log_term(5, 10_000);
        let eps: Vec<f64> = (1..=3)
            .map(|tau| {
                let t = cfg.t_max(5, 10_000, tau);
                (cfg.c1 * 5.0 * l.powi(3) / t).sqrt()
            })
            .collect();
        assert_relative_eq!(eps[0], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(eps[1], 2.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(eps[2], 4.0 / 27.0, max_relative = 1e-12);
    }

    #[test]
    fn default_t_max_exceeds_desk_horizons() {
        let cfg = EsucbConfig {
            delta: Some(1e-4),
            ..EsucbConfig::default()
        };
        let expected = 44840.0 * 5.0 * (5e8f64).ln().powi(3) * 9.0;
        let t_max = cfg.t_max(5, 10_000, 1);
        assert_relative_eq!(t_max, expected, max_relative = 1e-12);
        assert!(t_max > 10_000.0);
    }

    #[test]
    fn scale_for_first_check_hits_fraction() {
        let cfg = EsucbConfig::default();
        let scaled = EsucbConfig {
            constant_scale: cfg.scale_for_first_check(5, 1 << 16, 0.125),
            ..cfg
        };
        assert_relative_eq!(scaled.t_max(5, 1 << 16, 1), 8192.0, max_relative = 1e-12);
    }

    #[test]
    fn first_epoch_takes_the_upper_branch() {
        let inst = instance();
        let mut env = Environment::new(inst.clone(), Some(1000), 1);
        let mut p = Esucb::new(&inst, 1000, EsucbConfig::default()).unwrap();
        p.begin_check(0.0, 1.0, 1e12).unwrap();
        let (step, result) = p.check_epoch(&mut env).unwrap();
        assert_eq!(result, None);
        // θ_r = 1 leaves no positive score
        assert!(step.assortment.is_empty());
        assert!(!p.check.as_ref().unwrap().flag);
    }

    #[test]
    fn optimistic_check_never_flags() {
        let inst = instance();
        let mut env = Environment::new(inst.clone(), Some(2000), 2);
        let mut p = Esucb::new(&inst, 2000, EsucbConfig::default()).unwrap();
        // the bonus keeps ρ̂ far above θ_r at default constants
        let result = p.check(&mut env, 0.0, 0.5, 500.0).unwrap();
        assert_eq!(result, Some(false));
        let summary = &p.checks()[0];
        assert!(summary.steps >= 500);
        assert_eq!(summary.result, Some(false));
    }

    #[test]
    fn pessimistic_check_flags() {
        let inst = instance();
        let mut env = Environment::new(inst.clone(), Some(100_000), 3);
        let mut p = Esucb::new(&inst, 100_000, EsucbConfig { constant_scale: 1e-9, ..EsucbConfig::default() }).unwrap();
        // θ* < 0.99, so realized revenue cannot keep up with θ_r
        assert_eq!(p.check(&mut env, 0.0, 0.99, 5000.0).unwrap(), Some(true));
    }

    #[test]
    fn horizon_can_cut_a_check() {
        let inst = instance();
        let mut env = Environment::new(inst.clone(), Some(300), 4);
        let mut p = Esucb::new(&inst, 300, EsucbConfig::default()).unwrap();
        assert_eq!(p.check(&mut env, 0.0, 0.5, 1e9).unwrap(), None);
        assert!(env.is_exhausted());
        assert_eq!(p.checks()[0].result, None);
    }

    #[test]
    fn run_at_default_constants_stays_in_first_iteration() {
        let inst = instance();
        let mut env = Environment::new(inst.clone(), Some(10_000), 5);
        let mut p = Esucb::new(&inst, 10_000, EsucbConfig::default()).unwrap();
        p.run(&mut env).unwrap();
        assert_eq!(p.outer_iterations().len(), 1);
        assert_eq!(p.theta_hat(), 1.0);
        assert_eq!(env.t(), 10_000);
    }

    #[test]
    fn fixed_branch_switches_are_bounded_by_updates() {
        let inst = instance();
        let horizon = 1 << 15;
        for reset in [true, false] {
            let cfg = EsucbConfig {
                reset_counters: reset,
                ..EsucbConfig::default()
            };
            let cfg = EsucbConfig {
                constant_scale: cfg.scale_for_first_check(5, horizon, 0.125),
                ..cfg
            };
            let mut env = Environment::new(inst.clone(), Some(horizon), 6);
            let mut p = Esucb::new(&inst, horizon, cfg).unwrap();
            p.run(&mut env).unwrap();
            assert!(p.outer_iterations().len() >= 2);
            for c in p.checks() {
                assert!(c.same_branch_item_switches <= 2 * c.same_branch_ucb_updates, "{c:?}");
                assert!(c.item_switches <= 2 * c.ucb_updates + 2 * inst.capacity() as u64, "{c:?}");
            }
        }
    }
}
