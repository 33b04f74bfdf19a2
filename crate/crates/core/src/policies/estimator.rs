//! Per-item epoch counts, empirical means and UCB values.

use serde::Serialize;

use crate::error::{Error, Result};

/// `v̄ + √(a·v̄·L/T) + b·L/T`, the shape shared by every UCB in this crate.
fn ucb_shape(mean: f64, epochs: u64, log_term: f64, a: f64, b: f64) -> Result<f64> {
    if epochs == 0 {
        return Err(Error::param("epochs", "UCB needs at least one observed epoch"));
    }
    let t = epochs as f64;
    Ok(mean + (a * mean * log_term / t).sqrt() + b * log_term / t)
}

/// Anytime UCB with log term `ln(√N·ℓ + 1)`.
pub fn ucb_radius_atducb(mean: f64, epochs: u64, epoch_index: u64, n_items: usize) -> Result<f64> {
    let log_term = ((n_items as f64).sqrt() * epoch_index as f64 + 1.0).ln();
    ucb_shape(mean, epochs, log_term, 48.0, 48.0)
}

/// Fixed-horizon UCB with log term `ln(√N·T² + 1)`.
pub fn ucb_radius_fhducb(mean: f64, epochs: u64, n_items: usize, horizon: u64) -> Result<f64> {
    let t = horizon as f64;
    let log_term = ((n_items as f64).sqrt() * t * t + 1.0).ln();
    ucb_shape(mean, epochs, log_term, 48.0, 48.0)
}

/// UCB used inside the revenue check, with caller-supplied log term
/// (`ln(NT/δ + 1)` by default).
pub fn ucb_radius_check(mean: f64, epochs: u64, log_term: f64) -> Result<f64> {
    ucb_shape(mean, epochs, log_term, 196.0, 292.0)
}

/// One application of the `v̂_i ← min{v̂_i, ·}` rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UcbUpdate {
    /// Global epoch after which the update fired.
    pub epoch: u64,
    /// Counter bumped whenever the UCBs are re-initialized (ESUCB with reset).
    pub segment: u32,
    pub item: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    epoch_count: Vec<u64>,
    purchase_total: Vec<u64>,
    mean: Vec<f64>,
    ucb: Vec<f64>,
    epoch: u64,
}

impl EstimatorState {
    pub fn new(n_items: usize) -> Self {
        Self {
            epoch_count: vec![0; n_items],
            purchase_total: vec![0; n_items],
            mean: vec![0.0; n_items],
            ucb: vec![1.0; n_items],
            epoch: 0,
        }
    }

    /// Clears per-item statistics; the global epoch index is kept.
    pub fn reset_items(&mut self) {
        self.epoch_count.fill(0);
        self.purchase_total.fill(0);
        self.mean.fill(0.0);
        self.ucb.fill(1.0);
    }

    pub fn epoch_count(&self, i: usize) -> u64 {
        self.epoch_count[i]
    }

    pub fn purchase_total(&self, i: usize) -> u64 {
        self.purchase_total[i]
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn ucbs(&self) -> &[f64] {
        &self.ucb
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub(crate) fn begin_epoch(&mut self) -> u64 {
        self.epoch += 1;
        self.epoch
    }

    /// Records one more epoch offering `i` with `purchases` purchases and
    /// returns the new epoch count.
    pub(crate) fn fold(&mut self, i: usize, purchases: u64) -> u64 {
        self.purchase_total[i] += purchases;
        self.epoch_count[i] += 1;
        self.epoch_count[i]
    }

    /// Recomputes the mean of `i` and lowers its UCB to `candidate(mean)` if smaller.
    pub(crate) fn refresh(&mut self, i: usize, candidate: impl FnOnce(f64, u64) -> Result<f64>) -> Result<f64> {
        let t = self.epoch_count[i];
        self.mean[i] = self.purchase_total[i] as f64 / t as f64;
        let c = candidate(self.mean[i], t)?;
        self.ucb[i] = self.ucb[i].min(c);
        Ok(self.ucb[i])
    }
}
