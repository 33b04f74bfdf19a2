//! Deferred-update UCB for a known horizon.
//!
//! Each item's epochs are split into stages. A stage closes once it holds
//! enough epochs relative to everything observed before it; early stages
//! (before `τ₀`) use a weight-agnostic threshold, later ones scale the
//! threshold by the item's current UCB.

use log::warn;
use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::model::{Assortment, Instance};
use crate::optimizer::best_assortment;

use super::estimator::{ucb_radius_fhducb, UcbUpdate};
use super::{EpochStep, Policy, PolicyKind, PolicyStats};

/// `τ₀ = ⌈log₂ log₂(T/N) + 1⌉`, floored at 1 when `T/N ≤ 2`.
pub fn fh_tau0(horizon: u64, n_items: usize) -> u32 {
    let ratio = horizon as f64 / n_items as f64;
    if ratio <= 2.0 {
        return 1;
    }
    let v = (ratio.log2().log2() + 1.0).ceil();
    v.max(1.0) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhItemState {
    /// Current stage `τ_i`, starting at 1.
    pub stage: u32,
    /// Epochs offering the item in the current stage, `|𝒯(i, τ_i)|`.
    pub stage_epochs: u64,
    /// Epochs before the current stage, `T_i^{(τ_i)}`.
    pub prior_epochs: u64,
    /// Purchases before the current stage, `n_i^{(τ_i)}`.
    pub prior_purchases: u64,
    /// Purchases in the current stage, `n_{i,τ_i}`.
    pub stage_purchases: u64,
    /// UCB of the current stage, `v̂_{i,τ_i}`.
    pub ucb: f64,
    /// UCB recorded on entering stage `τ₀`.
    pub ucb_at_tau0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhState {
    pub items: Vec<FhItemState>,
    pub tau0: u32,
    pub horizon: u64,
    pub n_items: usize,
}

impl FhState {
    pub fn new(n_items: usize, horizon: u64) -> Self {
        let tau0 = fh_tau0(horizon, n_items);
        let item = FhItemState {
            stage: 1,
            stage_epochs: 0,
            prior_epochs: 0,
            prior_purchases: 0,
            stage_purchases: 0,
            ucb: 1.0,
            ucb_at_tau0: (tau0 == 1).then_some(1.0),
        };
        Self {
            items: vec![item; n_items],
            tau0,
            horizon,
            n_items,
        }
    }

    pub fn ucbs(&self) -> Vec<f64> {
        self.items.iter().map(|s| s.ucb).collect()
    }

    /// Closes the current stage of item `i` and recomputes its UCB.
    fn update(&mut self, i: usize) -> Result<f64> {
        let (n, horizon, tau0) = (self.n_items, self.horizon, self.tau0);
        let s = &mut self.items[i];
        s.stage += 1;
        s.prior_epochs += s.stage_epochs;
        s.prior_purchases += s.stage_purchases;
        s.stage_epochs = 0;
        s.stage_purchases = 0;
        let mean = s.prior_purchases as f64 / s.prior_epochs as f64;
        s.ucb = s.ucb.min(ucb_radius_fhducb(mean, s.prior_epochs, n, horizon)?);
        if s.stage == tau0 {
            s.ucb_at_tau0 = Some(s.ucb);
        }
        Ok(s.ucb)
    }
}

/// Stage-closing condition `𝒫(i, τ_i)`.
pub fn fh_condition(state: &FhState, i: usize) -> bool {
    let s = &state.items[i];
    let t = state.horizon as f64;
    let n = state.n_items as f64;
    let prior = s.prior_epochs as f64;
    let len = s.stage_epochs as f64;
    if s.stage < state.tau0 {
        len >= 1.0 + (t * prior / n).sqrt()
    } else {
        let floor = 1.0 / (n * t).sqrt();
        let alive = s.ucb_at_tau0.is_some_and(|u| u > floor);
        alive && len >= 1.0 + (t * prior / (n * s.ucb)).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct FhDucb {
    state: FhState,
    current: Assortment,
    stats: PolicyStats,
    history: Vec<UcbUpdate>,
}

impl FhDucb {
    pub fn new(inst: &Instance, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon", "must be positive"));
        }
        let n = inst.n_items();
        if (horizon as f64) < (n as f64).powi(4) {
            warn!("fh_ducb: horizon {horizon} is below N^4 = {}; the log log T switch guarantee assumes T >= N^4", n.pow(4));
        }
        let state = FhState::new(n, horizon);
        let current = best_assortment(&state.ucbs(), inst.rewards(), inst.capacity());
        Ok(Self {
            state,
            current,
            stats: PolicyStats::new(n),
            history: Vec::new(),
        })
    }

    pub fn state(&self) -> &FhState {
        &self.state
    }

    /// Sum of final stage indices over items.
    pub fn total_stages(&self) -> u64 {
        self.state.items.iter().map(|s| u64::from(s.stage)).sum()
    }
}

impl Policy for FhDucb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FhDucb
    }

    fn step(&mut self, env: &mut Environment) -> Result<EpochStep> {
        let epoch = self.stats.epochs + 1;
        let ready: Vec<usize> = (0..self.state.n_items)
            .filter(|&i| fh_condition(&self.state, i))
            .collect();
        for &i in &ready {
            let value = self.state.update(i)?;
            self.stats.ucb_updates[i] += 1;
            self.history.push(UcbUpdate {
                epoch,
                segment: 0,
                item: i,
                value,
            });
        }
        if !ready.is_empty() {
            let inst = env.instance();
            self.current = best_assortment(&self.state.ucbs(), inst.rewards(), inst.capacity());
            self.stats.assortment_recomputations += 1;
        }

        let s = self.current.clone();
        let outcome = env.run_epoch(&s)?;
        self.stats.epochs += 1;
        for &i in s.items() {
            let item = &mut self.state.items[i];
            item.stage_purchases += outcome.purchases[i];
            item.stage_epochs += 1;
        }
        Ok(EpochStep { assortment: s, outcome })
    }

    fn stats(&self) -> &PolicyStats {
        &self.stats
    }

    fn ucb_history(&self) -> &[UcbUpdate] {
        &self.history
    }
}
