use crate::environment::Environment;
use crate::error::Result;
use crate::model::{Assortment, Instance};
use crate::optimizer::best_assortment;

use super::estimator::{ucb_radius_atducb, EstimatorState, UcbUpdate};
use super::{EpochStep, Policy, PolicyKind, PolicyStats};

/// When an offered item's UCB may be recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateGate {
    /// After every epoch that offers the item.
    EveryEpoch,
    /// Only when the item's epoch count becomes a power of two.
    PowerOfTwo,
}

/// UCB policy offering `argmax R(S, v̂)`; with [`UpdateGate::PowerOfTwo`]
/// this is AT-DUCB.
#[derive(Debug, Clone)]
pub struct DeferredUcb {
    gate: UpdateGate,
    est: EstimatorState,
    current: Option<Assortment>,
    stats: PolicyStats,
    history: Vec<UcbUpdate>,
}

impl DeferredUcb {
    pub fn new(inst: &Instance, gate: UpdateGate) -> Self {
        Self {
            gate,
            est: EstimatorState::new(inst.n_items()),
            current: None,
            stats: PolicyStats::new(inst.n_items()),
            history: Vec::new(),
        }
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    fn gate_open(&self, epochs: u64) -> bool {
        match self.gate {
            UpdateGate::EveryEpoch => true,
            UpdateGate::PowerOfTwo => epochs.is_power_of_two(),
        }
    }
}

impl Policy for DeferredUcb {
    fn kind(&self) -> PolicyKind {
        match self.gate {
            UpdateGate::EveryEpoch => PolicyKind::BaselineUcb,
            UpdateGate::PowerOfTwo => PolicyKind::AtDucb,
        }
    }

    fn step(&mut self, env: &mut Environment) -> Result<EpochStep> {
        let inst = env.instance();
        // The UCBs only move inside this method, so `None` marks a pending recomputation.
        let s = match &self.current {
            Some(s) => s.clone(),
            None => {
                if self.stats.epochs > 0 {
                    self.stats.assortment_recomputations += 1;
                }
                best_assortment(self.est.ucbs(), inst.rewards(), inst.capacity())
            }
        };
        let n_items = inst.n_items();
        let epoch = self.est.begin_epoch();
        let outcome = env.run_epoch(&s)?;
        self.stats.epochs += 1;

        let mut updated = false;
        for &i in s.items() {
            let epochs = self.est.fold(i, outcome.purchases[i]);
            if self.gate_open(epochs) {
                let value = self
                    .est
                    .refresh(i, |mean, t| ucb_radius_atducb(mean, t, epoch, n_items))?;
                self.stats.ucb_updates[i] += 1;
                self.history.push(UcbUpdate {
                    epoch,
                    segment: 0,
                    item: i,
                    value,
                });
                updated = true;
            }
        }
        self.current = if updated { None } else { Some(s.clone()) };
        Ok(EpochStep { assortment: s, outcome })
    }

    fn stats(&self) -> &PolicyStats {
        &self.stats
    }

    fn ucb_history(&self) -> &[UcbUpdate] {
        &self.history
    }
}
