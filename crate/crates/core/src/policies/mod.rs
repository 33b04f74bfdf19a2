//! Epoch-level bandit policies.
//!
//! Every policy offers one assortment per epoch through [`Policy::step`].
//! They differ in when the per-item UCBs (and hence the offered set) are
//! allowed to change:
//!
//! * [`DeferredUcb`] with [`UpdateGate::EveryEpoch`]: the per-epoch baseline.
//! * [`DeferredUcb`] with [`UpdateGate::PowerOfTwo`]: AT-DUCB, anytime.
//! * [`FhDucb`]: stage thresholds that use the known horizon.
//! * [`Esucb`]: bisection on the optimal revenue with a fixed-θ argmax.

mod atducb;
mod esucb;
mod estimator;
mod fhducb;

use serde::{Deserialize, Serialize};

use crate::environment::{EpochOutcome, Environment};
use crate::error::{Error, Result};
use crate::model::{Assortment, Instance};

pub use atducb::{DeferredUcb, UpdateGate};
pub use esucb::{esucb_t_max, CheckSummary, Esucb, EsucbConfig, OuterIteration};
pub use estimator::{
    ucb_radius_atducb, ucb_radius_check, ucb_radius_fhducb, EstimatorState, UcbUpdate,
};
pub use fhducb::{fh_condition, fh_tau0, FhDucb, FhItemState, FhState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    BaselineUcb,
    AtDucb,
    FhDucb,
    Esucb,
    EsucbNoreset,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::BaselineUcb,
        PolicyKind::AtDucb,
        PolicyKind::FhDucb,
        PolicyKind::Esucb,
        PolicyKind::EsucbNoreset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::BaselineUcb => "baseline_ucb",
            PolicyKind::AtDucb => "at_ducb",
            PolicyKind::FhDucb => "fh_ducb",
            PolicyKind::Esucb => "esucb",
            PolicyKind::EsucbNoreset => "esucb_noreset",
        }
    }

    /// Anytime policies never read the horizon, so one long run can be
    /// checkpointed at every shorter horizon.
    pub fn is_anytime(self) -> bool {
        matches!(self, PolicyKind::BaselineUcb | PolicyKind::AtDucb)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What one epoch offered and what happened.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStep {
    pub assortment: Assortment,
    pub outcome: EpochOutcome,
}

/// Counters every policy keeps for the structural switch bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PolicyStats {
    pub epochs: u64,
    /// Times the UCB update line fired, per item.
    pub ucb_updates: Vec<u64>,
    /// Times the offered assortment was recomputed from the UCBs.
    pub assortment_recomputations: u64,
}

impl PolicyStats {
    fn new(n_items: usize) -> Self {
        Self {
            ucb_updates: vec![0; n_items],
            ..Self::default()
        }
    }

    pub fn total_ucb_updates(&self) -> u64 {
        self.ucb_updates.iter().sum()
    }
}

pub trait Policy {
    fn kind(&self) -> PolicyKind;

    /// Runs one epoch. The environment's clock must not be exhausted.
    fn step(&mut self, env: &mut Environment) -> Result<EpochStep>;

    fn stats(&self) -> &PolicyStats;

    /// Every UCB update in firing order.
    fn ucb_history(&self) -> &[UcbUpdate];
}

/// Serializable policy selection with the ESUCB knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyKind,
    /// Confidence level; `1/T` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    /// Multiplier applied to `c1`, `c2` and `c3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_scale: Option<f64>,
    /// Picks `constant_scale` per horizon so that the first check lasts
    /// this fraction of `T`. Exclusive with `constant_scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_check_fraction: Option<f64>,
}

impl PolicySpec {
    pub fn new(name: PolicyKind) -> Self {
        Self {
            name,
            delta: None,
            c1: None,
            c2: None,
            c3: None,
            constant_scale: None,
            first_check_fraction: None,
        }
    }

    fn is_esucb(&self) -> bool {
        matches!(self.name, PolicyKind::Esucb | PolicyKind::EsucbNoreset)
    }

    pub fn validate(&self) -> Result<()> {
        let esucb_only = [
            ("delta", self.delta),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("constant_scale", self.constant_scale),
            ("first_check_fraction", self.first_check_fraction),
        ];
        for (field, value) in esucb_only {
            let Some(x) = value else { continue };
            if !self.is_esucb() {
                return Err(Error::config(field, format!("only valid for esucb policies, not {}", self.name)));
            }
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::config(field, format!("must be positive and finite, got {x}")));
            }
        }
        if self.delta.is_some_and(|d| d >= 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if self.constant_scale.is_some() && self.first_check_fraction.is_some() {
            return Err(Error::config(
                "first_check_fraction",
                "cannot be combined with constant_scale",
            ));
        }
        Ok(())
    }

    /// ESUCB configuration for a given horizon (defaults filled in).
    pub fn esucb_config(&self, n_items: usize, horizon: u64) -> EsucbConfig {
        let mut cfg = EsucbConfig {
            reset_counters: self.name != PolicyKind::EsucbNoreset,
            ..EsucbConfig::default()
        };
        cfg.delta = self.delta;
        if let Some(c) = self.c1 {
            cfg.c1 = c;
        }
        if let Some(c) = self.c2 {
            cfg.c2 = c;
        }
        if let Some(c) = self.c3 {
            cfg.c3 = c;
        }
        if let Some(s) = self.constant_scale {
            cfg.constant_scale = s;
        }
        if let Some(f) = self.first_check_fraction {
            cfg.constant_scale = cfg.scale_for_first_check(n_items, horizon, f);
        }
        cfg
    }

    /// Instantiates the policy for one run on `inst` with horizon `horizon`.
    pub fn build(&self, inst: &Instance, horizon: u64) -> Result<Box<dyn Policy + Send>> {
        self.validate()?;
        Ok(match self.name {
            PolicyKind::BaselineUcb => Box::new(DeferredUcb::new(inst, UpdateGate::EveryEpoch)),
            PolicyKind::AtDucb => Box::new(DeferredUcb::new(inst, UpdateGate::PowerOfTwo)),
            PolicyKind::FhDucb => Box::new(FhDucb::new(inst, horizon)?),
            PolicyKind::Esucb | PolicyKind::EsucbNoreset => Box::new(Esucb::new(
                inst,
                horizon,
                self.esucb_config(inst.n_items(), horizon),
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_round_trip_and_validation() {
        let spec: PolicySpec =
            serde_json::from_str(r#"{"name":"esucb","constant_scale":0.001,"delta":0.01}"#).unwrap();
        assert_eq!(spec.name, PolicyKind::Esucb);
        spec.validate().unwrap();
        let cfg = spec.esucb_config(5, 1000);
        assert!(cfg.reset_counters);
        assert_eq!(cfg.delta, Some(0.01));

        let bad: PolicySpec = serde_json::from_str(r#"{"name":"at_ducb","c1":3}"#).unwrap();
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "c1"));

        let both: PolicySpec = serde_json::from_str(
            r#"{"name":"esucb_noreset","constant_scale":1,"first_check_fraction":0.1}"#,
        )
        .unwrap();
        assert!(both.validate().is_err());
        assert!(serde_json::from_str::<PolicySpec>(r#"{"name":"thompson"}"#).is_err());
        assert!(serde_json::from_str::<PolicySpec>(r#"{"name":"esucb","c4":1}"#).is_err());
    }

    #[test]
    fn noreset_variant_keeps_counters() {
        let cfg = PolicySpec::new(PolicyKind::EsucbNoreset).esucb_config(3, 100);
        assert!(!cfg.reset_counters);
        assert!(PolicyKind::AtDucb.is_anytime());
        assert!(!PolicyKind::FhDucb.is_anytime());
    }
}
