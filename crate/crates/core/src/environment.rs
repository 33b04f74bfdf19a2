//! Stochastic MNL customers and the epoch-based offering routine.
//!
//! One customer arrives per time step. An epoch offers a fixed assortment
//! until the first no-purchase, so per-item purchase counts within an epoch
//! are geometric with mean `v_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Assortment, Instance};

/// Generator behind every simulation; recorded in result provenance.
pub type SimRng = ChaCha8Rng;
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9, seed_from_u64)";

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimClock {
    t: u64,
    horizon: Option<u64>,
    rng_seed: u64,
}

impl SimClock {
    pub fn new(horizon: Option<u64>, rng_seed: u64) -> Self {
        Self {
            t: 0,
            horizon,
            rng_seed,
        }
    }

    /// Steps consumed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn horizon(&self) -> Option<u64> {
        self.horizon
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn is_exhausted(&self) -> bool {
        self.horizon.is_some_and(|h| self.t >= h)
    }

    fn tick(&mut self) {
        self.t += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    /// Clock value before the epoch's first step.
    pub start_t: u64,
    /// Purchase count per item (zero for items not offered).
    pub purchases: Vec<u64>,
    pub epoch_length: u64,
    /// The horizon ended the epoch before a no-purchase was observed.
    pub truncated: bool,
    pub realized_revenue: f64,
    /// Choice at each step; `None` is the no-purchase option.
    pub choices: Vec<Option<usize>>,
}

impl EpochOutcome {
    pub fn total_purchases(&self) -> u64 {
        self.purchases.iter().sum()
    }
}

/// Draws one customer's choice from the MNL probabilities of `s`.
///
/// Always consumes exactly one uniform draw.
pub fn sample_choice(inst: &Instance, s: &Assortment, rng: &mut impl Rng) -> Option<usize> {
    let weights = inst.weights();
    let denom = s
        .items()
        .iter()
        .fold(Instance::NO_PURCHASE_WEIGHT, |acc, &i| acc + weights[i]);
    let u = rng.random::<f64>() * denom;
    let mut acc = Instance::NO_PURCHASE_WEIGHT;
    if u < acc {
        return None;
    }
    for &i in s.items() {
        acc += weights[i];
        if u < acc {
            return Some(i);
        }
    }
    // u rounded up to the full mass
    s.items().iter().rev().copied().find(|&i| weights[i] > 0.0)
}

/// Offers `s` until a no-purchase is observed or the horizon is reached.
pub fn run_epoch(
    inst: &Instance,
    s: &Assortment,
    clock: &mut SimClock,
    rng: &mut impl Rng,
) -> Result<EpochOutcome> {
    if clock.is_exhausted() {
        return Err(Error::HorizonExhausted { t: clock.t });
    }
    debug_assert!(inst.validate(s).is_ok());
    let mut out = EpochOutcome {
        start_t: clock.t,
        purchases: vec![0; inst.n_items()],
        epoch_length: 0,
        truncated: false,
        realized_revenue: 0.0,
        choices: Vec::new(),
    };
    loop {
        clock.tick();
        out.epoch_length += 1;
        let choice = sample_choice(inst, s, rng);
        out.choices.push(choice);
        match choice {
            None => return Ok(out),
            Some(i) => {
                out.purchases[i] += 1;
                out.realized_revenue += inst.rewards()[i];
            }
        }
        if clock.is_exhausted() {
            out.truncated = true;
            return Ok(out);
        }
    }
}

/// One simulation run's world: the true instance, its clock and RNG stream.
#[derive(Debug, Clone)]
pub struct Environment {
    instance: Instance,
    clock: SimClock,
    rng: SimRng,
}

impl Environment {
    pub fn new(instance: Instance, horizon: Option<u64>, seed: u64) -> Self {
        Self {
            instance,
            clock: SimClock::new(horizon, seed),
            rng: seeded_rng(seed),
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn t(&self) -> u64 {
        self.clock.t
    }

    pub fn horizon(&self) -> Option<u64> {
        self.clock.horizon
    }

    pub fn is_exhausted(&self) -> bool {
        self.clock.is_exhausted()
    }

    pub fn run_epoch(&mut self, s: &Assortment) -> Result<EpochOutcome> {
        run_epoch(&self.instance, s, &mut self.clock, &mut self.rng)
    }
}
