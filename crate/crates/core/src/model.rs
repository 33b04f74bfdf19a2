//! Problem instances, assortments, and MNL choice arithmetic.
//!
//! Items are indexed from zero internally. Every external format (JSON,
//! CSV, `Display`) uses one-based indices, with `0` reserved for the
//! no-purchase option.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An MNL assortment problem: `n_items` products, a capacity, per-item
/// rewards and preference weights. The no-purchase weight is fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct Instance {
    n_items: usize,
    capacity: usize,
    rewards: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    n_items: usize,
    capacity: usize,
    rewards: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.n_items, raw.capacity, raw.rewards, raw.weights)
    }
}

impl Instance {
    pub const NO_PURCHASE_WEIGHT: f64 = 1.0;

    pub fn new(
        n_items: usize,
        capacity: usize,
        rewards: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::InvalidInstance("n_items must be positive".into()));
        }
        if capacity == 0 || capacity > n_items {
            return Err(Error::InvalidInstance(format!(
                "capacity {capacity} outside [1, {n_items}]"
            )));
        }
        if rewards.len() != n_items {
            return Err(Error::InvalidInstance(format!(
                "expected {n_items} rewards, got {}",
                rewards.len()
            )));
        }
        if weights.len() != n_items {
            return Err(Error::InvalidInstance(format!(
                "expected {n_items} weights, got {}",
                weights.len()
            )));
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInstance(format!(
                    "reward of item {} is {r}, outside [0, 1]",
                    i + 1
                )));
            }
        }
        for (i, &v) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInstance(format!(
                    "weight of item {} is {v}, outside [0, 1]",
                    i + 1
                )));
            }
        }
        Ok(Self {
            n_items,
            capacity,
            rewards,
            weights,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(0.0, f64::max)
    }

    /// Bound on the item switches of a single assortment switch.
    pub fn max_item_switch(&self) -> u64 {
        (2 * self.capacity).min(self.n_items) as u64
    }

    /// Same instance with a different capacity.
    pub fn with_capacity(&self, capacity: usize) -> Result<Self> {
        Self::new(
            self.n_items,
            capacity,
            self.rewards.clone(),
            self.weights.clone(),
        )
    }

    /// Checks `s` against the item range and capacity.
    pub fn validate(&self, s: &Assortment) -> Result<()> {
        if let Some(&last) = s.items.last() {
            if last >= self.n_items {
                return Err(Error::InvalidAssortment(format!(
                    "item {} out of range 1..={}",
                    last + 1,
                    self.n_items
                )));
            }
        }
        if s.len() > self.capacity {
            return Err(Error::InvalidAssortment(format!(
                "{} items offered with capacity {}",
                s.len(),
                self.capacity
            )));
        }
        Ok(())
    }

    fn check_override<'a>(&'a self, weights: Option<&'a [f64]>) -> Result<&'a [f64]> {
        match weights {
            None => Ok(&self.weights),
            Some(w) if w.len() != self.n_items => Err(Error::param(
                "weights_override",
                format!("expected {} entries, got {}", self.n_items, w.len()),
            )),
            Some(w) if w.iter().any(|&x| !(x >= 0.0)) => Err(Error::param(
                "weights_override",
                "entries must be nonnegative",
            )),
            Some(w) => Ok(w),
        }
    }
}

/// A canonical (sorted, duplicate-free) set of zero-based item indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assortment {
    items: Vec<usize>,
}

impl Assortment {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the canonical form of an arbitrary collection of zero-based indices.
    pub fn from_indices(items: impl IntoIterator<Item = usize>) -> Self {
        let mut items: Vec<usize> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        Self { items }
    }

    /// Builds an assortment from one-based indices, as used in external formats.
    pub fn from_one_based(items: &[usize]) -> Result<Self> {
        if items.contains(&0) {
            return Err(Error::InvalidAssortment(
                "item indices are one-based; 0 is the no-purchase option".into(),
            ));
        }
        Ok(Self::from_indices(items.iter().map(|&i| i - 1)))
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.items.iter().map(|&i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    /// Size of the symmetric difference, by a merge over both sorted lists.
    pub fn symmetric_difference_len(&self, other: &Assortment) -> usize {
        let (a, b) = (&self.items, &other.items);
        let (mut i, mut j, mut diff) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    diff += 1;
                    i += 1;
                }
                Ordering::Greater => {
                    diff += 1;
                    j += 1;
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        diff + (a.len() - i) + (b.len() - j)
    }

    /// Orders assortments by `Σ_{i∈S} 2^i` without forming the sum: the set
    /// that lacks the largest element of the symmetric difference is smaller.
    pub fn cmp_power_sum(&self, other: &Assortment) -> Ordering {
        let (a, b) = (&self.items, &other.items);
        let (mut i, mut j) = (a.len(), b.len());
        while i > 0 && j > 0 {
            match a[i - 1].cmp(&b[j - 1]) {
                Ordering::Equal => {
                    i -= 1;
                    j -= 1;
                }
                ord => return ord,
            }
        }
        (i > 0).cmp(&(j > 0))
    }
}

impl fmt::Display for Assortment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.items.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

impl Serialize for Assortment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Assortment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        Assortment::from_one_based(&items).map_err(serde::de::Error::custom)
    }
}

/// Purchase probabilities under the MNL model; index 0 is no-purchase and
/// index `i + 1` is item `i`.
pub fn choice_probabilities(inst: &Instance, s: &Assortment) -> Result<Vec<f64>> {
    inst.validate(s)?;
    let denom = Instance::NO_PURCHASE_WEIGHT + s.items().iter().map(|&i| inst.weights[i]).sum::<f64>();
    let mut p = vec![0.0; inst.n_items + 1];
    p[0] = Instance::NO_PURCHASE_WEIGHT / denom;
    for &i in s.items() {
        p[i + 1] = inst.weights[i] / denom;
    }
    Ok(p)
}

/// Expected one-step revenue `R(S, v)`, optionally under substitute weights
/// (e.g. a UCB vector).
pub fn expected_revenue(
    inst: &Instance,
    s: &Assortment,
    weights_override: Option<&[f64]>,
) -> Result<f64> {
    inst.validate(s)?;
    let weights = inst.check_override(weights_override)?;
    Ok(revenue(&inst.rewards, weights, s.items()))
}

/// Unchecked revenue of a set of zero-based indices.
pub(crate) fn revenue(rewards: &[f64], weights: &[f64], items: &[usize]) -> f64 {
    let (num, den) = items.iter().fold((0.0, 1.0), |(num, den), &i| {
        (num + rewards[i] * weights[i], den + weights[i])
    });
    num / den
}

/// Switching cost charged when the offer changes from one set to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SwitchDelta {
    pub assortment: u64,
    pub items: u64,
}

pub fn switch_deltas(prev: &Assortment, next: &Assortment) -> SwitchDelta {
    let items = prev.symmetric_difference_len(next) as u64;
    SwitchDelta {
        assortment: u64::from(items > 0),
        items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn inst(r: &[f64], v: &[f64], k: usize) -> Instance {
        Instance::new(r.len(), k, r.to_vec(), v.to_vec()).unwrap()
    }

    fn set(items: &[usize]) -> Assortment {
        Assortment::from_one_based(items).unwrap()
    }

    #[test]
    fn empty_assortment_never_purchases() {
        let inst = inst(&[0.3, 0.9], &[0.5, 0.5], 2);
        let p = choice_probabilities(&inst, &Assortment::empty()).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        assert_eq!(expected_revenue(&inst, &Assortment::empty(), None).unwrap(), 0.0);
    }

    #[test]
    fn half_weight_singleton_is_one_third() {
        let inst = inst(&[1.0, 1.0, 1.0], &[0.5, 0.5, 0.5], 1);
        let p = choice_probabilities(&inst, &set(&[2])).unwrap();
        assert_abs_diff_eq!(p[2], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
        for k in 1..=3 {
            let r = expected_revenue(&inst, &set(&[k]), None).unwrap();
            assert_abs_diff_eq!(r, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_probabilities() {
        let inst = inst(&[0.1, 0.1, 0.1], &[0.5, 0.2, 0.9], 3);
        let p = choice_probabilities(&inst, &set(&[1, 2])).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 / 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5 / 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 0.2 / 1.7, epsilon = 1e-15);
        assert_eq!(p[3], 0.0);
    }

    #[test]
    fn hand_evaluated_revenue() {
        let inst = inst(&[0.8, 0.5], &[0.5, 0.2], 2);
        let r = expected_revenue(&inst, &set(&[1, 2]), None).unwrap();
        assert_abs_diff_eq!(r, 0.5 / 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.294_117_6, epsilon = 1e-7);
    }

    #[test]
    fn out_of_range_item_is_rejected() {
        let inst = inst(&[0.5, 0.5], &[0.5, 0.5], 2);
        assert!(matches!(
            choice_probabilities(&inst, &set(&[3])),
            Err(Error::InvalidAssortment(_))
        ));
        let over = inst.with_capacity(1).unwrap();
        assert!(matches!(
            expected_revenue(&over, &set(&[1, 2]), None),
            Err(Error::InvalidAssortment(_))
        ));
        assert!(Assortment::from_one_based(&[0]).is_err());
    }

    #[test]
    fn override_weights_are_checked() {
        let inst = inst(&[0.5, 0.5], &[0.5, 0.5], 2);
        assert!(expected_revenue(&inst, &set(&[1]), Some(&[1.0])).is_err());
        assert!(expected_revenue(&inst, &set(&[1]), Some(&[-0.1, 1.0])).is_err());
        let r = expected_revenue(&inst, &set(&[1]), Some(&[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(r, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn instance_invariants() {
        assert!(Instance::new(0, 0, vec![], vec![]).is_err());
        assert!(Instance::new(2, 3, vec![0.1; 2], vec![0.1; 2]).is_err());
        assert!(Instance::new(2, 0, vec![0.1; 2], vec![0.1; 2]).is_err());
        assert!(Instance::new(2, 1, vec![0.1; 3], vec![0.1; 2]).is_err());
        assert!(Instance::new(2, 1, vec![0.1; 2], vec![1.1, 0.1]).is_err());
        assert!(Instance::new(2, 1, vec![-0.1, 0.1], vec![0.1; 2]).is_err());
        assert!(Instance::new(2, 1, vec![f64::NAN, 0.1], vec![0.1; 2]).is_err());
        assert!(Instance::new(2, 2, vec![0.0, 1.0], vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn switch_delta_examples() {
        let d = switch_deltas(&set(&[1, 2]), &set(&[1, 2]));
        assert_eq!((d.assortment, d.items), (0, 0));
        let d = switch_deltas(&set(&[1, 2]), &set(&[2, 3]));
        assert_eq!((d.assortment, d.items), (1, 2));
        let d = switch_deltas(&set(&[1, 2, 3]), &Assortment::empty());
        assert_eq!((d.assortment, d.items), (1, 3));
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(set(&[3, 1]).to_string(), "{1,3}");
        assert_eq!(Assortment::empty().to_string(), "{}");
        let json = serde_json::to_string(&set(&[2, 5])).unwrap();
        assert_eq!(json, "[2,5]");
    }

    fn power_sum(s: &Assortment) -> u64 {
        s.items().iter().map(|&i| 1u64 << i).sum()
    }

    fn arb_instance() -> impl Strategy<Value = (Instance, Assortment)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                1..=n,
                prop::collection::vec(0.0..=1.0f64, n),
                prop::collection::vec(0.0..=1.0f64, n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(k, r, v, mask)| {
                    let inst = Instance::new(n, k, r, v).unwrap();
                    let s = Assortment::from_indices(
                        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).take(k),
                    );
                    (inst, s)
                })
        })
    }

    fn arb_pair() -> impl Strategy<Value = (usize, usize, Assortment, Assortment)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                Just(n),
                1..=n,
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(n, k, a, b)| {
                    let pick = |m: &[bool]| {
                        Assortment::from_indices(
                            m.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i).take(k),
                        )
                    };
                    (n, k, pick(&a), pick(&b))
                })
        })
    }

    proptest! {
        #[test]
        fn probabilities_form_a_distribution((inst, s) in arb_instance()) {
            let p = choice_probabilities(&inst, &s).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn revenue_matches_probability_weighted_rewards((inst, s) in arb_instance()) {
            let p = choice_probabilities(&inst, &s).unwrap();
            let via_p: f64 = (0..inst.n_items()).map(|i| inst.rewards()[i] * p[i + 1]).sum();
            let r = expected_revenue(&inst, &s, None).unwrap();
            prop_assert!((r - via_p).abs() <= 1e-12);
            prop_assert!(r >= 0.0 && r <= inst.max_reward() + 1e-15);
        }

        #[test]
        fn zero_override_gives_zero_revenue((inst, s) in arb_instance()) {
            let zeros = vec![0.0; inst.n_items()];
            prop_assert_eq!(expected_revenue(&inst, &s, Some(&zeros)).unwrap(), 0.0);
        }

        #[test]
        fn switch_relation_holds((n, k, a, b) in arb_pair()) {
            let d = switch_deltas(&a, &b);
            prop_assert!(d.assortment <= d.items);
            prop_assert!(d.items <= (2 * k).min(n) as u64 * d.assortment);
        }

        #[test]
        fn power_sum_order_matches_arithmetic(
            a in prop::collection::btree_set(0usize..40, 0..8),
            b in prop::collection::btree_set(0usize..40, 0..8),
        ) {
            let a = Assortment::from_indices(a);
            let b = Assortment::from_indices(b);
            prop_assert_eq!(a.cmp_power_sum(&b), power_sum(&a).cmp(&power_sum(&b)));
        }
    }
}
