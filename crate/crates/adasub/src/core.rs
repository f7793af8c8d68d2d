//! Ground set, states, realizations, and priors.
//!
//! An instance has `n` real items; each item `e` is in one of a small number
//! of states, drawn once from a known prior. A `Realization` fixes the state
//! of every item; a `PartialRealization` records the states of the items
//! observed so far. Policies only ever see partial realizations.
//!
//! Item indices `>= n_real` denote dummy items: artificial no-op choices
//! some policies use to pad their candidate sets. Dummies carry no state and
//! contribute nothing to any objective.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Hard upper bound on real items, so item sets and domains fit in a `u128`
/// bitmask.
pub const MAX_ITEMS: usize = 128;

/// Tolerance for probability-sum validation.
pub const PROB_TOL: f64 = 1e-12;

/// Index of an item. Indices `0..n_real` are real items; larger indices are
/// dummy items when a policy introduces them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub usize);

/// Index into an item's state alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateValue(pub u8);

/// Sizes and alphabets of the ground set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundSet {
    n_real: usize,
    n_dummy: usize,
    alphabets: Vec<u8>,
}

impl GroundSet {
    /// Ground set of `n_real` items sharing one alphabet of `states` states.
    pub fn uniform(n_real: usize, states: u8) -> Result<Self> {
        Self::with_alphabets(vec![states; n_real])
    }

    /// Ground set with a per-item state alphabet size.
    pub fn with_alphabets(alphabets: Vec<u8>) -> Result<Self> {
        let n_real = alphabets.len();
        if n_real == 0 {
            return Err(Error::invalid_param("n_real", "ground set must be non-empty"));
        }
        if n_real > MAX_ITEMS {
            return Err(Error::invalid_param(
                "n_real",
                format!("at most {MAX_ITEMS} items are supported, got {n_real}"),
            ));
        }
        if let Some(i) = alphabets.iter().position(|&a| a == 0) {
            return Err(Error::invalid_param(
                "alphabets",
                format!("item {i} has an empty state alphabet"),
            ));
        }
        Ok(GroundSet {
            n_real,
            n_dummy: 0,
            alphabets,
        })
    }

    /// Same ground set extended by `n_dummy` dummy items.
    pub fn with_dummies(&self, n_dummy: usize) -> Self {
        GroundSet {
            n_real: self.n_real,
            n_dummy,
            alphabets: self.alphabets.clone(),
        }
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn n_dummy(&self) -> usize {
        self.n_dummy
    }

    pub fn n_total(&self) -> usize {
        self.n_real + self.n_dummy
    }

    pub fn is_dummy(&self, item: ItemId) -> bool {
        item.0 >= self.n_real
    }

    pub fn alphabet(&self, item: ItemId) -> u8 {
        self.alphabets[item.0]
    }

    pub fn real_items(&self) -> impl Iterator<Item = ItemId> {
        (0..self.n_real).map(ItemId)
    }

    pub fn check_real(&self, item: ItemId) -> Result<()> {
        if item.0 < self.n_real {
            Ok(())
        } else {
            Err(Error::InvalidItem {
                item: item.0,
                total: self.n_real,
            })
        }
    }

    pub fn check_any(&self, item: ItemId) -> Result<()> {
        if item.0 < self.n_total() {
            Ok(())
        } else {
            Err(Error::InvalidItem {
                item: item.0,
                total: self.n_total(),
            })
        }
    }

    /// Number of full realizations, or an error when it exceeds `cap`.
    pub fn realization_count(&self, cap: usize) -> Result<usize> {
        let mut count: usize = 1;
        for &a in &self.alphabets {
            count = count.saturating_mul(a as usize);
            if count > cap {
                return Err(Error::EnumerationCapExceeded { needed: count, cap });
            }
        }
        Ok(count)
    }
}

/// A set of real items, packed as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ItemSet(u128);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn insert(&mut self, item: ItemId) {
        debug_assert!(item.0 < MAX_ITEMS);
        self.0 |= 1u128 << item.0;
    }

    pub fn with(mut self, item: ItemId) -> Self {
        self.insert(item);
        self
    }

    pub fn remove(&mut self, item: ItemId) {
        self.0 &= !(1u128 << item.0);
    }

    pub fn contains(&self, item: ItemId) -> bool {
        item.0 < MAX_ITEMS && self.0 & (1u128 << item.0) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(&self, other: &ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(&self, other: &ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ItemId> + '_ {
        let mask = self.0;
        (0..MAX_ITEMS).filter(move |i| mask & (1u128 << i) != 0).map(ItemId)
    }

    /// The raw bitmask; stable across identical sets.
    pub fn bits(&self) -> u128 {
        self.0
    }
}

impl FromIterator<ItemId> for ItemSet {
    fn from_iter<T: IntoIterator<Item = ItemId>>(iter: T) -> Self {
        let mut s = ItemSet::EMPTY;
        for item in iter {
            s.insert(item);
        }
        s
    }
}

/// A full assignment of a state to every real item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Realization {
    states: Vec<StateValue>,
}

impl Realization {
    pub fn new(states: Vec<StateValue>) -> Self {
        Realization { states }
    }

    pub fn n_items(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, item: ItemId) -> StateValue {
        self.states[item.0]
    }

    pub fn states(&self) -> &[StateValue] {
        &self.states
    }
}

/// The states observed so far, in observation order.
///
/// Insertion order is kept because policies observe items in sequence, but
/// two partial realizations compare (and hash) as equal when they contain
/// the same `(item, state)` pairs in any order.
#[derive(Debug, Clone, Default)]
pub struct PartialRealization {
    obs: Vec<(ItemId, StateValue)>,
    dom: u128,
}

impl PartialRealization {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(usize, u8)]) -> Result<Self> {
        let mut psi = Self::new();
        for &(e, s) in pairs {
            psi.observe(ItemId(e), StateValue(s))?;
        }
        Ok(psi)
    }

    /// Record the observation of `item` in state `state`.
    pub fn observe(&mut self, item: ItemId, state: StateValue) -> Result<()> {
        if item.0 >= MAX_ITEMS {
            return Err(Error::InvalidItem {
                item: item.0,
                total: MAX_ITEMS,
            });
        }
        if self.contains(item) {
            return Err(Error::DuplicateObservation { item: item.0 });
        }
        self.obs.push((item, state));
        self.dom |= 1u128 << item.0;
        Ok(())
    }

    pub fn extended(&self, item: ItemId, state: StateValue) -> Result<Self> {
        let mut next = self.clone();
        next.observe(item, state)?;
        Ok(next)
    }

    pub fn contains(&self, item: ItemId) -> bool {
        item.0 < MAX_ITEMS && self.dom & (1u128 << item.0) != 0
    }

    pub fn state_of(&self, item: ItemId) -> Option<StateValue> {
        if !self.contains(item) {
            return None;
        }
        self.obs.iter().find(|(e, _)| *e == item).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Observations in the order they were made.
    pub fn observations(&self) -> &[(ItemId, StateValue)] {
        &self.obs
    }

    /// The domain as an item set.
    pub fn domain(&self) -> ItemSet {
        ItemSet(self.dom)
    }

    /// Observations sorted by item id; the canonical set form.
    pub fn canonical(&self) -> Vec<(ItemId, StateValue)> {
        let mut v = self.obs.clone();
        v.sort_unstable_by_key(|(e, _)| *e);
        v
    }
}

impl PartialEq for PartialRealization {
    fn eq(&self, other: &Self) -> bool {
        self.dom == other.dom && self.canonical() == other.canonical()
    }
}

impl Eq for PartialRealization {}

impl std::hash::Hash for PartialRealization {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

/// True iff `phi` and `psi` agree on every item of `psi`'s domain.
pub fn is_consistent(phi: &Realization, psi: &PartialRealization) -> Result<bool> {
    for &(item, state) in psi.observations() {
        if item.0 >= phi.n_items() {
            return Err(Error::InvalidItem {
                item: item.0,
                total: phi.n_items(),
            });
        }
        if phi.state(item) != state {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff `a`'s domain is contained in `b`'s and their states agree there.
pub fn is_subrealization(a: &PartialRealization, b: &PartialRealization) -> bool {
    if !a.domain().is_subset_of(&b.domain()) {
        return false;
    }
    a.observations()
        .iter()
        .all(|&(item, state)| b.state_of(item) == Some(state))
}

/// Prior distribution over realizations.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Independent per-item categorical distributions; `probs[e][o]` is the
    /// probability that item `e` is in state `o`.
    Independent(Vec<Vec<f64>>),
    /// Explicit joint table; only viable for small instances.
    Joint(Vec<(Realization, f64)>),
}

impl Prior {
    /// Independent two-state prior where every item is in state 1 with
    /// probability `p`.
    pub fn bernoulli(n: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid_param("p", format!("{p} not in [0, 1]")));
        }
        Ok(Prior::Independent(vec![vec![1.0 - p, p]; n]))
    }

    pub fn n_items(&self) -> usize {
        match self {
            Prior::Independent(probs) => probs.len(),
            Prior::Joint(table) => table.first().map_or(0, |(phi, _)| phi.n_items()),
        }
    }

    /// Validate ranges and sums against the ground set.
    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        match self {
            Prior::Independent(probs) => {
                if probs.len() != ground.n_real() {
                    return Err(Error::invalid_instance(
                        "prior",
                        format!("{} item distributions for {} items", probs.len(), ground.n_real()),
                    ));
                }
                for (i, dist) in probs.iter().enumerate() {
                    if dist.len() != ground.alphabet(ItemId(i)) as usize {
                        return Err(Error::invalid_instance(
                            format!("prior.item[{i}]"),
                            format!(
                                "{} state probabilities for an alphabet of {}",
                                dist.len(),
                                ground.alphabet(ItemId(i))
                            ),
                        ));
                    }
                    validate_dist(&format!("prior.item[{i}]"), dist)?;
                }
            }
            Prior::Joint(table) => {
                if table.is_empty() {
                    return Err(Error::invalid_instance("prior.joint", "empty table"));
                }
                // Joint tables feed exact-enumeration paths directly, so the
                // default enumeration cap bounds their size.
                let cap = Limits::default().enum_cap;
                if table.len() > cap {
                    return Err(Error::invalid_instance(
                        "prior.joint",
                        format!("{} rows exceed the joint-table cap of {cap}", table.len()),
                    ));
                }
                let mut total = 0.0;
                for (idx, (phi, p)) in table.iter().enumerate() {
                    if phi.n_items() != ground.n_real() {
                        return Err(Error::invalid_instance(
                            format!("prior.joint[{idx}]"),
                            "realization length does not match the ground set",
                        ));
                    }
                    for item in ground.real_items() {
                        if phi.state(item).0 >= ground.alphabet(item) {
                            return Err(Error::invalid_instance(
                                format!("prior.joint[{idx}]"),
                                format!("state of item {} outside its alphabet", item.0),
                            ));
                        }
                    }
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::invalid_instance(
                            format!("prior.joint[{idx}]"),
                            format!("probability {p} not in [0, 1]"),
                        ));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::invalid_instance(
                        "prior.joint",
                        format!("probabilities sum to {total}, expected 1"),
                    ));
                }
                // Duplicate realizations would make conditionals ambiguous.
                let mut seen = BTreeMap::new();
                for (idx, (phi, _)) in table.iter().enumerate() {
                    let key: Vec<u8> = phi.states().iter().map(|s| s.0).collect();
                    if let Some(prev) = seen.insert(key, idx) {
                        return Err(Error::invalid_instance(
                            format!("prior.joint[{idx}]"),
                            format!("duplicates the realization at entry {prev}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability that a random realization is consistent with `psi`.
    pub fn consistency_prob(&self, psi: &PartialRealization) -> Result<f64> {
        match self {
            Prior::Independent(probs) => {
                let mut p = 1.0;
                for &(item, state) in psi.observations() {
                    let dist = probs.get(item.0).ok_or(Error::InvalidItem {
                        item: item.0,
                        total: probs.len(),
                    })?;
                    p *= dist.get(state.0 as usize).copied().unwrap_or(0.0);
                }
                Ok(p)
            }
            Prior::Joint(table) => {
                let mut p = 0.0;
                for (phi, q) in table {
                    if is_consistent(phi, psi)? {
                        p += q;
                    }
                }
                Ok(p)
            }
        }
    }

    /// Condition the prior on `psi`; errors when `psi` has zero probability.
    pub fn condition(&self, psi: &PartialRealization) -> Result<Conditional> {
        if self.consistency_prob(psi)? <= 0.0 {
            return Err(Error::NullConditioning);
        }
        match self {
            Prior::Independent(probs) => {
                let mut marginals = probs.clone();
                for &(item, state) in psi.observations() {
                    let dist = &mut marginals[item.0];
                    for (o, p) in dist.iter_mut().enumerate() {
                        *p = if o == state.0 as usize { 1.0 } else { 0.0 };
                    }
                }
                Ok(Conditional::Factored { marginals })
            }
            Prior::Joint(table) => {
                let mut rows = Vec::new();
                let mut total = 0.0;
                for (phi, p) in table {
                    if *p > 0.0 && is_consistent(phi, psi)? {
                        rows.push((phi.clone(), *p));
                        total += p;
                    }
                }
                for (_, p) in &mut rows {
                    *p /= total;
                }
                Ok(Conditional::Table { rows })
            }
        }
    }

    /// The realizations consistent with `psi`, renormalized; the exact form
    /// of the conditional distribution.
    pub fn conditional_realizations(
        &self,
        psi: &PartialRealization,
        cap: usize,
    ) -> Result<Vec<(Realization, f64)>> {
        self.condition(psi)?.enumerate(cap)
    }

    /// All positive-probability realizations with their probabilities.
    pub fn support(&self, cap: usize) -> Result<Vec<(Realization, f64)>> {
        self.condition(&PartialRealization::new())?.enumerate(cap)
    }

    /// Distribution of `item`'s state given `psi`.
    pub fn conditional_state_dist(
        &self,
        item: ItemId,
        psi: &PartialRealization,
    ) -> Result<Vec<(StateValue, f64)>> {
        if let Some(s) = psi.state_of(item) {
            return Ok(vec![(s, 1.0)]);
        }
        match self {
            Prior::Independent(probs) => {
                let dist = probs.get(item.0).ok_or(Error::InvalidItem {
                    item: item.0,
                    total: probs.len(),
                })?;
                // Observed items elsewhere do not move an independent marginal,
                // but psi must still be a possible event.
                if self.consistency_prob(psi)? <= 0.0 {
                    return Err(Error::NullConditioning);
                }
                Ok(dist
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(o, p)| (StateValue(o as u8), *p))
                    .collect())
            }
            Prior::Joint(table) => {
                if item.0 >= self.n_items() {
                    return Err(Error::InvalidItem {
                        item: item.0,
                        total: self.n_items(),
                    });
                }
                let mut acc: BTreeMap<u8, f64> = BTreeMap::new();
                let mut total = 0.0;
                for (phi, p) in table {
                    if *p > 0.0 && is_consistent(phi, psi)? {
                        *acc.entry(phi.state(item).0).or_insert(0.0) += p;
                        total += p;
                    }
                }
                if total <= 0.0 {
                    return Err(Error::NullConditioning);
                }
                Ok(acc
                    .into_iter()
                    .map(|(o, p)| (StateValue(o), p / total))
                    .collect())
            }
        }
    }

    /// Draw a realization from the prior.
    pub fn sample(&self, rng: &mut Stream) -> Realization {
        match self {
            Prior::Independent(probs) => {
                let states = probs.iter().map(|dist| sample_categorical(dist, rng)).collect();
                Realization::new(states)
            }
            Prior::Joint(table) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (phi, p) in table {
                    acc += p;
                    if u < acc {
                        return phi.clone();
                    }
                }
                table.last().expect("non-empty table").0.clone()
            }
        }
    }
}

fn sample_categorical(dist: &[f64], rng: &mut Stream) -> StateValue {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (o, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return StateValue(o as u8);
        }
    }
    StateValue((dist.len() - 1) as u8)
}

fn validate_dist(field: &str, dist: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for p in dist {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::invalid_instance(field, format!("probability {p} not in [0, 1]")));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid_instance(
            field,
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

/// A prior conditioned on a partial realization.
///
/// Independent priors stay in factored form so sampling never pays for an
/// exponential expansion; `enumerate` materializes the table on demand.
#[derive(Debug, Clone)]
pub enum Conditional {
    Factored { marginals: Vec<Vec<f64>> },
    Table { rows: Vec<(Realization, f64)> },
}

impl Conditional {
    /// Materialize the conditional as an explicit weighted list.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<(Realization, f64)>> {
        match self {
            Conditional::Table { rows } => Ok(rows.clone()),
            Conditional::Factored { marginals } => {
                let mut count: usize = 1;
                for dist in marginals {
                    let support = dist.iter().filter(|p| **p > 0.0).count().max(1);
                    count = count.saturating_mul(support);
                    if count > cap {
                        return Err(Error::EnumerationCapExceeded { needed: count, cap });
                    }
                }
                let mut out = Vec::with_capacity(count);
                let mut states = vec![StateValue(0); marginals.len()];
                expand_product(marginals, 0, 1.0, &mut states, &mut out);
                Ok(out)
            }
        }
    }

    /// Draw one realization from the conditional.
    pub fn sample(&self, rng: &mut Stream) -> Realization {
        match self {
            Conditional::Factored { marginals } => {
                let states = marginals.iter().map(|dist| sample_categorical(dist, rng)).collect();
                Realization::new(states)
            }
            Conditional::Table { rows } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (phi, p) in rows {
                    acc += p;
                    if u < acc {
                        return phi.clone();
                    }
                }
                rows.last().expect("non-empty conditional").0.clone()
            }
        }
    }
}

fn expand_product(
    marginals: &[Vec<f64>],
    item: usize,
    weight: f64,
    states: &mut Vec<StateValue>,
    out: &mut Vec<(Realization, f64)>,
) {
    if item == marginals.len() {
        out.push((Realization::new(states.clone()), weight));
        return;
    }
    for (o, p) in marginals[item].iter().enumerate() {
        if *p > 0.0 {
            states[item] = StateValue(o as u8);
            expand_product(marginals, item + 1, weight * p, states, out);
        }
    }
}

/// Caps guarding exact-enumeration and policy-tree expansion paths.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Maximum number of realizations an exact enumeration may touch.
    pub enum_cap: usize,
    /// Maximum number of nodes a policy-tree expansion or DP may visit.
    pub branch_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            enum_cap: 1 << 12,
            branch_cap: 10_000_000,
        }
    }
}

/// A spendable node budget; exceeding it is an explicit error, never a
/// silent fallback.
#[derive(Debug)]
pub struct WorkBudget {
    cap: u64,
    remaining: u64,
}

impl WorkBudget {
    pub fn new(cap: u64) -> Self {
        WorkBudget { cap, remaining: cap }
    }

    pub fn spend(&mut self, amount: u64) -> Result<()> {
        if self.remaining < amount {
            return Err(Error::BranchCapExceeded { cap: self.cap });
        }
        self.remaining -= amount;
        Ok(())
    }
}
