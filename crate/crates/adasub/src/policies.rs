//! Adaptive selection policies.
//!
//! A policy maps the partial realization observed so far to the next item to
//! select, or to a null action that consumes the round without selecting.
//! Six policies are provided:
//!
//! * `adaptive_greedy(k)` — k rounds of exact argmax over `Δ(e | ψ)`.
//! * `adaptive_random_greedy(k)` — pads the candidate pool with `2k − 1`
//!   zero-gain dummy items, then samples uniformly from the `k` best
//!   candidates each round; the dummies keep it from ever selecting an item
//!   with negative expected gain.
//! * `linear_time(k, ε)` — each round ranks a random subset of size
//!   `min{⌈qn⌉, n}` and accepts the `⌈d⌉`-th best when its gain is
//!   non-negative, with `q = 8·ln(1/(2ε))/(kε²)`, `s = k·min{⌈qn⌉, n}/n`,
//!   and `d` uniform on `(0, s]`. Its query count is independent of `k`.
//! * `adaptive_stochastic_greedy(k, ε)` — each round takes the argmax over a
//!   random subset of size `min{n, ⌈(n/k)·ln(1/ε)⌉}`.
//! * `locally_greedy(matroid)` — processes partition-matroid blocks in index
//!   order, running `dᵢ` greedy rounds inside block `Bᵢ`.
//! * `generalized_stochastic_greedy(matroid, ε)` — same block schedule, but
//!   each inner round takes the argmax over a random subset of
//!   `min{|Bᵢ|, ⌈(|Bᵢ|/dᵢ)·ln(1/ε)⌉}` block members.
//!
//! `concat(a, b)` runs `a` to completion and then `b` from a fresh, empty
//! observation history; the realized value is taken on the union of their
//! selections. Sampling all subsets without replacement and breaking every
//! tie by a total order (larger gain, then live items before exhausted ones,
//! then smaller id) keeps each policy's per-round action distribution
//! exactly computable, which is what the exact evaluator expands.

use std::collections::BTreeMap;

use rand::Rng;

use crate::core::{
    GroundSet, ItemId, ItemSet, Limits, PartialRealization, Realization, WorkBudget,
};
use crate::error::{Error, Result};
use crate::objectives::Instance;
use crate::oracle::{self, ValueOracle};
use crate::rng::{self, Stream};

/// What a policy does with one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    /// Select (and observe) a real item.
    Select(ItemId),
    /// Consume the round without selecting: a dummy draw, an out-of-range
    /// rank, a negative-gain guard, or a re-selection.
    Skip,
}

/// Disjoint blocks with per-block selection limits.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMatroid {
    blocks: Vec<Vec<ItemId>>,
    limits: Vec<usize>,
}

impl PartitionMatroid {
    pub fn new(blocks: Vec<Vec<ItemId>>, limits: Vec<usize>) -> Result<Self> {
        if blocks.len() != limits.len() {
            return Err(Error::invalid_instance(
                "matroid.limits",
                format!("{} limits for {} blocks", limits.len(), blocks.len()),
            ));
        }
        let mut seen = ItemSet::EMPTY;
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid_instance(
                    format!("matroid.blocks[{i}]"),
                    "empty block",
                ));
            }
            let mut in_block = ItemSet::EMPTY;
            for &item in block {
                if item.0 >= crate::core::MAX_ITEMS {
                    return Err(Error::InvalidItem {
                        item: item.0,
                        total: crate::core::MAX_ITEMS,
                    });
                }
                if seen.contains(item) || in_block.contains(item) {
                    return Err(Error::invalid_instance(
                        format!("matroid.blocks[{i}]"),
                        format!("item {} appears in more than one position", item.0),
                    ));
                }
                in_block.insert(item);
            }
            seen = seen.union(&in_block);
            if limits[i] > block.len() {
                return Err(Error::invalid_instance(
                    format!("matroid.limits[{i}]"),
                    format!("limit {} exceeds block size {}", limits[i], block.len()),
                ));
            }
        }
        Ok(PartitionMatroid { blocks, limits })
    }

    /// Single block over `0..n` with limit `k`; the cardinality special case.
    pub fn single_block(n: usize, k: usize) -> Result<Self> {
        PartitionMatroid::new(vec![(0..n).map(ItemId).collect()], vec![k])
    }

    pub fn blocks(&self) -> &[Vec<ItemId>] {
        &self.blocks
    }

    pub fn limits(&self) -> &[usize] {
        &self.limits
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_budget(&self) -> usize {
        self.limits.iter().sum()
    }

    pub fn block_of(&self, item: ItemId) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&item))
    }

    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        for block in &self.blocks {
            for &item in block {
                ground.check_real(item)?;
            }
        }
        Ok(())
    }

    /// Map a global round index onto `(block, round-within-block)`.
    fn round_position(&self, round: usize) -> (usize, usize) {
        let mut r = round;
        for (i, &d) in self.limits.iter().enumerate() {
            if r < d {
                return (i, r);
            }
            r -= d;
        }
        unreachable!("round index {round} beyond the matroid budget")
    }
}

/// Derived parameters of the linear-time policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtParams {
    pub epsilon: f64,
    pub q: f64,
    pub s: f64,
    pub sample_size: usize,
}

impl LtParams {
    pub fn derive(k: usize, epsilon: f64, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid_param("k", "must be at least 1"));
        }
        if n == 0 {
            return Err(Error::invalid_param("n", "must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::invalid_param(
                "epsilon",
                format!("{epsilon} not in (0, 1/2)"),
            ));
        }
        let q = 8.0 * (1.0 / (2.0 * epsilon)).ln() / (k as f64 * epsilon * epsilon);
        let sample_size = ((q * n as f64).ceil() as usize).min(n);
        let s = k as f64 * sample_size as f64 / n as f64;
        Ok(LtParams {
            epsilon,
            q,
            s,
            sample_size,
        })
    }
}

/// Per-round sample size of the stochastic greedy policies:
/// `min{n, ⌈(n/k)·ln(1/ε)⌉}` over a pool of `n` items and a budget of `k`.
pub fn stochastic_sample_size(n: usize, k: usize, epsilon: f64) -> usize {
    let raw = ((n as f64 / k as f64) * (1.0 / epsilon).ln()).ceil() as usize;
    raw.min(n).max(1)
}

/// An adaptive policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Selects nothing.
    Empty,
    /// Selects a fixed item list in order, ignoring observations.
    Fixed { items: Vec<ItemId> },
    Greedy { k: usize },
    RandomGreedy { k: usize },
    LinearTime { k: usize, epsilon: f64 },
    StochasticGreedy { k: usize, epsilon: f64 },
    LocallyGreedy { matroid: PartitionMatroid },
    GeneralizedStochasticGreedy {
        matroid: PartitionMatroid,
        epsilon: f64,
    },
    Concat(Box<Policy>, Box<Policy>),
}

impl Policy {
    pub fn empty() -> Policy {
        Policy::Empty
    }

    pub fn fixed(items: Vec<ItemId>) -> Result<Policy> {
        let mut seen = ItemSet::EMPTY;
        for &item in &items {
            if item.0 >= crate::core::MAX_ITEMS || seen.contains(item) {
                return Err(Error::invalid_param(
                    "items",
                    format!("item {} repeated or out of range", item.0),
                ));
            }
            seen.insert(item);
        }
        Ok(Policy::Fixed { items })
    }

    pub fn adaptive_greedy(k: usize) -> Result<Policy> {
        check_k(k)?;
        Ok(Policy::Greedy { k })
    }

    pub fn adaptive_random_greedy(k: usize) -> Result<Policy> {
        check_k(k)?;
        Ok(Policy::RandomGreedy { k })
    }

    pub fn linear_time(k: usize, epsilon: f64) -> Result<Policy> {
        check_k(k)?;
        // Fails fast on a bad epsilon; n-dependent parts derive later.
        LtParams::derive(k, epsilon, 1)?;
        Ok(Policy::LinearTime { k, epsilon })
    }

    pub fn adaptive_stochastic_greedy(k: usize, epsilon: f64) -> Result<Policy> {
        check_k(k)?;
        check_unit_epsilon(epsilon)?;
        Ok(Policy::StochasticGreedy { k, epsilon })
    }

    pub fn locally_greedy(matroid: PartitionMatroid) -> Policy {
        Policy::LocallyGreedy { matroid }
    }

    pub fn generalized_stochastic_greedy(
        matroid: PartitionMatroid,
        epsilon: f64,
    ) -> Result<Policy> {
        check_unit_epsilon(epsilon)?;
        Ok(Policy::GeneralizedStochasticGreedy { matroid, epsilon })
    }

    pub fn concat(first: Policy, second: Policy) -> Policy {
        Policy::Concat(Box::new(first), Box::new(second))
    }

    /// Check the policy against a concrete ground set.
    pub fn validate(&self, ground: &GroundSet) -> Result<()> {
        match self {
            Policy::Empty => Ok(()),
            Policy::Fixed { items } => items.iter().try_for_each(|&e| ground.check_real(e)),
            Policy::Greedy { k } | Policy::RandomGreedy { k } => check_k_vs_n(*k, ground),
            Policy::LinearTime { k, epsilon } => {
                check_k_vs_n(*k, ground)?;
                LtParams::derive(*k, *epsilon, ground.n_real()).map(|_| ())
            }
            Policy::StochasticGreedy { k, .. } => check_k_vs_n(*k, ground),
            Policy::LocallyGreedy { matroid }
            | Policy::GeneralizedStochasticGreedy { matroid, .. } => matroid.validate(ground),
            Policy::Concat(a, b) => {
                a.validate(ground)?;
                b.validate(ground)
            }
        }
    }

    /// The phases a run executes in order: concatenations flattened, each
    /// phase starting from a fresh observation history.
    pub fn phases(&self) -> Vec<&Policy> {
        match self {
            Policy::Concat(a, b) => {
                let mut v = a.phases();
                v.extend(b.phases());
                v
            }
            other => vec![other],
        }
    }

    /// Number of rounds a (non-concat) phase executes.
    pub fn rounds(&self) -> usize {
        match self {
            Policy::Empty => 0,
            Policy::Fixed { items } => items.len(),
            Policy::Greedy { k }
            | Policy::RandomGreedy { k }
            | Policy::LinearTime { k, .. }
            | Policy::StochasticGreedy { k, .. } => *k,
            Policy::LocallyGreedy { matroid }
            | Policy::GeneralizedStochasticGreedy { matroid, .. } => matroid.total_budget(),
            Policy::Concat(a, b) => a.rounds() + b.rounds(),
        }
    }

    /// Counted oracle queries this phase performs in the given round.
    pub(crate) fn round_queries(
        &self,
        view: &PartialRealization,
        round: usize,
        ground: &GroundSet,
    ) -> Result<u64> {
        let n = ground.n_real();
        Ok(match self {
            Policy::Empty | Policy::Fixed { .. } => 0,
            Policy::Greedy { .. } | Policy::RandomGreedy { .. } => {
                (n - view.domain().len()) as u64
            }
            Policy::LinearTime { k, epsilon } => {
                LtParams::derive(*k, *epsilon, n)?.sample_size as u64
            }
            Policy::StochasticGreedy { k, epsilon } => {
                stochastic_sample_size(n, *k, *epsilon) as u64
            }
            Policy::LocallyGreedy { matroid } => {
                let (block, _) = matroid.round_position(round);
                matroid.blocks()[block]
                    .iter()
                    .filter(|e| !view.contains(**e))
                    .count() as u64
            }
            Policy::GeneralizedStochasticGreedy { matroid, epsilon } => {
                let (block, _) = matroid.round_position(round);
                let b = &matroid.blocks()[block];
                stochastic_sample_size(b.len(), matroid.limits()[block], *epsilon) as u64
            }
            Policy::Concat(..) => unreachable!("concat is expanded into phases"),
        })
    }

    /// One sampled round. Queries the oracle (counted) and draws any policy
    /// randomness from `rng` in a fixed order.
    pub(crate) fn act(
        &self,
        view: &PartialRealization,
        round: usize,
        oracle: &ValueOracle,
        rng: &mut Stream,
    ) -> Result<Action> {
        let ground = &oracle.instance().ground;
        let n = ground.n_real();
        match self {
            Policy::Empty => unreachable!("empty policy has no rounds"),
            Policy::Fixed { items } => Ok(Action::Select(items[round])),
            Policy::Greedy { .. } => {
                let cands = query_unselected(oracle, view, ground)?;
                Ok(greedy_pick(&cands))
            }
            Policy::RandomGreedy { k } => {
                let cands = query_unselected(oracle, view, ground)?;
                let pool = random_greedy_pool(&cands, *k);
                let slot = rng.gen_range(0..*k);
                Ok(if slot < pool.len() {
                    Action::Select(pool[slot])
                } else {
                    Action::Skip
                })
            }
            Policy::LinearTime { k, epsilon } => {
                let params = LtParams::derive(*k, *epsilon, n)?;
                let sample = sample_without_replacement(rng, n, params.sample_size);
                let mut scored = Vec::with_capacity(sample.len());
                for &i in &sample {
                    let item = ItemId(i);
                    scored.push((item, oracle.marginal_item(item, view)?));
                }
                let d: f64 = params.s * (1.0 - rng.gen::<f64>());
                let rank = d.ceil() as usize;
                rank_by_gain(&mut scored);
                Ok(linear_time_pick(&scored, rank, view))
            }
            Policy::StochasticGreedy { k, epsilon } => {
                let size = stochastic_sample_size(n, *k, *epsilon);
                let sample = sample_without_replacement(rng, n, size);
                let mut scored = Vec::with_capacity(sample.len());
                for &i in &sample {
                    let item = ItemId(i);
                    scored.push((item, oracle.marginal_item(item, view)?));
                }
                Ok(stochastic_pick(&scored, view))
            }
            Policy::LocallyGreedy { matroid } => {
                let (block, _) = matroid.round_position(round);
                let mut cands = Vec::new();
                for &item in &matroid.blocks()[block] {
                    if !view.contains(item) {
                        cands.push((item, oracle.marginal_item(item, view)?));
                    }
                }
                Ok(greedy_pick(&cands))
            }
            Policy::GeneralizedStochasticGreedy { matroid, epsilon } => {
                let (block, _) = matroid.round_position(round);
                let members = &matroid.blocks()[block];
                let size = stochastic_sample_size(members.len(), matroid.limits()[block], *epsilon);
                let picks = sample_without_replacement(rng, members.len(), size);
                let mut scored = Vec::with_capacity(picks.len());
                for &i in &picks {
                    let item = members[i];
                    scored.push((item, oracle.marginal_item(item, view)?));
                }
                Ok(stochastic_pick(&scored, view))
            }
            Policy::Concat(..) => unreachable!("concat is expanded into phases"),
        }
    }

    /// The exact per-round action distribution, marginalized over the
    /// policy's internal randomness. Marginals are computed outside the
    /// ledger; the runner is the only query customer.
    pub(crate) fn action_distribution(
        &self,
        view: &PartialRealization,
        round: usize,
        inst: &Instance,
        limits: &Limits,
        work: &mut WorkBudget,
    ) -> Result<Vec<(Action, f64)>> {
        let ground = &inst.ground;
        let n = ground.n_real();
        let quiet = |item: ItemId| oracle::exact_marginal_item(inst, item, view, limits.enum_cap);
        match self {
            Policy::Empty => unreachable!("empty policy has no rounds"),
            Policy::Fixed { items } => Ok(vec![(Action::Select(items[round]), 1.0)]),
            Policy::Greedy { .. } => {
                let cands = quiet_unselected(inst, view, limits)?;
                Ok(vec![(greedy_pick(&cands), 1.0)])
            }
            Policy::RandomGreedy { k } => {
                let cands = quiet_unselected(inst, view, limits)?;
                let pool = random_greedy_pool(&cands, *k);
                let share = 1.0 / *k as f64;
                let mut out: Vec<(Action, f64)> = pool
                    .iter()
                    .map(|&e| (Action::Select(e), share))
                    .collect();
                if pool.len() < *k {
                    out.push((Action::Skip, (*k - pool.len()) as f64 * share));
                }
                out.sort_by_key(|(a, _)| *a);
                Ok(out)
            }
            Policy::LinearTime { k, epsilon } => {
                let params = LtParams::derive(*k, *epsilon, n)?;
                let mut gains = Vec::with_capacity(n);
                for item in ground.real_items() {
                    gains.push(quiet(item)?);
                }
                // Rank distribution of ⌈d⌉ for d uniform on (0, s].
                let top = params.s.ceil() as usize;
                let rank_probs: Vec<(usize, f64)> = (1..=top)
                    .map(|j| {
                        let p = (params.s.min(j as f64) - (j as f64 - 1.0)) / params.s;
                        (j, p)
                    })
                    .collect();
                let mut acc: BTreeMap<Action, f64> = BTreeMap::new();
                for_each_subset(n, params.sample_size, work, |subset, weight| {
                    let mut scored: Vec<(ItemId, f64)> = subset
                        .iter()
                        .map(|&i| (ItemId(i), gains[i]))
                        .collect();
                    rank_by_gain(&mut scored);
                    for &(rank, p) in &rank_probs {
                        let action = linear_time_pick(&scored, rank, view);
                        *acc.entry(action).or_insert(0.0) += weight * p;
                    }
                })?;
                Ok(acc.into_iter().collect())
            }
            Policy::StochasticGreedy { k, epsilon } => {
                let size = stochastic_sample_size(n, *k, *epsilon);
                let mut gains = Vec::with_capacity(n);
                for item in ground.real_items() {
                    gains.push(quiet(item)?);
                }
                let mut acc: BTreeMap<Action, f64> = BTreeMap::new();
                for_each_subset(n, size, work, |subset, weight| {
                    let scored: Vec<(ItemId, f64)> = subset
                        .iter()
                        .map(|&i| (ItemId(i), gains[i]))
                        .collect();
                    *acc.entry(stochastic_pick(&scored, view)).or_insert(0.0) += weight;
                })?;
                Ok(acc.into_iter().collect())
            }
            Policy::LocallyGreedy { matroid } => {
                let (block, _) = matroid.round_position(round);
                let mut cands = Vec::new();
                for &item in &matroid.blocks()[block] {
                    if !view.contains(item) {
                        cands.push((item, quiet(item)?));
                    }
                }
                Ok(vec![(greedy_pick(&cands), 1.0)])
            }
            Policy::GeneralizedStochasticGreedy { matroid, epsilon } => {
                let (block, _) = matroid.round_position(round);
                let members = &matroid.blocks()[block];
                let size = stochastic_sample_size(members.len(), matroid.limits()[block], *epsilon);
                let mut gains = Vec::with_capacity(members.len());
                for &item in members {
                    gains.push(quiet(item)?);
                }
                let mut acc: BTreeMap<Action, f64> = BTreeMap::new();
                for_each_subset(members.len(), size, work, |subset, weight| {
                    let scored: Vec<(ItemId, f64)> = subset
                        .iter()
                        .map(|&i| (members[i], gains[i]))
                        .collect();
                    *acc.entry(stochastic_pick(&scored, view)).or_insert(0.0) += weight;
                })?;
                Ok(acc.into_iter().collect())
            }
            Policy::Concat(..) => unreachable!("concat is expanded into phases"),
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::invalid_param("k", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_k_vs_n(k: usize, ground: &GroundSet) -> Result<()> {
    if k > ground.n_real() {
        Err(Error::invalid_param(
            "k",
            format!("{k} exceeds the {} real items", ground.n_real()),
        ))
    } else {
        Ok(())
    }
}

fn check_unit_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid_param(
            "epsilon",
            format!("{epsilon} not in (0, 1)"),
        ))
    }
}

fn query_unselected(
    oracle: &ValueOracle,
    view: &PartialRealization,
    ground: &GroundSet,
) -> Result<Vec<(ItemId, f64)>> {
    let mut out = Vec::new();
    for item in ground.real_items() {
        if !view.contains(item) {
            out.push((item, oracle.marginal_item(item, view)?));
        }
    }
    Ok(out)
}

fn quiet_unselected(
    inst: &Instance,
    view: &PartialRealization,
    limits: &Limits,
) -> Result<Vec<(ItemId, f64)>> {
    let mut out = Vec::new();
    for item in inst.ground.real_items() {
        if !view.contains(item) {
            out.push((item, oracle::exact_marginal_item(inst, item, view, limits.enum_cap)?));
        }
    }
    Ok(out)
}

/// Argmax with the greedy acceptance rule: ties go to the smallest id, a
/// zero-gain maximum is still selected, a negative maximum selects nothing.
fn greedy_pick(cands: &[(ItemId, f64)]) -> Action {
    let mut best: Option<(ItemId, f64)> = None;
    for &(item, gain) in cands {
        let better = match best {
            None => true,
            Some((be, bg)) => gain > bg || (gain == bg && item < be),
        };
        if better {
            best = Some((item, gain));
        }
    }
    match best {
        Some((item, gain)) if gain >= 0.0 => Action::Select(item),
        _ => Action::Skip,
    }
}

/// The candidate pool the random greedy policy samples from: the best `k`
/// entries of the unselected real items (gain descending, id ascending)
/// merged with `2k − 1` dummies at gain zero, reals winning ties. Only the
/// real survivors are returned; every missing slot is a dummy.
fn random_greedy_pool(cands: &[(ItemId, f64)], k: usize) -> Vec<ItemId> {
    let mut keep: Vec<(ItemId, f64)> = cands.iter().copied().filter(|(_, g)| *g >= 0.0).collect();
    rank_by_gain(&mut keep);
    keep.truncate(k);
    keep.into_iter().map(|(item, _)| item).collect()
}

/// Sort by gain descending, id ascending.
fn rank_by_gain(scored: &mut [(ItemId, f64)]) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite gains")
            .then_with(|| a.0.cmp(&b.0))
    });
}

/// The linear-time acceptance rule applied to a ranked sample.
fn linear_time_pick(ranked: &[(ItemId, f64)], rank: usize, view: &PartialRealization) -> Action {
    if rank == 0 || rank > ranked.len() {
        return Action::Skip;
    }
    let (item, gain) = ranked[rank - 1];
    if gain < 0.0 || view.contains(item) {
        return Action::Skip;
    }
    Action::Select(item)
}

/// Unconditional argmax used by the stochastic greedy policies: ties prefer
/// items not yet selected, then the smallest id; a winner that is already
/// selected is a no-op round.
fn stochastic_pick(scored: &[(ItemId, f64)], view: &PartialRealization) -> Action {
    let mut best: Option<(ItemId, f64, bool)> = None;
    for &(item, gain) in scored {
        let selected = view.contains(item);
        let better = match best {
            None => true,
            Some((be, bg, bsel)) => {
                gain > bg
                    || (gain == bg && !selected && bsel)
                    || (gain == bg && selected == bsel && item < be)
            }
        };
        if better {
            best = Some((item, gain, selected));
        }
    }
    match best {
        Some((item, _, false)) => Action::Select(item),
        _ => Action::Skip,
    }
}

/// Uniform sample of `m` distinct indices from `0..n`, returned sorted.
fn sample_without_replacement(rng: &mut Stream, n: usize, m: usize) -> Vec<usize> {
    debug_assert!(m <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..m].to_vec();
    picked.sort_unstable();
    picked
}

/// Visit every size-`m` subset of `0..n` with its uniform weight.
fn for_each_subset<F>(n: usize, m: usize, work: &mut WorkBudget, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], f64),
{
    let count = binomial(n, m);
    work.spend(count)?;
    let weight = 1.0 / count as f64;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        visit(&subset, weight);
        // Next combination in lexicographic order.
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if subset[i] != i + n - m {
                break;
            }
            if i == 0 {
                return Ok(());
            }
        }
        subset[i] += 1;
        for j in (i + 1)..m {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, m: usize) -> u64 {
    let m = m.min(n - m);
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Record of one policy run under a fixed realization.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Per-round outcomes in execution order, null rounds included.
    pub rounds: Vec<Action>,
    /// Joint observation history: one entry per distinct selected item.
    pub observed: PartialRealization,
    /// `f` on the union of selections under the run's realization.
    pub final_value: f64,
    /// Item-oracle queries this run added to the ledger.
    pub queries: u64,
}

impl Trace {
    /// The set of distinct selected real items.
    pub fn selected(&self) -> ItemSet {
        self.observed.domain()
    }

    /// Equality of decisions: same rounds, observations, and value. Query
    /// counts are deliberately excluded so policies with different sampling
    /// cost can still be decision-equivalent.
    pub fn same_decisions(&self, other: &Trace) -> bool {
        self.rounds == other.rounds
            && self.observed == other.observed
            && self.final_value == other.final_value
    }
}

enum BudgetTracker<'p> {
    Cardinality { used: usize, k: usize },
    Blocks { used: Vec<usize>, matroid: &'p PartitionMatroid },
}

impl<'p> BudgetTracker<'p> {
    fn for_phase(phase: &'p Policy) -> BudgetTracker<'p> {
        match phase {
            Policy::Empty => BudgetTracker::Cardinality { used: 0, k: 0 },
            Policy::Fixed { items } => BudgetTracker::Cardinality {
                used: 0,
                k: items.len(),
            },
            Policy::Greedy { k }
            | Policy::RandomGreedy { k }
            | Policy::LinearTime { k, .. }
            | Policy::StochasticGreedy { k, .. } => BudgetTracker::Cardinality { used: 0, k: *k },
            Policy::LocallyGreedy { matroid }
            | Policy::GeneralizedStochasticGreedy { matroid, .. } => BudgetTracker::Blocks {
                used: vec![0; matroid.n_blocks()],
                matroid,
            },
            Policy::Concat(..) => unreachable!("concat is expanded into phases"),
        }
    }

    fn try_select(&mut self, item: ItemId, round: usize) -> Result<()> {
        match self {
            BudgetTracker::Cardinality { used, k } => {
                if *used >= *k {
                    return Err(Error::InfeasibleSelection { item: item.0, round });
                }
                *used += 1;
            }
            BudgetTracker::Blocks { used, matroid } => {
                let block = matroid
                    .block_of(item)
                    .ok_or(Error::InfeasibleSelection { item: item.0, round })?;
                if used[block] >= matroid.limits()[block] {
                    return Err(Error::InfeasibleSelection { item: item.0, round });
                }
                used[block] += 1;
            }
        }
        Ok(())
    }
}

/// Execute a policy against one realization.
///
/// Each round reveals the state of the selected item only. Re-selecting an
/// item some earlier phase already chose reveals the already-known state and
/// leaves the union unchanged. Deterministic given `(policy, phi, seed)`.
pub fn run_policy(
    policy: &Policy,
    phi: &Realization,
    oracle: &ValueOracle,
    seed: u64,
) -> Result<Trace> {
    let inst = oracle.instance();
    policy.validate(&inst.ground)?;
    if phi.n_items() != inst.ground.n_real() {
        return Err(Error::invalid_param(
            "phi",
            format!(
                "realization covers {} items, ground set has {}",
                phi.n_items(),
                inst.ground.n_real()
            ),
        ));
    }
    let mut rng = rng::stream(seed, "policy", 0);
    let queries_before = oracle.item_queries();
    let mut joint = PartialRealization::new();
    let mut selected = ItemSet::EMPTY;
    let mut rounds_log = Vec::new();

    for phase in policy.phases() {
        let mut own = PartialRealization::new();
        let mut budget = BudgetTracker::for_phase(phase);
        for round in 0..phase.rounds() {
            match phase.act(&own, round, oracle, &mut rng)? {
                Action::Skip => rounds_log.push(Action::Skip),
                Action::Select(item) => {
                    inst.ground.check_real(item)?;
                    if own.contains(item) {
                        return Err(Error::InfeasibleSelection { item: item.0, round });
                    }
                    budget.try_select(item, round)?;
                    let state = phi.state(item);
                    own.observe(item, state)?;
                    if !selected.contains(item) {
                        selected.insert(item);
                        joint.observe(item, state)?;
                    }
                    rounds_log.push(Action::Select(item));
                }
            }
        }
    }

    debug_assert_eq!(joint.domain(), selected);
    Ok(Trace {
        rounds: rounds_log,
        observed: joint,
        final_value: inst.evaluate(&selected, phi),
        queries: oracle.item_queries() - queries_before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Prior, StateValue};
    use crate::objectives::{cut_from_edges, Coverage, Objective};

    fn phi(states: &[u8]) -> Realization {
        Realization::new(states.iter().map(|&s| StateValue(s)).collect())
    }

    fn psi(pairs: &[(usize, u8)]) -> PartialRealization {
        PartialRealization::from_pairs(pairs).unwrap()
    }

    fn triangle() -> Instance {
        cut_from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn path3() -> Instance {
        cut_from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    /// Deterministic coverage toy: sensor i covers i+1 private targets.
    fn disjoint_coverage(n: usize) -> Instance {
        let mut covers = Vec::new();
        let mut next = 0u32;
        for i in 0..n {
            let mine: Vec<u32> = (next..next + (i as u32 + 1)).collect();
            next += i as u32 + 1;
            covers.push(vec![vec![], mine]);
        }
        let ground = GroundSet::uniform(n, 2).unwrap();
        let prior = Prior::bernoulli(n, 0.5).unwrap();
        let obj = Objective::Coverage(Coverage::new(n, next as usize, covers).unwrap());
        Instance::new(ground, prior, obj, None).unwrap()
    }

    fn dist(
        policy: &Policy,
        inst: &Instance,
        view: &PartialRealization,
        round: usize,
    ) -> Vec<(Action, f64)> {
        let limits = Limits::default();
        let mut work = WorkBudget::new(limits.branch_cap);
        policy
            .action_distribution(view, round, inst, &limits, &mut work)
            .unwrap()
    }

    #[test]
    fn greedy_takes_the_covering_sensor() {
        let ground = GroundSet::uniform(1, 2).unwrap();
        let prior = Prior::bernoulli(1, 1.0).unwrap();
        let cov = Coverage::new(1, 2, vec![vec![vec![], vec![0, 1]]]).unwrap();
        let inst = Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(
            &Policy::adaptive_greedy(1).unwrap(),
            &phi(&[1]),
            &oracle,
            0,
        )
        .unwrap();
        assert_eq!(trace.rounds, vec![Action::Select(ItemId(0))]);
        assert_eq!(trace.final_value, 2.0);
    }

    #[test]
    fn greedy_breaks_ties_toward_the_smallest_id() {
        // Two identical sensors covering the same target.
        let ground = GroundSet::uniform(2, 2).unwrap();
        let prior = Prior::bernoulli(2, 0.5).unwrap();
        let cov = Coverage::new(2, 1, vec![vec![vec![], vec![0]], vec![vec![], vec![0]]]).unwrap();
        let inst = Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(
            &Policy::adaptive_greedy(1).unwrap(),
            &phi(&[1, 1]),
            &oracle,
            3,
        )
        .unwrap();
        assert_eq!(trace.rounds, vec![Action::Select(ItemId(0))]);
    }

    #[test]
    fn greedy_stops_adding_once_marginals_turn_negative() {
        // Triangle cut: any two vertices cut 2 edges, the third ruins it.
        let inst = triangle();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(
            &Policy::adaptive_greedy(3).unwrap(),
            &phi(&[0, 0, 0]),
            &oracle,
            0,
        )
        .unwrap();
        assert!(trace.selected().len() <= 2);
        assert_eq!(trace.final_value, 2.0);
        assert_eq!(*trace.rounds.last().unwrap(), Action::Skip);
    }

    #[test]
    fn random_greedy_skips_when_every_gain_is_negative() {
        // After selecting the middle of a 2-edge path, both ends lose value
        // ... after selecting vertex 0 of a single edge, the other end does.
        let inst = cut_from_edges(2, vec![(0, 1, 1.0)]).unwrap();
        let d = dist(
            &Policy::adaptive_random_greedy(1).unwrap(),
            &inst,
            &psi(&[(0, 0)]),
            0,
        );
        assert_eq!(d, vec![(Action::Skip, 1.0)]);
    }

    #[test]
    fn random_greedy_pool_is_uniform_over_k_best() {
        let inst = disjoint_coverage(4);
        let d = dist(
            &Policy::adaptive_random_greedy(2).unwrap(),
            &inst,
            &psi(&[]),
            0,
        );
        // Gains are (0.5, 1.0, 1.5, 2.0): the pool is items 3 and 2.
        assert_eq!(
            d,
            vec![
                (Action::Select(ItemId(2)), 0.5),
                (Action::Select(ItemId(3)), 0.5),
            ]
        );
    }

    #[test]
    fn linear_time_skips_reselections_and_negative_ranks() {
        let inst = path3();
        // Ends selected; the middle vertex now has gain -2, the ends 0.
        let view = psi(&[(0, 0), (2, 0)]);
        let d = dist(&Policy::linear_time(3, 0.45).unwrap(), &inst, &view, 0);
        assert_eq!(d, vec![(Action::Skip, 1.0)]);
    }

    #[test]
    fn linear_time_full_sample_matches_rank_distribution() {
        let inst = disjoint_coverage(3);
        // epsilon 0.1 forces the sample to all of E; s = k.
        let d = dist(&Policy::linear_time(2, 0.1).unwrap(), &inst, &psi(&[]), 0);
        // Ranked gains: item 2 (1.5), item 1 (1.0); each rank uniform.
        assert_eq!(
            d,
            vec![
                (Action::Select(ItemId(1)), 0.5),
                (Action::Select(ItemId(2)), 0.5),
            ]
        );
    }

    #[test]
    fn lt_params_match_the_closed_forms() {
        let p = LtParams::derive(2, 0.45, 6).unwrap();
        let q = 8.0 * (1.0f64 / 0.9).ln() / (2.0 * 0.45 * 0.45);
        assert!((p.q - q).abs() < 1e-12);
        assert_eq!(p.sample_size, ((q * 6.0).ceil() as usize).min(6));
        assert!((p.s - 2.0 * p.sample_size as f64 / 6.0).abs() < 1e-12);
        assert!(Policy::linear_time(2, 0.5).is_err());
        assert!(Policy::linear_time(2, 0.0).is_err());
    }

    #[test]
    fn stochastic_sample_sizes_from_the_formula() {
        // (100/10)·ln 10 = 23.03 → 24.
        assert_eq!(stochastic_sample_size(100, 10, 0.1), 24);
        // (5/1)·ln 10 = 11.5 → min(5, 12) = 5.
        assert_eq!(stochastic_sample_size(5, 1, 0.1), 5);
        // Sample covers everything once epsilon ≤ e^{-k}.
        assert_eq!(stochastic_sample_size(8, 2, 0.1), 8);
    }

    #[test]
    fn query_ledger_matches_the_linear_time_formula() {
        let inst = disjoint_coverage(6);
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let params = LtParams::derive(2, 0.45, 6).unwrap();
        let trace = run_policy(
            &Policy::linear_time(2, 0.45).unwrap(),
            &phi(&[1, 1, 1, 1, 1, 1]),
            &oracle,
            9,
        )
        .unwrap();
        assert_eq!(trace.queries, 2 * params.sample_size as u64);
    }

    #[test]
    fn query_ledger_matches_the_greedy_formula() {
        let n = 6;
        let k = 3;
        let inst = disjoint_coverage(n);
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(
            &Policy::adaptive_greedy(k).unwrap(),
            &phi(&[1; 6]),
            &oracle,
            1,
        )
        .unwrap();
        let expected: u64 = (0..k).map(|r| (n - r) as u64).sum();
        assert_eq!(trace.queries, expected);
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let inst = disjoint_coverage(5);
        let r = phi(&[1, 0, 1, 1, 0]);
        for policy in [
            Policy::adaptive_random_greedy(2).unwrap(),
            Policy::linear_time(2, 0.3).unwrap(),
            Policy::adaptive_stochastic_greedy(2, 0.4).unwrap(),
        ] {
            let o1 = ValueOracle::exact(&inst, Limits::default());
            let o2 = ValueOracle::exact(&inst, Limits::default());
            let a = run_policy(&policy, &r, &o1, 42).unwrap();
            let b = run_policy(&policy, &r, &o2, 42).unwrap();
            assert!(a.same_decisions(&b));
            assert_eq!(a.queries, b.queries);
        }
    }

    #[test]
    fn locally_greedy_single_block_equals_greedy() {
        let inst = disjoint_coverage(4);
        let matroid = PartitionMatroid::single_block(4, 2).unwrap();
        let r = phi(&[1, 1, 0, 1]);
        let o1 = ValueOracle::exact(&inst, Limits::default());
        let o2 = ValueOracle::exact(&inst, Limits::default());
        let local = run_policy(&Policy::locally_greedy(matroid), &r, &o1, 5).unwrap();
        let greedy = run_policy(&Policy::adaptive_greedy(2).unwrap(), &r, &o2, 5).unwrap();
        assert!(local.same_decisions(&greedy));
    }

    #[test]
    fn singleton_blocks_select_all_nonnegative_items() {
        let inst = disjoint_coverage(2);
        let matroid =
            PartitionMatroid::new(vec![vec![ItemId(0)], vec![ItemId(1)]], vec![1, 1]).unwrap();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(&Policy::locally_greedy(matroid), &phi(&[1, 1]), &oracle, 0).unwrap();
        assert_eq!(
            trace.rounds,
            vec![Action::Select(ItemId(0)), Action::Select(ItemId(1))]
        );
    }

    #[test]
    fn gasg_sample_size_within_blocks() {
        // min(5, ceil(5 ln 10)) = 5 for a block of 5 with limit 1.
        assert_eq!(stochastic_sample_size(5, 1, 0.1), 5);
    }

    #[test]
    fn concat_with_empty_is_identity() {
        let inst = disjoint_coverage(4);
        let r = phi(&[1, 0, 1, 1]);
        let base = Policy::adaptive_random_greedy(2).unwrap();
        for wrapped in [
            Policy::concat(Policy::empty(), base.clone()),
            Policy::concat(base.clone(), Policy::empty()),
        ] {
            let o1 = ValueOracle::exact(&inst, Limits::default());
            let o2 = ValueOracle::exact(&inst, Limits::default());
            let a = run_policy(&base, &r, &o1, 7).unwrap();
            let b = run_policy(&wrapped, &r, &o2, 7).unwrap();
            assert!(a.same_decisions(&b));
        }
    }

    #[test]
    fn concat_reselection_is_a_noop_on_the_union() {
        let inst = disjoint_coverage(3);
        let r = phi(&[1, 1, 1]);
        let pi = Policy::concat(
            Policy::fixed(vec![ItemId(2)]).unwrap(),
            Policy::fixed(vec![ItemId(2), ItemId(0)]).unwrap(),
        );
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(&pi, &r, &oracle, 0).unwrap();
        assert_eq!(trace.selected().len(), 2);
        // 3 targets from sensor 2 plus 1 from sensor 0.
        assert_eq!(trace.final_value, 4.0);
        assert_eq!(trace.rounds.len(), 3);
    }

    #[test]
    fn nested_concatenation_flattens_in_order() {
        let a = Policy::fixed(vec![ItemId(0)]).unwrap();
        let b = Policy::fixed(vec![ItemId(1)]).unwrap();
        let c = Policy::fixed(vec![ItemId(2)]).unwrap();
        let nested = Policy::concat(Policy::concat(a.clone(), b.clone()), c.clone());
        let phases = nested.phases();
        assert_eq!(phases, vec![&a, &b, &c]);
        assert_eq!(nested.rounds(), 3);
    }

    #[test]
    fn empty_policy_yields_the_empty_trace() {
        let inst = triangle();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(&Policy::empty(), &phi(&[0, 0, 0]), &oracle, 0).unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(trace.final_value, 0.0);
        assert_eq!(trace.queries, 0);
    }

    #[test]
    fn budget_never_exceeded_even_with_k_equal_n() {
        let inst = disjoint_coverage(3);
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let trace = run_policy(
            &Policy::adaptive_greedy(3).unwrap(),
            &phi(&[0, 0, 0]),
            &oracle,
            0,
        )
        .unwrap();
        assert!(trace.selected().len() <= 3);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        assert!(Policy::adaptive_greedy(0).is_err());
        let inst = disjoint_coverage(2);
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let err = run_policy(
            &Policy::adaptive_greedy(5).unwrap(),
            &phi(&[0, 0]),
            &oracle,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "k", .. }));
    }

    #[test]
    fn matroid_invariants_are_validated() {
        assert!(PartitionMatroid::new(vec![vec![ItemId(0)], vec![ItemId(0)]], vec![1, 1]).is_err());
        assert!(PartitionMatroid::new(vec![vec![ItemId(0)]], vec![2]).is_err());
        let m = PartitionMatroid::new(vec![vec![ItemId(9)]], vec![1]).unwrap();
        assert!(m.validate(&GroundSet::uniform(3, 2).unwrap()).is_err());
    }

    #[test]
    fn subset_enumeration_covers_all_combinations() {
        let mut work = WorkBudget::new(1000);
        let mut seen = Vec::new();
        for_each_subset(4, 2, &mut work, |s, w| {
            assert!((w - 1.0 / 6.0).abs() < 1e-12);
            seen.push(s.to_vec());
        })
        .unwrap();
        assert_eq!(seen.len(), 6);
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn sampled_subsets_are_distinct_and_in_range() {
        let mut rng = rng::stream(3, "test", 0);
        for _ in 0..100 {
            let s = sample_without_replacement(&mut rng, 10, 4);
            assert_eq!(s.len(), 4);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&i| i < 10));
        }
    }

    /// The sampled path (`act`) and the exact path (`action_distribution`)
    /// are implemented independently; their per-round behavior must agree.
    /// Empirical action frequencies over many seeds stay within 5 standard
    /// errors of the exact probabilities.
    #[test]
    fn act_frequencies_match_the_exact_distribution() {
        let n = 6;
        let inst = disjoint_coverage(n);
        let view = psi(&[(5, 1)]);
        let draws = 20_000usize;
        let policies = [
            // k = 5, eps = 0.45 puts the linear-time sample at 5 of 6 items.
            Policy::linear_time(5, 0.45).unwrap(),
            Policy::adaptive_random_greedy(3).unwrap(),
            Policy::adaptive_stochastic_greedy(3, 0.4).unwrap(),
            Policy::generalized_stochastic_greedy(
                PartitionMatroid::new(
                    vec![vec![ItemId(0), ItemId(1), ItemId(2)], vec![ItemId(3), ItemId(4), ItemId(5)]],
                    vec![1, 2],
                )
                .unwrap(),
                0.5,
            )
            .unwrap(),
        ];
        for policy in policies {
            assert!(LtParams::derive(5, 0.45, n).unwrap().sample_size < n || !matches!(policy, Policy::LinearTime { .. }));
            let exact = dist(&policy, &inst, &view, 0);
            let mut counts: BTreeMap<Action, usize> = BTreeMap::new();
            for seed in 0..draws {
                let oracle = ValueOracle::exact(&inst, Limits::default());
                let mut rng = rng::stream(seed as u64, "act-vs-dist", 0);
                let action = policy.act(&view, 0, &oracle, &mut rng).unwrap();
                *counts.entry(action).or_insert(0) += 1;
            }
            for (action, p) in &exact {
                let freq = *counts.get(action).unwrap_or(&0) as f64 / draws as f64;
                let sigma = (p * (1.0 - p) / draws as f64).sqrt().max(1e-4);
                assert!(
                    (freq - p).abs() <= 5.0 * sigma,
                    "{policy:?} {action:?}: empirical {freq}, exact {p}"
                );
            }
            let covered: usize = exact
                .iter()
                .map(|(a, _)| counts.get(a).copied().unwrap_or(0))
                .sum();
            assert_eq!(covered, draws, "{policy:?}: acted outside the exact support");
        }
    }

    #[test]
    fn action_distributions_sum_to_one() {
        let inst = disjoint_coverage(5);
        let view = psi(&[(4, 1)]);
        for policy in [
            Policy::adaptive_greedy(3).unwrap(),
            Policy::adaptive_random_greedy(3).unwrap(),
            Policy::linear_time(3, 0.45).unwrap(),
            Policy::adaptive_stochastic_greedy(3, 0.4).unwrap(),
        ] {
            let total: f64 = dist(&policy, &inst, &view, 1).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{policy:?}: {total}");
        }
    }
}
