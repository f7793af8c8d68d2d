//! Exact and sampled policy evaluation, brute-force optimal policies, and
//! numerical property checkers.
//!
//! The exact evaluator expands the policy tree: nodes are (observation
//! history, phase, round) triples, branches carry the policy's per-round
//! action probabilities and the conditional state probabilities of the
//! selected item, and leaves score the expected objective value of the
//! selected set. Every shipped policy's internal randomness (uniform draws
//! over candidate pools, random subsets, fractional ranks) marginalizes into
//! finitely many branches, so the expectation is computed — not estimated —
//! and is reproducible bit for bit.
//!
//! The optimal-policy oracle is a dynamic program over partial realizations
//! with an explicit stop option, since feasibility is "at most k items". It
//! exists to give the guarantees something to be measured against; nothing
//! here approximates it.

use std::collections::HashMap;

use crate::core::{
    is_subrealization, ItemId, ItemSet, Limits, PartialRealization, StateValue, WorkBudget,
};
use crate::error::{Error, Result};
use crate::objectives::Instance;
use crate::oracle::{self, ValueOracle};
use crate::policies::{run_policy, Action, PartitionMatroid, Policy};
use crate::rng;

/// Violations are reported when `lhs < rhs - VIOLATION_TOL`.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Exact,
    MonteCarlo,
}

/// Result of evaluating a policy's expected utility.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub favg: f64,
    /// Standard error of the estimate; 0 in exact mode.
    pub stderr: f64,
    pub trials: u64,
    pub mean_queries: f64,
    pub mode: EvalMode,
}

/// A counterexample to one of the submodularity properties.
#[derive(Debug, Clone)]
pub struct ViolationReport {
    pub property: &'static str,
    pub witness: String,
    pub lhs: f64,
    pub rhs: f64,
    /// How far below `rhs` the left side fell; positive for violations.
    pub margin: f64,
}

fn violation(property: &'static str, witness: String, lhs: f64, rhs: f64) -> ViolationReport {
    ViolationReport {
        property,
        witness,
        lhs,
        rhs,
        margin: rhs - lhs,
    }
}

fn describe_psi(psi: &PartialRealization) -> String {
    let parts: Vec<String> = psi
        .canonical()
        .iter()
        .map(|(e, s)| format!("{}:{}", e.0, s.0))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

// ---------------------------------------------------------------------------
// Exact policy-tree evaluation
// ---------------------------------------------------------------------------

type MemoKey = (Vec<(ItemId, StateValue)>, usize, u128, usize);

struct Expansion<'a> {
    inst: &'a Instance,
    phases: Vec<&'a Policy>,
    limits: &'a Limits,
    work: WorkBudget,
    memo: HashMap<MemoKey, (f64, f64)>,
}

impl<'a> Expansion<'a> {
    fn new(inst: &'a Instance, policy: &'a Policy, limits: &'a Limits) -> Expansion<'a> {
        Expansion {
            inst,
            phases: policy.phases(),
            limits,
            work: WorkBudget::new(limits.branch_cap),
            memo: HashMap::new(),
        }
    }

    /// Expected (final value, remaining queries) from this node.
    fn node(
        &mut self,
        joint: &PartialRealization,
        phase: usize,
        own: &PartialRealization,
        round: usize,
    ) -> Result<(f64, f64)> {
        self.work.spend(1)?;
        if phase == self.phases.len() {
            let value = oracle::expected_set_value(
                self.inst,
                &joint.domain(),
                joint,
                self.limits.enum_cap,
            )?;
            return Ok((value, 0.0));
        }
        let leaf = self.phases[phase];
        if round == leaf.rounds() {
            return self.node(joint, phase + 1, &PartialRealization::new(), 0);
        }
        let key: MemoKey = (joint.canonical(), phase, own.domain().bits(), round);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(*hit);
        }

        let queries_now = leaf.round_queries(own, round, &self.inst.ground)? as f64;
        let dist = leaf.action_distribution(own, round, self.inst, self.limits, &mut self.work)?;
        debug_assert!(
            (dist.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12,
            "branch probabilities must sum to 1"
        );

        let mut value = 0.0;
        let mut queries = queries_now;
        for (action, p) in dist {
            if p <= 0.0 {
                continue;
            }
            match action {
                Action::Skip => {
                    let (v, q) = self.node(joint, phase, own, round + 1)?;
                    value += p * v;
                    queries += p * q;
                }
                Action::Select(item) => {
                    if let Some(state) = joint.state_of(item) {
                        // Already revealed by an earlier phase.
                        let own2 = own.extended(item, state)?;
                        let (v, q) = self.node(joint, phase, &own2, round + 1)?;
                        value += p * v;
                        queries += p * q;
                    } else {
                        for (state, ps) in self.inst.prior.conditional_state_dist(item, joint)? {
                            if ps <= 0.0 {
                                continue;
                            }
                            let joint2 = joint.extended(item, state)?;
                            let own2 = own.extended(item, state)?;
                            let (v, q) = self.node(&joint2, phase, &own2, round + 1)?;
                            value += p * ps * v;
                            queries += p * ps * q;
                        }
                    }
                }
            }
        }
        self.memo.insert(key, (value, queries));
        Ok((value, queries))
    }
}

/// Exact expected utility of a policy: the expectation over the prior and
/// every source of policy randomness, by policy-tree expansion.
pub fn exact_favg(policy: &Policy, inst: &Instance, limits: &Limits) -> Result<EvalReport> {
    policy.validate(&inst.ground)?;
    let mut ex = Expansion::new(inst, policy, limits);
    let start = PartialRealization::new();
    let (favg, mean_queries) = ex.node(&start, 0, &start, 0)?;
    Ok(EvalReport {
        favg,
        stderr: 0.0,
        trials: 1,
        mean_queries,
        mode: EvalMode::Exact,
    })
}

/// Exact `E[f(dom(base) ∪ E(π, Φ), Φ) | Φ ∼ base]` where the policy runs
/// from scratch on its own observations.
pub(crate) fn expected_union_value(
    inst: &Instance,
    policy: &Policy,
    base: &PartialRealization,
    limits: &Limits,
) -> Result<f64> {
    policy.validate(&inst.ground)?;
    let mut ex = Expansion::new(inst, policy, limits);
    let (value, _) = ex.node(base, 0, &PartialRealization::new(), 0)?;
    Ok(value)
}

/// The exact per-round action distribution of a (non-concatenated) policy at
/// a given observation history.
pub fn per_round_distribution(
    policy: &Policy,
    inst: &Instance,
    view: &PartialRealization,
    round: usize,
    limits: &Limits,
) -> Result<Vec<(Action, f64)>> {
    if matches!(policy, Policy::Concat(..)) {
        return Err(Error::invalid_param(
            "policy",
            "per-round distributions are defined for non-concatenated policies",
        ));
    }
    policy.validate(&inst.ground)?;
    let mut work = WorkBudget::new(limits.branch_cap);
    policy.action_distribution(view, round, inst, limits, &mut work)
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation
// ---------------------------------------------------------------------------

/// Sampled estimate of `f_avg`: each trial draws a realization from the
/// prior and a fresh policy RNG stream.
pub fn mc_favg(policy: &Policy, inst: &Instance, trials: u64, seed: u64) -> Result<EvalReport> {
    mc_favg_jobs(policy, inst, trials, seed, 1, &Limits::default())
}

/// As `mc_favg`, with trials spread over `jobs` worker threads. Per-trial
/// RNG streams and an index-ordered merge make the result identical for any
/// job count.
pub fn mc_favg_jobs(
    policy: &Policy,
    inst: &Instance,
    trials: u64,
    seed: u64,
    jobs: usize,
    limits: &Limits,
) -> Result<EvalReport> {
    if trials == 0 {
        return Err(Error::invalid_param("trials", "must be at least 1"));
    }
    if jobs == 0 {
        return Err(Error::invalid_param("jobs", "must be at least 1"));
    }
    policy.validate(&inst.ground)?;

    let n_trials = usize::try_from(trials)
        .map_err(|_| Error::invalid_param("trials", "too many trials for this platform"))?;
    let run_trial = |index: usize| -> Result<(f64, u64)> {
        let mut phi_rng = rng::stream(seed, "trial-phi", index as u64);
        let phi = inst.prior.sample(&mut phi_rng);
        let oracle = ValueOracle::exact(inst, *limits);
        let policy_seed = rng::subseed(seed, "trial-policy", index as u64);
        let trace = run_policy(policy, &phi, &oracle, policy_seed)?;
        Ok((trace.final_value, trace.queries))
    };

    let mut samples: Vec<(f64, u64)> = vec![(0.0, 0); n_trials];
    if jobs == 1 || n_trials == 1 {
        for (i, slot) in samples.iter_mut().enumerate() {
            *slot = run_trial(i)?;
        }
    } else {
        let chunk = n_trials.div_ceil(jobs);
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::new();
            for (c, slots) in samples.chunks_mut(chunk).enumerate() {
                let start = c * chunk;
                let run_trial = &run_trial;
                handles.push(scope.spawn(move || -> Result<()> {
                    for (offset, slot) in slots.iter_mut().enumerate() {
                        *slot = run_trial(start + offset)?;
                    }
                    Ok(())
                }));
            }
            for h in handles {
                h.join().expect("worker panicked")?;
            }
            Ok(())
        })?;
    }

    let t = n_trials as f64;
    let mean = samples.iter().map(|(v, _)| v).sum::<f64>() / t;
    let stderr = if n_trials > 1 {
        let var = samples.iter().map(|(v, _)| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    let mean_queries = samples.iter().map(|(_, q)| *q as f64).sum::<f64>() / t;
    Ok(EvalReport {
        favg: mean,
        stderr,
        trials,
        mean_queries,
        mode: EvalMode::MonteCarlo,
    })
}

// ---------------------------------------------------------------------------
// Optimal-policy oracles
// ---------------------------------------------------------------------------

struct OptDp<'a> {
    inst: &'a Instance,
    limits: &'a Limits,
    allowed: ItemSet,
    allow_stop: bool,
    memo: HashMap<(Vec<(ItemId, StateValue)>, usize), f64>,
    work: WorkBudget,
}

impl<'a> OptDp<'a> {
    fn new(inst: &'a Instance, limits: &'a Limits, allowed: ItemSet, allow_stop: bool) -> Self {
        OptDp {
            inst,
            limits,
            allowed,
            allow_stop,
            memo: HashMap::new(),
            work: WorkBudget::new(limits.branch_cap),
        }
    }

    /// Best achievable `E[f(dom ∪ selections, Φ) | Φ ∼ ψ]` with `budget`
    /// further selections from the allowed pool.
    fn value(&mut self, psi: &PartialRealization, budget: usize) -> Result<f64> {
        self.work.spend(1)?;
        let key = (psi.canonical(), budget);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let base =
            oracle::expected_set_value(self.inst, &psi.domain(), psi, self.limits.enum_cap)?;
        let mut best = base;
        let mut continued = f64::NEG_INFINITY;
        if budget > 0 {
            let candidates: Vec<ItemId> =
                self.allowed.iter().filter(|e| !psi.contains(*e)).collect();
            for item in candidates {
                let mut acc = 0.0;
                for (state, p) in self.inst.prior.conditional_state_dist(item, psi)? {
                    if p <= 0.0 {
                        continue;
                    }
                    acc += p * self.value(&psi.extended(item, state)?, budget - 1)?;
                }
                continued = continued.max(acc);
            }
        }
        if self.allow_stop {
            best = best.max(continued);
        } else if continued > f64::NEG_INFINITY {
            best = continued;
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

/// Value of the optimal adaptive policy under a cardinality budget, by
/// dynamic programming over partial realizations.
pub fn optimal_policy_value(inst: &Instance, k: usize, limits: &Limits) -> Result<f64> {
    optimal_policy_value_opts(inst, k, limits, true)
}

pub(crate) fn optimal_policy_value_opts(
    inst: &Instance,
    k: usize,
    limits: &Limits,
    allow_stop: bool,
) -> Result<f64> {
    if k > inst.ground.n_real() {
        return Err(Error::invalid_param(
            "k",
            format!("{k} exceeds the {} real items", inst.ground.n_real()),
        ));
    }
    let allowed: ItemSet = inst.ground.real_items().collect();
    let mut dp = OptDp::new(inst, limits, allowed, allow_stop);
    dp.value(&PartialRealization::new(), k)
}

type MatroidMemoKey = (Vec<(ItemId, StateValue)>, Vec<usize>);

struct MatroidDp<'a> {
    inst: &'a Instance,
    limits: &'a Limits,
    matroid: &'a PartitionMatroid,
    memo: HashMap<MatroidMemoKey, f64>,
    work: WorkBudget,
}

impl<'a> MatroidDp<'a> {
    fn value(&mut self, psi: &PartialRealization, remaining: &[usize]) -> Result<f64> {
        self.work.spend(1)?;
        let key = (psi.canonical(), remaining.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let mut best =
            oracle::expected_set_value(self.inst, &psi.domain(), psi, self.limits.enum_cap)?;
        for (block, members) in self.matroid.blocks().iter().enumerate() {
            if remaining[block] == 0 {
                continue;
            }
            let mut next_remaining = remaining.to_vec();
            next_remaining[block] -= 1;
            for &item in members {
                if psi.contains(item) {
                    continue;
                }
                let mut acc = 0.0;
                for (state, p) in self.inst.prior.conditional_state_dist(item, psi)? {
                    if p <= 0.0 {
                        continue;
                    }
                    acc += p * self.value(&psi.extended(item, state)?, &next_remaining)?;
                }
                best = best.max(acc);
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

/// Value of the optimal adaptive policy under a partition-matroid
/// constraint; items selectable only from blocks with remaining budget.
pub fn optimal_policy_value_matroid(
    inst: &Instance,
    matroid: &PartitionMatroid,
    limits: &Limits,
) -> Result<f64> {
    matroid.validate(&inst.ground)?;
    let mut dp = MatroidDp {
        inst,
        limits,
        matroid,
        memo: HashMap::new(),
        work: WorkBudget::new(limits.branch_cap),
    };
    dp.value(&PartialRealization::new(), matroid.limits())
}

// ---------------------------------------------------------------------------
// Property checkers
// ---------------------------------------------------------------------------

/// All positive-probability partial realizations of the instance.
pub fn positive_partial_realizations(
    inst: &Instance,
    limits: &Limits,
) -> Result<Vec<PartialRealization>> {
    let n = inst.ground.n_real();
    let mut bound: usize = 1;
    for item in inst.ground.real_items() {
        bound = bound.saturating_mul(1 + inst.ground.alphabet(item) as usize);
        if bound > limits.enum_cap {
            return Err(Error::EnumerationCapExceeded {
                needed: bound,
                cap: limits.enum_cap,
            });
        }
    }
    let mut out = Vec::new();
    let mut current = PartialRealization::new();
    build_partials(inst, 0, n, &mut current, &mut out)?;
    Ok(out)
}

fn build_partials(
    inst: &Instance,
    item: usize,
    n: usize,
    current: &mut PartialRealization,
    out: &mut Vec<PartialRealization>,
) -> Result<()> {
    if item == n {
        out.push(current.clone());
        return Ok(());
    }
    // Leave the item unobserved.
    build_partials(inst, item + 1, n, current, out)?;
    let id = ItemId(item);
    for state in 0..inst.ground.alphabet(id) {
        let extended = current.extended(id, StateValue(state))?;
        if inst.prior.consistency_prob(&extended)? > 0.0 {
            let mut extended = extended;
            std::mem::swap(current, &mut extended);
            build_partials(inst, item + 1, n, current, out)?;
            std::mem::swap(current, &mut extended);
        }
    }
    Ok(())
}

/// Subsets of a partial realization's observations, the full set included.
fn sub_partials(psi: &PartialRealization) -> Vec<PartialRealization> {
    let obs = psi.canonical();
    let mut out = Vec::with_capacity(1 << obs.len());
    for mask in 0u32..(1 << obs.len()) {
        let mut sub = PartialRealization::new();
        for (pos, &(item, state)) in obs.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                sub.observe(item, state).expect("distinct items");
            }
        }
        out.push(sub);
    }
    out
}

struct MarginalCache<'a> {
    inst: &'a Instance,
    limits: &'a Limits,
    cache: HashMap<(Vec<(ItemId, StateValue)>, ItemId), f64>,
}

impl<'a> MarginalCache<'a> {
    fn new(inst: &'a Instance, limits: &'a Limits) -> Self {
        MarginalCache {
            inst,
            limits,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, item: ItemId, psi: &PartialRealization) -> Result<f64> {
        let key = (psi.canonical(), item);
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let v = oracle::exact_marginal_item(self.inst, item, psi, self.limits.enum_cap)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

/// Check `Δ(e | ψ) ≥ Δ(e | ψ')` for every positive-probability pair
/// `ψ ⊆ ψ'` and every item outside `dom(ψ')`.
pub fn check_adaptive_submodularity(inst: &Instance, limits: &Limits) -> Result<Vec<ViolationReport>> {
    let all = positive_partial_realizations(inst, limits)?;
    let mut marginals = MarginalCache::new(inst, limits);
    let mut work = WorkBudget::new(limits.branch_cap);
    let mut out = Vec::new();
    for big in &all {
        for small in sub_partials(big) {
            work.spend(1)?;
            if small == *big {
                continue;
            }
            for item in inst.ground.real_items() {
                if big.contains(item) {
                    continue;
                }
                let lhs = marginals.get(item, &small)?;
                let rhs = marginals.get(item, big)?;
                if lhs < rhs - VIOLATION_TOL {
                    out.push(violation(
                        "adaptive submodularity",
                        format!(
                            "item {} at psi = {} vs psi' = {}",
                            item.0,
                            describe_psi(&small),
                            describe_psi(big)
                        ),
                        lhs,
                        rhs,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Check `Δ(e | ψ) ≥ 0` for every positive-probability `ψ` and unobserved item.
pub fn check_adaptive_monotonicity(inst: &Instance, limits: &Limits) -> Result<Vec<ViolationReport>> {
    let all = positive_partial_realizations(inst, limits)?;
    let mut marginals = MarginalCache::new(inst, limits);
    let mut out = Vec::new();
    for psi in &all {
        for item in inst.ground.real_items() {
            if psi.contains(item) {
                continue;
            }
            let lhs = marginals.get(item, psi)?;
            if lhs < -VIOLATION_TOL {
                out.push(violation(
                    "adaptive monotonicity",
                    format!("item {} at psi = {}", item.0, describe_psi(psi)),
                    lhs,
                    0.0,
                ));
            }
        }
    }
    Ok(out)
}

/// Check that `f(·, φ)` is submodular for every realization in the support.
pub fn check_pointwise_submodularity(
    inst: &Instance,
    limits: &Limits,
) -> Result<Vec<ViolationReport>> {
    let n = inst.ground.n_real();
    let support = inst.prior.support(limits.enum_cap)?;
    let mut work = WorkBudget::new(limits.branch_cap);
    let mut out = Vec::new();
    for (phi, _) in &support {
        // Value table over all subsets of the ground set.
        work.spend(1u64 << n)?;
        let values: Vec<f64> = (0u32..(1 << n))
            .map(|bits| {
                let sel: ItemSet = (0..n).filter(|i| bits & (1 << i) != 0).map(ItemId).collect();
                inst.objective.evaluate(&sel, phi)
            })
            .collect();
        for s2 in 0u32..(1 << n) {
            for e in 0..n {
                let bit = 1u32 << e;
                if s2 & bit != 0 {
                    continue;
                }
                let gain2 = values[(s2 | bit) as usize] - values[s2 as usize];
                // All submasks of s2.
                let mut s1 = s2;
                loop {
                    let gain1 = values[(s1 | bit) as usize] - values[s1 as usize];
                    if gain1 < gain2 - VIOLATION_TOL {
                        out.push(violation(
                            "pointwise submodularity",
                            format!("item {e}, S1 = {s1:#b}, S2 = {s2:#b}, phi = {:?}",
                                phi.states().iter().map(|s| s.0).collect::<Vec<_>>()),
                            gain1,
                            gain2,
                        ));
                    }
                    if s1 == 0 {
                        break;
                    }
                    s1 = (s1 - 1) & s2;
                }
            }
        }
    }
    Ok(out)
}

/// Check that the best restricted-policy gain weakly decreases as the
/// observation history grows, for every item pool `V` and budget `a` up to
/// `max_a`.
pub fn check_fully_adaptive_submodularity(
    inst: &Instance,
    max_a: usize,
    limits: &Limits,
) -> Result<Vec<ViolationReport>> {
    if max_a == 0 {
        return Err(Error::invalid_param("max_a", "must be at least 1"));
    }
    let n = inst.ground.n_real();
    let all = positive_partial_realizations(inst, limits)?;
    // Base values E[f(dom ψ, Φ) | Φ ∼ ψ] shared across pools.
    let mut base: HashMap<Vec<(ItemId, StateValue)>, f64> = HashMap::new();
    for psi in &all {
        let v = oracle::expected_set_value(inst, &psi.domain(), psi, limits.enum_cap)?;
        base.insert(psi.canonical(), v);
    }
    let mut out = Vec::new();
    for pool_bits in 1u32..(1 << n) {
        let pool: ItemSet = (0..n).filter(|i| pool_bits & (1 << i) != 0).map(ItemId).collect();
        for a in 1..=pool.len().min(max_a) {
            let mut dp = OptDp::new(inst, limits, pool, true);
            let mut gains: HashMap<Vec<(ItemId, StateValue)>, f64> = HashMap::new();
            for psi in &all {
                let key = psi.canonical();
                let g = dp.value(psi, a)? - base[&key];
                gains.insert(key, g);
            }
            for big in &all {
                let rhs = gains[&big.canonical()];
                for small in sub_partials(big) {
                    if small == *big {
                        continue;
                    }
                    let lhs = gains[&small.canonical()];
                    if lhs < rhs - VIOLATION_TOL {
                        out.push(violation(
                            "fully adaptive submodularity",
                            format!(
                                "pool {:?}, budget {a}, psi = {} vs psi' = {}",
                                pool.iter().map(|e| e.0).collect::<Vec<_>>(),
                                describe_psi(&small),
                                describe_psi(big)
                            ),
                            lhs,
                            rhs,
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Empirical check of the sampling bound behind the stochastic greedy
/// policies: a uniform sample of `⌈(n/k)·ln(1/ε)⌉` items, drawn without
/// replacement, hits a fixed `k`-subset with probability at least `1 − ε`.
/// Returns `(empirical hit rate, 1 − ε)`.
pub fn check_sampling_lemma(
    n: usize,
    k: usize,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if k == 0 || k > n {
        return Err(Error::invalid_param("k", format!("{k} not in 1..={n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid_param("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    if trials == 0 {
        return Err(Error::invalid_param("trials", "must be at least 1"));
    }
    let sample_size = crate::policies::stochastic_sample_size(n, k, epsilon);
    let mut stream = rng::stream(seed, "sampling-lemma", 0);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut hits: u64 = 0;
    for _ in 0..trials {
        for (i, slot) in pool.iter_mut().enumerate() {
            *slot = i;
        }
        let mut hit = false;
        for i in 0..sample_size {
            use rand::Rng;
            let j = stream.gen_range(i..n);
            pool.swap(i, j);
            if pool[i] < k {
                hit = true;
                break;
            }
        }
        if hit {
            hits += 1;
        }
    }
    Ok((hits as f64 / trials as f64, 1.0 - epsilon))
}

/// Convenience wrapper: the adaptive-submodularity relation between two
/// specific histories (used by tests and the verification suite).
pub fn marginal_is_diminishing(
    inst: &Instance,
    item: ItemId,
    small: &PartialRealization,
    big: &PartialRealization,
    limits: &Limits,
) -> Result<bool> {
    debug_assert!(is_subrealization(small, big));
    let lhs = oracle::exact_marginal_item(inst, item, small, limits.enum_cap)?;
    let rhs = oracle::exact_marginal_item(inst, item, big, limits.enum_cap)?;
    Ok(lhs >= rhs - VIOLATION_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{GroundSet, Prior, Realization};
    use crate::objectives::{
        cut_from_edges, generate_coverage, generate_mixed, Coverage, Objective,
    };

    fn limits() -> Limits {
        Limits::default()
    }

    fn phi(states: &[u8]) -> Realization {
        Realization::new(states.iter().map(|&s| StateValue(s)).collect())
    }

    fn one_sensor_half() -> Instance {
        let ground = GroundSet::uniform(1, 2).unwrap();
        let prior = Prior::bernoulli(1, 0.5).unwrap();
        let cov = Coverage::new(1, 2, vec![vec![vec![], vec![0, 1]]]).unwrap();
        Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap()
    }

    fn triangle() -> Instance {
        cut_from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn size_squared(n: usize) -> Instance {
        let ground = GroundSet::uniform(n, 2).unwrap();
        let prior = Prior::bernoulli(n, 0.5).unwrap();
        Instance::new(ground, prior, Objective::SizeSquared, None).unwrap()
    }

    /// Two sensors with private targets of sizes 6 and 2 at p = 0.5, so the
    /// expected gains at the empty history are 3 and 1.
    fn gains_three_one() -> Instance {
        let ground = GroundSet::uniform(2, 2).unwrap();
        let prior = Prior::bernoulli(2, 0.5).unwrap();
        let cov = Coverage::new(
            2,
            8,
            vec![
                vec![vec![], vec![0, 1, 2, 3, 4, 5]],
                vec![vec![], vec![6, 7]],
            ],
        )
        .unwrap();
        Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap()
    }

    #[test]
    fn empty_policy_has_zero_value() {
        for inst in [one_sensor_half(), triangle()] {
            let report = exact_favg(&Policy::empty(), &inst, &limits()).unwrap();
            assert_eq!(report.favg, 0.0);
            assert_eq!(report.stderr, 0.0);
            assert_eq!(report.mean_queries, 0.0);
        }
    }

    #[test]
    fn greedy_on_the_one_sensor_toy() {
        let inst = one_sensor_half();
        let report = exact_favg(&Policy::adaptive_greedy(1).unwrap(), &inst, &limits()).unwrap();
        // 0.5 · 2 + 0.5 · 0, by enumeration.
        assert!((report.favg - 1.0).abs() < 1e-12);
        assert_eq!(report.mean_queries, 1.0);
    }

    #[test]
    fn random_greedy_with_k_one_is_argmax() {
        let inst = gains_three_one();
        let report =
            exact_favg(&Policy::adaptive_random_greedy(1).unwrap(), &inst, &limits()).unwrap();
        assert!((report.favg - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_greedy_on_the_triangle_beats_one_over_e() {
        let inst = triangle();
        let opt = optimal_policy_value(&inst, 2, &limits()).unwrap();
        let favg = exact_favg(&Policy::adaptive_random_greedy(2).unwrap(), &inst, &limits())
            .unwrap()
            .favg;
        assert!(favg >= opt / std::f64::consts::E - 1e-9);
        // Any two distinct vertices of the triangle cut 2 of the 3 edges, so
        // random greedy is in fact optimal here.
        assert!((favg - 2.0).abs() < 1e-12);
        assert!((opt - 2.0).abs() < 1e-12);
    }

    /// Independent oracle: direct enumeration of E[f(E(π, Φ), Φ)] for
    /// deterministic policies by running the policy on every realization.
    fn direct_enumeration_favg(policy: &Policy, inst: &Instance) -> f64 {
        let support = inst.prior.support(1 << 16).unwrap();
        let mut acc = 0.0;
        for (r, p) in &support {
            let oracle = ValueOracle::exact(inst, limits());
            let trace = run_policy(policy, r, &oracle, 0).unwrap();
            acc += p * trace.final_value;
        }
        acc
    }

    #[test]
    fn exact_favg_agrees_with_direct_enumeration_for_deterministic_policies() {
        let instances = vec![
            generate_coverage(4, 6, 0.6, 0.5, 21).unwrap(),
            generate_mixed(4, 5, 0.5, 0.6, 0.7, 22).unwrap(),
            triangle(),
        ];
        for inst in &instances {
            for policy in [
                Policy::adaptive_greedy(2).unwrap(),
                Policy::adaptive_greedy(3).unwrap(),
                Policy::locally_greedy(PartitionMatroid::single_block(inst.ground.n_real(), 2).unwrap()),
            ] {
                let exact = exact_favg(&policy, inst, &limits()).unwrap().favg;
                let direct = direct_enumeration_favg(&policy, inst);
                assert!(
                    (exact - direct).abs() < 1e-12,
                    "{policy:?}: {exact} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn exact_favg_is_bit_reproducible() {
        let inst = generate_mixed(5, 5, 0.5, 0.6, 0.7, 30).unwrap();
        let policy = Policy::adaptive_random_greedy(2).unwrap();
        let a = exact_favg(&policy, &inst, &limits()).unwrap().favg;
        let b = exact_favg(&policy, &inst, &limits()).unwrap().favg;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mc_favg_matches_exact_within_four_sigma() {
        let inst = generate_coverage(5, 8, 0.5, 0.6, 33).unwrap();
        let policy = Policy::adaptive_random_greedy(2).unwrap();
        let exact = exact_favg(&policy, &inst, &limits()).unwrap().favg;
        let mc = mc_favg(&policy, &inst, 10_000, 99).unwrap();
        assert!(
            (mc.favg - exact).abs() <= 4.0 * mc.stderr.max(1e-9),
            "exact {exact}, mc {} ± {}",
            mc.favg,
            mc.stderr
        );
    }

    /// Exercises the subset-enumeration branch of the exact evaluator:
    /// k = 5, eps = 0.45 gives the linear-time policy a 5-of-6 sample each
    /// round, so the expansion marginalizes over all 6 subsets per node.
    #[test]
    fn exact_favg_handles_partial_samples() {
        let inst = generate_coverage(6, 8, 0.6, 0.5, 34).unwrap();
        let policy = Policy::linear_time(5, 0.45).unwrap();
        assert!(crate::policies::LtParams::derive(5, 0.45, 6).unwrap().sample_size < 6);
        let exact = exact_favg(&policy, &inst, &limits()).unwrap();
        let mc = mc_favg(&policy, &inst, 20_000, 12).unwrap();
        assert!(
            (mc.favg - exact.favg).abs() <= 4.0 * mc.stderr,
            "exact {}, mc {} ± {}",
            exact.favg,
            mc.favg,
            mc.stderr
        );
        // The expected ledger from the expansion equals the closed form.
        let params = crate::policies::LtParams::derive(5, 0.45, 6).unwrap();
        assert_eq!(exact.mean_queries, (5 * params.sample_size) as f64);
        assert_eq!(mc.mean_queries, (5 * params.sample_size) as f64);
    }

    #[test]
    fn mc_favg_is_seed_deterministic_and_job_invariant() {
        let inst = generate_coverage(5, 8, 0.5, 0.6, 33).unwrap();
        let policy = Policy::adaptive_stochastic_greedy(2, 0.3).unwrap();
        let a = mc_favg_jobs(&policy, &inst, 500, 7, 1, &limits()).unwrap();
        let b = mc_favg_jobs(&policy, &inst, 500, 7, 4, &limits()).unwrap();
        assert_eq!(a.favg.to_bits(), b.favg.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn mc_favg_on_a_deterministic_instance_has_zero_stderr() {
        let ground = GroundSet::uniform(2, 2).unwrap();
        let prior = Prior::bernoulli(2, 1.0).unwrap();
        let cov = Coverage::new(2, 3, vec![vec![vec![], vec![0]], vec![vec![], vec![1, 2]]]).unwrap();
        let inst = Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap();
        let mc = mc_favg(&Policy::adaptive_greedy(2).unwrap(), &inst, 200, 5).unwrap();
        assert_eq!(mc.stderr, 0.0);
        assert_eq!(mc.favg, 3.0);
    }

    #[test]
    fn optimal_value_base_cases() {
        let inst = one_sensor_half();
        assert_eq!(optimal_policy_value(&inst, 0, &limits()).unwrap(), 0.0);
        let v = optimal_policy_value(&inst, 1, &limits()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_value_on_state_independent_objectives_is_best_subset() {
        // With no state dependence, adaptivity buys nothing: compare to an
        // exhaustive subset search.
        let inst = triangle();
        for k in 0..=3usize {
            let dp = optimal_policy_value(&inst, k, &limits()).unwrap();
            let mut best = 0.0f64;
            for bits in 0u32..8 {
                if (bits.count_ones() as usize) <= k {
                    let sel: ItemSet = (0..3).filter(|i| bits & (1 << i) != 0).map(ItemId).collect();
                    best = best.max(inst.evaluate(&sel, &phi(&[0, 0, 0])));
                }
            }
            assert!((dp - best).abs() < 1e-12, "k = {k}: {dp} vs {best}");
        }
    }

    #[test]
    fn optimal_value_is_monotone_in_k() {
        let inst = generate_mixed(4, 5, 0.5, 0.6, 0.7, 40).unwrap();
        let mut prev = 0.0;
        for k in 0..=4 {
            let v = optimal_policy_value(&inst, k, &limits()).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn optimal_dominates_every_policy() {
        let inst = generate_coverage(4, 6, 0.6, 0.5, 41).unwrap();
        let opt = optimal_policy_value(&inst, 2, &limits()).unwrap();
        for policy in [
            Policy::adaptive_greedy(2).unwrap(),
            Policy::adaptive_random_greedy(2).unwrap(),
            Policy::linear_time(2, 0.1).unwrap(),
            Policy::adaptive_stochastic_greedy(2, 0.1).unwrap(),
        ] {
            let favg = exact_favg(&policy, &inst, &limits()).unwrap().favg;
            assert!(favg <= opt + 1e-9, "{policy:?}: {favg} > {opt}");
        }
    }

    #[test]
    fn stop_option_never_binds_on_monotone_instances() {
        let inst = generate_coverage(4, 6, 0.6, 0.5, 42).unwrap();
        for k in 1..=3 {
            let with_stop = optimal_policy_value_opts(&inst, k, &limits(), true).unwrap();
            let without = optimal_policy_value_opts(&inst, k, &limits(), false).unwrap();
            assert!((with_stop - without).abs() < 1e-12);
        }
        // On the non-monotone triangle the stop option strictly helps.
        let tri = triangle();
        let with_stop = optimal_policy_value_opts(&tri, 3, &limits(), true).unwrap();
        let without = optimal_policy_value_opts(&tri, 3, &limits(), false).unwrap();
        assert!(with_stop > without + 0.5);
    }

    #[test]
    fn matroid_dp_degenerate_cases() {
        let inst = generate_coverage(4, 6, 0.6, 0.5, 43).unwrap();
        // All limits zero: the empty value.
        let m0 = PartitionMatroid::new(
            vec![vec![ItemId(0), ItemId(1)], vec![ItemId(2), ItemId(3)]],
            vec![0, 0],
        )
        .unwrap();
        assert_eq!(optimal_policy_value_matroid(&inst, &m0, &limits()).unwrap(), 0.0);
        // A single block is exactly the cardinality case.
        let m1 = PartitionMatroid::single_block(4, 2).unwrap();
        let a = optimal_policy_value_matroid(&inst, &m1, &limits()).unwrap();
        let b = optimal_policy_value(&inst, 2, &limits()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    /// Independent exhaustive tree search for the matroid optimum: no
    /// memoization, expectations by filtering the full support table.
    fn brute_matroid_optimum(
        inst: &Instance,
        matroid: &PartitionMatroid,
        obs: &mut Vec<(usize, u8)>,
        remaining: &mut Vec<usize>,
        support: &[(Realization, f64)],
    ) -> f64 {
        let consistent: Vec<&(Realization, f64)> = support
            .iter()
            .filter(|(r, _)| obs.iter().all(|&(e, s)| r.state(ItemId(e)).0 == s))
            .collect();
        let total: f64 = consistent.iter().map(|(_, p)| p).sum();
        let sel: ItemSet = obs.iter().map(|&(e, _)| ItemId(e)).collect();
        let stop: f64 = consistent
            .iter()
            .map(|(r, p)| p / total * inst.evaluate(&sel, r))
            .sum();
        let mut best = stop;
        for (block, members) in matroid.blocks().iter().enumerate() {
            if remaining[block] == 0 {
                continue;
            }
            for &item in members {
                if obs.iter().any(|&(e, _)| e == item.0) {
                    continue;
                }
                let mut acc = 0.0;
                for state in 0..inst.ground.alphabet(item) {
                    let p_state: f64 = consistent
                        .iter()
                        .filter(|(r, _)| r.state(item).0 == state)
                        .map(|(_, p)| p / total)
                        .sum();
                    if p_state <= 0.0 {
                        continue;
                    }
                    obs.push((item.0, state));
                    remaining[block] -= 1;
                    let v = brute_matroid_optimum(inst, matroid, obs, remaining, support);
                    remaining[block] += 1;
                    obs.pop();
                    acc += p_state * v;
                }
                best = best.max(acc);
            }
        }
        best
    }

    #[test]
    fn matroid_dp_matches_exhaustive_tree_search() {
        let inst = generate_coverage(4, 5, 0.6, 0.5, 44).unwrap();
        let matroid = PartitionMatroid::new(
            vec![vec![ItemId(0), ItemId(1)], vec![ItemId(2), ItemId(3)]],
            vec![1, 1],
        )
        .unwrap();
        let dp = optimal_policy_value_matroid(&inst, &matroid, &limits()).unwrap();
        let support = inst.prior.support(1 << 12).unwrap();
        let brute = brute_matroid_optimum(
            &inst,
            &matroid,
            &mut Vec::new(),
            &mut matroid.limits().to_vec(),
            &support,
        );
        assert!((dp - brute).abs() < 1e-12, "{dp} vs {brute}");
    }

    #[test]
    fn coverage_passes_all_checkers() {
        let inst = generate_coverage(3, 5, 0.7, 0.6, 50).unwrap();
        assert!(check_adaptive_submodularity(&inst, &limits()).unwrap().is_empty());
        assert!(check_adaptive_monotonicity(&inst, &limits()).unwrap().is_empty());
        assert!(check_pointwise_submodularity(&inst, &limits()).unwrap().is_empty());
        assert!(check_fully_adaptive_submodularity(&inst, 2, &limits()).unwrap().is_empty());
    }

    #[test]
    fn cut_is_submodular_but_not_monotone() {
        let inst = triangle();
        assert!(check_adaptive_submodularity(&inst, &limits()).unwrap().is_empty());
        assert!(check_pointwise_submodularity(&inst, &limits()).unwrap().is_empty());
        let violations = check_adaptive_monotonicity(&inst, &limits()).unwrap();
        assert!(!violations.is_empty());
        // Adding the third vertex after the other two has gain -2.
        assert!(violations.iter().any(|v| v.lhs < -0.5));
    }

    #[test]
    fn size_squared_fails_every_submodularity_checker() {
        let inst = size_squared(3);
        let a = check_adaptive_submodularity(&inst, &limits()).unwrap();
        let p = check_pointwise_submodularity(&inst, &limits()).unwrap();
        let f = check_fully_adaptive_submodularity(&inst, 2, &limits()).unwrap();
        assert!(!a.is_empty());
        assert!(!p.is_empty());
        assert!(!f.is_empty());
        // The shipped violators are far beyond float noise.
        assert!(a.iter().any(|v| v.margin >= 0.1));
        // |S|² grows, so monotonicity still holds.
        assert!(check_adaptive_monotonicity(&inst, &limits()).unwrap().is_empty());
    }

    #[test]
    fn fully_adaptive_with_budget_one_reduces_to_adaptive_submodularity() {
        for inst in [triangle(), size_squared(3), generate_coverage(3, 4, 0.8, 0.5, 51).unwrap()] {
            let fas = check_fully_adaptive_submodularity(&inst, 1, &limits()).unwrap();
            let asub = check_adaptive_submodularity(&inst, &limits()).unwrap();
            assert_eq!(fas.is_empty(), asub.is_empty());
        }
    }

    #[test]
    fn single_item_monotonicity_matches_its_marginal() {
        let inst = one_sensor_half();
        assert!(check_adaptive_monotonicity(&inst, &limits()).unwrap().is_empty());
    }

    #[test]
    fn sampling_lemma_trivial_cases() {
        // Sample covers the whole ground set.
        let (rate, _) = check_sampling_lemma(10, 1, 0.05, 500, 3).unwrap();
        assert_eq!(rate, 1.0);
        // The target set is the whole ground set.
        let (rate, _) = check_sampling_lemma(10, 10, 0.3, 500, 3).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn sampling_lemma_holds_at_scale() {
        let trials = 20_000;
        let (rate, bound) = check_sampling_lemma(100, 10, 0.1, trials, 9).unwrap();
        let sigma = (rate * (1.0 - rate) / trials as f64).sqrt();
        assert!(rate >= bound - 4.0 * sigma, "rate {rate}, bound {bound}");
    }

    #[test]
    fn marginal_policy_definitional_cases() {
        let inst = gains_three_one();
        let oracle = ValueOracle::exact(&inst, limits());
        let empty_psi = PartialRealization::new();
        // Empty policy gains nothing.
        assert_eq!(oracle.marginal_policy(&Policy::empty(), &empty_psi).unwrap(), 0.0);
        // A single fixed item coincides with the item marginal.
        let pi = Policy::fixed(vec![ItemId(1)]).unwrap();
        let via_policy = oracle.marginal_policy(&pi, &empty_psi).unwrap();
        let via_item = oracle.marginal_item(ItemId(1), &empty_psi).unwrap();
        assert!((via_policy - via_item).abs() < 1e-12);
        // The best single-item policy is the max item marginal.
        let best = oracle.marginal_policy(&Policy::adaptive_greedy(1).unwrap(), &empty_psi).unwrap();
        assert!((best - 3.0).abs() < 1e-12);
    }

    #[test]
    fn concat_after_any_policy_never_hurts_on_monotone_instances() {
        // Mirrors adaptive monotonicity: running more policy afterwards
        // cannot lower the expected value. Exhaustive at n = 4.
        let inst = generate_coverage(4, 5, 0.6, 0.5, 60).unwrap();
        let firsts = [
            Policy::adaptive_greedy(2).unwrap(),
            Policy::adaptive_random_greedy(2).unwrap(),
        ];
        let seconds = [
            Policy::adaptive_greedy(1).unwrap(),
            Policy::fixed(vec![ItemId(0), ItemId(3)]).unwrap(),
        ];
        for first in &firsts {
            let alone = exact_favg(first, &inst, &limits()).unwrap().favg;
            for second in &seconds {
                let combined = Policy::concat(first.clone(), second.clone());
                let both = exact_favg(&combined, &inst, &limits()).unwrap().favg;
                assert!(
                    both >= alone - 1e-9,
                    "{first:?} @ {second:?}: {both} < {alone}"
                );
            }
        }
    }

    #[test]
    fn branch_cap_is_enforced() {
        let inst = generate_coverage(6, 6, 0.6, 0.5, 61).unwrap();
        let tight = Limits {
            enum_cap: 1 << 12,
            branch_cap: 10,
        };
        let err = exact_favg(&Policy::adaptive_greedy(3).unwrap(), &inst, &tight).unwrap_err();
        assert!(matches!(err, Error::BranchCapExceeded { .. }));
    }
}
