//! The value oracle: conditional expected marginal utilities with query
//! accounting.
//!
//! `Δ(e | ψ)` is the expected gain of adding item `e` given the observations
//! `ψ`, taken over realizations consistent with `ψ`. Policies access the
//! objective exclusively through this quantity, and the ledger counts one
//! unit per `marginal_item` call: that count is the complexity currency the
//! policy guarantees are stated in. Set and policy marginals are analysis
//! tools and tick separate counters so algorithm query totals stay
//! comparable.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::analysis;
use crate::core::{ItemId, ItemSet, Limits, PartialRealization, Realization, StateValue};
use crate::error::{Error, Result};
use crate::objectives::Instance;
use crate::policies::Policy;
use crate::rng::{self, Stream};

/// Counts of oracle calls by kind.
#[derive(Debug, Default)]
pub struct QueryLedger {
    item_queries: AtomicU64,
    set_queries: AtomicU64,
    policy_queries: AtomicU64,
}

impl QueryLedger {
    pub fn item_queries(&self) -> u64 {
        self.item_queries.load(Ordering::Relaxed)
    }

    pub fn set_queries(&self) -> u64 {
        self.set_queries.load(Ordering::Relaxed)
    }

    pub fn policy_queries(&self) -> u64 {
        self.policy_queries.load(Ordering::Relaxed)
    }
}

/// How marginals are computed.
#[derive(Debug, Clone, Copy)]
pub enum OracleMode {
    Exact,
    MonteCarlo { samples: u32 },
}

/// Value oracle bound to one instance.
pub struct ValueOracle<'a> {
    inst: &'a Instance,
    mode: OracleMode,
    limits: Limits,
    ledger: QueryLedger,
    // Dedicated sampling stream, untouched by policy RNGs, so query order
    // never perturbs policy randomness.
    mc_stream: Option<Mutex<Stream>>,
}

impl<'a> ValueOracle<'a> {
    pub fn exact(inst: &'a Instance, limits: Limits) -> Self {
        ValueOracle {
            inst,
            mode: OracleMode::Exact,
            limits,
            ledger: QueryLedger::default(),
            mc_stream: None,
        }
    }

    pub fn monte_carlo(inst: &'a Instance, samples: u32, seed: u64, limits: Limits) -> Result<Self> {
        if samples == 0 {
            return Err(Error::invalid_param("samples", "must be at least 1"));
        }
        Ok(ValueOracle {
            inst,
            mode: OracleMode::MonteCarlo { samples },
            limits,
            ledger: QueryLedger::default(),
            mc_stream: Some(Mutex::new(rng::stream(seed, "oracle-mc", 0))),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn item_queries(&self) -> u64 {
        self.ledger.item_queries()
    }

    /// `Δ(e | ψ)`. Counts one ledger unit per call, dummy and repeated
    /// queries included. Dummy items return 0 without touching the
    /// objective.
    pub fn marginal_item(&self, item: ItemId, psi: &PartialRealization) -> Result<f64> {
        self.ledger.item_queries.fetch_add(1, Ordering::Relaxed);
        self.inst.ground.check_any(item)?;
        if self.inst.prior.consistency_prob(psi)? <= 0.0 {
            return Err(Error::NullConditioning);
        }
        if self.inst.ground.is_dummy(item) {
            return Ok(0.0);
        }
        match self.mode {
            OracleMode::Exact => {
                exact_marginal_set(self.inst, &ItemSet::EMPTY.with(item), psi, self.limits.enum_cap)
            }
            OracleMode::MonteCarlo { samples } => {
                let cond = self.inst.prior.condition(psi)?;
                let dom = psi.domain();
                let with = dom.with(item);
                let stream = self
                    .mc_stream
                    .as_ref()
                    .expect("monte carlo oracle has a stream");
                let mut rng = stream.lock().expect("oracle stream lock");
                let mut acc = 0.0;
                for _ in 0..samples {
                    let phi = cond.sample(&mut rng);
                    acc += self.inst.evaluate(&with, &phi) - self.inst.evaluate(&dom, &phi);
                }
                Ok(acc / f64::from(samples))
            }
        }
    }

    /// `Δ(S | ψ)`, exact. Ticks the set counter, not the item ledger.
    pub fn marginal_set(&self, items: &ItemSet, psi: &PartialRealization) -> Result<f64> {
        self.ledger.set_queries.fetch_add(1, Ordering::Relaxed);
        for item in items.iter() {
            self.inst.ground.check_any(item)?;
        }
        if self.inst.prior.consistency_prob(psi)? <= 0.0 {
            return Err(Error::NullConditioning);
        }
        let real: ItemSet = items.iter().filter(|e| !self.inst.ground.is_dummy(*e)).collect();
        exact_marginal_set(self.inst, &real, psi, self.limits.enum_cap)
    }

    /// `Δ(π | ψ)`, exact: the policy runs from scratch on its own
    /// observations while the gain is measured jointly with `dom(ψ)`.
    pub fn marginal_policy(&self, policy: &Policy, psi: &PartialRealization) -> Result<f64> {
        self.ledger.policy_queries.fetch_add(1, Ordering::Relaxed);
        if matches!(self.mode, OracleMode::MonteCarlo { .. }) {
            return Err(Error::invalid_param(
                "mode",
                "policy marginals require an exact-mode oracle",
            ));
        }
        if self.inst.prior.consistency_prob(psi)? <= 0.0 {
            return Err(Error::NullConditioning);
        }
        let with = analysis::expected_union_value(self.inst, policy, psi, &self.limits)?;
        let base = expected_set_value(self.inst, &psi.domain(), psi, self.limits.enum_cap)?;
        Ok(with - base)
    }
}

/// Exact `E[f(dom(ψ) ∪ S, Φ) − f(dom(ψ), Φ) | Φ ∼ ψ]`, no ledger.
pub(crate) fn exact_marginal_set(
    inst: &Instance,
    items: &ItemSet,
    psi: &PartialRealization,
    cap: usize,
) -> Result<f64> {
    let dom = psi.domain();
    let with = dom.union(items);
    let base = expected_set_value(inst, &dom, psi, cap)?;
    let extended = expected_set_value(inst, &with, psi, cap)?;
    Ok(extended - base)
}

pub(crate) fn exact_marginal_item(
    inst: &Instance,
    item: ItemId,
    psi: &PartialRealization,
    cap: usize,
) -> Result<f64> {
    if inst.ground.is_dummy(item) {
        return Ok(0.0);
    }
    exact_marginal_set(inst, &ItemSet::EMPTY.with(item), psi, cap)
}

/// Exact `E[f(S, Φ) | Φ ∼ ψ]`.
///
/// When the objective reads only the states of selected items, the
/// expectation needs the joint state distribution of `S \ dom(ψ)` alone,
/// which the chain rule builds one item at a time; this keeps the cost
/// polynomial for independent priors. Otherwise the conditional support is
/// enumerated in full.
pub(crate) fn expected_set_value(
    inst: &Instance,
    sel: &ItemSet,
    psi: &PartialRealization,
    cap: usize,
) -> Result<f64> {
    if inst.objective.depends_only_on_selected() {
        let todo: Vec<ItemId> = sel
            .iter()
            .filter(|e| !inst.ground.is_dummy(*e) && !psi.contains(*e))
            .collect();
        let mut work = 0usize;
        return chain_expectation(inst, sel, psi, &todo, 0, cap, &mut work);
    }
    let rows = inst.prior.conditional_realizations(psi, cap)?;
    Ok(rows.iter().map(|(phi, p)| p * inst.evaluate(sel, phi)).sum())
}

fn chain_expectation(
    inst: &Instance,
    sel: &ItemSet,
    psi: &PartialRealization,
    todo: &[ItemId],
    depth: usize,
    cap: usize,
    work: &mut usize,
) -> Result<f64> {
    *work += 1;
    if *work > cap {
        return Err(Error::EnumerationCapExceeded { needed: *work, cap });
    }
    if depth == todo.len() {
        return Ok(inst.evaluate(sel, &complete(inst, psi)));
    }
    let item = todo[depth];
    let dist = inst.prior.conditional_state_dist(item, psi)?;
    let mut acc = 0.0;
    for (state, p) in dist {
        if p <= 0.0 {
            continue;
        }
        let extended = psi.extended(item, state)?;
        acc += p * chain_expectation(inst, sel, &extended, todo, depth + 1, cap, work)?;
    }
    Ok(acc)
}

/// Fill unobserved items with state 0; only valid when the caller reads
/// states of observed items alone.
pub(crate) fn complete(inst: &Instance, psi: &PartialRealization) -> Realization {
    let mut states = vec![StateValue(0); inst.ground.n_real()];
    for &(item, state) in psi.observations() {
        states[item.0] = state;
    }
    Realization::new(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{GroundSet, Prior};
    use crate::objectives::{Coverage, Objective};

    fn psi(pairs: &[(usize, u8)]) -> PartialRealization {
        PartialRealization::from_pairs(pairs).unwrap()
    }

    /// One sensor covering two targets when normal, normal with prob 0.5.
    fn one_sensor() -> Instance {
        let ground = GroundSet::uniform(1, 2).unwrap();
        let prior = Prior::bernoulli(1, 0.5).unwrap();
        let cov = Coverage::new(1, 2, vec![vec![vec![], vec![0, 1]]]).unwrap();
        Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap()
    }

    /// Brute-force marginal by direct enumeration over the full support;
    /// the independent cross-check for the oracle's factored path.
    fn brute_marginal(inst: &Instance, item: ItemId, psi: &PartialRealization) -> f64 {
        let rows = inst.prior.conditional_realizations(psi, 1 << 20).unwrap();
        let dom = psi.domain();
        let with = dom.with(item);
        rows.iter()
            .map(|(phi, p)| p * (inst.evaluate(&with, phi) - inst.evaluate(&dom, phi)))
            .sum()
    }

    #[test]
    fn singleton_marginal_at_empty_history() {
        let inst = one_sensor();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let d = oracle.marginal_item(ItemId(0), &psi(&[])).unwrap();
        // 0.5 * 2 + 0.5 * 0, frozen from the enumeration oracle.
        assert_eq!(brute_marginal(&inst, ItemId(0), &psi(&[])), 1.0);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dummy_item_is_zero_and_counted() {
        let inst = one_sensor();
        let ground = inst.ground.with_dummies(3);
        let inst = Instance {
            ground,
            ..inst.clone()
        };
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let d = oracle.marginal_item(ItemId(2), &psi(&[])).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(oracle.item_queries(), 1);
    }

    #[test]
    fn observed_item_has_zero_marginal() {
        let inst = one_sensor();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let d = oracle.marginal_item(ItemId(0), &psi(&[(0, 1)])).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(oracle.item_queries(), 1);
    }

    #[test]
    fn repeated_queries_all_count() {
        let inst = one_sensor();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        for _ in 0..5 {
            oracle.marginal_item(ItemId(0), &psi(&[])).unwrap();
        }
        assert_eq!(oracle.item_queries(), 5);
    }

    #[test]
    fn null_conditioning_is_an_error() {
        let inst = one_sensor();
        let mut inst = inst;
        inst.prior = Prior::Independent(vec![vec![1.0, 0.0]]);
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let err = oracle.marginal_item(ItemId(0), &psi(&[(0, 1)])).unwrap_err();
        assert!(matches!(err, Error::NullConditioning));
    }

    #[test]
    fn marginal_set_edge_cases() {
        let inst = crate::objectives::generate_coverage(3, 6, 0.7, 0.6, 5).unwrap();
        let oracle = ValueOracle::exact(&inst, Limits::default());
        let history = psi(&[(1, 1)]);
        // Empty set gains nothing.
        assert_eq!(oracle.marginal_set(&ItemSet::EMPTY, &history).unwrap(), 0.0);
        // Singleton coincides with the item marginal.
        let s = ItemSet::EMPTY.with(ItemId(0));
        let via_set = oracle.marginal_set(&s, &history).unwrap();
        let via_item = oracle.marginal_item(ItemId(0), &history).unwrap();
        assert!((via_set - via_item).abs() < 1e-12);
        // Re-adding the domain is a no-op.
        assert_eq!(oracle.marginal_set(&history.domain(), &history).unwrap(), 0.0);
        // Set queries do not touch the item ledger.
        assert_eq!(oracle.item_queries(), 1);
        assert_eq!(oracle.ledger().set_queries(), 3);
    }

    #[test]
    fn exact_matches_brute_force_on_random_instances() {
        for seed in 0..5 {
            let inst = crate::objectives::generate_mixed(4, 5, 0.6, 0.5, 0.7, seed).unwrap();
            let oracle = ValueOracle::exact(&inst, Limits::default());
            for (pairs, item) in [
                (vec![], 0usize),
                (vec![(1usize, 1u8)], 0),
                (vec![(0, 0), (2, 1)], 3),
            ] {
                let history = psi(&pairs);
                let item = ItemId(item);
                let exact = oracle.marginal_item(item, &history).unwrap();
                let brute = brute_marginal(&inst, item, &history);
                assert!(
                    (exact - brute).abs() < 1e-12,
                    "seed {seed}: {exact} vs {brute}"
                );
            }
        }
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let inst = crate::objectives::generate_coverage(4, 8, 0.5, 0.6, 9).unwrap();
        let exact = ValueOracle::exact(&inst, Limits::default());
        let mc = ValueOracle::monte_carlo(&inst, 100_000, 1234, Limits::default()).unwrap();
        let history = psi(&[(0, 1)]);
        for e in [1usize, 2, 3] {
            let ex = exact.marginal_item(ItemId(e), &history).unwrap();
            let est = mc.marginal_item(ItemId(e), &history).unwrap();
            // Bernoulli-difference samples are bounded by the target count;
            // 4 standard errors at 1e5 samples.
            let sigma = 8.0 / (100_000f64).sqrt();
            assert!(
                (ex - est).abs() <= 4.0 * sigma,
                "item {e}: exact {ex}, estimate {est}"
            );
        }
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let inst = crate::objectives::generate_coverage(4, 8, 0.5, 0.6, 9).unwrap();
        let a = ValueOracle::monte_carlo(&inst, 500, 77, Limits::default()).unwrap();
        let b = ValueOracle::monte_carlo(&inst, 500, 77, Limits::default()).unwrap();
        let history = psi(&[]);
        assert_eq!(
            a.marginal_item(ItemId(1), &history).unwrap(),
            b.marginal_item(ItemId(1), &history).unwrap()
        );
    }
}
