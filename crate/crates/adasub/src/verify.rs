//! End-to-end verification suite.
//!
//! Each check measures a guarantee the algorithms are supposed to deliver —
//! approximation ratios against the brute-force optimal policy, exact query
//! counts against closed forms, property-checker verdicts on known-good and
//! known-bad fixtures, reduction equivalences between policies, and
//! agreement between the exact and sampled evaluators — and reports
//! measured-versus-required values. The CLI `verify` subcommand and the
//! `acceptance` integration test both run these functions.

use crate::analysis::{
    check_adaptive_monotonicity, check_adaptive_submodularity, check_fully_adaptive_submodularity,
    check_pointwise_submodularity, check_sampling_lemma, exact_favg, mc_favg,
    optimal_policy_value, optimal_policy_value_matroid, per_round_distribution,
};
use crate::core::{GroundSet, ItemId, Limits, PartialRealization, Prior};
use crate::error::Result;
use crate::fixtures;
use crate::objectives::{generate_coverage, generate_cut, generate_mixed, Coverage, Instance, Objective};
use crate::oracle::ValueOracle;
use crate::policies::{
    run_policy, Action, LtParams, PartitionMatroid, Policy, stochastic_sample_size,
};

/// Additive slack soaking up float noise in the ratio comparisons.
pub const RATIO_SLACK: f64 = 1e-9;

/// One measured quantity inside a check.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub measured: f64,
    pub required: f64,
    pub pass: bool,
}

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    /// One human-readable line per measurement, prefixed PASS/FAIL.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&format!(
                "  {} {:<52} measured {:>14.9} required {:>14.9}\n",
                if line.pass { "PASS" } else { "FAIL" },
                line.label,
                line.measured,
                line.required
            ));
        }
        out.push_str(&format!(
            "{} {}\n",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Ratios,
    Properties,
    Queries,
    Sampling,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ratios" => Ok(Suite::Ratios),
            "properties" => Ok(Suite::Properties),
            "queries" => Ok(Suite::Queries),
            "sampling" => Ok(Suite::Sampling),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite `{other}` (expected ratios, properties, queries, sampling, or all)"
            )),
        }
    }
}

/// Run a suite; reports in a stable order.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    if matches!(suite, Suite::Ratios | Suite::All) {
        reports.push(check_nonmonotone_random_greedy(seed)?);
        reports.push(check_nonmonotone_linear_time(seed)?);
        reports.push(check_monotone_ratios(seed)?);
        reports.push(check_matroid_ratios(seed)?);
    }
    if matches!(suite, Suite::Queries | Suite::All) {
        reports.push(check_query_accounting(seed)?);
    }
    if matches!(suite, Suite::Sampling | Suite::All) {
        reports.push(check_sampling_bound(seed)?);
    }
    if matches!(suite, Suite::Properties | Suite::All) {
        reports.push(check_property_checkers()?);
        reports.push(check_reduction_equivalences(seed)?);
        reports.push(check_evaluator_cross_validation(seed)?);
    }
    Ok(reports)
}

fn limits() -> Limits {
    Limits::default()
}

fn ratio_line(label: String, favg: f64, bound: f64, opt: f64) -> CheckLine {
    let required = bound * opt - RATIO_SLACK;
    CheckLine {
        label,
        measured: favg,
        required,
        pass: favg >= required,
    }
}

/// Twenty seeded non-monotone instances: cut and mixed objectives over 4-6
/// binary items with budgets 2 and 3.
fn nonmonotone_sweep(seed: u64) -> Result<Vec<(String, Instance, usize)>> {
    let mut out = Vec::new();
    for i in 0..10u64 {
        let n = 4 + (i as usize % 3);
        let k = 2 + (i as usize % 2);
        let inst = generate_cut(n, 0.8, seed.wrapping_add(i))?;
        out.push((format!("cut-n{n}-k{k}-{i}"), inst, k));
    }
    for i in 0..10u64 {
        let n = 4 + (i as usize % 3);
        let k = 2 + ((i as usize + 1) % 2);
        let inst = generate_mixed(n, 5, 0.6, 0.6, 0.8, seed.wrapping_add(100 + i))?;
        out.push((format!("mixed-n{n}-k{k}-{i}"), inst, k));
    }
    Ok(out)
}

/// Twenty seeded monotone coverage instances.
fn monotone_sweep(seed: u64) -> Result<Vec<(String, Instance, usize)>> {
    let mut out = Vec::new();
    for i in 0..20u64 {
        let n = 4 + (i as usize % 3);
        let k = 2 + (i as usize % 2);
        let targets = 5 + (i as usize % 4);
        let density = 0.5 + 0.1 * (i % 4) as f64;
        let p_normal = 0.4 + 0.1 * (i % 5) as f64;
        let inst = generate_coverage(n, targets, density, p_normal, seed.wrapping_add(200 + i))?;
        out.push((format!("coverage-n{n}-k{k}-{i}"), inst, k));
    }
    Ok(out)
}

/// Ten coverage instances paired with 2- or 3-block partition matroids with
/// a total budget of at most 4.
fn matroid_sweep(seed: u64) -> Result<Vec<(String, Instance, PartitionMatroid)>> {
    let mut out = Vec::new();
    for i in 0..10u64 {
        let (n, blocks, dlim): (usize, Vec<Vec<usize>>, Vec<usize>) = match i % 4 {
            0 => (4, vec![vec![0, 1], vec![2, 3]], vec![1, 1]),
            1 => (5, vec![vec![0, 1], vec![2, 3, 4]], vec![1, 2]),
            2 => (6, vec![vec![0, 1], vec![2, 3], vec![4, 5]], vec![1, 1, 1]),
            // Block of 5 with limit 3: at epsilon 0.1 the inner sample is 4
            // of 5, so this case exercises partial block sampling.
            _ => (6, vec![vec![0, 1, 2, 3, 4], vec![5]], vec![3, 1]),
        };
        let inst = generate_coverage(n, 6, 0.6, 0.5 + 0.1 * (i % 3) as f64, seed.wrapping_add(300 + i))?;
        let matroid = PartitionMatroid::new(
            blocks
                .into_iter()
                .map(|b| b.into_iter().map(ItemId).collect())
                .collect(),
            dlim,
        )?;
        out.push((format!("matroid-n{n}-{i}"), inst, matroid));
    }
    Ok(out)
}

/// Random greedy earns at least `1/e` of the optimal adaptive value on
/// non-monotone instances.
pub fn check_nonmonotone_random_greedy(seed: u64) -> Result<CheckReport> {
    let bound = 1.0 / std::f64::consts::E;
    let mut lines = Vec::new();
    for (label, inst, k) in nonmonotone_sweep(seed)? {
        let opt = optimal_policy_value(&inst, k, &limits())?;
        let favg = exact_favg(&Policy::adaptive_random_greedy(k)?, &inst, &limits())?.favg;
        lines.push(ratio_line(label, favg, bound, opt));
    }
    Ok(CheckReport {
        name: "non-monotone 1/e ratio: random greedy vs optimal",
        lines,
    })
}

/// The linear-time policy earns at least `1/e − ε` of optimal on the same
/// non-monotone sweep, at ε = 0.1.
pub fn check_nonmonotone_linear_time(seed: u64) -> Result<CheckReport> {
    let epsilon = 0.1;
    let bound = 1.0 / std::f64::consts::E - epsilon;
    let mut lines = Vec::new();
    for (label, inst, k) in nonmonotone_sweep(seed)? {
        let opt = optimal_policy_value(&inst, k, &limits())?;
        let favg = exact_favg(&Policy::linear_time(k, epsilon)?, &inst, &limits())?.favg;
        lines.push(ratio_line(label, favg, bound, opt));
    }
    Ok(CheckReport {
        name: "non-monotone 1/e - 0.1 ratio: linear-time policy vs optimal",
        lines,
    })
}

/// Monotone coverage: greedy and random greedy reach `1 − 1/e` of optimal;
/// the linear-time and stochastic greedy policies reach `1 − 1/e − ε`.
pub fn check_monotone_ratios(seed: u64) -> Result<CheckReport> {
    let epsilon = 0.1;
    let full = 1.0 - 1.0 / std::f64::consts::E;
    let relaxed = full - epsilon;
    let mut lines = Vec::new();
    for (label, inst, k) in monotone_sweep(seed)? {
        let opt = optimal_policy_value(&inst, k, &limits())?;
        let cases: [(&str, Policy, f64); 4] = [
            ("greedy", Policy::adaptive_greedy(k)?, full),
            ("arg", Policy::adaptive_random_greedy(k)?, full),
            ("lt", Policy::linear_time(k, epsilon)?, relaxed),
            ("asg", Policy::adaptive_stochastic_greedy(k, epsilon)?, relaxed),
        ];
        for (policy_name, policy, bound) in cases {
            let favg = exact_favg(&policy, &inst, &limits())?.favg;
            lines.push(ratio_line(format!("{label}/{policy_name}"), favg, bound, opt));
        }
    }
    Ok(CheckReport {
        name: "monotone ratios: 1-1/e (greedy, arg) and 1-1/e-0.1 (lt, asg)",
        lines,
    })
}

/// Partition matroids: locally greedy reaches half of optimal, the
/// generalized stochastic greedy reaches `(1−1/e−ε)/(4−2/e−2ε)`.
pub fn check_matroid_ratios(seed: u64) -> Result<CheckReport> {
    let epsilon = 0.1;
    let e = std::f64::consts::E;
    let gasg_bound = (1.0 - 1.0 / e - epsilon) / (4.0 - 2.0 / e - 2.0 * epsilon);
    let mut lines = Vec::new();
    for (label, inst, matroid) in matroid_sweep(seed)? {
        let opt = optimal_policy_value_matroid(&inst, &matroid, &limits())?;
        let local = exact_favg(&Policy::locally_greedy(matroid.clone()), &inst, &limits())?.favg;
        lines.push(ratio_line(format!("{label}/local"), local, 0.5, opt));
        let gasg = exact_favg(
            &Policy::generalized_stochastic_greedy(matroid, epsilon)?,
            &inst,
            &limits(),
        )?
        .favg;
        lines.push(ratio_line(format!("{label}/gasg"), gasg, gasg_bound, opt));
    }
    Ok(CheckReport {
        name: "matroid ratios: 1/2 (local) and (1-1/e-eps)/(4-2/e-2eps) (gasg)",
        lines,
    })
}

/// Coverage instance where every sensor monitors one private target, so
/// every policy keeps selecting and the per-round query counts follow the
/// closed forms exactly.
fn private_target_coverage(n: usize) -> Result<Instance> {
    let covers = (0..n).map(|i| vec![vec![], vec![i as u32]]).collect();
    let ground = GroundSet::uniform(n, 2)?;
    let prior = Prior::bernoulli(n, 0.5)?;
    let objective = Objective::Coverage(Coverage::new(n, n, covers)?);
    Instance::new(ground, prior, objective, None)
}

fn count_line(label: String, measured: u64, expected: u64) -> CheckLine {
    CheckLine {
        label,
        measured: measured as f64,
        required: expected as f64,
        pass: measured == expected,
    }
}

/// Measured ledger totals equal the closed-form query counts, exactly.
pub fn check_query_accounting(seed: u64) -> Result<CheckReport> {
    let mut lines = Vec::new();
    for &n in &[10usize, 100] {
        let inst = private_target_coverage(n)?;
        let phi = {
            let mut s = crate::rng::stream(seed, "query-phi", n as u64);
            inst.prior.sample(&mut s)
        };
        for &k in &[1usize, 2, 5] {
            // Greedy and random greedy: n - r + 1 queries in round r.
            let card_total: u64 = (0..k).map(|r| (n - r) as u64).sum();
            for (name, policy) in [
                ("greedy", Policy::adaptive_greedy(k)?),
                ("arg", Policy::adaptive_random_greedy(k)?),
            ] {
                let oracle = ValueOracle::exact(&inst, limits());
                let trace = run_policy(&policy, &phi, &oracle, seed)?;
                lines.push(count_line(
                    format!("{name}-n{n}-k{k}"),
                    trace.queries,
                    card_total,
                ));
            }
            for &eps in &[0.05f64, 0.1, 0.45] {
                let lt = LtParams::derive(k, eps, n)?;
                let oracle = ValueOracle::exact(&inst, limits());
                let trace = run_policy(&Policy::linear_time(k, eps)?, &phi, &oracle, seed)?;
                lines.push(count_line(
                    format!("lt-n{n}-k{k}-eps{eps}"),
                    trace.queries,
                    (k * lt.sample_size) as u64,
                ));
                let asg_size = stochastic_sample_size(n, k, eps);
                let oracle = ValueOracle::exact(&inst, limits());
                let trace =
                    run_policy(&Policy::adaptive_stochastic_greedy(k, eps)?, &phi, &oracle, seed)?;
                lines.push(count_line(
                    format!("asg-n{n}-k{k}-eps{eps}"),
                    trace.queries,
                    (k * asg_size) as u64,
                ));
            }
        }
        // Matroid policies on a two-block split of the same instance.
        let half = n / 2;
        let matroid = PartitionMatroid::new(
            vec![
                (0..half).map(ItemId).collect(),
                (half..n).map(ItemId).collect(),
            ],
            vec![1, 2],
        )?;
        let local_total: u64 = {
            let sizes = [half, n - half];
            let limits_per = [1usize, 2];
            sizes
                .iter()
                .zip(limits_per.iter())
                .map(|(&b, &d)| (0..d).map(|j| (b - j) as u64).sum::<u64>())
                .sum()
        };
        let oracle = ValueOracle::exact(&inst, limits());
        let trace = run_policy(&Policy::locally_greedy(matroid.clone()), &phi, &oracle, seed)?;
        lines.push(count_line(format!("local-n{n}"), trace.queries, local_total));
        for &eps in &[0.05f64, 0.1, 0.45] {
            let gasg_total: u64 = matroid
                .blocks()
                .iter()
                .zip(matroid.limits().iter())
                .map(|(b, &d)| (d * stochastic_sample_size(b.len(), d, eps)) as u64)
                .sum();
            let oracle = ValueOracle::exact(&inst, limits());
            let trace = run_policy(
                &Policy::generalized_stochastic_greedy(matroid.clone(), eps)?,
                &phi,
                &oracle,
                seed,
            )?;
            lines.push(count_line(
                format!("gasg-n{n}-eps{eps}"),
                trace.queries,
                gasg_total,
            ));
        }
    }
    Ok(CheckReport {
        name: "query accounting: ledger totals equal the closed forms",
        lines,
    })
}

/// A random sample of `(n/k)·ln(1/ε)` items hits a fixed best-k set with
/// probability at least `1 − ε`.
pub fn check_sampling_bound(seed: u64) -> Result<CheckReport> {
    let trials = 100_000u64;
    let (rate, bound) = check_sampling_lemma(100, 10, 0.1, trials, seed)?;
    let sigma = (rate * (1.0 - rate) / trials as f64).sqrt();
    let required = bound - 4.0 * sigma;
    Ok(CheckReport {
        name: "sampling bound: hit rate of the stochastic greedy subsets",
        lines: vec![CheckLine {
            label: format!("n=100 k=10 eps=0.1 trials={trials}"),
            measured: rate,
            required,
            pass: rate >= required,
        }],
    })
}

/// The four property checkers accept the coverage fixtures, flag the cut
/// fixture as non-monotone, and reject the size-squared fixture.
pub fn check_property_checkers() -> Result<CheckReport> {
    let lim = limits();
    let mut lines = Vec::new();
    let mut expect = |label: String, count: usize, want_empty: bool| {
        let pass = if want_empty { count == 0 } else { count > 0 };
        lines.push(CheckLine {
            label,
            measured: count as f64,
            required: if want_empty { 0.0 } else { 1.0 },
            pass,
        });
    };

    for (name, inst) in [
        ("coverage-3", generate_coverage(3, 5, 0.7, 0.6, 17)?),
        ("coverage-4", generate_coverage(4, 6, 0.6, 0.5, 18)?),
    ] {
        expect(
            format!("{name}: adaptive submodularity"),
            check_adaptive_submodularity(&inst, &lim)?.len(),
            true,
        );
        expect(
            format!("{name}: adaptive monotonicity"),
            check_adaptive_monotonicity(&inst, &lim)?.len(),
            true,
        );
        expect(
            format!("{name}: pointwise submodularity"),
            check_pointwise_submodularity(&inst, &lim)?.len(),
            true,
        );
        expect(
            format!("{name}: fully adaptive submodularity (a<=2)"),
            check_fully_adaptive_submodularity(&inst, 2, &lim)?.len(),
            true,
        );
    }

    let cut = fixtures::triangle_cut();
    expect(
        "triangle-cut: adaptive submodularity".into(),
        check_adaptive_submodularity(&cut, &lim)?.len(),
        true,
    );
    expect(
        "triangle-cut: pointwise submodularity".into(),
        check_pointwise_submodularity(&cut, &lim)?.len(),
        true,
    );
    expect(
        "triangle-cut: monotonicity violation found".into(),
        check_adaptive_monotonicity(&cut, &lim)?.len(),
        false,
    );

    let sq = fixtures::size_squared(3);
    expect(
        "size-squared: adaptive submodularity violation found".into(),
        check_adaptive_submodularity(&sq, &lim)?.len(),
        false,
    );
    expect(
        "size-squared: pointwise submodularity violation found".into(),
        check_pointwise_submodularity(&sq, &lim)?.len(),
        false,
    );
    expect(
        "size-squared: fully adaptive violation found".into(),
        check_fully_adaptive_submodularity(&sq, 2, &lim)?.len(),
        false,
    );

    Ok(CheckReport {
        name: "property checkers on known-good and known-bad fixtures",
        lines,
    })
}

fn distribution_gap(a: &[(Action, f64)], b: &[(Action, f64)]) -> f64 {
    let mut gap: f64 = 0.0;
    let mut keys: Vec<Action> = a.iter().chain(b.iter()).map(|(k, _)| *k).collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let pa = a.iter().find(|(k, _)| *k == key).map_or(0.0, |(_, p)| *p);
        let pb = b.iter().find(|(k, _)| *k == key).map_or(0.0, |(_, p)| *p);
        gap = gap.max((pa - pb).abs());
    }
    gap
}

/// Reduction equivalences: the linear-time policy with a full sample matches
/// random greedy distributionally; the stochastic greedy policies with full
/// samples match their deterministic counterparts trace for trace.
pub fn check_reduction_equivalences(seed: u64) -> Result<CheckReport> {
    let lim = limits();
    let mut lines = Vec::new();

    // (a) Per-round selection distributions of lt and arg agree once the
    // sample covers all of E (epsilon = 0.1 makes ⌈qn⌉ ≥ n at n = 5).
    let inst = fixtures::disjoint_coverage(5);
    let k = 2;
    let lt = Policy::linear_time(k, 0.1)?;
    let arg = Policy::adaptive_random_greedy(k)?;
    assert!(LtParams::derive(k, 0.1, 5)?.sample_size == 5);
    let mut worst_gap: f64 = 0.0;
    let all = all_positive_histories(&inst)?;
    for psi in &all {
        if psi.len() >= inst.ground.n_real() {
            continue;
        }
        let da = per_round_distribution(&lt, &inst, psi, 0, &lim)?;
        let db = per_round_distribution(&arg, &inst, psi, 0, &lim)?;
        worst_gap = worst_gap.max(distribution_gap(&da, &db));
    }
    lines.push(CheckLine {
        label: format!("lt vs arg distribution gap over {} histories", all.len()),
        measured: worst_gap,
        required: 1e-9,
        pass: worst_gap <= 1e-9,
    });

    // (b) Stochastic greedy with a full sample runs greedy's exact trace.
    let asg = Policy::adaptive_stochastic_greedy(2, 0.1)?;
    let greedy = Policy::adaptive_greedy(2)?;
    assert!(stochastic_sample_size(5, 2, 0.1) == 5);
    let mismatched = trace_mismatches(&inst, &asg, &greedy, seed)?;
    lines.push(CheckLine {
        label: "asg (full sample) vs greedy trace mismatches".into(),
        measured: mismatched as f64,
        required: 0.0,
        pass: mismatched == 0,
    });

    // (c) Generalized stochastic greedy with full block samples runs the
    // locally greedy trace.
    let toy = fixtures::matroid_coverage_toy();
    let matroid = toy.matroid.clone().expect("fixture carries a matroid");
    let gasg = Policy::generalized_stochastic_greedy(matroid.clone(), 0.1)?;
    let local = Policy::locally_greedy(matroid);
    let mismatched = trace_mismatches(&toy, &gasg, &local, seed)?;
    lines.push(CheckLine {
        label: "gasg (full samples) vs local trace mismatches".into(),
        measured: mismatched as f64,
        required: 0.0,
        pass: mismatched == 0,
    });

    Ok(CheckReport {
        name: "reduction equivalences between sampled and exact policies",
        lines,
    })
}

fn all_positive_histories(inst: &Instance) -> Result<Vec<PartialRealization>> {
    crate::analysis::positive_partial_realizations(inst, &limits())
}

fn trace_mismatches(inst: &Instance, a: &Policy, b: &Policy, seed: u64) -> Result<usize> {
    let support = inst.prior.support(limits().enum_cap)?;
    let mut mismatched = 0;
    for (idx, (phi, _)) in support.iter().enumerate() {
        for s in 0..3u64 {
            let run_seed = crate::rng::subseed(seed, "reduction", (idx as u64) << 8 | s);
            let oa = ValueOracle::exact(inst, limits());
            let ob = ValueOracle::exact(inst, limits());
            let ta = run_policy(a, phi, &oa, run_seed)?;
            let tb = run_policy(b, phi, &ob, run_seed)?;
            if !ta.same_decisions(&tb) {
                mismatched += 1;
            }
        }
    }
    Ok(mismatched)
}

/// The sampled evaluator lands within four standard errors of the exact
/// evaluator on every shipped fixture.
pub fn check_evaluator_cross_validation(seed: u64) -> Result<CheckReport> {
    let lim = limits();
    let trials = 10_000u64;
    let mut lines = Vec::new();
    for (name, inst) in fixtures::shipped_fixtures() {
        let policy = match &inst.matroid {
            Some(m) => Policy::locally_greedy(m.clone()),
            None => {
                let k = inst.ground.n_real().min(2);
                Policy::adaptive_greedy(k)?
            }
        };
        let exact = exact_favg(&policy, &inst, &lim)?.favg;
        let mc = mc_favg(&policy, &inst, trials, seed)?;
        let tolerance = 4.0 * mc.stderr;
        let diff = (mc.favg - exact).abs();
        lines.push(CheckLine {
            label: format!("{name}: |mc - exact| within 4 stderr"),
            measured: diff,
            required: tolerance,
            pass: diff <= tolerance,
        });
    }
    // One randomized policy as well.
    let inst = fixtures::disjoint_coverage(4);
    let policy = Policy::adaptive_random_greedy(2)?;
    let exact = exact_favg(&policy, &inst, &lim)?.favg;
    let mc = mc_favg(&policy, &inst, trials, seed)?;
    let tolerance = 4.0 * mc.stderr;
    let diff = (mc.favg - exact).abs();
    lines.push(CheckLine {
        label: "disjoint-coverage-4/arg: |mc - exact| within 4 stderr".into(),
        measured: diff,
        required: tolerance,
        pass: diff <= tolerance,
    });
    Ok(CheckReport {
        name: "evaluator cross-validation: monte carlo vs exact",
        lines,
    })
}
