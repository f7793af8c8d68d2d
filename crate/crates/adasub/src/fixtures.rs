//! Small named instances used by tests, the verification suite, and the
//! examples in the documentation.

use crate::core::{GroundSet, ItemId, Prior};
use crate::objectives::{cut_from_edges, Coverage, Instance, Objective};
use crate::policies::PartitionMatroid;

/// One sensor covering two targets, normal with probability 1/2. The
/// smallest instance with a non-trivial expected value: any policy that
/// selects the sensor scores 0.5 · 2 = 1 on average.
pub fn one_sensor_toy() -> Instance {
    let ground = GroundSet::uniform(1, 2).unwrap();
    let prior = Prior::bernoulli(1, 0.5).unwrap();
    let cov = Coverage::new(1, 2, vec![vec![vec![], vec![0, 1]]]).unwrap();
    Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap()
}

/// `n` sensors with disjoint private target groups of sizes 1, 2, …, n, all
/// normal with probability 1/2. Marginals stay strictly positive and
/// pairwise distinct at every history, which makes ranking behavior easy to
/// predict.
pub fn disjoint_coverage(n: usize) -> Instance {
    assert!(n >= 1);
    let mut covers = Vec::with_capacity(n);
    let mut next = 0u32;
    for i in 0..n {
        let group: Vec<u32> = (next..next + i as u32 + 1).collect();
        next += i as u32 + 1;
        covers.push(vec![Vec::new(), group]);
    }
    let ground = GroundSet::uniform(n, 2).unwrap();
    let prior = Prior::bernoulli(n, 0.5).unwrap();
    let cov = Coverage::new(n, next as usize, covers).unwrap();
    Instance::new(ground, prior, Objective::Coverage(cov), None).unwrap()
}

/// Unit-weight triangle cut: submodular, not monotone, states irrelevant.
pub fn triangle_cut() -> Instance {
    cut_from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
}

/// Coverage plus a triangle cut on three items: adaptive submodular but
/// non-monotone.
pub fn mixed_small() -> Instance {
    let base = disjoint_coverage(3);
    let cut = triangle_cut();
    let objective = Objective::Sum(Box::new(base.objective), Box::new(cut.objective));
    Instance::new(base.ground, base.prior, objective, None).unwrap()
}

/// Four disjoint-coverage sensors split into two blocks of two, one pick
/// per block.
pub fn matroid_coverage_toy() -> Instance {
    let base = disjoint_coverage(4);
    let matroid = PartitionMatroid::new(
        vec![vec![ItemId(0), ItemId(1)], vec![ItemId(2), ItemId(3)]],
        vec![1, 1],
    )
    .unwrap();
    Instance::new(base.ground, base.prior, base.objective, Some(matroid)).unwrap()
}

/// The `|S|²` objective on `n` coin-flip items; violates every
/// diminishing-returns property, monotone nonetheless.
pub fn size_squared(n: usize) -> Instance {
    let ground = GroundSet::uniform(n, 2).unwrap();
    let prior = Prior::bernoulli(n, 0.5).unwrap();
    Instance::new(ground, prior, Objective::SizeSquared, None).unwrap()
}

/// The fixtures every evaluator cross-check sweeps, with stable names.
pub fn shipped_fixtures() -> Vec<(&'static str, Instance)> {
    vec![
        ("one-sensor", one_sensor_toy()),
        ("disjoint-coverage-4", disjoint_coverage(4)),
        ("triangle-cut", triangle_cut()),
        ("mixed-small", mixed_small()),
        ("matroid-coverage", matroid_coverage_toy()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        for (name, inst) in shipped_fixtures() {
            assert!(inst.validate().is_ok(), "{name}");
        }
        assert!(size_squared(3).validate().is_ok());
    }
}
