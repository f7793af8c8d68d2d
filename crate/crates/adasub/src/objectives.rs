//! State-dependent utility functions and the instance file format.
//!
//! Every objective maps a selected item set and a realization to a
//! non-negative value. The shipped families are:
//!
//! * `Coverage` — sensors monitor fixed target sets when their observed
//!   state is normal and nothing when it is failed; monotone.
//! * `Cut` — weight of the edges crossing the selected vertex set,
//!   independent of states; submodular but not monotone.
//! * `Sum` — pointwise sum of two objectives, used for mixed
//!   coverage-plus-cut instances.
//! * `SizeSquared` — `|S|²`; deliberately violates diminishing returns and
//!   exists so the property checkers have something to reject.
//!
//! Instances (ground set, prior, objective, optional partition matroid)
//! round-trip through a hand-editable TOML document.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::core::{
    GroundSet, ItemId, ItemSet, Prior, Realization, StateValue, MAX_ITEMS,
};
use crate::error::{Error, Result};
use crate::policies::PartitionMatroid;
use crate::rng;

/// Sensors covering targets when observed in the normal state.
///
/// `covers[e][s]` is the bitmask of targets item `e` monitors in state `s`;
/// state 0 is the failure state and must cover nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    n_sensors: usize,
    n_targets: usize,
    covers: Vec<Vec<u128>>,
}

impl Coverage {
    pub fn new(n_sensors: usize, n_targets: usize, covers: Vec<Vec<Vec<u32>>>) -> Result<Self> {
        if n_targets > MAX_ITEMS {
            return Err(Error::invalid_param(
                "n_targets",
                format!("at most {MAX_ITEMS} targets are supported, got {n_targets}"),
            ));
        }
        if covers.len() != n_sensors {
            return Err(Error::invalid_instance(
                "objective.covers",
                format!("{} sensor entries for {} sensors", covers.len(), n_sensors),
            ));
        }
        let mut masks = Vec::with_capacity(n_sensors);
        for (e, per_state) in covers.iter().enumerate() {
            if per_state.is_empty() {
                return Err(Error::invalid_instance(
                    format!("objective.covers[{e}]"),
                    "needs at least one state",
                ));
            }
            if !per_state[0].is_empty() {
                return Err(Error::invalid_instance(
                    format!("objective.covers[{e}][0]"),
                    "the failure state must cover no targets",
                ));
            }
            let mut state_masks = Vec::with_capacity(per_state.len());
            for (s, targets) in per_state.iter().enumerate() {
                let mut mask = 0u128;
                for &t in targets {
                    if t as usize >= n_targets {
                        return Err(Error::invalid_instance(
                            format!("objective.covers[{e}][{s}]"),
                            format!("target {t} out of range (targets = {n_targets})"),
                        ));
                    }
                    mask |= 1u128 << t;
                }
                state_masks.push(mask);
            }
            masks.push(state_masks);
        }
        Ok(Coverage {
            n_sensors,
            n_targets,
            covers: masks,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    fn value(&self, sel: &ItemSet, phi: &Realization) -> f64 {
        let mut covered = 0u128;
        for item in sel.iter() {
            if item.0 >= self.n_sensors {
                continue;
            }
            let per_state = &self.covers[item.0];
            let s = phi.state(item).0 as usize;
            covered |= per_state.get(s).copied().unwrap_or(0);
        }
        covered.count_ones() as f64
    }

    fn target_lists(&self) -> Vec<Vec<Vec<u32>>> {
        self.covers
            .iter()
            .map(|per_state| {
                per_state
                    .iter()
                    .map(|mask| (0..self.n_targets as u32).filter(|t| mask & (1u128 << t) != 0).collect())
                    .collect()
            })
            .collect()
    }
}

/// Weighted undirected graph cut; the value of `S` is the total weight of
/// edges with exactly one endpoint in `S`. States never enter the value.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    n_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Cut {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for (i, &(u, v, w)) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::invalid_instance(
                    format!("objective.edges[{i}]"),
                    format!("endpoint out of range (vertices = {n_vertices})"),
                ));
            }
            if u == v {
                return Err(Error::invalid_instance(
                    format!("objective.edges[{i}]"),
                    "self-loop",
                ));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid_instance(
                    format!("objective.edges[{i}]"),
                    format!("weight {w} is not a non-negative finite number"),
                ));
            }
        }
        Ok(Cut { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    fn value(&self, sel: &ItemSet) -> f64 {
        self.edges
            .iter()
            .filter(|(u, v, _)| sel.contains(ItemId(*u)) != sel.contains(ItemId(*v)))
            .map(|(_, _, w)| w)
            .sum()
    }
}

/// A state-dependent set function `f(S, φ) ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Coverage(Coverage),
    Cut(Cut),
    /// Pointwise sum of two objectives.
    Sum(Box<Objective>, Box<Objective>),
    /// `|S|²`; supermodular, violates every diminishing-returns property.
    SizeSquared,
}

impl Objective {
    /// Value of the selected set under the given realization. Items outside
    /// the realization's range (dummies) are ignored.
    pub fn evaluate(&self, sel: &ItemSet, phi: &Realization) -> f64 {
        let real: ItemSet = sel.iter().filter(|e| e.0 < phi.n_items()).collect();
        self.eval_real(&real, phi)
    }

    fn eval_real(&self, sel: &ItemSet, phi: &Realization) -> f64 {
        match self {
            Objective::Coverage(c) => c.value(sel, phi),
            Objective::Cut(c) => c.value(sel),
            Objective::Sum(a, b) => a.eval_real(sel, phi) + b.eval_real(sel, phi),
            Objective::SizeSquared => {
                let k = sel.len() as f64;
                k * k
            }
        }
    }

    /// True when `f(S, φ)` depends on `φ` only through the states of the
    /// items of `S`. Exact marginals then need no enumeration over the
    /// states of unobserved items.
    pub fn depends_only_on_selected(&self) -> bool {
        match self {
            Objective::Coverage(_) | Objective::Cut(_) | Objective::SizeSquared => true,
            Objective::Sum(a, b) => a.depends_only_on_selected() && b.depends_only_on_selected(),
        }
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub ground: GroundSet,
    pub prior: Prior,
    pub objective: Objective,
    pub matroid: Option<PartitionMatroid>,
}

impl Instance {
    pub fn new(
        ground: GroundSet,
        prior: Prior,
        objective: Objective,
        matroid: Option<PartitionMatroid>,
    ) -> Result<Self> {
        let inst = Instance {
            ground,
            prior,
            objective,
            matroid,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate(&self.ground)?;
        if let Some(m) = &self.matroid {
            m.validate(&self.ground)?;
        }
        Ok(())
    }

    /// Evaluate the objective, masking out dummy items first.
    pub fn evaluate(&self, sel: &ItemSet, phi: &Realization) -> f64 {
        let real: ItemSet = sel.iter().filter(|e| !self.ground.is_dummy(*e)).collect();
        self.objective.evaluate(&real, phi)
    }
}

/// Coverage instance generator: each (sensor, target) pair is covered
/// independently with probability `density` under the normal state, and
/// each sensor is normal with probability `p_normal`.
pub fn generate_coverage(
    n_sensors: usize,
    n_targets: usize,
    density: f64,
    p_normal: f64,
    seed: u64,
) -> Result<Instance> {
    if n_sensors == 0 {
        return Err(Error::invalid_param("n_sensors", "must be at least 1"));
    }
    if n_targets == 0 {
        return Err(Error::invalid_param("n_targets", "must be at least 1"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid_param("density", format!("{density} not in (0, 1]")));
    }
    if !(p_normal > 0.0 && p_normal <= 1.0) {
        return Err(Error::invalid_param("p_normal", format!("{p_normal} not in (0, 1]")));
    }
    let mut stream = rng::stream(seed, "generate-coverage", 0);
    let covers: Vec<Vec<Vec<u32>>> = (0..n_sensors)
        .map(|_| {
            let normal: Vec<u32> = (0..n_targets as u32)
                .filter(|_| stream.gen::<f64>() < density)
                .collect();
            vec![Vec::new(), normal]
        })
        .collect();
    let ground = GroundSet::uniform(n_sensors, 2)?;
    let prior = Prior::bernoulli(n_sensors, p_normal)?;
    let objective = Objective::Coverage(Coverage::new(n_sensors, n_targets, covers)?);
    Instance::new(ground, prior, objective, None)
}

/// Random cut instance: each vertex pair carries an edge independently with
/// probability `edge_density`, weighted uniformly in (0, 1]. The prior is an
/// even coin per item; the cut value never reads it.
pub fn generate_cut(n_vertices: usize, edge_density: f64, seed: u64) -> Result<Instance> {
    if n_vertices < 2 {
        return Err(Error::invalid_param("n_vertices", "must be at least 2"));
    }
    if !(edge_density > 0.0 && edge_density <= 1.0) {
        return Err(Error::invalid_param(
            "edge_density",
            format!("{edge_density} not in (0, 1]"),
        ));
    }
    let mut stream = rng::stream(seed, "generate-cut", 0);
    let mut edges = Vec::new();
    for u in 0..n_vertices {
        for v in (u + 1)..n_vertices {
            if stream.gen::<f64>() < edge_density {
                edges.push((u, v, 1.0 - stream.gen::<f64>()));
            }
        }
    }
    cut_from_edges(n_vertices, edges)
}

/// Cut instance over an explicit edge list.
pub fn cut_from_edges(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> Result<Instance> {
    let ground = GroundSet::uniform(n_vertices, 2)?;
    let prior = Prior::bernoulli(n_vertices, 0.5)?;
    let objective = Objective::Cut(Cut::new(n_vertices, edges)?);
    Instance::new(ground, prior, objective, None)
}

/// Mixed instance: coverage plus a random cut on the same items. The sum of
/// two adaptive submodular objectives stays adaptive submodular, while the
/// cut part makes marginals go negative once most of the graph is selected.
pub fn generate_mixed(
    n_items: usize,
    n_targets: usize,
    density: f64,
    p_normal: f64,
    edge_density: f64,
    seed: u64,
) -> Result<Instance> {
    let coverage = generate_coverage(n_items, n_targets, density, p_normal, seed)?;
    let cut = generate_cut(n_items, edge_density, seed.wrapping_add(1))?;
    let objective = Objective::Sum(Box::new(coverage.objective), Box::new(cut.objective));
    Instance::new(coverage.ground, coverage.prior, objective, None)
}

// ---------------------------------------------------------------------------
// Instance file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    items: usize,
    prior: PriorFile,
    objective: ObjectiveFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    matroid: Option<MatroidFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PriorFile {
    /// `probs[e][o]` = probability that item `e` is in state `o`. The
    /// optional `labels` name the states per item, for human readers only.
    Independent {
        probs: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<Vec<String>>>,
    },
    /// Explicit joint table over full state assignments.
    Joint { table: Vec<JointRow> },
}

#[derive(Debug, Serialize, Deserialize)]
struct JointRow {
    states: Vec<u8>,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ObjectiveFile {
    Coverage {
        targets: usize,
        covers: Vec<Vec<Vec<u32>>>,
    },
    Cut {
        edges: Vec<(usize, usize, f64)>,
    },
    Sum {
        parts: Vec<ObjectiveFile>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct MatroidFile {
    blocks: Vec<Vec<usize>>,
    limits: Vec<usize>,
}

fn objective_from_file(file: ObjectiveFile, n_items: usize) -> Result<Objective> {
    match file {
        ObjectiveFile::Coverage { targets, covers } => Ok(Objective::Coverage(Coverage::new(
            n_items, targets, covers,
        )?)),
        ObjectiveFile::Cut { edges } => Ok(Objective::Cut(Cut::new(n_items, edges)?)),
        ObjectiveFile::Sum { parts } => {
            if parts.len() != 2 {
                return Err(Error::invalid_instance(
                    "objective.parts",
                    format!("a sum objective needs exactly 2 parts, got {}", parts.len()),
                ));
            }
            let mut it = parts.into_iter();
            let a = objective_from_file(it.next().unwrap(), n_items)?;
            let b = objective_from_file(it.next().unwrap(), n_items)?;
            Ok(Objective::Sum(Box::new(a), Box::new(b)))
        }
    }
}

fn objective_to_file(obj: &Objective) -> Result<ObjectiveFile> {
    match obj {
        Objective::Coverage(c) => Ok(ObjectiveFile::Coverage {
            targets: c.n_targets,
            covers: c.target_lists(),
        }),
        Objective::Cut(c) => Ok(ObjectiveFile::Cut {
            edges: c.edges.clone(),
        }),
        Objective::Sum(a, b) => Ok(ObjectiveFile::Sum {
            parts: vec![objective_to_file(a)?, objective_to_file(b)?],
        }),
        Objective::SizeSquared => Err(Error::invalid_instance(
            "objective",
            "the size-squared check fixture has no file representation",
        )),
    }
}

fn alphabet_sizes(prior: &PriorFile, n_items: usize) -> Result<Vec<u8>> {
    match prior {
        PriorFile::Independent { probs, labels } => {
            if probs.len() != n_items {
                return Err(Error::invalid_instance(
                    "prior.probs",
                    format!("{} entries for {} items", probs.len(), n_items),
                ));
            }
            if let Some(labels) = labels {
                if labels.len() != n_items
                    || labels.iter().zip(probs).any(|(l, p)| l.len() != p.len())
                {
                    return Err(Error::invalid_instance(
                        "prior.labels",
                        "label lists must match the probability lists item for item",
                    ));
                }
            }
            probs
                .iter()
                .enumerate()
                .map(|(i, dist)| {
                    u8::try_from(dist.len()).map_err(|_| {
                        Error::invalid_instance(
                            format!("prior.probs[{i}]"),
                            "alphabet too large",
                        )
                    })
                })
                .collect()
        }
        PriorFile::Joint { table } => {
            let mut sizes = vec![0u8; n_items];
            for (idx, row) in table.iter().enumerate() {
                if row.states.len() != n_items {
                    return Err(Error::invalid_instance(
                        format!("prior.table[{idx}]"),
                        format!("{} states for {} items", row.states.len(), n_items),
                    ));
                }
                for (i, &s) in row.states.iter().enumerate() {
                    sizes[i] = sizes[i].max(s + 1);
                }
            }
            Ok(sizes.into_iter().map(|s| s.max(1)).collect())
        }
    }
}

/// Parse and validate an instance document.
pub fn instance_from_toml(text: &str) -> Result<Instance> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.version != 1 {
        return Err(Error::invalid_instance(
            "version",
            format!("unsupported version {}", file.version),
        ));
    }
    let alphabets = alphabet_sizes(&file.prior, file.items)?;
    let ground = GroundSet::with_alphabets(alphabets)?;
    let prior = match file.prior {
        PriorFile::Independent { probs, .. } => Prior::Independent(probs),
        PriorFile::Joint { table } => Prior::Joint(
            table
                .into_iter()
                .map(|row| {
                    (
                        Realization::new(row.states.into_iter().map(StateValue).collect()),
                        row.p,
                    )
                })
                .collect(),
        ),
    };
    let objective = objective_from_file(file.objective, file.items)?;
    let matroid = file
        .matroid
        .map(|m| {
            PartitionMatroid::new(
                m.blocks
                    .into_iter()
                    .map(|b| b.into_iter().map(ItemId).collect())
                    .collect(),
                m.limits,
            )
        })
        .transpose()?;
    Instance::new(ground, prior, objective, matroid)
}

/// Render an instance as a TOML document.
pub fn instance_to_toml(inst: &Instance) -> Result<String> {
    let prior = match &inst.prior {
        Prior::Independent(probs) => PriorFile::Independent {
            probs: probs.clone(),
            labels: None,
        },
        Prior::Joint(table) => PriorFile::Joint {
            table: table
                .iter()
                .map(|(phi, p)| JointRow {
                    states: phi.states().iter().map(|s| s.0).collect(),
                    p: *p,
                })
                .collect(),
        },
    };
    let file = InstanceFile {
        version: 1,
        items: inst.ground.n_real(),
        prior,
        objective: objective_to_file(&inst.objective)?,
        matroid: inst.matroid.as_ref().map(|m| MatroidFile {
            blocks: m
                .blocks()
                .iter()
                .map(|b| b.iter().map(|e| e.0).collect())
                .collect(),
            limits: m.limits().to_vec(),
        }),
    };
    toml::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
}

/// Load and validate an instance file.
pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_toml(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Write an instance file.
pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_toml(inst)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(states: &[u8]) -> Realization {
        Realization::new(states.iter().map(|&s| StateValue(s)).collect())
    }

    fn set(items: &[usize]) -> ItemSet {
        items.iter().map(|&i| ItemId(i)).collect()
    }

    pub(crate) fn triangle_cut() -> Instance {
        cut_from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn empty_set_covers_nothing() {
        let inst = generate_coverage(2, 4, 1.0, 0.5, 7).unwrap();
        assert_eq!(inst.evaluate(&ItemSet::EMPTY, &phi(&[1, 1])), 0.0);
    }

    #[test]
    fn coverage_counts_monitored_targets() {
        let cov = Coverage::new(1, 2, vec![vec![vec![], vec![0, 1]]]).unwrap();
        let obj = Objective::Coverage(cov);
        assert_eq!(obj.evaluate(&set(&[0]), &phi(&[1])), 2.0);
        assert_eq!(obj.evaluate(&set(&[0]), &phi(&[0])), 0.0);
    }

    #[test]
    fn triangle_cut_values() {
        let inst = triangle_cut();
        let r = phi(&[0, 0, 0]);
        assert_eq!(inst.evaluate(&set(&[0]), &r), 2.0);
        assert_eq!(inst.evaluate(&set(&[0, 1]), &r), 2.0);
        assert_eq!(inst.evaluate(&set(&[0, 1, 2]), &r), 0.0);
    }

    #[test]
    fn dummy_items_never_change_the_value() {
        let inst = generate_coverage(3, 5, 0.7, 0.5, 3).unwrap();
        let r = phi(&[1, 0, 1]);
        let plain = set(&[0, 2]);
        let with_dummy = plain.with(ItemId(10));
        assert_eq!(inst.evaluate(&plain, &r), inst.evaluate(&with_dummy, &r));
    }

    #[test]
    fn density_one_covers_everything() {
        let inst = generate_coverage(3, 4, 1.0, 0.5, 7).unwrap();
        for e in 0..3 {
            let v = inst.evaluate(&set(&[e]), &phi(&[1, 1, 1]));
            assert_eq!(v, 4.0);
        }
    }

    #[test]
    fn zero_density_is_rejected() {
        assert!(matches!(
            generate_coverage(3, 4, 0.0, 0.5, 7),
            Err(Error::InvalidParameter { name: "density", .. })
        ));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_coverage(5, 8, 0.4, 0.9, 42).unwrap();
        let b = generate_coverage(5, 8, 0.4, 0.9, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_mixed(5, 6, 0.5, 0.7, 0.6, 42).unwrap();
        let d = generate_mixed(5, 6, 0.5, 0.7, 0.6, 42).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn minimal_coverage_file_round_trips() {
        let text = r#"
version = 1
items = 2

[prior]
kind = "independent"
probs = [[0.5, 0.5], [0.5, 0.5]]

[objective]
type = "coverage"
targets = 4
covers = [[[], [0, 1]], [[], [2, 3]]]
"#;
        let inst = instance_from_toml(text).unwrap();
        assert_eq!(inst.ground.n_real(), 2);
        assert_eq!(inst.evaluate(&set(&[0, 1]), &phi(&[1, 1])), 4.0);
    }

    #[test]
    fn bad_probability_sum_is_a_validation_error() {
        let text = r#"
version = 1
items = 1

[prior]
kind = "independent"
probs = [[0.4, 0.5]]

[objective]
type = "cut"
edges = []
"#;
        let err = instance_from_toml(text).unwrap_err();
        match err {
            Error::InvalidInstance { field, .. } => assert!(field.contains("prior")),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn overlapping_matroid_blocks_are_rejected() {
        let text = r#"
version = 1
items = 3

[prior]
kind = "independent"
probs = [[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]

[objective]
type = "cut"
edges = [[0, 1, 1.0]]

[matroid]
blocks = [[0, 1], [1, 2]]
limits = [1, 1]
"#;
        let err = instance_from_toml(text).unwrap_err();
        match err {
            Error::InvalidInstance { field, .. } => assert!(field.contains("blocks"), "{field}"),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn malformed_toml_is_a_parse_error() {
        let err = instance_from_toml("version = ").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    /// Save-then-load preserves the value of every (S, φ) pair, checked
    /// exhaustively on small instances of each objective family.
    #[test]
    fn save_load_preserves_evaluation() {
        let instances = vec![
            generate_coverage(3, 5, 0.6, 0.5, 11).unwrap(),
            triangle_cut(),
            generate_mixed(4, 4, 0.5, 0.5, 0.8, 13).unwrap(),
        ];
        for inst in instances {
            let text = instance_to_toml(&inst).unwrap();
            let back = instance_from_toml(&text).unwrap();
            let n = inst.ground.n_real();
            let support = inst.prior.support(1 << 12).unwrap();
            for sel_bits in 0u32..(1 << n) {
                let sel: ItemSet = (0..n).filter(|i| sel_bits & (1 << i) != 0).map(ItemId).collect();
                for (r, _) in &support {
                    assert_eq!(inst.evaluate(&sel, r), back.evaluate(&sel, r));
                }
            }
        }
    }

    #[test]
    fn joint_prior_file_round_trips() {
        let text = r#"
version = 1
items = 2

[prior]
kind = "joint"
table = [{ states = [0, 1], p = 0.3 }, { states = [1, 0], p = 0.7 }]

[objective]
type = "cut"
edges = [[0, 1, 2.0]]
"#;
        let inst = instance_from_toml(text).unwrap();
        let rendered = instance_to_toml(&inst).unwrap();
        let back = instance_from_toml(&rendered).unwrap();
        assert_eq!(inst, back);
    }
}
