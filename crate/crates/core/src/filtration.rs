//! Finite regular filtrations of an interval, stored as an atom tree.
//!
//! An atom is created at some level `n` and either survives to the final level
//! or is split at a later time into at least two children, all created at the
//! same level. The algebra `F_n` is generated by the atoms alive at time `n`.

use std::ops::Range;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type AtomId = usize;

pub const MAX_DYADIC_DEPTH: usize = 20;
pub const MAX_RANDOM_DEPTH: usize = 12;
const REJECTION_BUDGET: usize = 10_000;
// Ratio comparisons allow for the rounding of interval endpoints.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub id: AtomId,
    pub a: f64,
    pub b: f64,
    pub measure: f64,
    pub level: usize,
    pub parent: Option<AtomId>,
    pub children: Vec<AtomId>,
}

impl Atom {
    pub fn is_split(&self) -> bool {
        !self.children.is_empty()
    }

    pub fn contains(&self, other: &Atom) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    pub fn disjoint(&self, other: &Atom) -> bool {
        self.b <= other.a || other.b <= self.a
    }
}

/// One step of the refiltration: atom `atom` is replaced by its children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEvent {
    pub atom: AtomId,
    pub order_index: usize,
    pub prev_partition: Vec<AtomId>,
    pub post_partition: Vec<AtomId>,
}

#[derive(Clone, Debug)]
pub struct Filtration {
    atoms: Vec<Atom>,
    delta: f64,
    depth: usize,
    leaves: Vec<AtomId>,
    leaf_index: Vec<Option<usize>>,
    leaf_span: Vec<Range<usize>>,
    levels: Vec<Vec<AtomId>>,
    split_order: Vec<AtomId>,
}

impl PartialEq for Filtration {
    fn eq(&self, other: &Self) -> bool {
        self.delta == other.delta && self.depth == other.depth && self.atoms == other.atoms
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    id: AtomId,
    a: f64,
    b: f64,
    level: usize,
    parent: Option<AtomId>,
    children: Vec<AtomId>,
}

#[derive(Serialize, Deserialize)]
struct FiltrationRecord {
    delta: f64,
    depth: usize,
    atoms: Vec<AtomRecord>,
}

impl Filtration {
    /// Validates an atom tree and precomputes the level structure.
    ///
    /// Atom ids must be `0..atoms.len()` with atom 0 the root at level 0.
    pub fn from_atoms(atoms: Vec<Atom>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        let bad = |msg: String| Err(Error::MalformedFiltration(msg));
        if atoms.is_empty() {
            return bad("no atoms".into());
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.id != i {
                return bad(format!("atom at position {i} has id {}", atom.id));
            }
            if !(atom.a < atom.b) || !atom.a.is_finite() || !atom.b.is_finite() {
                return bad(format!("atom {i} has an empty or non-finite interval"));
            }
        }
        let root = &atoms[0];
        if root.parent.is_some() || root.level != 0 {
            return bad("atom 0 must be the root at level 0".into());
        }
        let mut seen_as_child = vec![false; atoms.len()];
        for atom in &atoms {
            if atom.id != 0 {
                match atom.parent {
                    None => return bad(format!("atom {} has no parent", atom.id)),
                    Some(p) if p >= atoms.len() => return Err(Error::UnknownAtom(p)),
                    Some(p) if !atoms[p].children.contains(&atom.id) => {
                        return bad(format!("atom {} not listed by its parent", atom.id))
                    }
                    _ => {}
                }
            }
            if atom.children.len() == 1 {
                return bad(format!("atom {} has exactly one child", atom.id));
            }
            let mut prev_b = atom.a;
            let mut sum = 0.0;
            let mut child_level = None;
            for &c in &atom.children {
                let child = atoms.get(c).ok_or(Error::UnknownAtom(c))?;
                if seen_as_child[c] || child.parent != Some(atom.id) {
                    return bad(format!("atom {c} has inconsistent parentage"));
                }
                seen_as_child[c] = true;
                if child.a != prev_b {
                    return bad(format!("children of atom {} do not tile it", atom.id));
                }
                prev_b = child.b;
                sum += child.measure;
                if child.level <= atom.level {
                    return bad(format!("child {c} is not created after its parent"));
                }
                match child_level {
                    None => child_level = Some(child.level),
                    Some(l) if l != child.level => {
                        return bad(format!("children of atom {} span several levels", atom.id))
                    }
                    _ => {}
                }
                if child.measure / atom.measure < delta * (1.0 - RATIO_SLACK) {
                    return bad(format!(
                        "child {c} occupies {} of its parent, below delta {delta}",
                        child.measure / atom.measure
                    ));
                }
            }
            if atom.is_split() {
                if prev_b != atom.b {
                    return bad(format!("children of atom {} do not reach its end", atom.id));
                }
                if (sum - atom.measure).abs() > 1e-12 * atom.measure {
                    return bad(format!("children measures of atom {} do not add up", atom.id));
                }
            }
            if (atom.measure - (atom.b - atom.a)).abs() > 1e-12 * atom.measure.abs() {
                return bad(format!("atom {} measure differs from its length", atom.id));
            }
        }
        if seen_as_child.iter().skip(1).any(|s| !s) {
            return bad("some atom is unreachable from the root".into());
        }

        let depth = atoms.iter().map(|a| a.level).max().unwrap_or(0);
        if depth == 0 {
            return bad("a filtration needs at least one split".into());
        }

        let mut leaves: Vec<AtomId> = atoms.iter().filter(|a| !a.is_split()).map(|a| a.id).collect();
        leaves.sort_by(|&x, &y| atoms[x].a.total_cmp(&atoms[y].a));
        let mut leaf_index = vec![None; atoms.len()];
        for (i, &l) in leaves.iter().enumerate() {
            leaf_index[l] = Some(i);
        }
        let mut leaf_span = vec![0..0; atoms.len()];
        fill_spans(&atoms, 0, &leaf_index, &mut leaf_span);

        let levels = (0..=depth)
            .map(|n| {
                let mut level: Vec<AtomId> = atoms
                    .iter()
                    .filter(|a| a.level <= n && split_time_of(&atoms, a).map_or(true, |t| t >= n))
                    .map(|a| a.id)
                    .collect();
                level.sort_by(|&x, &y| atoms[x].a.total_cmp(&atoms[y].a));
                level
            })
            .collect();

        let mut split_order: Vec<AtomId> = atoms.iter().filter(|a| a.is_split()).map(|a| a.id).collect();
        split_order.sort_by(|&x, &y| {
            let tx = split_time_of(&atoms, &atoms[x]).unwrap();
            let ty = split_time_of(&atoms, &atoms[y]).unwrap();
            tx.cmp(&ty).then(atoms[x].a.total_cmp(&atoms[y].a))
        });

        Ok(Self { atoms, delta, depth, leaves, leaf_index, leaf_span, levels, split_order })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> Result<&Atom> {
        self.atoms.get(id).ok_or(Error::UnknownAtom(id))
    }

    pub fn root(&self) -> &Atom {
        &self.atoms[0]
    }

    /// Measure of the whole interval, `|I|`.
    pub fn total_measure(&self) -> f64 {
        self.atoms[0].measure
    }

    /// Leaves (the atoms of `F_N`) in left-to-right order.
    pub fn leaves(&self) -> &[AtomId] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_index(&self, id: AtomId) -> Option<usize> {
        self.leaf_index.get(id).copied().flatten()
    }

    /// Positions (in [`Self::leaves`]) of the leaves inside atom `id`.
    pub fn leaf_span(&self, id: AtomId) -> Range<usize> {
        self.leaf_span[id].clone()
    }

    pub fn leaf_measure(&self, leaf_pos: usize) -> f64 {
        self.atoms[self.leaves[leaf_pos]].measure
    }

    /// The atom set `A_n`, left to right.
    pub fn level(&self, n: usize) -> &[AtomId] {
        &self.levels[n.min(self.depth)]
    }

    /// The set `D` of atoms that are eventually split, in refiltration order.
    pub fn split_order(&self) -> &[AtomId] {
        &self.split_order
    }

    pub fn dyadic_set(&self) -> Vec<AtomId> {
        self.split_order.clone()
    }

    /// Time `n` at which the atom is split, i.e. it belongs to `A_n \ A_{n+1}`.
    pub fn split_time(&self, id: AtomId) -> Option<usize> {
        split_time_of(&self.atoms, &self.atoms[id])
    }

    /// The atom of `A_n` containing leaf position `leaf_pos`.
    pub fn ancestor_at_level(&self, leaf_pos: usize, n: usize) -> AtomId {
        let mut id = self.leaves[leaf_pos];
        while self.atoms[id].level > n {
            id = self.atoms[id].parent.expect("non-root atoms have parents");
        }
        id
    }

    /// Whether `ids` tiles the interval with atoms of this filtration.
    pub fn is_partition(&self, ids: &[AtomId]) -> bool {
        let mut at = self.root().a;
        for &id in ids {
            match self.atoms.get(id) {
                Some(atom) if atom.a == at => at = atom.b,
                _ => return false,
            }
        }
        !ids.is_empty() && at == self.root().b
    }

    /// The refiltration: one event per atom of `D`, ordered by split time and
    /// then by left endpoint.
    pub fn split_schedule(&self) -> Vec<SplitEvent> {
        let mut partition = vec![0];
        let mut events = Vec::with_capacity(self.split_order.len());
        for (order_index, &j) in self.split_order.iter().enumerate() {
            let pos = partition.iter().position(|&x| x == j).expect("split atoms appear in order");
            let mut post = Vec::with_capacity(partition.len() + self.atoms[j].children.len());
            post.extend_from_slice(&partition[..pos]);
            post.extend_from_slice(&self.atoms[j].children);
            post.extend_from_slice(&partition[pos + 1..]);
            events.push(SplitEvent {
                atom: j,
                order_index,
                prev_partition: std::mem::replace(&mut partition, post.clone()),
                post_partition: post,
            });
        }
        events
    }

    /// `delta*`: the smallest child-to-parent measure ratio.
    pub fn regularity_delta(&self) -> f64 {
        regularity_delta(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = FiltrationRecord {
            delta: self.delta,
            depth: self.depth,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    id: a.id,
                    a: a.a,
                    b: a.b,
                    level: a.level,
                    parent: a.parent,
                    children: a.children.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let record: FiltrationRecord = serde_json::from_str(s)?;
        let atoms = record
            .atoms
            .into_iter()
            .map(|r| Atom {
                id: r.id,
                a: r.a,
                b: r.b,
                measure: r.b - r.a,
                level: r.level,
                parent: r.parent,
                children: r.children,
            })
            .collect();
        let filtration = Self::from_atoms(atoms, record.delta)?;
        if filtration.depth != record.depth {
            return Err(Error::MalformedFiltration(format!(
                "declared depth {} but atoms reach level {}",
                record.depth, filtration.depth
            )));
        }
        Ok(filtration)
    }
}

fn split_time_of(atoms: &[Atom], atom: &Atom) -> Option<usize> {
    atom.children.first().map(|&c| atoms[c].level - 1)
}

fn fill_spans(atoms: &[Atom], id: AtomId, leaf_index: &[Option<usize>], spans: &mut [Range<usize>]) {
    let atom = &atoms[id];
    if let Some(i) = leaf_index[id] {
        spans[id] = i..i + 1;
        return;
    }
    for &c in &atom.children {
        fill_spans(atoms, c, leaf_index, spans);
    }
    let first = spans[atom.children[0]].start;
    let last = spans[*atom.children.last().unwrap()].end;
    spans[id] = first..last;
}

pub fn regularity_delta(f: &Filtration) -> f64 {
    f.atoms
        .iter()
        .filter(|a| a.is_split())
        .flat_map(|j| j.children.iter().map(move |&c| f.atoms[c].measure / j.measure))
        .fold(f64::INFINITY, f64::min)
}

struct TreeBuilder {
    atoms: Vec<Atom>,
}

impl TreeBuilder {
    fn new(a: f64, b: f64) -> Self {
        Self {
            atoms: vec![Atom { id: 0, a, b, measure: b - a, level: 0, parent: None, children: vec![] }],
        }
    }

    /// Splits `parent` at the interior cut points `cuts` (strictly increasing).
    fn split(&mut self, parent: AtomId, cuts: &[f64], level: usize) {
        let (a, b) = (self.atoms[parent].a, self.atoms[parent].b);
        let mut ends = Vec::with_capacity(cuts.len() + 2);
        ends.push(a);
        ends.extend_from_slice(cuts);
        ends.push(b);
        for w in ends.windows(2) {
            let id = self.atoms.len();
            self.atoms.push(Atom {
                id,
                a: w[0],
                b: w[1],
                measure: w[1] - w[0],
                level,
                parent: Some(parent),
                children: vec![],
            });
            self.atoms[parent].children.push(id);
        }
    }
}

/// Uniform binary splitting of `[0, 1)` down to `2^depth` leaves.
pub fn build_dyadic(depth: usize) -> Result<Filtration> {
    if depth == 0 || depth > MAX_DYADIC_DEPTH {
        return Err(Error::DepthOutOfRange { depth, max: MAX_DYADIC_DEPTH });
    }
    let mut tree = TreeBuilder::new(0.0, 1.0);
    let mut frontier = vec![0];
    for n in 1..=depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &j in &frontier {
            let mid = 0.5 * (tree.atoms[j].a + tree.atoms[j].b);
            tree.split(j, &[mid], n);
            next.extend_from_slice(&tree.atoms[j].children);
        }
        frontier = next;
    }
    Filtration::from_atoms(tree.atoms, 0.5)
}

/// Random regular filtration of `[0, 1)`.
///
/// At each level every current atom splits with probability `split_prob`
/// (at least one atom always splits) into `k ∈ [2, max_children]` children
/// whose measure ratios are `delta + (1 - k·delta)·Dirichlet(1, …, 1)`.
pub fn build_random_regular(
    depth: usize,
    delta: f64,
    max_children: usize,
    split_prob: f64,
    seed: u64,
) -> Result<Filtration> {
    if depth == 0 || depth > MAX_RANDOM_DEPTH {
        return Err(Error::DepthOutOfRange { depth, max: MAX_RANDOM_DEPTH });
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    if max_children < 2 || (max_children as f64) * delta > 1.0 + RATIO_SLACK {
        return Err(Error::Infeasible(format!(
            "max_children = {max_children} with delta = {delta} (need 2 <= max_children <= 1/delta)"
        )));
    }
    if !(split_prob > 0.0 && split_prob <= 1.0) {
        return Err(Error::Infeasible(format!("split_prob = {split_prob} outside (0, 1]")));
    }
    let mut rng = rng::master(seed);
    let mut tree = TreeBuilder::new(0.0, 1.0);
    let mut frontier = vec![0];
    for n in 1..=depth {
        let mut chosen: Vec<bool> = frontier.iter().map(|_| rng.random::<f64>() < split_prob).collect();
        if !chosen.iter().any(|&c| c) {
            let forced = rng.random_range(0..frontier.len());
            chosen[forced] = true;
        }
        let mut next = Vec::with_capacity(frontier.len() * max_children);
        for (&j, split) in frontier.iter().zip(chosen) {
            if !split {
                next.push(j);
                continue;
            }
            let k = rng.random_range(2..=max_children);
            let cuts = sample_cuts(&mut rng, tree.atoms[j].a, tree.atoms[j].b, k, delta)?;
            tree.split(j, &cuts, n);
            next.extend_from_slice(&tree.atoms[j].children);
        }
        frontier = next;
    }
    Filtration::from_atoms(tree.atoms, delta)
}

fn sample_cuts(rng: &mut rng::Rng, a: f64, b: f64, k: usize, delta: f64) -> Result<Vec<f64>> {
    let len = b - a;
    let free = (1.0 - k as f64 * delta).max(0.0);
    for _ in 0..REJECTION_BUDGET {
        let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let mut cuts = Vec::with_capacity(k - 1);
        let mut acc = 0.0;
        for d in &draws[..k - 1] {
            acc += delta + free * d / total;
            cuts.push(a + len * acc);
        }
        let mut prev = a;
        let ok = cuts.iter().chain(std::iter::once(&b)).all(|&c| {
            let ratio = (c - prev) / len;
            prev = c;
            ratio >= delta * (1.0 - RATIO_SLACK)
        });
        if ok {
            return Ok(cuts);
        }
    }
    Err(Error::RejectionBudget(REJECTION_BUDGET))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_split(ratios: &[f64]) -> Filtration {
        let mut tree = TreeBuilder::new(0.0, 1.0);
        let mut cuts = vec![];
        let mut acc = 0.0;
        for r in &ratios[..ratios.len() - 1] {
            acc += r;
            cuts.push(acc);
        }
        tree.split(0, &cuts, 1);
        let delta = ratios.iter().cloned().fold(0.5, f64::min);
        Filtration::from_atoms(tree.atoms, delta).unwrap()
    }

    #[test]
    fn dyadic_depth_one() {
        let f = build_dyadic(1).unwrap();
        let intervals: Vec<(f64, f64)> = f.atoms().iter().map(|a| (a.a, a.b)).collect();
        assert_eq!(intervals, vec![(0.0, 1.0), (0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(f.dyadic_set(), vec![0]);
        assert_eq!(f.delta(), 0.5);
    }

    #[test]
    fn dyadic_leaves_and_delta() {
        let f = build_dyadic(2).unwrap();
        assert_eq!(f.num_leaves(), 4);
        for &l in f.leaves() {
            assert_eq!(f.atoms()[l].measure, 0.25);
        }
        assert_eq!(build_dyadic(3).unwrap().regularity_delta(), 0.5);
        assert!(matches!(build_dyadic(0), Err(Error::DepthOutOfRange { .. })));
        assert!(matches!(build_dyadic(21), Err(Error::DepthOutOfRange { .. })));
    }

    #[test]
    fn regularity_of_single_splits() {
        assert!((single_split(&[0.3, 0.7]).regularity_delta() - 0.3).abs() < 1e-15);
        let third = 1.0 / 3.0;
        assert!((single_split(&[third, third, third]).regularity_delta() - third).abs() < 1e-15);
    }

    #[test]
    fn random_single_split_respects_delta() {
        let f = build_random_regular(1, 0.3, 2, 1.0, 7).unwrap();
        assert_eq!(f.dyadic_set(), vec![0]);
        let root = f.root();
        assert_eq!(root.children.len(), 2);
        for &c in &root.children {
            let r = f.atoms()[c].measure;
            assert!((0.3 - 1e-12..=0.7 + 1e-12).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn random_third_split() {
        for seed in 0..20 {
            let f = build_random_regular(2, 1.0 / 3.0, 3, 1.0, seed).unwrap();
            assert!(f.regularity_delta() >= 1.0 / 3.0 - 1e-12);
        }
    }

    #[test]
    fn random_regular_rechecked_by_brute_force() {
        let f = build_random_regular(4, 0.1, 4, 0.6, 1).unwrap();
        let mut min_ratio = f64::INFINITY;
        for j in f.atoms() {
            for &c in &j.children {
                let q = &f.atoms()[c];
                min_ratio = min_ratio.min((q.b - q.a) / (j.b - j.a));
            }
        }
        assert!(min_ratio >= 0.1 * (1.0 - 1e-12));
        assert!((f.regularity_delta() - min_ratio).abs() < 1e-15);
    }

    #[test]
    fn random_is_strictly_increasing_and_deterministic() {
        let f = build_random_regular(5, 0.25, 4, 0.2, 3).unwrap();
        for n in 0..f.depth() {
            assert!(f.level(n + 1).len() > f.level(n).len());
        }
        let g = build_random_regular(5, 0.25, 4, 0.2, 3).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn infeasible_parameters() {
        assert!(matches!(build_random_regular(2, 0.3, 4, 1.0, 0), Err(Error::Infeasible(_))));
        assert!(matches!(build_random_regular(13, 0.3, 2, 1.0, 0), Err(Error::DepthOutOfRange { .. })));
        assert!(matches!(build_random_regular(2, 0.7, 2, 1.0, 0), Err(Error::DeltaOutOfRange(_))));
    }

    #[test]
    fn schedule_order_dyadic() {
        let f = build_dyadic(2).unwrap();
        let events = f.split_schedule();
        let lefts: Vec<(f64, f64)> = events.iter().map(|e| (f.atoms()[e.atom].a, f.atoms()[e.atom].b)).collect();
        assert_eq!(lefts, vec![(0.0, 1.0), (0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(build_dyadic(1).unwrap().split_schedule().len(), 1);
    }

    #[test]
    fn schedule_chains_partitions() {
        let f = build_random_regular(3, 0.2, 4, 0.7, 11).unwrap();
        let events = f.split_schedule();
        assert_eq!(events.len(), f.dyadic_set().len());
        assert_eq!(events[0].prev_partition, vec![0]);
        for w in events.windows(2) {
            assert_eq!(w[0].post_partition, w[1].prev_partition);
        }
        let mut last = events.last().unwrap().post_partition.clone();
        last.sort();
        let mut leaves = f.leaves().to_vec();
        leaves.sort();
        assert_eq!(last, leaves);
        for e in &events {
            assert!(f.is_partition(&e.prev_partition) && f.is_partition(&e.post_partition));
            let removed: Vec<_> = e.prev_partition.iter().filter(|x| !e.post_partition.contains(x)).collect();
            assert_eq!(removed, vec![&e.atom]);
        }
    }

    #[test]
    fn levels_refine_and_never_split_atoms_persist() {
        let f = build_random_regular(4, 0.25, 3, 0.5, 5).unwrap();
        assert_eq!(f.level(0), &[0]);
        assert_eq!(f.level(f.depth()).len(), f.num_leaves());
        let persistent = f.leaves().iter().any(|&l| f.atoms()[l].level < f.depth());
        assert!(persistent, "split_prob 0.5 should leave some early leaves");
        for n in 1..=f.depth() {
            for &q in f.level(n) {
                let parent_level = f.level(n - 1);
                let anc = parent_level.iter().find(|&&j| f.atoms()[j].contains(&f.atoms()[q]));
                assert!(anc.is_some());
            }
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let f = build_random_regular(4, 0.1, 5, 0.8, 42).unwrap();
        let s = f.to_json().unwrap();
        let g = Filtration::from_json(&s).unwrap();
        assert_eq!(f, g);
        for (x, y) in f.atoms().iter().zip(g.atoms()) {
            assert_eq!(x.a.to_bits(), y.a.to_bits());
            assert_eq!(x.b.to_bits(), y.b.to_bits());
        }
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let f = build_dyadic(1).unwrap();
        let mut atoms = f.atoms().to_vec();
        atoms[2].a = 0.6;
        atoms[2].measure = 0.4;
        assert!(Filtration::from_atoms(atoms, 0.4).is_err());
        let mut atoms = f.atoms().to_vec();
        atoms[0].children.pop();
        assert!(Filtration::from_atoms(atoms, 0.5).is_err());
        let atoms = f.atoms().to_vec();
        assert!(matches!(Filtration::from_atoms(atoms, 0.0), Err(Error::DeltaOutOfRange(_))));
    }

    #[test]
    fn partition_membership() {
        let f = build_dyadic(2).unwrap();
        assert!(f.is_partition(f.level(1)));
        assert!(!f.is_partition(&[1]));
        assert!(!f.is_partition(&[1, 1]));
        assert!(!f.is_partition(&[99]));
    }
}
