//! Leaf-constant `H`-valued functions on a filtration, with `H = R^d`.
//!
//! A simple martingale stabilises at the last level, so it is identified with
//! its limit: a function constant on every leaf. Scalar functions are the
//! `d = 1` case.

use std::ops::{Add, Index, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{AtomId, Filtration, SplitEvent};

/// A vector of the finite-dimensional Hilbert space `H = R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HVec(pub Vec<f64>);

impl HVec {
    pub fn zeros(dim: usize) -> Self {
        HVec(vec![0.0; dim])
    }

    pub fn scalar(x: f64) -> Self {
        HVec(vec![x])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        HVec(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &HVec) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scale(&self, c: f64) -> HVec {
        HVec(self.0.iter().map(|x| c * x).collect())
    }

    pub fn dist(&self, other: &HVec) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl Index<usize> for HVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &HVec {
    type Output = HVec;
    fn add(self, rhs: &HVec) -> HVec {
        HVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &HVec {
    type Output = HVec;
    fn sub(self, rhs: &HVec) -> HVec {
        HVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// An `H`-valued function constant on the leaves of a filtration.
///
/// Values are stored leaf-major in left-to-right leaf order.
#[derive(Clone, Debug)]
pub struct MartFunction {
    filtration: Arc<Filtration>,
    dim: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LeafValue {
    atom_id: AtomId,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FunctionRecord {
    dim: usize,
    values: Vec<LeafValue>,
}

impl MartFunction {
    pub fn zeros(filtration: &Arc<Filtration>, dim: usize) -> Self {
        Self { filtration: filtration.clone(), dim, values: vec![0.0; dim * filtration.num_leaves()] }
    }

    pub fn constant(filtration: &Arc<Filtration>, c: &HVec) -> Self {
        let values = (0..filtration.num_leaves()).flat_map(|_| c.0.iter().copied()).collect();
        Self { filtration: filtration.clone(), dim: c.dim(), values }
    }

    /// Builds a function from flat leaf-major values.
    pub fn from_flat(filtration: &Arc<Filtration>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * filtration.num_leaves() {
            return Err(Error::DimensionMismatch {
                expected: dim * filtration.num_leaves(),
                got: values.len(),
            });
        }
        Ok(Self { filtration: filtration.clone(), dim, values })
    }

    pub fn scalar(filtration: &Arc<Filtration>, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(filtration, 1, values)
    }

    pub fn from_leaf_fn(filtration: &Arc<Filtration>, dim: usize, mut f: impl FnMut(usize) -> HVec) -> Self {
        let mut values = Vec::with_capacity(dim * filtration.num_leaves());
        for i in 0..filtration.num_leaves() {
            let v = f(i);
            assert_eq!(v.dim(), dim, "leaf function returned a vector of the wrong dimension");
            values.extend_from_slice(&v.0);
        }
        Self { filtration: filtration.clone(), dim, values }
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    /// Value on the leaf at position `i`.
    pub fn leaf(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn same_filtration(&self, other: &MartFunction) -> bool {
        same_filtration(&self.filtration, &other.filtration)
    }

    pub(crate) fn check_compatible(&self, other: &MartFunction) -> Result<()> {
        if !self.same_filtration(other) {
            return Err(Error::FiltrationMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    /// `<f>_J`, the measure-weighted mean over the leaves inside `J`.
    pub fn average(&self, j: AtomId) -> HVec {
        HVec(self.average_raw(j))
    }

    fn average_raw(&self, j: AtomId) -> Vec<f64> {
        let span = self.filtration.leaf_span(j);
        if span.len() == 1 {
            return self.leaf(span.start).to_vec();
        }
        let mut acc = vec![0.0; self.dim];
        let mut mass = 0.0;
        for i in span {
            let w = self.filtration.leaf_measure(i);
            mass += w;
            for (a, v) in acc.iter_mut().zip(self.leaf(i)) {
                *a += w * v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= mass);
        acc
    }

    /// Conditional expectation onto the algebra generated by `partition`.
    pub fn cond_exp(&self, partition: &[AtomId]) -> Result<MartFunction> {
        if !self.filtration.is_partition(partition) {
            return Err(Error::ForeignPartition);
        }
        let mut out = self.clone();
        for &j in partition {
            let mean = self.average_raw(j);
            for i in self.filtration.leaf_span(j) {
                out.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(&mean);
            }
        }
        Ok(out)
    }

    /// `E_n f`.
    pub fn cond_exp_level(&self, n: usize) -> MartFunction {
        let partition = self.filtration.level(n).to_vec();
        self.cond_exp(&partition).expect("levels are partitions")
    }

    /// `Δ_n f = E_n f - E_{n-1} f` for `n >= 1`.
    pub fn level_difference(&self, n: usize) -> MartFunction {
        &self.cond_exp_level(n) - &self.cond_exp_level(n - 1)
    }

    /// `Δ_J f = E[f | F_J] - E[f | F_J^prev]`, supported on `J`.
    pub fn delta_split(&self, event: &SplitEvent) -> MartFunction {
        self.delta_atom(event.atom)
    }

    /// [`Self::delta_split`] addressed by the split atom alone: on each child
    /// `Q` of `J` the value is `<f>_Q - <f>_J`, zero off `J`.
    pub fn delta_atom(&self, j: AtomId) -> MartFunction {
        let mut out = MartFunction::zeros(&self.filtration, self.dim);
        let atom = &self.filtration.atoms()[j];
        if atom.children.is_empty() {
            return out;
        }
        let parent_mean = self.average_raw(j);
        for &q in &atom.children {
            let diff: Vec<f64> = self.average_raw(q).iter().zip(&parent_mean).map(|(a, b)| a - b).collect();
            for i in self.filtration.leaf_span(q) {
                out.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(&diff);
            }
        }
        out
    }

    /// `osc_J^2(f) = <|f - <f>_J|^2>_J`.
    pub fn osc2(&self, j: AtomId) -> f64 {
        let mean = self.average_raw(j);
        let span = self.filtration.leaf_span(j);
        if span.len() == 1 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut mass = 0.0;
        for i in span {
            let w = self.filtration.leaf_measure(i);
            mass += w;
            acc += w * self.leaf(i).iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
        }
        acc / mass
    }

    /// The second form `<|f|^2>_J - |<f>_J|^2` of the oscillation.
    pub fn osc2_moment_form(&self, j: AtomId) -> f64 {
        let mean = self.average_raw(j);
        self.power_mean(j, 2.0) - dot(&mean, &mean)
    }

    /// `<|f|^p>_J`.
    pub fn power_mean(&self, j: AtomId, p: f64) -> f64 {
        let span = self.filtration.leaf_span(j);
        if span.len() == 1 {
            return pow_norm(self.leaf(span.start), p);
        }
        let mut acc = 0.0;
        let mut mass = 0.0;
        for i in span {
            let w = self.filtration.leaf_measure(i);
            mass += w;
            acc += w * pow_norm(self.leaf(i), p);
        }
        acc / mass
    }

    /// `(Σ_leaves |Q|·|f_Q|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = (0..self.filtration.num_leaves())
            .map(|i| self.filtration.leaf_measure(i) * pow_norm(self.leaf(i), p))
            .sum();
        s.powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).expect("self-compatible").max(0.0).sqrt()
    }

    /// `∫_I f·g` with the leaf measures as weights.
    pub fn inner(&self, other: &MartFunction) -> Result<f64> {
        self.check_compatible(other)?;
        Ok((0..self.filtration.num_leaves())
            .map(|i| self.filtration.leaf_measure(i) * dot(self.leaf(i), other.leaf(i)))
            .sum())
    }

    /// `‖f·1_{I∖J}‖_2`.
    pub fn l2_norm_outside(&self, j: AtomId) -> f64 {
        let span = self.filtration.leaf_span(j);
        (0..self.filtration.num_leaves())
            .filter(|i| !span.contains(i))
            .map(|i| self.filtration.leaf_measure(i) * dot(self.leaf(i), self.leaf(i)))
            .sum::<f64>()
            .sqrt()
    }

    /// `f·1_J`.
    pub fn restrict(&self, j: AtomId) -> MartFunction {
        let span = self.filtration.leaf_span(j);
        let mut out = MartFunction::zeros(&self.filtration, self.dim);
        for i in span {
            out.values[i * self.dim..(i + 1) * self.dim].copy_from_slice(self.leaf(i));
        }
        out
    }

    pub fn scale(&self, c: f64) -> MartFunction {
        MartFunction { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// Pointwise `f·v` for a fixed vector, giving a scalar function.
    pub fn dot_vec(&self, v: &HVec) -> MartFunction {
        let values = (0..self.filtration.num_leaves()).map(|i| dot(self.leaf(i), &v.0)).collect();
        MartFunction { filtration: self.filtration.clone(), dim: 1, values }
    }

    /// Scalar `g` times a fixed vector, giving an `H`-valued function.
    pub fn times_vec(&self, v: &HVec) -> MartFunction {
        assert_eq!(self.dim, 1, "times_vec expects a scalar function");
        let values = self.values.iter().flat_map(|g| v.0.iter().map(move |c| g * c)).collect();
        MartFunction { filtration: self.filtration.clone(), dim: v.dim(), values }
    }

    pub fn max_abs_diff(&self, other: &MartFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.filtration.num_leaves()).map(|i| norm(self.leaf(i))).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = FunctionRecord {
            dim: self.dim,
            values: self
                .filtration
                .leaves()
                .iter()
                .enumerate()
                .map(|(i, &atom_id)| LeafValue { atom_id, coords: self.leaf(i).to_vec() })
                .collect(),
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_json(filtration: &Arc<Filtration>, s: &str) -> Result<Self> {
        let record: FunctionRecord = serde_json::from_str(s)?;
        let mut values = vec![f64::NAN; record.dim * filtration.num_leaves()];
        for lv in record.values {
            let i = filtration.leaf_index(lv.atom_id).ok_or(Error::UnknownAtom(lv.atom_id))?;
            if lv.coords.len() != record.dim {
                return Err(Error::DimensionMismatch { expected: record.dim, got: lv.coords.len() });
            }
            values[i * record.dim..(i + 1) * record.dim].copy_from_slice(&lv.coords);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::MalformedFiltration("function not defined on every leaf".into()));
        }
        Self::from_flat(filtration, record.dim, values)
    }
}

fn pow_norm(v: &[f64], p: f64) -> f64 {
    let n2 = dot(v, v);
    if p == 2.0 {
        n2
    } else {
        n2.sqrt().powf(p)
    }
}

pub(crate) fn same_filtration(a: &Arc<Filtration>, b: &Arc<Filtration>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Add for &MartFunction {
    type Output = MartFunction;
    fn add(self, rhs: &MartFunction) -> MartFunction {
        self.check_compatible(rhs).expect("incompatible functions");
        MartFunction {
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }
}

impl Sub for &MartFunction {
    type Output = MartFunction;
    fn sub(self, rhs: &MartFunction) -> MartFunction {
        self.check_compatible(rhs).expect("incompatible functions");
        MartFunction {
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{build_dyadic, build_random_regular};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn haar() -> MartFunction {
        let f = Arc::new(build_dyadic(1).unwrap());
        MartFunction::scalar(&f, vec![1.0, -1.0]).unwrap()
    }

    fn random_fn(filt: &Arc<Filtration>, dim: usize, seed: u64) -> MartFunction {
        let mut rng = crate::rng::master(seed);
        let values = (0..dim * filt.num_leaves()).map(|_| rng.random_range(-2.0..2.0)).collect();
        MartFunction::from_flat(filt, dim, values).unwrap()
    }

    #[test]
    fn cond_exp_examples() {
        let filt = Arc::new(build_dyadic(1).unwrap());
        let f = MartFunction::scalar(&filt, vec![2.0, 4.0]).unwrap();
        assert_eq!(f.cond_exp(&[0]).unwrap().flat(), &[3.0, 3.0]);
        assert_eq!(f.cond_exp_level(1).flat(), f.flat());
        assert!(matches!(f.cond_exp(&[1]), Err(Error::ForeignPartition)));
    }

    #[test]
    fn cond_exp_at_root_is_the_mean() {
        let filt = Arc::new(build_random_regular(3, 0.2, 4, 0.8, 9).unwrap());
        let f = random_fn(&filt, 2, 1);
        let e0 = f.cond_exp_level(0);
        let mean = f.average(0);
        for i in 0..filt.num_leaves() {
            assert!((e0.leaf(i)[0] - mean[0]).abs() < 1e-15);
            assert!((e0.leaf(i)[1] - mean[1]).abs() < 1e-15);
        }
        let twice = e0.cond_exp_level(0);
        assert!(twice.max_abs_diff(&e0) < 1e-15);
    }

    #[test]
    fn delta_split_examples() {
        let h = haar();
        let event = &h.filtration().split_schedule()[0];
        assert_eq!(h.delta_split(event).flat(), h.flat());
        let c = MartFunction::constant(h.filtration(), &HVec::scalar(5.0));
        assert_eq!(c.delta_split(event).flat(), &[0.0, 0.0]);
    }

    #[test]
    fn delta_split_matches_partition_definition() {
        let filt = Arc::new(build_random_regular(4, 0.25, 4, 0.7, 4).unwrap());
        let f = random_fn(&filt, 3, 2);
        for e in filt.split_schedule() {
            let direct = &f.cond_exp(&e.post_partition).unwrap() - &f.cond_exp(&e.prev_partition).unwrap();
            let fast = f.delta_split(&e);
            assert!(fast.max_abs_diff(&direct) < 1e-13);
            assert!(fast.l2_norm_outside(e.atom) == 0.0);
            assert!(fast.average(e.atom).norm() < 1e-12);
        }
    }

    #[test]
    fn average_examples() {
        let filt = Arc::new(build_dyadic(1).unwrap());
        assert_eq!(MartFunction::constant(&filt, &HVec(vec![1.5, -2.0])).average(0).0, vec![1.5, -2.0]);
        assert_eq!(haar().average(0).0, vec![0.0]);
        assert_eq!(MartFunction::scalar(&filt, vec![2.0, 4.0]).unwrap().average(0).0, vec![3.0]);
    }

    #[test]
    fn osc2_examples() {
        let filt = Arc::new(build_dyadic(1).unwrap());
        assert_eq!(MartFunction::constant(&filt, &HVec::scalar(3.0)).osc2(0), 0.0);
        assert_eq!(haar().osc2(0), 1.0);
        // ((1,0), (0,1)): mean (1/2, 1/2), each leaf at squared distance 1/2.
        let f = MartFunction::from_flat(&filt, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((f.osc2(0) - 0.5).abs() < 1e-15);
        assert!((f.osc2_moment_form(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lp_norm_examples() {
        for p in [1.0, 1.5, 2.0, 3.7] {
            assert!((haar().lp_norm(p) - 1.0).abs() < 1e-15);
        }
        let filt = Arc::new(build_dyadic(3).unwrap());
        let c = MartFunction::constant(&filt, &HVec::scalar(-2.5));
        assert!((c.lp_norm(1.3) - 2.5).abs() < 1e-14);
        let f = MartFunction::scalar(&Arc::new(build_dyadic(1).unwrap()), vec![2.0, 4.0]).unwrap();
        assert!((f.lp_norm(2.0) - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let filt = Arc::new(build_random_regular(3, 0.25, 3, 0.9, 8).unwrap());
        let f = random_fn(&filt, 2, 3);
        let g = MartFunction::from_json(&filt, &f.to_json().unwrap()).unwrap();
        assert_eq!(f.flat(), g.flat());
    }

    #[test]
    fn mismatches_are_errors() {
        let a = Arc::new(build_dyadic(2).unwrap());
        let b = Arc::new(build_dyadic(3).unwrap());
        let f = MartFunction::zeros(&a, 1);
        assert!(matches!(f.inner(&MartFunction::zeros(&b, 1)), Err(Error::FiltrationMismatch)));
        assert!(matches!(f.inner(&MartFunction::zeros(&a, 2)), Err(Error::DimensionMismatch { .. })));
        assert!(MartFunction::from_flat(&a, 2, vec![0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn telescoping_and_osc_forms(seed in 0u64..500, dim in 1usize..4, depth in 1usize..5) {
            let filt = Arc::new(build_random_regular(depth, 0.2, 4, 0.7, seed).unwrap());
            let f = random_fn(&filt, dim, seed ^ 0xabc);
            let mut sum = MartFunction::zeros(&filt, dim);
            for e in filt.split_schedule() {
                sum = &sum + &f.delta_split(&e);
            }
            let centred = &f - &f.cond_exp_level(0);
            prop_assert!(sum.max_abs_diff(&centred) <= 1e-10);
            for atom in filt.atoms() {
                let a = f.osc2(atom.id);
                let b = f.osc2_moment_form(atom.id);
                prop_assert!(a >= 0.0);
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
            }
        }
    }
}
