//! Martingale transforms `Tf = Σ_n a_n·Δ_n f` with predictable `H`-valued
//! multipliers `|a_n| <= 1`, the canonical members of the Gundy class.
//!
//! Each operator carries two representations: the multiplier sequence and a
//! dense matrix from leaf-valued `H` functions to leaf-valued scalars. The
//! matrix backs `apply`/`adjoint_apply`; the multipliers give closed forms
//! that are cross-checked against it.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{AtomId, Filtration};
use crate::martingale::{same_filtration, HVec, MartFunction};
use crate::rng::Rng;
use crate::tol;

/// Largest materialized matrix, in entries.
pub const MAX_MATRIX_ENTRIES: usize = 1 << 26;

/// Multiplier `a_n` given on atoms. Listed atoms must be disjoint; uncovered
/// leaves get zero. The result must be constant on each atom of `A_{n-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub level: usize,
    pub values: Vec<AtomValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomValue {
    pub atom_id: AtomId,
    pub coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct OperatorRecord {
    multipliers: Vec<Multiplier>,
}

#[derive(Clone, Debug)]
pub struct GundyOperator {
    filtration: Arc<Filtration>,
    dim: usize,
    /// `by_level[n - 1][k]` is `a_n` on the `k`-th atom of `A_{n-1}`.
    by_level: Vec<Vec<HVec>>,
    /// Multiplier acting on `Δ_J` for each split atom `J` (indexed by atom id).
    on_split: Vec<Option<HVec>>,
    matrix: DMatrix<f64>,
}

impl GundyOperator {
    pub fn make_transform(filtration: &Arc<Filtration>, dim: usize, multipliers: &[Multiplier]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let depth = filtration.depth();
        let leaves = filtration.num_leaves();
        let mut by_level: Vec<Vec<HVec>> =
            (1..=depth).map(|n| vec![HVec::zeros(dim); filtration.level(n - 1).len()]).collect();
        let mut seen_levels = vec![false; depth + 1];
        for m in multipliers {
            if m.level == 0 || m.level > depth {
                return Err(Error::MultiplierLevel(m.level));
            }
            if seen_levels[m.level] {
                return Err(Error::NotPredictable { level: m.level, atom: 0 });
            }
            seen_levels[m.level] = true;
            // Expand to leaves, then read back one value per atom of A_{n-1}.
            let mut leaf_vals: Vec<Option<&[f64]>> = vec![None; leaves];
            for av in &m.values {
                filtration.atom(av.atom_id)?;
                if av.coords.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: av.coords.len() });
                }
                for i in filtration.leaf_span(av.atom_id) {
                    if leaf_vals[i].is_some() {
                        return Err(Error::NotPredictable { level: m.level, atom: av.atom_id });
                    }
                    leaf_vals[i] = Some(&av.coords);
                }
            }
            let zero = vec![0.0; dim];
            for (k, &j) in filtration.level(m.level - 1).iter().enumerate() {
                let span = filtration.leaf_span(j);
                let first = leaf_vals[span.start].unwrap_or(&zero);
                if span.clone().any(|i| leaf_vals[i].unwrap_or(&zero) != first) {
                    return Err(Error::NotPredictable { level: m.level, atom: j });
                }
                let v = HVec(first.to_vec());
                let norm = v.norm();
                if norm > 1.0 + 1e-12 {
                    return Err(Error::MultiplierTooLarge { level: m.level, atom: j, norm });
                }
                by_level[m.level - 1][k] = v;
            }
        }
        Self::from_levels(filtration, dim, by_level)
    }

    fn from_levels(filtration: &Arc<Filtration>, dim: usize, by_level: Vec<Vec<HVec>>) -> Result<Self> {
        let leaves = filtration.num_leaves();
        let entries = leaves * leaves * dim;
        if entries > MAX_MATRIX_ENTRIES {
            return Err(Error::TooLarge(entries));
        }
        let mut on_split = vec![None; filtration.atoms().len()];
        for &j in filtration.split_order() {
            let n = filtration.split_time(j).expect("split atoms have a split time") + 1;
            let k = filtration.level(n - 1).iter().position(|&x| x == j).expect("J is in A_{n-1}");
            on_split[j] = Some(by_level[n - 1][k].clone());
        }

        // Tf on leaf i: Σ_J a(J)·(<f>_Q - <f>_J) for the child Q of J containing i.
        let mut matrix = DMatrix::zeros(leaves, leaves * dim);
        for &j in filtration.split_order() {
            let a = on_split[j].as_ref().unwrap();
            if a.norm() == 0.0 {
                continue;
            }
            let span_j = filtration.leaf_span(j);
            let mass_j: f64 = span_j.clone().map(|i| filtration.leaf_measure(i)).sum();
            for &q in &filtration.atoms()[j].children {
                let span_q = filtration.leaf_span(q);
                let mass_q: f64 = span_q.clone().map(|i| filtration.leaf_measure(i)).sum();
                for row in span_q.clone() {
                    for col in span_q.clone() {
                        let w = filtration.leaf_measure(col) / mass_q;
                        for c in 0..dim {
                            matrix[(row, col * dim + c)] += a[c] * w;
                        }
                    }
                    for col in span_j.clone() {
                        let w = filtration.leaf_measure(col) / mass_j;
                        for c in 0..dim {
                            matrix[(row, col * dim + c)] -= a[c] * w;
                        }
                    }
                }
            }
        }
        let op = Self { filtration: filtration.clone(), dim, by_level, on_split, matrix };
        let norm = op.operator_norm();
        if norm > 1.0 + tol::NORM {
            return Err(Error::NormCheck(norm));
        }
        Ok(op)
    }

    pub fn zero(filtration: &Arc<Filtration>, dim: usize) -> Result<Self> {
        Self::make_transform(filtration, dim, &[])
    }

    /// `a_n ≡ v` for every level.
    pub fn constant(filtration: &Arc<Filtration>, v: &HVec) -> Result<Self> {
        let by_level = (1..=filtration.depth()).map(|n| vec![v.clone(); filtration.level(n - 1).len()]).collect();
        if v.norm() > 1.0 + 1e-12 {
            return Err(Error::MultiplierTooLarge { level: 1, atom: 0, norm: v.norm() });
        }
        Self::from_levels(filtration, v.dim(), by_level)
    }

    /// Random predictable multipliers. A quarter of the atoms get a signed
    /// coordinate axis (Burkholder-type `±1` transforms), a quarter a random
    /// unit vector, the rest a random vector inside the unit ball.
    pub fn random(filtration: &Arc<Filtration>, dim: usize, rng: &mut Rng) -> Result<Self> {
        let by_level = (1..=filtration.depth())
            .map(|n| filtration.level(n - 1).iter().map(|_| random_multiplier(dim, rng)).collect())
            .collect();
        Self::from_levels(filtration, dim, by_level)
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The multiplier that multiplies `Δ_J` for split atom `J`.
    pub fn multiplier_on(&self, j: AtomId) -> Option<&HVec> {
        self.on_split.get(j).and_then(|m| m.as_ref())
    }

    pub fn multipliers(&self) -> Vec<Multiplier> {
        self.by_level
            .iter()
            .enumerate()
            .map(|(k, vals)| Multiplier {
                level: k + 1,
                values: self
                    .filtration
                    .level(k)
                    .iter()
                    .zip(vals)
                    .map(|(&atom_id, v)| AtomValue { atom_id, coords: v.0.clone() })
                    .collect(),
            })
            .collect()
    }

    fn check_input(&self, f: &MartFunction, dim: usize) -> Result<()> {
        if !same_filtration(&self.filtration, f.filtration()) {
            return Err(Error::FiltrationMismatch);
        }
        if f.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
        }
        Ok(())
    }

    /// `Tf` through the materialized matrix.
    pub fn apply(&self, f: &MartFunction) -> Result<MartFunction> {
        self.check_input(f, self.dim)?;
        let out = &self.matrix * DVector::from_column_slice(f.flat());
        MartFunction::scalar(&self.filtration, out.as_slice().to_vec())
    }

    /// `Tf = Σ_n a_n·Δ_n f` evaluated level by level.
    pub fn apply_multipliers(&self, f: &MartFunction) -> Result<MartFunction> {
        self.check_input(f, self.dim)?;
        let filt = &self.filtration;
        let mut out = vec![0.0; filt.num_leaves()];
        for n in 1..=filt.depth() {
            let diff = f.level_difference(n);
            for (i, o) in out.iter_mut().enumerate() {
                let a = &self.by_level[n - 1][self.level_slot(i, n - 1)];
                *o += crate::martingale::dot(&a.0, diff.leaf(i));
            }
        }
        MartFunction::scalar(filt, out)
    }

    fn level_slot(&self, leaf_pos: usize, n: usize) -> usize {
        let atom = self.filtration.ancestor_at_level(leaf_pos, n);
        let level = self.filtration.level(n);
        level.iter().position(|&x| x == atom).expect("ancestor lies in A_n")
    }

    /// `T*g` through the weighted transpose `W_in^{-1} Mᵀ W_out`.
    pub fn adjoint_apply(&self, g: &MartFunction) -> Result<MartFunction> {
        self.check_input(g, 1)?;
        let filt = &self.filtration;
        let weighted: Vec<f64> = (0..filt.num_leaves()).map(|i| filt.leaf_measure(i) * g.leaf(i)[0]).collect();
        let mut out = self.matrix.tr_mul(&DVector::from_vec(weighted));
        for j in 0..filt.num_leaves() {
            let w = filt.leaf_measure(j);
            for c in 0..self.dim {
                out[j * self.dim + c] /= w;
            }
        }
        MartFunction::from_flat(filt, self.dim, out.as_slice().to_vec())
    }

    /// `T*g = Σ_n a_n·D_n g`, with `D_n` the scalar level difference.
    pub fn adjoint_closed_form(&self, g: &MartFunction) -> Result<MartFunction> {
        self.check_input(g, 1)?;
        let filt = &self.filtration;
        let mut out = MartFunction::zeros(filt, self.dim);
        for n in 1..=filt.depth() {
            let diff = g.level_difference(n);
            let mut term = vec![0.0; filt.num_leaves() * self.dim];
            for i in 0..filt.num_leaves() {
                let a = &self.by_level[n - 1][self.level_slot(i, n - 1)];
                for c in 0..self.dim {
                    term[i * self.dim + c] = a[c] * diff.leaf(i)[0];
                }
            }
            out = &out + &MartFunction::from_flat(filt, self.dim, term)?;
        }
        Ok(out)
    }

    /// Largest singular value of `W_out^{1/2} M W_in^{-1/2}`: the norm of `T`
    /// between the measure-weighted `L^2` spaces.
    pub fn operator_norm(&self) -> f64 {
        let filt = &self.filtration;
        let mut a = self.matrix.clone();
        for i in 0..filt.num_leaves() {
            let row_w = filt.leaf_measure(i).sqrt();
            for j in 0..filt.num_leaves() {
                let s = row_w / filt.leaf_measure(j).sqrt();
                for c in 0..self.dim {
                    a[(i, j * self.dim + c)] *= s;
                }
            }
        }
        let gram = &a * a.transpose();
        gram.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&OperatorRecord { multipliers: self.multipliers() })?)
    }

    /// Loads multipliers and rebuilds the matrix.
    pub fn from_json(filtration: &Arc<Filtration>, dim: usize, s: &str) -> Result<Self> {
        let record: OperatorRecord = serde_json::from_str(s)?;
        Self::make_transform(filtration, dim, &record.multipliers)
    }
}

fn random_multiplier(dim: usize, rng: &mut Rng) -> HVec {
    let kind = rng.random_range(0..4);
    if kind == 0 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return HVec::unit(dim, rng.random_range(0..dim)).scale(sign);
    }
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = crate::martingale::norm(&v);
    let radius = if kind == 1 { 1.0 } else { rng.random::<f64>() };
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= radius / n);
    }
    HVec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{build_dyadic, build_random_regular};
    use crate::rng;

    fn depth1() -> Arc<Filtration> {
        Arc::new(build_dyadic(1).unwrap())
    }

    fn random_fn(filt: &Arc<Filtration>, dim: usize, rng: &mut Rng) -> MartFunction {
        let values = (0..dim * filt.num_leaves()).map(|_| StandardNormal.sample(rng)).collect();
        MartFunction::from_flat(filt, dim, values).unwrap()
    }

    #[test]
    fn zero_operator() {
        let filt = Arc::new(build_dyadic(3).unwrap());
        let t = GundyOperator::zero(&filt, 2).unwrap();
        assert_eq!(t.operator_norm(), 0.0);
        let f = random_fn(&filt, 2, &mut rng::master(1));
        assert!(t.apply(&f).unwrap().flat().iter().all(|&x| x == 0.0));
        let g = MartFunction::zeros(&filt, 1);
        assert!(t.adjoint_apply(&g).unwrap().flat().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_multiplier_telescopes() {
        let filt = Arc::new(build_random_regular(4, 0.25, 3, 0.8, 2).unwrap());
        let t = GundyOperator::constant(&filt, &HVec::scalar(1.0)).unwrap();
        let f = random_fn(&filt, 1, &mut rng::master(5));
        let expected = &f.cond_exp_level(filt.depth()) - &f.cond_exp_level(0);
        assert!(t.apply(&f).unwrap().max_abs_diff(&expected) < 1e-12);
        assert!(t.apply_multipliers(&f).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn haar_is_fixed_and_norm_is_one() {
        let filt = depth1();
        let t = GundyOperator::constant(&filt, &HVec::scalar(1.0)).unwrap();
        let haar = MartFunction::scalar(&filt, vec![1.0, -1.0]).unwrap();
        assert_eq!(t.apply(&haar).unwrap().flat(), &[1.0, -1.0]);
        // The weighted 2x2 matrix is [[1/2, -1/2], [-1/2, 1/2]]: singular values 1 and 0.
        assert!((t.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjoint_on_two_leaves() {
        let filt = depth1();
        let t = GundyOperator::constant(&filt, &HVec::scalar(1.0)).unwrap();
        let g = MartFunction::scalar(&filt, vec![3.0, 0.5]).unwrap();
        // From <g, Tf> = <T*g, f> on the two-leaf space: T*g = g - <g>_I.
        let expected = [3.0 - 1.75, 0.5 - 1.75];
        let got = t.adjoint_apply(&g).unwrap();
        for (a, b) in got.flat().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn representations_agree_on_random_instances() {
        for seed in 0..30 {
            let mut r = rng::master(seed);
            let dim = 1 + (seed as usize % 3);
            let filt = Arc::new(build_random_regular(3, 0.2, 4, 0.7, seed).unwrap());
            let t = GundyOperator::random(&filt, dim, &mut r).unwrap();
            let f = random_fn(&filt, dim, &mut r);
            let g = random_fn(&filt, 1, &mut r);
            let tf = t.apply(&f).unwrap();
            assert!(tf.max_abs_diff(&t.apply_multipliers(&f).unwrap()) < 1e-10);
            let ts = t.adjoint_apply(&g).unwrap();
            assert!(ts.max_abs_diff(&t.adjoint_closed_form(&g).unwrap()) < 1e-10);
            let lhs = g.inner(&tf).unwrap();
            let rhs = ts.inner(&f).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * f.l2_norm() * g.l2_norm());
            assert!(tf.l2_norm() <= f.l2_norm() + 1e-9);
        }
    }

    #[test]
    fn norm_bounded_over_seeds() {
        for seed in 0..100 {
            let mut r = rng::master(1000 + seed);
            let filt = Arc::new(build_random_regular(3, 0.25, 4, 0.8, seed).unwrap());
            let t = GundyOperator::random(&filt, 1 + (seed as usize % 3), &mut r).unwrap();
            assert!(t.operator_norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn multiplier_validation() {
        let filt = Arc::new(build_dyadic(2).unwrap());
        // Level 2 multipliers must be constant on the atoms of A_1; a leaf-level
        // assignment that differs inside [0, 1/2) is not predictable.
        let leaves = filt.leaves().to_vec();
        let bad = Multiplier {
            level: 2,
            values: vec![
                AtomValue { atom_id: leaves[0], coords: vec![0.5] },
                AtomValue { atom_id: leaves[1], coords: vec![-0.5] },
            ],
        };
        assert!(matches!(
            GundyOperator::make_transform(&filt, 1, &[bad]),
            Err(Error::NotPredictable { level: 2, .. })
        ));
        let ok = Multiplier {
            level: 2,
            values: vec![
                AtomValue { atom_id: leaves[0], coords: vec![0.5] },
                AtomValue { atom_id: leaves[1], coords: vec![0.5] },
            ],
        };
        assert!(GundyOperator::make_transform(&filt, 1, &[ok]).is_ok());
        let big = Multiplier { level: 1, values: vec![AtomValue { atom_id: 0, coords: vec![1.5] }] };
        assert!(matches!(
            GundyOperator::make_transform(&filt, 1, &[big]),
            Err(Error::MultiplierTooLarge { .. })
        ));
        let lvl = Multiplier { level: 3, values: vec![] };
        assert!(matches!(GundyOperator::make_transform(&filt, 1, &[lvl]), Err(Error::MultiplierLevel(3))));
    }

    #[test]
    fn apply_rejects_mismatches() {
        let filt = Arc::new(build_dyadic(2).unwrap());
        let t = GundyOperator::constant(&filt, &HVec(vec![0.6, 0.8])).unwrap();
        assert!(t.apply(&MartFunction::zeros(&filt, 1)).is_err());
        let other = Arc::new(build_dyadic(3).unwrap());
        assert!(matches!(t.apply(&MartFunction::zeros(&other, 2)), Err(Error::FiltrationMismatch)));
        assert!(t.adjoint_apply(&MartFunction::zeros(&other, 1)).is_err());
    }

    #[test]
    fn json_rebuilds_the_same_operator() {
        let filt = Arc::new(build_random_regular(3, 0.25, 3, 0.9, 4).unwrap());
        let t = GundyOperator::random(&filt, 2, &mut rng::master(4)).unwrap();
        let u = GundyOperator::from_json(&filt, 2, &t.to_json().unwrap()).unwrap();
        assert_eq!(t.matrix(), u.matrix());
    }
}
