//! Replays the induction over split events on one witness `(f, g, T)`.
//!
//! For every split atom `J` with children `Q` the parent and child Bellman
//! points form a split configuration with `λ_Q = |Q|/|J|` and `d = d_J`.
//! Summing the per-split inequalities with weights `|J|/|I|` telescopes to
//! `B(x^I) >= <g·T[f - <f>_I]>_I` once the leaf values `B(x^L) >= 0` are in.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bellman::config::b2_outcome_unchecked;
use crate::bellman::{bellman_point_with_adjoint, omega_p_violation, B2Config, BellmanPoint, CandidateBellman};
use crate::error::{Error, Result};
use crate::filtration::{build_dyadic, AtomId, Filtration, SplitEvent};
use crate::gundy::GundyOperator;
use crate::martingale::{same_filtration, HVec, MartFunction};
use crate::rng::Rng;
use crate::tol::{self, Tolerances};

/// A test triple: `H`-valued `f`, scalar `g`, transform `T`.
#[derive(Clone, Debug)]
pub struct Witness {
    pub f: MartFunction,
    pub g: MartFunction,
    pub t: GundyOperator,
}

#[derive(Serialize, Deserialize)]
struct WitnessRecord {
    filtration: serde_json::Value,
    dim: usize,
    f: serde_json::Value,
    g: serde_json::Value,
    operator: serde_json::Value,
}

impl Witness {
    pub fn new(f: MartFunction, g: MartFunction, t: GundyOperator) -> Result<Self> {
        if !same_filtration(f.filtration(), g.filtration()) || !same_filtration(f.filtration(), t.filtration()) {
            return Err(Error::FiltrationMismatch);
        }
        if g.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: g.dim() });
        }
        if f.dim() != t.dim() {
            return Err(Error::DimensionMismatch { expected: t.dim(), got: f.dim() });
        }
        Ok(Self { f, g, t })
    }

    /// Depth-1 dyadic, `f = g = ±1` Haar, `a_1 = 1`.
    pub fn haar() -> Self {
        let filt = Arc::new(build_dyadic(1).expect("depth 1 is valid"));
        let haar = MartFunction::scalar(&filt, vec![1.0, -1.0]).expect("two leaves");
        let t = GundyOperator::constant(&filt, &HVec::scalar(1.0)).expect("unit multiplier");
        Self { f: haar.clone(), g: haar, t }
    }

    /// Gaussian leaf values and random predictable multipliers.
    pub fn random(filtration: &Arc<Filtration>, dim: usize, rng: &mut Rng) -> Result<Self> {
        let t = GundyOperator::random(filtration, dim, rng)?;
        let f = gaussian(filtration, dim, rng);
        let g = gaussian(filtration, 1, rng);
        Ok(Self { f, g, t })
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        self.f.filtration()
    }

    /// `<g·T[f - <f>_I]>_I`.
    pub fn objective(&self) -> Result<f64> {
        objective(&self.f, &self.g, &self.t)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = WitnessRecord {
            filtration: serde_json::from_str(&self.filtration().to_json()?)?,
            dim: self.t.dim(),
            f: serde_json::from_str(&self.f.to_json()?)?,
            g: serde_json::from_str(&self.g.to_json()?)?,
            operator: serde_json::from_str(&self.t.to_json()?)?,
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: WitnessRecord = serde_json::from_str(s)?;
        let filt = Arc::new(Filtration::from_json(&r.filtration.to_string())?);
        let f = MartFunction::from_json(&filt, &r.f.to_string())?;
        let g = MartFunction::from_json(&filt, &r.g.to_string())?;
        let t = GundyOperator::from_json(&filt, r.dim, &r.operator.to_string())?;
        Self::new(f, g, t)
    }
}

pub(crate) fn gaussian(filtration: &Arc<Filtration>, dim: usize, rng: &mut Rng) -> MartFunction {
    use rand_distr::{Distribution, StandardNormal};
    let values = (0..dim * filtration.num_leaves()).map(|_| StandardNormal.sample(rng)).collect();
    MartFunction::from_flat(filtration, dim, values).expect("sized to the filtration")
}

/// `<g·T[f - <f>_I]>_I`.
pub fn objective(f: &MartFunction, g: &MartFunction, t: &GundyOperator) -> Result<f64> {
    let filt = f.filtration();
    let root = filt.root().id;
    let centered = f - &MartFunction::constant(filt, &f.average(root));
    let tf = t.apply(&centered)?;
    Ok(g.inner(&tf)? / filt.total_measure())
}

/// `d_J = |J|^{-1/2}·‖Δ_J T*g‖`.
pub fn compute_dj(g: &MartFunction, t: &GundyOperator, e: &SplitEvent) -> Result<f64> {
    let tsg = t.adjoint_apply(g)?;
    Ok(dj_from_adjoint(&tsg, e.atom))
}

fn dj_from_adjoint(tsg: &MartFunction, j: AtomId) -> f64 {
    let measure = tsg.filtration().atoms()[j].measure;
    tsg.delta_atom(j).l2_norm() / measure.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub event: SplitEvent,
    pub parent_point: BellmanPoint,
    pub child_points: Vec<BellmanPoint>,
    /// `|Q| / |J|` per child.
    pub lambdas: Vec<f64>,
    pub d: f64,
    pub diam: f64,
    /// `max |Δ_J f|`.
    pub max_delta_f: f64,
    pub b2_slack: f64,
    pub b2_scale: f64,
    /// `(1/|J|)·<Δ_J T*g, Δ_J f>`.
    pub pairing: f64,
    /// `|J| / |I|`.
    pub weight: f64,
    /// `d^2 - (Σ λ_Q x2^Q - x2^J)`.
    pub d2_residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub candidate: String,
    pub records: Vec<SplitRecord>,
    pub root_point: BellmanPoint,
    pub root_value: f64,
    pub objective: f64,
    pub leaf_points: Vec<BellmanPoint>,
    pub leaf_boundary_values: Vec<f64>,
    /// `B(x^I) - objective`.
    pub final_slack: f64,
    /// The same quantity rebuilt from the records and leaf values.
    pub chain_slack: f64,
    /// `Σ (|J|/|I|)·b2_slack + Σ (|L|/|I|)·B(x^L)`, a lower bound for `final_slack`.
    pub accumulated_slack: f64,
    pub passed: bool,
    /// Index into `records` of the first failing split.
    pub first_violation: Option<usize>,
    pub violations: Vec<String>,
    /// First level at which `f` and `g` are constant on every atom.
    pub stabilization_level: usize,
    /// `Σ_{J ∈ A_n} (|J|/|I|)·B(x^J)` at the stabilization level.
    pub early_stop_boundary_sum: f64,
    /// The same sum over the leaves.
    pub leaf_boundary_sum: f64,
}

impl Certificate {
    pub const SUMMARY_COLUMNS: [&'static str; 6] = ["atom_id", "d", "diam", "slack", "pairing", "passed"];

    /// One row per split for the CSV summary.
    pub fn summary_rows(&self) -> Vec<[f64; 6]> {
        self.records
            .iter()
            .map(|r| [r.event.atom as f64, r.d, r.diam, r.b2_slack, r.pairing, if r.passed { 1.0 } else { 0.0 }])
            .collect()
    }

    pub fn failing_record(&self) -> Option<&SplitRecord> {
        self.first_violation.map(|i| &self.records[i])
    }
}

pub fn certify(f: &MartFunction, g: &MartFunction, t: &GundyOperator, b: &CandidateBellman) -> Result<Certificate> {
    certify_with(f, g, t, b, &Tolerances::default())
}

pub fn certify_with(
    f: &MartFunction,
    g: &MartFunction,
    t: &GundyOperator,
    b: &CandidateBellman,
    tols: &Tolerances,
) -> Result<Certificate> {
    let w = Witness::new(f.clone(), g.clone(), t.clone())?;
    let filt = w.filtration().clone();
    let actual = filt.regularity_delta();
    if b.delta > actual + 1e-12 {
        return Err(Error::DeltaExceeds { claimed: b.delta, actual });
    }
    let exps = b.exps;
    let tsg = t.adjoint_apply(g)?;
    let total = filt.total_measure();
    let point = |j: AtomId| bellman_point_with_adjoint(f, g, &tsg, j, exps);
    let mut violations = Vec::new();
    let mut first_violation = None;

    let mut records = Vec::with_capacity(filt.split_order().len());
    for event in filt.split_schedule() {
        let j = event.atom;
        let atom = &filt.atoms()[j];
        let parent = point(j)?;
        let children: Vec<BellmanPoint> = atom.children.iter().map(|&q| point(q)).collect::<Result<_>>()?;
        let lambdas: Vec<f64> = atom.children.iter().map(|&q| filt.atoms()[q].measure / atom.measure).collect();
        let d = dj_from_adjoint(&tsg, j);
        let config = B2Config { points: children.clone(), weights: lambdas.clone(), d, base: parent.clone(), delta: b.delta };
        let outcome = b2_outcome_unchecked(b, &config);
        let dtsg = tsg.delta_atom(j);
        let df = f.delta_atom(j);
        let pairing = dtsg.inner(&df)? / atom.measure;
        let mixed_x2: f64 = children.iter().zip(&lambdas).map(|(x, l)| l * x.x2).sum();
        let mut passed = outcome.passes(tols.split_slack);
        let idx = records.len();
        if !passed {
            violations.push(format!("split of atom {j}: split-inequality slack {:e}", outcome.slack));
        }
        for (k, x) in std::iter::once(&parent).chain(&children).enumerate() {
            if let Some(why) = omega_p_violation(x) {
                passed = false;
                violations.push(format!("split of atom {j}, point {k}: outside the domain: {why}"));
            }
        }
        if !passed && first_violation.is_none() {
            first_violation = Some(idx);
        }
        records.push(SplitRecord {
            diam: config.diameter(),
            max_delta_f: df.max_norm(),
            event,
            parent_point: parent,
            child_points: children,
            lambdas,
            d,
            b2_slack: outcome.slack,
            b2_scale: outcome.scale,
            pairing,
            weight: atom.measure / total,
            d2_residual: d * d - (mixed_x2 - config.base.x2),
            passed,
        });
    }

    let mut leaf_points = Vec::with_capacity(filt.num_leaves());
    let mut leaf_boundary_values = Vec::with_capacity(filt.num_leaves());
    let mut leaf_boundary_sum = 0.0;
    let mut leaves_ok = true;
    for (i, &l) in filt.leaves().iter().enumerate() {
        let x = point(l)?;
        let v = b.eval(&x);
        let scale = 1f64.max(b.scale * (x.x3 + x.x4));
        if v < -tols.split_slack * scale {
            leaves_ok = false;
            violations.push(format!("leaf atom {l}: boundary value {v:e} < 0"));
        }
        leaf_boundary_sum += filt.leaf_measure(i) / total * v;
        leaf_points.push(x);
        leaf_boundary_values.push(v);
    }

    let root_point = point(filt.root().id)?;
    let root_value = b.eval(&root_point);
    let objective = w.objective()?;
    let final_slack = root_value - objective;
    let split_part: f64 =
        records.iter().map(|r| r.weight * (r.b2_slack + r.d.abs() * r.diam - r.pairing)).sum();
    let chain_slack = split_part + leaf_boundary_sum;
    let accumulated_slack = records.iter().map(|r| r.weight * r.b2_slack).sum::<f64>() + leaf_boundary_sum;
    let magnitude = 1f64.max(root_value.abs()).max(objective.abs());
    let final_ok = final_slack >= -tols.final_slack * magnitude;
    if !final_ok {
        violations.push(format!("final slack {final_slack:e}"));
    }

    let stabilization_level = (0..=filt.depth())
        .find(|&n| f.cond_exp_level(n).max_abs_diff(f) == 0.0 && g.cond_exp_level(n).max_abs_diff(g) == 0.0)
        .unwrap_or(filt.depth());
    let mut early_stop_boundary_sum = 0.0;
    for &j in filt.level(stabilization_level) {
        early_stop_boundary_sum += filt.atoms()[j].measure / total * b.eval(&point(j)?);
    }

    Ok(Certificate {
        candidate: b.name.clone(),
        passed: first_violation.is_none() && leaves_ok && final_ok,
        records,
        root_point,
        root_value,
        objective,
        leaf_points,
        leaf_boundary_values,
        final_slack,
        chain_slack,
        accumulated_slack,
        first_violation,
        violations,
        stabilization_level,
        early_stop_boundary_sum,
        leaf_boundary_sum,
    })
}

/// Checks the bookkeeping identities of a certificate: the `d_J^2` identity,
/// the diameter chain and the telescoped slack.
pub fn audit(c: &Certificate, tols: &Tolerances) -> Vec<String> {
    let mut out = Vec::new();
    for r in &c.records {
        let x2_scale = 1f64.max(r.parent_point.x2.abs()).max(r.d * r.d);
        if r.d2_residual.abs() > tols.identity * x2_scale {
            out.push(format!("atom {}: d^2 identity residual {:e}", r.event.atom, r.d2_residual));
        }
        let chain = [r.d.abs() * r.diam, r.d.abs() * r.max_delta_f, r.pairing];
        let slack = tol::SPLIT_SLACK * 1f64.max(chain[0]);
        if chain[0] < chain[1] - slack || chain[1] < chain[2] - slack {
            out.push(format!("atom {}: diameter chain {chain:?}", r.event.atom));
        }
    }
    let magnitude = 1f64.max(c.root_value.abs()).max(c.objective.abs());
    if (c.chain_slack - c.final_slack).abs() > 1e-8 * magnitude {
        out.push(format!("chain slack {:e} vs final slack {:e}", c.chain_slack, c.final_slack));
    }
    if c.final_slack < c.accumulated_slack - tols.final_slack * magnitude {
        out.push(format!("final slack {:e} below accumulated {:e}", c.final_slack, c.accumulated_slack));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::candidates;
    use crate::filtration::build_random_regular;
    use crate::rng;

    #[test]
    fn haar_witness() {
        let w = Witness::haar();
        assert!((w.objective().unwrap() - 1.0).abs() < 1e-12);
        let e = &w.filtration().split_schedule()[0];
        assert!((compute_dj(&w.g, &w.t, e).unwrap() - 1.0).abs() < 1e-12);
        let c = certify(&w.f, &w.g, &w.t, &candidates::quadratic()).unwrap();
        assert!(c.passed, "{:?}", c.violations);
        assert_eq!(c.root_point.coords(), vec![0.0, 0.0, 1.0, 1.0]);
        // B(0, 0, 1, 1) = 2 >= 1.
        assert_eq!(c.root_value, 2.0);
        assert!(audit(&c, &Tolerances::default()).is_empty());
    }

    #[test]
    fn zero_f_and_g() {
        let w = Witness::haar();
        let zero = MartFunction::zeros(w.filtration(), 1);
        assert_eq!(compute_dj(&zero, &w.t, &w.filtration().split_schedule()[0]).unwrap(), 0.0);
        let c = certify(&zero, &w.g, &w.t, &candidates::quadratic()).unwrap();
        assert_eq!(c.objective, 0.0);
        assert!(c.passed);
    }

    #[test]
    fn linear_candidate_rejected() {
        let w = Witness::haar();
        let c = certify(&w.f, &w.g, &w.t, &candidates::linear(2.0, 1.0).unwrap()).unwrap();
        assert!(!c.passed);
        let r = c.failing_record().unwrap();
        assert!(r.d > 0.0 && r.diam > 0.0 && r.b2_slack < 0.0);
    }

    #[test]
    fn delta_claim_checked() {
        let filt = Arc::new(build_random_regular(3, 0.25, 3, 0.8, 1).unwrap());
        let w = Witness::random(&filt, 2, &mut rng::master(1)).unwrap();
        let r = certify(&w.f, &w.g, &w.t, &candidates::quadratic());
        if filt.regularity_delta() < 0.5 {
            assert!(matches!(r, Err(Error::DeltaExceeds { .. })));
        }
    }

    #[test]
    fn random_witnesses_certify() {
        for seed in 0..40 {
            let filt = Arc::new(build_random_regular(3, 0.25, 4, 0.7, seed).unwrap());
            let mut r = rng::master(seed);
            let w = Witness::random(&filt, 1 + seed as usize % 3, &mut r).unwrap();
            let b = candidates::quadratic_at(0.25).unwrap();
            let c = certify(&w.f, &w.g, &w.t, &b).unwrap();
            assert!(c.passed, "seed {seed}: {:?}", c.violations);
            assert!(c.final_slack >= -1e-6);
            assert!(audit(&c, &Tolerances::default()).is_empty(), "{:?}", audit(&c, &Tolerances::default()));
            // The objective telescopes over the splits.
            let tele: f64 = c.records.iter().map(|r| r.weight * r.pairing).sum();
            assert!((tele - c.objective).abs() < 1e-9 * (1.0 + c.objective.abs()));
        }
    }

    #[test]
    fn leaf_points_on_the_boundary() {
        let filt = Arc::new(build_dyadic(3).unwrap());
        let w = Witness::random(&filt, 2, &mut rng::master(3)).unwrap();
        let b = candidates::radial_power(1.5).unwrap();
        let c = certify(&w.f, &w.g, &w.t, &b).unwrap();
        for x in &c.leaf_points {
            assert!(tol::close_rel(x.x1.norm().powf(x.p), x.x3, 1e-14));
        }
        assert!(c.passed, "{:?}", c.violations);
    }

    #[test]
    fn early_stabilization_recorded() {
        let filt = Arc::new(build_dyadic(3).unwrap());
        let w = Witness::haar();
        // Lift the depth-1 Haar functions to a deeper filtration.
        let f = MartFunction::scalar(&filt, vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        let t = GundyOperator::constant(&filt, &HVec::scalar(1.0)).unwrap();
        let c = certify(&f, &f, &t, &candidates::quadratic()).unwrap();
        assert_eq!(c.stabilization_level, 1);
        assert!((c.early_stop_boundary_sum - c.leaf_boundary_sum).abs() < 1e-12);
        assert!((c.objective - w.objective().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn witness_json_round_trip() {
        let filt = Arc::new(build_random_regular(3, 0.25, 3, 0.9, 8).unwrap());
        let w = Witness::random(&filt, 2, &mut rng::master(8)).unwrap();
        let v = Witness::from_json(&w.to_json().unwrap()).unwrap();
        assert_eq!(w.f.flat(), v.f.flat());
        assert_eq!(w.g.flat(), v.g.flat());
        assert_eq!(w.t.matrix(), v.t.matrix());
    }
}
