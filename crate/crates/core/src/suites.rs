//! Property suites over a corpus of random instances.
//!
//! Every check reports a normalised error `value`; it passes when
//! `value <= tolerance`. Rows marked non-gating are informative only.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellman::{bellman_point_with_adjoint, omega_p_contains, Exponents};
use crate::certifier::{gaussian, objective};
use crate::error::{Error, Result};
use crate::filtration::{build_dyadic, build_random_regular, AtomId, Filtration};
use crate::gundy::GundyOperator;
use crate::martingale::MartFunction;
use crate::rng;
use crate::tol::Tolerances;

pub const DEFAULT_DELTAS: [f64; 4] = [0.1, 0.25, 1.0 / 3.0, 0.5];
pub const DEFAULT_DIMS: [usize; 3] = [1, 2, 3];
pub const DEFAULT_SEEDS: u64 = 100;
pub const MAX_CORPUS_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub gating: bool,
    pub instances: usize,
    /// Label of the instance with the largest value.
    pub worst: String,
}

impl CheckRow {
    pub const COLUMNS: [&'static str; 7] = ["name", "value", "tolerance", "passed", "gating", "instances", "worst"];

    fn new(name: &str, value: f64, tolerance: f64, gating: bool, label: &str) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            gating,
            instances: 1,
            worst: label.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Projection,
    Localization,
    Identities,
    Positivity,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Projection, Suite::Localization, Suite::Identities, Suite::Positivity];
}

/// A filtration with a random transform and random `f` (`H`-valued), `f2`
/// (`H`-valued) and `g` (scalar).
#[derive(Clone, Debug)]
pub struct Instance {
    pub delta: f64,
    pub dim: usize,
    pub seed: u64,
    pub filtration: Arc<Filtration>,
    pub t: GundyOperator,
    pub f: MartFunction,
    pub f2: MartFunction,
    pub g: MartFunction,
}

impl Instance {
    pub fn label(&self) -> String {
        format!("delta={:.4} dim={} seed={} depth={}", self.delta, self.dim, self.seed, self.filtration.depth())
    }
}

/// Depth cycles through `1..=5` with the seed. `δ = 1/2` gives the dyadic
/// filtration, other values a random regular one.
pub fn corpus_instance(delta: f64, dim: usize, seed: u64) -> Result<Instance> {
    let depth = 1 + (seed % MAX_CORPUS_DEPTH as u64) as usize;
    let filtration = if delta == 0.5 {
        build_dyadic(depth)?
    } else {
        let max_children = ((1.0 / delta + 1e-9).floor() as usize).min(3);
        build_random_regular(depth, delta, max_children, 0.7, seed)?
    };
    instance_on(Arc::new(filtration), delta, dim, seed)
}

/// Random transform and functions on a given filtration.
pub fn instance_on(filtration: Arc<Filtration>, delta: f64, dim: usize, seed: u64) -> Result<Instance> {
    let mut r = rng::stream(seed, (dim as u64) << 8 | (delta * 64.0) as u64);
    let t = GundyOperator::random(&filtration, dim, &mut r)?;
    let f = gaussian(&filtration, dim, &mut r);
    let f2 = gaussian(&filtration, dim, &mut r);
    let g = gaussian(&filtration, 1, &mut r);
    Ok(Instance { delta, dim, seed, filtration, t, f, f2, g })
}

/// `|a - b| / max(|a|, |b|, scale)`, zero when all three vanish.
fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    let d = a.abs().max(b.abs()).max(scale.abs());
    if d == 0.0 { 0.0 } else { (a - b).abs() / d }
}

fn split_atoms(filt: &Filtration) -> &[AtomId] {
    filt.split_order()
}

pub fn run_suite(suite: Suite, inst: &Instance, tols: &Tolerances) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Projection => projection(inst, tols),
        Suite::Localization => localization(inst, tols),
        Suite::Identities => identities(inst, tols),
        Suite::Positivity => positivity(inst, tols),
    }
}

fn projection(inst: &Instance, tols: &Tolerances) -> Result<Vec<CheckRow>> {
    let label = inst.label();
    let (f, g) = (&inst.f, &inst.f2);
    let nf = f.l2_norm().max(f64::MIN_POSITIVE);
    let scale = nf * g.l2_norm().max(f64::MIN_POSITIVE);
    let js = split_atoms(&inst.filtration);
    let df: Vec<MartFunction> = js.iter().map(|&j| f.delta_atom(j)).collect();
    let dg: Vec<MartFunction> = js.iter().map(|&j| g.delta_atom(j)).collect();

    let (mut idem, mut adj, mut orth) = (0.0f64, 0.0f64, 0.0f64);
    for (k, &j) in js.iter().enumerate() {
        idem = idem.max((&df[k].delta_atom(j) - &df[k]).l2_norm() / nf);
        let a = f.inner(&dg[k])?;
        let b = df[k].inner(g)?;
        let c = df[k].inner(&dg[k])?;
        adj = adj.max(((a - b).abs().max((a - c).abs())) / scale);
        for l in 0..js.len() {
            if l != k {
                orth = orth.max(df[l].inner(&dg[k])?.abs() / scale);
            }
        }
    }
    let root = inst.filtration.root().id;
    let centered = f - &MartFunction::constant(&inst.filtration, &f.average(root));
    let sum = df.iter().fold(MartFunction::zeros(&inst.filtration, inst.dim), |acc, d| &acc + d);
    let tele = centered.max_abs_diff(&sum) / f.max_norm().max(1.0);
    Ok(vec![
        CheckRow::new("projection.idempotence", idem, tols.projection, true, &label),
        CheckRow::new("projection.self_adjoint", adj, tols.projection, true, &label),
        CheckRow::new("projection.orthogonality", orth, tols.projection, true, &label),
        // Per-leaf telescoping is held to a tenth of the identity tolerance.
        CheckRow::new("projection.telescoping", tele, tols.identity / 10.0, true, &label),
    ])
}

fn localization(inst: &Instance, tols: &Tolerances) -> Result<Vec<CheckRow>> {
    let label = inst.label();
    let filt = &inst.filtration;
    let mut split_support = 0.0f64;
    for &j in split_atoms(filt) {
        let fj = inst.f.delta_atom(j);
        let tf = inst.t.apply(&fj)?;
        split_support = split_support.max(tf.l2_norm_outside(j) / fj.l2_norm().max(1.0));
    }

    // f = Σ_n 1_{e_n} Δ_n h with e_n a random union of atoms alive at n - 1.
    let mut r = rng::stream(inst.seed, 0x6532);
    let leaves = filt.num_leaves();
    let mut union = vec![false; leaves];
    let mut f = MartFunction::zeros(filt, inst.dim);
    for n in 1..=filt.depth() {
        let mut mask = vec![false; leaves];
        for &a in filt.level(n - 1) {
            if r.random_bool(0.5) {
                for i in filt.leaf_span(a) {
                    mask[i] = true;
                    union[i] = true;
                }
            }
        }
        let dn = inst.f.level_difference(n);
        let masked = MartFunction::from_leaf_fn(filt, inst.dim, |i| {
            if mask[i] { crate::martingale::HVec(dn.leaf(i).to_vec()) } else { crate::martingale::HVec::zeros(inst.dim) }
        });
        f = &f + &masked;
    }
    let tf = inst.t.apply(&f)?;
    let outside = (0..leaves).filter(|&i| !union[i]).map(|i| tf.leaf(i)[0].abs()).fold(0.0, f64::max);
    let g2 = outside / f.max_norm().max(1.0);
    Ok(vec![
        CheckRow::new("localization.split_support", split_support, tols.support, true, &label),
        CheckRow::new("localization.predictable_support", g2, tols.support, true, &label),
    ])
}

/// `‖Δ_Q T*g‖²` for every split atom, indexed by atom id.
fn delta_norms(tsg: &MartFunction) -> Vec<f64> {
    let filt = tsg.filtration();
    let mut out = vec![0.0; filt.atoms().len()];
    for &q in split_atoms(filt) {
        let d = tsg.delta_atom(q).l2_norm();
        out[q] = d * d;
    }
    out
}

fn identities(inst: &Instance, tols: &Tolerances) -> Result<Vec<CheckRow>> {
    let label = inst.label();
    let filt = &inst.filtration;
    let root = filt.root().id;
    let total = filt.total_measure();
    let (f, g, t) = (&inst.f, &inst.g, &inst.t);
    let tsg = t.adjoint_apply(g)?;
    let norms = delta_norms(&tsg);
    let atoms = filt.atoms();
    let exps = Exponents::new(2.0)?;

    let (mut osc, mut d2, mut restr, mut literal) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &j in split_atoms(filt) {
        let aj = &atoms[j];
        let mass = tsg.power_mean(j, 2.0);
        let direct = tsg.osc2(j);
        let series: f64 =
            split_atoms(filt).iter().filter(|&&q| aj.contains(&atoms[q])).map(|&q| norms[q]).sum::<f64>() / aj.measure;
        osc = osc.max(rel_err(direct, series, mass));

        let x = bellman_point_with_adjoint(f, g, &tsg, j, exps)?;
        let mix: f64 = aj
            .children
            .iter()
            .map(|&q| Ok(atoms[q].measure / aj.measure * bellman_point_with_adjoint(f, g, &tsg, q, exps)?.x2))
            .sum::<Result<f64>>()?;
        let dj2 = norms[j] / aj.measure;
        d2 = d2.max(rel_err(dj2, mix - x.x2, g.power_mean(j, 2.0)));

        let scale = total / aj.measure;
        let gj = g.restrict(j);
        let lit = scale * t.adjoint_apply(&gj)?.osc2(root);
        literal = literal.max(rel_err(direct, lit, mass));
        let centered = &gj - &MartFunction::constant(filt, &g.average(j)).restrict(j);
        let cen = scale * t.adjoint_apply(&centered)?.osc2(root);
        restr = restr.max(rel_err(direct, cen, mass));
    }

    let pairings: f64 =
        split_atoms(filt).iter().map(|&j| tsg.delta_atom(j).inner(&f.delta_atom(j))).sum::<Result<f64>>()?;
    let rhs = objective(f, g, t)? * total;
    let tele = rel_err(pairings, rhs, f.l2_norm() * g.l2_norm());

    let adj_rel = rel_err(g.inner(&t.apply(f)?)?, tsg.inner(f)?, f.l2_norm() * g.l2_norm());
    let closed = t.adjoint_closed_form(g)?.max_abs_diff(&tsg) / g.max_norm().max(1.0);

    Ok(vec![
        CheckRow::new("identity.osc_series", osc, tols.identity, true, &label),
        CheckRow::new("identity.x2_increment", d2, tols.identity, true, &label),
        CheckRow::new("identity.restriction", restr, tols.identity, true, &label),
        CheckRow::new("identity.restriction_literal", literal, tols.identity, false, &label),
        CheckRow::new("identity.telescoping", tele, tols.identity, true, &label),
        CheckRow::new("identity.adjoint", adj_rel, tols.identity, true, &label),
        CheckRow::new("identity.adjoint_closed_form", closed, tols.identity / 10.0, true, &label),
    ])
}

fn positivity(inst: &Instance, tols: &Tolerances) -> Result<Vec<CheckRow>> {
    let label = inst.label();
    let filt = &inst.filtration;
    let (f, g, t) = (&inst.f, &inst.g, &inst.t);
    let norm_excess = (t.operator_norm() - 1.0).max(0.0);
    let tsg = t.adjoint_apply(g)?;

    let mut floor = 0.0f64;
    let mut outside = 0usize;
    for p in [1.5, 2.0] {
        let exps = Exponents::new(p)?;
        for atom in filt.atoms() {
            let x = bellman_point_with_adjoint(f, g, &tsg, atom.id, exps)?;
            let g2 = g.power_mean(atom.id, 2.0);
            if g2 > 0.0 {
                floor = floor.max(-x.x2 / g2);
            }
            if !omega_p_contains(&x) {
                outside += 1;
            }
        }
    }

    let root = filt.root().id;
    let g2 = g.power_mean(root, 2.0);
    let m = tsg.average(root);
    let mean2 = m.dot(&m);
    let ineq = ((mean2 - (g2 - tsg.osc2(root))) / g2.max(1.0)).max(0.0);
    Ok(vec![
        CheckRow::new("positivity.operator_norm", norm_excess, tols.norm, true, &label),
        CheckRow::new("positivity.x2_floor", floor, tols.x2_floor, true, &label),
        CheckRow::new("positivity.x2_mean", ineq, tols.x2_mean, true, &label),
        CheckRow::new("positivity.omega_p", outside as f64, 0.0, true, &label),
        // The strict form asks for |<T*g>_I|^2 > 0, which fails whenever T*g
        // has mean zero. The value is 1 for an instance where it fails.
        CheckRow::new("positivity.x2_mean_strict", if mean2 > 0.0 { 0.0 } else { 1.0 }, 0.0, false, &label),
    ])
}

/// Folds per-instance rows into one row per check, keeping the worst value.
/// Input order decides ties, so the result is deterministic.
pub fn aggregate(rows: impl IntoIterator<Item = CheckRow>) -> Vec<CheckRow> {
    let mut out: Vec<CheckRow> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|r| r.name == row.name) {
            Some(acc) => {
                acc.instances += row.instances;
                acc.passed &= row.passed;
                if row.value > acc.value || row.value.is_nan() {
                    acc.value = row.value;
                    acc.worst = row.worst;
                }
            }
            None => out.push(row),
        }
    }
    out
}

/// Runs the suites over every `(delta, dim, seed)` cell.
pub fn run_corpus(suites: &[Suite], deltas: &[f64], dims: &[usize], seeds: &[u64], tols: &Tolerances) -> Result<Vec<CheckRow>> {
    if suites.is_empty() || deltas.is_empty() || dims.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("empty corpus".into()));
    }
    let cells: Vec<(f64, usize, u64)> = deltas
        .iter()
        .flat_map(|&d| dims.iter().flat_map(move |&k| seeds.iter().map(move |&s| (d, k, s))))
        .collect();
    let per_cell: Vec<Vec<CheckRow>> = cells
        .par_iter()
        .map(|&(delta, dim, seed)| {
            let inst = corpus_instance(delta, dim, seed)?;
            let mut rows = Vec::new();
            for &s in suites {
                rows.extend(run_suite(s, &inst, tols)?);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(per_cell.into_iter().flatten()))
}

pub fn all_gating_pass(rows: &[CheckRow]) -> bool {
    rows.iter().filter(|r| r.gating).all(|r| r.passed)
}
