//! Passing from `δ = 1/2` to general `δ`: a configuration with dyadic weights
//! `a_k / 2^M` is unfolded into `2^M` equally weighted copies, sorted along
//! the diameter direction and halved. The two half-means are the top split;
//! below it every node is a midpoint of its two halves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{b2_outcome_unchecked, sample_with, B2Config, B2Sampler};
use super::{BellmanPoint, CandidateBellman};
use crate::error::{Error, Result};
use crate::martingale::HVec;
use crate::tol;

pub const MAX_DYADIC_M: u32 = 16;
const GRID_FACTOR: f64 = 1.05;
const GRID_MAX: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionNode {
    pub point: BellmanPoint,
    /// Share of the total mass, `size / 2^M`.
    pub weight: f64,
    /// The original point, for leaves.
    pub source: Option<usize>,
    pub children: Vec<ExpansionNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCertificate {
    /// Root: the base point `x`, whose children are the two half-means.
    pub node: ExpansionNode,
    pub m: u32,
    /// Original point index of each copy after sorting.
    pub order: Vec<usize>,
    pub separation: f64,
    pub diam: f64,
    /// `separation / diam`; absent when `diam = 0`.
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub d: f64,
    pub weights: Vec<f64>,
}

/// Slack bookkeeping for one candidate on an expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recombination {
    /// `B(x) - |d|·s - (B(X_L) + B(X_R))/2`.
    pub top_slack: f64,
    /// `Σ 2^{-depth}·(B(node) - (B(left) + B(right))/2)` over the midpoint nodes.
    pub midpoint_sum: f64,
    /// `c = s / diam` (1 when degenerate).
    pub c: f64,
    /// `(1/c)·(top_slack + midpoint_sum)`.
    pub recombined: f64,
    /// The δ-level slack of `(1/c)·B` on the original configuration.
    pub direct: f64,
    pub scale: f64,
}

impl Recombination {
    pub fn consistent(&self, tol: f64) -> bool {
        (self.recombined - self.direct).abs() <= tol * self.scale
    }
}

fn dyadic_exponent(weights: &[f64]) -> Result<(u32, Vec<usize>)> {
    'm: for m in 0..=MAX_DYADIC_M {
        let total = (1u64 << m) as f64;
        let mut counts = Vec::with_capacity(weights.len());
        for &w in weights {
            let a = w * total;
            if (a - a.round()).abs() > 1e-9 || a.round() < 1.0 {
                continue 'm;
            }
            counts.push(a.round() as usize);
        }
        if counts.iter().sum::<usize>() == 1usize << m {
            return Ok((m, counts));
        }
    }
    Err(Error::NonDyadic)
}

pub fn dyadic_expand(c: &B2Config) -> Result<ExpansionCertificate> {
    c.validate()?;
    let (m, counts) = dyadic_exponent(&c.weights)?;
    let b = 1usize << m;

    // Diameter endpoints over the original points.
    let mut y = (0, 0);
    let mut diam: f64 = 0.0;
    for i in 0..c.n() {
        for j in i + 1..c.n() {
            let dist = c.points[i].x1.dist(&c.points[j].x1);
            if dist > diam {
                diam = dist;
                y = (i, j);
            }
        }
    }
    let y1 = &c.points[y.0].x1;
    let dir = &c.points[y.1].x1 - y1;
    let key = |k: usize| if diam > 0.0 { (&c.points[k].x1 - y1).dot(&dir) / diam } else { 0.0 };

    let mut order: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &a)| std::iter::repeat_n(k, a)).collect();
    let keys: Vec<f64> = (0..c.n()).map(key).collect();
    order.sort_by(|&a, &bb| keys[a].total_cmp(&keys[bb]).then(a.cmp(&bb)));

    let build = |lo: usize, hi: usize| build_node(c, &order, lo, hi, b);
    // validate() guarantees N >= 2, hence b >= 2.
    let left = build(0, b / 2);
    let right = build(b / 2, b);
    let separation = left.point.x1.dist(&right.point.x1);
    let degenerate = diam == 0.0;
    let node = ExpansionNode { point: c.base.clone(), weight: 1.0, source: None, children: vec![left, right] };
    Ok(ExpansionCertificate {
        node,
        m,
        order,
        separation,
        diam,
        ratio: if degenerate { None } else { Some(separation / diam) },
        degenerate,
        d: c.d,
        weights: c.weights.clone(),
    })
}

fn build_node(c: &B2Config, order: &[usize], lo: usize, hi: usize, b: usize) -> ExpansionNode {
    let weight = (hi - lo) as f64 / b as f64;
    if order[lo..hi].iter().all(|&k| k == order[lo]) {
        return ExpansionNode { point: c.points[order[lo]].clone(), weight, source: Some(order[lo]), children: vec![] };
    }
    let mid = (lo + hi) / 2;
    let l = build_node(c, order, lo, mid, b);
    let r = build_node(c, order, mid, hi, b);
    let point = BellmanPoint::combination(&[&l.point, &r.point], &[0.5, 0.5]);
    ExpansionNode { point, weight, source: None, children: vec![l, r] }
}

impl ExpansionCertificate {
    pub fn recombine(&self, b: &CandidateBellman) -> Recombination {
        let [left, right] = [&self.node.children[0], &self.node.children[1]];
        let bx = b.eval(&self.node.point);
        let (bl, br) = (b.eval(&left.point), b.eval(&right.point));
        let top_slack = bx - self.d.abs() * self.separation - 0.5 * (bl + br);
        let mut midpoint_sum = 0.0;
        let mut magnitude = bx.abs().max(0.5 * (bl.abs() + br.abs()));
        for child in [left, right] {
            midpoint_sum += midpoint_slacks(child, b, &mut magnitude);
        }
        let c = self.ratio.unwrap_or(1.0);
        let recombined = (top_slack + midpoint_sum) / c;
        // The original configuration, read off the leaves.
        let mut leaves = Vec::new();
        collect_leaves(&self.node, &mut leaves);
        let mut mix = 0.0;
        for (pt, w) in &leaves {
            mix += w * b.eval(pt);
        }
        let direct = (bx - mix) / c - self.d.abs() * self.diam;
        let scale = 1f64.max(magnitude / c).max(self.d.abs() * self.diam);
        Recombination { top_slack, midpoint_sum, c, recombined, direct, scale }
    }

    /// Leaves as (original index, weight), merged per original point.
    pub fn leaf_weights(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        fn walk(n: &ExpansionNode, out: &mut Vec<(usize, f64)>) {
            match n.source {
                Some(k) => match out.iter_mut().find(|(i, _)| *i == k) {
                    Some(e) => e.1 += n.weight,
                    None => out.push((k, n.weight)),
                },
                None => n.children.iter().for_each(|c| walk(c, out)),
            }
        }
        walk(&self.node, &mut out);
        out.sort_by_key(|e| e.0);
        out
    }

    pub fn half_means(&self) -> (&HVec, &HVec) {
        (&self.node.children[0].point.x1, &self.node.children[1].point.x1)
    }
}

fn midpoint_slacks(n: &ExpansionNode, b: &CandidateBellman, magnitude: &mut f64) -> f64 {
    if n.children.is_empty() {
        return 0.0;
    }
    let v = b.eval(&n.point);
    let (l, r) = (b.eval(&n.children[0].point), b.eval(&n.children[1].point));
    *magnitude = magnitude.max(n.weight * v.abs()).max(n.weight * 0.5 * (l.abs() + r.abs()));
    // Node weight is 2^{-depth}.
    n.weight * (v - 0.5 * (l + r)) + n.children.iter().map(|c| midpoint_slacks(c, b, magnitude)).sum::<f64>()
}

fn collect_leaves<'a>(n: &'a ExpansionNode, out: &mut Vec<(&'a BellmanPoint, f64)>) {
    if n.children.is_empty() || n.source.is_some() {
        out.push((&n.point, n.weight));
    } else {
        n.children.iter().for_each(|c| collect_leaves(c, out));
    }
}

/// Minimum observed `separation / diam` per number of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSurveyRow {
    pub n: usize,
    pub configs: usize,
    pub min_ratio: f64,
    pub degenerate: usize,
}

pub fn ratio_survey(delta: f64, p: f64, dim: usize, m: u32, count: usize, seed: u64) -> Result<Vec<RatioSurveyRow>> {
    let mut sampler = B2Sampler::new(delta, p, dim)?;
    sampler.dyadic_m = Some(m);
    let configs = sample_with(&sampler, count, seed)?;
    let certs: Vec<ExpansionCertificate> = configs.par_iter().map(dyadic_expand).collect::<Result<_>>()?;
    let mut rows: Vec<RatioSurveyRow> = Vec::new();
    for (c, cert) in configs.iter().zip(&certs) {
        let row = match rows.iter_mut().find(|r| r.n == c.n()) {
            Some(r) => r,
            None => {
                rows.push(RatioSurveyRow { n: c.n(), configs: 0, min_ratio: f64::INFINITY, degenerate: 0 });
                rows.last_mut().unwrap()
            }
        };
        row.configs += 1;
        match cert.ratio {
            Some(r) => row.min_ratio = row.min_ratio.min(r),
            None => row.degenerate += 1,
        }
    }
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleEstimate {
    pub constant: f64,
    pub delta: f64,
    pub samples: usize,
    /// `(C, failing configurations)` for every grid value tried.
    pub grid: Vec<(f64, usize)>,
    pub worst_base_slack: f64,
}

/// Smallest `C` on the grid `1.05^k` such that `C·B` passes the split inequality on all
/// sampled `δ`-configurations. `B` must first pass sampling at `δ = 1/2`.
pub fn estimate_rescale_constant(
    b: &CandidateBellman,
    delta: f64,
    samples: usize,
    seed: u64,
    dim: usize,
) -> Result<RescaleEstimate> {
    let p = b.exps.p;
    let base_configs = sample_with(&B2Sampler::new(0.5, p, dim)?, samples, seed)?;
    let base: Vec<(f64, f64, f64)> = base_configs.par_iter().map(|c| split_terms(b, c)).collect();
    let mut worst_base_slack = f64::INFINITY;
    for &(core, pen, scale) in &base {
        let slack = core - pen;
        worst_base_slack = worst_base_slack.min(slack / scale);
        if slack < -tol::SPLIT_SLACK * scale {
            return Err(Error::NotInBaseClass(format!("split-inequality slack {slack} at delta = 1/2")));
        }
    }
    let terms = if delta == 0.5 {
        base
    } else {
        let configs = sample_with(&B2Sampler::new(delta, p, dim)?, samples, seed.wrapping_add(1))?;
        configs.par_iter().map(|c| split_terms(b, c)).collect()
    };
    let mut grid = Vec::new();
    let mut c = 1.0;
    while c <= GRID_MAX {
        let failing = terms
            .iter()
            .filter(|&&(core, pen, scale)| {
                let s = core * c - pen;
                s < -tol::SPLIT_SLACK * scale.max(c * scale)
            })
            .count();
        grid.push((c, failing));
        if failing == 0 {
            return Ok(RescaleEstimate { constant: c, delta, samples, grid, worst_base_slack });
        }
        c *= GRID_FACTOR;
    }
    Err(Error::NoRescaleConstant(GRID_MAX))
}

/// `(B(x) - Σλ_k B(x^k), |d|·diam, magnitude)`.
fn split_terms(b: &CandidateBellman, c: &B2Config) -> (f64, f64, f64) {
    let o = b2_outcome_unchecked(b, c);
    let pen = c.d.abs() * c.diameter();
    (o.slack + pen, pen, o.scale)
}
