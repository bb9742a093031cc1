use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{omega_p_violation, BellmanPoint, CandidateBellman, Exponents};
use crate::error::{Error, Result};
use crate::martingale::HVec;
use crate::rng::{self, Rng};
use crate::tol;

const BASE_REJECTION_BUDGET: usize = 1_000;

/// Points `x^1..x^N` with weights `λ_k >= δ` and a base point `x` such that
/// `Σ λ_k x^k - x = (0, d^2, 0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct B2Config {
    pub points: Vec<BellmanPoint>,
    pub weights: Vec<f64>,
    pub d: f64,
    pub base: BellmanPoint,
    pub delta: f64,
}

impl B2Config {
    /// Builds the base point from the displacement identity.
    pub fn from_points(points: Vec<BellmanPoint>, weights: Vec<f64>, d: f64, delta: f64) -> Self {
        let refs: Vec<&BellmanPoint> = points.iter().collect();
        let mut base = BellmanPoint::combination(&refs, &weights);
        base.x2 -= d * d;
        Self { points, weights, d, base, delta }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let n = self.points.len();
        if n < 2 || self.weights.len() != n {
            return bad(format!("{n} points with {} weights", self.weights.len()));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::DeltaOutOfRange(self.delta));
        }
        if let Some(w) = self.weights.iter().find(|&&w| w < self.delta - 1e-12) {
            return bad(format!("weight {w} below delta {}", self.delta));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("weights sum to {total}"));
        }
        let dim = self.base.x1.dim();
        if self.points.iter().any(|x| x.x1.dim() != dim) {
            return bad("points of different dimension".into());
        }
        let refs: Vec<&BellmanPoint> = self.points.iter().collect();
        let mean = BellmanPoint::combination(&refs, &self.weights);
        let mut expected = self.base.coords();
        expected[dim] += self.d * self.d;
        for (k, (a, b)) in mean.coords().iter().zip(&expected).enumerate() {
            if !tol::close_rel(*a, *b, 1e-10) {
                return bad(format!("displacement identity fails in coordinate {k}: {a} vs {b}"));
            }
        }
        for (k, x) in self.points.iter().enumerate() {
            if let Some(why) = omega_p_violation(x) {
                return Err(Error::OutsideDomain(format!("point {k}: {why}")));
            }
        }
        if let Some(why) = omega_p_violation(&self.base) {
            return Err(Error::OutsideDomain(format!("base: {why}")));
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        diameter(self.points.iter().map(|x| &x.x1))
    }
}

/// Largest pairwise distance.
pub fn diameter<'a>(pts: impl Iterator<Item = &'a HVec> + Clone) -> f64 {
    let v: Vec<&HVec> = pts.collect();
    let mut best: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            best = best.max(v[i].dist(v[j]));
        }
    }
    best
}

/// The split-inequality slack of a candidate on one configuration and the magnitude it is
/// judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct B2Outcome {
    pub slack: f64,
    pub scale: f64,
}

impl B2Outcome {
    pub fn passes(&self, tol: f64) -> bool {
        self.slack >= -tol * self.scale
    }
}

/// `B(x) - |d|·diam{x1^k} - Σ λ_k B(x^k)`.
pub fn check_b2_config(b: &CandidateBellman, c: &B2Config) -> Result<f64> {
    b2_outcome(b, c).map(|o| o.slack)
}

pub fn b2_outcome(b: &CandidateBellman, c: &B2Config) -> Result<B2Outcome> {
    c.validate()?;
    if b.exps.p != c.base.p {
        return Err(Error::InvalidConfig(format!("candidate has p = {}, points have p = {}", b.exps.p, c.base.p)));
    }
    Ok(b2_outcome_unchecked(b, c))
}

pub(crate) fn b2_outcome_unchecked(b: &CandidateBellman, c: &B2Config) -> B2Outcome {
    let bx = b.eval(&c.base);
    let penalty = c.d.abs() * c.diameter();
    let mut mix = 0.0;
    let mut mix_abs = 0.0;
    for (x, w) in c.points.iter().zip(&c.weights) {
        let v = b.eval(x);
        mix += w * v;
        mix_abs += w * v.abs();
    }
    B2Outcome { slack: bx - penalty - mix, scale: 1f64.max(bx.abs()).max(penalty).max(mix_abs) }
}

/// Random split configurations in `Ω_p`.
#[derive(Clone, Debug)]
pub struct B2Sampler {
    pub delta: f64,
    pub exps: Exponents,
    pub dim: usize,
    pub force_zero_d: bool,
    /// Draw dyadic weights `a_k / 2^M`.
    pub dyadic_m: Option<u32>,
}

impl B2Sampler {
    pub fn new(delta: f64, p: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        if dim == 0 || dim > 4 {
            return Err(Error::InvalidConfig(format!("dimension {dim} outside 1..=4")));
        }
        Ok(Self { delta, exps: Exponents::new(p)?, dim, force_zero_d: false, dyadic_m: None })
    }

    pub fn max_n(&self) -> usize {
        match self.dyadic_m {
            Some(m) => {
                let total = 1usize << m;
                let floor = (self.delta * total as f64 - 1e-9).ceil().max(1.0) as usize;
                total / floor
            }
            None => (1.0 / self.delta + 1e-9).floor() as usize,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<B2Config> {
        let max_n = self.max_n();
        if max_n < 2 {
            return Err(Error::Infeasible(format!("no two weights >= {} fit", self.delta)));
        }
        let n = rng.random_range(2..=max_n);
        let weights = match self.dyadic_m {
            Some(m) => dyadic_weights(n, m, self.delta, rng),
            None => floor_dirichlet(n, self.delta, rng),
        };
        let spread = 10f64.powf(rng.random_range(-1.5..1.5));
        let center: Vec<f64> = if rng.random_bool(0.5) {
            let s = 10f64.powf(rng.random_range(-1.0..2.0));
            (0..self.dim).map(|_| s * normal(rng)).collect()
        } else {
            vec![0.0; self.dim]
        };
        let points: Vec<BellmanPoint> = (0..n).map(|_| self.point(&center, spread, rng)).collect();
        for _ in 0..BASE_REJECTION_BUDGET {
            let budget: f64 = points.iter().zip(&weights).map(|(x, w)| w * x.x2).sum();
            let d = if self.force_zero_d || budget <= 0.0 {
                0.0
            } else {
                let d2 = rng.random_range(0.0..=budget);
                if rng.random_bool(0.5) { d2.sqrt() } else { -d2.sqrt() }
            };
            let config = B2Config::from_points(points.clone(), weights.clone(), d, self.delta);
            if omega_p_violation(&config.base).is_none() {
                return Ok(config);
            }
        }
        Err(Error::RejectionBudget(BASE_REJECTION_BUDGET))
    }

    fn point(&self, center: &[f64], spread: f64, rng: &mut Rng) -> BellmanPoint {
        let (p, q) = (self.exps.p, self.exps.q);
        let x1: Vec<f64> = if rng.random_bool(0.1) {
            center.to_vec()
        } else {
            center.iter().map(|c| c + spread * normal(rng)).collect()
        };
        let x1 = HVec(x1);
        let x2 = if rng.random_bool(0.15) {
            0.0
        } else {
            let s = spread * 10f64.powf(rng.random_range(-2.0..2.0));
            s.powf(2.0 * (p - 1.0)) * rng.random::<f64>()
        };
        let mut x3 = x1.norm().powf(p);
        if rng.random_bool(0.5) {
            x3 += spread.powf(p) * rng.random::<f64>();
        }
        let mut x4 = x2.powf(q / 2.0);
        if rng.random_bool(0.5) {
            x4 += spread.powf(q) * rng.random::<f64>();
        }
        BellmanPoint::new(x1, x2, x3, x4, self.exps)
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `δ + (1 - Nδ)·Dirichlet(1, ..., 1)`.
fn floor_dirichlet(n: usize, delta: f64, rng: &mut Rng) -> Vec<f64> {
    let free = (1.0 - n as f64 * delta).max(0.0);
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let mut w: Vec<f64> = e.iter().map(|x| delta + free * x / total).collect();
    // Push the rounding error into the largest weight.
    let sum: f64 = w.iter().sum();
    let imax = (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    w[imax] += 1.0 - sum;
    w
}

/// Integer weights `a_k >= ceil(δ 2^M)` summing to `2^M`, returned as `a_k / 2^M`.
fn dyadic_weights(n: usize, m: u32, delta: f64, rng: &mut Rng) -> Vec<f64> {
    let total = 1usize << m;
    let floor = (delta * total as f64 - 1e-9).ceil().max(1.0) as usize;
    let mut a = vec![floor; n];
    for _ in 0..total - n * floor {
        a[rng.random_range(0..n)] += 1;
    }
    a.iter().map(|&k| k as f64 / total as f64).collect()
}

/// `count` configurations; configuration `i` uses its own stream of `seed`.
pub fn sample_b2_configs(delta: f64, p: f64, count: usize, seed: u64, dim: usize) -> Result<Vec<B2Config>> {
    let sampler = B2Sampler::new(delta, p, dim)?;
    sample_with(&sampler, count, seed)
}

pub(crate) fn sample_with(sampler: &B2Sampler, count: usize, seed: u64) -> Result<Vec<B2Config>> {
    (0..count).into_par_iter().map(|i| sampler.sample(&mut rng::stream(seed, i as u64))).collect()
}
