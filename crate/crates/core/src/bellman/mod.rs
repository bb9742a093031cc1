//! Bellman points, the domain `Ω_p`, candidate functions and the split-inequality machinery.

mod candidate;
pub(crate) mod config;
mod expansion;

pub use candidate::{candidates, CandidateBellman, Shape};
pub use config::{b2_outcome, check_b2_config, diameter, sample_b2_configs, B2Config, B2Outcome, B2Sampler};
pub use expansion::{
    dyadic_expand, estimate_rescale_constant, ratio_survey, ExpansionCertificate, ExpansionNode, Recombination,
    RescaleEstimate, RatioSurveyRow,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::AtomId;
use crate::gundy::GundyOperator;
use crate::martingale::{same_filtration, HVec, MartFunction};
use crate::tol;

/// A conjugate pair `1 < p <= 2 <= q`, `1/p + 1/q = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
}

impl Exponents {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::ExponentOutOfRange(p));
        }
        Ok(Self { p, q: p / (p - 1.0) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellmanPoint {
    pub x1: HVec,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub atom: Option<AtomId>,
    pub p: f64,
    pub q: f64,
}

impl BellmanPoint {
    pub fn new(x1: HVec, x2: f64, x3: f64, x4: f64, exps: Exponents) -> Self {
        Self { x1, x2, x3, x4, atom: None, p: exps.p, q: exps.q }
    }

    pub fn exponents(&self) -> Exponents {
        Exponents { p: self.p, q: self.q }
    }

    /// `(λx1, λ^{-2}x2, λ^p x3, λ^{-q}x4)`, the orbit of `(f, g) -> (λf, g/λ)`.
    pub fn rescale(&self, lambda: f64) -> Self {
        Self {
            x1: self.x1.scale(lambda),
            x2: self.x2 / (lambda * lambda),
            x3: self.x3 * lambda.powf(self.p),
            x4: self.x4 * lambda.powf(-self.q),
            ..self.clone()
        }
    }

    /// `Σ w_k x^k` taken coordinatewise.
    pub fn combination(points: &[&BellmanPoint], weights: &[f64]) -> Self {
        let first = points[0];
        let mut x1 = HVec::zeros(first.x1.dim());
        let (mut x2, mut x3, mut x4) = (0.0, 0.0, 0.0);
        for (pt, &w) in points.iter().zip(weights) {
            x1 = &x1 + &pt.x1.scale(w);
            x2 += w * pt.x2;
            x3 += w * pt.x3;
            x4 += w * pt.x4;
        }
        Self { x1, x2, x3, x4, atom: None, p: first.p, q: first.q }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x1.0.clone();
        v.extend([self.x2, self.x3, self.x4]);
        v
    }
}

/// `x^J = (<f>_J, <g^2>_J - osc_J^2(T*g), <|f|^p>_J, <|g|^q>_J)`.
pub fn bellman_point(
    f: &MartFunction,
    g: &MartFunction,
    t: &GundyOperator,
    j: AtomId,
    exps: Exponents,
) -> Result<BellmanPoint> {
    let tsg = t.adjoint_apply(g)?;
    bellman_point_with_adjoint(f, g, &tsg, j, exps)
}

/// [`bellman_point`] with `T*g` already computed.
pub fn bellman_point_with_adjoint(
    f: &MartFunction,
    g: &MartFunction,
    tsg: &MartFunction,
    j: AtomId,
    exps: Exponents,
) -> Result<BellmanPoint> {
    if !same_filtration(f.filtration(), g.filtration()) || !same_filtration(f.filtration(), tsg.filtration()) {
        return Err(Error::FiltrationMismatch);
    }
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: g.dim() });
    }
    f.filtration().atom(j)?;
    Ok(BellmanPoint {
        x1: f.average(j),
        x2: g.power_mean(j, 2.0) - tsg.osc2(j),
        x3: f.power_mean(j, exps.p),
        x4: g.power_mean(j, exps.q),
        atom: Some(j),
        p: exps.p,
        q: exps.q,
    })
}

/// Membership in `Ω_p = {|x1|^p <= x3, x2^q <= x4^2}` with `x2 >= 0`, up to
/// the domain tolerance (relative to the magnitudes involved).
pub fn omega_p_contains(x: &BellmanPoint) -> bool {
    omega_p_violation(x).is_none()
}

/// Describes why `x` is outside `Ω_p`, if it is.
pub fn omega_p_violation(x: &BellmanPoint) -> Option<String> {
    let coords_finite = x.x1.0.iter().all(|c| c.is_finite()) && [x.x2, x.x3, x.x4].iter().all(|c| c.is_finite());
    if !coords_finite {
        return Some("non-finite coordinate".into());
    }
    let eps = tol::DOMAIN;
    if x.x3 < 0.0 || x.x4 < 0.0 {
        return Some(format!("negative x3 = {} or x4 = {}", x.x3, x.x4));
    }
    if x.x2 < -eps * (1.0 + x.x4.powf(2.0 / x.q)) {
        return Some(format!("x2 = {} < 0", x.x2));
    }
    let lhs = x.x1.norm().powf(x.p);
    if lhs > x.x3 + eps * (1.0 + x.x3) {
        return Some(format!("|x1|^p = {lhs} > x3 = {}", x.x3));
    }
    let lhs = x.x2.max(0.0).powf(x.q);
    let rhs = x.x4 * x.x4;
    if lhs > rhs + eps * (1.0 + rhs) {
        return Some(format!("x2^q = {lhs} > x4^2 = {rhs}"));
    }
    None
}
