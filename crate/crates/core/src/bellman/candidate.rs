use std::fmt;
use std::sync::Arc;

use super::{BellmanPoint, Exponents};
use crate::error::{Error, Result};

pub type ShapeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type GeneralFn = Arc<dyn Fn(&BellmanPoint) -> f64 + Send + Sync>;

/// `C_p (x3 + x4) - h(x1, x2)`.
#[derive(Clone)]
pub struct Shape {
    pub c_p: f64,
    pub h: ShapeFn,
}

#[derive(Clone)]
enum Form {
    Shaped(Shape),
    General(GeneralFn),
}

/// A function on `Ω_p` claimed to lie in `K^p_δ`.
///
/// `scale` multiplies the evaluator; rescaling a `K^p_{1/2}` candidate to a
/// smaller `δ` only changes `scale` and `delta`.
#[derive(Clone)]
pub struct CandidateBellman {
    pub name: String,
    pub exps: Exponents,
    pub delta: f64,
    pub homogeneous: bool,
    pub scale: f64,
    form: Form,
}

impl fmt::Debug for CandidateBellman {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateBellman")
            .field("name", &self.name)
            .field("p", &self.exps.p)
            .field("delta", &self.delta)
            .field("scale", &self.scale)
            .field("c_p", &self.c_p())
            .finish()
    }
}

impl CandidateBellman {
    pub fn shaped(name: &str, p: f64, delta: f64, c_p: f64, h: ShapeFn) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            exps: Exponents::new(p)?,
            delta: check_delta(delta)?,
            homogeneous: false,
            scale: 1.0,
            form: Form::Shaped(Shape { c_p, h }),
        })
    }

    pub fn general(name: &str, p: f64, delta: f64, homogeneous: bool, b: GeneralFn) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            exps: Exponents::new(p)?,
            delta: check_delta(delta)?,
            homogeneous,
            scale: 1.0,
            form: Form::General(b),
        })
    }

    pub fn eval(&self, x: &BellmanPoint) -> f64 {
        self.scale * self.eval_unscaled(x)
    }

    pub fn eval_unscaled(&self, x: &BellmanPoint) -> f64 {
        match &self.form {
            Form::Shaped(s) => s.c_p * (x.x3 + x.x4) - (s.h)(&x.x1.0, x.x2),
            Form::General(b) => b(x),
        }
    }

    pub fn shape(&self) -> Option<&Shape> {
        match &self.form {
            Form::Shaped(s) => Some(s),
            Form::General(_) => None,
        }
    }

    pub fn c_p(&self) -> Option<f64> {
        self.shape().map(|s| s.c_p)
    }

    /// `c·B`, keeping the claimed `δ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { name: self.name.clone(), scale: self.scale * c, ..self.clone() }
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Ok(Self { delta: check_delta(delta)?, ..self.clone() })
    }
}

fn check_delta(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(delta)
    } else {
        Err(Error::DeltaOutOfRange(delta))
    }
}

pub mod candidates {
    //! Ready-made candidates.
    //!
    //! * [`quadratic`]: `x3 + x4 - |x1|^2 - x2` for `p = 2`, in `K^2_{1/2}`.
    //!   The split-inequality slack for two equal weights is `(|d| - diam/2)^2`.
    //! * [`quadratic_at`]: the same function times `1/sqrt(2δ)`, in `K^2_δ`.
    //! * [`linear`]: `C_p (x3 + x4)`, which fails the split inequality whenever `d != 0`.
    //! * [`radial_power`]: a radial `h` for `p ∈ [1.5, 2]` that passes the split inequality
    //!   sampling at `δ = 1/2`.

    use std::sync::Arc;

    use super::CandidateBellman;
    use crate::error::{Error, Result};
    use crate::martingale::dot;

    pub fn quadratic() -> CandidateBellman {
        CandidateBellman::shaped("quadratic", 2.0, 0.5, 1.0, Arc::new(|x1: &[f64], x2: f64| dot(x1, x1) + x2))
            .expect("valid parameters")
    }

    pub fn quadratic_at(delta: f64) -> Result<CandidateBellman> {
        let c = 1f64.max(1.0 / (2.0 * delta).sqrt());
        quadratic().with_delta(delta).map(|b| b.scaled(c))
    }

    pub fn linear(p: f64, c_p: f64) -> Result<CandidateBellman> {
        CandidateBellman::shaped("linear", p, 0.5, c_p, Arc::new(|_: &[f64], _: f64| 0.0))
    }

    /// Curvature factor applied to the radial profile.
    pub const RADIAL_K: f64 = 2.0;
    pub const RADIAL_P_MIN: f64 = 1.5;

    /// `h = k·(r^{p/2} + x2·r^{(2-p)/2} + x2^{q/2})` with
    /// `r = |x1|^2 + x2^{1/(p-1)}`, `k = 2`.
    ///
    /// `h` is invariant in shape under `(x1, x2) -> (λx1, λ^{2(p-1)}x2)`, so
    /// the boundary constant `C_p` is the maximum of `h / (|x1|^p + x2^{q/2})`
    /// along one profile curve, found by a scan and padded by one percent.
    pub fn radial_power(p: f64) -> Result<CandidateBellman> {
        if !(RADIAL_P_MIN..=2.0).contains(&p) {
            return Err(Error::ExponentOutOfRange(p));
        }
        let h = radial_h(p);
        let q = p / (p - 1.0);
        let mut worst: f64 = 0.0;
        let steps = 20_000;
        for i in 0..=steps {
            let th = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
            let (s, u) = th.sin_cos();
            let v = s.powf(2.0 * (p - 1.0));
            let denom = u.abs().powf(p) + v.powf(q / 2.0);
            worst = worst.max(h(&[u], v) / denom);
        }
        CandidateBellman::shaped("radial", p, 0.5, 1.01 * worst, Arc::new(h))
    }

    fn radial_h(p: f64) -> impl Fn(&[f64], f64) -> f64 + Send + Sync {
        let e = 1.0 / (p - 1.0);
        let qh = p / (2.0 * (p - 1.0));
        move |x1: &[f64], x2: f64| {
            let v = x2.max(0.0);
            let r = dot(x1, x1) + v.powf(e);
            RADIAL_K * (r.powf(p / 2.0) + v * r.powf((2.0 - p) / 2.0) + v.powf(qh))
        }
    }

    /// Looks a candidate up by name.
    pub fn by_name(name: &str, p: f64, delta: f64) -> Result<CandidateBellman> {
        match name {
            "quadratic" if p == 2.0 => quadratic_at(delta),
            "quadratic" => Err(Error::ExponentOutOfRange(p)),
            "linear" => linear(p, 1.0),
            "radial" => radial_power(p),
            other => Err(Error::InvalidConfig(format!("unknown candidate {other:?}"))),
        }
    }
}
