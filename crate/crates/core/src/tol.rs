//! Numerical tolerances shared by the checks.

/// Relative tolerance for projection and orthogonality identities.
pub const PROJECTION: f64 = 1e-9;
/// Absolute bound on mass that must vanish exactly (supports, localization).
pub const SUPPORT: f64 = 1e-12;
/// Relative tolerance for the oscillation and increment identities.
pub const IDENTITY: f64 = 1e-9;
/// Positivity of `x2` relative to `<g^2>_J`.
pub const X2_FLOOR: f64 = 1e-12;
/// Slack allowed in `<g^2>_I - osc_I^2(T*g) >= |<T*g>_I|^2`.
pub const X2_MEAN: f64 = 1e-10;
/// `operator_norm <= 1 + NORM`.
pub const NORM: f64 = 1e-9;
/// Per-split slack tolerance, relative to the magnitudes involved.
pub const SPLIT_SLACK: f64 = 1e-9;
/// Accumulated tolerance on the final certified estimate.
pub const FINAL_SLACK: f64 = 1e-6;
/// Membership tolerance for `Ω_p`.
pub const DOMAIN: f64 = 1e-12;

/// A tolerance profile. The CLI scales it with `MBL_TOL`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub projection: f64,
    pub support: f64,
    pub identity: f64,
    pub x2_floor: f64,
    pub x2_mean: f64,
    pub norm: f64,
    pub split_slack: f64,
    pub final_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            projection: PROJECTION,
            support: SUPPORT,
            identity: IDENTITY,
            x2_floor: X2_FLOOR,
            x2_mean: X2_MEAN,
            norm: NORM,
            split_slack: SPLIT_SLACK,
            final_slack: FINAL_SLACK,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            projection: self.projection * k,
            support: self.support * k,
            identity: self.identity * k,
            x2_floor: self.x2_floor * k,
            x2_mean: self.x2_mean * k,
            norm: self.norm * k,
            split_slack: self.split_slack * k,
            final_slack: self.final_slack * k,
        }
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
