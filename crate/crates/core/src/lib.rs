//! Numerical laboratory for the Bellman-function approach to Gundy-class
//! operators on vector-valued martingales over regular filtrations.
//!
//! The crate is organised bottom-up:
//!
//! * [`filtration`] builds finite regular filtrations of an interval and their
//!   single-split refiltration.
//! * [`martingale`] is the calculus of leaf-constant `H`-valued functions:
//!   conditional expectations, martingale differences, averages, norms.
//! * [`gundy`] holds martingale transforms, their adjoints and norm checks.
//! * [`bellman`] covers Bellman points, the domain `Ω_p`, candidate functions
//!   and the dyadic splitting used to pass between regularity parameters.
//! * [`certifier`] replays the induction over split events on a concrete
//!   witness and reports per-split slack.
//! * [`estimator`] contains the λ-optimisation, `L^p` scans, witness searches
//!   and the duality bound.
//! * [`suites`] bundles the identity and inequality checks run by the CLI.

pub mod bellman;
pub mod certifier;
pub mod error;
pub mod estimator;
pub mod filtration;
pub mod gundy;
pub mod martingale;
pub mod rng;
pub mod suites;
pub mod tol;

pub use bellman::{
    candidates, check_b2_config, dyadic_expand, estimate_rescale_constant, omega_p_contains,
    sample_b2_configs, B2Config, B2Sampler, BellmanPoint, CandidateBellman, Exponents,
    ExpansionCertificate, RescaleEstimate,
};
pub use certifier::{certify, compute_dj, Certificate, SplitRecord};
pub use error::{Error, Result};
pub use filtration::{build_dyadic, build_random_regular, Atom, AtomId, Filtration, SplitEvent};
pub use gundy::{GundyOperator, Multiplier};
pub use martingale::{HVec, MartFunction};
pub use tol::Tolerances;
