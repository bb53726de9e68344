//! Finite-difference magnetization dynamics coupled to a single-mode cavity.
//!
//! The magnet is discretized on a uniform rectangular grid; each cell carries
//! a unit magnetization direction and a saturation magnetization (`msat = 0`
//! marks vacuum). Cells evolve under the Landau-Lifshitz-Gilbert equation in
//! an effective field that can include Zeeman, exchange, uniaxial anisotropy,
//! dipolar, and time-dependent excitation terms, plus the retarded field of a
//! single damped cavity mode. The cavity enters as `B_cav(t) = B_rms * Γ(t)`,
//! where the memory kernel `Γ` is accumulated with an O(1)-per-step recursion
//! instead of re-integrating the whole history (see [`cavity`]).
//!
//! A macrospin coupled to one cavity mode is exactly the (classical limit of
//! the) Dicke model, which is solvable; [`dicke`] carries the closed forms and
//! an independent explicit ODE integrator used to validate the memory-kernel
//! path.
//!
//! ```
//! use cavimag::dicke::{self, DickeParams};
//! use cavimag::engine::RunConfig;
//! use cavimag::Vec3;
//!
//! let omega = 2.0 * std::f64::consts::PI * 5e9;
//! let p = DickeParams {
//!     omega_z: omega,
//!     omega_c: omega,
//!     lambda: 0.3 * dicke::lambda_critical(omega, omega),
//!     kappa: 2.0 * std::f64::consts::PI * 1e7,
//!     s_total: 1e3,
//! };
//! let mut engine = dicke::build_engine(&p, cavimag::GAMMA_DEFAULT, 1e-4, 1e-24).unwrap();
//! engine.state.set_uniform(Vec3::new(0.02, 0.0, 1.0)).unwrap();
//! let dt = 2.0 * std::f64::consts::PI / omega / 512.0;
//! let cfg = RunConfig { dt, steps: 512, record_every: 8, renormalize_every: 1 };
//! let (series, summary) = engine.run(&cfg).unwrap();
//! assert_eq!(summary.steps, 512);
//! assert!(series.t.len() > 0);
//! ```

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod dicke;
pub mod engine;
mod error;
pub mod fields;
pub mod mesh;
pub mod ovf;
mod vec3;

pub use error::Error;
pub use vec3::Vec3;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.05457182e-34;

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Default gyromagnetic ratio, rad/(s·T). Positive; the sign convention is
/// folded into the equations of motion.
pub const GAMMA_DEFAULT: f64 = 1.7595e11;
