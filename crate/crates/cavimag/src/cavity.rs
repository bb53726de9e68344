//! Retarded single-mode cavity field.
//!
//! The cavity couples to the magnet through its zero-point field profile
//! `B_rms(r)` and acts back on every cell as `B_cav(t) = B_rms * Γ(t)`.
//! Eliminating the mode exactly gives
//!
//! ```text
//! Γ(t) = 2 e^{-κt} Re(α₀ e^{-iω_c t})
//!        - (2 V_cell/ħ) ∫₀ᵗ dτ e^{κ(τ-t)} sin(ω_c(τ-t)) w(τ),
//! w(τ) = Σ_i msat_i m_i(τ) · B_rms(r_i),
//! ```
//!
//! i.e. the photon the magnet emitted earlier comes back with a phase and an
//! envelope. Splitting the sine of the time difference turns the history
//! integral into two quadratures S and C that close under an O(1)-per-step
//! recursion, so stepping never touches the stored history.
//!
//! The accumulators are stored *rescaled* by `e^{-κ t_n}`:
//!
//! ```text
//! ŝ_n = e^{-κ dt} ŝ_{n-1} + sin(ω_c t_n) w_n dt     (ĉ_n likewise, cosine)
//! Γ(t) = cos(ω_c t) [e^{-κt} x₀ - (2V/ħ) e^{-κ(t-t_n)} ŝ_n]
//!      - sin(ω_c t) [e^{-κt} p₀ - (2V/ħ) e^{-κ(t-t_n)} ĉ_n]
//! ```
//!
//! which is algebraically identical to the plain form (the tests check this
//! against a brute-force resummation) but never evaluates `e^{+κt}`, so long
//! runs at large κ·t cannot overflow. The unscaled form dies at κ·t ≈ 709;
//! crossing κ·t = 700 still sets a diagnostic flag since external
//! history-based cross-checks stop being representable there.

use num_complex::Complex64;

use crate::fields::FieldMap;
use crate::mesh::CellState;
use crate::{Error, HBAR};

#[derive(Clone, Debug)]
pub struct CavityParams {
    /// Mode angular frequency, rad/s.
    pub omega_c: f64,
    /// Field amplitude decay rate, rad/s.
    pub kappa: f64,
    /// Cell volume of the mesh the overlap is summed on, m^3.
    pub vc: f64,
    /// Initial expectation of the x-quadrature, `x₀ = 2 Re α₀`.
    pub x0: f64,
    /// Initial expectation of the p-quadrature, `p₀ = -2 Im α₀`.
    pub p0: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.omega_c > 0.0) || !self.omega_c.is_finite() {
            return Err(Error::Invalid(format!(
                "cavity omega_c must be positive, got {}",
                self.omega_c
            )));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::Invalid(format!("cavity kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.vc > 0.0) || !self.vc.is_finite() {
            return Err(Error::Invalid(format!("cell volume must be positive, got {}", self.vc)));
        }
        Ok(())
    }

    /// Initial coherent amplitude implied by the quadratures.
    pub fn alpha0(&self) -> Complex64 {
        Complex64::new(self.x0 / 2.0, -self.p0 / 2.0)
    }
}

/// Running state of the memory recursion (rescaled S and C quadratures).
#[derive(Clone, Debug, Default)]
pub struct MemoryAccumulators {
    /// `e^{-κ t_last} * Σ_k e^{κ t_k} sin(ω_c t_k) w_k dt`
    pub s: f64,
    /// same with cosine
    pub c: f64,
    pub n_steps: u64,
    pub t_last: f64,
    /// Set once κ·t exceeds 700 (see module docs).
    pub overflow_flagged: bool,
}

impl MemoryAccumulators {
    pub fn new() -> MemoryAccumulators {
        MemoryAccumulators::default()
    }

    /// Forget all history and restart the cavity clock at zero.
    pub fn reset(&mut self) {
        *self = MemoryAccumulators::default();
    }
}

/// `w = Σ_i msat_i m_i · B_rms(r_i)`, summed in index order so the value is
/// bitwise reproducible regardless of thread count. Vacuum cells drop out via
/// `msat = 0`. Units: A·T/m.
pub fn weighted_overlap(state: &CellState, b_rms: &FieldMap) -> f64 {
    debug_assert_eq!(state.cell_count(), b_rms.len());
    let mut w = 0.0;
    for i in 0..state.cell_count() {
        if state.is_magnetic(i) {
            w += state.msat[i] * state.m[i].dot(b_rms[i]);
        }
    }
    w
}

/// Fold one sampled overlap into the quadratures. Must be called exactly once
/// per accepted step with `t_n = t_last + dt`; anything else is rejected so a
/// desync between engine clock and memory clock cannot pass silently.
pub fn update_memory(
    acc: &mut MemoryAccumulators,
    overlap: f64,
    t_n: f64,
    dt: f64,
    p: &CavityParams,
) -> Result<(), Error> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("update_memory: dt must be positive, got {dt}")));
    }
    let expected = acc.t_last + dt;
    if (t_n - expected).abs() > 1e-15 * t_n.abs().max(dt) {
        return Err(Error::Invalid(format!(
            "update_memory: time must advance one step at a time (expected t = {expected:.17e}, got {t_n:.17e})"
        )));
    }
    let decay = (-p.kappa * dt).exp();
    let (sin_t, cos_t) = (p.omega_c * t_n).sin_cos();
    acc.s = decay * acc.s + sin_t * overlap * dt;
    acc.c = decay * acc.c + cos_t * overlap * dt;
    acc.n_steps += 1;
    acc.t_last = t_n;
    if p.kappa * t_n > 700.0 {
        acc.overflow_flagged = true;
    }
    Ok(())
}

/// Γ at time `t >= t_last`, using the frozen accumulators. Pure: the engine
/// calls this at Runge-Kutta stage times between memory updates, where the
/// quadratures are simply decayed forward by `e^{-κ(t - t_last)}`.
pub fn gamma(acc: &MemoryAccumulators, t: f64, p: &CavityParams) -> f64 {
    let dt_ext = t - acc.t_last;
    debug_assert!(dt_ext > -1e-9 * t.abs().max(1e-300), "gamma queried before t_last");
    let stretch = (-p.kappa * dt_ext.max(0.0)).exp();
    let g = 2.0 * p.vc / HBAR;
    let drive = (-p.kappa * t).exp();
    let (sin_t, cos_t) = (p.omega_c * t).sin_cos();
    cos_t * (drive * p.x0 - g * stretch * acc.s) - sin_t * (drive * p.p0 - g * stretch * acc.c)
}

/// `out[i] += B_rms(r_i) * Γ`.
pub fn cavity_field(out: &mut FieldMap, b_rms: &FieldMap, gamma_value: f64) {
    debug_assert_eq!(out.len(), b_rms.len());
    for i in 0..out.len() {
        let v = b_rms[i] * gamma_value;
        out[i] += v;
    }
}

/// Rebuild the complex mode amplitude from a recorded overlap series:
///
/// ```text
/// α(t) = α₀ e^{-(κ+iω_c)t} + i (V/ħ) ∫₀ᵗ e^{(κ+iω_c)(τ-t)} w(τ) dτ
/// ```
///
/// with the integral done by the trapezoid rule on the samples (accumulated
/// incrementally in rescaled form, same trick as the Γ recursion). The series
/// must start at the cavity clock zero and times must strictly increase.
/// Γ(t) equals `2 Re α(t)` up to the different quadrature rule, and the
/// photon number is `|α|²`.
pub fn reconstruct_alpha(
    t: &[f64],
    overlap: &[f64],
    p: &CavityParams,
) -> Result<Vec<Complex64>, Error> {
    if t.len() != overlap.len() {
        return Err(Error::Invalid(format!(
            "reconstruct_alpha: {} times vs {} overlaps",
            t.len(),
            overlap.len()
        )));
    }
    if t.is_empty() {
        return Ok(Vec::new());
    }
    if t[0] != 0.0 {
        return Err(Error::Invalid(format!(
            "reconstruct_alpha: series must start at t = 0 (cavity clock), got {}",
            t[0]
        )));
    }
    let z = Complex64::new(p.kappa, p.omega_c);
    let coupling = Complex64::i() * (p.vc / HBAR);
    let alpha0 = p.alpha0();
    let mut j = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(t.len());
    out.push(alpha0);
    for k in 1..t.len() {
        let dt = t[k] - t[k - 1];
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!(
                "reconstruct_alpha: times must strictly increase ({} then {})",
                t[k - 1],
                t[k]
            )));
        }
        let decay = (-z * dt).exp();
        j = decay * j + 0.5 * dt * (decay * overlap[k - 1] + overlap[k]);
        out.push(alpha0 * (-z * t[k]).exp() + coupling * j);
    }
    Ok(out)
}

/// Photon number series `n(t) = |α(t)|²`.
pub fn photon_number(alpha: &[Complex64]) -> Vec<f64> {
    alpha.iter().map(|a| a.norm_sqr()).collect()
}
