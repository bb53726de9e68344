//! Closed-form Dicke-model results and an explicit spin+cavity ODE
//! integrator, used as an independent oracle for the cavity engine.
//!
//! The single-mode Dicke model (collective spin S coupled to one boson mode)
//! maps onto a one-cell simulation via
//!
//! ```text
//! B_ext = (0, 0, ω_z/γ),   B_rms = (√(2/S)·λ/γ, 0, 0),   msat·V_c = ħγS
//! ```
//!
//! All couplings here are angular frequencies (the Hamiltonian λ divided by
//! ħ), so no ħ appears in user-facing parameters.
//!
//! Convention: the magnetization unit vector is m = -S/(ħS), i.e. the stable
//! normal-phase state has the *spin* along -z and m along +z. Default initial
//! state is m tilted 1° from +z, which seeds symmetry breaking in the
//! superradiant phase.

use num_complex::Complex64;

use crate::cavity::CavityParams;
use crate::engine::{llg_rhs, Engine};
use crate::fields::{FieldMap, Material};
use crate::mesh::{CellState, Mesh};
use crate::{Error, Vec3, HBAR};

#[derive(Clone, Copy, Debug)]
pub struct DickeParams {
    /// Spin (Larmor) frequency ω_z, rad/s.
    pub omega_z: f64,
    /// Cavity frequency ω_c, rad/s.
    pub omega_c: f64,
    /// Collective coupling λ, rad/s.
    pub lambda: f64,
    /// Cavity amplitude decay rate κ, rad/s.
    pub kappa: f64,
    /// Total spin magnitude S (dimensionless, large).
    pub s_total: f64,
}

impl DickeParams {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v, strictly_positive) in [
            ("omega_z", self.omega_z, true),
            ("omega_c", self.omega_c, true),
            ("lambda", self.lambda, false),
            ("kappa", self.kappa, false),
            ("s_total", self.s_total, true),
        ] {
            if !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0) {
                return Err(Error::Invalid(format!("Dicke parameter {name} = {v} is invalid")));
            }
        }
        Ok(())
    }

    pub fn lambda_critical(&self) -> f64 {
        lambda_critical(self.omega_c, self.omega_z)
    }
}

/// Critical coupling λ_c = √(ω_c ω_z)/2 separating the normal and
/// superradiant phases.
pub fn lambda_critical(omega_c: f64, omega_z: f64) -> f64 {
    (omega_c * omega_z).sqrt() / 2.0
}

/// Zero-temperature equilibrium magnetization along x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Equilibrium {
    /// λ < λ_c: m_x = 0.
    Normal,
    /// λ = λ_c exactly: m_x = 0 but the mode is soft (onset of bistability).
    Degenerate,
    /// λ > λ_c: m_x = ±mx_abs with mx_abs = √(1-μ²), μ = (λ_c/λ)².
    Superradiant { mx_abs: f64 },
}

impl Equilibrium {
    /// The set of equilibrium m_x values.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Equilibrium::Normal | Equilibrium::Degenerate => vec![0.0],
            Equilibrium::Superradiant { mx_abs } => vec![-mx_abs, mx_abs],
        }
    }

    pub fn mx_abs(&self) -> f64 {
        match *self {
            Equilibrium::Superradiant { mx_abs } => mx_abs,
            _ => 0.0,
        }
    }
}

pub fn equilibrium_mx(p: &DickeParams) -> Equilibrium {
    let lc = p.lambda_critical();
    if p.lambda < lc {
        Equilibrium::Normal
    } else if p.lambda == lc {
        Equilibrium::Degenerate
    } else {
        let mu = (lc / p.lambda).powi(2);
        Equilibrium::Superradiant { mx_abs: (1.0 - mu * mu).sqrt() }
    }
}

/// Normal-mode (polariton) frequencies of the linearized model.
#[derive(Clone, Copy, Debug)]
pub struct Polaritons {
    pub upper: f64,
    pub lower: f64,
    /// Set when the lower mode has softened to zero (λ = λ_c).
    pub soft: bool,
}

/// Polariton frequencies Ω±. Both phases obey the characteristic equation
///
/// ```text
/// (Ω² - a)(Ω² - ω_c²) = b
/// ```
///
/// with (a, b) = (ω_z², 4λ²ω_zω_c) in the normal phase and
/// (ω_z²/μ², ω_z²ω_c²) with μ = (λ_c/λ)² in the superradiant phase — the
/// latter follows from linearizing the classical equations of motion around
/// the displaced equilibrium, using 4λ²μ = ω_zω_c.
pub fn polariton_frequencies(p: &DickeParams) -> Polaritons {
    let lc = p.lambda_critical();
    let wc2 = p.omega_c * p.omega_c;
    let wz2 = p.omega_z * p.omega_z;
    if p.lambda == lc {
        // exactly critical: Ω₋ = 0, Ω₊² = ω_z² + ω_c²
        return Polaritons { upper: (wz2 + wc2).sqrt(), lower: 0.0, soft: true };
    }
    let (a, b) = if p.lambda <= lc {
        (wz2, 4.0 * p.lambda * p.lambda * p.omega_z * p.omega_c)
    } else {
        let mu = (lc / p.lambda).powi(2);
        (wz2 / (mu * mu), wz2 * wc2)
    };
    let sum = a + wc2;
    let disc = ((a - wc2).powi(2) + 4.0 * b).sqrt();
    let upper = (0.5 * (sum + disc)).sqrt();
    // Ω₋² = (sum - disc)/2 ≥ 0 analytically in both phases; guard the
    // subtraction against cancellation noise at the critical point.
    let lower_sq = (0.5 * (sum - disc)).max(0.0);
    let lower = lower_sq.sqrt();
    let soft = lower_sq <= 1e-14 * upper * upper;
    Polaritons { upper, lower, soft }
}

/// The one-cell field configuration equivalent to a Dicke model.
#[derive(Clone, Copy, Debug)]
pub struct DickeFields {
    pub b_ext: Vec3,
    pub b_rms: Vec3,
    /// The product msat·V_c the cell must realize (= ħγS).
    pub msat_vc: f64,
}

/// Map Dicke parameters onto static/coupling fields for a single cell with
/// msat·V_c = ħγS.
pub fn dicke_to_fields(p: &DickeParams, gamma_gyro: f64) -> DickeFields {
    DickeFields {
        b_ext: Vec3::new(0.0, 0.0, p.omega_z / gamma_gyro),
        b_rms: Vec3::new((2.0 / p.s_total).sqrt() * p.lambda / gamma_gyro, 0.0, 0.0),
        msat_vc: HBAR * gamma_gyro * p.s_total,
    }
}

/// Build a ready-to-run one-cell engine realizing the Dicke model: cubic cell
/// of volume `vc`, msat = ħγS/V_c, Zeeman + cavity enabled, magnetization
/// seeded 1° from +z (spin 1° from -z) to break the x → -x symmetry.
pub fn build_engine(
    p: &DickeParams,
    gamma_gyro: f64,
    alpha_gilbert: f64,
    vc: f64,
) -> Result<Engine, Error> {
    p.validate()?;
    if !(vc > 0.0) || !vc.is_finite() {
        return Err(Error::Invalid(format!("cell volume must be positive, got {vc}")));
    }
    let edge = vc.cbrt();
    let mesh = Mesh::new(1, 1, 1, edge, edge, edge)?;
    let vol = mesh.cell_volume(); // = vc up to cbrt/cube rounding
    let fields = dicke_to_fields(p, gamma_gyro);
    let msat = fields.msat_vc / vol;
    let mut state = CellState::new(&mesh, msat)?;
    let tilt = 1.0_f64.to_radians();
    state.set_uniform(Vec3::new(tilt.sin(), 0.0, tilt.cos()))?;
    let material =
        Material { alpha: alpha_gilbert, gamma: gamma_gyro, ..Material::default() };
    let mut engine = Engine::new(mesh, state, material)?;
    engine.set_zeeman(fields.b_ext);
    let params =
        CavityParams { omega_c: p.omega_c, kappa: p.kappa, vc: vol, x0: 0.0, p0: 0.0 };
    engine.set_cavity(params, FieldMap::uniform(1, fields.b_rms))?;
    Ok(engine)
}

/// Explicitly integrated reference trajectory.
#[derive(Clone, Debug, Default)]
pub struct DickeSeries {
    pub t: Vec<f64>,
    pub m: Vec<Vec3>,
    pub alpha: Vec<Complex64>,
}

impl DickeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn mx(&self) -> Vec<f64> {
        self.m.iter().map(|v| v.x).collect()
    }

    /// Repackage with the engine's CSV schema so series diff directly:
    /// gamma = α+α*, overlap = msat·(m·B_rms) for the given one-cell mapping.
    pub fn to_time_series(&self, msat: f64, b_rms: Vec3) -> crate::engine::TimeSeries {
        crate::engine::TimeSeries {
            t: self.t.clone(),
            m: self.m.clone(),
            gamma: self.alpha.iter().map(|a| 2.0 * a.re).collect(),
            overlap: self.m.iter().map(|m| msat * m.dot(b_rms)).collect(),
        }
    }
}

/// The coupled mean-field equations as 5 real ODEs (m plus Re α, Im α):
///
/// ```text
/// dm/dt = LLG(m, B'),  B' = (√(2/S)·λ·(α+α*)/γ, 0, ω_z/γ)
/// dα/dt = -(κ + iω_c)α + iλ√(2S)·m_x
/// ```
///
/// γ cancels between the LLG prefactor and the field mapping, so the
/// trajectory depends only on (ω_z, ω_c, λ, κ, S) and the Gilbert damping.
/// Fixed-step RK4 with per-step renormalization of m, matching the engine's
/// integration policy. No memory kernel anywhere — this is the independent
/// formulation the engine is checked against.
pub fn integrate_explicit(
    p: &DickeParams,
    m0: Vec3,
    alpha0: Complex64,
    alpha_gilbert: f64,
    dt: f64,
    duration: f64,
    record_every: u64,
) -> Result<DickeSeries, Error> {
    p.validate()?;
    if (m0.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::Invalid(format!("initial spin direction must be unit, |m0| = {}", m0.norm())));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    if record_every == 0 {
        return Err(Error::Invalid("record_every must be >= 1".into()));
    }
    let steps = (duration / dt).round();
    if !(steps >= 1.0) {
        return Err(Error::Invalid(format!(
            "duration {duration} is shorter than one step dt = {dt}"
        )));
    }
    let steps = steps as u64;

    // field in angular-frequency units (γ = 1 in llg_rhs)
    let drive = (2.0 / p.s_total).sqrt() * p.lambda;
    let feed = Complex64::new(0.0, p.lambda * (2.0 * p.s_total).sqrt());
    let pole = Complex64::new(p.kappa, p.omega_c);
    let rhs = |m: Vec3, a: Complex64| -> (Vec3, Complex64) {
        let b = Vec3::new(drive * 2.0 * a.re, 0.0, p.omega_z);
        (llg_rhs(m, b, 1.0, alpha_gilbert), -pole * a + feed * m.x)
    };

    let mut m = m0.normalized();
    let mut a = alpha0;
    let mut out = DickeSeries::default();
    out.t.push(0.0);
    out.m.push(m);
    out.alpha.push(a);

    for k in 1..=steps {
        let (km1, ka1) = rhs(m, a);
        let (km2, ka2) = rhs(m + km1 * (0.5 * dt), a + ka1 * (0.5 * dt));
        let (km3, ka3) = rhs(m + km2 * (0.5 * dt), a + ka2 * (0.5 * dt));
        let (km4, ka4) = rhs(m + km3 * dt, a + ka3 * dt);
        m += (km1 + 2.0 * km2 + 2.0 * km3 + km4) * (dt / 6.0);
        a += (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4) * (dt / 6.0);
        m = m.normalized();
        if k % record_every == 0 {
            out.t.push(k as f64 * dt);
            out.m.push(m);
            out.alpha.push(a);
        }
    }
    Ok(out)
}
