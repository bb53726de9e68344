//! Effective-field contributions.
//!
//! Every kernel *adds* its contribution into an output [`FieldMap`] (tesla),
//! so the engine can accumulate contributions in a fixed order. Kernels only
//! write cells they have something to say about; vacuum cells keep whatever
//! is already there (the torque ignores them anyway).

use std::ops::{Index, IndexMut};

use crate::mesh::{CellState, Mesh};
use crate::Vec3;

/// One vector per cell, aligned with the mesh's linear indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMap {
    pub data: Vec<Vec3>,
}

impl FieldMap {
    pub fn zeros(n: usize) -> FieldMap {
        FieldMap { data: vec![Vec3::ZERO; n] }
    }

    pub fn uniform(n: usize, v: Vec3) -> FieldMap {
        FieldMap { data: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: Vec3) {
        self.data.fill(v);
    }

    /// Scale every vector in place.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

impl Index<usize> for FieldMap {
    type Output = Vec3;
    fn index(&self, i: usize) -> &Vec3 {
        &self.data[i]
    }
}

impl IndexMut<usize> for FieldMap {
    fn index_mut(&mut self, i: usize) -> &mut Vec3 {
        &mut self.data[i]
    }
}

/// Uniform material parameters (per-cell `msat` lives in [`CellState`]).
#[derive(Clone, Debug)]
pub struct Material {
    /// Exchange stiffness, J/m.
    pub aex: f64,
    /// First-order uniaxial anisotropy constant, J/m^3.
    pub ku1: f64,
    /// Anisotropy easy axis (normalized internally where used).
    pub anis_axis: Vec3,
    /// Gilbert damping, dimensionless.
    pub alpha: f64,
    /// Gyromagnetic ratio, rad/(s*T).
    pub gamma: f64,
}

impl Default for Material {
    fn default() -> Material {
        Material {
            aex: 0.0,
            ku1: 0.0,
            anis_axis: Vec3::new(0.0, 0.0, 1.0),
            alpha: 0.0,
            gamma: crate::GAMMA_DEFAULT,
        }
    }
}

/// Uniform applied field: adds `b_ext` to every cell.
pub fn zeeman_field(out: &mut FieldMap, b_ext: Vec3) {
    for v in &mut out.data {
        *v += b_ext;
    }
}

/// Six-neighbor exchange with free boundaries:
/// `B_i = (2*aex/msat_i) * sum_j (m_j - m_i) / delta_ij^2`,
/// where missing or vacuum neighbors simply drop out of the sum.
pub fn exchange_field(out: &mut FieldMap, mesh: &Mesh, state: &CellState, aex: f64) {
    if aex == 0.0 {
        return;
    }
    let inv_dx2 = 1.0 / (mesh.dx * mesh.dx);
    let inv_dy2 = 1.0 / (mesh.dy * mesh.dy);
    let inv_dz2 = 1.0 / (mesh.dz * mesh.dz);
    for i in 0..mesh.cell_count() {
        if !state.is_magnetic(i) {
            continue;
        }
        let (x, y, z) = mesh.coords(i);
        let mi = state.m[i];
        let mut sum = Vec3::ZERO;
        let mut add = |j: usize, inv_d2: f64| {
            if state.is_magnetic(j) {
                sum += (state.m[j] - mi) * inv_d2;
            }
        };
        if x > 0 {
            add(mesh.index(x - 1, y, z), inv_dx2);
        }
        if x + 1 < mesh.nx {
            add(mesh.index(x + 1, y, z), inv_dx2);
        }
        if y > 0 {
            add(mesh.index(x, y - 1, z), inv_dy2);
        }
        if y + 1 < mesh.ny {
            add(mesh.index(x, y + 1, z), inv_dy2);
        }
        if z > 0 {
            add(mesh.index(x, y, z - 1), inv_dz2);
        }
        if z + 1 < mesh.nz {
            add(mesh.index(x, y, z + 1), inv_dz2);
        }
        out[i] += (2.0 * aex / state.msat[i]) * sum;
    }
}

/// First-order uniaxial anisotropy: `B_i = (2*ku1/msat_i) (m_i . u) u`.
pub fn anisotropy_field(out: &mut FieldMap, state: &CellState, ku1: f64, axis: Vec3) {
    if ku1 == 0.0 {
        return;
    }
    let u = axis.normalized();
    if u == Vec3::ZERO {
        return;
    }
    for i in 0..state.cell_count() {
        if state.is_magnetic(i) {
            out[i] += (2.0 * ku1 / state.msat[i]) * state.m[i].dot(u) * u;
        }
    }
}

/// Upper bound on cells for which the direct dipole sum is considered
/// acceptable; enforced where engines are assembled, not here.
pub const DEMAG_CELL_LIMIT: usize = 4096;

/// Dipolar field by direct summation over all cell pairs:
/// `B_i = (mu0/4pi) sum_{j != i} [3 (mu_j . rhat) rhat - mu_j] / r^3`,
/// with `mu_j = msat_j * V_cell * m_j`. O(N^2) on purpose -- exact, simple,
/// and fine at the mesh sizes this crate targets (see [`DEMAG_CELL_LIMIT`]).
/// Each target cell accumulates over sources in index order, so results do
/// not depend on how the outer loop is scheduled across threads.
pub fn demag_field(out: &mut FieldMap, mesh: &Mesh, state: &CellState) {
    let n = mesh.cell_count();
    let vol = mesh.cell_volume();

    let cell_field = |i: usize| -> Vec3 {
        let ri = mesh.position(i);
        let mut acc = Vec3::ZERO;
        for j in 0..n {
            if j == i || !state.is_magnetic(j) {
                continue;
            }
            let mu = state.msat[j] * vol * state.m[j];
            let r = ri - mesh.position(j);
            let r2 = r.norm_sq();
            let rlen = r2.sqrt();
            let rhat = r / rlen;
            acc += (3.0 * mu.dot(rhat) * rhat - mu) / (r2 * rlen);
        }
        1e-7 * acc // mu0 / 4pi
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.data.par_iter_mut().enumerate().for_each(|(i, b)| {
            if state.is_magnetic(i) {
                *b += cell_field(i);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    for i in 0..n {
        if state.is_magnetic(i) {
            out[i] += cell_field(i);
        }
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        // series keeps full precision where sin(x)/x would cancel
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Time envelope options for the excitation field.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeProfile {
    /// Envelope identically zero (excitation defined but inert).
    None,
    /// Envelope identically one.
    Constant,
    Sin { omega: f64 },
    Sinc { omega_cutoff: f64 },
}

/// Spatial amplitude profile times a scalar envelope:
/// `B_exc(r_i, t) = profile[i] * scale * time_fn(t - t0)`.
#[derive(Clone, Debug)]
pub struct Excitation {
    pub profile: FieldMap,
    pub scale: f64,
    pub t0: f64,
    pub time_fn: TimeProfile,
}

impl Excitation {
    pub fn time_factor(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        match self.time_fn {
            TimeProfile::None => 0.0,
            TimeProfile::Constant => 1.0,
            TimeProfile::Sin { omega } => (omega * tau).sin(),
            TimeProfile::Sinc { omega_cutoff } => sinc(omega_cutoff * tau),
        }
    }
}

pub fn excitation_field(out: &mut FieldMap, exc: &Excitation, t: f64) {
    let f = exc.scale * exc.time_factor(t);
    if f == 0.0 {
        return;
    }
    for i in 0..out.len() {
        let v = exc.profile[i] * f;
        out[i] += v;
    }
}
