//! Uniform rectangular grid and the per-cell magnetization state.

use crate::{Error, Vec3};

/// Regular grid of `nx * ny * nz` cells with spacings `dx, dy, dz` (meters).
///
/// Linear cell indices run x-fastest: `i = x + nx * (y + ny * z)`. Cell
/// centers sit at half-offsets, so cell (0,0,0) is centered on
/// `(dx/2, dy/2, dz/2)` and the mesh occupies `[0, nx*dx] x [0, ny*dy] x
/// [0, nz*dz]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Mesh, Error> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Invalid(format!(
                "mesh needs at least one cell per axis, got {nx}x{ny}x{nz}"
            )));
        }
        for (name, d) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Invalid(format!("cell size {name} must be positive, got {d}")));
            }
        }
        Ok(Mesh { nx, ny, nz, dx, dy, dz })
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Cell volume in m^3.
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Linear index of cell (x, y, z); x runs fastest.
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        x + self.nx * (y + self.ny * z)
    }

    /// Inverse of [`Mesh::index`].
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        debug_assert!(i < self.cell_count());
        let x = i % self.nx;
        let y = (i / self.nx) % self.ny;
        let z = i / (self.nx * self.ny);
        (x, y, z)
    }

    /// Center position of cell `i`, meters.
    pub fn position(&self, i: usize) -> Vec3 {
        let (x, y, z) = self.coords(i);
        Vec3::new(
            (x as f64 + 0.5) * self.dx,
            (y as f64 + 0.5) * self.dy,
            (z as f64 + 0.5) * self.dz,
        )
    }

    /// Physical extent of the mesh along each axis, meters.
    pub fn extent(&self) -> (f64, f64, f64) {
        (
            self.nx as f64 * self.dx,
            self.ny as f64 * self.dy,
            self.nz as f64 * self.dz,
        )
    }
}

/// Per-cell magnetization state.
///
/// `m[i]` is a unit direction for magnetic cells and exactly zero for vacuum
/// cells; `msat[i]` is the saturation magnetization in A/m, with `0` marking
/// vacuum. Vacuum cells never contribute to sums and never move.
#[derive(Clone, Debug)]
pub struct CellState {
    pub m: Vec<Vec3>,
    pub msat: Vec<f64>,
}

impl CellState {
    /// Fresh state with uniform `msat` everywhere and unset (zero) directions.
    /// Call [`CellState::set_uniform`] or [`CellState::set_vortex`] before
    /// stepping.
    pub fn new(mesh: &Mesh, msat: f64) -> Result<CellState, Error> {
        if !(msat >= 0.0) || !msat.is_finite() {
            return Err(Error::Invalid(format!("msat must be finite and >= 0, got {msat}")));
        }
        let n = mesh.cell_count();
        Ok(CellState { m: vec![Vec3::ZERO; n], msat: vec![msat; n] })
    }

    pub fn cell_count(&self) -> usize {
        self.m.len()
    }

    pub fn is_magnetic(&self, i: usize) -> bool {
        self.msat[i] > 0.0
    }

    pub fn magnetic_cell_count(&self) -> usize {
        self.msat.iter().filter(|&&s| s > 0.0).count()
    }

    /// Point every magnetic cell along `dir` (normalized internally).
    pub fn set_uniform(&mut self, dir: Vec3) -> Result<(), Error> {
        if dir.norm() == 0.0 || !dir.is_finite() {
            return Err(Error::Invalid(format!(
                "uniform magnetization direction must be finite and non-zero, got ({}, {}, {})",
                dir.x, dir.y, dir.z
            )));
        }
        let u = dir.normalized();
        for i in 0..self.m.len() {
            if self.is_magnetic(i) {
                self.m[i] = u;
            }
        }
        Ok(())
    }

    /// Analytic vortex seed centered on the mesh: in-plane circulation set by
    /// `chirality` (+1/-1), out-of-plane core along `polarity` (+1/-1) with a
    /// Gaussian profile of width `core_radius`. Good enough as a relaxation
    /// starting point; it is not a minimized texture.
    pub fn set_vortex(
        &mut self,
        mesh: &Mesh,
        polarity: f64,
        chirality: f64,
        core_radius: f64,
    ) -> Result<(), Error> {
        if !(core_radius > 0.0) {
            return Err(Error::Invalid(format!(
                "vortex core radius must be positive, got {core_radius}"
            )));
        }
        let (ex, ey, _) = mesh.extent();
        let cx = 0.5 * ex;
        let cy = 0.5 * ey;
        for i in 0..self.m.len() {
            if !self.is_magnetic(i) {
                continue;
            }
            let p = mesh.position(i);
            let rx = p.x - cx;
            let ry = p.y - cy;
            let rho_sq = rx * rx + ry * ry;
            let mz = polarity.signum() * (-rho_sq / (2.0 * core_radius * core_radius)).exp();
            if rho_sq == 0.0 {
                self.m[i] = Vec3::new(0.0, 0.0, polarity.signum());
                continue;
            }
            let in_plane = (1.0 - mz * mz).max(0.0).sqrt() / rho_sq.sqrt();
            self.m[i] = Vec3::new(
                -chirality.signum() * ry * in_plane,
                chirality.signum() * rx * in_plane,
                mz,
            );
        }
        Ok(())
    }

    /// Restrict the magnet to a disc in the xy-plane centered on the mesh:
    /// cells whose center lies strictly inside `radius` get `msat`, everything
    /// else becomes vacuum (msat 0, m zeroed). Returns the magnetic cell
    /// count. `radius` may not exceed half the smaller in-plane extent.
    pub fn set_disc_geometry(
        &mut self,
        mesh: &Mesh,
        radius: f64,
        msat: f64,
    ) -> Result<usize, Error> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!("disc radius must be >= 0, got {radius}")));
        }
        if !(msat > 0.0) || !msat.is_finite() {
            return Err(Error::Invalid(format!("disc msat must be positive, got {msat}")));
        }
        let (ex, ey, _) = mesh.extent();
        let max_radius = 0.5 * ex.min(ey);
        if radius > max_radius {
            return Err(Error::Invalid(format!(
                "disc radius {radius} exceeds half the in-plane extent ({max_radius})"
            )));
        }
        let cx = 0.5 * ex;
        let cy = 0.5 * ey;
        let mut count = 0;
        for i in 0..self.m.len() {
            let p = mesh.position(i);
            let dx = p.x - cx;
            let dy = p.y - cy;
            if dx * dx + dy * dy < radius * radius {
                self.msat[i] = msat;
                count += 1;
            } else {
                self.msat[i] = 0.0;
                self.m[i] = Vec3::ZERO;
            }
        }
        Ok(count)
    }

    /// Mean direction over magnetic cells, summed in index order so the
    /// result is bitwise reproducible. Zero if there are no magnetic cells.
    pub fn average_magnetization(&self) -> Vec3 {
        let mut sum = Vec3::ZERO;
        let mut count = 0u64;
        for i in 0..self.m.len() {
            if self.is_magnetic(i) {
                sum += self.m[i];
                count += 1;
            }
        }
        if count == 0 {
            Vec3::ZERO
        } else {
            sum / count as f64
        }
    }

    /// Largest |.|m| - 1.| over magnetic cells; 0 when there are none.
    pub fn max_norm_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m.len() {
            if self.is_magnetic(i) {
                worst = worst.max((self.m[i].norm() - 1.0).abs());
            }
        }
        worst
    }

    /// Rescale every magnetic cell back to unit length. Returns the largest
    /// pre-rescale |.|m| - 1.| so callers can track integrator drift.
    pub fn renormalize(&mut self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m.len() {
            if self.is_magnetic(i) {
                let n = self.m[i].norm();
                worst = worst.max((n - 1.0).abs());
                if n > 0.0 {
                    self.m[i] = self.m[i] / n;
                }
            }
        }
        worst
    }
}
