//! Time integration: LLG right-hand side, fixed-step RK4, and the run loop.

use std::io::{BufRead, Write as IoWrite};
use std::time::Instant;

use crate::cavity::{self, CavityParams, MemoryAccumulators};
use crate::fields::{self, Excitation, FieldMap, Material, DEMAG_CELL_LIMIT};
use crate::mesh::{CellState, Mesh};
use crate::{Error, Vec3};

/// Landau-Lifshitz-Gilbert right-hand side for one cell:
///
/// ```text
/// dm/dt = -γ/(1+α²) [ m × B + α m × (m × B) ]
/// ```
///
/// `gamma > 0`, `b` in tesla. The result is tangent to `m` by construction.
pub fn llg_rhs(m: Vec3, b: Vec3, gamma: f64, alpha: f64) -> Vec3 {
    let pref = -gamma / (1.0 + alpha * alpha);
    let mxb = m.cross(b);
    pref * (mxb + alpha * m.cross(mxb))
}

/// Which effective-field contributions participate. All off by default;
/// they are summed in a fixed order (zeeman, exchange, anisotropy, demag,
/// excitation, cavity) so runs are bitwise reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct Contributions {
    pub zeeman: bool,
    pub exchange: bool,
    pub anisotropy: bool,
    pub demag: bool,
    pub excitation: bool,
    pub cavity: bool,
}

/// Cavity coupling bundle: parameters, the spatial `B_rms` profile, and the
/// running memory quadratures.
#[derive(Clone, Debug)]
pub struct CavityCoupling {
    pub params: CavityParams,
    pub b_rms: FieldMap,
    pub acc: MemoryAccumulators,
}

/// Fixed-step run settings.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub dt: f64,
    pub steps: u64,
    /// Record a table row every this many steps (the initial state is always
    /// recorded).
    pub record_every: u64,
    /// Rescale |m| back to 1 every this many steps.
    pub renormalize_every: u64,
}

impl RunConfig {
    /// Convenience: number of steps from a wall duration in seconds,
    /// rounded to the nearest whole step.
    pub fn from_duration(
        dt: f64,
        duration: f64,
        record_every: u64,
        renormalize_every: u64,
    ) -> Result<RunConfig, Error> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Invalid(format!("duration must be positive, got {duration}")));
        }
        let steps = (duration / dt).round();
        if steps < 1.0 {
            return Err(Error::Invalid(format!(
                "duration {duration} is shorter than one step dt = {dt}"
            )));
        }
        let cfg = RunConfig { dt, steps: steps as u64, record_every, renormalize_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::Invalid("steps must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be >= 1".into()));
        }
        if self.renormalize_every == 0 {
            return Err(Error::Invalid("renormalize_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recorded table: one row per recorded step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    /// Average magnetization over magnetic cells.
    pub m: Vec<Vec3>,
    pub gamma: Vec<f64>,
    pub overlap: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn mx(&self) -> Vec<f64> {
        self.m.iter().map(|v| v.x).collect()
    }

    /// Write as CSV with the fixed header `t,mx,my,mz,gamma,overlap`.
    /// Values carry 17 significant digits so f64 round-trips exactly.
    pub fn write_csv<W: IoWrite>(&self, w: &mut W) -> Result<(), Error> {
        writeln!(w, "t,mx,my,mz,gamma,overlap")?;
        for k in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_g17(self.t[k]),
                fmt_g17(self.m[k].x),
                fmt_g17(self.m[k].y),
                fmt_g17(self.m[k].z),
                fmt_g17(self.gamma[k]),
                fmt_g17(self.overlap[k]),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parse a CSV produced by [`TimeSeries::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<TimeSeries, Error> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Invalid("time series CSV is empty".into()))??;
        if header.trim() != "t,mx,my,mz,gamma,overlap" {
            return Err(Error::Invalid(format!(
                "unexpected time series header: {header:?}"
            )));
        }
        let mut out = TimeSeries::default();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Invalid(format!(
                    "time series row {}: expected 6 columns, got {}",
                    n + 2,
                    cols.len()
                )));
            }
            let mut vals = [0.0f64; 6];
            for (j, c) in cols.iter().enumerate() {
                vals[j] = c.trim().parse().map_err(|e| {
                    Error::Invalid(format!("time series row {}: bad float {c:?}: {e}", n + 2))
                })?;
            }
            out.t.push(vals[0]);
            out.m.push(Vec3::new(vals[1], vals[2], vals[3]));
            out.gamma.push(vals[4]);
            out.overlap.push(vals[5]);
        }
        Ok(out)
    }
}

/// 17 significant digits; canonicalizes -0.0 so equal values print equally.
pub(crate) fn fmt_g17(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

/// What a run did, for logs and summaries. Wall time is the only
/// non-deterministic field and deliberately stays out of the CSV.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: u64,
    pub wall_seconds: f64,
    /// Largest |.|m|-1.| seen right before a renormalization.
    pub max_norm_drift: f64,
    /// Memory recursion crossed κ·t = 700 (see cavity module docs).
    pub overflow_flagged: bool,
}

/// The simulator: mesh + state + field contributions + clocks + scratch.
#[derive(Clone, Debug)]
pub struct Engine {
    pub mesh: Mesh,
    pub state: CellState,
    pub material: Material,
    pub enabled: Contributions,
    pub b_ext: Vec3,
    pub excitation: Option<Excitation>,
    pub cavity: Option<CavityCoupling>,
    /// Global simulation clock, seconds. The cavity keeps its own clock in
    /// `cavity.acc.t_last`, which restarts on [`Engine::reset_memory`].
    pub t: f64,
    // preallocated integrator scratch
    scratch: CellState,
    b_work: FieldMap,
    k1: Vec<Vec3>,
    k2: Vec<Vec3>,
    k3: Vec<Vec3>,
    k4: Vec<Vec3>,
}

impl Engine {
    pub fn new(mesh: Mesh, state: CellState, material: Material) -> Result<Engine, Error> {
        let n = mesh.cell_count();
        if state.cell_count() != n {
            return Err(Error::Invalid(format!(
                "state has {} cells but mesh has {n}",
                state.cell_count()
            )));
        }
        if !(material.gamma > 0.0) || !material.gamma.is_finite() {
            return Err(Error::Invalid(format!(
                "gyromagnetic ratio must be positive, got {}",
                material.gamma
            )));
        }
        if !(material.alpha >= 0.0) || !material.alpha.is_finite() {
            return Err(Error::Invalid(format!(
                "Gilbert damping must be >= 0, got {}",
                material.alpha
            )));
        }
        let scratch = state.clone();
        Ok(Engine {
            mesh,
            state,
            material,
            enabled: Contributions::default(),
            b_ext: Vec3::ZERO,
            excitation: None,
            cavity: None,
            t: 0.0,
            scratch,
            b_work: FieldMap::zeros(n),
            k1: vec![Vec3::ZERO; n],
            k2: vec![Vec3::ZERO; n],
            k3: vec![Vec3::ZERO; n],
            k4: vec![Vec3::ZERO; n],
        })
    }

    pub fn set_zeeman(&mut self, b_ext: Vec3) {
        self.b_ext = b_ext;
        self.enabled.zeeman = true;
    }

    pub fn set_cavity(&mut self, params: CavityParams, b_rms: FieldMap) -> Result<(), Error> {
        params.validate()?;
        if b_rms.len() != self.mesh.cell_count() {
            return Err(Error::Invalid(format!(
                "B_rms map has {} cells but mesh has {}",
                b_rms.len(),
                self.mesh.cell_count()
            )));
        }
        self.cavity = Some(CavityCoupling { params, b_rms, acc: MemoryAccumulators::new() });
        self.enabled.cavity = true;
        Ok(())
    }

    pub fn set_excitation(&mut self, exc: Excitation) -> Result<(), Error> {
        if exc.profile.len() != self.mesh.cell_count() {
            return Err(Error::Invalid(format!(
                "excitation profile has {} cells but mesh has {}",
                exc.profile.len(),
                self.mesh.cell_count()
            )));
        }
        self.excitation = Some(exc);
        self.enabled.excitation = true;
        Ok(())
    }

    pub fn cavity_enabled(&self) -> bool {
        self.enabled.cavity && self.cavity.is_some()
    }

    /// Forget the cavity history and restart its clock at zero. The committed
    /// magnetization and the global clock are untouched, so a run after a
    /// reset behaves exactly like a fresh run started from the current state.
    pub fn reset_memory(&mut self) {
        if let Some(c) = &mut self.cavity {
            c.acc.reset();
        }
    }

    /// Γ at the current cavity clock (0 when no cavity is attached).
    pub fn gamma_now(&self) -> f64 {
        match &self.cavity {
            Some(c) if self.enabled.cavity => cavity::gamma(&c.acc, c.acc.t_last, &c.params),
            _ => 0.0,
        }
    }

    /// Overlap `Σ msat m · B_rms` of the committed state (0 without cavity).
    pub fn overlap_now(&self) -> f64 {
        match &self.cavity {
            Some(c) if self.enabled.cavity => cavity::weighted_overlap(&self.state, &c.b_rms),
            _ => 0.0,
        }
    }

    /// Sanity checks before stepping; cheap enough to run once per `run`.
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.mesh.cell_count();
        let magnetic = self.state.magnetic_cell_count();
        if magnetic == 0 {
            return Err(Error::Invalid("no magnetic cells (everything is vacuum)".into()));
        }
        if self.state.max_norm_deviation() > 1e-3 {
            return Err(Error::Invalid(
                "magnetization is not normalized; set an initial state first".into(),
            ));
        }
        if self.enabled.demag && n > DEMAG_CELL_LIMIT {
            return Err(Error::Invalid(format!(
                "demag uses a direct O(N^2) dipole sum and is limited to {DEMAG_CELL_LIMIT} \
                 cells; this mesh has {n}. Disable demag or shrink the mesh."
            )));
        }
        if self.enabled.cavity {
            match &self.cavity {
                None => {
                    return Err(Error::Invalid(
                        "cavity contribution enabled but no cavity configured".into(),
                    ))
                }
                Some(c) => {
                    c.params.validate()?;
                    if c.b_rms.len() != n {
                        return Err(Error::Invalid("B_rms map size mismatch".into()));
                    }
                    let vol = self.mesh.cell_volume();
                    if (c.params.vc - vol).abs() > 1e-9 * vol {
                        return Err(Error::Invalid(format!(
                            "cavity params carry cell volume {} but the mesh cell volume is {vol}",
                            c.params.vc
                        )));
                    }
                }
            }
        }
        if self.enabled.excitation && self.excitation.is_none() {
            return Err(Error::Invalid(
                "excitation contribution enabled but no excitation configured".into(),
            ));
        }
        Ok(())
    }

    /// Effective field of the committed state at the current clocks,
    /// contributions summed in the fixed order. Fresh map; not the hot path.
    pub fn effective_field(&self) -> FieldMap {
        let mut out = FieldMap::zeros(self.mesh.cell_count());
        let t_cav = self.cavity.as_ref().map(|c| c.acc.t_last).unwrap_or(0.0);
        eval_field(
            &self.mesh,
            &self.state,
            &self.enabled,
            self.b_ext,
            self.material.aex,
            self.material.ku1,
            self.material.anis_axis,
            self.excitation.as_ref(),
            self.cavity.as_ref(),
            self.t,
            t_cav,
            &mut out,
        );
        out
    }

    /// One RK4 step of length `dt`. The cavity field at stage times uses the
    /// frozen quadratures (decayed to the stage time); after the state update
    /// the memory is advanced once with the overlap of the *new* state. Does
    /// not renormalize -- that cadence belongs to [`Engine::run`].
    pub fn step_rk4(&mut self, dt: f64) -> Result<(), Error> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        self.step_core(dt, self.t + dt)
    }

    fn step_core(&mut self, dt: f64, t_next_global: f64) -> Result<(), Error> {
        let n = self.mesh.cell_count();
        let t = self.t;
        self.scratch.msat.copy_from_slice(&self.state.msat);

        // stage 1 at (t, m_n)
        self.scratch.m.copy_from_slice(&self.state.m);
        self.stage_rhs(t, 0.0, StageBuf::K1);
        // stage 2 at (t + dt/2, m_n + dt/2 k1)
        for i in 0..n {
            self.scratch.m[i] = self.state.m[i] + self.k1[i] * (0.5 * dt);
        }
        self.stage_rhs(t + 0.5 * dt, 0.5 * dt, StageBuf::K2);
        // stage 3 at (t + dt/2, m_n + dt/2 k2)
        for i in 0..n {
            self.scratch.m[i] = self.state.m[i] + self.k2[i] * (0.5 * dt);
        }
        self.stage_rhs(t + 0.5 * dt, 0.5 * dt, StageBuf::K3);
        // stage 4 at (t + dt, m_n + dt k3)
        for i in 0..n {
            self.scratch.m[i] = self.state.m[i] + self.k3[i] * dt;
        }
        self.stage_rhs(t + dt, dt, StageBuf::K4);

        let w = dt / 6.0;
        for i in 0..n {
            self.state.m[i] +=
                (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]) * w;
        }

        // right-endpoint memory update on the new state
        if self.enabled.cavity {
            if let Some(c) = &mut self.cavity {
                let overlap = cavity::weighted_overlap(&self.state, &c.b_rms);
                let t_cav = c.acc.t_last + dt;
                cavity::update_memory(&mut c.acc, overlap, t_cav, dt, &c.params)?;
            }
        }
        self.t = t_next_global;
        Ok(())
    }

    /// Evaluate the RHS at the scratch state into the chosen stage buffer.
    /// `cav_offset` is the stage time relative to the last memory update.
    fn stage_rhs(&mut self, t_global: f64, cav_offset: f64, which: StageBuf) {
        self.b_work.fill(Vec3::ZERO);
        let t_cav = self.cavity.as_ref().map(|c| c.acc.t_last + cav_offset).unwrap_or(0.0);
        eval_field(
            &self.mesh,
            &self.scratch,
            &self.enabled,
            self.b_ext,
            self.material.aex,
            self.material.ku1,
            self.material.anis_axis,
            self.excitation.as_ref(),
            self.cavity.as_ref(),
            t_global,
            t_cav,
            &mut self.b_work,
        );
        let k = match which {
            StageBuf::K1 => &mut self.k1,
            StageBuf::K2 => &mut self.k2,
            StageBuf::K3 => &mut self.k3,
            StageBuf::K4 => &mut self.k4,
        };
        let gamma = self.material.gamma;
        let alpha = self.material.alpha;
        for i in 0..self.scratch.m.len() {
            k[i] = if self.scratch.msat[i] > 0.0 {
                llg_rhs(self.scratch.m[i], self.b_work[i], gamma, alpha)
            } else {
                Vec3::ZERO
            };
        }
    }

    /// Integrate `cfg.steps` steps, recording every `record_every` steps
    /// (the initial state included). Returns the table and a summary.
    pub fn run(&mut self, cfg: &RunConfig) -> Result<(TimeSeries, RunSummary), Error> {
        self.run_with(cfg, |_, _| {})
    }

    /// Like [`Engine::run`] with a callback invoked after every completed
    /// step -- snapshot writers hang off this.
    pub fn run_with(
        &mut self,
        cfg: &RunConfig,
        mut on_step: impl FnMut(&Engine, u64),
    ) -> Result<(TimeSeries, RunSummary), Error> {
        cfg.validate()?;
        self.validate()?;
        let started = Instant::now();
        let t_base = self.t;
        let mut series = TimeSeries::default();
        let mut max_drift = 0.0f64;

        let record = |engine: &Engine, series: &mut TimeSeries| {
            series.t.push(engine.t);
            series.m.push(engine.state.average_magnetization());
            series.gamma.push(engine.gamma_now());
            series.overlap.push(engine.overlap_now());
        };
        record(self, &mut series);

        for k in 1..=cfg.steps {
            // exact stepping: the clock is k*dt past the run start, not an
            // accumulation of dt's
            let t_next = t_base + k as f64 * cfg.dt;
            self.step_core(cfg.dt, t_next)?;
            if k % cfg.renormalize_every == 0 {
                max_drift = max_drift.max(self.state.renormalize());
            }
            if k % cfg.record_every == 0 {
                record(self, &mut series);
            }
            on_step(self, k);
        }

        let summary = RunSummary {
            steps: cfg.steps,
            wall_seconds: started.elapsed().as_secs_f64(),
            max_norm_drift: max_drift,
            overflow_flagged: self
                .cavity
                .as_ref()
                .map(|c| c.acc.overflow_flagged)
                .unwrap_or(false),
        };
        Ok((series, summary))
    }
}

enum StageBuf {
    K1,
    K2,
    K3,
    K4,
}

/// Sum the enabled contributions into `out` in the canonical order.
#[allow(clippy::too_many_arguments)]
fn eval_field(
    mesh: &Mesh,
    state: &CellState,
    enabled: &Contributions,
    b_ext: Vec3,
    aex: f64,
    ku1: f64,
    anis_axis: Vec3,
    excitation: Option<&Excitation>,
    cav: Option<&CavityCoupling>,
    t_global: f64,
    t_cavity: f64,
    out: &mut FieldMap,
) {
    if enabled.zeeman {
        fields::zeeman_field(out, b_ext);
    }
    if enabled.exchange {
        fields::exchange_field(out, mesh, state, aex);
    }
    if enabled.anisotropy {
        fields::anisotropy_field(out, state, ku1, anis_axis);
    }
    if enabled.demag {
        fields::demag_field(out, mesh, state);
    }
    if enabled.excitation {
        if let Some(exc) = excitation {
            fields::excitation_field(out, exc, t_global);
        }
    }
    if enabled.cavity {
        if let Some(c) = cav {
            let g = cavity::gamma(&c.acc, t_cavity, &c.params);
            cavity::cavity_field(out, &c.b_rms, g);
        }
    }
}
