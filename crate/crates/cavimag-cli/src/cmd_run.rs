//! `cavimag run`: one simulation from a config file to CSV/OVF outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;

use cavimag::config::{self, SimConfig};
use cavimag::engine::Engine;
use cavimag::fields::FieldMap;
use cavimag::ovf::{self, OvfDocument, Representation};
use cavimag::Error;

use crate::report::{timestamp, Report};
use crate::CommonArgs;

#[derive(Args)]
pub struct RunArgs {
    /// Simulation description (INI-style config)
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn enabled_terms(engine: &Engine) -> String {
    let e = &engine.enabled;
    let names: Vec<&str> = [
        ("zeeman", e.zeeman),
        ("exchange", e.exchange),
        ("anisotropy", e.anisotropy),
        ("demag", e.demag),
        ("excitation", e.excitation),
        ("cavity", e.cavity),
    ]
    .iter()
    .filter_map(|&(n, on)| on.then_some(n))
    .collect();
    if names.is_empty() {
        "(none)".to_string()
    } else {
        names.join(" ")
    }
}

fn save_magnetization(
    engine: &Engine,
    path: &Path,
    title: &str,
    repr: Representation,
) -> Result<(), Error> {
    let field = FieldMap { data: engine.state.m.clone() };
    let doc = OvfDocument::from_field(&engine.mesh, &field, title, "m", "1");
    std::fs::write(path, ovf::write_ovf(&doc, repr))
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

/// Everything between "config parsed" and "files on disk", shared with the
/// sweep front end for its banner.
pub fn describe(rep: &mut Report, cfg: &SimConfig, engine: &Engine) {
    let m = &cfg.mesh;
    rep.line(format!(
        "mesh: {} x {} x {} cells of {:.3e} x {:.3e} x {:.3e} m",
        m.nx, m.ny, m.nz, m.dx, m.dy, m.dz
    ));
    rep.line(format!(
        "cells: {} total, {} magnetic",
        engine.mesh.cell_count(),
        engine.state.magnetic_cell_count()
    ));
    let mat = &cfg.material;
    rep.line(format!(
        "material: msat = {:.6e} A/m, aex = {:.3e} J/m, ku1 = {:.3e} J/m^3, alpha = {:.3e}, gamma = {:.6e} rad/(s T)",
        mat.msat, mat.material.aex, mat.material.ku1, mat.material.alpha, mat.material.gamma
    ));
    rep.line(format!("terms: {}", enabled_terms(engine)));
    if let Some(cav) = &cfg.cavity {
        rep.line("cavity enabled".to_string());
        rep.line(format!(
            "cavity: omega_c = {:.6e} rad/s, kappa = {:.6e} rad/s, x0 = {}, p0 = {}",
            cav.omega_c, cav.kappa, cav.x0, cav.p0
        ));
    } else {
        rep.line("cavity disabled".to_string());
    }
}

pub fn exec(args: &RunArgs) -> Result<ExitCode, Error> {
    // parse and validate everything before touching the output directory, so
    // a typo'd config path leaves no stray files behind
    let cfg = config::load_config(&args.config)?;
    let mut engine = cfg.build_engine()?;
    let run_cfg = cfg.run_config()?;

    let out = &args.common.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", out.display())))?;
    let mut rep = Report::create(out, "run.log", args.common.quiet)?;

    rep.line(format!("cavimag {} run", env!("CARGO_PKG_VERSION")));
    rep.line(format!("started: {}", timestamp()));
    rep.line(format!("config: {}", args.config.display()));
    describe(&mut rep, &cfg, &engine);
    rep.line(format!(
        "plan: {} steps of {:.6e} s ({:.6e} s total), record every {}, renormalize every {}",
        run_cfg.steps,
        run_cfg.dt,
        run_cfg.dt * run_cfg.steps as f64,
        run_cfg.record_every,
        run_cfg.renormalize_every
    ));

    // autosaves happen inside the stepping loop; io errors surface afterwards
    let autosave = cfg.output.autosave_m_every;
    let repr = cfg.output.ovf_format;
    let mut autosave_err: Option<Error> = None;
    let mut autosaved = 0u64;
    let (series, summary) = engine.run_with(&run_cfg, |eng, step| {
        if autosave > 0 && step % autosave == 0 && autosave_err.is_none() {
            let path = out.join(format!("m_{step:08}.ovf"));
            match save_magnetization(eng, &path, &format!("t = {:.9e} s", eng.t), repr) {
                Ok(()) => autosaved += 1,
                Err(e) => autosave_err = Some(e),
            }
        }
    })?;
    if let Some(e) = autosave_err {
        return Err(e);
    }

    let table_path = out.join("table.csv");
    let mut file = std::fs::File::create(&table_path)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", table_path.display())))?;
    series.write_csv(&mut file)?;
    rep.line(format!("table: {} rows -> {}", series.t.len(), table_path.display()));
    if autosaved > 0 {
        rep.line(format!("autosaved magnetization: {autosaved} OVF files"));
    }
    if cfg.output.final_m {
        let path = out.join("m_final.ovf");
        save_magnetization(&engine, &path, "final state", repr)?;
        rep.line(format!("final magnetization: {}", path.display()));
    }

    let avg = engine.state.average_magnetization();
    rep.line(format!("final <m>: ({:.6e}, {:.6e}, {:.6e})", avg.x, avg.y, avg.z));
    rep.line(format!("max |m| drift before renormalization: {:.3e}", summary.max_norm_drift));
    if summary.overflow_flagged {
        rep.warn(
            "cavity memory horizon exceeded (kappa * t > 700); \
             rescaled quadratures remain finite but check the time scales",
        );
    }
    rep.line(format!("wall: {:.3} s", summary.wall_seconds));
    rep.line(format!("finished: {}", timestamp()));
    Ok(ExitCode::SUCCESS)
}
