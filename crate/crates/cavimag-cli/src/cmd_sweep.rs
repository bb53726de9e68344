//! `cavimag sweep`: repeated runs over a parameter grid, spectral response
//! map, and anticrossing splitting extraction.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use cavimag::analysis::{self, Window};
use cavimag::config;
use cavimag::Error;

use crate::report::{freq, timestamp, Report};
use crate::CommonArgs;

#[derive(Args)]
pub struct SweepArgs {
    /// Simulation description with a [sweep] section
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn exec(args: &SweepArgs) -> Result<ExitCode, Error> {
    // parse and validate everything before touching the output directory, so
    // a typo'd config path leaves no stray files behind
    let cfg = config::load_config(&args.config)?;
    let Some(sweep) = &cfg.sweep else {
        return Err(Error::Invalid(format!(
            "{} has no [sweep] section; `cavimag run` runs a single point",
            args.config.display()
        )));
    };
    let engine = cfg.build_engine()?;
    let run_cfg = cfg.run_config()?;

    let out = &args.common.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", out.display())))?;
    let mut rep = Report::create(out, "run.log", args.common.quiet)?;

    rep.line(format!("cavimag {} sweep", env!("CARGO_PKG_VERSION")));
    rep.line(format!("started: {}", timestamp()));
    rep.line(format!("config: {}", args.config.display()));
    crate::cmd_run::describe(&mut rep, &cfg, &engine);
    rep.line(format!(
        "sweep: {} over {} values in [{:.6e}, {:.6e}], window {}",
        sweep.axis.name(),
        sweep.values.len(),
        sweep.values.iter().copied().fold(f64::INFINITY, f64::min),
        sweep.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        match sweep.window {
            Window::None => "none",
            Window::Hann => "hann",
        }
    ));
    rep.line(format!(
        "plan per point: {} steps of {:.6e} s, record every {}",
        run_cfg.steps, run_cfg.dt, run_cfg.record_every
    ));

    let map = analysis::sweep(&engine, sweep.axis, &sweep.values, &run_cfg, sweep.window);
    for f in &map.failures {
        rep.warn(format!(
            "point {} ({} = {:.6e}) failed: {}",
            f.index,
            sweep.axis.name(),
            f.param,
            f.message
        ));
    }
    if !map.failures.is_empty() && map.failures.len() == sweep.values.len() {
        return Err(Error::Invalid("every sweep point failed; no map to write".into()));
    }

    let map_path = out.join("map.csv");
    let mut file = std::fs::File::create(&map_path)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", map_path.display())))?;
    map.write_csv(&mut file)?;
    rep.line(format!(
        "map: {} parameter rows x {} frequency bins -> {}",
        map.params.len(),
        map.frequencies.len(),
        map_path.display()
    ));
    rep.line(format!("frequency resolution: {}", freq(map.resolution)));

    match analysis::extract_splitting(&map, sweep.min_prominence) {
        Ok(report) => {
            rep.line(format!(
                "splitting: 2g = {} at {} = {:.6e}",
                freq(report.two_g),
                sweep.axis.name(),
                report.at_param
            ));
        }
        Err(Error::Unresolved(msg)) => rep.line(format!("splitting: unresolved ({msg})")),
        Err(e) => rep.line(format!("splitting: not extracted ({e})")),
    }

    rep.line(format!("finished: {}", timestamp()));
    Ok(ExitCode::SUCCESS)
}
