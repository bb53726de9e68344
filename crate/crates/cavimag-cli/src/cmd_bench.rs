//! `cavimag dicke-bench`: run the engine on the single-macrospin Dicke
//! configuration and compare against the explicit ODE integration and the
//! closed-form equilibrium/polariton values.

use std::process::ExitCode;

use clap::Args;
use num_complex::Complex64;

use cavimag::analysis::{fft_spectrum, find_peaks, Window};
use cavimag::dicke::{self, DickeParams, Equilibrium};
use cavimag::engine::RunConfig;
use cavimag::{Error, Vec3, GAMMA_DEFAULT};

use crate::report::{freq, timestamp, Report};
use crate::CommonArgs;

const TAU: f64 = 2.0 * std::f64::consts::PI;
/// Macrospin cell volume used by the benchmark (1 nm^3 in m^3).
const VC: f64 = 1e-24;

#[derive(Args)]
pub struct BenchArgs {
    /// Spin (Larmor) frequency, rad/s
    #[arg(long, default_value_t = TAU * 5e9)]
    pub omega_z: f64,
    /// Cavity frequency, rad/s
    #[arg(long, default_value_t = TAU * 5e9)]
    pub omega_c: f64,
    /// Coupling strength as a fraction of the critical coupling
    #[arg(long, default_value_t = 0.3)]
    pub lambda_over_lc: f64,
    /// Cavity dissipation rate, rad/s
    #[arg(long, default_value_t = TAU * 1e7)]
    pub kappa: f64,
    /// Simulated time, s
    #[arg(long, default_value_t = 4e-8)]
    pub duration: f64,
    /// Gilbert damping
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Collective spin S; sets the macrospin moment via msat*Vc = hbar*gamma*S
    #[arg(long, default_value_t = 7500.0)]
    pub s_total: f64,
    /// Integrator steps per period of the faster frequency
    #[arg(long, default_value_t = 2048)]
    pub steps_per_period: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

/// Mean over the last quarter of the series; the transient lives earlier.
fn tail_mean(x: &[f64]) -> f64 {
    let start = x.len() - (x.len() / 4).max(1);
    let tail = &x[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

struct Check {
    name: &'static str,
    passed: Option<bool>,
    detail: String,
}

impl Check {
    fn hard(name: &'static str, passed: bool, detail: String) -> Check {
        Check { name, passed: Some(passed), detail }
    }

    fn info(name: &'static str, detail: String) -> Check {
        Check { name, passed: None, detail }
    }
}

pub fn exec(args: &BenchArgs) -> Result<ExitCode, Error> {
    let out = &args.common.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", out.display())))?;
    let mut rep = Report::create(out, "run.log", args.common.quiet)?;

    rep.line(format!("cavimag {} dicke-bench", env!("CARGO_PKG_VERSION")));
    rep.line(format!("started: {}", timestamp()));

    let lambda_c = dicke::lambda_critical(args.omega_c, args.omega_z);
    let p = DickeParams {
        omega_z: args.omega_z,
        omega_c: args.omega_c,
        lambda: args.lambda_over_lc * lambda_c,
        kappa: args.kappa,
        s_total: args.s_total,
    };
    p.validate()?;

    rep.line(format!("omega_z: {}", freq(p.omega_z)));
    rep.line(format!("omega_c: {}", freq(p.omega_c)));
    rep.line(format!("kappa:   {}", freq(p.kappa)));
    rep.line(format!(
        "lambda:  {} = {:.4} lambda_c (lambda_c = {})",
        freq(p.lambda),
        args.lambda_over_lc,
        freq(lambda_c)
    ));
    rep.line(format!("S:       {:.6e}", p.s_total));

    let equilibrium = dicke::equilibrium_mx(&p);
    let pol = dicke::polariton_frequencies(&p);
    match &equilibrium {
        Equilibrium::Normal => rep.line("equilibrium: normal phase, m_x = 0"),
        Equilibrium::Degenerate => {
            rep.line("equilibrium: exactly critical — normal and superradiant branches meet")
        }
        Equilibrium::Superradiant { mx_abs } => {
            rep.line(format!("equilibrium: superradiant, |m_x| = {mx_abs:.7}"))
        }
    }
    rep.line(format!("polaritons: lower {} / upper {}", freq(pol.lower), freq(pol.upper)));
    if pol.soft {
        rep.line("note: lower polariton is soft (frequency ~ 0) — coupling at the phase boundary");
    }

    // matched-integration comparison: engine with memory kernel vs explicit
    // spin+cavity ODE at the same dt and recording grid
    let omega_ref = p.omega_c.max(p.omega_z);
    let dt = TAU / omega_ref / args.steps_per_period as f64;
    let record_every = (args.steps_per_period / 16).max(1);
    let run_cfg = RunConfig::from_duration(dt, args.duration, record_every, 1)?;
    rep.line(format!(
        "plan: {} steps of {:.6e} s ({} per fast period, recording every {})",
        run_cfg.steps, dt, args.steps_per_period, record_every
    ));

    let mut engine = dicke::build_engine(&p, GAMMA_DEFAULT, args.alpha, VC)?;
    let (series, summary) = engine.run(&run_cfg)?;
    rep.line(format!("engine wall: {:.3} s", summary.wall_seconds));

    let tilt = 1.0_f64.to_radians();
    let m0 = Vec3::new(tilt.sin(), 0.0, tilt.cos());
    let oracle = dicke::integrate_explicit(
        &p,
        m0,
        Complex64::new(0.0, 0.0),
        args.alpha,
        dt,
        args.duration,
        record_every,
    )?;

    let fields = dicke::dicke_to_fields(&p, GAMMA_DEFAULT);
    let engine_csv = out.join("bench_engine.csv");
    let oracle_csv = out.join("bench_oracle.csv");
    let mut f = std::fs::File::create(&engine_csv)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", engine_csv.display())))?;
    series.write_csv(&mut f)?;
    let mut f = std::fs::File::create(&oracle_csv)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", oracle_csv.display())))?;
    oracle.to_time_series(fields.msat_vc / VC, fields.b_rms).write_csv(&mut f)?;
    rep.line(format!("trajectories: {} and {}", engine_csv.display(), oracle_csv.display()));

    // ---- comparison table -------------------------------------------------
    let mx_engine = series.mx();
    let mx_oracle = oracle.mx();
    let l2 = rel_l2(&mx_engine, &mx_oracle);
    let tail_engine = tail_mean(&mx_engine);
    let tail_oracle = tail_mean(&mx_oracle);

    let mut checks: Vec<Check> = Vec::new();

    if args.lambda_over_lc <= 0.5 {
        checks.push(Check::hard(
            "engine vs explicit ODE, m_x rel L2",
            l2 <= 1e-3,
            format!("{l2:.3e} (tolerance 1e-3)"),
        ));
    } else {
        // beyond the validated window the trajectories may pick different
        // attractors; report the number without judging it
        checks.push(Check::info("engine vs explicit ODE, m_x rel L2", format!("{l2:.3e}")));
    }

    match &equilibrium {
        Equilibrium::Normal if args.lambda_over_lc <= 0.9 => {
            checks.push(Check::hard(
                "long-time |m_x| (engine)",
                tail_engine.abs() <= 1e-3,
                format!("{:.3e} vs analytic 0 (tolerance 1e-3)", tail_engine.abs()),
            ));

            let spec = fft_spectrum(&series.t, &mx_engine, Window::Hann)?;
            let mut peaks = find_peaks(&spec, 0.2);
            peaks.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
            peaks.truncate(2);
            peaks.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap());
            if peaks.len() == 2 {
                let err_lo = (peaks[0].frequency - pol.lower).abs();
                let err_hi = (peaks[1].frequency - pol.upper).abs();
                checks.push(Check::hard(
                    "spectral peaks at the polariton frequencies",
                    err_lo <= spec.resolution && err_hi <= spec.resolution,
                    format!(
                        "found {} and {}; offsets {:.3e} / {:.3e} rad/s (bin {:.3e})",
                        freq(peaks[0].frequency),
                        freq(peaks[1].frequency),
                        err_lo,
                        err_hi,
                        spec.resolution
                    ),
                ));
            } else {
                checks.push(Check::hard(
                    "spectral peaks at the polariton frequencies",
                    false,
                    format!("expected 2 prominent peaks, found {}", peaks.len()),
                ));
            }
        }
        Equilibrium::Normal => {
            checks.push(Check::info(
                "long-time |m_x| (engine)",
                format!("{:.3e} — near-critical relaxation is slow, not judged", tail_engine.abs()),
            ));
        }
        Equilibrium::Degenerate => {
            checks.push(Check::info(
                "long-time |m_x| (engine)",
                format!("{:.3e} at the critical point (no unique attractor)", tail_engine.abs()),
            ));
        }
        Equilibrium::Superradiant { mx_abs } => {
            checks.push(Check::hard(
                "long-time |m_x| (engine)",
                (tail_engine.abs() - mx_abs).abs() <= 0.01,
                format!("{:.5} vs analytic {:.5} (tolerance 0.01)", tail_engine.abs(), mx_abs),
            ));
            checks.push(Check::hard(
                "long-time |m_x| (explicit ODE)",
                (tail_oracle.abs() - mx_abs).abs() <= 0.01,
                format!("{:.5} vs analytic {:.5} (tolerance 0.01)", tail_oracle.abs(), mx_abs),
            ));
            if tail_engine.signum() != tail_oracle.signum() {
                rep.line("note: engine and ODE settled on opposite-sign attractors");
            }
        }
    }

    rep.line(format!("final m_x: engine {tail_engine:.6e}, explicit ODE {tail_oracle:.6e}"));

    let mut failed = false;
    for c in &checks {
        match c.passed {
            Some(true) => rep.line(format!("check {}: PASS ({})", c.name, c.detail)),
            Some(false) => {
                failed = true;
                rep.line(format!("check {}: FAIL ({})", c.name, c.detail));
            }
            None => rep.line(format!("check {}: ---- ({})", c.name, c.detail)),
        }
    }

    rep.line(format!("finished: {}", timestamp()));
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
