//! Turning recorded time series into physics: spectra, peak detection,
//! parameter sweeps, and anticrossing splitting extraction.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::engine::{fmt_g17, Engine, RunConfig};
use crate::{Error, HBAR};

/// Spectral window applied before the transform. `None` matches a plain
/// numerical Fourier transform; `Hann` trades amplitude accuracy for far
/// less leakage, which matters in sweeps with off-bin peaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
}

/// Magnitude spectrum over positive frequencies.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Angular frequencies, rad/s: ω_j = 2πj/(NΔt), j = 1..=N/2.
    pub frequencies: Vec<f64>,
    /// |X_j| ≥ 0 of the mean-subtracted, windowed signal.
    pub amplitudes: Vec<f64>,
    /// Grid spacing 2π/duration, rad/s.
    pub resolution: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().copied().fold(0.0, f64::max)
    }
}

/// DFT magnitude of uniformly sampled values. The mean is removed first, so
/// a constant series transforms to zeros; sampling must be uniform to 1e-9
/// relative and at least 8 points long.
pub fn fft_spectrum(t: &[f64], values: &[f64], window: Window) -> Result<Spectrum, Error> {
    if t.len() != values.len() {
        return Err(Error::Invalid(format!(
            "time and value lengths differ: {} vs {}",
            t.len(),
            values.len()
        )));
    }
    let n = t.len();
    if n < 8 {
        return Err(Error::Invalid(format!("need at least 8 samples for a spectrum, got {n}")));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("non-increasing sample times (dt = {dt})")));
    }
    for k in 1..n {
        let step = t[k] - t[k - 1];
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::Invalid(format!(
                "non-uniform sampling at index {k}: step {step} vs {dt}"
            )));
        }
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let w = match window {
                Window::None => 1.0,
                Window::Hann => {
                    let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    0.5 * (1.0 - phase.cos())
                }
            };
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();

    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let duration = n as f64 * dt;
    let resolution = 2.0 * std::f64::consts::PI / duration;
    let mut frequencies = Vec::with_capacity(half);
    let mut amplitudes = Vec::with_capacity(half);
    for j in 1..=half {
        frequencies.push(resolution * j as f64);
        amplitudes.push(buf[j].norm());
    }
    Ok(Spectrum { frequencies, amplitudes, resolution })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Strict local maxima above `min_prominence`·max(amplitude), refined by
/// 3-point parabolic interpolation on log-amplitude. Edge bins are skipped
/// (they have no two neighbors); refinement is skipped next to zero bins.
/// Returned sorted by frequency.
pub fn find_peaks(spec: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let a = &spec.amplitudes;
    let max = spec.max_amplitude();
    if !(max > 0.0) || a.len() < 3 {
        return Vec::new();
    }
    let threshold = min_prominence * max;
    let mut peaks = Vec::new();
    for i in 1..a.len() - 1 {
        if !(a[i] > a[i - 1] && a[i] > a[i + 1] && a[i] >= threshold) {
            continue;
        }
        let (frequency, amplitude) = if a[i - 1] > 0.0 && a[i + 1] > 0.0 {
            let (la, lb, lc) = (a[i - 1].ln(), a[i].ln(), a[i + 1].ln());
            let denom = la - 2.0 * lb + lc;
            // denom < 0 at a strict maximum; guard anyway
            let delta = if denom < 0.0 { (0.5 * (la - lc) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            (
                spec.frequencies[i] + delta * spec.resolution,
                (lb - 0.25 * delta * (la - lc)).exp(),
            )
        } else {
            (spec.frequencies[i], a[i])
        };
        peaks.push(Peak { frequency, amplitude });
    }
    peaks
}

/// Which engine parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Cavity frequency ω_c.
    OmegaC,
    /// Static field z-component.
    BExtZ,
    /// Coupling strength: rescales the whole B_rms map so the effective λ
    /// (see [`effective_lambda`]) equals the requested value.
    Lambda,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "omega_c" => Ok(SweepAxis::OmegaC),
            "b_ext_z" => Ok(SweepAxis::BExtZ),
            "lambda" => Ok(SweepAxis::Lambda),
            other => Err(Error::Invalid(format!(
                "unknown sweep parameter {other:?} (expected omega_c, b_ext_z, or lambda)"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::OmegaC => "omega_c",
            SweepAxis::BExtZ => "b_ext_z",
            SweepAxis::Lambda => "lambda",
        }
    }
}

/// The collective coupling realized by an engine's cavity block:
///
/// ```text
/// λ_eff = √( γ·V_c·Σ_i msat_i·|B_rms,i|² / (2ħ) )
/// ```
///
/// For the one-cell Dicke mapping this inverts `dicke_to_fields` exactly;
/// for extended maps it is the uniform-mode collective coupling. Doubling
/// msat·V_c at fixed B_rms raises λ_eff by √2.
pub fn effective_lambda(engine: &Engine) -> Result<f64, Error> {
    let cav = engine
        .cavity
        .as_ref()
        .ok_or_else(|| Error::Invalid("engine has no cavity coupling".into()))?;
    let mut sum = 0.0;
    for i in 0..engine.state.cell_count() {
        if engine.state.msat[i] > 0.0 {
            sum += engine.state.msat[i] * cav.b_rms[i].norm_sq();
        }
    }
    Ok((engine.material.gamma * cav.params.vc * sum / (2.0 * HBAR)).sqrt())
}

/// One failed sweep point.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub index: usize,
    pub param: f64,
    pub message: String,
}

/// Amplitude response on a (parameter × frequency) grid. Rows of failed
/// points are NaN-filled and recorded in `failures`.
#[derive(Clone, Debug, Default)]
pub struct ResponseMap {
    pub axis_name: String,
    pub params: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// One row per parameter value, `frequencies.len()` columns.
    pub rows: Vec<Vec<f64>>,
    /// Frequency grid spacing, rad/s (0 if no point succeeded).
    pub resolution: f64,
    pub failures: Vec<SweepFailure>,
}

impl ResponseMap {
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// CSV layout: first row is the frequency grid (corner cell empty),
    /// first column the parameter values.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<(), Error> {
        let mut header = String::new();
        for f in &self.frequencies {
            header.push(',');
            header.push_str(&fmt_g17(*f));
        }
        writeln!(w, "{header}")?;
        for (p, row) in self.params.iter().zip(&self.rows) {
            let mut line = fmt_g17(*p);
            for v in row {
                line.push(',');
                line.push_str(&fmt_g17(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn apply_axis(engine: &mut Engine, axis: SweepAxis, value: f64) -> Result<(), Error> {
    if !value.is_finite() {
        return Err(Error::Invalid(format!("sweep value {value} is not finite")));
    }
    match axis {
        SweepAxis::OmegaC => {
            if !(value > 0.0) {
                return Err(Error::Invalid(format!("omega_c must be positive, got {value}")));
            }
            let cav = engine
                .cavity
                .as_mut()
                .ok_or_else(|| Error::Invalid("sweep over omega_c requires a cavity".into()))?;
            cav.params.omega_c = value;
        }
        SweepAxis::BExtZ => {
            engine.b_ext.z = value;
            engine.enabled.zeeman = true;
        }
        SweepAxis::Lambda => {
            if value < 0.0 {
                return Err(Error::Invalid(format!("lambda must be >= 0, got {value}")));
            }
            let current = effective_lambda(engine)?;
            if !(current > 0.0) {
                return Err(Error::Invalid(
                    "cannot sweep lambda: the engine's B_rms map is zero".into(),
                ));
            }
            let factor = value / current;
            if let Some(cav) = engine.cavity.as_mut() {
                cav.b_rms.scale(factor);
            }
        }
    }
    Ok(())
}

fn run_point(
    base: &Engine,
    axis: SweepAxis,
    value: f64,
    cfg: &RunConfig,
    window: Window,
) -> Result<Spectrum, Error> {
    let mut engine = base.clone();
    apply_axis(&mut engine, axis, value)?;
    let (series, _) = engine.run(cfg)?;
    fft_spectrum(&series.t, &series.mx(), window)
}

/// Run one simulation per parameter value and collect the m_x spectra into a
/// response map. Points are independent (each gets a fresh clone of `base`)
/// and run in parallel when the `parallel` feature is on; results are
/// assembled in parameter order either way, so output is deterministic.
/// Failures don't abort the sweep: the row is NaN and the error is recorded.
pub fn sweep(
    base: &Engine,
    axis: SweepAxis,
    values: &[f64],
    cfg: &RunConfig,
    window: Window,
) -> ResponseMap {
    let results: Vec<Result<Spectrum, Error>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        results = values
            .par_iter()
            .map(|&v| run_point(base, axis, v, cfg, window))
            .collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        results = values.iter().map(|&v| run_point(base, axis, v, cfg, window)).collect();
    }

    let mut map = ResponseMap {
        axis_name: axis.name().to_string(),
        params: values.to_vec(),
        ..ResponseMap::default()
    };
    for s in results.iter().flatten() {
        map.frequencies = s.frequencies.clone();
        map.resolution = s.resolution;
        break;
    }
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => map.rows.push(s.amplitudes),
            Err(e) => {
                map.rows.push(vec![f64::NAN; map.frequencies.len()]);
                map.failures.push(SweepFailure {
                    index: i,
                    param: values[i],
                    message: e.to_string(),
                });
            }
        }
    }
    map
}

/// An extracted anticrossing.
#[derive(Clone, Copy, Debug)]
pub struct SplittingReport {
    /// Minimum peak separation over the sweep — the coupling figure 2g.
    pub two_g: f64,
    /// Parameter value at which the minimum occurs.
    pub at_param: f64,
}

/// Scan a response map for the anticrossing gap: in every row take the two
/// largest detected peaks, and report the smallest frequency gap over rows.
///
/// Needs at least 3 rows with two peaks to call it an anticrossing. In a
/// resolvable anticrossing the two branches never touch, so a single-peak
/// row *between* two-peak rows means the branches merged below what this
/// frequency grid can separate — reported as [`Error::Unresolved`], as is a
/// minimum gap smaller than the resolution.
pub fn extract_splitting(map: &ResponseMap, min_prominence: f64) -> Result<SplittingReport, Error> {
    // peak count per valid row (failed/NaN rows excluded)
    let mut counted: Vec<(usize, usize, Vec<Peak>)> = Vec::new();
    for (i, row) in map.rows.iter().enumerate() {
        if row.iter().any(|v| v.is_nan()) {
            continue;
        }
        let spec = Spectrum {
            frequencies: map.frequencies.clone(),
            amplitudes: row.clone(),
            resolution: map.resolution,
        };
        let peaks = find_peaks(&spec, min_prominence);
        counted.push((i, peaks.len(), peaks));
    }
    let rows_with_two = counted.iter().filter(|(_, n, _)| *n >= 2).count();
    if rows_with_two < 3 {
        return Err(Error::Invalid(format!(
            "anticrossing extraction needs at least 3 sweep points with two peaks; found \
             {rows_with_two}"
        )));
    }
    for (k, &(i, n, _)) in counted.iter().enumerate() {
        let before = counted[..k].iter().any(|(_, n, _)| *n >= 2);
        let after = counted[k + 1..].iter().any(|(_, n, _)| *n >= 2);
        if n < 2 && before && after {
            return Err(Error::Unresolved(format!(
                "branches merge into a single peak at {} = {:.6e}: splitting below the \
                 frequency resolution {:.3e} rad/s",
                map.axis_name, map.params[i], map.resolution
            )));
        }
    }
    let mut best: Option<SplittingReport> = None;
    for (i, _, peaks) in counted.iter().filter(|(_, n, _)| *n >= 2) {
        // two largest by amplitude
        let mut by_amp = peaks.clone();
        by_amp.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
        let gap = (by_amp[0].frequency - by_amp[1].frequency).abs();
        if best.map(|b| gap < b.two_g).unwrap_or(true) {
            best = Some(SplittingReport { two_g: gap, at_param: map.params[*i] });
        }
    }
    let report = best.expect("rows_with_two >= 3 implies a best gap");
    if report.two_g < map.resolution {
        return Err(Error::Unresolved(format!(
            "splitting {:.3e} rad/s is below the frequency resolution {:.3e} rad/s",
            report.two_g, map.resolution
        )));
    }
    Ok(report)
}

/// Zero-point rms current of an LC resonator: i_rms = ω₀·√(ħπ/(4Z₀)).
/// Documents the provenance of externally computed B_rms maps.
pub fn irms_from_circuit(omega0: f64, z0: f64, hbar: f64) -> f64 {
    omega0 * (hbar * std::f64::consts::PI / (4.0 * z0)).sqrt()
}
