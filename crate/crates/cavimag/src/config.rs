//! Configuration files: an INI dialect with strict keys and line-number
//! diagnostics, plus the wiring that turns a parsed config into a
//! ready-to-run [`Engine`].
//!
//! Format: `[section]` headers, `key = value` lines, full-line `#` comments,
//! blank lines ignored. No inline comments. Scalars are decimal with
//! optional exponent; 3-vectors are comma triples (`b_ext = 0, 0, 0.5`);
//! booleans are `true`/`false`. Every key must be known to its section —
//! typos are errors, not silently ignored defaults. File paths are resolved
//! relative to the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analysis::{SweepAxis, Window};
use crate::cavity::CavityParams;
use crate::engine::{Engine, RunConfig};
use crate::fields::{Excitation, FieldMap, Material, TimeProfile};
use crate::mesh::{CellState, Mesh};
use crate::ovf::{self, Representation};
use crate::{Error, Vec3};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse { line: Some(line), msg: msg.into() }
}

/// How the magnet fills the mesh.
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Every cell is magnetic.
    Full,
    /// Cylinder along z centered in the xy-plane; outside cells are vacuum.
    Disc { radius: f64 },
}

/// Initial magnetization texture.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialM {
    Uniform(Vec3),
    Vortex { polarity: f64, chirality: f64, core_radius: Option<f64> },
    /// Load directions from an OVF file (normalized per cell).
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub geometry: Geometry,
    pub m0: InitialM,
}

#[derive(Clone, Debug)]
pub struct MaterialSection {
    pub msat: f64,
    pub material: Material,
}

#[derive(Clone, Debug, Default)]
pub struct FieldsSection {
    pub b_ext: Option<Vec3>,
    pub demag: bool,
}

/// Where the zero-point field map comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum BrmsSource {
    Uniform(Vec3),
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct CavitySection {
    pub omega_c: f64,
    pub kappa: f64,
    pub b_rms: BrmsSource,
    pub x0: f64,
    pub p0: f64,
}

#[derive(Clone, Debug)]
pub struct ExcitationSection {
    pub profile: BrmsSource,
    pub time_fn: TimeProfile,
    pub scale: f64,
    pub t0: f64,
}

#[derive(Clone, Debug)]
pub struct RunSection {
    pub dt: f64,
    /// Exactly one of these is set by the parser.
    pub steps: Option<u64>,
    pub duration: Option<f64>,
    pub record_every: u64,
    pub renormalize_every: u64,
}

#[derive(Clone, Debug)]
pub struct OutputSection {
    /// Autosave the magnetization every N recorded steps (0 = off).
    pub autosave_m_every: u64,
    /// Write the final state as an OVF file.
    pub final_m: bool,
    pub ovf_format: Representation,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { autosave_m_every: 0, final_m: false, ovf_format: Representation::Binary4 }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub window: Window,
    pub min_prominence: f64,
}

/// A fully parsed and validated configuration.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub fields: FieldsSection,
    pub cavity: Option<CavitySection>,
    pub excitation: Option<ExcitationSection>,
    pub run: RunSection,
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
    /// Directory that relative file paths are resolved against.
    pub base_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// raw pass: sections of (key, value, line)

struct Entry {
    line: usize,
    value: String,
}

struct RawSection {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

const SECTIONS: &[&str] =
    &["mesh", "material", "fields", "cavity", "excitation", "run", "output", "sweep"];

fn allowed_keys(section: &str) -> &'static [&'static str] {
    match section {
        "mesh" => &[
            "nx", "ny", "nz", "dx", "dy", "dz", "geometry", "disc_radius", "m0", "m0_file",
            "vortex_polarity", "vortex_chirality", "core_radius",
        ],
        "material" => &["msat", "aex", "ku1", "anis_axis", "alpha", "gamma"],
        "fields" => &["b_ext", "demag"],
        "cavity" => &["omega_c", "kappa", "b_rms", "b_rms_file", "x0", "p0"],
        "excitation" => &["b_amp", "b_file", "time_fn", "omega", "scale", "t0"],
        "run" => &["dt", "duration", "steps", "record_every", "renormalize_every"],
        "output" => &["autosave_m_every", "final_m", "ovf_format"],
        "sweep" => &["parameter", "values", "start", "stop", "points", "window", "min_prominence"],
        _ => unreachable!("section names are checked before key lookup"),
    }
}

fn parse_raw(text: &str) -> Result<BTreeMap<String, RawSection>, Error> {
    let mut sections: BTreeMap<String, RawSection> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header {line:?}")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(
                    line_no,
                    format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", ")),
                ));
            }
            if sections.contains_key(name) {
                return Err(err(line_no, format!("duplicate section [{name}]")));
            }
            sections.insert(name.to_string(), RawSection { line: line_no, entries: BTreeMap::new() });
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, format!("expected `key = value` or `[section]`, got {line:?}")));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(err(line_no, "empty key"));
        }
        let Some(section) = &current else {
            return Err(err(line_no, format!("key {key:?} appears before any [section] header")));
        };
        if !allowed_keys(section).contains(&key) {
            return Err(err(
                line_no,
                format!(
                    "unknown key {key:?} in [{section}] (allowed: {})",
                    allowed_keys(section).join(", ")
                ),
            ));
        }
        let raw = sections.get_mut(section).expect("current section was inserted");
        if let Some(prev) = raw.entries.get(key) {
            return Err(err(
                line_no,
                format!("duplicate key {key:?} in [{section}] (first set at line {})", prev.line),
            ));
        }
        raw.entries.insert(key.to_string(), Entry { line: line_no, value: value.to_string() });
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// typed pass

struct SectionReader<'a> {
    name: &'a str,
    line: usize,
    entries: &'a BTreeMap<String, Entry>,
}

impl<'a> SectionReader<'a> {
    fn raw(&self, key: &str) -> Option<&'a Entry> {
        self.entries.get(key)
    }

    fn require(&self, key: &str) -> Result<&'a Entry, Error> {
        self.raw(key).ok_or_else(|| {
            err(self.line, format!("[{}] is missing required key `{key}`", self.name))
        })
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, Error> {
        self.raw(key).map(|e| parse_f64(e, self.name, key)).transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, Error> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn require_f64(&self, key: &str) -> Result<f64, Error> {
        parse_f64(self.require(key)?, self.name, key)
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, Error> {
        self.raw(key).map(|e| parse_u64(e, self.name, key)).transpose().map(|v| v.unwrap_or(default))
    }

    fn require_usize(&self, key: &str) -> Result<usize, Error> {
        let v = parse_u64(self.require(key)?, self.name, key)?;
        usize::try_from(v).map_err(|_| {
            err(self.raw(key).unwrap().line, format!("{}.{key}: {v} does not fit usize", self.name))
        })
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, Error> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(err(
                    e.line,
                    format!("{}.{key}: expected true or false, got {other:?}", self.name),
                )),
            },
        }
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>, Error> {
        self.raw(key).map(|e| parse_vec3(e, self.name, key)).transpose()
    }

    fn reject(&self, key: &str, why: &str) -> Result<(), Error> {
        match self.raw(key) {
            Some(e) => Err(err(e.line, format!("{}.{key}: {why}", self.name))),
            None => Ok(()),
        }
    }
}

fn parse_f64(e: &Entry, section: &str, key: &str) -> Result<f64, Error> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| err(e.line, format!("{section}.{key}: expected a number, got {:?}", e.value)))?;
    if !v.is_finite() {
        return Err(err(e.line, format!("{section}.{key}: {v} is not finite")));
    }
    Ok(v)
}

fn parse_u64(e: &Entry, section: &str, key: &str) -> Result<u64, Error> {
    e.value.parse().map_err(|_| {
        err(e.line, format!("{section}.{key}: expected a non-negative integer, got {:?}", e.value))
    })
}

fn parse_vec3(e: &Entry, section: &str, key: &str) -> Result<Vec3, Error> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(err(
            e.line,
            format!("{section}.{key}: expected three comma-separated numbers, got {:?}", e.value),
        ));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| {
            err(e.line, format!("{section}.{key}: {part:?} is not a number"))
        })?;
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn reader<'a>(
    sections: &'a BTreeMap<String, RawSection>,
    name: &'a str,
) -> Result<SectionReader<'a>, Error> {
    let raw = sections
        .get(name)
        .ok_or_else(|| Error::ConfigParse { line: None, msg: format!("missing section [{name}]") })?;
    Ok(SectionReader { name, line: raw.line, entries: &raw.entries })
}

fn reader_opt<'a>(
    sections: &'a BTreeMap<String, RawSection>,
    name: &'a str,
) -> Option<SectionReader<'a>> {
    sections
        .get(name)
        .map(|raw| SectionReader { name, line: raw.line, entries: &raw.entries })
}

fn parse_mesh(r: &SectionReader) -> Result<MeshSection, Error> {
    let nx = r.require_usize("nx")?;
    let ny = r.require_usize("ny")?;
    let nz = r.require_usize("nz")?;
    let dx = r.require_f64("dx")?;
    let dy = r.require_f64("dy")?;
    let dz = r.require_f64("dz")?;

    let geometry = match r.raw("geometry") {
        None => {
            r.reject("disc_radius", "only meaningful with geometry = disc")?;
            Geometry::Full
        }
        Some(e) => match e.value.as_str() {
            "full" => {
                r.reject("disc_radius", "only meaningful with geometry = disc")?;
                Geometry::Full
            }
            "disc" => Geometry::Disc { radius: r.require_f64("disc_radius")? },
            other => {
                return Err(err(e.line, format!("mesh.geometry: expected full or disc, got {other:?}")))
            }
        },
    };

    let m0 = match (r.raw("m0"), r.raw("m0_file")) {
        (Some(e), Some(_)) => {
            return Err(err(e.line, "mesh: set either m0 or m0_file, not both"));
        }
        (None, Some(f)) => {
            reject_vortex_keys(r)?;
            if f.value.is_empty() {
                return Err(err(f.line, "mesh.m0_file: empty path"));
            }
            InitialM::File(PathBuf::from(&f.value))
        }
        (Some(e), None) if e.value == "vortex" => InitialM::Vortex {
            polarity: r.f64_or("vortex_polarity", 1.0)?,
            chirality: r.f64_or("vortex_chirality", 1.0)?,
            core_radius: r.f64("core_radius")?,
        },
        (Some(e), None) => {
            reject_vortex_keys(r)?;
            InitialM::Uniform(parse_vec3(e, "mesh", "m0")?)
        }
        (None, None) => {
            reject_vortex_keys(r)?;
            InitialM::Uniform(Vec3::new(0.0, 0.0, 1.0))
        }
    };

    Ok(MeshSection { nx, ny, nz, dx, dy, dz, geometry, m0 })
}

fn reject_vortex_keys(r: &SectionReader) -> Result<(), Error> {
    for key in ["vortex_polarity", "vortex_chirality", "core_radius"] {
        r.reject(key, "only meaningful with m0 = vortex")?;
    }
    Ok(())
}

fn parse_material(r: &SectionReader) -> Result<MaterialSection, Error> {
    let defaults = Material::default();
    Ok(MaterialSection {
        msat: r.require_f64("msat")?,
        material: Material {
            aex: r.f64_or("aex", defaults.aex)?,
            ku1: r.f64_or("ku1", defaults.ku1)?,
            anis_axis: r.vec3("anis_axis")?.unwrap_or(defaults.anis_axis),
            alpha: r.f64_or("alpha", defaults.alpha)?,
            gamma: r.f64_or("gamma", defaults.gamma)?,
        },
    })
}

fn parse_fields(r: &SectionReader) -> Result<FieldsSection, Error> {
    Ok(FieldsSection { b_ext: r.vec3("b_ext")?, demag: r.bool_or("demag", false)? })
}

fn parse_cavity(r: &SectionReader) -> Result<CavitySection, Error> {
    let b_rms = match (r.raw("b_rms"), r.raw("b_rms_file")) {
        (Some(e), Some(_)) => {
            return Err(err(e.line, "cavity: set either b_rms or b_rms_file, not both"));
        }
        (Some(e), None) => BrmsSource::Uniform(parse_vec3(e, "cavity", "b_rms")?),
        (None, Some(f)) => {
            if f.value.is_empty() {
                return Err(err(f.line, "cavity.b_rms_file: empty path"));
            }
            BrmsSource::File(PathBuf::from(&f.value))
        }
        (None, None) => {
            return Err(err(
                r.line,
                "[cavity] needs a zero-point field source: b_rms or b_rms_file",
            ));
        }
    };
    Ok(CavitySection {
        omega_c: r.require_f64("omega_c")?,
        kappa: r.require_f64("kappa")?,
        b_rms,
        x0: r.f64_or("x0", 0.0)?,
        p0: r.f64_or("p0", 0.0)?,
    })
}

fn parse_excitation(r: &SectionReader) -> Result<ExcitationSection, Error> {
    let profile = match (r.raw("b_amp"), r.raw("b_file")) {
        (Some(e), Some(_)) => {
            return Err(err(e.line, "excitation: set either b_amp or b_file, not both"));
        }
        (Some(e), None) => BrmsSource::Uniform(parse_vec3(e, "excitation", "b_amp")?),
        (None, Some(f)) => {
            if f.value.is_empty() {
                return Err(err(f.line, "excitation.b_file: empty path"));
            }
            BrmsSource::File(PathBuf::from(&f.value))
        }
        (None, None) => {
            return Err(err(r.line, "[excitation] needs an amplitude: b_amp or b_file"));
        }
    };
    let time_fn = match r.raw("time_fn") {
        None => {
            r.reject("omega", "only meaningful with time_fn = sin or sinc")?;
            TimeProfile::Constant
        }
        Some(e) => match e.value.as_str() {
            "constant" | "none" => {
                r.reject("omega", "only meaningful with time_fn = sin or sinc")?;
                if e.value == "none" {
                    TimeProfile::None
                } else {
                    TimeProfile::Constant
                }
            }
            "sin" => TimeProfile::Sin { omega: r.require_f64("omega")? },
            "sinc" => TimeProfile::Sinc { omega_cutoff: r.require_f64("omega")? },
            other => {
                return Err(err(
                    e.line,
                    format!("excitation.time_fn: expected constant, none, sin, or sinc, got {other:?}"),
                ))
            }
        },
    };
    Ok(ExcitationSection {
        profile,
        time_fn,
        scale: r.f64_or("scale", 1.0)?,
        t0: r.f64_or("t0", 0.0)?,
    })
}

fn parse_run(r: &SectionReader) -> Result<RunSection, Error> {
    let dt = r.require_f64("dt")?;
    let steps = r.raw("steps").map(|e| parse_u64(e, "run", "steps")).transpose()?;
    let duration = r.f64("duration")?;
    match (steps, duration) {
        (Some(_), Some(_)) => {
            return Err(err(r.line, "[run] takes either steps or duration, not both"));
        }
        (None, None) => {
            return Err(err(r.line, "[run] needs a length: steps or duration"));
        }
        _ => {}
    }
    Ok(RunSection {
        dt,
        steps,
        duration,
        record_every: r.u64_or("record_every", 1)?,
        renormalize_every: r.u64_or("renormalize_every", 1)?,
    })
}

fn parse_output(r: &SectionReader) -> Result<OutputSection, Error> {
    let defaults = OutputSection::default();
    let ovf_format = match r.raw("ovf_format") {
        None => defaults.ovf_format,
        Some(e) => match e.value.as_str() {
            "text" => Representation::Text,
            "binary4" => Representation::Binary4,
            "binary8" => Representation::Binary8,
            other => {
                return Err(err(
                    e.line,
                    format!("output.ovf_format: expected text, binary4, or binary8, got {other:?}"),
                ))
            }
        },
    };
    Ok(OutputSection {
        autosave_m_every: r.u64_or("autosave_m_every", defaults.autosave_m_every)?,
        final_m: r.bool_or("final_m", defaults.final_m)?,
        ovf_format,
    })
}

fn parse_sweep(r: &SectionReader) -> Result<SweepSection, Error> {
    let param = r.require("parameter")?;
    let axis: SweepAxis = param
        .value
        .parse()
        .map_err(|e: Error| err(param.line, format!("sweep.parameter: {e}")))?;

    let values = match (r.raw("values"), r.raw("start")) {
        (Some(e), Some(_)) => {
            return Err(err(e.line, "sweep: set either values or start/stop/points, not both"));
        }
        (Some(e), None) => {
            r.reject("stop", "only meaningful with start/points")?;
            r.reject("points", "only meaningful with start/stop")?;
            let mut out = Vec::new();
            for part in e.value.split(',') {
                let part = part.trim();
                out.push(part.parse().map_err(|_| {
                    err(e.line, format!("sweep.values: {part:?} is not a number"))
                })?);
            }
            if out.is_empty() {
                return Err(err(e.line, "sweep.values: empty list"));
            }
            out
        }
        (None, Some(_)) => {
            let start = r.require_f64("start")?;
            let stop = r.require_f64("stop")?;
            let points = r.require_usize("points")?;
            if points < 2 {
                let e = r.raw("points").unwrap();
                return Err(err(e.line, format!("sweep.points: need at least 2, got {points}")));
            }
            (0..points)
                .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
                .collect()
        }
        (None, None) => {
            return Err(err(r.line, "[sweep] needs values or start/stop/points"));
        }
    };

    let window = match r.raw("window") {
        None => Window::None,
        Some(e) => match e.value.as_str() {
            "none" => Window::None,
            "hann" => Window::Hann,
            other => {
                return Err(err(e.line, format!("sweep.window: expected none or hann, got {other:?}")))
            }
        },
    };

    Ok(SweepSection {
        axis,
        values,
        window,
        min_prominence: r.f64_or("min_prominence", 0.05)?,
    })
}

/// Parse a config from text. Relative paths inside it will resolve against
/// `base_dir` (use [`load_config`] to tie that to the file's location).
pub fn parse_config(text: &str, base_dir: &Path) -> Result<SimConfig, Error> {
    let sections = parse_raw(text)?;
    let cfg = SimConfig {
        mesh: parse_mesh(&reader(&sections, "mesh")?)?,
        material: parse_material(&reader(&sections, "material")?)?,
        fields: match reader_opt(&sections, "fields") {
            Some(r) => parse_fields(&r)?,
            None => FieldsSection::default(),
        },
        cavity: reader_opt(&sections, "cavity").map(|r| parse_cavity(&r)).transpose()?,
        excitation: reader_opt(&sections, "excitation").map(|r| parse_excitation(&r)).transpose()?,
        run: parse_run(&reader(&sections, "run")?)?,
        output: match reader_opt(&sections, "output") {
            Some(r) => parse_output(&r)?,
            None => OutputSection::default(),
        },
        sweep: reader_opt(&sections, "sweep").map(|r| parse_sweep(&r)).transpose()?,
        base_dir: base_dir.to_path_buf(),
    };
    Ok(cfg)
}

/// Read and parse a config file; relative paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parse_config(&text, base)
}

impl SimConfig {
    pub fn cavity_enabled(&self) -> bool {
        self.cavity.is_some()
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_field_map(&self, path: &Path, mesh: &Mesh) -> Result<FieldMap, Error> {
        let full = self.resolve(path);
        let bytes = std::fs::read(&full)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", full.display())))?;
        let doc = ovf::parse_ovf(&bytes)?;
        Ok(ovf::map_to_mesh(&doc, mesh, None)?)
    }

    /// Integration plan from the `[run]` section.
    pub fn run_config(&self) -> Result<RunConfig, Error> {
        let cfg = match (self.run.steps, self.run.duration) {
            (Some(steps), None) => RunConfig {
                dt: self.run.dt,
                steps,
                record_every: self.run.record_every,
                renormalize_every: self.run.renormalize_every,
            },
            (None, Some(duration)) => RunConfig::from_duration(
                self.run.dt,
                duration,
                self.run.record_every,
                self.run.renormalize_every,
            )?,
            _ => unreachable!("parser enforces steps xor duration"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build the engine this config describes: mesh and geometry, initial
    /// texture, material, static field, cavity coupling, and excitation.
    pub fn build_engine(&self) -> Result<Engine, Error> {
        let ms = &self.mesh;
        let mesh = Mesh::new(ms.nx, ms.ny, ms.nz, ms.dx, ms.dy, ms.dz)?;
        let mut state = CellState::new(&mesh, self.material.msat)?;
        if let Geometry::Disc { radius } = ms.geometry {
            state.set_disc_geometry(&mesh, radius, self.material.msat)?;
        }
        match &ms.m0 {
            InitialM::Uniform(dir) => state.set_uniform(*dir)?,
            InitialM::Vortex { polarity, chirality, core_radius } => {
                let rc = core_radius.unwrap_or(2.0 * ms.dx.min(ms.dy));
                state.set_vortex(&mesh, *polarity, *chirality, rc)?;
            }
            InitialM::File(path) => {
                let map = self.load_field_map(path, &mesh)?;
                for i in 0..state.cell_count() {
                    if !state.is_magnetic(i) {
                        continue;
                    }
                    let v = map[i];
                    if !(v.norm() > 0.0) || !v.is_finite() {
                        return Err(Error::Invalid(format!(
                            "initial magnetization from {} is zero or non-finite at cell {i}",
                            path.display()
                        )));
                    }
                    state.m[i] = v.normalized();
                }
            }
        }

        let mut engine = Engine::new(mesh, state, self.material.material.clone())?;
        engine.enabled.exchange = self.material.material.aex != 0.0;
        engine.enabled.anisotropy = self.material.material.ku1 != 0.0;
        engine.enabled.demag = self.fields.demag;
        if let Some(b) = self.fields.b_ext {
            engine.set_zeeman(b);
        }

        if let Some(cav) = &self.cavity {
            let map = match &cav.b_rms {
                BrmsSource::Uniform(v) => FieldMap::uniform(engine.mesh.cell_count(), *v),
                BrmsSource::File(path) => self.load_field_map(path, &engine.mesh)?,
            };
            let params = CavityParams {
                omega_c: cav.omega_c,
                kappa: cav.kappa,
                vc: engine.mesh.cell_volume(),
                x0: cav.x0,
                p0: cav.p0,
            };
            engine.set_cavity(params, map)?;
        }

        if let Some(exc) = &self.excitation {
            let profile = match &exc.profile {
                BrmsSource::Uniform(v) => FieldMap::uniform(engine.mesh.cell_count(), *v),
                BrmsSource::File(path) => self.load_field_map(path, &engine.mesh)?,
            };
            engine.set_excitation(Excitation {
                profile,
                scale: exc.scale,
                t0: exc.t0,
                time_fn: exc.time_fn.clone(),
            })?;
        }

        Ok(engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[mesh]
nx = 1
ny = 1
nz = 1
dx = 1e-8
dy = 1e-8
dz = 1e-8

[material]
msat = 1.4e5

[run]
dt = 1e-12
steps = 100
";

    fn parse(text: &str) -> Result<SimConfig, Error> {
        parse_config(text, Path::new("."))
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::ConfigParse { line: Some(n), .. } => n,
            other => panic!("expected ConfigParse with line, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.mesh.nx, 1);
        assert_eq!(cfg.mesh.geometry, Geometry::Full);
        assert_eq!(cfg.mesh.m0, InitialM::Uniform(Vec3::new(0.0, 0.0, 1.0)));
        assert_eq!(cfg.material.msat, 1.4e5);
        assert_eq!(cfg.material.material.gamma, crate::GAMMA_DEFAULT);
        assert!(!cfg.cavity_enabled());
        assert!(cfg.sweep.is_none());
        assert_eq!(cfg.run_config().unwrap().steps, 100);
    }

    #[test]
    fn cavity_config_parses_and_defaults_quadratures_to_zero() {
        let text = format!(
            "{MINIMAL}
[cavity]
omega_c = 3.14e10
kappa = 6.28e7
b_rms = 2.7e-10, 0, 0
"
        );
        let cfg = parse(&text).unwrap();
        assert!(cfg.cavity_enabled());
        let cav = cfg.cavity.as_ref().unwrap();
        assert_eq!(cav.omega_c, 3.14e10);
        assert_eq!(cav.x0, 0.0);
        assert_eq!(cav.p0, 0.0);
        assert_eq!(cav.b_rms, BrmsSource::Uniform(Vec3::new(2.7e-10, 0.0, 0.0)));

        let engine = cfg.build_engine().unwrap();
        assert!(engine.cavity_enabled());
        let params = &engine.cavity.as_ref().unwrap().params;
        assert_eq!(params.vc, 1e-8f64 * 1e-8 * 1e-8);
    }

    #[test]
    fn type_error_reports_its_line() {
        let text = MINIMAL.replace("dt = 1e-12", "dt = fast");
        let e = parse(&text).unwrap_err();
        assert_eq!(line_of(e), 13);
    }

    #[test]
    fn unknown_key_and_section_are_rejected() {
        let text = format!("{MINIMAL}\n[mesh2]\nnx = 3\n");
        let e = parse(&text).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("unknown section"), "{msg}");

        let text = MINIMAL.replace("nx = 1", "nx_cells = 1");
        let e = parse(&text).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("unknown key") && msg.contains("nx_cells"), "{msg}");

        // ...and the required key it shadowed is then reported missing
        let text = MINIMAL.replace("msat = 1.4e5", "");
        let e = parse(&text).unwrap_err();
        assert!(e.to_string().contains("msat"), "{e}");
    }

    #[test]
    fn structural_errors_report_lines() {
        // key before any section
        let e = parse("nx = 3\n").unwrap_err();
        assert_eq!(line_of(e), 1);

        // malformed header
        let e = parse("[mesh\nnx = 3\n").unwrap_err();
        assert_eq!(line_of(e), 1);

        // junk line
        let e = parse("[mesh]\nwhat is this\n").unwrap_err();
        assert_eq!(line_of(e), 2);

        // duplicate key
        let e = parse("[mesh]\nnx = 3\nnx = 4\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("duplicate key") && msg.contains("line 2"), "{msg}");

        // duplicate section
        let e = parse("[mesh]\nnx = 3\n[mesh]\n").unwrap_err();
        assert!(e.to_string().contains("duplicate section"), "{}", e);

        // missing [run] section has no line to point at
        let upto_run = MINIMAL.split("[run]").next().unwrap();
        let e = parse(upto_run).unwrap_err();
        match e {
            Error::ConfigParse { line: None, ref msg } => {
                assert!(msg.contains("missing section [run]"), "{msg}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vec3_and_bool_validation() {
        let text = format!("{MINIMAL}\n[fields]\nb_ext = 1, 2\n");
        assert!(parse(&text).unwrap_err().to_string().contains("three comma-separated"));

        let text = format!("{MINIMAL}\n[fields]\ndemag = yes\n");
        assert!(parse(&text).unwrap_err().to_string().contains("true or false"));
    }

    #[test]
    fn run_length_is_steps_xor_duration() {
        let text = MINIMAL.replace("steps = 100", "steps = 100\nduration = 1e-9");
        assert!(parse(&text).unwrap_err().to_string().contains("not both"));

        let text = MINIMAL.replace("steps = 100", "");
        assert!(parse(&text).unwrap_err().to_string().contains("steps or duration"));

        let text = MINIMAL.replace("steps = 100", "duration = 1e-9");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.run_config().unwrap().steps, 1000);
    }

    #[test]
    fn cavity_needs_exactly_one_brms_source() {
        let text = format!("{MINIMAL}\n[cavity]\nomega_c = 1e10\nkappa = 1e7\n");
        assert!(parse(&text).unwrap_err().to_string().contains("b_rms"));

        let text = format!(
            "{MINIMAL}\n[cavity]\nomega_c = 1e10\nkappa = 1e7\nb_rms = 1e-10,0,0\nb_rms_file = x.ovf\n"
        );
        assert!(parse(&text).unwrap_err().to_string().contains("not both"));
    }

    #[test]
    fn excitation_time_profiles() {
        let text = format!(
            "{MINIMAL}\n[excitation]\nb_amp = 1e-3, 0, 0\ntime_fn = sinc\nomega = 6.3e10\nt0 = 1e-10\n"
        );
        let cfg = parse(&text).unwrap();
        let exc = cfg.excitation.as_ref().unwrap();
        assert_eq!(exc.time_fn, TimeProfile::Sinc { omega_cutoff: 6.3e10 });
        assert_eq!(exc.t0, 1e-10);

        // omega without an oscillating profile is a likely mistake
        let text = format!("{MINIMAL}\n[excitation]\nb_amp = 1e-3,0,0\nomega = 1e9\n");
        assert!(parse(&text).unwrap_err().to_string().contains("omega"));

        // sin without omega
        let text = format!("{MINIMAL}\n[excitation]\nb_amp = 1e-3,0,0\ntime_fn = sin\n");
        assert!(parse(&text).unwrap_err().to_string().contains("omega"));
    }

    #[test]
    fn sweep_section_forms() {
        let text = format!(
            "{MINIMAL}\n[sweep]\nparameter = b_ext_z\nvalues = 0.1, 0.2, 0.3\nwindow = hann\n"
        );
        let sweep = parse(&text).unwrap().sweep.unwrap();
        assert_eq!(sweep.axis, SweepAxis::BExtZ);
        assert_eq!(sweep.values, vec![0.1, 0.2, 0.3]);
        assert_eq!(sweep.window, Window::Hann);
        assert_eq!(sweep.min_prominence, 0.05);

        let text = format!(
            "{MINIMAL}\n[sweep]\nparameter = omega_c\nstart = 1e9\nstop = 2e9\npoints = 5\n"
        );
        let sweep = parse(&text).unwrap().sweep.unwrap();
        assert_eq!(sweep.values.len(), 5);
        assert_eq!(sweep.values[0], 1e9);
        assert_eq!(sweep.values[4], 2e9);
        assert_eq!(sweep.values[2], 1.5e9);

        let text = format!("{MINIMAL}\n[sweep]\nparameter = bogus\nvalues = 1\n");
        assert!(parse(&text).unwrap_err().to_string().contains("bogus"));

        let text =
            format!("{MINIMAL}\n[sweep]\nparameter = lambda\nvalues = 1, 2\nstart = 0\n");
        assert!(parse(&text).unwrap_err().to_string().contains("not both"));
    }

    #[test]
    fn disc_geometry_and_vortex_build() {
        let text = "\
[mesh]
nx = 16
ny = 16
nz = 1
dx = 5e-9
dy = 5e-9
dz = 5e-9
geometry = disc
disc_radius = 3.5e-8
m0 = vortex
vortex_polarity = -1
core_radius = 1e-8

[material]
msat = 8.6e5
aex = 1.3e-11
alpha = 0.01

[run]
dt = 1e-13
steps = 10
";
        let cfg = parse(text).unwrap();
        let engine = cfg.build_engine().unwrap();
        // disc mask leaves a proper subset of cells magnetic
        let magnetic = engine.state.magnetic_cell_count();
        assert!(magnetic > 0 && magnetic < 256, "magnetic = {magnetic}");
        // every magnetic cell is a unit vector; core polarity points down
        assert!(engine.state.max_norm_deviation() <= 1e-12);
        let center = engine.mesh.index(8, 8, 0);
        assert!(engine.state.m[center].z < 0.0);
        assert!(engine.enabled.exchange);
        assert!(!engine.enabled.demag);

        // vortex keys without m0 = vortex are rejected
        let bad = text.replace("m0 = vortex\n", "");
        assert!(parse(&bad).unwrap_err().to_string().contains("vortex"));
    }

    #[test]
    fn initial_state_loads_from_ovf_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = Mesh::new(4, 3, 1, 5e-9, 5e-9, 5e-9).unwrap();
        let mut field = FieldMap::zeros(mesh.cell_count());
        for i in 0..field.len() {
            // non-unit on purpose: the loader normalizes
            field[i] = Vec3::new(2.0, 0.0, 1.0 + i as f64);
        }
        let doc = crate::ovf::OvfDocument::from_field(&mesh, &field, "seed", "m", "1");
        std::fs::write(dir.path().join("seed.ovf"), crate::ovf::write_ovf(&doc, Representation::Binary8))
            .unwrap();

        let text = "\
[mesh]
nx = 4
ny = 3
nz = 1
dx = 5e-9
dy = 5e-9
dz = 5e-9
m0_file = seed.ovf

[material]
msat = 8e5

[run]
dt = 1e-13
duration = 1e-12
";
        let cfg_path = dir.path().join("sim.cfg");
        std::fs::write(&cfg_path, text).unwrap();
        let cfg = load_config(&cfg_path).unwrap();
        let engine = cfg.build_engine().unwrap();
        assert!(engine.state.max_norm_deviation() <= 1e-12);
        let want = Vec3::new(2.0, 0.0, 6.0).normalized();
        let got = engine.state.m[5];
        assert!((got - want).norm() <= 1e-15, "{got:?} vs {want:?}");

        // wrong grid in the file → dimension mismatch surfaces
        let text2 = text.replace("nx = 4", "nx = 5");
        let cfg_path2 = dir.path().join("sim2.cfg");
        std::fs::write(&cfg_path2, text2).unwrap();
        let e = load_config(&cfg_path2).unwrap().build_engine().unwrap_err();
        assert!(e.to_string().contains("does not match"), "{e}");
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let text = "\
# a simulation
[mesh]
  nx = 2
ny=2
nz = 1
dx = 1e-8
dy = 1e-8
dz = 1e-8
m0 = 1, 0, 0

# material block
[material]
msat = 1e5

[run]
dt = 1e-12
steps = 8
";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.mesh.ny, 2);
        assert_eq!(cfg.mesh.m0, InitialM::Uniform(Vec3::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn output_section_parses() {
        let text = format!(
            "{MINIMAL}\n[output]\nautosave_m_every = 50\nfinal_m = true\novf_format = text\n"
        );
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.output.autosave_m_every, 50);
        assert!(cfg.output.final_m);
        assert_eq!(cfg.output.ovf_format, Representation::Text);

        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.output.ovf_format, Representation::Binary4);
        assert!(!cfg.output.final_m);
    }
}
