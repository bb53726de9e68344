//! OVF 2.0 vector-field files: the interchange format for B_rms maps,
//! excitation shapes, and magnetization snapshots.
//!
//! Only OVF 2.0 with `valuedim: 3` and rectangular meshes is supported —
//! that is what Mumax3 and the field-solver export chain emit. OVF 1.0 is
//! rejected outright. Binary payloads are little-endian and start with the
//! standard check values (1234567.0 as f32, 123456789012345.0 as f64).
//! No resampling: a map must match the target mesh exactly (see
//! [`map_to_mesh`]).

use crate::engine::fmt_g17;
use crate::fields::FieldMap;
use crate::mesh::Mesh;
use crate::Vec3;

pub const CHECK_VALUE_B4: f32 = 1234567.0;
pub const CHECK_VALUE_B8: f64 = 123456789012345.0;

/// Cap on declared node counts: rejects absurd headers before any allocation
/// (fuzzed inputs must fail cleanly, not OOM).
const MAX_NODES: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Text,
    Binary4,
    Binary8,
}

impl Representation {
    fn label(self) -> &'static str {
        match self {
            Representation::Text => "Text",
            Representation::Binary4 => "Binary 4",
            Representation::Binary8 => "Binary 8",
        }
    }
}

#[derive(Debug)]
pub enum OvfError {
    BadMagic { offset: usize, found: String },
    /// The file is OVF, but not 2.0 (OVF 1.x is deliberately unsupported).
    UnsupportedVersion { offset: usize, found: String },
    MissingHeader { key: &'static str },
    BadHeaderValue { offset: usize, key: String, text: String },
    UnsupportedMeshType { offset: usize, found: String },
    UnsupportedValueDim { offset: usize, found: String },
    UnsupportedRepresentation { offset: usize, found: String },
    HeaderTooLarge { offset: usize, nodes: (usize, usize, usize) },
    CheckValueMismatch { offset: usize, expected: f64, found: f64 },
    Truncated { offset: usize, needed: usize, available: usize },
    NodeCountMismatch { offset: usize, declared: usize, found: usize },
    BadDataValue { offset: usize, text: String },
    MissingEnd { offset: usize },
    MissingData,
    DimensionMismatch { doc: (usize, usize, usize), mesh: (usize, usize, usize) },
    StepMismatch { axis: char, doc: f64, mesh: f64, tolerance: f64 },
}

impl std::fmt::Display for OvfError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use OvfError::*;
        match self {
            BadMagic { offset, found } => {
                write!(f, "byte {offset}: not an OVF 2.0 file (first line {found:?})")
            }
            UnsupportedVersion { offset, found } => write!(
                f,
                "byte {offset}: unsupported OVF version {found:?}; only OVF 2.0 is supported"
            ),
            MissingHeader { key } => write!(f, "missing required header {key:?}"),
            BadHeaderValue { offset, key, text } => {
                write!(f, "byte {offset}: bad value for header {key:?}: {text:?}")
            }
            UnsupportedMeshType { offset, found } => {
                write!(f, "byte {offset}: unsupported meshtype {found:?} (want rectangular)")
            }
            UnsupportedValueDim { offset, found } => {
                write!(f, "byte {offset}: unsupported valuedim {found:?} (want 3)")
            }
            UnsupportedRepresentation { offset, found } => {
                write!(f, "byte {offset}: unknown data representation {found:?}")
            }
            HeaderTooLarge { offset, nodes } => write!(
                f,
                "byte {offset}: declared node count {}x{}x{} exceeds the supported size",
                nodes.0, nodes.1, nodes.2
            ),
            CheckValueMismatch { offset, expected, found } => write!(
                f,
                "byte {offset}: binary check value mismatch: expected {expected}, found {found}"
            ),
            Truncated { offset, needed, available } => write!(
                f,
                "byte {offset}: truncated payload: need {needed} bytes, {available} available"
            ),
            NodeCountMismatch { offset, declared, found } => write!(
                f,
                "byte {offset}: data has {found} vectors but the header declares {declared}"
            ),
            BadDataValue { offset, text } => {
                write!(f, "byte {offset}: bad data value {text:?}")
            }
            MissingEnd { offset } => write!(f, "byte {offset}: missing '# End: Data' marker"),
            MissingData => write!(f, "no '# Begin: Data' section found"),
            DimensionMismatch { doc, mesh } => write!(
                f,
                "OVF grid {}x{}x{} does not match the mesh {}x{}x{}",
                doc.0, doc.1, doc.2, mesh.0, mesh.1, mesh.2
            ),
            StepMismatch { axis, doc, mesh, tolerance } => write!(
                f,
                "{axis}-stepsize {doc} differs from the mesh cell size {mesh} beyond \
                 tolerance {tolerance}"
            ),
        }
    }
}

impl std::error::Error for OvfError {}

/// An OVF 2.0 segment: header fields plus the flat x-fastest payload.
#[derive(Clone, Debug, PartialEq)]
pub struct OvfDocument {
    pub title: String,
    pub desc: Vec<String>,
    pub meshunit: String,
    pub valuelabels: String,
    pub valueunits: String,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub xbase: f64,
    pub ybase: f64,
    pub zbase: f64,
    pub xmin: f64,
    pub ymin: f64,
    pub zmin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub zmax: f64,
    /// x-fastest, length nx·ny·nz.
    pub data: Vec<Vec3>,
}

impl OvfDocument {
    pub fn node_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Package a field defined on `mesh` as a document with Mumax-style
    /// metadata: labels `<base>_x <base>_y <base>_z`, one unit per component.
    pub fn from_field(
        mesh: &Mesh,
        field: &FieldMap,
        title: &str,
        label_base: &str,
        unit: &str,
    ) -> OvfDocument {
        assert_eq!(field.len(), mesh.cell_count(), "field does not fit the mesh");
        let (ex, ey, ez) = mesh.extent();
        OvfDocument {
            title: title.to_string(),
            desc: Vec::new(),
            meshunit: "m".to_string(),
            valuelabels: format!("{label_base}_x {label_base}_y {label_base}_z"),
            valueunits: format!("{unit} {unit} {unit}"),
            nx: mesh.nx,
            ny: mesh.ny,
            nz: mesh.nz,
            dx: mesh.dx,
            dy: mesh.dy,
            dz: mesh.dz,
            xbase: mesh.dx / 2.0,
            ybase: mesh.dy / 2.0,
            zbase: mesh.dz / 2.0,
            xmin: 0.0,
            ymin: 0.0,
            zmin: 0.0,
            xmax: ex,
            ymax: ey,
            zmax: ez,
            data: field.data.clone(),
        }
    }
}

/// Serialize with the canonical Mumax3 header layout, LF line endings, and
/// little-endian binary payloads. Deterministic: same document, same bytes.
pub fn write_ovf(doc: &OvfDocument, repr: Representation) -> Vec<u8> {
    let mut out = Vec::new();
    let line = |s: String, out: &mut Vec<u8>| {
        out.extend_from_slice(s.as_bytes());
        out.push(b'\n');
    };
    line("# OOMMF OVF 2.0".into(), &mut out);
    line("# Segment count: 1".into(), &mut out);
    line("# Begin: Segment".into(), &mut out);
    line("# Begin: Header".into(), &mut out);
    line(format!("# Title: {}", doc.title), &mut out);
    line("# meshtype: rectangular".into(), &mut out);
    line(format!("# meshunit: {}", doc.meshunit), &mut out);
    line(format!("# xmin: {}", fmt_g17(doc.xmin)), &mut out);
    line(format!("# ymin: {}", fmt_g17(doc.ymin)), &mut out);
    line(format!("# zmin: {}", fmt_g17(doc.zmin)), &mut out);
    line(format!("# xmax: {}", fmt_g17(doc.xmax)), &mut out);
    line(format!("# ymax: {}", fmt_g17(doc.ymax)), &mut out);
    line(format!("# zmax: {}", fmt_g17(doc.zmax)), &mut out);
    line("# valuedim: 3".into(), &mut out);
    line(format!("# valuelabels: {}", doc.valuelabels), &mut out);
    line(format!("# valueunits: {}", doc.valueunits), &mut out);
    for d in &doc.desc {
        line(format!("# Desc: {d}"), &mut out);
    }
    line(format!("# xbase: {}", fmt_g17(doc.xbase)), &mut out);
    line(format!("# ybase: {}", fmt_g17(doc.ybase)), &mut out);
    line(format!("# zbase: {}", fmt_g17(doc.zbase)), &mut out);
    line(format!("# xnodes: {}", doc.nx), &mut out);
    line(format!("# ynodes: {}", doc.ny), &mut out);
    line(format!("# znodes: {}", doc.nz), &mut out);
    line(format!("# xstepsize: {}", fmt_g17(doc.dx)), &mut out);
    line(format!("# ystepsize: {}", fmt_g17(doc.dy)), &mut out);
    line(format!("# zstepsize: {}", fmt_g17(doc.dz)), &mut out);
    line("# End: Header".into(), &mut out);
    line(format!("# Begin: Data {}", repr.label()), &mut out);
    match repr {
        Representation::Text => {
            for v in &doc.data {
                line(format!("{} {} {}", fmt_g17(v.x), fmt_g17(v.y), fmt_g17(v.z)), &mut out);
            }
        }
        Representation::Binary4 => {
            out.extend_from_slice(&CHECK_VALUE_B4.to_le_bytes());
            for v in &doc.data {
                out.extend_from_slice(&(v.x as f32).to_le_bytes());
                out.extend_from_slice(&(v.y as f32).to_le_bytes());
                out.extend_from_slice(&(v.z as f32).to_le_bytes());
            }
            out.push(b'\n');
        }
        Representation::Binary8 => {
            out.extend_from_slice(&CHECK_VALUE_B8.to_le_bytes());
            for v in &doc.data {
                out.extend_from_slice(&v.x.to_le_bytes());
                out.extend_from_slice(&v.y.to_le_bytes());
                out.extend_from_slice(&v.z.to_le_bytes());
            }
            out.push(b'\n');
        }
    }
    line(format!("# End: Data {}", repr.label()), &mut out);
    line("# End: Segment".into(), &mut out);
    out
}

/// Byte-offset-aware line reader; lines are LF-terminated (a trailing CR is
/// tolerated and stripped).
struct LineReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        LineReader { bytes, pos: 0 }
    }

    /// Next line and the byte offset where it starts.
    fn next_line(&mut self) -> Option<(usize, Result<&'a str, OvfError>)> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.bytes[start..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        self.pos = start + end + 1; // past the newline (or EOF)
        let mut slice = &rest[..end];
        if slice.last() == Some(&b'\r') {
            slice = &slice[..slice.len() - 1];
        }
        let text = std::str::from_utf8(slice).map_err(|_| OvfError::BadDataValue {
            offset: start,
            text: String::from_utf8_lossy(&slice[..slice.len().min(32)]).into_owned(),
        });
        Some((start, text))
    }
}

#[derive(Default)]
struct HeaderDraft {
    title: String,
    desc: Vec<String>,
    meshunit: String,
    valuelabels: String,
    valueunits: String,
    nx: Option<usize>,
    ny: Option<usize>,
    nz: Option<usize>,
    dx: Option<f64>,
    dy: Option<f64>,
    dz: Option<f64>,
    bases: [f64; 3],
    mins: [f64; 3],
    maxs: [f64; 3],
    meshtype_seen: bool,
    valuedim_seen: bool,
}

/// Parse an OVF 2.0 byte buffer (first segment only). Never reads past the
/// declared payload and never panics on malformed input.
pub fn parse_ovf(bytes: &[u8]) -> Result<OvfDocument, OvfError> {
    let mut lines = LineReader::new(bytes);

    let (off0, first) = lines.next_line().ok_or(OvfError::BadMagic {
        offset: 0,
        found: String::new(),
    })?;
    // a non-UTF-8 first line is just as much "not an OVF file" as wrong text
    let first = match first {
        Ok(s) => s,
        Err(_) => {
            let found = String::from_utf8_lossy(&bytes[..bytes.len().min(16)]).into_owned();
            return Err(OvfError::BadMagic { offset: off0, found });
        }
    };
    if !first.trim_end().starts_with("# OOMMF OVF 2") {
        let found = first.chars().take(40).collect::<String>();
        if first.starts_with("# OOMMF OVF 1") || first.starts_with("# OOMMF: rectangular mesh v1")
        {
            return Err(OvfError::UnsupportedVersion { offset: off0, found });
        }
        return Err(OvfError::BadMagic { offset: off0, found });
    }

    let mut h = HeaderDraft::default();
    let mut data_section: Option<(usize, Representation)> = None;

    while let Some((off, line)) = lines.next_line() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(body) = trimmed.strip_prefix('#') else {
            return Err(OvfError::BadHeaderValue {
                offset: off,
                key: "(line)".into(),
                text: trimmed.chars().take(40).collect(),
            });
        };
        let body = body.trim();
        let (key_raw, value) = match body.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (body, ""),
        };
        let key = key_raw.to_ascii_lowercase();
        match key.as_str() {
            "begin" => {
                let v = value.trim();
                if let Some(repr_text) = v.strip_prefix("Data").or_else(|| v.strip_prefix("data"))
                {
                    let repr_text = repr_text.trim();
                    let repr = if repr_text.eq_ignore_ascii_case("text") {
                        Representation::Text
                    } else if repr_text.eq_ignore_ascii_case("binary 4") {
                        Representation::Binary4
                    } else if repr_text.eq_ignore_ascii_case("binary 8") {
                        Representation::Binary8
                    } else {
                        return Err(OvfError::UnsupportedRepresentation {
                            offset: off,
                            found: repr_text.chars().take(40).collect(),
                        });
                    };
                    data_section = Some((lines.pos, repr));
                    break;
                }
                // Begin: Segment / Header — structural, nothing to record
            }
            "end" | "segment count" => {}
            "title" => h.title = value.to_string(),
            "desc" => h.desc.push(value.to_string()),
            "meshunit" => h.meshunit = value.to_string(),
            "valuelabels" => h.valuelabels = value.to_string(),
            "valueunits" => h.valueunits = value.to_string(),
            "meshtype" => {
                h.meshtype_seen = true;
                if !value.eq_ignore_ascii_case("rectangular") {
                    return Err(OvfError::UnsupportedMeshType {
                        offset: off,
                        found: value.chars().take(40).collect(),
                    });
                }
            }
            "valuedim" => {
                h.valuedim_seen = true;
                if value.trim() != "3" {
                    return Err(OvfError::UnsupportedValueDim {
                        offset: off,
                        found: value.chars().take(40).collect(),
                    });
                }
            }
            "xnodes" | "ynodes" | "znodes" => {
                let n: usize = value.parse().map_err(|_| OvfError::BadHeaderValue {
                    offset: off,
                    key: key.clone(),
                    text: value.chars().take(40).collect(),
                })?;
                if n == 0 {
                    return Err(OvfError::BadHeaderValue {
                        offset: off,
                        key,
                        text: value.into(),
                    });
                }
                match key.as_bytes()[0] {
                    b'x' => h.nx = Some(n),
                    b'y' => h.ny = Some(n),
                    _ => h.nz = Some(n),
                }
            }
            "xstepsize" | "ystepsize" | "zstepsize" | "xbase" | "ybase" | "zbase" | "xmin"
            | "ymin" | "zmin" | "xmax" | "ymax" | "zmax" => {
                let v: f64 = value.parse().map_err(|_| OvfError::BadHeaderValue {
                    offset: off,
                    key: key.clone(),
                    text: value.chars().take(40).collect(),
                })?;
                let axis = (key.as_bytes()[0] - b'x') as usize;
                if key.ends_with("stepsize") {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(OvfError::BadHeaderValue {
                            offset: off,
                            key,
                            text: value.into(),
                        });
                    }
                    match axis {
                        0 => h.dx = Some(v),
                        1 => h.dy = Some(v),
                        _ => h.dz = Some(v),
                    }
                } else if key.ends_with("base") {
                    h.bases[axis] = v;
                } else if key.ends_with("min") {
                    h.mins[axis] = v;
                } else {
                    h.maxs[axis] = v;
                }
            }
            // unknown headers are legal OVF; skip them
            _ => {}
        }
    }

    let (data_start, repr) = data_section.ok_or(OvfError::MissingData)?;
    if !h.meshtype_seen {
        return Err(OvfError::MissingHeader { key: "meshtype" });
    }
    if !h.valuedim_seen {
        return Err(OvfError::MissingHeader { key: "valuedim" });
    }
    let nx = h.nx.ok_or(OvfError::MissingHeader { key: "xnodes" })?;
    let ny = h.ny.ok_or(OvfError::MissingHeader { key: "ynodes" })?;
    let nz = h.nz.ok_or(OvfError::MissingHeader { key: "znodes" })?;
    let dx = h.dx.ok_or(OvfError::MissingHeader { key: "xstepsize" })?;
    let dy = h.dy.ok_or(OvfError::MissingHeader { key: "ystepsize" })?;
    let dz = h.dz.ok_or(OvfError::MissingHeader { key: "zstepsize" })?;
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .filter(|&v| v <= MAX_NODES)
        .ok_or(OvfError::HeaderTooLarge { offset: data_start, nodes: (nx, ny, nz) })?;

    let data = match repr {
        Representation::Text => parse_text_data(&mut lines, n, data_start)?,
        Representation::Binary4 => parse_binary_data::<4>(&mut lines, bytes, n, data_start)?,
        Representation::Binary8 => parse_binary_data::<8>(&mut lines, bytes, n, data_start)?,
    };

    Ok(OvfDocument {
        title: h.title,
        desc: h.desc,
        meshunit: h.meshunit,
        valuelabels: h.valuelabels,
        valueunits: h.valueunits,
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
        xbase: h.bases[0],
        ybase: h.bases[1],
        zbase: h.bases[2],
        xmin: h.mins[0],
        ymin: h.mins[1],
        zmin: h.mins[2],
        xmax: h.maxs[0],
        ymax: h.maxs[1],
        zmax: h.maxs[2],
        data,
    })
}

fn parse_text_data(
    lines: &mut LineReader<'_>,
    n: usize,
    data_start: usize,
) -> Result<Vec<Vec3>, OvfError> {
    let mut values: Vec<f64> = Vec::new();
    let mut saw_end = false;
    let mut last_off = data_start;
    while let Some((off, line)) = lines.next_line() {
        last_off = off;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            if trimmed.to_ascii_lowercase().starts_with("# end: data")
                || trimmed.to_ascii_lowercase().starts_with("#end: data")
            {
                saw_end = true;
            }
            if saw_end {
                break;
            }
            continue; // stray comment inside data: ignore
        }
        for tok in trimmed.split_whitespace() {
            if values.len() >= 3 * n {
                // more numbers than declared
                return Err(OvfError::NodeCountMismatch {
                    offset: off,
                    declared: n,
                    found: values.len() / 3 + 1,
                });
            }
            let v: f64 = tok.parse().map_err(|_| OvfError::BadDataValue {
                offset: off,
                text: tok.chars().take(40).collect(),
            })?;
            values.push(v);
        }
    }
    if !saw_end {
        return Err(OvfError::MissingEnd { offset: last_off });
    }
    if values.len() != 3 * n {
        return Err(OvfError::NodeCountMismatch {
            offset: last_off,
            declared: n,
            found: values.len() / 3,
        });
    }
    Ok(values.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

fn parse_binary_data<const W: usize>(
    lines: &mut LineReader<'_>,
    bytes: &[u8],
    n: usize,
    data_start: usize,
) -> Result<Vec<Vec3>, OvfError> {
    let needed = W + 3 * n * W;
    let available = bytes.len().saturating_sub(data_start);
    if available < needed {
        return Err(OvfError::Truncated { offset: data_start, needed, available });
    }
    let read = |at: usize| -> f64 {
        let chunk = &bytes[at..at + W];
        if W == 4 {
            f32::from_le_bytes(chunk.try_into().expect("chunk is 4 bytes")) as f64
        } else {
            f64::from_le_bytes(chunk.try_into().expect("chunk is 8 bytes"))
        }
    };
    let check = read(data_start);
    let expected = if W == 4 { CHECK_VALUE_B4 as f64 } else { CHECK_VALUE_B8 };
    if check != expected {
        return Err(OvfError::CheckValueMismatch {
            offset: data_start,
            expected,
            found: check,
        });
    }
    let mut data = Vec::with_capacity(n);
    let mut at = data_start + W;
    for _ in 0..n {
        let x = read(at);
        let y = read(at + W);
        let z = read(at + 2 * W);
        data.push(Vec3::new(x, y, z));
        at += 3 * W;
    }
    // resume line scanning after the payload and require the end marker
    lines.pos = at;
    loop {
        match lines.next_line() {
            Some((_, Ok(line))) => {
                let t = line.trim();
                if t.is_empty() {
                    continue;
                }
                if t.to_ascii_lowercase().starts_with("# end: data") {
                    break;
                }
                return Err(OvfError::MissingEnd { offset: at });
            }
            Some((off, Err(_))) => return Err(OvfError::MissingEnd { offset: off }),
            None => return Err(OvfError::MissingEnd { offset: at }),
        }
    }
    Ok(data)
}

/// Check an OVF document against an engine mesh and hand back its payload as
/// a [`FieldMap`]. Node counts must match exactly; step sizes must agree
/// within `tolerance` (relative; default 1e-9). No interpolation.
pub fn map_to_mesh(
    doc: &OvfDocument,
    mesh: &Mesh,
    tolerance: Option<f64>,
) -> Result<FieldMap, OvfError> {
    let tol = tolerance.unwrap_or(1e-9);
    if (doc.nx, doc.ny, doc.nz) != (mesh.nx, mesh.ny, mesh.nz) {
        return Err(OvfError::DimensionMismatch {
            doc: (doc.nx, doc.ny, doc.nz),
            mesh: (mesh.nx, mesh.ny, mesh.nz),
        });
    }
    for (axis, dd, dm) in [('x', doc.dx, mesh.dx), ('y', doc.dy, mesh.dy), ('z', doc.dz, mesh.dz)]
    {
        if (dd - dm).abs() > tol * dm.abs() {
            return Err(OvfError::StepMismatch { axis, doc: dd, mesh: dm, tolerance: tol });
        }
    }
    if doc.data.len() != doc.node_count() {
        return Err(OvfError::NodeCountMismatch {
            offset: 0,
            declared: doc.node_count(),
            found: doc.data.len(),
        });
    }
    Ok(FieldMap { data: doc.data.clone() })
}
