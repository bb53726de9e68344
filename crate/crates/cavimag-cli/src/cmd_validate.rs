//! `cavimag validate-ovf`: parse vector-field files and either describe them
//! or explain exactly where they break.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;

use cavimag::ovf;

#[derive(Args)]
pub struct ValidateArgs {
    /// OVF files to check
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

/// Pull the `# Begin: Data <repr>` line out of the raw bytes for the report;
/// the parser itself has already vetted it.
fn data_marker(bytes: &[u8]) -> Option<String> {
    let needle = b"# Begin: Data ";
    bytes
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(needle))
        .map(|at| {
            let rest = &bytes[at + needle.len()..];
            let end = rest.iter().position(|&b| b == b'\n' || b == b'\r').unwrap_or(rest.len());
            String::from_utf8_lossy(&rest[..end]).trim().to_string()
        })
}

fn describe(path: &Path) -> Result<Vec<String>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read: {e}"))?;
    let repr = data_marker(&bytes);
    let doc = ovf::parse_ovf(&bytes).map_err(|e| e.to_string())?;

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in &doc.data {
        for (k, c) in [v.x, v.y, v.z].into_iter().enumerate() {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }

    let mut lines = Vec::new();
    lines.push(format!("  title: {}", if doc.title.is_empty() { "(none)" } else { &doc.title }));
    lines.push(format!(
        "  grid: {} x {} x {} ({} nodes), cell {:.6e} x {:.6e} x {:.6e} {}",
        doc.nx,
        doc.ny,
        doc.nz,
        doc.node_count(),
        doc.dx,
        doc.dy,
        doc.dz,
        doc.meshunit
    ));
    if let Some(repr) = repr {
        lines.push(format!("  data representation: {repr}"));
    }
    lines.push(format!("  value labels: {} [{}]", doc.valuelabels, doc.valueunits));
    if doc.data.is_empty() {
        lines.push("  values: (empty)".to_string());
    } else {
        for (k, name) in ["x", "y", "z"].iter().enumerate() {
            lines.push(format!("  {name} range: [{:.6e}, {:.6e}]", lo[k], hi[k]));
        }
    }
    Ok(lines)
}

pub fn exec(args: &ValidateArgs) -> ExitCode {
    let mut all_ok = true;
    for path in &args.paths {
        match describe(path) {
            Ok(lines) => {
                println!("{}: OK", path.display());
                for l in lines {
                    println!("{l}");
                }
            }
            Err(msg) => {
                all_ok = false;
                eprintln!("{}: FAILED — {msg}", path.display());
            }
        }
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
