//! Line-oriented reporting to the console and a log file at once.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use cavimag::Error;

pub struct Report {
    quiet: bool,
    file: File,
}

impl Report {
    /// Open `<out>/<name>` for writing; console echo unless `quiet`.
    pub fn create(out: &Path, name: &str, quiet: bool) -> Result<Report, Error> {
        let path = out.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", path.display())))?;
        Ok(Report { quiet, file })
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        let text = text.as_ref();
        if !self.quiet {
            println!("{text}");
        }
        // log write failures shouldn't kill a finished simulation
        let _ = writeln!(self.file, "{text}");
    }

    /// Warnings go to stderr even in quiet mode.
    pub fn warn(&mut self, text: impl AsRef<str>) {
        let text = text.as_ref();
        eprintln!("warning: {text}");
        let _ = writeln!(self.file, "warning: {text}");
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

/// `1.234e5 rad/s (19.6 kHz)` style frequency echo.
pub fn freq(omega: f64) -> String {
    format!("{omega:.6e} rad/s ({:.6e} Hz)", omega / (2.0 * std::f64::consts::PI))
}
