//! CSV rows, JSON summaries, lock files and plot scripts.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use homog_core::study::{ScalingRow, CSV_COLUMNS};

use crate::CliError;

/// Exclusive claim on an output path, held as `<output>.lock`.
#[derive(Debug)]
pub struct LockFile {
    path: PathBuf,
}

impl LockFile {
    pub fn acquire(output: &Path) -> Result<Self, CliError> {
        let path = with_suffix(output, ".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Config(format!(
                "{} exists: another run is writing this output",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// `path` with `suffix` appended to its file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Shortest round-trip decimal form; identical on every platform.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Study CSV written row by row and flushed after each row.
pub struct RowWriter {
    inner: csv::Writer<File>,
    timing: bool,
}

impl RowWriter {
    pub fn create(path: &Path, timing: bool) -> Result<Self, CliError> {
        let mut inner = csv::Writer::from_path(path).map_err(csv_error)?;
        inner.write_record(CSV_COLUMNS).map_err(csv_error)?;
        inner.flush()?;
        Ok(Self { inner, timing })
    }

    pub fn write(&mut self, row: &ScalingRow) -> Result<(), CliError> {
        let wall = if self.timing { row.wall_time_seconds } else { 0.0 };
        let fields = [
            row.epsilon,
            row.s,
            row.r,
            row.f_recovery,
            row.f_target_hom,
            row.ratio,
            row.tail_bound,
            row.quad_error,
            wall,
        ];
        self.inner
            .write_record(fields.iter().map(|v| fmt_f64(*v)))
            .map_err(csv_error)?;
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Numerical(format!("csv: {e}"))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub command: &'a str,
    pub config_sha256: String,
    pub homog_version: &'static str,
    pub homog_core_version: &'static str,
    pub rows: usize,
    pub final_ratio: Option<f64>,
    pub corrector_solves: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regimes: Option<Vec<RegimeSummary>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeSummary {
    pub gamma: f64,
    pub annotation: &'static str,
    pub final_ratio: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Gnuplot script drawing `ratio` against `epsilon` from a study CSV.
pub fn plot_script(csv: &Path) -> String {
    let name = csv.display();
    format!(
        "# ratio F_recovery / F_target_hom along the epsilon ladder\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale x\n\
         set xlabel 'epsilon'\n\
         set ylabel 'ratio'\n\
         set grid\n\
         plot '{name}' using 1:6 with linespoints title 'F_recovery / F_target_hom', 1 with lines dashtype 2 title 'limit'\n"
    )
}
