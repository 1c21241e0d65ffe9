//! Record CSV, JSON summary and binary checkpoints.
//!
//! The CSV starts with a comment line
//! `# hallmhd-records v1 scenario=<name> n=<n> l=<l>` followed by a header
//! row and one row per record. Floats are written in shortest round-trip
//! form and a missing value is an empty cell.
//!
//! Checkpoint layout, little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `HMHDCKPT` |
//! | 4 | format version (u32) |
//! | 4 | scenario id (u32) |
//! | 8 | n (u64) |
//! | 8 | l (f64) |
//! | 8 | t (f64) |
//! | 8 | dt (f64) |
//! | 8 | steps taken (u64) |
//! | 8 | index of the last record written (u64) |
//! | 4 | number of unknowns (u32) |
//!
//! followed, for each unknown in scenario order, by the `n × (n/2 + 1)`
//! spectral coefficients in row-major order as `(re, im)` f64 pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{AuditReport, FitOutcome, Trajectory};
use crate::error::{Error, Result};
use crate::models::{Scenario, State};
use crate::spectral::{Field, Grid};
use crate::timestepper::BlowUp;

pub const CSV_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HMHDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const CSV_TAG: &str = "hallmhd-records";

/// Metadata carried in the CSV comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMeta {
    pub version: u32,
    pub scenario: Scenario,
    pub n: usize,
    pub l: f64,
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
        }
        _ => Ok(()),
    }
}

/// Writes to a sibling temporary file and renames it into place, so a crash
/// never leaves a truncated output behind.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    create_parent(path)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn cell(v: Option<f64>) -> String {
    // Debug formatting of f64 is the shortest string that round-trips.
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_csv(path: &Path, meta: &CsvMeta, traj: &Trajectory) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(
            w,
            "# {CSV_TAG} v{} scenario={} n={} l={:?}",
            meta.version,
            meta.scenario.name(),
            meta.n,
            meta.l
        )?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(traj.columns.iter())?;
        for row in &traj.rows {
            csv.write_record(row.iter().map(|v| cell(*v)))?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn parse_meta(path: &Path, line: &str) -> Result<CsvMeta> {
    let bad = |m: &str| Error::format(path, format!("header comment: {m}"));
    let mut parts = line
        .strip_prefix('#')
        .ok_or_else(|| bad("missing"))?
        .split_whitespace();
    if parts.next() != Some(CSV_TAG) {
        return Err(bad("not a hallmhd record file"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if version != CSV_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (mut scenario, mut n, mut l) = (None, None, None);
    for kv in parts {
        match kv.split_once('=') {
            Some(("scenario", v)) => {
                scenario = serde_json::from_value(serde_json::Value::String(v.to_string())).ok()
            }
            Some(("n", v)) => n = v.parse().ok(),
            Some(("l", v)) => l = v.parse().ok(),
            _ => return Err(bad(&format!("unexpected token '{kv}'"))),
        }
    }
    Ok(CsvMeta {
        version,
        scenario: scenario.ok_or_else(|| bad("scenario"))?,
        n: n.ok_or_else(|| bad("n"))?,
        l: l.ok_or_else(|| bad("l"))?,
    })
}

pub fn read_csv(path: &Path) -> Result<(CsvMeta, Trajectory)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let meta = parse_meta(path, first.trim_end())?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.first().map(String::as_str) != Some("t") {
        return Err(Error::format(path, "first column must be t"));
    }
    let mut traj = Trajectory::new(columns);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let row = rec
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| {
                        Error::format(path, format!("row {}: bad number '{c}'", i + 1))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        traj.rows.push(row);
    }
    Ok((meta, traj))
}

/// End-of-run (or partial, at checkpoints) report.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub format_version: u32,
    pub scenario: &'static str,
    /// `running` at intermediate checkpoints, then `completed` or `blow_up`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_up: Option<BlowUpReport>,
    pub t: f64,
    pub steps: u64,
    pub records: usize,
    pub t_box: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_error: Option<String>,
    pub fits: Vec<FitOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sponge_max_mass_fraction: Option<f64>,
    pub support_violated: bool,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowUpReport {
    pub t: f64,
    pub field: String,
    pub norm: f64,
}

impl From<&BlowUp> for BlowUpReport {
    fn from(b: &BlowUp) -> Self {
        BlowUpReport {
            t: b.t,
            field: b.field.clone(),
            norm: b.norm,
        }
    }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, |w| writeln!(w, "{text}"))
}

/// Contents of a checkpoint file.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub scenario: Scenario,
    pub dt: f64,
    pub steps: u64,
    pub record: u64,
    pub state: State,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let grid = ck.state.grid().clone();
    write_atomic(path, |w| {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&ck.scenario.id().to_le_bytes())?;
        w.write_all(&(grid.n() as u64).to_le_bytes())?;
        w.write_all(&grid.l().to_le_bytes())?;
        w.write_all(&ck.state.t.to_le_bytes())?;
        w.write_all(&ck.dt.to_le_bytes())?;
        w.write_all(&ck.steps.to_le_bytes())?;
        w.write_all(&ck.record.to_le_bytes())?;
        w.write_all(&(ck.state.fields.len() as u32).to_le_bytes())?;
        for f in &ck.state.fields {
            for c in f.spec().iter() {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

struct ByteReader<R> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> ByteReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(&self.path, "checkpoint is truncated")
            } else {
                Error::io(&self.path, e)
            }
        })?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader {
        inner: BufReader::new(file),
        path: path.to_path_buf(),
    };
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let id = r.u32()?;
    let scenario = Scenario::from_id(id)
        .ok_or_else(|| Error::format(path, format!("unknown scenario id {id}")))?;
    let n = r.u64()? as usize;
    let l = r.f64()?;
    let t = r.f64()?;
    let dt = r.f64()?;
    let steps = r.u64()?;
    let record = r.u64()?;
    let count = r.u32()? as usize;
    if count != scenario.unknowns().len() {
        return Err(Error::format(
            path,
            format!("{count} fields stored, scenario {} has {}", scenario.name(), scenario.unknowns().len()),
        ));
    }
    let grid: Arc<Grid> = Grid::new(n, l).map_err(|e| Error::format(path, e.to_string()))?;
    let shape = grid.spectral_shape();
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let mut data = Vec::with_capacity(shape.0 * shape.1);
        for _ in 0..shape.0 * shape.1 {
            let re = r.f64()?;
            let im = r.f64()?;
            data.push(Complex64::new(re, im));
        }
        let spec = Array2::from_shape_vec(shape, data).expect("shape matches length");
        fields.push(Field::from_spectral(&grid, spec)?);
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after checkpoint data"));
    }
    Ok(Checkpoint {
        scenario,
        dt,
        steps,
        record,
        state: State { t, fields },
    })
}
