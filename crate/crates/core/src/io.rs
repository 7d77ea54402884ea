//! Artifact formats.
//!
//! CSV files start with a `#`-prefixed JSON provenance line. Floats are
//! written in shortest round-trip form, so reading a file back reproduces
//! the values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::evolution::{DensityMatrix, Operator, C64};
use crate::params::RotorParams;
use crate::variance::{VarianceCurve, VariancePoint};
use crate::witness::{DeltaScan, WitnessCurve};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parameters and tool version attached to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: Map<String, Value>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "maryland".into(),
            version: VERSION.into(),
            command: command.into(),
            parameters: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.into(), value);
        self
    }

    /// Records `K`, the symbolic period and its floating-point value.
    pub fn with_rotor(self, params: &RotorParams) -> Self {
        self.with("K", params.kick_strength())
            .with("tau", params.tau().label())
            .with("tau_value", params.tau_value())
            .with("tau_kind", params.tau().kind())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.parameters.get(key)
    }

    pub fn header_line(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("provenance is plain JSON"))
    }

    pub fn parse_header(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("provenance line must start with '#'".into()))?;
        Ok(serde_json::from_str(body.trim())?)
    }
}

/// JSON artifact: provenance plus payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub provenance: Provenance,
    pub data: T,
}

pub fn write_json<W: Write, T: Serialize>(w: W, provenance: &Provenance, data: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Borrowed<'a, T> {
        provenance: &'a Provenance,
        data: &'a T,
    }
    serde_json::to_writer_pretty(w, &Borrowed { provenance, data })?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(r: R) -> Result<Artifact<T>> {
    Ok(serde_json::from_reader(r)?)
}

/// Creates `path` for writing, making parent directories as needed.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a number: {field:?}")))
}

fn parse_usize(field: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("not a count: {field:?}")))
}

type CsvBody = csv::Reader<std::io::Cursor<Vec<u8>>>;

/// Splits off an optional provenance line and returns a CSV reader over the rest.
fn split_provenance<R: Read>(r: R) -> Result<(Option<Provenance>, CsvBody)> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut rest = Vec::new();
    let provenance = if first.starts_with('#') {
        Some(Provenance::parse_header(first.trim_end())?)
    } else {
        rest.extend_from_slice(first.as_bytes());
        None
    };
    reader.read_to_end(&mut rest)?;
    let csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::Cursor::new(rest));
    Ok((provenance, csv))
}

fn expect_headers<R: Read>(csv: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = csv.headers()?;
    if got.iter().ne(want.iter().copied()) {
        return Err(Error::Format(format!("expected columns {want:?}, got {got:?}")));
    }
    Ok(())
}

fn write_provenance<W: Write>(w: &mut W, provenance: Option<&Provenance>) -> Result<()> {
    if let Some(p) = provenance {
        writeln!(w, "{}", p.header_line())?;
    }
    Ok(())
}

/// Columns `N, variance, stderr`; `stderr` is empty for exact values.
pub fn write_variance_csv<W: Write>(mut w: W, provenance: Option<&Provenance>, curve: &VarianceCurve) -> Result<()> {
    write_provenance(&mut w, provenance)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["N", "variance", "stderr"])?;
    for p in &curve.points {
        csv.write_record([
            p.n.to_string(),
            fmt_f64(p.variance),
            p.stderr.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_variance_csv<R: Read>(r: R) -> Result<(Option<Provenance>, VarianceCurve)> {
    let (provenance, mut csv) = split_provenance(r)?;
    expect_headers(&mut csv, &["N", "variance", "stderr"])?;
    let mut points = Vec::new();
    for record in csv.records() {
        let record = record?;
        let stderr = match record.get(2).unwrap_or("") {
            "" => None,
            s => Some(parse_f64(s)?),
        };
        points.push(VariancePoint {
            n: parse_usize(&record[0])?,
            variance: parse_f64(&record[1])?,
            stderr,
        });
    }
    Ok((provenance, VarianceCurve { points }))
}

/// Columns `N, hs_squared, violation_flag, refinement_error`.
pub fn write_witness_csv<W: Write>(mut w: W, provenance: Option<&Provenance>, curve: &WitnessCurve) -> Result<()> {
    write_provenance(&mut w, provenance)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["N", "hs_squared", "violation_flag", "refinement_error"])?;
    for p in &curve.points {
        csv.write_record([
            p.n.to_string(),
            fmt_f64(p.hs_squared),
            u8::from(p.violation).to_string(),
            fmt_f64(p.refinement_error),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a witness CSV; the violation list is rebuilt from the flags and
/// `tol_mono` is taken from the provenance when present.
pub fn read_witness_csv<R: Read>(r: R) -> Result<(Option<Provenance>, WitnessCurve)> {
    let (provenance, mut csv) = split_provenance(r)?;
    expect_headers(&mut csv, &["N", "hs_squared", "violation_flag", "refinement_error"])?;
    let mut points = Vec::new();
    for record in csv.records() {
        let record = record?;
        let violation = match record[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format(format!("bad violation flag {other:?}"))),
        };
        points.push(crate::witness::WitnessPoint {
            n: parse_usize(&record[0])?,
            hs_squared: parse_f64(&record[1])?,
            violation,
            refinement_error: parse_f64(&record[3])?,
        });
    }
    let tol_mono = provenance
        .as_ref()
        .and_then(|p| p.get("tol_mono"))
        .and_then(Value::as_f64)
        .unwrap_or(crate::witness::TOL_MONO);
    let violations = points.iter().filter(|p| p.violation).map(|p| p.n).collect();
    Ok((
        provenance,
        WitnessCurve {
            points,
            violations,
            tol_mono,
        },
    ))
}

/// Sidecar record for a Δ-scan matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanMeta {
    pub provenance: Provenance,
    pub grid: usize,
    pub memory: f64,
    pub eps_sing: f64,
    pub min_value: f64,
    pub argmin: (usize, usize),
    pub argmin_theta: (f64, f64),
    pub masked: usize,
}

impl DeltaScanMeta {
    pub fn new(provenance: Provenance, scan: &DeltaScan) -> Self {
        Self {
            provenance,
            grid: scan.grid,
            memory: scan.memory,
            eps_sing: scan.eps_sing,
            min_value: scan.min_value,
            argmin: scan.argmin,
            argmin_theta: (scan.theta(scan.argmin.0), scan.theta(scan.argmin.1)),
            masked: scan.masked_count(),
        }
    }
}

/// Path of the metadata sidecar for a matrix file.
pub fn sidecar_path(matrix: &Path) -> PathBuf {
    let mut name = matrix.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// `grid` rows of `grid` values, row `i` at `θ₁ = 2πi/grid`; masked cells are empty.
pub fn write_delta_matrix_csv<W: Write>(w: W, scan: &DeltaScan) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..scan.grid {
        csv.write_record((0..scan.grid).map(|j| scan.value(i, j).map(fmt_f64).unwrap_or_default()))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_delta_matrix_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<bool>, usize)> {
    let mut csv = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut rows = 0;
    for record in csv.records() {
        let record = record?;
        for field in record.iter() {
            if field.is_empty() {
                values.push(f64::NAN);
                mask.push(true);
            } else {
                values.push(parse_f64(field)?);
                mask.push(false);
            }
        }
        rows += 1;
    }
    if values.len() != rows * rows {
        return Err(Error::Format(format!("Δ matrix is not square: {} cells in {rows} rows", values.len())));
    }
    Ok((values, mask, rows))
}

/// Writes the matrix to `path` and the metadata to its sidecar.
pub fn write_delta_scan(path: &Path, meta: &DeltaScanMeta, scan: &DeltaScan) -> Result<()> {
    let mut w = create_file(path)?;
    write_delta_matrix_csv(&mut w, scan)?;
    w.flush()?;
    let mut side = create_file(&sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut side, meta)?;
    side.flush()?;
    Ok(())
}

pub fn read_delta_scan(path: &Path) -> Result<(DeltaScanMeta, DeltaScan)> {
    let meta: DeltaScanMeta = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    let (values, mask, grid) = read_delta_matrix_csv(BufReader::new(File::open(path)?))?;
    if grid != meta.grid {
        return Err(Error::Format(format!("matrix has {grid} rows, metadata says {}", meta.grid)));
    }
    let scan = DeltaScan {
        grid,
        memory: meta.memory,
        eps_sing: meta.eps_sing,
        values,
        mask,
        min_value: meta.min_value,
        argmin: meta.argmin,
    };
    Ok((meta, scan))
}

/// JSON form of a scan: metadata plus rows with masked cells as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanRecord {
    pub meta: DeltaScanMeta,
    pub matrix: Vec<Vec<Option<f64>>>,
}

impl DeltaScanRecord {
    pub fn new(meta: DeltaScanMeta, scan: &DeltaScan) -> Self {
        let matrix = (0..scan.grid)
            .map(|i| (0..scan.grid).map(|j| scan.value(i, j)).collect())
            .collect();
        Self { meta, matrix }
    }
}

const DENSITY_MAGIC: &[u8; 8] = b"MKRHO\0\0\x01";

/// Header of the binary density-matrix container.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    pub n_max: u64,
    pub steps: u64,
    pub kick_strength: f64,
    pub tau: f64,
    pub memory: f64,
}

/// Magic, header fields, then row-major `(re, im)` pairs; all little-endian.
pub fn write_density_matrix<W: Write>(mut w: W, header: &DensityHeader, rho: &DensityMatrix) -> Result<()> {
    if header.n_max != rho.n_max() as u64 {
        return Err(Error::Format(format!(
            "header n_max {} does not match matrix n_max {}",
            header.n_max,
            rho.n_max()
        )));
    }
    w.write_all(DENSITY_MAGIC)?;
    w.write_all(&header.n_max.to_le_bytes())?;
    w.write_all(&header.steps.to_le_bytes())?;
    for x in [header.kick_strength, header.tau, header.memory] {
        w.write_all(&x.to_le_bytes())?;
    }
    for c in rho.entries().iter() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_density_matrix<R: Read>(mut r: R) -> Result<(DensityHeader, DensityMatrix)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DENSITY_MAGIC {
        return Err(Error::Format("not a density-matrix file".into()));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n_max = u64::from_le_bytes(next(&mut r)?);
    let steps = u64::from_le_bytes(next(&mut r)?);
    let kick_strength = f64::from_le_bytes(next(&mut r)?);
    let tau = f64::from_le_bytes(next(&mut r)?);
    let memory = f64::from_le_bytes(next(&mut r)?);
    let n = usize::try_from(n_max)
        .ok()
        .filter(|&n| n <= 1 << 14)
        .ok_or_else(|| Error::Format(format!("implausible n_max {n_max}")))?;
    let d = 2 * n + 1;
    let mut data = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re = f64::from_le_bytes(next(&mut r)?);
        let im = f64::from_le_bytes(next(&mut r)?);
        data.push(C64::new(re, im));
    }
    let entries = Operator::from_shape_vec((d, d), data).map_err(|e| Error::Format(e.to_string()))?;
    let header = DensityHeader {
        n_max,
        steps,
        kick_strength,
        tau,
        memory,
    };
    Ok((header, DensityMatrix::from_entries(n, entries)?))
}
