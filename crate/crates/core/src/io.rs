//! File formats: CSV with `#` provenance headers, a little-endian binary
//! ensemble format, density and sidecar tables, and sweep reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ensemble::PathMatrix;
use crate::error::{Error, Result};
use crate::kfp::DensityField;
use crate::manifest::MANIFEST_FILE;
use crate::stats::{MsdCurve, ScalingReport};
use crate::superstat::MixingDraw;

pub const BINARY_MAGIC: &[u8; 4] = b"ANOD";
pub const BINARY_VERSION: u32 = 1;

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputHeader {
    pub config_hash: String,
    pub seed: u64,
    /// Further `key = value` pairs: config echo, run notes.
    pub entries: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { config_hash: config_hash.into(), seed, entries: Vec::new() }
    }

    pub fn with(mut self, entries: impl IntoIterator<Item = (String, String)>) -> Self {
        self.entries.extend(entries);
        self
    }

    fn lines(&self, grid: &[f64]) -> Vec<String> {
        let mut out = vec![
            format!("config_hash={}", self.config_hash),
            format!("seed={}", self.seed),
            format!("manifest={MANIFEST_FILE}"),
        ];
        if let (Some(first), Some(last)) = (grid.first(), grid.last()) {
            out.push(format!("grid={};{first};{last}", grid.len()));
        }
        out.extend(self.entries.iter().map(|(k, v)| format!("{k}={v}")));
        out
    }

    fn parse(lines: &[String]) -> Self {
        let mut h = Self::default();
        for line in lines {
            let Some((k, v)) = line.split_once('=') else { continue };
            match k {
                "config_hash" => h.config_hash = v.to_string(),
                "seed" => h.seed = v.parse().unwrap_or(0),
                "manifest" | "grid" => {}
                _ => h.entries.push((k.to_string(), v.to_string())),
            }
        }
        h
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn write_comments(w: &mut impl Write, header: &OutputHeader, grid: &[f64]) -> Result<()> {
    for line in header.lines(grid) {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn read_comments(text: &str) -> Vec<String> {
    text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim().to_string()).collect()
}

fn csv_writer(path: &Path, header: &OutputHeader, grid: &[f64]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = BufWriter::new(File::create(path)?);
    write_comments(&mut w, header, grid)?;
    Ok(csv::WriterBuilder::new().from_writer(w))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("cannot parse {s:?} as a number")))
}

/// One row per trajectory, one column per grid time.
pub fn write_paths_csv(path: &Path, grid: &[f64], paths: &PathMatrix, header: &OutputHeader) -> Result<()> {
    let mut w = csv_writer(path, header, grid)?;
    let mut head = vec!["traj".to_string()];
    head.extend(grid.iter().map(|t| t.to_string()));
    w.write_record(&head)?;
    for (i, row) in paths.rows().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub header: OutputHeader,
    pub grid: Vec<f64>,
    pub paths: PathMatrix,
}

pub fn read_paths_csv(path: &Path) -> Result<PathTable> {
    let text = std::fs::read_to_string(path)?;
    let header = OutputHeader::parse(&read_comments(&text));
    let mut r = csv_reader(&text);
    let head = r.headers()?.clone();
    if head.get(0) != Some("traj") {
        return Err(Error::Format("path table must start with a `traj` column".into()));
    }
    let grid: Vec<f64> = head.iter().skip(1).map(parse_f64).collect::<Result<_>>()?;
    let rows = r
        .records()
        .map(|rec| rec?.iter().skip(1).map(parse_f64).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let paths = PathMatrix::from_rows(grid.len(), rows)?;
    Ok(PathTable { header, grid, paths })
}

/// `ANOD`, version, header length and text, path count, time count, times,
/// then the row-major values; all little-endian.
pub fn write_paths_bin(path: &Path, grid: &[f64], paths: &PathMatrix, header: &OutputHeader) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let text = header.lines(grid).join("\n");
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.write_all(&(paths.n_paths() as u64).to_le_bytes())?;
    w.write_all(&(grid.len() as u64).to_le_bytes())?;
    for v in grid.iter().chain(paths.as_slice()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

pub fn read_paths_bin(path: &Path) -> Result<PathTable> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("not an ANOD ensemble file".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported ANOD version {version}")));
    }
    let len = read_u64(&mut r)? as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let header = OutputHeader::parse(&text.lines().map(str::to_string).collect::<Vec<_>>());
    let n_paths = read_u64(&mut r)? as usize;
    let n_times = read_u64(&mut r)? as usize;
    let grid = read_f64s(&mut r, n_times)?;
    let data = read_f64s(&mut r, n_paths * n_times)?;
    let paths = PathMatrix::from_rows(n_times, data.chunks(n_times.max(1)).map(<[f64]>::to_vec))?;
    Ok(PathTable { header, grid, paths })
}

/// Two columns `x,u`.
pub fn write_density_csv(path: &Path, field: &DensityField, header: &OutputHeader) -> Result<()> {
    let header = header.clone().with([("t".to_string(), field.t.to_string())]);
    let mut w = csv_writer(path, &header, &[])?;
    w.write_record(["x", "u"])?;
    for (x, u) in field.x_grid.iter().zip(&field.values) {
        w.write_record([x.to_string(), u.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_density_csv(path: &Path) -> Result<DensityField> {
    let text = std::fs::read_to_string(path)?;
    let header = OutputHeader::parse(&read_comments(&text));
    let mut r = csv_reader(&text);
    let (mut x_grid, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        x_grid.push(parse_f64(rec.get(0).unwrap_or(""))?);
        values.push(parse_f64(rec.get(1).unwrap_or(""))?);
    }
    let t = header.get("t").map(parse_f64).transpose()?.unwrap_or(0.0);
    Ok(DensityField { x_grid, values, t })
}

/// Per-trajectory `(A, H)` draws: `traj,A,H1,...,HK`.
pub fn write_mixing_csv(path: &Path, draws: &[MixingDraw], header: &OutputHeader) -> Result<()> {
    let mut w = csv_writer(path, header, &[])?;
    let k = draws.first().map_or(1, |d| d.hurst.len());
    let mut head = vec!["traj".to_string(), "A".to_string()];
    head.extend((1..=k).map(|i| format!("H{i}")));
    w.write_record(&head)?;
    for (i, d) in draws.iter().enumerate() {
        let mut rec = vec![i.to_string(), d.amplitude.to_string()];
        rec.extend(d.hurst.iter().map(|h| h.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mixing_csv(path: &Path) -> Result<Vec<MixingDraw>> {
    let text = std::fs::read_to_string(path)?;
    csv_reader(&text)
        .records()
        .map(|rec| {
            let rec = rec?;
            let vals: Vec<f64> = rec.iter().skip(1).map(parse_f64).collect::<Result<_>>()?;
            let (a, h) = vals.split_first().ok_or_else(|| Error::Format("empty mixing row".into()))?;
            Ok(MixingDraw { amplitude: *a, hurst: h.to_vec() })
        })
        .collect()
}

/// `lag,msd,stderr`.
pub fn write_msd_csv(path: &Path, curve: &MsdCurve, header: &OutputHeader) -> Result<()> {
    let header = header.clone().with([("n_traj".to_string(), curve.n_traj.to_string())]);
    let mut w = csv_writer(path, &header, &[])?;
    w.write_record(["lag", "msd", "stderr"])?;
    for ((l, v), s) in curve.lags.iter().zip(&curve.values).zip(&curve.stderr) {
        w.write_record([l.to_string(), v.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_csv(path: &Path, report: &ScalingReport, header: &OutputHeader) -> Result<()> {
    let mut w = csv_writer(path, header, &[])?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable verdicts of a sweep.
pub fn scaling_summary(report: &ScalingReport) -> String {
    let verdict = |ok: bool| if ok { "consistent" } else { "NOT consistent" };
    let mut s = String::new();
    s.push_str("N, E sup|X-Xt|^2, sup E|Xt-Zt|^2, covariance error\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{}, {:.4e} ± {:.1e}, {:.4e} ± {:.1e}, {:.4e}\n",
            r.particles, r.full_gap, r.full_gap_se, r.chain_gap, r.chain_gap_se, r.covariance_error
        ));
    }
    let f = report.full_gap_slope;
    let c = report.chain_gap_slope;
    s.push_str(&format!(
        "full-system gap slope {:.3} ± {:.3} (bound {:.3}): {}\n",
        f.slope,
        f.stderr,
        f.reference,
        verdict(report.full_gap_consistent())
    ));
    s.push_str(&format!(
        "chain gap slope {:.3} ± {:.3} (rate {:.3}): {}\n",
        c.slope,
        c.stderr,
        c.reference,
        verdict(report.chain_gap_consistent())
    ));
    s.push_str(&format!(
        "covariance error decreasing: {}\n",
        if report.covariance_error_decreasing() { "yes" } else { "no" }
    ));
    s
}
