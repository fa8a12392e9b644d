//! Dataset ingestion (CSV, IDX, synthetic Gaussian blobs) and output writers
//! (embedding CSV, report JSON, SVG scatter plots).

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::metrics::TrustworthinessReport;
use crate::{Error, Result};

/// IDX magic for unsigned-byte rank-3 tensors (images).
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// IDX magic for unsigned-byte rank-1 tensors (labels).
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<i64>>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.nrows() {
                return Err(Error::Input(format!(
                    "{} labels for {} rows",
                    l.len(),
                    x.nrows()
                )));
            }
        }
        crate::kernels::check_finite(x.view(), "dataset")?;
        Ok(Self { x, labels, name: name.into() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Seeded subsample of `n` rows, kept in their original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > self.n() {
            return Err(Error::Parameter(format!(
                "subsample size must be in 1..={}, got {n}",
                self.n()
            )));
        }
        if n == self.n() {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.n(), n).into_vec();
        idx.sort_unstable();
        Ok(Self {
            x: self.x.select(Axis(0), &idx),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            name: format!("{}[{n}]", self.name),
        })
    }

    /// Centers every feature and scales it to unit (population) variance;
    /// constant features are only centered.
    pub fn standardize(&mut self) {
        for mut col in self.x.axis_iter_mut(Axis(1)) {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if std > 0.0 { std.recip() } else { 1.0 };
            col.mapv_inplace(|v| (v - mean) * scale);
        }
    }
}

/// Parameters of the isotropic Gaussian-blob generator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobParams {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    pub spread: f64,
    pub seed: u64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self { n: 2000, d: 100, clusters: 10, spread: 1.0, seed: 0 }
    }
}

/// Centers are uniform in `[-10, 10]^d`; point `i` belongs to cluster
/// `i mod clusters` and is drawn from `N(center, spread²·I)`.
pub fn generate_blobs(params: &BlobParams) -> Result<LabeledDataset> {
    let BlobParams { n, d, clusters, spread, seed } = *params;
    if n == 0 || d == 0 || clusters == 0 {
        return Err(Error::Parameter("n, d and clusters must all be positive".into()));
    }
    if clusters > n {
        return Err(Error::Parameter(format!("{clusters} clusters exceed {n} points")));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::Parameter(format!("spread must be positive, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_dist = Uniform::new_inclusive(-10.0, 10.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let centers = Array2::from_shape_simple_fn((clusters, d), || box_dist.sample(&mut rng));
    let noise = Normal::new(0.0, spread).map_err(|e| Error::Parameter(e.to_string()))?;
    let labels: Vec<i64> = (0..n).map(|i| (i % clusters) as i64).collect();
    let mut x = Array2::<f64>::zeros((n, d));
    for (i, mut r) in x.axis_iter_mut(Axis(0)).enumerate() {
        let c = centers.row(i % clusters);
        for (v, m) in r.iter_mut().zip(c) {
            *v = m + noise.sample(&mut rng);
        }
    }
    LabeledDataset::new(x, Some(labels), format!("blobs-n{n}-d{d}-c{clusters}-s{seed}"))
}

/// Which CSV column holds class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name; requires a header row.
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

impl LabelColumn {
    /// All-digit strings are indices, anything else is a header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

/// Loads a comma-separated numeric table. A first row containing any
/// non-numeric cell is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&LabelColumn>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((line + 1, rec));
    }
    if records.is_empty() {
        return Err(Error::Format { path: path.into(), message: "file contains no rows".into() });
    }

    let has_header = records[0].1.iter().any(|c| c.parse::<f64>().is_err());
    let header = if has_header { Some(records.remove(0).1) } else { None };
    let width = header.as_ref().map_or_else(|| records.first().map_or(0, |r| r.1.len()), |h| h.len());

    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Index(i)) => {
            return Err(Error::Format {
                path: path.into(),
                message: format!("label column {i} out of range for {width} columns"),
            })
        }
        Some(LabelColumn::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| Error::Format {
                path: path.into(),
                message: format!("label column '{name}' requested but the file has no header"),
            })?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| Error::Format {
                path: path.into(),
                message: format!("no column named '{name}'"),
            })?)
        }
    };

    let n = records.len();
    let d = width - usize::from(label_idx.is_some());
    let mut values = Vec::with_capacity(n * d);
    let mut raw_labels = Vec::new();
    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                row: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: *line,
                column: c + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    row: *line,
                    column: c + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
    }
    let x = Array2::from_shape_vec((n, d), values).expect("row widths checked");
    let labels = label_idx.map(|_| encode_labels(raw_labels));
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    LabeledDataset::new(x, labels, name)
}

/// Integer labels are kept as-is; otherwise distinct strings are numbered in
/// order of first appearance.
fn encode_labels(raw: Vec<String>) -> Vec<i64> {
    let as_int: Option<Vec<i64>> = raw
        .iter()
        .map(|s| {
            s.parse::<i64>().ok().or_else(|| {
                s.parse::<f64>().ok().filter(|v| v.fract() == 0.0 && v.abs() < 9e15).map(|v| v as i64)
            })
        })
        .collect();
    if let Some(v) = as_int {
        return v;
    }
    let mut ids: HashMap<String, i64> = HashMap::new();
    raw.into_iter()
        .map(|s| {
            let next = ids.len() as i64;
            *ids.entry(s).or_insert(next)
        })
        .collect()
}

fn idx_header(cur: &mut Cursor<&[u8]>, path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let fmt = |message: String| Error::Format { path: path.into(), message };
    let found = cur.read_u32::<BigEndian>().map_err(|_| fmt("file too short for an IDX header".into()))?;
    if found != magic {
        return Err(fmt(format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    (0..dims)
        .map(|_| {
            cur.read_u32::<BigEndian>()
                .map(|v| v as usize)
                .map_err(|_| fmt("truncated IDX dimension header".into()))
        })
        .collect()
}

fn idx_payload(cur: &mut Cursor<&[u8]>, path: &Path, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    cur.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    if buf.len() != len {
        return Err(Error::Format {
            path: path.into(),
            message: if buf.len() < len {
                format!("truncated payload: expected {len} bytes, found {}", buf.len())
            } else {
                format!("{} unexpected trailing bytes", buf.len() - len)
            },
        });
    }
    Ok(buf)
}

/// Loads IDX images (one flattened row per image, pixels scaled to `[0, 1]`)
/// and, optionally, their labels.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let mut cur = Cursor::new(bytes.as_slice());
    let dims = idx_header(&mut cur, images_path, IDX_IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = idx_payload(&mut cur, images_path, n * rows * cols)?;
    let x = Array2::from_shape_vec((n, rows * cols), pixels.into_iter().map(|p| p as f64 / 255.0).collect())
        .expect("payload length checked");

    let labels = match labels_path {
        None => None,
        Some(lp) => {
            let bytes = fs::read(lp).map_err(|e| Error::io(lp, e))?;
            let mut cur = Cursor::new(bytes.as_slice());
            let count = idx_header(&mut cur, lp, IDX_LABELS_MAGIC, 1)?[0];
            if count != n {
                return Err(Error::Format {
                    path: lp.into(),
                    message: format!("{count} labels for {n} images"),
                });
            }
            Some(idx_payload(&mut cur, lp, count)?.into_iter().map(i64::from).collect())
        }
    };
    let name = images_path.file_stem().map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    LabeledDataset::new(x, labels, name)
}

fn write_table(path: &Path, header: Vec<String>, x: ArrayView2<'_, f64>, labels: Option<&[i64]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != x.nrows() {
            return Err(Error::Input(format!("{} labels for {} rows", l.len(), x.nrows())));
        }
    }
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format { path: path.into(), message: format!("{other:?}") },
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(&header).map_err(to_err)?;
    for (i, r) in x.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `y1..ym[,label]` with one row per embedded point.
pub fn write_embedding_csv(y: ArrayView2<'_, f64>, labels: Option<&[i64]>, path: impl AsRef<Path>) -> Result<()> {
    let mut header: Vec<String> = (1..=y.ncols()).map(|c| format!("y{c}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    write_table(path.as_ref(), header, y, labels)
}

/// Writes `x1..xd[,label]`.
pub fn write_dataset_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut header: Vec<String> = (1..=data.dim()).map(|c| format!("x{c}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    write_table(path.as_ref(), header, data.x.view(), data.labels.as_deref())
}

pub fn write_report_json(report: &TrustworthinessReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path)
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<TrustworthinessReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const SVG_SIZE: f64 = 800.0;
const SVG_MARGIN: f64 = 0.05 * SVG_SIZE;
const POINT_RADIUS: f64 = 3.0;

/// Ten-color categorical palette, cycled for larger label sets.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Static SVG scatter of a 2-D embedding, one color per label class.
/// Data is scaled uniformly (aspect ratio kept) into an 800×800 viewport with
/// a 5% margin.
pub fn scatter_svg(y: ArrayView2<'_, f64>, labels: Option<&[i64]>) -> Result<String> {
    if y.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "scatter plots need a 2-D embedding, got {} columns",
            y.ncols()
        )));
    }
    if let Some(l) = labels {
        if l.len() != y.nrows() {
            return Err(Error::Input(format!("{} labels for {} points", l.len(), y.nrows())));
        }
    }
    let bounds = |c: usize| {
        y.column(c).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    };
    let ((x0, x1), (y0, y1)) = (bounds(0), bounds(1));
    let inner = SVG_SIZE - 2.0 * SVG_MARGIN;
    let span = (x1 - x0).max(y1 - y0);
    let scale = if span > 0.0 { inner / span } else { 0.0 };
    let off_x = SVG_MARGIN + 0.5 * (inner - scale * (x1 - x0));
    let off_y = SVG_MARGIN + 0.5 * (inner - scale * (y1 - y0));

    let classes: BTreeSet<i64> = labels.map(|l| l.iter().copied().collect()).unwrap_or_default();
    let color_of = |i: usize| match labels {
        Some(l) => PALETTE[classes.range(..l[i]).count() % PALETTE.len()],
        None => PALETTE[0],
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in y.rows().into_iter().enumerate() {
        let cx = off_x + scale * (p[0] - x0);
        // SVG y grows downwards
        let cy = SVG_SIZE - (off_y + scale * (p[1] - y0));
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{POINT_RADIUS}" fill="{}" fill-opacity="0.8"/>"#,
            color_of(i)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_scatter_svg(y: ArrayView2<'_, f64>, labels: Option<&[i64]>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = scatter_svg(y, labels)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
