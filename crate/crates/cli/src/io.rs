//! On-disk formats: EMVF binary fields, CSV tables and the ensemble manifest.
//!
//! EMVF (little endian): magic `EMVF`, `u32` version, `u32` ndim, one `u32`
//! cell count per axis, `u32` ncomp, `f64` γ (0 for scalar laws), `f64` time,
//! then `ncomp · cells` `f64` values, cell-major with `x` fastest and the
//! components of one cell contiguous. The domain is not stored; it lives in
//! the manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use emv::ensemble::{EnsembleResult, Snapshot, SnapshotData};
use emv::grid::{Field, Grid};
use thiserror::Error;

pub const EMVF_MAGIC: &[u8; 4] = b"EMVF";
pub const EMVF_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not an EMVF file")]
    BadMagic,
    #[error("unsupported EMVF version {0}")]
    BadVersion(u32),
    #[error("malformed field file: {0}")]
    Malformed(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

fn at(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Full-precision scientific notation (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field(w: &mut impl Write, field: &Field, gamma: f64) -> io::Result<()> {
    let g = &field.grid;
    w.write_all(EMVF_MAGIC)?;
    w.write_all(&EMVF_VERSION.to_le_bytes())?;
    w.write_all(&(g.ndim() as u32).to_le_bytes())?;
    for a in 0..g.ndim() {
        w.write_all(&(g.n(a) as u32).to_le_bytes())?;
    }
    w.write_all(&(field.ncomp as u32).to_le_bytes())?;
    w.write_all(&gamma.to_le_bytes())?;
    w.write_all(&field.time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.data.len() * 8);
    for x in &field.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub n: Vec<usize>,
    pub ncomp: usize,
    pub gamma: f64,
    pub time: f64,
}

fn read_u32(r: &mut impl Read) -> Result<u32, IoError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_header(r: &mut impl Read) -> Result<FieldHeader, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| IoError::BadMagic)?;
    if &magic != EMVF_MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != EMVF_VERSION {
        return Err(IoError::BadVersion(version));
    }
    let ndim = read_u32(r)? as usize;
    if !(1..=2).contains(&ndim) {
        return Err(IoError::Malformed(format!("ndim {ndim}")));
    }
    let n = (0..ndim)
        .map(|_| read_u32(r).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let ncomp = read_u32(r)? as usize;
    Ok(FieldHeader {
        n,
        ncomp,
        gamma: read_f64(r)?,
        time: read_f64(r)?,
    })
}

/// Reads a field on the domain `[lo, hi]`; returns it with the stored γ.
pub fn read_field(r: &mut impl Read, lo: [f64; 2], hi: [f64; 2]) -> Result<(Field, f64), IoError> {
    let h = read_header(r)?;
    let grid = match h.n.as_slice() {
        [n] => Grid::new_1d(*n, lo[0], hi[0]),
        [nx, ny] => Grid::new_2d([*nx, *ny], lo, hi),
        _ => unreachable!(),
    }
    .map_err(|e| IoError::Malformed(e.to_string()))?;
    let len = grid.cells() * h.ncomp;
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| IoError::Malformed(format!("expected {len} values")))?;
    if r.read(&mut [0u8; 1])
        .map_err(|e| IoError::Malformed(e.to_string()))?
        != 0
    {
        return Err(IoError::Malformed("trailing bytes".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = Field::from_data(grid, h.ncomp, data, h.time)
        .map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok((field, h.gamma))
}

pub fn save_field(path: &Path, field: &Field, gamma: f64) -> Result<(), IoError> {
    let mut buf = Vec::new();
    write_field(&mut buf, field, gamma).map_err(at(path))?;
    fs::write(path, buf).map_err(at(path))
}

pub fn load_field(path: &Path, lo: [f64; 2], hi: [f64; 2]) -> Result<(Field, f64), IoError> {
    let bytes = fs::read(path).map_err(at(path))?;
    read_field(&mut bytes.as_slice(), lo, hi)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(at(parent))?;
    }
    fs::write(path, text).map_err(at(path))
}

/// Builds a CSV table: `header` then one row per record.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(&c);
            first = false;
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_text(path, &self.text)
    }
}

/// Coordinate column names for a grid.
pub fn coord_header(grid: &Grid) -> Vec<&'static str> {
    if grid.ndim() == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

pub fn coords(grid: &Grid, cell: usize) -> Vec<String> {
    let (i, j) = (cell % grid.nx(), cell / grid.nx());
    let c = grid.center(i, j);
    (0..grid.ndim()).map(|a| fmt_f64(c[a])).collect()
}

/// One row per cell: coordinates then `ncomp` values.
pub fn field_csv(grid: &Grid, ncomp: usize, values: &[f64], names: &[String]) -> Csv {
    let mut header: Vec<&str> = coord_header(grid);
    header.extend(names.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for cell in 0..grid.cells() {
        let mut row = coords(grid, cell);
        row.extend(
            values[cell * ncomp..(cell + 1) * ncomp]
                .iter()
                .map(|x| fmt_f64(*x)),
        );
        csv.row(row);
    }
    csv
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Retained {
    Full,
    Sorted(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestSnapshot {
    pub time: f64,
    /// `(sample index, path)` for full retention; a single `(usize::MAX,
    /// path)` entry holding the sorted per-cell samples otherwise.
    pub files: Vec<(usize, PathBuf)>,
}

/// Text manifest of an ensemble directory. Paths are relative to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub spec_hash: String,
    pub seed: u64,
    pub preset: String,
    pub resolution: usize,
    pub samples: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub gamma: f64,
    pub retention: Retained,
    pub status: Vec<(usize, SampleStatus)>,
    pub snapshots: Vec<ManifestSnapshot>,
}

pub const SORTED: usize = usize::MAX;

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "emv-manifest {MANIFEST_VERSION}");
        let _ = writeln!(s, "spec_hash {}", self.spec_hash);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "preset {}", self.preset);
        let _ = writeln!(s, "resolution {}", self.resolution);
        let _ = writeln!(s, "samples {}", self.samples);
        let _ = writeln!(
            s,
            "domain {} {} {} {}",
            self.lo[0], self.lo[1], self.hi[0], self.hi[1]
        );
        let _ = writeln!(s, "gamma {}", self.gamma);
        match self.retention {
            Retained::Full => {
                let _ = writeln!(s, "retention full");
            }
            Retained::Sorted(c) => {
                let _ = writeln!(s, "retention sorted {c}");
            }
        }
        for (k, st) in &self.status {
            match st {
                SampleStatus::Ok => {
                    let _ = writeln!(s, "sample {k} ok");
                }
                SampleStatus::Failed(m) => {
                    let _ = writeln!(s, "sample {k} failed {}", m.replace('\n', " "));
                }
            }
        }
        for (i, snap) in self.snapshots.iter().enumerate() {
            let _ = writeln!(s, "snapshot {i} {}", snap.time);
            for (k, p) in &snap.files {
                let who = if *k == SORTED {
                    "sorted".to_string()
                } else {
                    k.to_string()
                };
                let _ = writeln!(s, "file {i} {who} {}", p.display());
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut m = Manifest {
            spec_hash: String::new(),
            seed: 0,
            preset: String::new(),
            resolution: 0,
            samples: 0,
            lo: [0.0; 2],
            hi: [0.0; 2],
            gamma: 0.0,
            retention: Retained::Full,
            status: Vec::new(),
            snapshots: Vec::new(),
        };
        let mut seen_version = false;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| IoError::Manifest {
                line: line_no,
                message,
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
            match key {
                "emv-manifest" => {
                    if rest != MANIFEST_VERSION.to_string() {
                        return Err(err(format!("unsupported version {rest}")));
                    }
                    seen_version = true;
                }
                "spec_hash" => m.spec_hash = rest.to_string(),
                "seed" => m.seed = rest.parse().map_err(|e| err(format!("seed: {e}")))?,
                "preset" => m.preset = rest.to_string(),
                "resolution" => m.resolution = int(rest)?,
                "samples" => m.samples = int(rest)?,
                "gamma" => m.gamma = num(rest)?,
                "domain" => {
                    let v = rest
                        .split_whitespace()
                        .map(num)
                        .collect::<Result<Vec<_>, _>>()?;
                    if v.len() != 4 {
                        return Err(err("domain needs four numbers".into()));
                    }
                    m.lo = [v[0], v[1]];
                    m.hi = [v[2], v[3]];
                }
                "retention" => {
                    m.retention = match rest.split_whitespace().collect::<Vec<_>>().as_slice() {
                        ["full"] => Retained::Full,
                        ["sorted", c] => Retained::Sorted(int(c)?),
                        _ => return Err(err(format!("bad retention {rest:?}"))),
                    }
                }
                "sample" => {
                    let mut it = rest.splitn(3, ' ');
                    let k = int(it.next().unwrap_or(""))?;
                    let st = match (it.next(), it.next()) {
                        (Some("ok"), None) => SampleStatus::Ok,
                        (Some("failed"), msg) => {
                            SampleStatus::Failed(msg.unwrap_or("").to_string())
                        }
                        _ => return Err(err(format!("bad sample line {rest:?}"))),
                    };
                    m.status.push((k, st));
                }
                "snapshot" => {
                    let mut it = rest.split_whitespace();
                    let i = int(it.next().unwrap_or(""))?;
                    if i != m.snapshots.len() {
                        return Err(err(format!("snapshot {i} out of order")));
                    }
                    m.snapshots.push(ManifestSnapshot {
                        time: num(it.next().unwrap_or(""))?,
                        files: Vec::new(),
                    });
                }
                "file" => {
                    let mut it = rest.splitn(3, ' ');
                    let i = int(it.next().unwrap_or(""))?;
                    let who = match it.next() {
                        Some("sorted") => SORTED,
                        Some(k) => int(k)?,
                        None => return Err(err("missing sample".into())),
                    };
                    let path = it.next().ok_or_else(|| err("missing path".into()))?;
                    m.snapshots
                        .get_mut(i)
                        .ok_or_else(|| err(format!("unknown snapshot {i}")))?
                        .files
                        .push((who, PathBuf::from(path)));
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        if !seen_version {
            return Err(IoError::Manifest {
                line: 1,
                message: "missing emv-manifest header".into(),
            });
        }
        Ok(m)
    }

    pub fn failures(&self) -> usize {
        self.status
            .iter()
            .filter(|(_, s)| matches!(s, SampleStatus::Failed(_)))
            .count()
    }
}

fn snapshot_dir(i: usize) -> PathBuf {
    PathBuf::from(format!("snapshots/t{i:03}"))
}

/// Writes the snapshots, the per-sample summary CSV and the manifest of an
/// ensemble into `dir`.
pub fn write_ensemble(
    dir: &Path,
    result: &EnsembleResult,
    preset: &str,
    resolution: usize,
    samples: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    gamma: f64,
) -> Result<Manifest, IoError> {
    let mut status: Vec<(usize, SampleStatus)> = result
        .indices
        .iter()
        .map(|&k| (k, SampleStatus::Ok))
        .chain(
            result
                .failures
                .iter()
                .map(|f| (f.index, SampleStatus::Failed(f.message.clone()))),
        )
        .collect();
    status.sort_by_key(|s| s.0);

    let mut snapshots = Vec::new();
    let mut retention = Retained::Full;
    for (i, snap) in result.snapshots.iter().enumerate() {
        let sub = snapshot_dir(i);
        fs::create_dir_all(dir.join(&sub)).map_err(at(dir))?;
        let mut files = Vec::new();
        match &snap.data {
            SnapshotData::Fields(fields) => {
                for (&k, f) in result.indices.iter().zip(fields) {
                    let rel = sub.join(format!("sample_{k:06}.emvf"));
                    save_field(&dir.join(&rel), f, gamma)?;
                    files.push((k, rel));
                }
            }
            SnapshotData::Sorted { component, values } => {
                retention = Retained::Sorted(*component);
                let m = snap.sample_count();
                let f = Field::from_data(snap.grid.clone(), m.max(1), values.clone(), snap.time)
                    .map_err(|e| IoError::Malformed(e.to_string()))?;
                let rel = sub.join("sorted.emvf");
                if m > 0 {
                    save_field(&dir.join(&rel), &f, gamma)?;
                    files.push((SORTED, rel));
                }
            }
        }
        snapshots.push(ManifestSnapshot {
            time: snap.time,
            files,
        });
    }

    let mut csv = Csv::new(&[
        "sample",
        "steps",
        "max_abs_state",
        "weak_bv",
        "initial_entropy",
        "final_entropy",
        "max_entropy_increase",
    ]);
    for s in &result.summaries {
        csv.row([
            s.index.to_string(),
            s.steps.to_string(),
            fmt_f64(s.max_abs_state),
            fmt_f64(s.weak_bv),
            fmt_f64(s.initial_entropy),
            fmt_f64(s.final_entropy),
            fmt_f64(s.max_entropy_increase),
        ]);
    }
    csv.save(&dir.join("samples.csv"))?;

    let manifest = Manifest {
        spec_hash: result.spec_hash.clone(),
        seed: result.seed,
        preset: preset.to_string(),
        resolution,
        samples,
        lo,
        hi,
        gamma,
        retention,
        status,
        snapshots,
    };
    write_text(&dir.join(MANIFEST_NAME), &manifest.to_text())?;
    Ok(manifest)
}

/// An ensemble read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedEnsemble {
    pub manifest: Manifest,
    pub snapshots: Vec<Snapshot>,
}

impl LoadedEnsemble {
    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(|s| &s.grid)
    }
}

pub fn load_ensemble(dir: &Path) -> Result<LoadedEnsemble, IoError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(at(&path))?;
    let manifest = Manifest::parse(&text)?;
    let mut snapshots = Vec::new();
    for ms in &manifest.snapshots {
        let mut fields = Vec::new();
        for (_, rel) in &ms.files {
            let (f, _) = load_field(&dir.join(rel), manifest.lo, manifest.hi)?;
            fields.push(f);
        }
        let first = fields.first().ok_or_else(|| {
            IoError::Malformed(format!("snapshot at t = {} has no files", ms.time))
        })?;
        let grid = first.grid.clone();
        let snap = match manifest.retention {
            Retained::Full => {
                let ncomp = first.ncomp;
                if fields.iter().any(|f| !f.same_layout(first)) {
                    return Err(IoError::Malformed("sample layouts differ".into()));
                }
                Snapshot {
                    time: ms.time,
                    grid,
                    ncomp,
                    data: SnapshotData::Fields(fields),
                }
            }
            Retained::Sorted(component) => {
                let f = fields.pop().unwrap();
                Snapshot {
                    time: ms.time,
                    grid,
                    ncomp: manifest
                        .preset
                        .parse::<emv::presets::Preset>()
                        .map_or(component + 1, |p| p.model().ncomp()),
                    data: SnapshotData::Sorted {
                        component,
                        values: f.data,
                    },
                }
            }
        };
        snapshots.push(snap);
    }
    Ok(LoadedEnsemble {
        manifest,
        snapshots,
    })
}
