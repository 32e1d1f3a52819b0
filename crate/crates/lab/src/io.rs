//! File formats and atomic writes.
//!
//! A grid function is stored as a CSV matrix: `n` lines of `n`
//! comma-separated values, line `j` holding the nodes `(x_i, y_j)` for
//! `i = 0..n`. The sidecar `<name>.json` carries `{bounds, n, h}`. Numbers are
//! printed in shortest round-trip form, so files are byte-stable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mplab_core::{Bounds, GridFunction, Measure, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("no file name in {}", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BoundsJson {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl From<Bounds> for BoundsJson {
    fn from(b: Bounds) -> Self {
        BoundsJson {
            x_min: b.x_min,
            x_max: b.x_max,
            y_min: b.y_min,
            y_max: b.y_max,
        }
    }
}

impl From<BoundsJson> for Bounds {
    fn from(b: BoundsJson) -> Self {
        Bounds {
            x_min: b.x_min,
            x_max: b.x_max,
            y_min: b.y_min,
            y_max: b.y_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridHeader {
    pub bounds: BoundsJson,
    pub n: usize,
    pub h: f64,
}

pub fn grid_csv(u: &GridFunction) -> String {
    let n = u.grid().n();
    let mut s = String::with_capacity(n * n * 24);
    for row in u.values().chunks(n) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `path` and its JSON header sidecar.
pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    let g = u.grid();
    write_atomic(path, grid_csv(u).as_bytes())?;
    write_json(
        &header_path(path),
        &GridHeader {
            bounds: g.bounds().into(),
            n: g.n(),
            h: g.h(),
        },
    )
}

/// A grid function read back from disk; bounds come from the sidecar when present.
#[derive(Debug, Clone)]
pub struct GridFile {
    pub bounds: Option<Bounds>,
    pub n: usize,
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn with_default_bounds(mut self, b: Bounds) -> Self {
        self.bounds.get_or_insert(b);
        self
    }

    /// Bilinear interpolation, with the zero boundary values included.
    pub fn interpolate(&self, p: Point) -> f64 {
        let b = self.bounds.unwrap_or(Bounds::UNIT_SQUARE);
        let n = self.n;
        let h = (b.x_max - b.x_min) / (n + 1) as f64;
        let at = |i: isize, j: isize| -> f64 {
            if i < 1 || j < 1 || i > n as isize || j > n as isize {
                0.0
            } else {
                self.values[(j as usize - 1) * n + (i as usize - 1)]
            }
        };
        let sx = (p.x - b.x_min) / h;
        let sy = (p.y - b.y_min) / h;
        if !(0.0..=(n + 1) as f64).contains(&sx) || !(0.0..=(n + 1) as f64).contains(&sy) {
            return 0.0;
        }
        let (i0, j0) = (sx.floor() as isize, sy.floor() as isize);
        let (tx, ty) = (sx - i0 as f64, sy - j0 as f64);
        (1.0 - tx) * (1.0 - ty) * at(i0, j0)
            + tx * (1.0 - ty) * at(i0 + 1, j0)
            + (1.0 - tx) * ty * at(i0, j0 + 1)
            + tx * ty * at(i0 + 1, j0 + 1)
    }
}

pub fn read_grid_csv(path: &Path) -> Result<GridFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: line {}", path.display(), ln + 1))?;
        rows.push(row);
    }
    let n = rows.len();
    if n < 3 {
        bail!("{}: need at least 3 rows, got {n}", path.display());
    }
    if let Some((j, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        bail!("{}: row {} has {} values, expected {n}", path.display(), j + 1, r.len());
    }
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if values.iter().any(|v| !v.is_finite()) {
        bail!("{}: non-finite value", path.display());
    }
    let hp = header_path(path);
    let bounds = if hp.exists() {
        let h: GridHeader = serde_json::from_slice(&fs::read(&hp)?).with_context(|| format!("parsing {}", hp.display()))?;
        if h.n != n {
            bail!("{}: header says n = {}, matrix has {n} rows", hp.display(), h.n);
        }
        Some(h.bounds.into())
    } else {
        None
    };
    Ok(GridFile { bounds, n, values })
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomJson {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
    /// Collection disk radius used by the extraction, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct DensityRef {
    pub kind: &'static str,
    pub path: String,
}

/// A measure file that the config loader can read back.
#[derive(Debug, Serialize)]
pub struct MeasureJson {
    pub density: DensityRef,
    pub atoms: Vec<AtomJson>,
    pub density_mass: f64,
    pub total_variation: f64,
}

/// Writes `<stem>.json` and the density matrix `<stem>_density.csv`.
pub fn write_measure(dir: &Path, stem: &str, m: &Measure, radii: Option<&[f64]>) -> Result<()> {
    let dname = format!("{stem}_density.csv");
    write_grid_function(&dir.join(&dname), m.density())?;
    let atoms = m
        .atoms()
        .iter()
        .enumerate()
        .map(|(k, a)| AtomJson {
            x: a.point.x,
            y: a.point.y,
            mass: a.mass,
            radius: radii.and_then(|r| r.get(k).copied()),
        })
        .collect();
    let doc = MeasureJson {
        density: DensityRef {
            kind: "file",
            path: dname,
        },
        atoms,
        density_mass: m.density().integral(),
        total_variation: m.total_variation(),
    };
    write_json(&dir.join(format!("{stem}.json")), &doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mplab_core::Grid;

    #[test]
    fn csv_round_trip_and_interpolation() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::unit_square(7).unwrap();
        let u = GridFunction::from_fn(g, |p| p.x * (1.0 - p.x) + 3.0 * p.y).unwrap();
        let path = dir.path().join("u.csv");
        write_grid_function(&path, &u).unwrap();
        let back = read_grid_csv(&path).unwrap();
        assert_eq!(back.n, 7);
        assert_eq!(back.values, u.values());
        assert_eq!(back.bounds, Some(Bounds::UNIT_SQUARE));
        for k in 0..g.len() {
            assert!((back.interpolate(g.node_at(k)) - u.values()[k]).abs() < 1e-12);
        }
        // halfway between two nodes on a linear-in-y field
        let mid = Point::new(g.node(3, 2).x, 0.5 * (g.node(3, 2).y + g.node(3, 3).y));
        assert!((back.interpolate(mid) - 0.5 * (u.get(3, 2) + u.get(3, 3))).abs() < 1e-12);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn rejects_ragged_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,2,3\n4,5\n7,8,9\n").unwrap();
        let e = read_grid_csv(&p).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }

    #[test]
    fn hash_is_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
