//! Field, image and report files.
//!
//! Field CSV: header `x,u` (1D) or `x,y,u` (2D), one node per row, `x`
//! varying fastest, values in `{:.16e}` so a read-back is bit-exact.
//! Images are binary PGM (P5) with `[-1, 1]` mapped linearly to `[0, 255]`
//! by `floor((u + 1) / 2 * 255)`, clamped; the top row is the largest `y`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::analysis::{BranchPoint, LemmaReport};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::spectral::Spectrum;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_field_csv(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let grid = field.grid();
    let io = |e| Error::io(path, e);
    if grid.dimension() == 1 {
        writeln!(w, "x,u").map_err(io)?;
        for (i, u) in field.values().iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", grid.coordinate(i), u).map_err(io)?;
        }
    } else {
        writeln!(w, "x,y,u").map_err(io)?;
        for (k, u) in field.values().iter().enumerate() {
            let (x, y) = grid.node(k);
            writeln!(w, "{x:.16e},{y:.16e},{u:.16e}").map_err(io)?;
        }
    }
    finish(w, path)
}

/// Reads a field CSV; the grid is rebuilt from the first coordinate and the row count.
pub fn read_field_csv(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Config {
        path: path.display().to_string(),
        message: msg,
    };
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let dimension = match header.trim() {
        "x,u" => 1,
        "x,y,u" => 2,
        other => return Err(bad(format!("unexpected header `{other}`"))),
    };
    let mut first = None;
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", row + 2)))?;
        if cols.len() != dimension + 1 {
            return Err(bad(format!("line {}: expected {} columns", row + 2, dimension + 1)));
        }
        first.get_or_insert(cols[0]);
        values.push(cols[dimension]);
    }
    let n = if dimension == 1 {
        values.len()
    } else {
        let n = (values.len() as f64).sqrt().round() as usize;
        if n * n != values.len() {
            return Err(bad(format!("{} rows do not form a square lattice", values.len())));
        }
        n
    };
    let x0 = first.ok_or_else(|| bad("no data rows".into()))?;
    let grid = Grid::new(dimension, -x0, n).map_err(|e| bad(e.to_string()))?;
    Field::from_values(grid, values).map_err(|e| bad(e.to_string()))
}

/// Grey level for `u` under the `[-1, 1] -> [0, 255]` map.
pub fn pixel(u: f64) -> u8 {
    ((u + 1.0) * 0.5 * 255.0).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM; a 1D field becomes a single-row image.
pub fn write_image(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let grid = field.grid();
    let n = grid.points_per_axis();
    let rows = if grid.dimension() == 1 { 1 } else { n };
    let mut data = Vec::with_capacity(n * rows);
    for r in (0..rows).rev() {
        data.extend(field.values()[r * n..(r + 1) * n].iter().map(|&u| pixel(u)));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "P5\n{n} {rows}\n255\n").map_err(io)?;
    w.write_all(&data).map_err(io)?;
    finish(w, path)
}

/// 8-bit greyscale PNG with the same pixel map and orientation as [`write_image`].
#[cfg(feature = "png")]
pub fn write_png(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let grid = field.grid();
    let n = grid.points_per_axis();
    let rows = if grid.dimension() == 1 { 1 } else { n };
    let mut data = Vec::with_capacity(n * rows);
    for r in (0..rows).rev() {
        data.extend(field.values()[r * n..(r + 1) * n].iter().map(|&u| pixel(u)));
    }
    let w = create(path)?;
    let mut encoder = png::Encoder::new(w, n as u32, rows as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(err)?;
    writer.write_image_data(&data).map_err(err)?;
    writer.finish().map_err(err)
}

/// Pretty-printed JSON of any serialisable report.
pub fn write_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// `index,eigenvalue` with 1-based indices in retained (descending) order.
pub fn write_spectrum_csv(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "index,eigenvalue").map_err(io)?;
    for (j, l) in spectrum.eigenvalues().iter().enumerate() {
        writeln!(w, "{},{:.16e}", j + 1, l).map_err(io)?;
    }
    finish(w, path)
}

/// `b,amplitude,residual,converged`; gaps carry empty amplitude/residual cells.
pub fn write_branch_csv(points: &[BranchPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "b,amplitude,residual,converged").map_err(io)?;
    for p in points {
        if p.converged {
            writeln!(w, "{:.16e},{:.16e},{:.16e},true", p.b, p.amplitude, p.residual).map_err(io)?;
        } else {
            writeln!(w, "{:.16e},,{:.16e},false", p.b, p.residual).map_err(io)?;
        }
    }
    finish(w, path)
}

/// `lemma,hypothesis,value,threshold,satisfied` plus a final `applicable` row.
pub fn write_lemma_csv(report: &LemmaReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "lemma,hypothesis,value,threshold,satisfied").map_err(io)?;
    let tag = report.lemma.tag();
    for h in &report.hypotheses {
        writeln!(w, "{tag},{},{:.16e},{:.16e},{}", h.name, h.value, h.threshold, h.satisfied).map_err(io)?;
    }
    writeln!(w, "{tag},applicable,,,{}", report.applicable).map_err(io)?;
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[cfg(feature = "png")]
    #[test]
    fn png_header() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 1.0, 5).unwrap();
        let path = dir.path().join("u.png");
        write_png(&Field::from_fn(grid, |x, _| x), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    }

    #[test]
    fn three_point_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid::new(1, 1.0, 3).unwrap();
        let f = Field::from_values(grid, vec![-1.0, 0.0, 1.0]).unwrap();
        write_field_csv(&f, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "x,u");
        let back = read_field_csv(&path).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid::new(2, 3.7, 11).unwrap();
        let f = Field::from_fn(grid, |x, y| (x * 1.234567).sin() / (1.0 + y * y) + 1e-300);
        write_field_csv(&f, &path).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert!(back.grid().same_lattice(&grid));
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn image_levels() {
        assert_eq!(pixel(-1.0), 0);
        assert_eq!(pixel(0.0), 127);
        assert_eq!(pixel(1.0), 255);
        assert_eq!(pixel(-7.0), 0);
        assert_eq!(pixel(3.0), 255);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let grid = Grid::new(2, 1.0, 3).unwrap();
        write_image(&Field::from_values(grid, vec![-1.0; 9]).unwrap(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 3\n255\n"));
        assert!(bytes[11..].iter().all(|&p| p == 0));
    }

    #[test]
    fn image_top_row_is_largest_y() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let grid = Grid::new(2, 1.0, 3).unwrap();
        let f = Field::from_fn(grid, |_, y| y);
        write_image(&f, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[11..14], &[255, 255, 255]);
        assert_eq!(&bytes[17..20], &[0, 0, 0]);
    }
}
