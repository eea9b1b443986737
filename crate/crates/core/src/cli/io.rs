//! File formats: field CSV, diagnostics JSON lines, plain graymaps.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::evolve::Diagnostics;
use crate::grid::{FieldRole, GridSpec, ScalarField};

/// `x,y,<name>` with one row per cell in storage order and 17 significant
/// digits, which round-trips every binary64 value.
pub fn field_csv(field: &ScalarField, name: &str) -> String {
    let g = field.grid();
    let mut s = format!("x,y,{name}\n");
    for (k, v) in field.values().iter().enumerate() {
        let (x, y) = g.center(k);
        s.push_str(&format!("{x:.16e},{y:.16e},{v:.16e}\n"));
    }
    s
}

pub fn write_field_csv(field: &ScalarField, name: &str, path: &Path) -> Result<()> {
    fs::write(path, field_csv(field, name))?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`] onto `grid`, checking the
/// cell-center coordinates.
pub fn read_field_csv(path: &Path, grid: &GridSpec, role: FieldRole) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    parse_field_csv(&text, grid, role)
}

pub fn parse_field_csv(text: &str, grid: &GridSpec, role: FieldRole) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != 3 || cols[0] != "x" || cols[1] != "y" {
        return Err(LabError::Parse { line: 1, message: format!("expected header x,y,<name>, got `{header}`") });
    }
    let tol = 1e-9 * grid.width().max(grid.length());
    let mut values = Vec::with_capacity(grid.cells());
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| LabError::Parse { line: n + 1, message: m.to_string() };
        let nums: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("malformed number"))?;
        if nums.len() != 3 {
            return Err(bad("expected 3 columns"));
        }
        let k = values.len();
        if k >= grid.cells() {
            return Err(bad("more rows than grid cells"));
        }
        let (x, y) = grid.center(k);
        if (nums[0] - x).abs() > tol || (nums[1] - y).abs() > tol {
            return Err(bad("coordinates do not match the grid"));
        }
        values.push(nums[2]);
    }
    if values.len() != grid.cells() {
        return Err(LabError::Field(format!("expected {} rows, got {}", grid.cells(), values.len())));
    }
    ScalarField::new(*grid, role, values)
}

pub fn diagnostics_jsonl(diags: &[Diagnostics]) -> String {
    let mut s = String::new();
    for d in diags {
        s.push_str(&serde_json::to_string(d).expect("diagnostics serialize"));
        s.push('\n');
    }
    s
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<Diagnostics>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| LabError::Parse { line: n + 1, message: e.to_string() }))
        .collect()
}

/// Plain graymap with 255 levels and linear min-max scaling; row `j = 0`
/// comes first, so `y` increases downward. Returns `false` when the field
/// is constant, in which case every pixel is 0.
pub fn heatmap_pgm(field: &ScalarField) -> (String, bool) {
    let g = field.grid();
    let (lo, hi) = (field.min(), field.max());
    let spread = hi - lo;
    let ok = spread > 0.0;
    let mut s = format!("P2\n{} {}\n255\n", g.nx(), g.ny());
    for j in 0..g.ny() {
        let row: Vec<String> = (0..g.nx())
            .map(|i| {
                let v = field.values()[g.idx(i, j)];
                let level = if ok { ((v - lo) / spread * 255.0).round() as u8 } else { 0 };
                level.to_string()
            })
            .collect();
        // plain PGM lines stay under 70 characters
        for chunk in row.chunks(16) {
            s.push_str(&chunk.join(" "));
            s.push('\n');
        }
    }
    (s, ok)
}

/// Writes the heatmap of `field`; `Ok(false)` flags a constant field.
pub fn export_heatmap(field: &ScalarField, path: &Path) -> Result<bool> {
    let (text, ok) = heatmap_pgm(field);
    fs::write(path, text)?;
    Ok(ok)
}

/// Width, height and pixels of a plain graymap.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |m: &str| LabError::Parse { line: 0, message: format!("pgm: {m}") };
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut num = || -> Result<usize> { tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad header")) };
    let (w, h, max) = (num()?, num()?, num()?);
    if max != 255 {
        return Err(bad("expected 255 levels"));
    }
    let px = (0..w * h)
        .map(|_| num().and_then(|v| u8::try_from(v).map_err(|_| bad("pixel out of range"))))
        .collect::<Result<Vec<u8>>>()?;
    Ok((w, h, px))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn csv_round_trips_bitwise() {
        let g = make_grid(0.7, 1.3, 5, 4).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Surface, |x, y| (x * 1e3).sin() / 3.0 + y * 1e-300).unwrap();
        let text = field_csv(&f, "H");
        assert!(text.starts_with("x,y,H\n"));
        let back = parse_field_csv(&text, &g, FieldRole::Surface).unwrap();
        assert_eq!(back.values(), f.values());
        let other = make_grid(0.7, 1.3, 4, 5).unwrap();
        assert!(parse_field_csv(&text, &other, FieldRole::Surface).is_err());
    }

    #[test]
    fn constant_heatmap_is_black() {
        let g = make_grid(1.0, 1.0, 3, 2).unwrap();
        let f = ScalarField::constant(g, FieldRole::Generic, 4.0).unwrap();
        let (text, ok) = heatmap_pgm(&f);
        assert!(!ok);
        assert_eq!(text, "P2\n3 2\n255\n0 0 0\n0 0 0\n");
    }

    #[test]
    fn heatmap_scales_linearly() {
        let g = make_grid(1.0, 1.0, 3, 2).unwrap();
        let f = ScalarField::new(g, FieldRole::Generic, vec![-1.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(heatmap_pgm(&f).0, "P2\n3 2\n255\n0 128 255\n255 255 255\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
