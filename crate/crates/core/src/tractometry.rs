//! Bundle shape measures from masks and streamlines.

use std::io::{Read, Write};

use ndarray::ArrayView3;
use serde::Serialize;

use crate::{Error, Result, VoxelGrid};

/// Ordered polyline in millimeters with at least two points and no repeated
/// consecutive points.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    points: Vec<[f64; 3]>,
}

impl Streamline {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid(format!(
                "streamline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(
                "streamline has non-finite coordinates".into(),
            ));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Invalid(format!("streamline repeats point {i}")));
        }
        Ok(Streamline { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn streamline_length(s: &Streamline) -> f64 {
    s.points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// Length over endpoint distance; `None` for closed loops.
pub fn streamline_curl(s: &Streamline) -> Option<f64> {
    let chord = dist(&s.points[0], s.points.last().unwrap());
    if chord == 0.0 {
        return None;
    }
    let ratio = streamline_length(s) / chord;
    // Collinear points give 1 in exact arithmetic; absorb summation rounding.
    Some(if ratio < 1.0 + 1e-12 { 1.0 } else { ratio })
}

fn positive(v: f32) -> bool {
    v >= 0.5
}

/// Positive voxel count times voxel volume.
pub fn mask_volume(mask: ArrayView3<f32>, grid: &VoxelGrid) -> f64 {
    mask.iter().filter(|&&v| positive(v)).count() as f64 * grid.voxel_volume()
}

/// Total area of voxel faces that separate a positive voxel from background or the
/// volume border.
pub fn mask_surface_area(mask: ArrayView3<f32>, grid: &VoxelGrid) -> f64 {
    let [sx, sy, sz] = grid.voxel_size();
    let face = [sy * sz, sx * sz, sx * sy];
    let (nx, ny, nz) = mask.dim();
    let dims = [nx, ny, nz];
    let mut exposed = [0usize; 3];
    for ((i, j, k), &v) in mask.indexed_iter() {
        if !positive(v) {
            continue;
        }
        let idx = [i, j, k];
        for (axis, count) in exposed.iter_mut().enumerate() {
            for up in [false, true] {
                let c = idx[axis];
                let inside = if up { c + 1 < dims[axis] } else { c > 0 };
                let neighbour_on = inside && {
                    let mut n = idx;
                    n[axis] = if up { c + 1 } else { c - 1 };
                    positive(mask[(n[0], n[1], n[2])])
                };
                if !neighbour_on {
                    *count += 1;
                }
            }
        }
    }
    (0..3).map(|a| exposed[a] as f64 * face[a]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BundleShape {
    pub surface_area: f64,
    pub volume: f64,
    pub mean_length: f64,
    /// `None` when every streamline is a closed loop.
    pub curl: Option<f64>,
}

pub const SHAPE_METRICS: [&str; 4] = ["surface_area", "volume", "mean_length", "curl"];

impl BundleShape {
    pub fn values(&self) -> [Option<f64>; 4] {
        [
            Some(self.surface_area),
            Some(self.volume),
            Some(self.mean_length),
            self.curl,
        ]
    }
}

pub fn bundle_shape(
    mask: ArrayView3<f32>,
    grid: &VoxelGrid,
    streamlines: &[Streamline],
) -> Result<BundleShape> {
    if streamlines.is_empty() {
        return Err(Error::Invalid(
            "bundle shape needs at least one streamline".into(),
        ));
    }
    let mean_length =
        streamlines.iter().map(streamline_length).sum::<f64>() / streamlines.len() as f64;
    let curls: Vec<f64> = streamlines.iter().filter_map(streamline_curl).collect();
    let curl = (!curls.is_empty()).then(|| curls.iter().sum::<f64>() / curls.len() as f64);
    Ok(BundleShape {
        surface_area: mask_surface_area(mask, grid),
        volume: mask_volume(mask, grid),
        mean_length,
        curl,
    })
}

/// Parse the plain-text streamline format: one `x y z` point per line, streamlines
/// separated by blank lines. Lines starting with `#` are comments.
pub fn parse_streamlines(text: &str) -> Result<Vec<Streamline>> {
    let mut out = Vec::new();
    let mut cur: Vec<[f64; 3]> = Vec::new();
    let mut start_line = 1;
    let flush = |cur: &mut Vec<[f64; 3]>, out: &mut Vec<Streamline>, line: usize| -> Result<()> {
        if cur.is_empty() {
            return Ok(());
        }
        let s = Streamline::new(std::mem::take(cur)).map_err(|e| {
            Error::format("streamlines", format!("block starting at line {line}: {e}"))
        })?;
        out.push(s);
        Ok(())
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            flush(&mut cur, &mut out, start_line)?;
            start_line = n + 2;
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::format(
                "streamlines",
                format!(
                    "line {}: expected 3 coordinates, got {}",
                    n + 1,
                    fields.len()
                ),
            ));
        }
        let mut p = [0.0; 3];
        for (slot, f) in p.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| {
                Error::format("streamlines", format!("line {}: bad number `{f}`", n + 1))
            })?;
        }
        cur.push(p);
    }
    flush(&mut cur, &mut out, start_line)?;
    Ok(out)
}

pub fn read_streamlines<R: Read>(mut input: R) -> Result<Vec<Streamline>> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::format("streamlines", e))?;
    parse_streamlines(&text)
}

pub fn write_streamlines<W: Write>(streamlines: &[Streamline], mut out: W) -> std::io::Result<()> {
    for (i, s) in streamlines.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        for p in &s.points {
            writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}
