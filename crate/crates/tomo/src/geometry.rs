//! Ray-discretization system matrices for parallel-beam X-ray CT and
//! reflector-based ultrasound computed tomography.
//!
//! Conventions: the grid is centered at the physical origin, row 0 is the top
//! of the image (largest y), columns grow with x. Angles are measured
//! counterclockwise from the +x axis; a projection at angle theta has its
//! detector array along (cos theta, sin theta) and rays running perpendicular
//! to it. Matrix entries are exact pixel-intersection lengths in the grid's
//! length unit (mm for CT, m for USCT).

use rayon::prelude::*;
use thiserror::Error;

use crate::sparse::SparseMatrix;

/// Sparse ray-discretization matrix: rows are rays, columns are pixels.
pub type SystemMatrix = SparseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("grid dims must be >= 1 and pixel size positive")]
    BadGrid,
    #[error("angles must be non-empty and lie in [0, 180)")]
    BadAngles,
    #[error("detector count must be >= 1 and spacing positive")]
    BadDetectors,
    #[error("element count must be >= 2")]
    BadElements,
    #[error("reflector depth {depth} outside the field of view (height {height})")]
    ReflectorOutsideFov { depth: f64, height: f64 },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

/// Reconstruction or simulation pixel grid, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImageGrid {
    /// Rows (image height in pixels).
    pub n1: usize,
    /// Columns (image width in pixels).
    pub n2: usize,
    /// Pixel side length in physical units.
    pub pixel_size: f64,
}

impl ImageGrid {
    pub fn new(n1: usize, n2: usize, pixel_size: f64) -> Result<Self, GeometryError> {
        if n1 == 0 || n2 == 0 || !(pixel_size > 0.0) {
            return Err(GeometryError::BadGrid);
        }
        Ok(Self { n1, n2, pixel_size })
    }

    pub fn pixel_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn width(&self) -> f64 {
        self.n2 as f64 * self.pixel_size
    }

    pub fn height(&self) -> f64 {
        self.n1 as f64 * self.pixel_size
    }

    /// Same physical extent at `factor` times the resolution.
    pub fn refine(&self, factor: usize) -> Self {
        Self {
            n1: self.n1 * factor,
            n2: self.n2 * factor,
            pixel_size: self.pixel_size / factor as f64,
        }
    }
}

/// Parallel-beam acquisition: a detector bank per projection angle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParallelBeamGeometry {
    /// Projection angles in degrees, each in [0, 180).
    pub angles_deg: Vec<f64>,
    pub detector_count: usize,
    pub detector_spacing: f64,
}

impl ParallelBeamGeometry {
    pub fn new(
        angles_deg: Vec<f64>,
        detector_count: usize,
        detector_spacing: f64,
    ) -> Result<Self, GeometryError> {
        if angles_deg.is_empty() || angles_deg.iter().any(|&a| !(0.0..180.0).contains(&a)) {
            return Err(GeometryError::BadAngles);
        }
        if detector_count == 0 || !(detector_spacing > 0.0) {
            return Err(GeometryError::BadDetectors);
        }
        Ok(Self {
            angles_deg,
            detector_count,
            detector_spacing,
        })
    }

    /// Detector bank spanning the grid width: one bin per image row at the
    /// reconstruction resolution.
    pub fn for_grid(grid: &ImageGrid, angles_deg: Vec<f64>) -> Result<Self, GeometryError> {
        Self::new(angles_deg, grid.n1, grid.pixel_size)
    }

    pub fn ray_count(&self) -> usize {
        self.angles_deg.len() * self.detector_count
    }
}

/// Reflector-based USCT: elements along the top edge of a square field of
/// view, flat horizontal reflector below them. Each transmit-receive pair
/// (i, j), i <= j, contributes one down-and-back ray.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UsctGeometry {
    pub element_count: usize,
    /// Width of the transducer aperture; elements span it uniformly.
    pub aperture_width: f64,
    /// Distance from the element line (top edge) down to the reflector.
    pub reflector_depth: f64,
}

impl UsctGeometry {
    pub fn new(
        element_count: usize,
        aperture_width: f64,
        reflector_depth: f64,
    ) -> Result<Self, GeometryError> {
        if element_count < 2 {
            return Err(GeometryError::BadElements);
        }
        if !(aperture_width > 0.0) || !(reflector_depth > 0.0) {
            return Err(GeometryError::BadGrid);
        }
        Ok(Self {
            element_count,
            aperture_width,
            reflector_depth,
        })
    }

    /// 128 elements across the top edge, reflector at the bottom edge.
    pub fn for_grid(grid: &ImageGrid) -> Result<Self, GeometryError> {
        Self::new(128, grid.width(), grid.height())
    }

    /// One measurement per unordered element pair, reciprocal pairs counted
    /// once.
    pub fn pair_count(&self) -> usize {
        self.element_count * (self.element_count + 1) / 2
    }

    /// Element x positions across the aperture, y is the top edge.
    pub fn element_positions(&self) -> Vec<f64> {
        let e = self.element_count;
        let a = self.aperture_width;
        (0..e)
            .map(|i| -a / 2.0 + a * i as f64 / (e - 1) as f64)
            .collect()
    }
}

/// Named acquisition scenario from the experiment suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    La120,
    La90,
    La60,
    Sv60,
    Sv30,
    Sv15,
}

impl std::str::FromStr for ScenarioName {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "la120" => Ok(Self::La120),
            "la90" => Ok(Self::La90),
            "la60" => Ok(Self::La60),
            "sv60" => Ok(Self::Sv60),
            "sv30" => Ok(Self::Sv30),
            "sv15" => Ok(Self::Sv15),
            other => Err(GeometryError::UnknownScenario(other.to_string())),
        }
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::La120 => "la120",
            Self::La90 => "la90",
            Self::La60 => "la60",
            Self::Sv60 => "sv60",
            Self::Sv30 => "sv30",
            Self::Sv15 => "sv15",
        };
        f.write_str(s)
    }
}

/// Projection angles for a named scenario. Limited-angle scenarios cover
/// 0..X degrees in 1-degree steps; sparse-view scenarios spread N angles
/// uniformly over [0, 180).
pub fn scenario_angles(name: ScenarioName) -> Vec<f64> {
    match name {
        ScenarioName::La120 => (0..120).map(|a| a as f64).collect(),
        ScenarioName::La90 => (0..90).map(|a| a as f64).collect(),
        ScenarioName::La60 => (0..60).map(|a| a as f64).collect(),
        ScenarioName::Sv60 => uniform_angles(60),
        ScenarioName::Sv30 => uniform_angles(30),
        ScenarioName::Sv15 => uniform_angles(15),
    }
}

fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| 180.0 * k as f64 / n as f64).collect()
}

/// Exact intersection lengths of the segment p0 -> p1 with the grid's pixels
/// (Siddon traversal). Returns (flat pixel index, length) pairs; empty when
/// the segment misses the grid.
pub fn trace_segment(grid: &ImageGrid, p0: (f64, f64), p1: (f64, f64)) -> Vec<(usize, f64)> {
    let h = grid.pixel_size;
    let xmin = -grid.width() / 2.0;
    let xmax = grid.width() / 2.0;
    let ymin = -grid.height() / 2.0;
    let ymax = grid.height() / 2.0;

    let dx = p1.0 - p0.0;
    let dy = p1.1 - p0.1;
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return Vec::new();
    }
    let ux = dx / len;
    let uy = dy / len;

    // Clip parameter range [t0, t1] against the bounding box.
    let mut t0 = 0.0f64;
    let mut t1 = len;
    for (p, u, lo, hi) in [(p0.0, ux, xmin, xmax), (p0.1, uy, ymin, ymax)] {
        if u.abs() < 1e-14 {
            if p < lo || p > hi {
                return Vec::new();
            }
        } else {
            let ta = (lo - p) / u;
            let tb = (hi - p) / u;
            let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 >= t1 {
        return Vec::new();
    }

    // Interior grid-line crossings along both axes.
    let mut ts = Vec::with_capacity(grid.n1 + grid.n2 + 2);
    ts.push(t0);
    ts.push(t1);
    if ux.abs() >= 1e-14 {
        for k in 1..grid.n2 {
            let t = (xmin + k as f64 * h - p0.0) / ux;
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    if uy.abs() >= 1e-14 {
        for k in 1..grid.n1 {
            let t = (ymin + k as f64 * h - p0.1) / uy;
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let seg = w[1] - w[0];
        if seg <= 1e-12 * h {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let mx = p0.0 + tm * ux;
        let my = p0.1 + tm * uy;
        let j = (((mx - xmin) / h).floor() as isize).clamp(0, grid.n2 as isize - 1) as usize;
        let i = (((ymax - my) / h).floor() as isize).clamp(0, grid.n1 as isize - 1) as usize;
        out.push((i * grid.n2 + j, seg));
    }
    out
}

fn sort_and_coalesce(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_unstable_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

fn rows_to_csr(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> SparseMatrix {
    let nnz: usize = rows.iter().map(Vec::len).sum();
    let mut row_offsets = Vec::with_capacity(rows.len() + 1);
    let mut col_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_offsets.push(0);
    for row in rows {
        for (c, v) in row {
            col_indices.push(c);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    let n_rows = row_offsets.len() - 1;
    SparseMatrix::from_parts(n_rows, cols, row_offsets, col_indices, values)
        .expect("rows are sorted and in range")
}

/// Parallel-beam system matrix; rows are ordered angle-major,
/// detector-minor.
pub fn build_parallel_beam(grid: &ImageGrid, geom: &ParallelBeamGeometry) -> SystemMatrix {
    let reach = grid.width() + grid.height();
    let nd = geom.detector_count;
    let rows: Vec<Vec<(usize, f64)>> = geom
        .angles_deg
        .par_iter()
        .flat_map_iter(|&angle| {
            let theta = angle.to_radians();
            let (sin, cos) = theta.sin_cos();
            (0..nd).map(move |k| {
                let offset = (k as f64 - (nd as f64 - 1.0) / 2.0) * geom.detector_spacing;
                let cx = offset * cos;
                let cy = offset * sin;
                let p0 = (cx + sin * reach, cy - cos * reach);
                let p1 = (cx - sin * reach, cy + cos * reach);
                (p0, p1)
            })
        })
        .map(|(p0, p1)| sort_and_coalesce(trace_segment(grid, p0, p1)))
        .collect();
    rows_to_csr(rows, grid.pixel_count())
}

/// Reflected-ray USCT system matrix: row per element pair (i, j) with
/// i <= j, ordered i-major. Each ray runs from element i straight to its
/// specular reflection point and up to element j.
pub fn build_usct(
    grid: &ImageGrid,
    geom: &UsctGeometry,
) -> Result<SystemMatrix, GeometryError> {
    if geom.reflector_depth > grid.height() {
        return Err(GeometryError::ReflectorOutsideFov {
            depth: geom.reflector_depth,
            height: grid.height(),
        });
    }
    let y_top = grid.height() / 2.0;
    let y_reflector = y_top - geom.reflector_depth;
    let xs = geom.element_positions();

    let pairs: Vec<(usize, usize)> = (0..geom.element_count)
        .flat_map(|i| (i..geom.element_count).map(move |j| (i, j)))
        .collect();
    let rows: Vec<Vec<(usize, f64)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let tx = (xs[i], y_top);
            let rx = (xs[j], y_top);
            // Elements share a height, so the reflection point is midway.
            let q = ((xs[i] + xs[j]) / 2.0, y_reflector);
            let mut row = trace_segment(grid, tx, q);
            row.extend(trace_segment(grid, q, rx));
            sort_and_coalesce(row)
        })
        .collect();
    Ok(rows_to_csr(rows, grid.pixel_count()))
}
