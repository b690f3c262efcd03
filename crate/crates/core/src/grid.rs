//! Discrete geometry: cell-centered finite volumes on structured grids.
//!
//! Three grid kinds are supported, all with uniform spacing:
//!
//! * `RadialDisk` — a disk of radius `R` discretized in the radius only.
//!   Cell `i` is the annulus `(i*dr, (i+1)*dr)` with the exact area
//!   `2*pi*r_i*dr` where `r_i = (i+1/2)*dr` is the cell center (the
//!   midpoint-rule area equals the exact annulus area). The flux face at
//!   `r = 0` has zero perimeter, so the coordinate singularity never needs
//!   special-casing. Fields on this grid are radially symmetric by
//!   construction.
//! * `Rect2D` — an `Lx x Ly` rectangle with `nx * ny` cells, row-major
//!   (`index = j*nx + i`, x fastest).
//! * `AnchoredDisk` — a disk of radius `R` discretized in the distance
//!   `rho = |x - x0|` to a fixed *boundary* point `x0`, `rho` in `(0, 2R)`.
//!   The "faces" are the circular arcs `|x - x0| = rho` clipped to the disk
//!   (length `2*rho*acos(rho/(2R))`) and cell volumes are the exact lens
//!   areas between consecutive arcs. This hosts fields that are radial
//!   about a boundary point, which is where the concentration profiles of
//!   the energy-divergence probe live; it is a functional-evaluation grid,
//!   not a dynamics grid.
//!
//! Every kind reduces to the same face list `{(i, j, area, dist)}`, and all
//! discrete operators are assembled from per-face transmissibilities
//! `area/dist`, which is what makes conservation and summation-by-parts
//! exact at the discrete level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the total-volume identity `sum(vol) = |Omega|`.
pub const VOLUME_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GridKind {
    #[serde(rename = "radial_disk")]
    RadialDisk { radius: f64, cells: usize },
    #[serde(rename = "rect")]
    Rect2D { lx: f64, ly: f64, nx: usize, ny: usize },
    #[serde(rename = "anchored_disk")]
    AnchoredDisk { radius: f64, cells: usize },
}

/// One interior face between cells `left` and `right`.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub left: usize,
    pub right: usize,
    /// Face measure (perimeter length in 2D).
    pub area: f64,
    /// Distance between the two cell centers.
    pub dist: f64,
    /// Transmissibility `area / dist`.
    pub trans: f64,
}

#[derive(Debug)]
pub struct Grid {
    kind: GridKind,
    volumes: Vec<f64>,
    faces: Vec<Face>,
    /// Distance of each cell center to the grid's natural anchor point
    /// (origin for `RadialDisk`, the boundary anchor for `AnchoredDisk`,
    /// unused for `Rect2D` where anchors are free points).
    axial_coord: Vec<f64>,
    centers: Vec<[f64; 2]>,
    total_volume: f64,
}

impl Grid {
    /// Disk of radius `radius`, `cells` radial cells. Fields are radial.
    pub fn radial_disk(radius: f64, cells: usize) -> Result<Arc<Grid>> {
        if !(radius > 0.0) || cells == 0 {
            return Err(Error::InvalidGrid(format!(
                "radial disk needs radius > 0 and cells > 0, got radius {radius}, cells {cells}"
            )));
        }
        let dr = radius / cells as f64;
        let mut volumes = Vec::with_capacity(cells);
        let mut axial = Vec::with_capacity(cells);
        let mut centers = Vec::with_capacity(cells);
        for i in 0..cells {
            let r = (i as f64 + 0.5) * dr;
            volumes.push(2.0 * std::f64::consts::PI * r * dr);
            axial.push(r);
            centers.push([r, 0.0]);
        }
        let mut faces = Vec::with_capacity(cells - 1);
        for i in 0..cells - 1 {
            let rf = (i as f64 + 1.0) * dr;
            let area = 2.0 * std::f64::consts::PI * rf;
            faces.push(Face { left: i, right: i + 1, area, dist: dr, trans: area / dr });
        }
        Ok(Arc::new(Grid::finish(
            GridKind::RadialDisk { radius, cells },
            volumes,
            faces,
            axial,
            centers,
        )))
    }

    /// `lx x ly` rectangle with `nx * ny` cells, row-major `j*nx + i`.
    pub fn rect(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Arc<Grid>> {
        if !(lx > 0.0) || !(ly > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!(
                "rectangle needs positive lengths and cell counts, got {lx} x {ly}, {nx} x {ny}"
            )));
        }
        let dx = lx / nx as f64;
        let dy = ly / ny as f64;
        let n = nx * ny;
        let volumes = vec![dx * dy; n];
        let mut centers = Vec::with_capacity(n);
        let mut axial = Vec::with_capacity(n);
        for j in 0..ny {
            for i in 0..nx {
                let c = [(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy];
                axial.push((c[0] * c[0] + c[1] * c[1]).sqrt());
                centers.push(c);
            }
        }
        let mut faces = Vec::with_capacity(2 * n);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let l = j * nx + i;
                faces.push(Face { left: l, right: l + 1, area: dy, dist: dx, trans: dy / dx });
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let l = j * nx + i;
                faces.push(Face { left: l, right: l + nx, area: dx, dist: dy, trans: dx / dy });
            }
        }
        Ok(Arc::new(Grid::finish(GridKind::Rect2D { lx, ly, nx, ny }, volumes, faces, axial, centers)))
    }

    /// Disk of radius `radius` discretized in the distance to a boundary
    /// anchor point; `cells` cells covering `rho` in `(0, 2*radius)`.
    pub fn anchored_disk(radius: f64, cells: usize) -> Result<Arc<Grid>> {
        if !(radius > 0.0) || cells == 0 {
            return Err(Error::InvalidGrid(format!(
                "anchored disk needs radius > 0 and cells > 0, got radius {radius}, cells {cells}"
            )));
        }
        let drho = 2.0 * radius / cells as f64;
        // Exact area of the lens {|x - x0| < rho} ∩ disk, x0 on the boundary:
        //   A(rho) = 8 R^2 [ (s^2/2) acos(s) + (asin(s) - s sqrt(1-s^2))/4 ],  s = rho/(2R),
        // so cell volumes telescope to pi R^2 exactly.
        let lens_area = |rho: f64| -> f64 {
            let s = (rho / (2.0 * radius)).clamp(0.0, 1.0);
            8.0 * radius
                * radius
                * (0.5 * s * s * s.acos() + 0.25 * (s.asin() - s * (1.0 - s * s).sqrt()))
        };
        let arc_len = |rho: f64| -> f64 {
            let s = (rho / (2.0 * radius)).clamp(0.0, 1.0);
            2.0 * rho * s.acos()
        };
        let mut volumes = Vec::with_capacity(cells);
        let mut axial = Vec::with_capacity(cells);
        let mut centers = Vec::with_capacity(cells);
        for i in 0..cells {
            let lo = i as f64 * drho;
            let hi = (i as f64 + 1.0) * drho;
            let vol = lens_area(hi) - lens_area(lo);
            if !(vol > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "degenerate lens cell {i} on anchored disk (volume {vol})"
                )));
            }
            let rho = 0.5 * (lo + hi);
            volumes.push(vol);
            axial.push(rho);
            centers.push([rho, 0.0]);
        }
        let mut faces = Vec::with_capacity(cells - 1);
        for i in 0..cells - 1 {
            let rho_f = (i as f64 + 1.0) * drho;
            let area = arc_len(rho_f);
            faces.push(Face { left: i, right: i + 1, area, dist: drho, trans: area / drho });
        }
        Ok(Arc::new(Grid::finish(
            GridKind::AnchoredDisk { radius, cells },
            volumes,
            faces,
            axial,
            centers,
        )))
    }

    pub fn from_kind(kind: GridKind) -> Result<Arc<Grid>> {
        match kind {
            GridKind::RadialDisk { radius, cells } => Grid::radial_disk(radius, cells),
            GridKind::Rect2D { lx, ly, nx, ny } => Grid::rect(lx, ly, nx, ny),
            GridKind::AnchoredDisk { radius, cells } => Grid::anchored_disk(radius, cells),
        }
    }

    fn finish(
        kind: GridKind,
        volumes: Vec<f64>,
        faces: Vec<Face>,
        axial_coord: Vec<f64>,
        centers: Vec<[f64; 2]>,
    ) -> Grid {
        let total_volume = compensated_sum(&volumes);
        Grid { kind, volumes, faces, axial_coord, centers, total_volume }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn num_cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Sum of cell volumes; agrees with the analytic |Omega| to roundoff,
    /// and is the measure used by every discrete functional.
    pub fn domain_volume(&self) -> f64 {
        self.total_volume
    }

    /// Analytic area of the continuous domain (pi r^2 or Lx*Ly).
    pub fn analytic_volume(&self) -> f64 {
        match self.kind {
            GridKind::RadialDisk { radius, .. } | GridKind::AnchoredDisk { radius, .. } => {
                std::f64::consts::PI * radius * radius
            }
            GridKind::Rect2D { lx, ly, .. } => lx * ly,
        }
    }

    /// Cell-center coordinates. For the 1D kinds this is `(coord, 0)` in the
    /// grid's own axis (radius resp. anchor distance).
    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Per-cell distance to the grid's natural anchor: the origin for
    /// `RadialDisk`, the boundary anchor for `AnchoredDisk`. Errors for
    /// `Rect2D`, where an explicit anchor point is required instead.
    pub fn anchor_distances(&self) -> Result<&[f64]> {
        match self.kind {
            GridKind::Rect2D { .. } => Err(Error::InvalidGrid(
                "rectangle grids have no built-in anchor; pass an explicit point".into(),
            )),
            _ => Ok(&self.axial_coord),
        }
    }

    /// Uniform grid spacing along each axis (dr; or (dx, dy)).
    pub fn spacing(&self) -> (f64, f64) {
        match self.kind {
            GridKind::RadialDisk { radius, cells } => {
                let dr = radius / cells as f64;
                (dr, dr)
            }
            GridKind::AnchoredDisk { radius, cells } => {
                let d = 2.0 * radius / cells as f64;
                (d, d)
            }
            GridKind::Rect2D { lx, ly, nx, ny } => (lx / nx as f64, ly / ny as f64),
        }
    }

    /// True for the 1D chain topologies (radial and anchored disks).
    pub fn is_chain(&self) -> bool {
        !matches!(self.kind, GridKind::Rect2D { .. })
    }
}

/// Kahan–Babuska compensated summation.
pub(crate) fn compensated_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// A scalar field stored as one value per cell.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.num_cells() {
            return Err(Error::GridMismatch(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(Field { grid: Arc::clone(grid), values })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Field {
        Field { grid: Arc::clone(grid), values: vec![c; grid.num_cells()] }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field::constant(grid, 0.0)
    }

    /// Build a field from a per-cell-index function.
    pub fn from_fn(grid: &Arc<Grid>, f: impl FnMut(usize) -> f64) -> Field {
        let values = (0..grid.num_cells()).map(f).collect();
        Field { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Field {
        Field { grid: Arc::clone(&self.grid), values: self.values.iter().copied().map(f).collect() }
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Panic (with a clear message) if two fields do not share a grid.
/// Operator inputs on mismatched grids are a programming error, not a
/// recoverable condition.
pub(crate) fn check_same_grid(a: &Field, b: &Field) {
    assert!(
        Arc::ptr_eq(a.grid(), b.grid()) || a.grid().kind() == b.grid().kind(),
        "fields live on different grids ({:?} vs {:?})",
        a.grid().kind(),
        b.grid().kind()
    );
}
