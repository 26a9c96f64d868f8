//! Cell grid, station layout, and cell polygons.
//!
//! Coordinate convention: `x` runs along the profile, `z` is positive
//! downward, and the observation plane sits at `z_obs` (0 = ground surface,
//! negative = above the surface). Polygon vertices are ordered clockwise in
//! the (x, z-down) plane starting at the top-left corner; the forward module's
//! sign convention is calibrated to this ordering so that positive density
//! below a station yields a positive anomaly.

use crate::error::{Error, Result};
use crate::scalar::{real_usize, Real};

/// Rectangular grid of square cells covering the subsurface cross-section.
///
/// Cells are indexed row-major: row 0 is the shallowest, column 0 the
/// leftmost, so cell `j` sits at row `j / n_cols`, column `j % n_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyGrid<T: Real> {
    n_cols: usize,
    n_rows: usize,
    cell_size: T,
    x_origin: T,
    z_top: T,
}

impl<T: Real> SurveyGrid<T> {
    pub fn new(n_cols: usize, n_rows: usize, cell_size: T, x_origin: T, z_top: T) -> Result<Self> {
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::Geometry(format!(
                "grid must have at least one row and one column, got {n_cols}x{n_rows}"
            )));
        }
        if !(cell_size > T::zero()) || !cell_size.is_finite() {
            return Err(Error::Geometry("cell size must be positive and finite".into()));
        }
        if !x_origin.is_finite() || !z_top.is_finite() {
            return Err(Error::Geometry("grid origin must be finite".into()));
        }
        if z_top < T::zero() {
            return Err(Error::Geometry("depth of the top of the grid must be >= 0".into()));
        }
        Ok(Self {
            n_cols,
            n_rows,
            cell_size,
            x_origin,
            z_top,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn x_origin(&self) -> T {
        self.x_origin
    }

    pub fn z_top(&self) -> T {
        self.z_top
    }

    /// Right edge of the grid.
    pub fn x_max(&self) -> T {
        self.x_origin + real_usize::<T>(self.n_cols) * self.cell_size
    }

    /// Depth of the bottom of the deepest row.
    pub fn z_bottom(&self) -> T {
        self.z_top + real_usize::<T>(self.n_rows) * self.cell_size
    }

    pub fn row_of(&self, j: usize) -> usize {
        j / self.n_cols
    }

    pub fn col_of(&self, j: usize) -> usize {
        j % self.n_cols
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.n_cells() {
            return Err(Error::CellIndexOutOfRange {
                index: j,
                n_cells: self.n_cells(),
            });
        }
        Ok(())
    }

    /// `(x_left, x_right, z_top, z_bottom)` of cell `j`.
    pub fn cell_bounds(&self, j: usize) -> Result<(T, T, T, T)> {
        self.check_index(j)?;
        let col = real_usize::<T>(self.col_of(j));
        let row = real_usize::<T>(self.row_of(j));
        let x0 = self.x_origin + col * self.cell_size;
        let z0 = self.z_top + row * self.cell_size;
        Ok((x0, x0 + self.cell_size, z0, z0 + self.cell_size))
    }

    /// Mean depth of cell `j`, used by the depth-weighting operator.
    pub fn cell_mean_depth(&self, j: usize) -> Result<T> {
        let (_, _, z0, z1) = self.cell_bounds(j)?;
        Ok((z0 + z1) / crate::scalar::real(2.0))
    }
}

/// Observation stations along the profile, all on one horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSet<T: Real> {
    x: Vec<T>,
    z_obs: T,
}

impl<T: Real> StationSet<T> {
    pub fn new(x: Vec<T>, z_obs: T) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::Geometry(format!(
                "at least 2 stations required, got {}",
                x.len()
            )));
        }
        if !z_obs.is_finite() {
            return Err(Error::Geometry("observation depth must be finite".into()));
        }
        for w in x.windows(2) {
            if !w[0].is_finite() || !w[1].is_finite() || !(w[1] > w[0]) {
                return Err(Error::Geometry(
                    "station abscissae must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(Self { x, z_obs })
    }

    /// Stations at the centers of the grid's surface blocks, the layout the
    /// synthetic protocol uses.
    pub fn at_cell_centers(grid: &SurveyGrid<T>, z_obs: T) -> Result<Self> {
        let half = grid.cell_size() / crate::scalar::real(2.0);
        let x = (0..grid.n_cols())
            .map(|i| grid.x_origin() + real_usize::<T>(i) * grid.cell_size() + half)
            .collect();
        Self::new(x, z_obs)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn z_obs(&self) -> T {
        self.z_obs
    }

    /// Common spacing if the stations are uniformly spaced within `rel_tol`.
    pub fn uniform_spacing(&self, rel_tol: T) -> Option<T> {
        let h = self.x[1] - self.x[0];
        for w in self.x.windows(2) {
            if ((w[1] - w[0]) - h).abs() > rel_tol * h {
                return None;
            }
        }
        Some(h)
    }
}

/// Simple closed polygon with the module's fixed vertex orientation
/// (clockwise in the x-right/z-down view; positive shoelace sum in (x, z)).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T: Real> {
    vertices: Vec<[T; 2]>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<[T; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for v in &vertices {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::Geometry("polygon vertices must be finite".into()));
            }
        }
        let poly = Self { vertices };
        if !poly.is_simple() {
            return Err(Error::Geometry("polygon must be simple (non-self-intersecting)".into()));
        }
        if poly.signed_area() <= T::zero() {
            return Err(Error::Geometry(
                "polygon vertices must be ordered clockwise in the (x, z-down) plane".into(),
            ));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace sum in (x, z); positive for the module's fixed orientation.
    pub fn signed_area(&self) -> T {
        let two = crate::scalar::real::<T>(2.0);
        let n = self.vertices.len();
        let mut acc = T::zero();
        for p in 0..n {
            let a = self.vertices[p];
            let b = self.vertices[(p + 1) % n];
            acc += a[0] * b[1] - b[0] * a[1];
        }
        acc / two
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    /// Centroid of the polygon interior.
    pub fn centroid(&self) -> [T; 2] {
        let n = self.vertices.len();
        let six = crate::scalar::real::<T>(6.0);
        let mut cx = T::zero();
        let mut cz = T::zero();
        for p in 0..n {
            let a = self.vertices[p];
            let b = self.vertices[(p + 1) % n];
            let cross = a[0] * b[1] - b[0] * a[1];
            cx += (a[0] + b[0]) * cross;
            cz += (a[1] + b[1]) * cross;
        }
        let area = self.signed_area();
        [cx / (six * area), cz / (six * area)]
    }

    /// Same polygon expressed in a frame shifted by `(-dx, -dz)`.
    ///
    /// Translation preserves simplicity and orientation, so no re-validation
    /// is performed.
    pub fn translated(&self, dx: T, dz: T) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + dx, v[1] + dz])
                .collect(),
        }
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        // Reject zero-length edges.
        for p in 0..n {
            let a = self.vertices[p];
            let b = self.vertices[(p + 1) % n];
            if a == b {
                return false;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // Skip edges sharing a vertex.
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }
}

fn orientation<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> i8 {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if cross > T::zero() {
        1
    } else if cross < T::zero() {
        -1
    } else {
        0
    }
}

fn on_segment<T: Real>(a: [T; 2], b: [T; 2], p: [T; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect<T: Real>(a1: [T; 2], a2: [T; 2], b1: [T; 2], b2: [T; 2]) -> bool {
    let o1 = orientation(a1, a2, b1);
    let o2 = orientation(a1, a2, b2);
    let o3 = orientation(b1, b2, a1);
    let o4 = orientation(b1, b2, a2);
    if o1 != o2 && o3 != o4 {
        return true;
    }
    (o1 == 0 && on_segment(a1, a2, b1))
        || (o2 == 0 && on_segment(a1, a2, b2))
        || (o3 == 0 && on_segment(b1, b2, a1))
        || (o4 == 0 && on_segment(b1, b2, a2))
}

/// The 4-vertex square of cell `j` in grid coordinates, ordered top-left,
/// top-right, bottom-right, bottom-left.
pub fn cell_polygon<T: Real>(grid: &SurveyGrid<T>, j: usize) -> Result<Polygon<T>> {
    let (x0, x1, z0, z1) = grid.cell_bounds(j)?;
    Polygon::new(vec![[x0, z0], [x1, z0], [x1, z1], [x0, z1]])
}

/// Cell `j` expressed in station-centered coordinates, one polygon per
/// station: `x' = x_cell - x_station`, `z' = z_cell - z_obs`.
pub fn station_offsets<T: Real>(
    grid: &SurveyGrid<T>,
    stations: &StationSet<T>,
    j: usize,
) -> Result<Vec<Polygon<T>>> {
    let poly = cell_polygon(grid, j)?;
    Ok(stations
        .x()
        .iter()
        .map(|&xs| poly.translated(-xs, -stations.z_obs()))
        .collect())
}

/// Checks that no station sits where the gravity kernel is singular.
///
/// A station on the observation plane may coincide with the top surface of the
/// grid, but it must then lie strictly between cell-corner abscissae; any
/// station above the grid (`z_obs < z_top`) is unconditionally safe.
pub fn validate_station_placement<T: Real>(
    grid: &SurveyGrid<T>,
    stations: &StationSet<T>,
) -> Result<()> {
    if stations.z_obs() < grid.z_top() {
        return Ok(());
    }
    for (i, &xs) in stations.x().iter().enumerate() {
        for k in 0..=grid.n_cols() {
            let line = grid.x_origin() + real_usize::<T>(k) * grid.cell_size();
            if xs == line {
                return Err(Error::Geometry(format!(
                    "station {i} lies on the vertical grid line at x = {line} with \
                     z_obs >= z_top; move the station or raise the observation plane"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_2x1() -> SurveyGrid<f64> {
        SurveyGrid::new(2, 1, 10.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn cell_polygon_first_cell_is_declared_square() {
        let poly = cell_polygon(&grid_2x1(), 0).unwrap();
        assert_eq!(
            poly.vertices(),
            &[[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]
        );
    }

    #[test]
    fn cell_polygon_second_cell_is_shifted_in_x() {
        let p0 = cell_polygon(&grid_2x1(), 0).unwrap();
        let p1 = cell_polygon(&grid_2x1(), 1).unwrap();
        for (a, b) in p0.vertices().iter().zip(p1.vertices()) {
            assert_eq!(a[0] + 10.0, b[0]);
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn paper_grid_has_500_cells_and_deepest_row_spans_90_to_100() {
        let grid = SurveyGrid::new(50, 10, 10.0, 0.0, 0.0).unwrap();
        assert_eq!(grid.n_cells(), 500);
        let (_, _, z0, z1) = grid.cell_bounds(grid.n_cells() - 1).unwrap();
        assert_eq!((z0, z1), (90.0, 100.0));
    }

    #[test]
    fn cell_index_out_of_range_is_rejected() {
        assert!(matches!(
            cell_polygon(&grid_2x1(), 2),
            Err(Error::CellIndexOutOfRange { index: 2, n_cells: 2 })
        ));
    }

    #[test]
    fn station_offsets_subtract_station_coordinates() {
        let grid = grid_2x1();
        let stations = StationSet::new(vec![5.0, 15.0], 0.0).unwrap();
        let offs = station_offsets(&grid, &stations, 1).unwrap();
        // Cell 1 right edge at x = 20; station 0 at x = 5 sees it at x' = 15.
        assert_eq!(offs[0].vertices()[1][0], 15.0);
        // Station directly over the cell center sees symmetric vertex pairs.
        assert_eq!(offs[1].vertices()[0][0], -5.0);
        assert_eq!(offs[1].vertices()[1][0], 5.0);
    }

    #[test]
    fn station_offsets_are_translation_invariant() {
        let grid_a = SurveyGrid::<f64>::new(3, 2, 10.0, 0.0, 0.0).unwrap();
        let grid_b = SurveyGrid::<f64>::new(3, 2, 10.0, 100.0, 0.0).unwrap();
        let st_a = StationSet::new(vec![5.0, 25.0], 0.0).unwrap();
        let st_b = StationSet::new(vec![105.0, 125.0], 0.0).unwrap();
        for j in 0..grid_a.n_cells() {
            let oa = station_offsets(&grid_a, &st_a, j).unwrap();
            let ob = station_offsets(&grid_b, &st_b, j).unwrap();
            for (pa, pb) in oa.iter().zip(&ob) {
                for (va, vb) in pa.vertices().iter().zip(pb.vertices()) {
                    assert!((va[0] - vb[0]).abs() < 1e-12);
                    assert!((va[1] - vb[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cells_tile_the_cross_section() {
        let grid = SurveyGrid::new(7, 3, 10.0, -20.0, 5.0).unwrap();
        let total: f64 = (0..grid.n_cells())
            .map(|j| cell_polygon(&grid, j).unwrap().area())
            .sum();
        assert!((total - 21.0 * 100.0).abs() < 1e-9);
        // Pairwise disjoint interiors: bounds of distinct cells never overlap.
        for j in 0..grid.n_cells() {
            let (ax0, ax1, az0, az1) = grid.cell_bounds(j).unwrap();
            assert!(ax0 >= grid.x_origin() && ax1 <= grid.x_max());
            assert!(az0 >= grid.z_top() && az1 <= grid.z_bottom());
            for k in (j + 1)..grid.n_cells() {
                let (bx0, bx1, bz0, bz1) = grid.cell_bounds(k).unwrap();
                let overlap_x = ax0 < bx1 && bx0 < ax1;
                let overlap_z = az0 < bz1 && bz0 < az1;
                assert!(!(overlap_x && overlap_z), "cells {j} and {k} overlap");
            }
        }
    }

    #[test]
    fn polygon_rejects_wrong_orientation_and_self_intersection() {
        // Counter-clockwise in the z-down view.
        assert!(Polygon::new(vec![[0.0, 0.0], [0.0, 10.0], [10.0, 10.0], [10.0, 0.0]]).is_err());
        // Bow-tie.
        assert!(Polygon::new(vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]]).is_err());
    }

    #[test]
    fn station_on_vertical_grid_line_is_rejected_on_surface() {
        let grid = grid_2x1();
        let on_line = StationSet::new(vec![5.0, 10.0], 0.0).unwrap();
        assert!(validate_station_placement(&grid, &on_line).is_err());
        // Same abscissae are fine above the grid.
        let above = StationSet::new(vec![5.0, 10.0], -1.0).unwrap();
        assert!(validate_station_placement(&grid, &above).is_ok());
        // Between-corner abscissae are fine on the surface.
        let centered = StationSet::new(vec![5.0, 15.0], 0.0).unwrap();
        assert!(validate_station_placement(&grid, &centered).is_ok());
    }

    #[test]
    fn stations_must_increase() {
        assert!(StationSet::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(StationSet::new(vec![1.0], 0.0).is_err());
        assert!(StationSet::<f64>::new(vec![0.0, 1.0, 3.0], 0.0).is_ok());
    }

    #[test]
    fn uniform_spacing_detection() {
        let s = StationSet::new(vec![0.0, 10.0, 20.0, 30.0], 0.0).unwrap();
        assert_eq!(s.uniform_spacing(1e-9), Some(10.0));
        let s = StationSet::new(vec![0.0, 10.0, 21.0], 0.0).unwrap();
        assert_eq!(s.uniform_spacing(1e-9), None);
    }
}
