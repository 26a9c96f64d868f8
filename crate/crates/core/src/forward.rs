//! Vertical gravity anomaly of polygonal 2-D bodies and assembly of the
//! sensitivity matrix.
//!
//! A body of constant density is an infinitely long horizontal prism whose
//! cross-section is a simple polygon. The anomaly at a station is evaluated by
//! the closed-form line integral around the polygon, one term per edge, in
//! station-centered coordinates. Units are fixed at the module boundary:
//! meters for geometry, g/cm^3 for density, mGal for the anomaly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{cell_polygon, validate_station_placement, Polygon, StationSet, SurveyGrid};
use crate::scalar::{real, Real};

/// Universal gravitational constant in m^3 kg^-1 s^-2.
pub const GRAVITATIONAL_CONSTANT: f64 = 6.674e-11;

/// 2*Gamma with the unit conversions applied once: densities arrive in g/cm^3
/// (1 g/cm^3 = 1e3 kg/m^3) and anomalies leave in mGal (1 m/s^2 = 1e5 mGal).
fn gravity_scale<T: Real>() -> T {
    real(2.0 * GRAVITATIONAL_CONSTANT * 1e3 * 1e5)
}

/// Dimensionless geometry factor of one polygon edge, station at the origin.
///
/// For an edge from `a` to `b` this is
/// `nu/(1+psi^2) * (ln(r_b/r_a) - psi*(theta_b - theta_a))` with
/// `psi = (x_b - x_a)/(z_b - z_a)` and `nu = x_a - psi*z_a`. Angles are taken
/// from the two-argument arctangent of (z, x) with the branch corrected so
/// that `|theta_b - theta_a| <= pi`. A horizontal edge uses the analytic
/// limit `z_a * (theta_b - theta_a)`.
pub fn edge_term<T: Real>(a: [T; 2], b: [T; 2]) -> Result<T> {
    let ra = a[0].hypot(a[1]);
    let rb = b[0].hypot(b[1]);
    if ra == T::zero() || rb == T::zero() {
        return Err(Error::Geometry(
            "polygon vertex coincides with the station (singular kernel)".into(),
        ));
    }
    let theta_a = a[1].atan2(a[0]);
    let theta_b = b[1].atan2(b[0]);
    let mut dtheta = theta_b - theta_a;
    let pi = T::PI();
    if dtheta > pi {
        dtheta -= pi + pi;
    } else if dtheta < -pi {
        dtheta += pi + pi;
    }
    if b[1] == a[1] {
        return Ok(a[1] * dtheta);
    }
    let psi = (b[0] - a[0]) / (b[1] - a[1]);
    let nu = a[0] - psi * a[1];
    Ok(nu / (T::one() + psi * psi) * ((rb / ra).ln() - psi * dtheta))
}

/// Sum of edge terms around a closed vertex loop.
pub(crate) fn polygon_geometry_factor<T: Real>(vertices: &[[T; 2]]) -> Result<T> {
    let n = vertices.len();
    let mut acc = T::zero();
    for p in 0..n {
        acc += edge_term(vertices[p], vertices[(p + 1) % n])?;
    }
    Ok(acc)
}

/// Vertical gravity anomaly in mGal of a polygonal body of the given density
/// (g/cm^3), observed at the origin. Positive density below the station gives
/// a positive anomaly.
pub fn polygon_gravity<T: Real>(poly: &Polygon<T>, density: T) -> Result<T> {
    let factor = polygon_geometry_factor(poly.vertices())?;
    Ok(gravity_scale::<T>() * density * factor)
}

/// Dense m x n kernel mapping cell densities (g/cm^3) to station anomalies
/// (mGal). Immutable once assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix<T: Real> {
    entries: DMatrix<T>,
    grid: SurveyGrid<T>,
    stations: StationSet<T>,
}

impl<T: Real> SensitivityMatrix<T> {
    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    /// Number of stations (rows).
    pub fn n_stations(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of cells (columns).
    pub fn n_cells(&self) -> usize {
        self.entries.ncols()
    }

    pub fn grid(&self) -> &SurveyGrid<T> {
        &self.grid
    }

    pub fn stations(&self) -> &StationSet<T> {
        &self.stations
    }
}

/// Gravity anomaly values, one mGal entry per station.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityProfile<T: Real> {
    stations: StationSet<T>,
    values: DVector<T>,
}

impl<T: Real> GravityProfile<T> {
    pub fn new(stations: StationSet<T>, values: DVector<T>) -> Result<Self> {
        if values.len() != stations.len() {
            return Err(Error::DimensionMismatch {
                context: "gravity profile",
                expected: stations.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("profile values must be finite".into()));
        }
        Ok(Self { stations, values })
    }

    pub fn stations(&self) -> &StationSet<T> {
        &self.stations
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Assembles the sensitivity matrix entry by entry: `G[i, j]` is the anomaly
/// at station `i` of a unit density in cell `j`. Deterministic; edge terms of
/// a cell are summed in vertex order.
pub fn assemble_sensitivity<T: Real>(
    grid: &SurveyGrid<T>,
    stations: &StationSet<T>,
) -> Result<SensitivityMatrix<T>> {
    validate_station_placement(grid, stations)?;
    let m = stations.len();
    let n = grid.n_cells();
    let scale = gravity_scale::<T>();
    let mut entries = DMatrix::<T>::zeros(m, n);
    for j in 0..n {
        let poly = cell_polygon(grid, j)?;
        for (i, &xs) in stations.x().iter().enumerate() {
            let shifted = poly.translated(-xs, -stations.z_obs());
            let factor =
                polygon_geometry_factor(shifted.vertices()).map_err(|e| Error::SingularKernel {
                    station: i,
                    cell: j,
                    reason: e.to_string(),
                })?;
            let value = scale * factor;
            if !value.is_finite() {
                return Err(Error::SingularKernel {
                    station: i,
                    cell: j,
                    reason: "non-finite kernel entry".into(),
                });
            }
            entries[(i, j)] = value;
        }
    }
    Ok(SensitivityMatrix {
        entries,
        grid: grid.clone(),
        stations: stations.clone(),
    })
}

/// Predicted anomaly `d = G m` for a density model in g/cm^3.
pub fn forward_map<T: Real>(
    g: &SensitivityMatrix<T>,
    model: &DVector<T>,
) -> Result<GravityProfile<T>> {
    if model.len() != g.n_cells() {
        return Err(Error::DimensionMismatch {
            context: "forward map model",
            expected: g.n_cells(),
            actual: model.len(),
        });
    }
    GravityProfile::new(g.stations().clone(), g.entries() * model)
}
