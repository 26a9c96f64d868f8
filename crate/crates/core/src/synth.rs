//! Synthetic data generation, error metrics, and profile preprocessing.
//!
//! Noise follows the relative model `sigma_i = eta1*|d_i| + eta2*||d||`; only
//! relative standard deviations are ever used downstream, the absolute noise
//! scale stays unestimated. Preprocessing covers regional-residual separation
//! by polynomial fitting and upward continuation of a uniformly sampled
//! profile.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forward::GravityProfile;
use crate::geometry::SurveyGrid;
use crate::scalar::{real, real_usize, Real};

/// Relative-noise model parameters and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T: Real> {
    pub eta1: T,
    pub eta2: T,
    pub seed: u64,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(eta1: T, eta2: T, seed: u64) -> Result<Self> {
        if !(eta1 >= T::zero()) || !(eta2 >= T::zero()) {
            return Err(Error::InvalidInput("noise levels must be >= 0".into()));
        }
        if eta1 == T::zero() && eta2 == T::zero() {
            return Err(Error::InvalidInput(
                "noise levels eta1 and eta2 must not both be zero".into(),
            ));
        }
        Ok(Self { eta1, eta2, seed })
    }
}

/// Strictly positive relative standard deviations, one per station.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaVector<T: Real>(DVector<T>);

impl<T: Real> SigmaVector<T> {
    pub fn new(sigmas: DVector<T>) -> Result<Self> {
        if sigmas.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(Error::InvalidInput(
                "relative standard deviations must be positive and finite".into(),
            ));
        }
        Ok(Self(sigmas))
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Relative standard deviations `sigma_i = eta1*|d_i| + eta2*||d||_2`.
pub fn noise_sigmas<T: Real>(
    d_exact: &GravityProfile<T>,
    eta1: T,
    eta2: T,
) -> Result<SigmaVector<T>> {
    let norm = d_exact.values().norm();
    if norm == T::zero() {
        return Err(Error::InvalidInput(
            "exact data are identically zero; the relative noise model is undefined".into(),
        ));
    }
    SigmaVector::new(d_exact.values().map(|d| eta1 * d.abs() + eta2 * norm))
}

/// Adds zero-mean Gaussian noise with per-station standard deviations.
/// Reproducible for a fixed seed.
pub fn add_noise<T: Real>(
    d_exact: &GravityProfile<T>,
    sigmas: &DVector<T>,
    seed: u64,
) -> Result<GravityProfile<T>> {
    if sigmas.len() != d_exact.len() {
        return Err(Error::DimensionMismatch {
            context: "noise sigmas",
            expected: d_exact.len(),
            actual: sigmas.len(),
        });
    }
    if sigmas.iter().any(|s| *s < T::zero() || !s.is_finite()) {
        return Err(Error::InvalidInput("noise sigmas must be >= 0 and finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = DVector::from_fn(d_exact.len(), |i, _| {
        let z: f64 = rng.sample(StandardNormal);
        d_exact.values()[i] + sigmas[i] * real::<T>(z)
    });
    GravityProfile::new(d_exact.stations().clone(), values)
}

/// Chi-squared misfit `sum ((d_obs - d_pred)/sigma)^2`.
pub fn chi_squared<T: Real>(
    d_obs: &DVector<T>,
    d_pred: &DVector<T>,
    sigmas: &DVector<T>,
) -> Result<T> {
    if d_pred.len() != d_obs.len() || sigmas.len() != d_obs.len() {
        return Err(Error::DimensionMismatch {
            context: "chi-squared",
            expected: d_obs.len(),
            actual: d_pred.len().max(sigmas.len()),
        });
    }
    if sigmas.iter().any(|s| *s == T::zero()) {
        return Err(Error::InvalidInput("chi-squared requires nonzero sigmas".into()));
    }
    let mut acc = T::zero();
    for i in 0..d_obs.len() {
        let r = (d_obs[i] - d_pred[i]) / sigmas[i];
        acc += r * r;
    }
    Ok(acc)
}

/// Relative model error `||m_exact - m_final|| / ||m_exact||`.
pub fn relative_error<T: Real>(m_exact: &DVector<T>, m_final: &DVector<T>) -> Result<T> {
    if m_final.len() != m_exact.len() {
        return Err(Error::DimensionMismatch {
            context: "relative error",
            expected: m_exact.len(),
            actual: m_final.len(),
        });
    }
    let norm = m_exact.norm();
    if norm == T::zero() {
        return Err(Error::InvalidInput(
            "relative error is undefined for a zero exact model".into(),
        ));
    }
    Ok((m_exact - m_final).norm() / norm)
}

/// Removes a least-squares polynomial trend of the given order from the
/// profile and returns the residual.
pub fn regional_residual<T: Real>(
    profile: &GravityProfile<T>,
    poly_order: usize,
) -> Result<GravityProfile<T>> {
    let m = profile.len();
    if poly_order + 1 > m {
        return Err(Error::InvalidInput(format!(
            "polynomial order {poly_order} needs more than {m} stations"
        )));
    }
    let x = profile.stations().x();
    // Fit in a scaled abscissa for conditioning; the fitted subspace is the same.
    let half = (x[m - 1] - x[0]) / real::<T>(2.0);
    let mid = (x[m - 1] + x[0]) / real::<T>(2.0);
    let vand = DMatrix::<T>::from_fn(m, poly_order + 1, |i, k| {
        let t = (x[i] - mid) / half;
        let mut p = T::one();
        for _ in 0..k {
            p *= t;
        }
        p
    });
    let svd = nalgebra::linalg::SVD::try_new(vand.clone(), true, true, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Numerical("SVD of the polynomial basis did not converge".into()))?;
    let smax = svd.singular_values.max();
    let tol = smax * T::default_epsilon() * real_usize::<T>(m.max(poly_order + 1));
    if svd.singular_values.iter().any(|s| *s <= tol) {
        return Err(Error::Numerical("rank-deficient polynomial basis".into()));
    }
    let coeffs = svd
        .solve(profile.values(), tol)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = profile.values() - vand * coeffs;
    GravityProfile::new(profile.stations().clone(), residual)
}

/// Upward continuation of a uniformly spaced profile by `dz` meters.
///
/// The half-space kernel `k(x) = (1/pi) dz/(x^2 + dz^2)` is integrated over
/// each station cell of width `h`, which keeps the discrete operator exact for
/// piecewise-constant data and well behaved for any `dz/h`. The profile is
/// padded with its edge values over three profile-lengths on each side to
/// control truncation bias.
pub fn upward_continue<T: Real>(profile: &GravityProfile<T>, dz: T) -> Result<GravityProfile<T>> {
    if !(dz > T::zero()) || !dz.is_finite() {
        return Err(Error::InvalidInput("continuation height must be positive".into()));
    }
    let m = profile.len();
    let x = profile.stations().x();
    let h = profile
        .stations()
        .uniform_spacing(real::<T>(1e-8))
        .ok_or_else(|| {
            Error::NonUniformSpacing("upward continuation requires uniform station spacing".into())
        })?;
    let profile_length = x[m - 1] - x[0];
    let n_pad = (real::<T>(3.0) * profile_length / h)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let half = h / real::<T>(2.0);
    let inv_pi = T::one() / T::PI();
    let d = profile.values();
    let values = DVector::from_fn(m, |i, _| {
        let mut acc = T::zero();
        for k in 0..(m + 2 * n_pad) {
            let idx = k as isize - n_pad as isize;
            let xk = x[0] + real::<T>(idx as f64) * h;
            let dk = d[idx.clamp(0, m as isize - 1) as usize];
            let delta = x[i] - xk;
            let w = inv_pi * (((delta + half) / dz).atan() - ((delta - half) / dz).atan());
            acc += dk * w;
        }
        acc
    });
    GravityProfile::new(profile.stations().clone(), values)
}

/// Density model of a rectangular body: every cell whose center lies inside
/// `[x_min, x_max] x [z_min, z_max]` gets the given density, all others zero.
pub fn rectangular_body_model<T: Real>(
    grid: &SurveyGrid<T>,
    x_min: T,
    x_max: T,
    z_min: T,
    z_max: T,
    density: T,
) -> Result<DVector<T>> {
    if !(x_min < x_max) || !(z_min < z_max) {
        return Err(Error::InvalidInput("body extents must be non-empty".into()));
    }
    let mut m = DVector::zeros(grid.n_cells());
    for j in 0..grid.n_cells() {
        let (x0, x1, z0, z1) = grid.cell_bounds(j)?;
        let cx = (x0 + x1) / real::<T>(2.0);
        let cz = (z0 + z1) / real::<T>(2.0);
        if cx >= x_min && cx <= x_max && cz >= z_min && cz <= z_max {
            m[j] = density;
        }
    }
    Ok(m)
}
