//! Regularization-parameter selection on a logarithmic grid: L-curve corner
//! detection, GCV minimization with flat-curve fallback, the cooling schedule,
//! and the initial-alpha heuristic.
//!
//! All curve quantities come from the filter factors, so a whole grid sweep
//! costs one inner product per station and grid point and never re-solves the
//! system.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gsvd::GsvdFactors;
use crate::scalar::{real, real_usize, Real};

/// Logarithmically spaced positive grid of candidate alphas.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid<T: Real> {
    values: Vec<T>,
}

/// Default number of grid points.
pub const DEFAULT_ALPHA_GRID_POINTS: usize = 200;

impl<T: Real> AlphaGrid<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Config("alpha grid needs at least 3 points".into()));
        }
        for w in values.windows(2) {
            if !(w[0] > T::zero()) || !w[0].is_finite() || !(w[1] > w[0]) {
                return Err(Error::Config(
                    "alpha grid must be positive, finite, strictly increasing".into(),
                ));
            }
        }
        if !values[values.len() - 1].is_finite() {
            return Err(Error::Config("alpha grid must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn log_spaced(min: T, max: T, count: usize) -> Result<Self> {
        if !(min > T::zero()) || !(max > min) {
            return Err(Error::Config("alpha grid bounds must satisfy 0 < min < max".into()));
        }
        let (lmin, lmax) = (min.ln(), max.ln());
        let step = (lmax - lmin) / real_usize::<T>(count - 1);
        let values = (0..count)
            .map(|k| (lmin + real_usize::<T>(k) * step).exp())
            .collect();
        Self::new(values)
    }

    /// Default grid spanning the spectrum of the factorization: from
    /// `max(1e-2, 1e-2 * gamma_min_positive)` up to `10 * gamma_max`.
    pub fn from_factors(factors: &GsvdFactors<T>, count: usize) -> Result<Self> {
        let gmin = factors.gamma_min_positive().ok_or_else(|| {
            Error::DegenerateCurve("all generalized singular values are zero".into())
        })?;
        let gmax = factors.gamma_max();
        let floor = real::<T>(1e-2);
        let mut lo = floor.max(floor * gmin);
        let hi = real::<T>(10.0) * gmax;
        if !(lo < hi) {
            lo = floor * gmin;
        }
        Self::log_spaced(lo, hi, count)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outcome classification of a parameter choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamStatus {
    Ok,
    FlatGcvFallback,
    BoundaryWarning,
}

impl std::fmt::Display for ParamStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParamStatus::Ok => "ok",
            ParamStatus::FlatGcvFallback => "flat-gcv-fallback",
            ParamStatus::BoundaryWarning => "boundary-warning",
        })
    }
}

/// One point of the parameter-choice trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T: Real> {
    pub alpha: T,
    pub residual_norm: T,
    pub seminorm: T,
    pub gcv: T,
}

/// Chosen parameter plus the full trace it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamChoiceResult<T: Real> {
    pub alpha_star: T,
    pub curve: Vec<CurvePoint<T>>,
    pub status: ParamStatus,
}

/// Which entries enter the mean of the initial-alpha heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialAlphaMean {
    /// Average over the nonzero generalized singular values only.
    #[default]
    NonzeroOnly,
    /// Average over all `n` entries including the structural zeros.
    All,
}

struct SpectralCoefficients<T: Real> {
    gammas: Vec<T>,
    ub: Vec<T>,
    m: usize,
}

fn spectral_coefficients<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
) -> Result<SpectralCoefficients<T>> {
    let m = factors.n_stations();
    if r_tilde.len() != m {
        return Err(Error::DimensionMismatch {
            context: "weighted residual",
            expected: m,
            actual: r_tilde.len(),
        });
    }
    let ub_vec = factors.u().transpose() * r_tilde;
    let q = factors.q();
    let mut gammas = Vec::with_capacity(m);
    let mut ub = Vec::with_capacity(m);
    for j in 0..m {
        gammas.push(factors.gamma()[q + j]);
        ub.push(ub_vec[j]);
    }
    Ok(SpectralCoefficients { gammas, ub, m })
}

fn point_at<T: Real>(coef: &SpectralCoefficients<T>, alpha: T) -> CurvePoint<T> {
    let mut res2 = T::zero();
    let mut semi2 = T::zero();
    let mut fsum = T::zero();
    for (&g, &c) in coef.gammas.iter().zip(&coef.ub) {
        let g2 = g * g;
        let f = g2 / (g2 + alpha * alpha);
        let r = (T::one() - f) * c;
        res2 += r * r;
        if g > T::zero() {
            let s = f * c / g;
            semi2 += s * s;
        }
        fsum += f;
    }
    let dof = real_usize::<T>(coef.m) - fsum;
    let gcv = if dof <= T::default_epsilon() * real_usize::<T>(coef.m) {
        real::<T>(f64::INFINITY)
    } else {
        res2 / (dof * dof)
    };
    CurvePoint {
        alpha,
        residual_norm: res2.sqrt(),
        seminorm: semi2.sqrt(),
        gcv,
    }
}

/// Residual norm, seminorm, and GCV value for every grid alpha.
pub fn evaluate_curve<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
    grid: &AlphaGrid<T>,
) -> Result<Vec<CurvePoint<T>>> {
    let coef = spectral_coefficients(factors, r_tilde)?;
    Ok(grid.values().iter().map(|&a| point_at(&coef, a)).collect())
}

/// The GCV functional at a single alpha: squared residual norm over squared
/// effective degrees of freedom.
pub fn gcv_evaluate<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
    alpha: T,
) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidInput("GCV requires alpha > 0".into()));
    }
    let coef = spectral_coefficients(factors, r_tilde)?;
    Ok(point_at(&coef, alpha).gcv)
}

/// L-curve corner: the grid alpha maximizing the discrete curvature of
/// `(log residual-norm, log seminorm)` in arclength parametrization.
pub fn lcurve_corner<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
    grid: &AlphaGrid<T>,
) -> Result<ParamChoiceResult<T>> {
    let curve = evaluate_curve(factors, r_tilde, grid)?;
    let (alpha_star, status) = corner_of_curve(&curve)?;
    Ok(ParamChoiceResult {
        alpha_star,
        curve,
        status,
    })
}

pub(crate) fn corner_of_curve<T: Real>(curve: &[CurvePoint<T>]) -> Result<(T, ParamStatus)> {
    let usable: Vec<&CurvePoint<T>> = curve
        .iter()
        .filter(|p| {
            p.residual_norm > T::zero()
                && p.seminorm > T::zero()
                && p.residual_norm.is_finite()
                && p.seminorm.is_finite()
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::DegenerateCurve(
            "too few usable L-curve points (zero residual or seminorm)".into(),
        ));
    }
    let xi_all: Vec<T> = usable.iter().map(|p| p.residual_norm.ln()).collect();
    let eta_all: Vec<T> = usable.iter().map(|p| p.seminorm.ln()).collect();
    // Decimate points closer than a fraction of the total arclength: in the
    // saturated parts of the curve consecutive points differ only by rounding
    // noise, which would otherwise dominate the curvature estimate.
    let total: T = (1..usable.len())
        .map(|k| (xi_all[k] - xi_all[k - 1]).hypot(eta_all[k] - eta_all[k - 1]))
        .fold(T::zero(), |a, b| a + b);
    if total == T::zero() {
        return Err(Error::DegenerateCurve("curve collapses to a single point".into()));
    }
    let min_step = total / real_usize::<T>(10 * usable.len());
    let mut keep: Vec<usize> = vec![0];
    for k in 1..usable.len() {
        let last = *keep.last().expect("nonempty");
        let step = (xi_all[k] - xi_all[last]).hypot(eta_all[k] - eta_all[last]);
        if step >= min_step {
            keep.push(k);
        }
    }
    if keep.len() < 3 {
        return Err(Error::DegenerateCurve(
            "curve has no resolvable extent after decimation".into(),
        ));
    }
    let usable: Vec<&CurvePoint<T>> = keep.iter().map(|&k| usable[k]).collect();
    let xi: Vec<T> = keep.iter().map(|&k| xi_all[k]).collect();
    let eta: Vec<T> = keep.iter().map(|&k| eta_all[k]).collect();
    let len = usable.len();
    let mut s = vec![T::zero(); len];
    for k in 1..len {
        s[k] = s[k - 1] + (xi[k] - xi[k - 1]).hypot(eta[k] - eta[k - 1]);
    }
    let mut kappa = vec![T::zero(); len];
    for k in 1..len - 1 {
        let h1 = s[k] - s[k - 1];
        let h2 = s[k + 1] - s[k];
        if h1 == T::zero() || h2 == T::zero() {
            continue;
        }
        let span = h1 + h2;
        let d1 = |f: &[T]| (f[k + 1] - f[k - 1]) / span;
        let d2 = |f: &[T]| {
            real::<T>(2.0) * (h2 * f[k - 1] - span * f[k] + h1 * f[k + 1]) / (h1 * h2 * span)
        };
        let (xp, xpp) = (d1(&xi), d2(&xi));
        let (ep, epp) = (d1(&eta), d2(&eta));
        let speed2 = xp * xp + ep * ep;
        if speed2 == T::zero() {
            continue;
        }
        // Signed curvature; an L corner turns counterclockwise when the curve
        // is traversed with increasing alpha.
        kappa[k] = (xp * epp - ep * xpp) / speed2.powf(real(1.5));
    }
    // Candidate corners are the local curvature maxima; the dominant one is
    // the candidate closest to the lower-left utopia point of the normalized
    // log-log plot, which is where the trade-off actually happens. Reweighted
    // iterations can produce several corners, and the raw curvature maximum
    // may sit on a spectral transition far from the trade-off region.
    let candidates: Vec<usize> = (1..len - 1)
        .filter(|&k| kappa[k] > T::zero() && kappa[k] >= kappa[k - 1] && kappa[k] >= kappa[k + 1])
        .collect();
    if candidates.is_empty() {
        // A curve that turns nowhere toward the origin has no corner; this
        // happens once the residual has been fit down to noise.
        return Err(Error::DegenerateCurve(
            "the curve has no positive-curvature corner".into(),
        ));
    }
    let (xi_min, xi_max) = min_max(&xi);
    let (eta_min, eta_max) = min_max(&eta);
    let xi_span = (xi_max - xi_min).max(T::default_epsilon());
    let eta_span = (eta_max - eta_min).max(T::default_epsilon());
    let k_star = candidates
        .into_iter()
        .min_by(|&a, &b| {
            let dist = |k: usize| {
                let dx = (xi[k] - xi_min) / xi_span;
                let dy = (eta[k] - eta_min) / eta_span;
                dx * dx + dy * dy
            };
            dist(a).partial_cmp(&dist(b)).expect("finite distance")
        })
        .expect("at least one candidate");
    let status = if k_star == 1 || k_star == len - 2 {
        ParamStatus::BoundaryWarning
    } else {
        ParamStatus::Ok
    };
    Ok((usable[k_star].alpha, status))
}

/// GCV grid minimizer with the flat-curve fallback: an almost flat curve or a
/// minimum pinned to a grid endpoint falls back to the caller-supplied
/// previous alpha.
pub fn gcv_minimize<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
    grid: &AlphaGrid<T>,
    previous_alpha: Option<T>,
) -> Result<ParamChoiceResult<T>> {
    let curve = evaluate_curve(factors, r_tilde, grid)?;
    let (alpha_star, status) = gcv_argmin_of_curve(&curve, previous_alpha)?;
    Ok(ParamChoiceResult {
        alpha_star,
        curve,
        status,
    })
}

pub(crate) fn gcv_argmin_of_curve<T: Real>(
    curve: &[CurvePoint<T>],
    previous_alpha: Option<T>,
) -> Result<(T, ParamStatus)> {
    let mut argmin: Option<usize> = None;
    let mut gmin = real::<T>(f64::INFINITY);
    let mut gmax = T::zero();
    for (k, p) in curve.iter().enumerate() {
        if !p.gcv.is_finite() {
            continue;
        }
        if p.gcv < gmin {
            gmin = p.gcv;
            argmin = Some(k);
        }
        gmax = gmax.max(p.gcv);
    }
    let Some(k_star) = argmin else {
        return Err(Error::DegenerateCurve("GCV is not finite anywhere on the grid".into()));
    };
    let flat = gmax == T::zero()
        || (gmax - gmin) / gmax < real::<T>(1e-3)
        || k_star == 0
        || k_star == curve.len() - 1;
    if flat {
        Ok((
            previous_alpha.unwrap_or(curve[k_star].alpha),
            ParamStatus::FlatGcvFallback,
        ))
    } else {
        Ok((curve[k_star].alpha, ParamStatus::Ok))
    }
}

fn min_max<T: Real>(values: &[T]) -> (T, T) {
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// First-iteration heuristic `alpha = max(gamma) / mean(gamma)`.
pub fn initial_alpha<T: Real>(gamma: &DVector<T>, mean: InitialAlphaMean) -> Result<T> {
    let positive: Vec<T> = gamma.iter().copied().filter(|g| *g > T::zero()).collect();
    if positive.is_empty() {
        return Err(Error::DegenerateCurve(
            "all generalized singular values are zero".into(),
        ));
    }
    let max = positive.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let denom_count = match mean {
        InitialAlphaMean::NonzeroOnly => positive.len(),
        InitialAlphaMean::All => gamma.len(),
    };
    let mean_val = positive.iter().copied().fold(T::zero(), |a, b| a + b)
        / real_usize::<T>(denom_count);
    Ok(max / mean_val)
}

/// Cooling schedule `alpha_k = max(c * alpha_prev, alpha_star)`.
pub fn cooled_alpha<T: Real>(alpha_prev: T, alpha_star: T, c: T) -> Result<T> {
    if !(c >= real::<T>(0.01) && c <= real::<T>(0.5)) {
        return Err(Error::Config(
            "cooling constant must lie in [0.01, 0.5]".into(),
        ));
    }
    if !(alpha_prev > T::zero()) || !(alpha_star > T::zero()) {
        return Err(Error::InvalidInput("cooling requires positive alphas".into()));
    }
    Ok((c * alpha_prev).max(alpha_star))
}
