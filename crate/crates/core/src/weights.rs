//! Diagonal weighting operators and the composed stabilizer operator.
//!
//! The stabilizer is the product `D = W_e * W_hard * W_depth`: minimum-support
//! weights rebuilt from the last two iterates, hard-constraint weights pinning
//! cells with known density, and depth weights `1/(z_j + zeta)^beta`
//! counteracting the kernel decay. A discrete second-difference operator can
//! replace `W_e` to produce smooth reconstructions instead of focused ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::SurveyGrid;
use crate::scalar::{real, Real};

/// Weight applied to the stabilizer entry of a cell whose density is pinned,
/// either a-priori or by bound projection.
pub fn hard_constraint_weight<T: Real>() -> T {
    real(100.0)
}

/// The four diagonal weight vectors of one inversion iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T: Real> {
    /// Data weights, length m: reciprocal relative standard deviations.
    pub wd: DVector<T>,
    /// Minimum-support weights, length n.
    pub we: DVector<T>,
    /// Depth weights, length n.
    pub wdepth: DVector<T>,
    /// Hard-constraint weights, length n, entries in {1, 100}.
    pub whard: DVector<T>,
}

impl<T: Real> WeightSet<T> {
    pub fn new(
        wd: DVector<T>,
        we: DVector<T>,
        wdepth: DVector<T>,
        whard: DVector<T>,
    ) -> Result<Self> {
        if we.len() != wdepth.len() || we.len() != whard.len() {
            return Err(Error::DimensionMismatch {
                context: "weight set",
                expected: we.len(),
                actual: wdepth.len().max(whard.len()),
            });
        }
        for v in wd.iter().chain(we.iter()).chain(wdepth.iter()) {
            if !(*v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidInput("weights must be positive and finite".into()));
            }
        }
        let hundred = hard_constraint_weight::<T>();
        if whard.iter().any(|w| *w != T::one() && *w != hundred) {
            return Err(Error::InvalidInput(
                "hard-constraint weights must be 1 or 100".into(),
            ));
        }
        Ok(Self {
            wd,
            we,
            wdepth,
            whard,
        })
    }
}

/// The stabilizer operator `D` of the Tikhonov term.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilizerOperator<T: Real> {
    /// Composed diagonal of the minimum-support pipeline; invertible by
    /// construction since every entry is positive.
    Diagonal(DVector<T>),
    /// Second-difference smoothness operator composed with the hard and depth
    /// weights, identity-shifted so the pair null-space condition holds.
    Smoothness(DMatrix<T>),
}

impl<T: Real> StabilizerOperator<T> {
    /// Side length of the (square) operator.
    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Smoothness(m) => m.nrows(),
        }
    }

    /// The diagonal when the operator is of diagonal kind.
    pub fn diagonal(&self) -> Option<&DVector<T>> {
        match self {
            Self::Diagonal(d) => Some(d),
            Self::Smoothness(_) => None,
        }
    }

    /// Applies the operator to a model vector.
    pub fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "stabilizer apply",
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(match self {
            Self::Diagonal(d) => d.component_mul(v),
            Self::Smoothness(m) => m * v,
        })
    }

    /// Dense matrix form, for factorization oracles and tests.
    pub fn to_matrix(&self) -> DMatrix<T> {
        match self {
            Self::Diagonal(d) => DMatrix::from_diagonal(d),
            Self::Smoothness(m) => m.clone(),
        }
    }

    /// Condition number of a diagonal operator: max/min of its diagonal.
    pub fn diagonal_condition(&self) -> Option<T> {
        self.diagonal().map(|d| d.max() / d.min())
    }
}

/// Data weights `1/sigma_i` from relative standard deviations.
pub fn data_weights<T: Real>(sigmas: &DVector<T>) -> Result<DVector<T>> {
    if sigmas.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
        return Err(Error::InvalidInput(
            "data weights require positive finite sigmas".into(),
        ));
    }
    Ok(sigmas.map(|s| T::one() / s))
}

/// Depth weights `1/(z_j + zeta)^beta` with `z_j` the mean depth of cell `j`.
pub fn depth_weights<T: Real>(grid: &SurveyGrid<T>, beta: T, zeta: T) -> Result<DVector<T>> {
    if !(beta >= T::zero()) {
        return Err(Error::Config("depth-weighting exponent beta must be >= 0".into()));
    }
    if !(zeta > T::zero()) {
        return Err(Error::Config("depth-weighting offset zeta must be > 0".into()));
    }
    let mut w = DVector::zeros(grid.n_cells());
    for j in 0..grid.n_cells() {
        let z = grid.cell_mean_depth(j)?;
        w[j] = T::one() / (z + zeta).powf(beta);
    }
    Ok(w)
}

/// Minimum-support weights `((m_curr - m_prev)^2 + eps^2)^(-1/2)`.
///
/// Pass `None` for the first iteration, which uses identity weights.
pub fn ms_weights<T: Real>(
    previous: Option<(&DVector<T>, &DVector<T>)>,
    n: usize,
    epsilon: T,
) -> Result<DVector<T>> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(Error::Config("focusing parameter epsilon must be > 0".into()));
    }
    match previous {
        None => Ok(DVector::from_element(n, T::one())),
        Some((m_curr, m_prev)) => {
            if m_curr.len() != n || m_prev.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "minimum-support weights",
                    expected: n,
                    actual: m_curr.len().min(m_prev.len()),
                });
            }
            Ok(DVector::from_fn(n, |j, _| {
                let dm = m_curr[j] - m_prev[j];
                T::one() / (dm * dm + epsilon * epsilon).sqrt()
            }))
        }
    }
}

/// Returns a copy of `whard` with entry `j` set to the hard-constraint weight.
/// Idempotent.
pub fn hard_constrain<T: Real>(whard: &DVector<T>, j: usize) -> Result<DVector<T>> {
    if j >= whard.len() {
        return Err(Error::CellIndexOutOfRange {
            index: j,
            n_cells: whard.len(),
        });
    }
    let mut out = whard.clone();
    out[j] = hard_constraint_weight();
    Ok(out)
}

/// Composes the diagonal stabilizer `D = W_e * W_hard * W_depth`.
pub fn compose_stabilizer<T: Real>(
    we: &DVector<T>,
    whard: &DVector<T>,
    wdepth: &DVector<T>,
) -> Result<StabilizerOperator<T>> {
    if whard.len() != we.len() || wdepth.len() != we.len() {
        return Err(Error::DimensionMismatch {
            context: "stabilizer composition",
            expected: we.len(),
            actual: whard.len().max(wdepth.len()),
        });
    }
    let d = DVector::from_fn(we.len(), |j, _| we[j] * whard[j] * wdepth[j]);
    if d.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "stabilizer diagonal must be positive and finite".into(),
        ));
    }
    Ok(StabilizerOperator::Diagonal(d))
}

/// Pure discrete second-difference operator on the 2-D grid: the sum of the
/// horizontal and vertical 1-D second differences, with one-sided stencils on
/// the grid borders. A direction shorter than 3 cells contributes nothing.
pub fn second_difference_matrix<T: Real>(grid: &SurveyGrid<T>) -> Result<DMatrix<T>> {
    let (nc, nr) = (grid.n_cols(), grid.n_rows());
    let n = grid.n_cells();
    if nc < 3 && nr < 3 {
        return Err(Error::Geometry(format!(
            "grid {nc}x{nr} is too small for a second-difference stabilizer"
        )));
    }
    let one = T::one();
    let two = real::<T>(2.0);
    let mut l = DMatrix::<T>::zeros(n, n);
    let idx = |row: usize, col: usize| row * nc + col;
    // 1-D stencil position: clamp to one-sided at the borders.
    let anchor = |i: usize, len: usize| -> usize {
        if i == 0 {
            1
        } else if i == len - 1 {
            len - 2
        } else {
            i
        }
    };
    if nc >= 3 {
        for row in 0..nr {
            for col in 0..nc {
                let c = anchor(col, nc);
                let j = idx(row, col);
                l[(j, idx(row, c - 1))] += one;
                l[(j, idx(row, c))] += -two;
                l[(j, idx(row, c + 1))] += one;
            }
        }
    }
    if nr >= 3 {
        for row in 0..nr {
            for col in 0..nc {
                let r = anchor(row, nr);
                let j = idx(row, col);
                l[(j, idx(r - 1, col))] += one;
                l[(j, idx(r, col))] += -two;
                l[(j, idx(r + 1, col))] += one;
            }
        }
    }
    Ok(l)
}

/// Smoothness stabilizer: the second-difference operator, identity-shifted by
/// `1e-6` times its max row sum so the pair null-space condition holds, then
/// composed with the hard and depth weights.
pub fn smoothness_operator<T: Real>(
    grid: &SurveyGrid<T>,
    whard: &DVector<T>,
    wdepth: &DVector<T>,
) -> Result<StabilizerOperator<T>> {
    let n = grid.n_cells();
    if whard.len() != n || wdepth.len() != n {
        return Err(Error::DimensionMismatch {
            context: "smoothness stabilizer",
            expected: n,
            actual: whard.len().min(wdepth.len()),
        });
    }
    let mut l = second_difference_matrix(grid)?;
    let stencil_norm = (0..n)
        .map(|i| l.row(i).iter().fold(T::zero(), |acc, v| acc + v.abs()))
        .fold(T::zero(), |a, b| a.max(b));
    let shift = real::<T>(1e-6) * stencil_norm;
    for i in 0..n {
        l[(i, i)] += shift;
    }
    // Column scaling: D = (L + shift*I) * diag(whard) * diag(wdepth).
    for j in 0..n {
        let s = whard[j] * wdepth[j];
        for i in 0..n {
            l[(i, j)] *= s;
        }
    }
    Ok(StabilizerOperator::Smoothness(l))
}
