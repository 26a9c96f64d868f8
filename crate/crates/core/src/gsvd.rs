//! Generalized singular value decomposition of the pair (weighted kernel,
//! stabilizer) and the filtered Tikhonov solver built on it.
//!
//! For an m x n kernel `Gt` (m < n) and an n x n stabilizer `D` with
//! `N(Gt) != N(D)` intersecting only in zero, orthogonal `U`, `V` and a
//! nonsingular `X` exist with `Gt = U L X^T` and `D = V M X^T`, where `L` and
//! `M` carry the pairs `(lambda_i, mu_i)`, `lambda_i^2 + mu_i^2 = 1`. The
//! generalized singular values `gamma_i = lambda_i / mu_i` are stored
//! nondecreasing with the first `q = n - m` equal to zero, and the solution of
//! the regularized normal equations is a filtered expansion in the columns of
//! `(X^T)^{-1}`.
//!
//! A diagonal-positive stabilizer reduces to an ordinary SVD of `Gt * D^{-1}`;
//! the general pair (needed for the smoothness stabilizer) goes through a QR
//! factorization of the stacked pair followed by a cosine-sine style split of
//! the orthogonal factor.

use nalgebra::linalg::SVD;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{real, real_usize, Real};
use crate::weights::StabilizerOperator;

/// Factors of the pair decomposition. Immutable once built.
#[derive(Debug, Clone)]
pub struct GsvdFactors<T: Real> {
    u: DMatrix<T>,
    gamma: DVector<T>,
    lambda: DVector<T>,
    mu: DVector<T>,
    xinv_cols: DMatrix<T>,
    v: Option<DMatrix<T>>,
    q: usize,
}

impl<T: Real> GsvdFactors<T> {
    /// Orthogonal m x m left factor of the kernel.
    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    /// Generalized singular values, nondecreasing, first `q` zero.
    pub fn gamma(&self) -> &DVector<T> {
        &self.gamma
    }

    pub fn lambda(&self) -> &DVector<T> {
        &self.lambda
    }

    pub fn mu(&self) -> &DVector<T> {
        &self.mu
    }

    /// Columns of `(X^T)^{-1}`, the solution expansion basis.
    pub fn xinv_cols(&self) -> &DMatrix<T> {
        &self.xinv_cols
    }

    /// Orthogonal n x n left factor of the stabilizer, when computed.
    pub fn v(&self) -> Option<&DMatrix<T>> {
        self.v.as_ref()
    }

    /// Number of structurally zero generalized singular values, `n - m`.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_stations(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.gamma.len()
    }

    /// Smallest nonzero generalized singular value, if any.
    pub fn gamma_min_positive(&self) -> Option<T> {
        self.gamma.iter().copied().find(|g| *g > T::zero())
    }

    /// Largest generalized singular value.
    pub fn gamma_max(&self) -> T {
        self.gamma[self.gamma.len() - 1]
    }

    /// Recovers `X^T` by inverting the stored expansion basis.
    pub fn xt_matrix(&self) -> Result<DMatrix<T>> {
        self.xinv_cols
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("expansion basis is singular".into()))
    }

    /// Relative Frobenius residuals of the two reconstruction identities
    /// `Gt = U L X^T` and `D = V M X^T`.
    pub fn reconstruction_residuals(
        &self,
        gt: &DMatrix<T>,
        d: &StabilizerOperator<T>,
    ) -> Result<(T, T)> {
        let (m, n) = (self.n_stations(), self.n_cells());
        let xt = self.xt_matrix()?;
        let mut ul = DMatrix::<T>::zeros(m, n);
        for i in self.q..n {
            let col = self.u.column(i - self.q) * self.lambda[i];
            ul.set_column(i, &col);
        }
        let gt_residual = (gt - ul * &xt).norm() / gt.norm();

        let v = self
            .v
            .as_ref()
            .ok_or_else(|| Error::Numerical("V factor was not computed".into()))?;
        let mut vm = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            let col = v.column(i) * self.mu[i];
            vm.set_column(i, &col);
        }
        let d_mat = d.to_matrix();
        let d_residual = (&d_mat - vm * &xt).norm() / d_mat.norm();
        Ok((gt_residual, d_residual))
    }
}

/// Tikhonov filter factors `f_i = gamma_i^2/(gamma_i^2 + alpha^2)`, zero for
/// the `q` structural null directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFactors<T: Real> {
    values: DVector<T>,
    q: usize,
}

impl<T: Real> FilterFactors<T> {
    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Sum of all filter factors, the effective number of degrees of freedom.
    pub fn sum(&self) -> T {
        self.values.sum()
    }
}

pub fn filter_factors<T: Real>(gamma: &DVector<T>, q: usize, alpha: T) -> Result<FilterFactors<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidInput("filter factors require alpha > 0".into()));
    }
    let values = DVector::from_fn(gamma.len(), |i, _| {
        if i < q {
            T::zero()
        } else {
            let g2 = gamma[i] * gamma[i];
            g2 / (g2 + alpha * alpha)
        }
    });
    Ok(FilterFactors { values, q })
}

/// Factorizes the pair `(Gt, D)`; `Gt` must be strictly underdetermined.
pub fn gsvd_factorize<T: Real>(
    gt: &DMatrix<T>,
    d: &StabilizerOperator<T>,
) -> Result<GsvdFactors<T>> {
    let (m, n) = gt.shape();
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "the pair factorization requires m < n, got {m}x{n}"
        )));
    }
    if d.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "stabilizer operator",
            expected: n,
            actual: d.dim(),
        });
    }
    if gt.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("kernel entries must be finite".into()));
    }
    match d {
        StabilizerOperator::Diagonal(diag) => factorize_diagonal(gt, diag),
        StabilizerOperator::Smoothness(mat) => factorize_general(gt, mat),
    }
}

/// Standard-form reduction: SVD of `Gt * D^{-1}` for diagonal-positive `D`.
fn factorize_diagonal<T: Real>(gt: &DMatrix<T>, diag: &DVector<T>) -> Result<GsvdFactors<T>> {
    let (m, n) = gt.shape();
    let q = n - m;
    if diag.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "diagonal stabilizer entries must be positive and finite".into(),
        ));
    }
    let d_inv = diag.map(|v| T::one() / v);
    let mut a = gt.clone();
    for j in 0..n {
        let s = d_inv[j];
        for i in 0..m {
            a[(i, j)] *= s;
        }
    }
    let (u_svd, sigma, v_thin) = thin_svd(&a)?;
    let v_comp = orthonormal_completion(&v_thin)?;

    let mut u = DMatrix::<T>::zeros(m, m);
    let mut v = DMatrix::<T>::zeros(n, n);
    let mut gamma = DVector::<T>::zeros(n);
    let mut lambda = DVector::<T>::zeros(n);
    let mut mu = DVector::<T>::zeros(n);
    let mut xinv = DMatrix::<T>::zeros(n, n);

    for i in 0..q {
        mu[i] = T::one();
        let col = v_comp.column(i).into_owned();
        v.set_column(i, &col);
        xinv.set_column(i, &col.component_mul(&d_inv));
    }
    for i in q..n {
        let k = n - 1 - i; // reverse the descending SVD order
        let g = sigma[k];
        let denom = (T::one() + g * g).sqrt();
        gamma[i] = g;
        lambda[i] = g / denom;
        mu[i] = T::one() / denom;
        let col = v_thin.column(k).into_owned();
        v.set_column(i, &col);
        xinv.set_column(i, &(col.component_mul(&d_inv) * mu[i]));
        u.set_column(i - q, &u_svd.column(k));
    }

    Ok(GsvdFactors {
        u,
        gamma,
        lambda,
        mu,
        xinv_cols: xinv,
        v: Some(v),
        q,
    })
}

/// General pair factorization: QR of the stacked pair, then a cosine-sine
/// style split of the orthogonal factor.
fn factorize_general<T: Real>(gt: &DMatrix<T>, dmat: &DMatrix<T>) -> Result<GsvdFactors<T>> {
    let (m, n) = gt.shape();
    let q = n - m;
    if dmat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("stabilizer entries must be finite".into()));
    }
    // Scale the pair so the kernel magnitude is O(1); a common factor on both
    // matrices leaves U, V, and the spectrum unchanged and is undone on X.
    let scale = gt.amax();
    if scale == T::zero() {
        return Err(Error::InvalidInput("kernel matrix is identically zero".into()));
    }
    let inv_scale = T::one() / scale;
    let mut z = DMatrix::<T>::zeros(m + n, n);
    z.view_mut((0, 0), (m, n)).copy_from(&(gt * inv_scale));
    z.view_mut((m, 0), (n, n)).copy_from(&(dmat * inv_scale));

    let qr = z.qr();
    let r = qr.r();
    let q_thin = qr.q();

    // R singular means the stacked pair is rank deficient, i.e. the null
    // spaces of Gt and D intersect nontrivially.
    let rdiag_max = (0..n).map(|i| r[(i, i)].abs()).fold(T::zero(), |a, b| a.max(b));
    let rdiag_tol = rdiag_max * T::default_epsilon() * real_usize::<T>(100 * n);
    if rdiag_max == T::zero() || (0..n).any(|i| r[(i, i)].abs() <= rdiag_tol) {
        return Err(Error::NullSpace(
            "the kernel and stabilizer share a null-space direction".into(),
        ));
    }

    let q1 = q_thin.rows(0, m).into_owned();
    let q2 = q_thin.rows(m, n).into_owned();
    let (u_svd, cosines, w_thin) = thin_svd(&q1)?;
    let w_comp = orthonormal_completion(&w_thin)?;

    let mut u = DMatrix::<T>::zeros(m, m);
    let mut v = DMatrix::<T>::zeros(n, n);
    let mut w = DMatrix::<T>::zeros(n, n);
    let mut gamma = DVector::<T>::zeros(n);
    let mut lambda = DVector::<T>::zeros(n);
    let mut mu = DVector::<T>::zeros(n);

    for i in 0..n {
        let w_col = if i < q {
            w_comp.column(i).into_owned()
        } else {
            w_thin.column(n - 1 - i).into_owned()
        };
        let p = &q2 * &w_col;
        let mu_i = p.norm();
        if mu_i <= T::default_epsilon() {
            return Err(Error::Numerical(
                "stabilizer is singular along a kernel direction (infinite generalized \
                 singular value)"
                    .into(),
            ));
        }
        if i >= q {
            let k = n - 1 - i;
            lambda[i] = cosines[k];
            gamma[i] = lambda[i] / mu_i;
            u.set_column(i - q, &u_svd.column(k));
        }
        mu[i] = mu_i;
        v.set_column(i, &(p / mu_i));
        w.set_column(i, &w_col);
    }

    // X^T = W^T * (scale * R)  =>  (X^T)^{-1} = R^{-1} W / scale.
    let xinv = r
        .solve_upper_triangular(&w)
        .ok_or_else(|| Error::NullSpace("triangular factor is singular".into()))?
        * inv_scale;

    Ok(GsvdFactors {
        u,
        gamma,
        lambda,
        mu,
        xinv_cols: xinv,
        v: Some(v),
        q,
    })
}

/// Filtered solution of the regularized normal equations
/// `(Gt^T Gt + alpha^2 D^T D) x = Gt^T r`.
pub fn solve_filtered<T: Real>(
    factors: &GsvdFactors<T>,
    r_tilde: &DVector<T>,
    alpha: T,
) -> Result<DVector<T>> {
    let (m, n, q) = (factors.n_stations(), factors.n_cells(), factors.q());
    if r_tilde.len() != m {
        return Err(Error::DimensionMismatch {
            context: "weighted residual",
            expected: m,
            actual: r_tilde.len(),
        });
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidInput("solve requires alpha > 0".into()));
    }
    let ub = factors.u.transpose() * r_tilde;
    let mut coeffs = DVector::<T>::zeros(m);
    for j in 0..m {
        let i = q + j;
        let lam = factors.lambda[i];
        if lam > T::zero() {
            let g2 = factors.gamma[i] * factors.gamma[i];
            coeffs[j] = g2 / (g2 + alpha * alpha) * ub[j] / lam;
        }
    }
    Ok(factors.xinv_cols.columns(q, n - q) * coeffs)
}

/// Thin SVD with singular values sorted descending: returns
/// `(left, sigma, right)` with `a = left * diag(sigma) * right^T`.
fn thin_svd<T: Real>(a: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>, DMatrix<T>)> {
    let (rows, cols) = a.shape();
    let max_iter = 75 * rows.max(cols).max(100);
    if rows >= cols {
        let svd = SVD::try_new(a.clone(), true, true, T::default_epsilon(), max_iter)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v requested");
        Ok((u, svd.singular_values, vt.transpose()))
    } else {
        // Feed the tall orientation and swap the factors back.
        let svd = SVD::try_new(a.transpose(), true, true, T::default_epsilon(), max_iter)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v requested");
        Ok((vt.transpose(), svd.singular_values, u))
    }
}

/// Extends an n x k matrix with orthonormal columns to a full orthonormal
/// basis, returning the n x (n-k) complement. Householder QR of the basis is
/// applied to the trailing identity columns.
fn orthonormal_completion<T: Real>(basis: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (n, k) = basis.shape();
    if k > n {
        return Err(Error::InvalidInput("basis has more columns than rows".into()));
    }
    let mut a = basis.clone();
    let mut reflectors: Vec<DVector<T>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = DVector::<T>::zeros(n - j);
        for i in j..n {
            v[i - j] = a[(i, j)];
        }
        let norm = v.norm();
        if norm == T::zero() {
            return Err(Error::Numerical("rank-deficient orthonormal basis".into()));
        }
        let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += sign * norm;
        let vnorm = v.norm();
        v /= vnorm;
        for c in (j + 1)..k {
            let mut dot = T::zero();
            for i in 0..(n - j) {
                dot += v[i] * a[(j + i, c)];
            }
            let two_dot = real::<T>(2.0) * dot;
            for i in 0..(n - j) {
                a[(j + i, c)] -= two_dot * v[i];
            }
        }
        reflectors.push(v);
    }
    let mut comp = DMatrix::<T>::zeros(n, n - k);
    let mut col = DVector::<T>::zeros(n);
    for (out_idx, c) in (k..n).enumerate() {
        col.fill(T::zero());
        col[c] = T::one();
        for (j, v) in reflectors.iter().enumerate().rev() {
            let mut dot = T::zero();
            for i in 0..(n - j) {
                dot += v[i] * col[j + i];
            }
            let two_dot = real::<T>(2.0) * dot;
            for i in 0..(n - j) {
                col[j + i] -= two_dot * v[i];
            }
        }
        comp.set_column(out_idx, &col);
    }
    Ok(comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_stabilizer_reduces_to_plain_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gt = random_matrix(&mut rng, 4, 7);
        let d = StabilizerOperator::Diagonal(DVector::from_element(7, 1.0));
        let f = gsvd_factorize(&gt, &d).unwrap();

        let svd = gt.clone().svd(false, false);
        let mut expected: Vec<f64> = svd.singular_values.iter().copied().collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, s) in expected.iter().enumerate() {
            let g = f.gamma()[f.q() + i];
            assert!((g - s).abs() <= 1e-12 * s.max(1.0), "gamma {g} vs sigma {s}");
        }
    }

    #[test]
    fn dimension_count_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = random_matrix(&mut rng, 5, 8);
        let diag = DVector::from_fn(8, |_, _| rng.random_range(0.5..2.0));
        let f = gsvd_factorize(&gt, &StabilizerOperator::Diagonal(diag)).unwrap();
        assert_eq!(f.q(), 3);
        for i in 0..3 {
            assert_eq!(f.gamma()[i], 0.0);
        }
        for i in 1..8 {
            assert!(f.gamma()[i] >= f.gamma()[i - 1]);
        }
        for i in 0..8 {
            let s = f.lambda()[i].powi(2) + f.mu()[i].powi(2);
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_identities_diagonal_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gt = random_matrix(&mut rng, 5, 8);
        let diag = DVector::from_fn(8, |_, _| rng.random_range(0.5..2.0));
        let d = StabilizerOperator::Diagonal(diag);
        let f = gsvd_factorize(&gt, &d).unwrap();
        let (rg, rd) = f.reconstruction_residuals(&gt, &d).unwrap();
        assert!(rg <= 1e-10, "kernel residual {rg}");
        assert!(rd <= 1e-10, "stabilizer residual {rd}");

        let u = f.u();
        let ortho = (u.transpose() * u - DMatrix::<f64>::identity(5, 5)).norm();
        assert!(ortho <= 1e-10);
    }

    #[test]
    fn reconstruction_identities_general_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let gt = random_matrix(&mut rng, 4, 9);
        // Dense, diagonally dominant stabilizer.
        let mut dm = random_matrix(&mut rng, 9, 9) * 0.2;
        for i in 0..9 {
            dm[(i, i)] += 2.0;
        }
        let d = StabilizerOperator::Smoothness(dm);
        let f = gsvd_factorize(&gt, &d).unwrap();
        let (rg, rd) = f.reconstruction_residuals(&gt, &d).unwrap();
        assert!(rg <= 1e-10, "kernel residual {rg}");
        assert!(rd <= 1e-10, "stabilizer residual {rd}");
        assert_eq!(f.q(), 5);
        for i in 0..5 {
            assert_eq!(f.gamma()[i], 0.0);
            assert!((f.mu()[i] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn general_and_diagonal_paths_agree_for_diagonal_stabilizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let gt = random_matrix(&mut rng, 4, 7);
        let diag = DVector::from_fn(7, |_, _| rng.random_range(0.5..2.0));
        let fast = gsvd_factorize(&gt, &StabilizerOperator::Diagonal(diag.clone())).unwrap();
        let general =
            gsvd_factorize(&gt, &StabilizerOperator::Smoothness(DMatrix::from_diagonal(&diag)))
                .unwrap();
        for i in 0..7 {
            assert!(
                (fast.gamma()[i] - general.gamma()[i]).abs() <= 1e-10 * (1.0 + fast.gamma()[i]),
                "gamma mismatch at {i}"
            );
        }
        // Both must solve the same normal equations.
        let r = DVector::from_fn(4, |i, _| (i as f64 * 0.7).cos());
        let xf = solve_filtered(&fast, &r, 0.9).unwrap();
        let xg = solve_filtered(&general, &r, 0.9).unwrap();
        assert!((&xf - &xg).norm() / xf.norm() <= 1e-9);
    }

    #[test]
    fn filter_factors_basics() {
        let gamma = DVector::<f64>::from_vec(vec![0.0, 0.0, 1.0, 2.0, 4.0]);
        let f = filter_factors(&gamma, 2, 2.0).unwrap();
        assert_eq!(f.values()[0], 0.0);
        assert_eq!(f.values()[1], 0.0);
        assert!((f.values()[3] - 0.5).abs() < 1e-15);
        // Strictly increasing in gamma for fixed alpha.
        assert!(f.values()[2] < f.values()[3] && f.values()[3] < f.values()[4]);

        let tiny = filter_factors(&gamma, 2, 1e9).unwrap();
        assert!(tiny.values().iter().all(|&v| v < 1e-15));
        let open = filter_factors(&gamma, 2, 1e-9).unwrap();
        assert!(open.values().iter().skip(2).all(|&v| v > 1.0 - 1e-12));
        assert!(filter_factors(&gamma, 2, 0.0).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_matrix(&mut rng, 4, 7);
        let diag = DVector::from_fn(7, |_, _| rng.random_range(0.5..2.0));
        let f = gsvd_factorize(&gt, &StabilizerOperator::Diagonal(diag)).unwrap();
        let x = solve_filtered(&f, &DVector::zeros(4), 1.0).unwrap();
        assert_eq!(x.amax(), 0.0);
    }

    #[test]
    fn tikhonov_norms_are_monotone_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let gt = random_matrix(&mut rng, 5, 9);
        let diag = DVector::from_fn(9, |_, _| rng.random_range(0.5..2.0));
        let d = StabilizerOperator::Diagonal(diag.clone());
        let f = gsvd_factorize(&gt, &d).unwrap();
        let r = DVector::from_fn(5, |i, _| 1.0 + (i as f64)).normalize();

        let mut last_res = -1.0;
        let mut last_semi = f64::INFINITY;
        // Six decades of alpha.
        for k in 0..13 {
            let alpha = 1e-3 * 10f64.powf(k as f64 / 2.0);
            let x = solve_filtered(&f, &r, alpha).unwrap();
            let res = (&gt * &x - &r).norm();
            let semi = diag.component_mul(&x).norm();
            assert!(res >= last_res - 1e-12, "residual not nondecreasing");
            assert!(semi <= last_semi + 1e-12, "seminorm not nonincreasing");
            last_res = res;
            last_semi = semi;
        }
    }

    #[test]
    fn shape_and_nullspace_errors() {
        let gt = DMatrix::<f64>::zeros(5, 5);
        let d = StabilizerOperator::Diagonal(DVector::from_element(5, 1.0));
        assert!(gsvd_factorize(&gt, &d).is_err());

        // Shared null-space direction: both operators kill e_1.
        let mut gt = DMatrix::<f64>::zeros(2, 4);
        gt[(0, 1)] = 1.0;
        gt[(1, 2)] = 1.0;
        let mut dm = DMatrix::<f64>::identity(4, 4);
        dm[(0, 0)] = 0.0;
        assert!(matches!(
            gsvd_factorize(&gt, &StabilizerOperator::Smoothness(dm)),
            Err(Error::NullSpace(_))
        ));
    }
}
