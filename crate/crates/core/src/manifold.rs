//! Stiefel and Grassmann primitives.
//!
//! A point of Gr(n, k) is represented by any n×k matrix with orthonormal
//! columns ([`StiefelBasis`]); two representatives describe the same point
//! when they differ by a right k×k orthogonal factor. Everything here works on
//! n×k (or k×k) matrices only. The single exception is [`iam_ground_truth`],
//! which forms the n×n averaged projector to serve as a reference solution.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GravError, Result};
use crate::ops::{Averaged, OpCount};
use crate::Matrix;

/// Maximum entry of `|UᵀU - I|` accepted for a Stiefel matrix.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Maximum entry of `|baseᵀ delta|` accepted for a horizontal tangent vector.
pub const HORIZONTAL_TOL: f64 = 1e-10;
/// Chordal distance below which two Grassmann points are considered equal.
pub const SPAN_EQ_TOL: f64 = 1e-8;
/// Eigenvalue (or singular value) gaps at or below this are treated as ties.
pub const GAP_TOL: f64 = 1e-10;
/// Relative singular value threshold for numerical rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// An n×k real matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelBasis {
    data: Matrix,
}

impl StiefelBasis {
    /// Wraps `data` after checking `1 <= k <= n` and column orthonormality.
    pub fn new(data: Matrix) -> Result<Self> {
        let (n, k) = data.shape();
        if k == 0 || k > n {
            return Err(GravError::InvalidParameter(format!(
                "Stiefel matrix needs 1 <= k <= n, got {n}x{k}"
            )));
        }
        let err = orthonormality_error(&data);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(GravError::NotOrthonormal(err));
        }
        Ok(StiefelBasis { data })
    }

    /// Caller guarantees orthonormality (QR factors, eigenvectors, ...).
    pub(crate) fn from_orthonormal(data: Matrix) -> Self {
        debug_assert!(orthonormality_error(&data) <= ORTHONORMAL_TOL);
        StiefelBasis { data }
    }

    /// The first `k` columns of the n×n identity.
    pub fn identity(n: usize, k: usize) -> Result<Self> {
        Self::new(Matrix::identity(n, k))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    /// Another representative of the same subspace, `U·Q` for orthogonal `Q`.
    pub fn rotate(&self, q: &Matrix) -> Result<Self> {
        if q.shape() != (self.k(), self.k()) {
            return Err(GravError::DimensionMismatch {
                expected: (self.k(), self.k()),
                got: q.shape(),
            });
        }
        Self::new(&self.data * q)
    }
}

/// Max-abs entry of `AᵀA - I`.
pub fn orthonormality_error(a: &Matrix) -> f64 {
    let gram = a.tr_mul(a);
    let k = gram.nrows();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// A point of the Grassmannian, held through one Stiefel representative.
///
/// Equality is span equality: use [`GrassmannPoint::approx_eq`], which
/// compares chordal distance against [`SPAN_EQ_TOL`].
#[derive(Debug, Clone)]
pub struct GrassmannPoint {
    rep: StiefelBasis,
}

impl GrassmannPoint {
    pub fn new(rep: StiefelBasis) -> Self {
        GrassmannPoint { rep }
    }

    pub fn basis(&self) -> &StiefelBasis {
        &self.rep
    }

    pub fn into_basis(self) -> StiefelBasis {
        self.rep
    }

    pub fn n(&self) -> usize {
        self.rep.n()
    }

    pub fn k(&self) -> usize {
        self.rep.k()
    }

    pub fn distance(&self, other: &GrassmannPoint) -> Result<f64> {
        chordal_distance(self, other)
    }

    pub fn approx_eq(&self, other: &GrassmannPoint) -> bool {
        matches!(chordal_distance(self, other), Ok(d) if d <= SPAN_EQ_TOL)
    }
}

impl From<StiefelBasis> for GrassmannPoint {
    fn from(rep: StiefelBasis) -> Self {
        GrassmannPoint { rep }
    }
}

/// A tangent vector at `base`, horizontal in the sense `baseᵀ delta = 0`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: StiefelBasis,
    delta: Matrix,
}

impl TangentVector {
    pub fn new(base: StiefelBasis, delta: Matrix) -> Result<Self> {
        if delta.shape() != base.shape() {
            return Err(GravError::DimensionMismatch {
                expected: base.shape(),
                got: delta.shape(),
            });
        }
        let err = base.matrix().tr_mul(&delta).amax();
        if !(err <= HORIZONTAL_TOL) {
            return Err(GravError::NotHorizontal(err));
        }
        Ok(TangentVector { base, delta })
    }

    pub(crate) fn new_unchecked(base: StiefelBasis, delta: Matrix) -> Self {
        TangentVector { base, delta }
    }

    pub fn base(&self) -> &StiefelBasis {
        &self.base
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }
}

/// Eigen-decomposition of the averaged projector, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct ProjectorSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: Matrix,
}

impl ProjectorSpectrum {
    /// `λ_k - λ_{k+1}` (1-based), or `None` when `k == n`.
    pub fn gap(&self, k: usize) -> Option<f64> {
        if k == 0 || k >= self.eigenvalues.len() {
            None
        } else {
            Some(self.eigenvalues[k - 1] - self.eigenvalues[k])
        }
    }
}

/// QR factorization with a sign-normalized R.
///
/// Returns `(U, S)` with `U` the Q-factor whose R-factor has a positive
/// diagonal and `S = R⁻¹ D` upper triangular, so that `Z·S = U`. The result
/// does not depend on the sign convention of the underlying Householder QR.
pub fn stable_qr(z: &Matrix) -> Result<(StiefelBasis, Matrix)> {
    let (n, k) = z.shape();
    if k == 0 || k > n {
        return Err(GravError::InvalidParameter(format!(
            "stable_qr needs 1 <= k <= n, got {n}x{k}"
        )));
    }
    let qr = z.clone().qr();
    stable_qr_from_factors(qr.q(), qr.r())
}

/// Sign normalization applied to any thin QR pair `(Q, R)`.
pub(crate) fn stable_qr_from_factors(q: Matrix, r: Matrix) -> Result<(StiefelBasis, Matrix)> {
    let k = r.ncols();
    let sv = r.singular_values();
    let (smin, smax) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(smin > RANK_TOL * smax) {
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        return Err(GravError::RankDeficient { ratio });
    }

    let signs: Vec<f64> = (0..k)
        .map(|j| if r[(j, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();

    let mut u = q;
    for (j, &sign) in signs.iter().enumerate() {
        if sign < 0.0 {
            u.column_mut(j).neg_mut();
        }
    }

    // S = R⁻¹ D by back substitution, column by column.
    let mut s = Matrix::zeros(k, k);
    for j in 0..k {
        s[(j, j)] = signs[j] / r[(j, j)];
        for i in (0..j).rev() {
            let mut acc = 0.0;
            for l in (i + 1)..=j {
                acc += r[(i, l)] * s[(l, j)];
            }
            s[(i, j)] = -acc / r[(i, i)];
        }
    }
    Ok((StiefelBasis::from_orthonormal(u), s))
}

/// Chordal distance `2^{-1/2} ‖P_a - P_b‖_F` between two subspaces.
pub fn chordal_distance(a: &GrassmannPoint, b: &GrassmannPoint) -> Result<f64> {
    chordal_distance_sq(a, b).map(f64::sqrt)
}

/// Squared chordal distance.
///
/// On Stiefel inputs `d² = k - ‖U_aᵀU_b‖²_F = ‖U_b - U_a(U_aᵀU_b)‖²_F`; the
/// residual form avoids the cancellation of the first expression near zero.
/// Both orderings are averaged so the result is exactly symmetric.
pub fn chordal_distance_sq(a: &GrassmannPoint, b: &GrassmannPoint) -> Result<f64> {
    basis_distance_sq(a.basis(), b.basis())
}

pub(crate) fn basis_distance_sq(a: &StiefelBasis, b: &StiefelBasis) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(GravError::DimensionMismatch {
            expected: a.shape(),
            got: b.shape(),
        });
    }
    let r_ab = residual_sq(a.matrix(), b.matrix());
    let r_ba = residual_sq(b.matrix(), a.matrix());
    Ok(0.5 * (r_ab + r_ba))
}

/// `‖U_b - U_a(U_aᵀU_b)‖²_F` for equal-shape Stiefel bases, one ordering only.
pub(crate) fn residual_sq_one_sided(a: &StiefelBasis, b: &StiefelBasis) -> f64 {
    residual_sq(a.matrix(), b.matrix())
}

fn residual_sq(a: &Matrix, b: &Matrix) -> f64 {
    let coeffs = a.tr_mul(b);
    (b - a * coeffs).norm_squared()
}

/// `U (Uᵀ X)`: the projection of `X` onto `span(U)`, never forming `U Uᵀ`.
pub fn local_project(basis: &StiefelBasis, x: &Matrix) -> Result<Matrix> {
    if x.nrows() != basis.n() {
        return Err(GravError::DimensionMismatch {
            expected: (basis.n(), x.ncols()),
            got: x.shape(),
        });
    }
    let m = basis.matrix();
    Ok(m * m.tr_mul(x))
}

pub(crate) fn check_collection(collection: &[StiefelBasis]) -> Result<(usize, usize)> {
    let first = collection.first().ok_or(GravError::EmptyCollection)?;
    let shape = first.shape();
    for basis in collection {
        if basis.shape() != shape {
            return Err(GravError::DimensionMismatch {
                expected: shape,
                got: basis.shape(),
            });
        }
    }
    Ok(shape)
}

/// Reference IAM: leading `k` eigenvectors of the explicitly formed
/// `P = (1/M) Σ U_m U_mᵀ`, together with its full spectrum.
pub fn iam_ground_truth(collection: &[StiefelBasis]) -> Result<(GrassmannPoint, ProjectorSpectrum)> {
    let (n, k) = check_collection(collection)?;
    let mut proj = Matrix::zeros(n, n);
    for basis in collection {
        let m = basis.matrix();
        proj += m * m.transpose();
    }
    proj /= collection.len() as f64;

    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = Matrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    let spectrum = ProjectorSpectrum {
        eigenvalues,
        eigenvectors,
    };
    if let Some(gap) = spectrum.gap(k) {
        if !(gap > GAP_TOL) {
            return Err(GravError::DegenerateGap { gap });
        }
    }
    let top = spectrum.eigenvectors.columns(0, k).into_owned();
    Ok((GrassmannPoint::new(StiefelBasis::new(top)?), spectrum))
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
}

/// Haar-uniform point of Gr(n, k): Q-factor of an i.i.d. Gaussian n×k matrix.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<StiefelBasis> {
    if k == 0 || k > n {
        return Err(GravError::InvalidParameter(format!(
            "sample_uniform needs 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    loop {
        let g = gaussian_matrix(n, k, rng);
        match stable_qr(&g) {
            Ok((u, _)) => return Ok(u),
            Err(GravError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Grassmann exponential: with thin SVD `delta = W Σ Vᵀ`,
/// `exp(delta) = base V cos(Σ) Vᵀ + W sin(Σ) Vᵀ`.
pub fn exp_map(t: &TangentVector) -> StiefelBasis {
    let mut ops = OpCount::default();
    exp_map_counted(t, &mut ops)
}

pub(crate) fn exp_map_counted(t: &TangentVector, ops: &mut OpCount) -> StiefelBasis {
    if t.delta.iter().all(|&x| x == 0.0) {
        return t.base.clone();
    }
    let svd = t.delta.clone().svd(true, true);
    ops.svd += 1;
    let w = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut base_v = t.base.matrix() * v_t.transpose();
    let mut w_sin = w;
    for (j, &sigma) in svd.singular_values.iter().enumerate() {
        base_v.column_mut(j).scale_mut(sigma.cos());
        w_sin.column_mut(j).scale_mut(sigma.sin());
    }
    let out = (base_v + w_sin) * v_t;
    ops.matmuls += 2;
    polish(out, ops)
}

// Restores orthonormality lost to rounding without changing the span.
fn polish(m: Matrix, ops: &mut OpCount) -> StiefelBasis {
    if orthonormality_error(&m) <= 1e-13 {
        return StiefelBasis::from_orthonormal(m);
    }
    ops.qr += 1;
    match stable_qr(&m) {
        Ok((u, _)) => u,
        Err(_) => StiefelBasis::from_orthonormal(m),
    }
}

/// Grassmann logarithm at `base`: with thin SVD
/// `(I - base baseᵀ) point (baseᵀ point)⁻¹ = W Σ Vᵀ`, returns `W atan(Σ) Vᵀ`.
pub fn log_map(base: &StiefelBasis, point: &StiefelBasis) -> Result<TangentVector> {
    let mut ops = OpCount::default();
    log_map_counted(base, point, &mut ops)
}

pub(crate) fn log_map_counted(
    base: &StiefelBasis,
    point: &StiefelBasis,
    ops: &mut OpCount,
) -> Result<TangentVector> {
    if base.shape() != point.shape() {
        return Err(GravError::DimensionMismatch {
            expected: base.shape(),
            got: point.shape(),
        });
    }
    let cross = base.matrix().tr_mul(point.matrix());
    let cross_sv = cross.singular_values();
    ops.svd += 1;
    // Singular values of baseᵀ point are the cosines of the principal angles.
    if !(cross_sv.min() > RANK_TOL) {
        return Err(GravError::LogMapUndefined);
    }
    let inv = cross.clone().try_inverse().ok_or(GravError::LogMapUndefined)?;
    let horizontal = (point.matrix() - base.matrix() * &cross) * inv;
    let svd = horizontal.svd(true, true);
    let mut w = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    for (j, &sigma) in svd.singular_values.iter().enumerate() {
        w.column_mut(j).scale_mut(sigma.atan());
    }
    ops.matmuls += 4;
    ops.svd += 1;
    Ok(TangentVector::new_unchecked(base.clone(), w * v_t))
}

/// One draw of the clustered generator around `center`.
///
/// Draws (in this order) a Gaussian n×k matrix whose projection onto the
/// orthogonal complement of `center` gives `Ũ`, a Haar-uniform `Ṽ ∈ St(k,k)`,
/// and `z ~ N(0, I_k)`; then returns `exp_center(Ũ Diag(sigma z) Ṽᵀ)`.
pub fn sample_cluster<R: Rng + ?Sized>(
    center: &StiefelBasis,
    sigma: f64,
    rng: &mut R,
) -> Result<StiefelBasis> {
    let (n, k) = center.shape();
    if n < 2 * k {
        return Err(GravError::InvalidParameter(format!(
            "sample_cluster needs n >= 2k, got n={n}, k={k}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(GravError::InvalidParameter(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    let c = center.matrix();
    let u_perp = loop {
        let g = gaussian_matrix(n, k, rng);
        let g = &g - c * c.tr_mul(&g);
        match stable_qr(&g) {
            Ok((u, _)) => break u,
            Err(GravError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    };
    let v = sample_uniform(k, k, rng)?;
    let mut scaled = u_perp.into_matrix();
    for j in 0..k {
        let z: f64 = rng.sample(StandardNormal);
        scaled.column_mut(j).scale_mut(sigma * z);
    }
    let delta = scaled * v.matrix().transpose();
    let tangent = TangentVector::new(center.clone(), delta)?;
    Ok(exp_map(&tangent))
}

/// Flag mean: span of the top-`k` left singular vectors of `[U_1 | … | U_M]`.
pub fn flag_mean(collection: &[StiefelBasis]) -> Result<GrassmannPoint> {
    let mut ops = OpCount::default();
    flag_mean_counted(collection, &mut ops)
}

pub(crate) fn flag_mean_counted(
    collection: &[StiefelBasis],
    ops: &mut OpCount,
) -> Result<GrassmannPoint> {
    let (n, k) = check_collection(collection)?;
    let m = collection.len();
    let mut stacked = Matrix::zeros(n, m * k);
    for (i, basis) in collection.iter().enumerate() {
        stacked.columns_mut(i * k, k).copy_from(basis.matrix());
    }
    let svd = stacked.svd(true, false);
    ops.svd += 1;
    let u = svd.u.expect("left singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if order.len() > k {
        let gap = sv[order[k - 1]] - sv[order[k]];
        if !(gap > GAP_TOL) {
            return Err(GravError::DegenerateGap { gap });
        }
    }
    let top = Matrix::from_columns(&order[..k].iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    Ok(GrassmannPoint::new(StiefelBasis::new(top)?))
}

/// Karcher mean under the geodesic distance, by Riemannian gradient descent
/// from the first point: `Ū ← exp_Ū(step · (1/M) Σ log_Ū(U_m))` until the
/// update's norm drops below `tol`.
pub fn frechet_mean(
    collection: &[StiefelBasis],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Averaged> {
    check_collection(collection)?;
    frechet_mean_from(collection, &collection[0], step, tol, max_iter)
}

/// [`frechet_mean`] started from `init` instead of the first point.
pub fn frechet_mean_from(
    collection: &[StiefelBasis],
    init: &StiefelBasis,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Averaged> {
    let shape = check_collection(collection)?;
    if init.shape() != shape {
        return Err(GravError::DimensionMismatch {
            expected: shape,
            got: init.shape(),
        });
    }
    if !(step > 0.0) || !(tol > 0.0) {
        return Err(GravError::InvalidParameter(format!(
            "frechet_mean needs step > 0 and tol > 0, got step={step}, tol={tol}"
        )));
    }
    let mut ops = OpCount::default();
    let (n, k) = collection[0].shape();
    let scale = step / collection.len() as f64;
    let mut mean = init.clone();
    for iteration in 1..=max_iter {
        let mut grad = Matrix::zeros(n, k);
        for point in collection {
            grad += log_map_counted(&mean, point, &mut ops)?.delta;
        }
        grad *= scale;
        if grad.norm() < tol {
            return Ok(Averaged {
                point: GrassmannPoint::new(mean),
                iterations: iteration,
                ops,
            });
        }
        mean = exp_map_counted(&TangentVector::new_unchecked(mean, grad), &mut ops);
    }
    Err(GravError::NotConverged {
        iterations: max_iter,
        last: Box::new(GrassmannPoint::new(mean)),
    })
}
