//! Complex Hermitian linear algebra and Gaussian conditioning.
//!
//! Every covariance in the crate is a [`HermitianCov`]. Conditioning uses the
//! Schur complement with a Moore-Penrose pseudoinverse, so degenerate blocks
//! (for example descriptions that carry no bits) are handled without special
//! cases at the call sites.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

const HERMITIAN_RTOL: f64 = 1e-9;
const EIG_MAX_ITER: usize = 10_000;

/// A complex covariance matrix, stored exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianCov(CMat);

impl HermitianCov {
    /// Validates that `m` is square and Hermitian up to round-off, then stores
    /// its Hermitian part.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let mut asym = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if !asym.is_finite() || asym > HERMITIAN_RTOL * scale.max(1e-300) {
            return Err(Error::NonHermitianInput(asym));
        }
        Ok(Self::symmetrized(m))
    }

    /// Stores the Hermitian part of a matrix that is Hermitian by construction.
    pub(crate) fn symmetrized(mut m: CMat) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        for i in 0..n {
            m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    /// Builds a real symmetric covariance from row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("rows must form a square matrix".into()));
        }
        Self::new(CMat::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMat::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Round-off tolerance for negative eigenvalues: `1e-10 * trace / dim`.
    pub fn psd_tolerance(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        1e-10 * self.trace().abs() / self.dim() as f64
    }

    /// The principal sub-block on `idx`.
    pub fn block(&self, idx: &[usize]) -> Result<Self> {
        check_indices(idx, self.dim())?;
        Ok(Self(select(&self.0, idx, idx)))
    }

    /// The (generally non-square) cross block `rows x cols`.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<CMat> {
        check_indices(rows, self.dim())?;
        check_indices(cols, self.dim())?;
        Ok(select(&self.0, rows, cols))
    }

    /// `a * self * a^H`.
    pub fn congruence(&self, a: &CMat) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot form A Σ A^H with A {}x{} and Σ {}x{}",
                a.nrows(),
                a.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(Self::symmetrized(a * &self.0 * a.adjoint()))
    }
}

/// Eigenvalues sorted descending with the matching unitary eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V Λ V^H`.
    pub fn reconstruct(&self) -> CMat {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

fn check_indices(idx: &[usize], dim: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= dim) {
        Some(&index) => Err(Error::IndexOutOfRange { index, dim }),
        None => Ok(()),
    }
}

pub(crate) fn select(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Eigendecomposition of a PSD covariance. Eigenvalues in `[-tol, 0)` are
/// clamped to zero; anything below `-tol` is rejected.
pub fn eig_hermitian(m: &HermitianCov) -> Result<EigenSystem> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigenSystem {
            eigenvalues: Vec::new(),
            eigenvectors: CMat::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let largest = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    // the eigen solver itself is only accurate to a few ulps of the norm
    let tol = m.psd_tolerance().max(64.0 * f64::EPSILON * largest);

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lam = eig.eigenvalues[src];
        if !lam.is_finite() {
            return Err(Error::ConvergenceFailure);
        }
        if lam < 0.0 {
            if lam < -tol {
                return Err(Error::NotPositiveSemidefinite { value: lam, tol });
            }
            lam = 0.0;
        }
        eigenvalues.push(lam);
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Moore-Penrose pseudoinverse of a PSD covariance; eigenvalues below
/// `PINV_RCOND * largest` are treated as zero.
pub fn pinv_hermitian(m: &HermitianCov) -> Result<CMat> {
    let es = eig_hermitian(m)?;
    let n = es.dim();
    let largest = es.eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = PINV_RCOND * largest;
    let mut scaled = es.eigenvectors.clone();
    for j in 0..n {
        let lam = es.eigenvalues[j];
        let inv = if lam > cutoff && lam > 0.0 { 1.0 / lam } else { 0.0 };
        scaled.column_mut(j).scale_mut(inv);
    }
    Ok(scaled * es.eigenvectors.adjoint())
}

/// Linear MMSE filter `T = cross * cov_obs^+`.
pub fn mmse_filter(cross: &CMat, cov_obs: &HermitianCov) -> Result<CMat> {
    if cross.ncols() != cov_obs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cross-covariance has {} columns but observation dimension is {}",
            cross.ncols(),
            cov_obs.dim()
        )));
    }
    if cov_obs.dim() == 0 {
        return Ok(CMat::zeros(cross.nrows(), 0));
    }
    Ok(cross * pinv_hermitian(cov_obs)?)
}

/// Posterior covariance `Σ_x - Σ_xy Σ_y^+ Σ_yx` from a given residual
/// decomposition.
pub fn schur_complement(sigma_x: &HermitianCov, cross: &CMat, sigma_y: &HermitianCov) -> Result<HermitianCov> {
    if cross.nrows() != sigma_x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cross-covariance has {} rows but target dimension is {}",
            cross.nrows(),
            sigma_x.dim()
        )));
    }
    if sigma_y.dim() == 0 {
        return Ok(sigma_x.clone());
    }
    let t = mmse_filter(cross, sigma_y)?;
    Ok(HermitianCov::symmetrized(sigma_x.matrix() - t * cross.adjoint()))
}

/// Conditional covariance of the `target_idx` components given the
/// `given_idx` components of a jointly Gaussian vector.
pub fn conditional_cov(joint: &HermitianCov, target_idx: &[usize], given_idx: &[usize]) -> Result<HermitianCov> {
    check_indices(target_idx, joint.dim())?;
    check_indices(given_idx, joint.dim())?;
    if let Some(&i) = target_idx.iter().find(|i| given_idx.contains(i)) {
        return Err(Error::OverlappingIndices(i));
    }
    let sigma_x = joint.block(target_idx)?;
    if given_idx.is_empty() {
        return Ok(sigma_x);
    }
    let sigma_y = joint.block(given_idx)?;
    let cross = joint.cross(target_idx, given_idx)?;
    schur_complement(&sigma_x, &cross, &sigma_y)
}

/// `Re Tr{a Σ a^H}` without forming the full product.
pub(crate) fn trace_congruence(a: &CMat, sigma: &CMat) -> f64 {
    let prod = a * sigma;
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (prod[(i, k)] * a[(i, k)].conj()).re;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> HermitianCov {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMat::from_fn(n, rank, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c(re, im)
        });
        HermitianCov::symmetrized(&g * g.adjoint())
    }

    #[test]
    fn conditional_of_independent_components() {
        let out = conditional_cov(&HermitianCov::identity(2), &[0], &[1]).unwrap();
        assert_eq!(out.dim(), 1);
        assert!((out.matrix()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conditional_hand_schur_complement() {
        let joint = HermitianCov::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let out = conditional_cov(&joint, &[0], &[1]).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn conditional_with_empty_given_is_identity_op() {
        let joint = random_psd(4, 4, 3);
        let out = conditional_cov(&joint, &[2, 0], &[]).unwrap();
        assert_eq!(out, joint.block(&[2, 0]).unwrap());
    }

    #[test]
    fn conditional_rejects_bad_indices() {
        let joint = HermitianCov::identity(3);
        assert!(matches!(
            conditional_cov(&joint, &[0], &[3]),
            Err(Error::IndexOutOfRange { index: 3, dim: 3 })
        ));
        assert!(matches!(
            conditional_cov(&joint, &[0, 1], &[1]),
            Err(Error::OverlappingIndices(1))
        ));
    }

    #[test]
    fn conditional_singular_given_block_uses_pinv() {
        // y = (x, x) duplicated: conditioning on a rank-1 block
        let joint = HermitianCov::from_real_rows(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]).unwrap();
        let out = conditional_cov(&joint, &[0], &[1, 2]).unwrap();
        assert!(out.matrix()[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianCov::new(m), Err(Error::NonHermitianInput(_))));
    }

    #[test]
    fn mmse_scalar_and_zero() {
        let t = mmse_filter(&CMat::from_element(1, 1, c(1.0, 0.0)), &HermitianCov::from_diagonal(&[2.0])).unwrap();
        assert!((t[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        let t = mmse_filter(&CMat::zeros(2, 3), &random_psd(3, 3, 1)).unwrap();
        assert!(t.iter().all(|z| z.norm() == 0.0));
        assert!(matches!(
            mmse_filter(&CMat::zeros(2, 2), &HermitianCov::identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mmse_filter_is_locally_optimal() {
        // joint (x, y) with x, y in C^3
        let joint = random_psd(6, 6, 11);
        let x: Vec<usize> = (0..3).collect();
        let y: Vec<usize> = (3..6).collect();
        let sx = joint.block(&x).unwrap();
        let sy = joint.block(&y).unwrap();
        let sxy = joint.cross(&x, &y).unwrap();
        let t = mmse_filter(&sxy, &sy).unwrap();
        let mse = |t: &CMat| -> f64 {
            // Tr{Σx - T Σyx - Σxy T^H + T Σy T^H}
            let m = sx.matrix() - t * sxy.adjoint() - &sxy * t.adjoint() + t * sy.matrix() * t.adjoint();
            (0..3).map(|i| m[(i, i)].re).sum()
        };
        let residual = sx.trace() - (0..3).map(|i| (&t * sxy.adjoint())[(i, i)].re).sum::<f64>();
        assert!((mse(&t) - residual).abs() < 1e-9 * residual.abs().max(1.0));
        for i in 0..3 {
            for j in 0..3 {
                for dir in [c(1e-3, 0.0), c(-1e-3, 0.0), c(0.0, 1e-3), c(0.0, -1e-3)] {
                    let mut p = t.clone();
                    p[(i, j)] += dir;
                    assert!(mse(&p) >= mse(&t) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn eig_identity_and_diag() {
        let es = eig_hermitian(&HermitianCov::identity(3)).unwrap();
        assert_eq!(es.eigenvalues.len(), 3);
        assert!(es.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));

        let es = eig_hermitian(&HermitianCov::from_diagonal(&[1.0, 3.0])).unwrap();
        assert!((es.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((es.eigenvalues[1] - 1.0).abs() < 1e-14);
        // leading eigenvector is e_1 up to phase
        assert!((es.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(es.eigenvectors[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn eig_complex_two_by_two() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let es = eig_hermitian(&HermitianCov::new(m).unwrap()).unwrap();
        assert!((es.eigenvalues[0] - 3.0).abs() < 1e-13);
        assert!((es.eigenvalues[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn eig_rejects_indefinite() {
        let m = HermitianCov::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(eig_hermitian(&m), Err(Error::NotPositiveSemidefinite { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eig_reconstruction_and_unitarity(n in 1usize..8, rank in 1usize..8, seed in any::<u64>()) {
            let m = random_psd(n, rank.min(n), seed);
            let es = eig_hermitian(&m).unwrap();
            let largest = es.eigenvalues[0];
            prop_assert!(es.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(es.eigenvalues.iter().all(|&l| l >= 0.0));
            let rec = es.reconstruct();
            for (a, b) in rec.iter().zip(m.matrix().iter()) {
                prop_assert!((a - b).norm() <= 1e-9 * largest);
            }
            let vhv = es.eigenvectors.adjoint() * &es.eigenvectors;
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((vhv[(i, j)] - c(expect, 0.0)).norm() <= 1e-10);
                }
            }
        }

        #[test]
        fn conditioning_never_increases_trace(n in 2usize..8, split in 1usize..7, seed in any::<u64>()) {
            let split = split.min(n - 1);
            let joint = random_psd(n, n, seed);
            let target: Vec<usize> = (0..split).collect();
            let given: Vec<usize> = (split..n).collect();
            let post = conditional_cov(&joint, &target, &given).unwrap();
            let prior = joint.block(&target).unwrap();
            prop_assert!(post.trace() <= prior.trace() + 1e-9 * prior.trace());
            // posterior is PSD
            prop_assert!(eig_hermitian(&post).is_ok());
        }
    }
}
