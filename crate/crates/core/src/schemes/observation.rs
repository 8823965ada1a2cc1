//! Linear-Gaussian bookkeeping for descriptions of the antenna signals.
//!
//! Two independent routes compute the same posteriors: a batch Schur
//! complement over the stacked descriptions (`ObservationModel`) and a
//! sequential rank-`m` update of `Σ_{s | descriptions so far}` (`condition`).

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::SchemeContext;
use crate::error::{Error, Result};
use crate::gaussian::{schur_complement, select, trace_congruence, CMat, HermitianCov};
use crate::waterfill::Description;

/// Stacked observation `U = G S + Q` with `Q ~ CN(0, diag(noise))`.
#[derive(Debug, Clone)]
pub(crate) struct ObservationModel {
    pub rows: CMat,
    pub noise: Vec<f64>,
}

impl ObservationModel {
    pub fn new(n_sources: usize) -> Self {
        Self {
            rows: CMat::zeros(0, n_sources),
            noise: Vec::new(),
        }
    }

    /// Appends `basis^H S_block + Q`.
    pub fn push(&mut self, block: &[usize], desc: &Description) {
        let m0 = self.rows.nrows();
        let m = desc.len();
        let n = self.rows.ncols();
        let mut rows = std::mem::replace(&mut self.rows, CMat::zeros(0, 0)).resize_vertically(m0 + m, Complex64::new(0.0, 0.0));
        for k in 0..m {
            for (i, &col) in block.iter().enumerate() {
                rows[(m0 + k, col)] = desc.basis[(i, k)].conj();
            }
        }
        debug_assert_eq!(rows.ncols(), n);
        self.rows = rows;
        self.noise.extend_from_slice(&desc.noise_var);
    }

    pub fn covariance(&self, sigma_s: &HermitianCov) -> Result<HermitianCov> {
        let mut c = sigma_s.congruence(&self.rows)?.into_matrix();
        for (i, &q) in self.noise.iter().enumerate() {
            c[(i, i)] += Complex64::new(q, 0.0);
        }
        Ok(HermitianCov::symmetrized(c))
    }

    /// `Σ_{s_block | U}`.
    pub fn block_posterior(&self, sigma_s: &HermitianCov, block: &[usize]) -> Result<HermitianCov> {
        let prior = sigma_s.block(block)?;
        if self.noise.is_empty() {
            return Ok(prior);
        }
        let all: Vec<usize> = (0..sigma_s.dim()).collect();
        let cross = select(sigma_s.matrix(), block, &all) * self.rows.adjoint();
        schur_complement(&prior, &cross, &self.covariance(sigma_s)?)
    }

    /// `Tr{Σ_z - Σ_{z,u} Σ_u^{-1} Σ_{z,u}^H}` with `Σ_{z,u} = W Σ_s G^H`.
    pub fn target_distortion(&self, ctx: &SchemeContext<'_>) -> Result<f64> {
        if self.noise.is_empty() {
            return Ok(ctx.zero_rate_distortion());
        }
        let cross = &ctx.inst.beamformer * ctx.inst.source_cov.matrix() * self.rows.adjoint();
        let post = schur_complement(&ctx.sigma_z, &cross, &self.covariance(&ctx.inst.source_cov)?)?;
        Ok(post.trace())
    }
}

/// Innovation gain of a description of `S_block` against the current
/// posterior `cov`: returns `C = cov[:, block] V` and `S^{-1}` where
/// `S = V^H cov[block, block] V + diag(noise)`.
fn gain(cov: &CMat, block: &[usize], desc: &Description) -> Result<(CMat, CMat)> {
    let n = cov.nrows();
    let m = desc.len();
    let cols = CMat::from_fn(n, block.len(), |i, j| cov[(i, block[j])]);
    let c = cols * &desc.basis;
    let c_block = CMat::from_fn(block.len(), m, |i, j| c[(block[i], j)]);
    let mut s = desc.basis.adjoint() * c_block;
    for (k, &q) in desc.noise_var.iter().enumerate() {
        s[(k, k)] += Complex64::new(q, 0.0);
    }
    let s = HermitianCov::symmetrized(s).into_matrix();
    let s_inv = Cholesky::new(s)
        .ok_or_else(|| Error::DimensionMismatch("description covariance is not positive definite".into()))?
        .inverse();
    Ok((c, s_inv))
}

/// Posterior of all sources after additionally observing `desc` of `S_block`.
pub(crate) fn condition(cov: &CMat, block: &[usize], desc: &Description) -> Result<CMat> {
    if desc.is_empty() {
        return Ok(cov.clone());
    }
    let (c, s_inv) = gain(cov, block, desc)?;
    let mut out = cov - &c * s_inv * c.adjoint();
    // keep exact Hermitian symmetry against drift across stages
    let n = out.nrows();
    for i in 0..n {
        out[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    Ok(out)
}

/// `Tr{W cov W^H}`.
pub(crate) fn target_trace(beamformer: &CMat, cov: &CMat) -> f64 {
    trace_congruence(beamformer, cov)
}
