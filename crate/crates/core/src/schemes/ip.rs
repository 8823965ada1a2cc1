//! In-network processing: RRU `l` decompresses the upstream description,
//! combines it with its locally beamformed signal `W_l S_l` into an estimate
//! of the partial target `Z_l = W_1 S_1 + … + W_l S_l`, and re-compresses that
//! estimate Wyner-Ziv style against the next RRU's observation.
//!
//! Everything is tracked in the stacked-source form
//! `U_l = P̄ˢ_l S + P̄^Q_l Q̄` so covariances follow from `Σ_s` and the
//! (diagonal) quantization-noise variances alone.

use super::{check_rates, SchemeContext, SchemeEvaluation, SchemeId};
use crate::error::Result;
use crate::gaussian::{eig_hermitian, mmse_filter, schur_complement, select, CMat, HermitianCov};
use crate::system::SystemInstance;
use crate::waterfill::{build_noise_cov, floor_eigenvalues, reverse_waterfill, Description, WaterfillSolution};

#[derive(Debug, Clone)]
pub struct IpStage {
    /// `P_l = [P_l^U, P_l^S]`, the MMSE filter of `Z_l` from
    /// `F_l = [U_{l-1}; W_l S_l]`.
    pub combiner: CMat,
    /// Number of leading columns of `combiner` acting on `U_{l-1}`.
    pub upstream_dim: usize,
    /// Reduced test channel on the combined signal `R_l = P_l F_l`.
    pub description: Description,
    pub waterfill: WaterfillSolution,
    /// `Tr{Σ_{z_l | f_l, s_{l+1}}}`: the part no rate can remove.
    pub residual: f64,
    /// Water-filled distortion plus `residual`.
    pub stage_distortion: f64,
}

impl IpStage {
    /// Effective map from `F_l` to the described coordinates:
    /// `U_l = (V_act^H P_l) F_l + Q_l`.
    pub fn description_map(&self) -> CMat {
        self.description.basis.adjoint() * &self.combiner
    }
}

/// Stacked representation of the last description in the chain.
#[derive(Debug, Clone)]
pub struct IpChainState {
    /// `P̄ˢ`: maps the stacked sources `S` into `U_l`.
    pub source_map: CMat,
    /// `P̄^Q`: maps the stacked quantization noises `Q̄` into `U_l`.
    pub noise_map: CMat,
    /// Variances of the (independent) entries of `Q̄`.
    pub noise_var: Vec<f64>,
    pub stages: Vec<IpStage>,
}

impl IpChainState {
    fn new(n_sources: usize) -> Self {
        Self {
            source_map: CMat::zeros(0, n_sources),
            noise_map: CMat::zeros(0, 0),
            noise_var: Vec::new(),
            stages: Vec::new(),
        }
    }

    /// Covariance of the current description.
    pub fn description_cov(&self, sigma_s: &HermitianCov) -> Result<HermitianCov> {
        let mut c = sigma_s.congruence(&self.source_map)?.into_matrix();
        c += noise_congruence(&self.noise_map, &self.noise_var);
        Ok(HermitianCov::symmetrized(c))
    }
}

/// `A diag(v) A^H`.
fn noise_congruence(a: &CMat, var: &[f64]) -> CMat {
    let mut scaled = a.clone();
    for (j, &v) in var.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * a.adjoint()
}

fn vstack(top: &CMat, bottom: &CMat) -> CMat {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let mut out = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn hstack(left: &CMat, right: &CMat) -> CMat {
    debug_assert_eq!(left.nrows(), right.nrows());
    let mut out = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

pub fn eval_ip(inst: &SystemInstance, fronthaul: &[f64]) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.eval_ip(fronthaul)
}

impl SchemeContext<'_> {
    pub fn eval_ip(&self, fronthaul: &[f64]) -> Result<SchemeEvaluation> {
        self.check_len(fronthaul)?;
        check_rates(fronthaul)?;
        let inst = self.inst;
        let sigma_s = &inst.source_cov;
        let n = inst.n_antennas();
        let l_total = self.n_rrus();
        let mut chain = IpChainState::new(n);
        let mut eval = SchemeEvaluation::bare(SchemeId::InNetworkProcessing, 0.0);

        for (l, &rate) in fronthaul.iter().enumerate() {
            let upstream_dim = chain.source_map.nrows();
            let nq = chain.noise_var.len();

            // F_l = [U_{l-1}; W_l S_l] = Fs S + Fq Q̄
            let fs = vstack(&chain.source_map, &inst.masked_beamformer(l..l + 1));
            let fq = vstack(&chain.noise_map, &CMat::zeros(inst.n_users(), nq));
            let mut sigma_f = sigma_s.congruence(&fs)?.into_matrix();
            sigma_f += noise_congruence(&fq, &chain.noise_var);
            let sigma_f = HermitianCov::symmetrized(sigma_f);

            // Z_l = W̄_l S
            let wbar = inst.masked_beamformer(0..l + 1);
            let sigma_zbar = sigma_s.congruence(&wbar)?;
            let ws = &wbar * sigma_s.matrix();
            let cross_zf = &ws * fs.adjoint();
            let combiner = mmse_filter(&cross_zf, &sigma_f)?;

            // side information S_{l+1}; empty at the last RRU
            let (sigma_f_given_y, residual) = if l + 1 < l_total {
                let y = &self.blocks[l + 1];
                let all: Vec<usize> = (0..n).collect();
                let s_y = select(sigma_s.matrix(), &all, y);
                let cross_fy = &fs * &s_y;
                let sigma_y = sigma_s.block(y)?;
                let given_y = schur_complement(&sigma_f, &cross_fy, &sigma_y)?;

                let obs = HermitianCov::symmetrized(vstack(
                    &hstack(sigma_f.matrix(), &cross_fy),
                    &hstack(&cross_fy.adjoint(), sigma_y.matrix()),
                ));
                let cross_z_obs = hstack(&cross_zf, &(&wbar * &s_y));
                let residual = schur_complement(&sigma_zbar, &cross_z_obs, &obs)?.trace();
                (given_y, residual)
            } else {
                let residual = schur_complement(&sigma_zbar, &cross_zf, &sigma_f)?.trace();
                (sigma_f.clone(), residual)
            };

            let innovation = sigma_f_given_y.congruence(&combiner)?;
            let es = eig_hermitian(&innovation)?;
            let wf = reverse_waterfill(&floor_eigenvalues(&es.eigenvalues), rate)?;
            let description = build_noise_cov(&wf, &es)?;
            let stage_distortion = wf.total_distortion() + residual;

            let g = description.basis.adjoint() * &combiner;
            let k = description.len();
            chain.source_map = &g * &fs;
            chain.noise_map = hstack(&(&g * &fq), &CMat::identity(k, k));
            chain.noise_var.extend_from_slice(&description.noise_var);

            eval.descriptions.push(description.clone());
            eval.waterfills.push(wf.clone());
            chain.stages.push(IpStage {
                combiner,
                upstream_dim,
                description,
                waterfill: wf,
                residual,
                stage_distortion,
            });
        }

        eval.sum_distortion = if chain.source_map.nrows() == 0 {
            self.zero_rate_distortion()
        } else {
            let cross = &inst.beamformer * sigma_s.matrix() * chain.source_map.adjoint();
            schur_complement(&self.sigma_z, &cross, &chain.description_cov(sigma_s)?)?.trace()
        };
        eval.ip_chain = Some(chain);
        Ok(eval)
    }
}
