//! Improved routing: RRU `l` compresses only the innovation of `S_l` with
//! respect to the descriptions already on the link, then routes everything to
//! the central processor.
//!
//! Two code paths are kept. The innovation form conditions the posterior of
//! the sources sequentially, one description at a time. The joint form stacks
//! the test channels `U_l = V_l^H S_l + Q_l` and conditions in one batch.
//! Both must give the same distortion.

use super::observation::{condition, target_trace, ObservationModel};
use super::{RateAllocation, SchemeContext, SchemeEvaluation, SchemeId};
use crate::error::Result;
use crate::gaussian::{eig_hermitian, select, CMat, EigenSystem, HermitianCov};
use crate::system::SystemInstance;
use crate::waterfill::{build_noise_cov, floor_eigenvalues, reverse_waterfill, Description, WaterfillSolution};

/// Innovation-form evaluation of the successive IR procedure.
pub fn eval_ir(inst: &SystemInstance, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.eval_ir(alloc)
}

/// Joint-form evaluation: same descriptions, built from batch conditioning.
pub fn eval_ir_joint(inst: &SystemInstance, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.eval_ir_joint(alloc)
}

/// Eigensystem of the innovation covariance `Σ_{s_l | u_{<l}}`.
pub(crate) fn innovation_eig(posterior: &CMat, block: &[usize]) -> Result<EigenSystem> {
    eig_hermitian(&HermitianCov::symmetrized(select(posterior, block, block)))
}

pub(crate) fn stage_from_eig(es: &EigenSystem, bits: f64) -> Result<(Description, WaterfillSolution)> {
    let wf = reverse_waterfill(&floor_eigenvalues(&es.eigenvalues), bits)?;
    let desc = build_noise_cov(&wf, es)?;
    Ok((desc, wf))
}

impl SchemeContext<'_> {
    pub fn eval_ir(&self, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
        self.check_len(&alloc.fronthaul)?;
        alloc.check_feasible()?;
        let mut posterior = self.inst.source_cov.matrix().clone();
        let mut eval = SchemeEvaluation::bare(SchemeId::ImprovedRouting, 0.0);
        for (l, &bits) in alloc.per_rru_bits.iter().enumerate() {
            let block = &self.blocks[l];
            let (desc, wf) = stage_from_eig(&innovation_eig(&posterior, block)?, bits)?;
            posterior = condition(&posterior, block, &desc)?;
            eval.descriptions.push(desc);
            eval.waterfills.push(wf);
        }
        eval.sum_distortion = target_trace(&self.inst.beamformer, &posterior);
        eval.allocation = Some(alloc.clone());
        Ok(eval)
    }

    pub fn eval_ir_joint(&self, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
        self.check_len(&alloc.fronthaul)?;
        alloc.check_feasible()?;
        let sigma_s = &self.inst.source_cov;
        let mut model = ObservationModel::new(self.inst.n_antennas());
        let mut eval = SchemeEvaluation::bare(SchemeId::ImprovedRouting, 0.0);
        for (l, &bits) in alloc.per_rru_bits.iter().enumerate() {
            let block = &self.blocks[l];
            let innovation = model.block_posterior(sigma_s, block)?;
            let (desc, wf) = stage_from_eig(&eig_hermitian(&innovation)?, bits)?;
            model.push(block, &desc);
            eval.descriptions.push(desc);
            eval.waterfills.push(wf);
        }
        eval.sum_distortion = model.target_distortion(self)?;
        eval.allocation = Some(alloc.clone());
        Ok(eval)
    }
}
