//! Standard routing: every RRU compresses its own observation, ignoring what
//! was sent upstream; the central processor estimates `Z` from all of them.

use super::observation::ObservationModel;
use super::{RateAllocation, SchemeContext, SchemeEvaluation, SchemeId};
use crate::error::Result;
use crate::system::SystemInstance;
use crate::waterfill::{build_noise_cov, floor_eigenvalues, reverse_waterfill, Description, WaterfillSolution};

pub fn eval_sr(inst: &SystemInstance, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.eval_sr(alloc)
}

impl SchemeContext<'_> {
    /// Description of `S_l` alone at `bits` bits.
    pub(crate) fn sr_stage(&self, l: usize, bits: f64) -> Result<(Description, WaterfillSolution)> {
        let es = &self.block_eigs[l];
        let wf = reverse_waterfill(&floor_eigenvalues(&es.eigenvalues), bits)?;
        let desc = build_noise_cov(&wf, es)?;
        Ok((desc, wf))
    }

    pub fn eval_sr(&self, alloc: &RateAllocation) -> Result<SchemeEvaluation> {
        self.check_len(&alloc.fronthaul)?;
        alloc.check_feasible()?;
        let mut model = ObservationModel::new(self.inst.n_antennas());
        let mut eval = SchemeEvaluation::bare(SchemeId::StandardRouting, 0.0);
        for (l, &bits) in alloc.per_rru_bits.iter().enumerate() {
            let (desc, wf) = self.sr_stage(l, bits)?;
            model.push(&self.blocks[l], &desc);
            eval.descriptions.push(desc);
            eval.waterfills.push(wf);
        }
        eval.sum_distortion = model.target_distortion(self)?;
        eval.allocation = Some(alloc.clone());
        Ok(eval)
    }
}
