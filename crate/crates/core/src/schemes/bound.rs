//! Cut-set lower bound: for cut `l` the decoder is handed the observations of
//! RRUs `l+1..L` for free, and link `l` must carry a Wyner-Ziv description of
//! `Z` at `R_l` bits. No scheme can beat the worst cut.

use super::{check_rates, SchemeContext, SchemeEvaluation, SchemeId};
use crate::error::Result;
use crate::system::SystemInstance;
use crate::waterfill::reverse_waterfill;

pub fn eval_lower_bound(inst: &SystemInstance, fronthaul: &[f64]) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.eval_lower_bound(fronthaul)
}

impl SchemeContext<'_> {
    pub fn eval_lower_bound(&self, fronthaul: &[f64]) -> Result<SchemeEvaluation> {
        self.check_len(fronthaul)?;
        check_rates(fronthaul)?;
        let waterfills = self
            .cut_eigs
            .iter()
            .zip(fronthaul)
            .map(|(eigs, &r)| reverse_waterfill(eigs, r))
            .collect::<Result<Vec<_>>>()?;
        let cuts: Vec<f64> = waterfills.iter().map(|wf| wf.total_distortion()).collect();
        let worst = cuts.iter().copied().fold(0.0f64, f64::max);
        let mut eval = SchemeEvaluation::bare(SchemeId::LowerBound, worst);
        eval.waterfills = waterfills;
        eval.cut_distortions = Some(cuts);
        Ok(eval)
    }
}
