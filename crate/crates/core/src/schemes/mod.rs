//! Achievable sum-distortion of the compress-and-forward strategies and the
//! cut-set lower bound, for one instance and one fronthaul tuple.
//!
//! Rates are in bits per sample; distortions are traces of error covariances
//! in units of the receiver noise power.

mod bound;
mod ip;
mod ir;
mod observation;
mod search;
mod sr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{eig_hermitian, EigenSystem, HermitianCov};
use crate::system::{cut_conditional_target_cov, target_cov, SystemInstance};
use crate::waterfill::{floor_eigenvalues, Description, WaterfillSolution};

pub use bound::eval_lower_bound;
pub use ip::{eval_ip, IpChainState, IpStage};
pub use ir::{eval_ir, eval_ir_joint};
pub use search::{allocation_grid, optimize_ir_allocation, optimize_sr_allocation};
pub use sr::eval_sr;

/// Feasibility slack on cumulative link loads, relative to `max(1, R_l)`.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "SR")]
    StandardRouting,
    #[serde(rename = "IR")]
    ImprovedRouting,
    #[serde(rename = "IP")]
    InNetworkProcessing,
    #[serde(rename = "LOWER_BOUND")]
    LowerBound,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::StandardRouting,
        SchemeId::ImprovedRouting,
        SchemeId::InNetworkProcessing,
        SchemeId::LowerBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::StandardRouting => "SR",
            SchemeId::ImprovedRouting => "IR",
            SchemeId::InNetworkProcessing => "IP",
            SchemeId::LowerBound => "LOWER_BOUND",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    /// Accepts the canonical ids plus `WZR` (same distortion-rate function as
    /// IR) and a few case-insensitive aliases.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SR" => Ok(SchemeId::StandardRouting),
            "IR" | "WZR" => Ok(SchemeId::ImprovedRouting),
            "IP" => Ok(SchemeId::InNetworkProcessing),
            "LOWER_BOUND" | "LB" | "LOWER-BOUND" => Ok(SchemeId::LowerBound),
            other => Err(Error::Parse(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Per-RRU compression budgets `B_l` together with the link rates `R_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub per_rru_bits: Vec<f64>,
    pub fronthaul: Vec<f64>,
}

impl RateAllocation {
    pub fn new(per_rru_bits: Vec<f64>, fronthaul: Vec<f64>) -> Result<Self> {
        let alloc = Self {
            per_rru_bits,
            fronthaul,
        };
        alloc.check_feasible()?;
        Ok(alloc)
    }

    /// Equal per-RRU budgets `b = min_l R_l / l`, feasible for any tuple.
    pub fn uniform(fronthaul: &[f64]) -> Result<Self> {
        check_rates(fronthaul)?;
        let b = fronthaul
            .iter()
            .enumerate()
            .map(|(l, &r)| r / (l + 1) as f64)
            .fold(f64::INFINITY, f64::min);
        Self::new(vec![b; fronthaul.len()], fronthaul.to_vec())
    }

    /// Link `l` carries `B_1 + … + B_l` bits, which must not exceed `R_l`.
    pub fn check_feasible(&self) -> Result<()> {
        if self.per_rru_bits.len() != self.fronthaul.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} per-RRU budgets for {} links",
                self.per_rru_bits.len(),
                self.fronthaul.len()
            )));
        }
        check_rates(&self.fronthaul)?;
        if let Some(b) = self.per_rru_bits.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidConfig(format!("per-RRU budget {b} must be finite and nonnegative")));
        }
        let mut cumulative = 0.0;
        for (l, (&b, &r)) in self.per_rru_bits.iter().zip(&self.fronthaul).enumerate() {
            cumulative += b;
            if cumulative > r + FEASIBILITY_SLACK * r.max(1.0) {
                return Err(Error::InfeasibleAllocation {
                    link: l + 1,
                    cumulative,
                    fronthaul: r,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_rates(fronthaul: &[f64]) -> Result<()> {
    match fronthaul.iter().find(|r| !r.is_finite() || **r < 0.0) {
        Some(r) => Err(Error::InvalidConfig(format!("fronthaul rate {r} must be finite and nonnegative"))),
        None => Ok(()),
    }
}

/// Outcome of one scheme on one instance and rate tuple.
#[derive(Debug, Clone)]
pub struct SchemeEvaluation {
    pub scheme: SchemeId,
    pub sum_distortion: f64,
    /// Present for SR and IR.
    pub allocation: Option<RateAllocation>,
    /// Per-RRU reduced test channels (SR, IR, IP).
    pub descriptions: Vec<Description>,
    /// Water-filling outcome per RRU stage (SR, IR, IP) or per cut (bound).
    pub waterfills: Vec<WaterfillSolution>,
    /// Present for IP.
    pub ip_chain: Option<IpChainState>,
    /// Per-cut distortions `D_l`, present for the lower bound.
    pub cut_distortions: Option<Vec<f64>>,
}

impl SchemeEvaluation {
    pub(crate) fn bare(scheme: SchemeId, sum_distortion: f64) -> Self {
        Self {
            scheme,
            sum_distortion,
            allocation: None,
            descriptions: Vec::new(),
            waterfills: Vec::new(),
            ip_chain: None,
            cut_distortions: None,
        }
    }

    /// Serializable digest of the evaluation with a stable field order.
    pub fn summary(&self) -> EvaluationSummary {
        let stages = self
            .waterfills
            .iter()
            .enumerate()
            .map(|(i, wf)| StageSummary {
                index: i + 1,
                bits: wf.total_bits(),
                water_level: wf.water_level,
                distortion: wf.total_distortion(),
                active_components: wf.active_count(),
                component_bits: wf.bit_loads.clone(),
                noise_var: self.descriptions.get(i).map(|d| d.noise_var.clone()),
            })
            .collect();
        EvaluationSummary {
            scheme: self.scheme,
            sum_distortion: self.sum_distortion,
            allocation: self.allocation.clone(),
            stages,
            cut_distortions: self.cut_distortions.clone(),
            ip_stage_distortions: self
                .ip_chain
                .as_ref()
                .map(|c| c.stages.iter().map(|s| s.stage_distortion).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationSummary {
    pub scheme: SchemeId,
    pub sum_distortion: f64,
    pub allocation: Option<RateAllocation>,
    pub stages: Vec<StageSummary>,
    pub cut_distortions: Option<Vec<f64>>,
    pub ip_stage_distortions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    /// RRU index for SR/IR/IP, cut index for the bound (one-based).
    pub index: usize,
    pub bits: f64,
    pub water_level: f64,
    pub distortion: f64,
    pub active_components: usize,
    pub component_bits: Vec<f64>,
    pub noise_var: Option<Vec<f64>>,
}

/// Rate-independent quantities of an instance, shared by every scheme and
/// rate point evaluated on it.
#[derive(Debug, Clone)]
pub struct SchemeContext<'a> {
    pub(crate) inst: &'a SystemInstance,
    pub(crate) sigma_z: HermitianCov,
    pub(crate) blocks: Vec<Vec<usize>>,
    /// Eigensystems of the unconditional per-RRU blocks `Σ_{s_l}`.
    pub(crate) block_eigs: Vec<EigenSystem>,
    /// Eigenvalues of `Σ_{z | s_{l+1..L}}` per cut.
    pub(crate) cut_eigs: Vec<Vec<f64>>,
}

impl<'a> SchemeContext<'a> {
    pub fn new(inst: &'a SystemInstance) -> Result<Self> {
        let l_total = inst.n_rrus();
        let blocks: Vec<Vec<usize>> = (0..l_total).map(|l| inst.topology.rru_indices(l)).collect();
        let block_eigs = blocks
            .iter()
            .map(|b| eig_hermitian(&inst.source_cov.block(b)?))
            .collect::<Result<Vec<_>>>()?;
        let cut_eigs = (1..=l_total)
            .map(|l| Ok(floor_eigenvalues(&eig_hermitian(&cut_conditional_target_cov(inst, l)?)?.eigenvalues)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inst,
            sigma_z: target_cov(inst),
            blocks,
            block_eigs,
            cut_eigs,
        })
    }

    pub fn instance(&self) -> &SystemInstance {
        self.inst
    }

    pub fn n_rrus(&self) -> usize {
        self.blocks.len()
    }

    /// `Tr{Σ_z}`: the distortion of sending nothing.
    pub fn zero_rate_distortion(&self) -> f64 {
        self.sigma_z.trace()
    }

    pub(crate) fn check_len(&self, rates: &[f64]) -> Result<()> {
        if rates.len() != self.n_rrus() {
            return Err(Error::DimensionMismatch(format!(
                "{} rates for {} RRUs",
                rates.len(),
                self.n_rrus()
            )));
        }
        Ok(())
    }
}
