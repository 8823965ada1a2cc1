//! Exhaustive search over a grid of per-RRU budgets for the routing schemes.
//!
//! Allocations are parameterized by the cumulative link loads
//! `c_l = B_1 + … + B_l`, nondecreasing and bounded by the rates downstream.
//! Link `l` is discretized to `j·R_l/G`, `j = 0..=G`. The last load is
//! pinned to its cap, since bits given to the last RRU never hurt. The search
//! walks the allocation tree depth first so every prefix is evaluated once,
//! carrying only the posterior of the RRUs that are still to be described.

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::ir::stage_from_eig;
use super::{check_rates, RateAllocation, SchemeContext, SchemeEvaluation};
use crate::error::{Error, Result};
use crate::gaussian::{eig_hermitian, trace_congruence, CMat, EigenSystem, HermitianCov};
use crate::system::SystemInstance;
use crate::waterfill::{floor_eigenvalues, reverse_waterfill, Description};

/// Candidate cumulative loads for each link.
pub fn allocation_grid(fronthaul: &[f64], grid_steps: usize) -> Result<Vec<Vec<f64>>> {
    check_rates(fronthaul)?;
    if grid_steps == 0 {
        return Err(Error::InvalidConfig("grid_steps must be at least 1".into()));
    }
    let n = fronthaul.len();
    // c_l <= c_{l+1} <= … <= c_L forces c_l <= min_{j >= l} R_j
    let mut caps = fronthaul.to_vec();
    for l in (0..n.saturating_sub(1)).rev() {
        caps[l] = caps[l].min(caps[l + 1]);
    }
    Ok((0..n)
        .map(|l| {
            if l + 1 == n {
                return vec![caps[l]];
            }
            let r = fronthaul[l];
            let mut levels: Vec<f64> = (0..=grid_steps)
                .map(|j| j as f64 * r / grid_steps as f64)
                .filter(|&c| c <= caps[l])
                .collect();
            if levels.last() != Some(&caps[l]) {
                levels.push(caps[l]);
            }
            levels.dedup();
            levels
        })
        .collect())
}

/// Posterior of the sources not yet described, in the coordinates of RRUs
/// `next..L`, together with what the target still needs from it.
#[derive(Debug, Clone)]
struct Tail {
    next: usize,
    /// `Σ_{s_{≥next} | u_{<next}}`.
    cov: CMat,
    /// `W Σ_{s, s_{≥next} | u_{<next}}`.
    cross: CMat,
    /// `Tr{Σ_{z | u_{<next}}}`.
    trace: f64,
}

impl Tail {
    fn new(ctx: &SchemeContext<'_>) -> Self {
        let sigma_s = ctx.inst.source_cov.matrix();
        Self {
            next: 0,
            cov: sigma_s.clone(),
            cross: &ctx.inst.beamformer * sigma_s,
            trace: ctx.zero_rate_distortion(),
        }
    }

    fn head(&self, width: usize) -> CMat {
        self.cov.view((0, 0), (width, width)).into_owned()
    }

    /// `C = Σ_{rest, s_next} V`, `C_z = Σ_{z, s_next} V` and `S^{-1}`.
    fn gain(&self, width: usize, desc: &Description) -> Result<(CMat, CMat, CMat)> {
        let c = self.cov.columns(0, width) * &desc.basis;
        let cz = self.cross.columns(0, width) * &desc.basis;
        let mut s = desc.basis.adjoint() * c.rows(0, width);
        for (k, &q) in desc.noise_var.iter().enumerate() {
            s[(k, k)] += Complex64::new(q, 0.0);
        }
        let s_inv = Cholesky::new(HermitianCov::symmetrized(s).into_matrix())
            .ok_or_else(|| Error::DimensionMismatch("description covariance is not positive definite".into()))?
            .inverse();
        Ok((c, cz, s_inv))
    }

    fn final_trace(&self, width: usize, desc: &Description) -> Result<f64> {
        if desc.is_empty() {
            return Ok(self.trace);
        }
        let (_, cz, s_inv) = self.gain(width, desc)?;
        Ok(self.trace - trace_congruence(&cz, &s_inv))
    }

    fn advance(&self, width: usize, desc: &Description) -> Result<Tail> {
        let rest = self.cov.nrows() - width;
        let mut cov = self.cov.view((width, width), (rest, rest)).into_owned();
        let mut cross = self.cross.columns(width, rest).into_owned();
        let mut trace = self.trace;
        if !desc.is_empty() {
            let (c, cz, s_inv) = self.gain(width, desc)?;
            let c_rest = c.rows(width, rest);
            let k = &s_inv * c_rest.adjoint();
            cov -= c_rest * &k;
            cross -= &cz * &k;
            trace -= trace_congruence(&cz, &s_inv);
        }
        Ok(Tail {
            next: self.next + 1,
            cov: HermitianCov::symmetrized(cov).into_matrix(),
            cross,
            trace,
        })
    }
}

trait Cascade {
    type Prep;
    fn prepare(&self, tail: &Tail) -> Result<Self::Prep>;
    /// Description of the next RRU at `bits` bits.
    fn describe(&self, tail: &Tail, prep: &Self::Prep, bits: f64) -> Result<Description>;

    /// Target distortion once the last RRU has sent `bits` bits.
    fn finish(&self, tail: &Tail, prep: &Self::Prep, width: usize, bits: f64) -> Result<f64> {
        tail.final_trace(width, &self.describe(tail, prep, bits)?)
    }
}

struct Innovation<'c, 'a>(&'c SchemeContext<'a>);
struct Standard<'c, 'a>(&'c SchemeContext<'a>);

/// Innovation eigensystem of the next RRU plus, per eigenvector `v_k`, the
/// target energy `‖Σ_{z, s_next} v_k‖²` it carries.
struct InnovationPrep {
    es: EigenSystem,
    floored: Vec<f64>,
    target_energy: Vec<f64>,
}

impl Cascade for Innovation<'_, '_> {
    type Prep = InnovationPrep;

    fn prepare(&self, tail: &Tail) -> Result<InnovationPrep> {
        let width = self.0.blocks[tail.next].len();
        let es = eig_hermitian(&HermitianCov::symmetrized(tail.head(width)))?;
        let proj = tail.cross.columns(0, width) * &es.eigenvectors;
        let target_energy = proj.column_iter().map(|c| c.norm_squared()).collect();
        Ok(InnovationPrep {
            floored: floor_eigenvalues(&es.eigenvalues),
            es,
            target_energy,
        })
    }

    fn describe(&self, _: &Tail, prep: &InnovationPrep, bits: f64) -> Result<Description> {
        Ok(stage_from_eig(&prep.es, bits)?.0)
    }

    /// In the innovation eigenbasis the description covariance is diagonal,
    /// `λ_k + q_k = λ_k² / (λ_k - d_k)`, so each active component removes
    /// `e_k (λ_k - d_k) / λ_k²` from the target trace.
    fn finish(&self, tail: &Tail, prep: &InnovationPrep, _: usize, bits: f64) -> Result<f64> {
        let wf = reverse_waterfill(&prep.floored, bits)?;
        let mut removed = 0.0;
        for k in 0..wf.active.len() {
            if wf.active[k] {
                let lam = prep.floored[k];
                removed += prep.target_energy[k] * (lam - wf.distortions[k]) / (lam * lam);
            }
        }
        Ok(tail.trace - removed)
    }
}

impl Cascade for Standard<'_, '_> {
    type Prep = ();

    fn prepare(&self, _: &Tail) -> Result<()> {
        Ok(())
    }

    fn describe(&self, tail: &Tail, _: &(), bits: f64) -> Result<Description> {
        Ok(self.0.sr_stage(tail.next, bits)?.0)
    }
}

struct Best {
    distortion: f64,
    bits: Vec<f64>,
}

/// Visits every allocation of the grid, calling `visit(bits, distortion)`.
fn walk<C: Cascade>(
    model: &C,
    grid: &[Vec<f64>],
    tail: &Tail,
    prev: f64,
    bits: &mut Vec<f64>,
    visit: &mut dyn FnMut(&[f64], f64),
) -> Result<()> {
    let l = tail.next;
    let width = tail.cov.nrows() / (grid.len() - l);
    let prep = model.prepare(tail)?;
    if l + 1 == grid.len() {
        let b = (grid[l][0] - prev).max(0.0);
        let d = model.finish(tail, &prep, width, b)?;
        bits.push(b);
        visit(bits, d);
        bits.pop();
        return Ok(());
    }
    for &c in grid[l].iter().filter(|&&c| c >= prev) {
        let b = c - prev;
        let child = tail.advance(width, &model.describe(tail, &prep, b)?)?;
        bits.push(b);
        walk(model, grid, &child, c, bits, visit)?;
        bits.pop();
    }
    Ok(())
}

fn grid_search<C: Cascade>(model: &C, ctx: &SchemeContext<'_>, fronthaul: &[f64], grid_steps: usize) -> Result<Vec<f64>> {
    ctx.check_len(fronthaul)?;
    let grid = allocation_grid(fronthaul, grid_steps)?;
    let mut best: Option<Best> = None;
    walk(model, &grid, &Tail::new(ctx), 0.0, &mut Vec::new(), &mut |bits, d| {
        if best.as_ref().is_none_or(|cur| d < cur.distortion) {
            best = Some(Best {
                distortion: d,
                bits: bits.to_vec(),
            });
        }
    })?;
    Ok(best.expect("grid always contains at least one allocation").bits)
}

/// Keeps the better of the grid optimum and the uniform split; ties go to the
/// grid optimum.
fn pick(
    fronthaul: &[f64],
    grid_bits: Vec<f64>,
    eval: impl Fn(&RateAllocation) -> Result<SchemeEvaluation>,
) -> Result<SchemeEvaluation> {
    let on_grid = eval(&RateAllocation::new(grid_bits, fronthaul.to_vec())?)?;
    let uniform = eval(&RateAllocation::uniform(fronthaul)?)?;
    Ok(if uniform.sum_distortion < on_grid.sum_distortion {
        uniform
    } else {
        on_grid
    })
}

impl SchemeContext<'_> {
    pub fn optimize_ir_allocation(&self, fronthaul: &[f64], grid_steps: usize) -> Result<SchemeEvaluation> {
        let bits = grid_search(&Innovation(self), self, fronthaul, grid_steps)?;
        pick(fronthaul, bits, |a| self.eval_ir(a))
    }

    pub fn optimize_sr_allocation(&self, fronthaul: &[f64], grid_steps: usize) -> Result<SchemeEvaluation> {
        let bits = grid_search(&Standard(self), self, fronthaul, grid_steps)?;
        pick(fronthaul, bits, |a| self.eval_sr(a))
    }
}

/// Best IR evaluation over the allocation grid.
pub fn optimize_ir_allocation(inst: &SystemInstance, fronthaul: &[f64], grid_steps: usize) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.optimize_ir_allocation(fronthaul, grid_steps)
}

/// Best SR evaluation over the same grid IR uses.
pub fn optimize_sr_allocation(inst: &SystemInstance, fronthaul: &[f64], grid_steps: usize) -> Result<SchemeEvaluation> {
    SchemeContext::new(inst)?.optimize_sr_allocation(fronthaul, grid_steps)
}
