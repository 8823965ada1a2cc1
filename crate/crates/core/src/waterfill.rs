//! Reverse water-filling over independent Gaussian components.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{CMat, EigenSystem};

/// Optimal distortion split of a bit budget across parallel Gaussian
/// components. Vectors are in the order of the input eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterfillSolution {
    pub water_level: f64,
    pub distortions: Vec<f64>,
    pub bit_loads: Vec<f64>,
    /// Quantization-noise to signal ratio `d_k / (λ_k - d_k)` per active
    /// component; `f64::INFINITY` for components that get no bits.
    #[serde(serialize_with = "serialize_noise_eigs")]
    pub noise_eigs: Vec<f64>,
    pub active: Vec<bool>,
}

fn serialize_noise_eigs<S: serde::Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        if x.is_finite() {
            seq.serialize_element(&Some(x))?;
        } else {
            seq.serialize_element(&None::<f64>)?;
        }
    }
    seq.end()
}

impl WaterfillSolution {
    pub fn total_distortion(&self) -> f64 {
        self.distortions.iter().sum()
    }

    pub fn total_bits(&self) -> f64 {
        self.bit_loads.iter().sum()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Minimizes `Σ d_k` subject to `Σ log2⁺(λ_k / d_k) = budget`.
///
/// Closed form per candidate active-set size `m` (largest eigenvalues first):
/// `λ = (∏_{k≤m} λ_k · 2^{-B})^{1/m}`, accepted once it lies in
/// `[λ_{m+1}, λ_m]`.
pub fn reverse_waterfill(eigs: &[f64], budget: f64) -> Result<WaterfillSolution> {
    if let Some(bad) = eigs.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidWaterfillInput(format!("eigenvalue {bad} is not finite and nonnegative")));
    }
    if !budget.is_finite() || budget < 0.0 {
        return Err(Error::InvalidWaterfillInput(format!("budget {budget} is not finite and nonnegative")));
    }
    let n = eigs.len();
    let max_eig = eigs.iter().copied().fold(0.0f64, f64::max);
    let inactive = |level: f64| WaterfillSolution {
        water_level: level,
        distortions: eigs.to_vec(),
        bit_loads: vec![0.0; n],
        noise_eigs: vec![f64::INFINITY; n],
        active: vec![false; n],
    };
    if budget == 0.0 || max_eig == 0.0 {
        return Ok(inactive(max_eig));
    }

    let mut order: Vec<usize> = (0..n).filter(|&k| eigs[k] > 0.0).collect();
    order.sort_by(|&a, &b| eigs[b].total_cmp(&eigs[a]));

    let mut log_sum = 0.0;
    let mut level = max_eig;
    for (m, &k) in order.iter().enumerate() {
        log_sum += eigs[k].log2();
        let count = (m + 1) as f64;
        let candidate = ((log_sum - budget) / count).exp2();
        let upper = eigs[k];
        let lower = order.get(m + 1).map_or(0.0, |&j| eigs[j]);
        if candidate <= upper && candidate >= lower {
            level = candidate;
            break;
        }
        // rounding can leave the last candidate marginally outside its bracket
        level = candidate.min(upper);
    }

    let mut sol = inactive(level);
    for (k, &lam) in eigs.iter().enumerate() {
        if lam > level {
            sol.distortions[k] = level;
            sol.bit_loads[k] = (lam / level).log2();
            sol.noise_eigs[k] = level / (lam - level);
            sol.active[k] = true;
        }
    }
    Ok(sol)
}

/// Reduced test channel `U = basis^H x + Q` with independent noise.
///
/// Only components that receive bits appear; a component with no bits is
/// dropped rather than carried with infinite noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Description {
    /// Active eigenvectors as columns (`dim x m`).
    pub basis: CMat,
    /// Variance `λ_k` of each described component.
    pub component_var: Vec<f64>,
    /// Absolute noise variance `λ_k · λ_k^Q = λ_k d_k / (λ_k - d_k)`.
    pub noise_var: Vec<f64>,
    /// Noise-to-signal ratio `λ_k^Q` per described component.
    pub relative_noise: Vec<f64>,
}

impl Description {
    pub fn empty(dim: usize) -> Self {
        Self {
            basis: CMat::zeros(dim, 0),
            component_var: Vec::new(),
            noise_var: Vec::new(),
            relative_noise: Vec::new(),
        }
    }

    pub fn source_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn len(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// MSE of the component vector `basis_full^H x` given the description,
    /// summed over all components of the originating eigensystem.
    pub fn component_mse(&self) -> Vec<f64> {
        self.component_var
            .iter()
            .zip(&self.noise_var)
            .map(|(&l, &q)| l * q / (l + q))
            .collect()
    }
}

/// Builds the achieving description for `sol` in the coordinates of `basis`.
pub fn build_noise_cov(sol: &WaterfillSolution, basis: &EigenSystem) -> Result<Description> {
    if sol.active.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} components but basis has {}",
            sol.active.len(),
            basis.dim()
        )));
    }
    let idx: Vec<usize> = (0..basis.dim()).filter(|&k| sol.active[k]).collect();
    let n = basis.eigenvectors.nrows();
    let mut out = Description::empty(n);
    out.basis = CMat::from_fn(n, idx.len(), |i, j| basis.eigenvectors[(i, idx[j])]);
    for &k in &idx {
        let lam = basis.eigenvalues[k];
        out.component_var.push(lam);
        out.relative_noise.push(sol.noise_eigs[k]);
        out.noise_var.push(lam * sol.noise_eigs[k]);
    }
    Ok(out)
}

/// Zeroes eigenvalues that are numerically indistinguishable from zero
/// relative to the largest one.
pub(crate) fn floor_eigenvalues(eigs: &[f64]) -> Vec<f64> {
    let largest = eigs.iter().copied().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * largest;
    eigs.iter().map(|&l| if l > cutoff { l } else { 0.0 }).collect()
}
