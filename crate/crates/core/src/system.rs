//! One realization of the chained uplink: channel, source covariance and
//! zero-forcing beamformer.

use std::ops::Range;

use num_complex::Complex64;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{conditional_cov, eig_hermitian, CMat, HermitianCov};
use crate::rng::{complex_normal, InstanceRng};

const ZF_TOL: f64 = 1e-8;

/// Network dimensions. `snr` is a linear power ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub n_users: usize,
    pub n_rrus: usize,
    pub antennas_per_rru: usize,
    #[serde(default = "default_snr")]
    pub snr: f64,
}

fn default_snr() -> f64 {
    10.0
}

impl Topology {
    pub fn new(n_users: usize, n_rrus: usize, antennas_per_rru: usize, snr: f64) -> Result<Self> {
        let t = Self {
            n_users,
            n_rrus,
            antennas_per_rru,
            snr,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_rrus == 0 || self.antennas_per_rru == 0 {
            return Err(Error::InvalidTopology("users, RRUs and antennas must all be positive".into()));
        }
        if self.n_rrus.checked_mul(self.antennas_per_rru).is_none() {
            return Err(Error::InvalidTopology("antenna count overflows".into()));
        }
        if self.n_antennas() < self.n_users {
            return Err(Error::InvalidTopology(format!(
                "{} total antennas cannot zero-force {} users",
                self.n_antennas(),
                self.n_users
            )));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::InvalidTopology(format!("snr {} must be positive and finite", self.snr)));
        }
        Ok(())
    }

    pub fn n_antennas(&self) -> usize {
        self.n_rrus * self.antennas_per_rru
    }

    /// Antenna indices of RRU `l` (zero-based).
    pub fn rru_range(&self, l: usize) -> Range<usize> {
        let a = self.antennas_per_rru;
        l * a..(l + 1) * a
    }

    pub fn rru_indices(&self, l: usize) -> Vec<usize> {
        self.rru_range(l).collect()
    }

    /// Antenna indices of RRUs `from..n_rrus` (zero-based, possibly empty).
    pub fn rrus_from(&self, from: usize) -> Vec<usize> {
        (from * self.antennas_per_rru..self.n_antennas()).collect()
    }
}

/// Immutable channel realization with derived covariances.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub topology: Topology,
    /// `(L·A) x U`, unit-variance entries.
    pub channel: CMat,
    /// `snr · H H^H + I`.
    pub source_cov: HermitianCov,
    /// Zero-forcing weights `(H^H H)^{-1} H^H`, `U x (L·A)`.
    pub beamformer: CMat,
    pub seed: Option<u64>,
}

impl SystemInstance {
    /// Assembles the source covariance and ZF beamformer for a given channel.
    pub fn from_channel(topology: Topology, channel: CMat) -> Result<Self> {
        topology.validate()?;
        let (n, u) = (topology.n_antennas(), topology.n_users);
        if channel.nrows() != n || channel.ncols() != u {
            return Err(Error::DimensionMismatch(format!(
                "channel must be {n}x{u}, got {}x{}",
                channel.nrows(),
                channel.ncols()
            )));
        }
        if channel.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInstance("channel has non-finite entries".into()));
        }

        let gram = HermitianCov::symmetrized(channel.adjoint() * &channel);
        if gram.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInstance("channel gram matrix overflows".into()));
        }
        let es = eig_hermitian(&gram).map_err(|_| Error::RankDeficientChannel)?;
        let largest = es.eigenvalues[0];
        let smallest = *es.eigenvalues.last().unwrap_or(&0.0);
        if !(largest > 0.0) || smallest <= 1e-12 * largest {
            return Err(Error::RankDeficientChannel);
        }
        let gram_inv = gram.into_matrix().try_inverse().ok_or(Error::RankDeficientChannel)?;
        let beamformer = gram_inv * channel.adjoint();
        let wh = &beamformer * &channel;
        for i in 0..u {
            for j in 0..u {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (wh[(i, j)] - Complex64::new(expect, 0.0)).norm() > ZF_TOL {
                    return Err(Error::RankDeficientChannel);
                }
            }
        }

        let mut sigma = &channel * channel.adjoint() * Complex64::new(topology.snr, 0.0);
        for i in 0..n {
            sigma[(i, i)] += Complex64::new(1.0, 0.0);
        }
        if sigma.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInstance("source covariance overflows".into()));
        }
        Ok(Self {
            topology,
            channel,
            source_cov: HermitianCov::symmetrized(sigma),
            beamformer,
            seed: None,
        })
    }

    pub fn n_users(&self) -> usize {
        self.topology.n_users
    }

    pub fn n_rrus(&self) -> usize {
        self.topology.n_rrus
    }

    pub fn n_antennas(&self) -> usize {
        self.topology.n_antennas()
    }

    /// `W_l`: the beamformer columns acting on RRU `l` (zero-based).
    pub fn beamformer_block(&self, l: usize) -> CMat {
        let r = self.topology.rru_range(l);
        self.beamformer.columns(r.start, r.len()).into_owned()
    }

    /// `W` with the columns of RRUs outside `keep` zeroed.
    pub(crate) fn masked_beamformer(&self, keep: Range<usize>) -> CMat {
        let mut w = CMat::zeros(self.n_users(), self.n_antennas());
        for l in keep {
            let r = self.topology.rru_range(l);
            w.columns_mut(r.start, r.len()).copy_from(&self.beamformer.columns(r.start, r.len()));
        }
        w
    }
}

/// Draws `H` with i.i.d. `CN(0, 1)` entries and assembles the instance.
pub fn sample_instance(topology: &Topology, rng_seed: u64) -> Result<SystemInstance> {
    topology.validate()?;
    let mut rng = InstanceRng::seed_from_u64(rng_seed);
    let (n, u) = (topology.n_antennas(), topology.n_users);
    let mut entries = Vec::with_capacity(n * u);
    for _ in 0..n * u {
        entries.push(complex_normal(&mut rng));
    }
    let channel = CMat::from_row_slice(n, u, &entries);
    let mut inst = SystemInstance::from_channel(*topology, channel)?;
    inst.seed = Some(rng_seed);
    Ok(inst)
}

/// `Σ_z = W Σ_s W^H`.
pub fn target_cov(inst: &SystemInstance) -> HermitianCov {
    HermitianCov::symmetrized(&inst.beamformer * inst.source_cov.matrix() * inst.beamformer.adjoint())
}

/// Covariance of `Z` given the observations of RRUs `cut_l+1..=L`; `cut_l` is
/// one-based.
pub fn cut_conditional_target_cov(inst: &SystemInstance, cut_l: usize) -> Result<HermitianCov> {
    let l_total = inst.n_rrus();
    if cut_l == 0 || cut_l > l_total {
        return Err(Error::IndexOutOfRange {
            index: cut_l,
            dim: l_total + 1,
        });
    }
    if cut_l == l_total {
        return Ok(target_cov(inst));
    }
    let inside: Vec<usize> = (0..cut_l * inst.topology.antennas_per_rru).collect();
    let outside = inst.topology.rrus_from(cut_l);
    let post = conditional_cov(&inst.source_cov, &inside, &outside)?;
    let w_in = inst.beamformer.columns(0, inside.len()).into_owned();
    post.congruence(&w_in)
}

type Pair = [f64; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    topology: Topology,
    #[serde(default)]
    seed: Option<u64>,
    channel: Vec<Vec<Pair>>,
    #[serde(default)]
    source_cov: Option<Vec<Vec<Pair>>>,
    #[serde(default)]
    beamformer: Option<Vec<Vec<Pair>>>,
}

fn to_pairs(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_pairs(rows: &[Vec<Pair>], what: &str) -> Result<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::InvalidInstance(format!("{what} rows have unequal lengths")));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

fn check_stored(stored: &Option<Vec<Vec<Pair>>>, expect: &CMat, what: &str) -> Result<()> {
    let Some(rows) = stored else { return Ok(()) };
    let m = from_pairs(rows, what)?;
    if m.shape() != expect.shape() {
        return Err(Error::InvalidInstance(format!("{what} has the wrong shape")));
    }
    let scale = expect.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    let diff = m.iter().zip(expect.iter()).fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()));
    // NaN diff must fail too
    if !(diff <= 1e-9 * scale) {
        return Err(Error::InvalidInstance(format!("{what} does not match the channel (max diff {diff:e})")));
    }
    Ok(())
}

impl SystemInstance {
    /// JSON fixture: matrices as nested arrays of `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            topology: self.topology,
            seed: self.seed,
            channel: to_pairs(&self.channel),
            source_cov: Some(to_pairs(self.source_cov.matrix())),
            beamformer: Some(to_pairs(&self.beamformer)),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Rebuilds an instance from its channel; stored derived matrices, when
    /// present, must agree with the rebuilt ones.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let channel = from_pairs(&file.channel, "channel")?;
        let mut inst = Self::from_channel(file.topology, channel)?;
        check_stored(&file.source_cov, inst.source_cov.matrix(), "source_cov")?;
        check_stored(&file.beamformer, &inst.beamformer, "beamformer")?;
        inst.seed = file.seed;
        Ok(inst)
    }
}
