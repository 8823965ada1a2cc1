//! Monte Carlo oracles: explicit simulation of the Gaussian test channels,
//! with the decoder fitted by least squares on the simulated samples.
#![allow(dead_code)]

use cmimo::gaussian::CMat;
use cmimo::schemes::IpChainState;
use cmimo::waterfill::Description;
use cmimo::SystemInstance;
use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

type C = Complex64;

fn cn(rng: &mut ChaCha20Rng, var: f64) -> C {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(re * s, im * s)
}

fn mat_vec(m: &CMat, x: &[C], out: &mut Vec<C>) {
    out.clear();
    for r in 0..m.nrows() {
        let mut acc = C::new(0.0, 0.0);
        for (c, xc) in x.iter().enumerate() {
            acc += m[(r, c)] * xc;
        }
        out.push(acc);
    }
}

/// Describes `x` as `basis^H x + Q`.
fn describe(desc: &Description, x: &[C], rng: &mut ChaCha20Rng, out: &mut Vec<C>) {
    for (k, &q) in desc.noise_var.iter().enumerate() {
        let mut acc = C::new(0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            acc += desc.basis[(i, k)].conj() * xi;
        }
        out.push(acc + cn(rng, q));
    }
}

/// Empirical sum-MSE of the least-squares linear estimate of `Z = W S` from
/// the observation produced by `observe(s, rng, u)`.
pub fn empirical_distortion(
    inst: &SystemInstance,
    samples: usize,
    seed: u64,
    mut observe: impl FnMut(&[C], &mut ChaCha20Rng, &mut Vec<C>),
) -> f64 {
    let n = inst.n_antennas();
    let chol = Cholesky::new(inst.source_cov.matrix().clone()).expect("source covariance is positive definite");
    let l = chol.l();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut g, mut s, mut z, mut u) = (vec![C::new(0.0, 0.0); n], Vec::new(), Vec::new(), Vec::new());
    let mut dim = None;
    let mut guu = DMatrix::<C>::zeros(0, 0);
    let mut gzu = DMatrix::<C>::zeros(0, 0);
    let mut zz = 0.0;
    for _ in 0..samples {
        for gi in g.iter_mut() {
            *gi = cn(&mut rng, 1.0);
        }
        mat_vec(&l, &g, &mut s);
        mat_vec(&inst.beamformer, &s, &mut z);
        u.clear();
        observe(&s, &mut rng, &mut u);
        let d = *dim.get_or_insert_with(|| {
            guu = DMatrix::zeros(u.len(), u.len());
            gzu = DMatrix::zeros(z.len(), u.len());
            u.len()
        });
        assert_eq!(u.len(), d);
        zz += z.iter().map(|x| x.norm_sqr()).sum::<f64>();
        for j in 0..d {
            let uj = u[j].conj();
            for i in 0..d {
                guu[(i, j)] += u[i] * uj;
            }
            for (i, zi) in z.iter().enumerate() {
                gzu[(i, j)] += zi * uj;
            }
        }
    }
    let explained = if dim.unwrap_or(0) == 0 {
        0.0
    } else {
        let inv = guu.clone().try_inverse().expect("sample gram is invertible");
        (&gzu * inv * gzu.adjoint()).trace().re
    };
    (zz - explained) / samples as f64
}

/// Routing: RRU `l` sends its own description of `S_l`.
pub fn routing_oracle(inst: &SystemInstance, descriptions: &[Description], samples: usize, seed: u64) -> f64 {
    empirical_distortion(inst, samples, seed, |s, rng, u| {
        for (l, desc) in descriptions.iter().enumerate() {
            describe(desc, &s[inst.topology.rru_range(l)], rng, u);
        }
    })
}

/// In-network processing: decompress, combine with `W_l S_l`, re-describe.
pub fn processing_oracle(inst: &SystemInstance, chain: &IpChainState, samples: usize, seed: u64) -> f64 {
    let blocks: Vec<CMat> = (0..inst.n_rrus()).map(|l| inst.beamformer_block(l)).collect();
    let (mut f, mut local, mut r) = (Vec::new(), Vec::new(), Vec::new());
    empirical_distortion(inst, samples, seed, |s, rng, u| {
        let mut upstream: Vec<C> = Vec::new();
        for (l, stage) in chain.stages.iter().enumerate() {
            mat_vec(&blocks[l], &s[inst.topology.rru_range(l)], &mut local);
            f.clear();
            f.extend_from_slice(&upstream);
            f.extend_from_slice(&local);
            mat_vec(&stage.combiner, &f, &mut r);
            upstream.clear();
            describe(&stage.description, &r, rng, &mut upstream);
        }
        u.extend_from_slice(&upstream);
    })
}
