//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cmimo::experiment::{aggregate, run_experiment_with, run_trials, ExperimentConfig, FronthaulProfile};
use cmimo::schemes::{eval_ip, eval_ir, eval_ir_joint, eval_lower_bound, eval_sr, optimize_ir_allocation};
use cmimo::waterfill::reverse_waterfill;
use cmimo::{sample_instance, RateAllocation, SchemeId, Topology};
use common::{processing_oracle, routing_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SCALAR_TOL: f64 = 1e-9;
const JOINT_TOL: f64 = 1e-9;
const IP_BOUND_TOL: f64 = 1e-9;
const SCAN_POINTS: usize = 100_000;
const SCAN_TOL: f64 = 1e-6;
const BITS_TOL: f64 = 1e-9;
const SAMPLES: usize = 1_000_000;
const SAMPLING_TOL: f64 = 0.01;
const ORDER_SLACK: f64 = 1e-9;
const REFERENCE_TRIALS: usize = 200;
/// Allocation grid for the 200-trial reference sweep; the CLI default is 32.
const REFERENCE_GRID_STEPS: usize = 8;

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Criterion 1: one user, one RRU, one antenna.
fn scalar_closed_form() -> Outcome {
    let topo = Topology::new(1, 1, 1, 10.0).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let inst = sample_instance(&topo, seed).unwrap();
        let h = inst.channel[(0, 0)];
        let w = inst.beamformer[(0, 0)];
        for b in 0..=15 {
            let b = b as f64;
            let want = w.norm_sqr() * (10.0 * h.norm_sqr() + 1.0) * 2f64.powf(-b);
            let alloc = RateAllocation::new(vec![b], vec![b]).unwrap();
            let sr = eval_sr(&inst, &alloc).unwrap().sum_distortion;
            let ir = eval_ir(&inst, &alloc).unwrap().sum_distortion;
            worst = worst.max(rel(sr, want)).max(rel(ir, want));
        }
    }
    let msg = format!("max relative error {worst:.2e} over 20 channels x B=0..15 (tol {SCALAR_TOL:.0e})");
    if worst <= SCALAR_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 2: joint and innovation forms of IR.
fn joint_matches_innovation() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let rrus = 2 + k % 3;
        let antennas = rng.random_range(1..=3);
        let users = rng.random_range(1..=(rrus * antennas).min(4));
        let topo = Topology::new(users, rrus, antennas, 10.0).unwrap();
        let inst = sample_instance(&topo, rng.random()).unwrap();
        let rates: Vec<f64> = (0..rrus).map(|_| rng.random_range(0.0..12.0)).collect();
        let mut cap = f64::INFINITY;
        let caps: Vec<f64> = rates
            .iter()
            .rev()
            .map(|&r| {
                cap = cap.min(r);
                cap
            })
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        let mut prev = 0.0;
        let bits: Vec<f64> = caps
            .iter()
            .map(|&c| {
                let next = prev + rng.random_range(0.0..=1.0) * (c - prev).max(0.0);
                let b = next - prev;
                prev = next;
                b
            })
            .collect();
        let alloc = RateAllocation::new(bits, rates).unwrap();
        let a = eval_ir(&inst, &alloc).unwrap().sum_distortion;
        let b = eval_ir_joint(&inst, &alloc).unwrap().sum_distortion;
        worst = worst.max(rel(a, b));
    }
    let msg = format!("max relative gap {worst:.2e} on 50 instances, L in 2..4 (tol {JOINT_TOL:.0e})");
    if worst <= JOINT_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 3: with one RRU, in-network processing meets the bound.
fn ip_meets_bound_single_rru() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let users = rng.random_range(1..=4);
        let antennas = rng.random_range(users..=6);
        let topo = Topology::new(users, 1, antennas, 10.0).unwrap();
        let inst = sample_instance(&topo, rng.random()).unwrap();
        for b in 1..=15 {
            let r = [users as f64 * b as f64];
            let ip = eval_ip(&inst, &r).unwrap().sum_distortion;
            let lb = eval_lower_bound(&inst, &r).unwrap().sum_distortion;
            worst = worst.max(rel(ip, lb));
        }
    }
    let msg = format!("max relative gap {worst:.2e} on 50 instances x B=1..15 (tol {IP_BOUND_TOL:.0e})");
    if worst <= IP_BOUND_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Rate spent at water level `t`.
fn rate_at(eigs: &[f64], t: f64) -> f64 {
    eigs.iter().filter(|&&l| l > t).map(|&l| (l / t).log2()).sum()
}

/// Water-filling by a dense log-spaced scan of the water level, refined
/// inside the bracketing cell where the rate is affine in `log2 t`.
fn scan_waterfill(eigs: &[f64], budget: f64) -> f64 {
    let max = eigs.iter().copied().fold(0.0, f64::max);
    let total: f64 = eigs.iter().sum();
    if budget == 0.0 || max == 0.0 {
        return total;
    }
    let lo = max * 2f64.powf(-budget - 1.0);
    let span = (max / lo).log2();
    let level = |i: usize| lo * 2f64.powf(span * i as f64 / (SCAN_POINTS - 1) as f64);
    let i = (0..SCAN_POINTS - 1)
        .find(|&i| rate_at(eigs, level(i + 1)) <= budget)
        .expect("rate reaches zero at the top of the scan");
    let (mut a, mut b) = (level(i), level(i + 1));
    // split at eigenvalues inside the cell so the active set is constant
    for &l in eigs {
        if l > a && l < b {
            if rate_at(eigs, l) <= budget {
                b = l;
            } else {
                a = l;
            }
        }
    }
    let (ra, rb) = (rate_at(eigs, a), rate_at(eigs, b));
    let x = if ra == rb {
        a.log2()
    } else {
        a.log2() + (ra - budget) / (ra - rb) * (b.log2() - a.log2())
    };
    let t = 2f64.powf(x);
    eigs.iter().map(|&l| l.min(t)).sum()
}

/// Criterion 4: reverse water-filling against the scan.
fn waterfill_matches_scan() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut worst_d, mut worst_b) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let eigs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    10f64.powf(rng.random_range(-3.0..3.0))
                }
            })
            .collect();
        let budget = rng.random_range(0.0..20.0);
        let sol = reverse_waterfill(&eigs, budget).unwrap();
        let want = scan_waterfill(&eigs, budget);
        worst_d = worst_d.max((sol.total_distortion() - want).abs() / want.max(1.0));
        if eigs.iter().any(|&l| l > 0.0) {
            worst_b = worst_b.max((sol.total_bits() - budget).abs());
        }
    }
    let msg = format!(
        "max distortion error {worst_d:.2e} (tol {SCAN_TOL:.0e}), max |sum b - B| {worst_b:.2e} (tol {BITS_TOL:.0e}) on 1000 sets"
    );
    if worst_d <= SCAN_TOL && worst_b <= BITS_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 5: Monte Carlo simulation of the test channels.
fn sampling_oracles() -> Outcome {
    let mut worst = [0.0f64; 3];
    for k in 0..10u64 {
        let antennas = 1 + (k % 2) as usize;
        let users = 1 + ((k / 2) % 2) as usize;
        let topo = Topology::new(users, 2, antennas, 10.0).unwrap();
        let inst = sample_instance(&topo, 500 + k).unwrap();
        let rates = [users as f64 * 2.0, users as f64 * 3.0];
        let ir = optimize_ir_allocation(&inst, &rates, 16).unwrap();
        let sr = eval_sr(&inst, ir.allocation.as_ref().unwrap()).unwrap();
        let ip = eval_ip(&inst, &rates).unwrap();
        let sims = [
            (routing_oracle(&inst, &sr.descriptions, SAMPLES, 3 * k), sr.sum_distortion),
            (routing_oracle(&inst, &ir.descriptions, SAMPLES, 3 * k + 1), ir.sum_distortion),
            (
                processing_oracle(&inst, ip.ip_chain.as_ref().unwrap(), SAMPLES, 3 * k + 2),
                ip.sum_distortion,
            ),
        ];
        for (w, (sim, analytic)) in worst.iter_mut().zip(sims) {
            *w = w.max((sim - analytic).abs() / analytic);
        }
    }
    let msg = format!(
        "max relative error SR {:.2e}, IR {:.2e}, IP {:.2e} on 10 instances x 1e6 samples (tol {SAMPLING_TOL})",
        worst[0], worst[1], worst[2]
    );
    if worst.iter().all(|&w| w <= SAMPLING_TOL) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reference_config(profile: FronthaulProfile, trials: usize, grid_steps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        fh_profile: profile,
        n_trials: trials,
        base_seed: 2017,
        grid_steps,
        ..ExperimentConfig::default()
    };
    cfg.sync_snr();
    cfg
}

/// Criterion 6: 15 users, 4 RRUs with 7 antennas, 10 dB, both profiles.
fn reference_configuration(warnings: &mut Vec<String>) -> Outcome {
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for profile in [FronthaulProfile::Balanced, FronthaulProfile::Increasing] {
        let cfg = reference_config(profile, REFERENCE_TRIALS, REFERENCE_GRID_STEPS);
        let idx = |s: SchemeId| cfg.schemes.iter().position(|&x| x == s).unwrap();
        let (sr, ir, ip, lb) = (
            idx(SchemeId::StandardRouting),
            idx(SchemeId::ImprovedRouting),
            idx(SchemeId::InNetworkProcessing),
            idx(SchemeId::LowerBound),
        );
        let records = run_trials(&cfg, 0, None).map_err(|e| format!("{profile}: {e}"))?;
        let mut violations = 0;
        for r in &records {
            let slack = ORDER_SLACK * r.zero_rate_distortion.max(1.0);
            for (b, &bits) in cfg.bits_per_user_sweep.iter().enumerate() {
                let d = |s: usize| r.distortions[s][b];
                let ok = d(lb) <= d(ip) + slack && d(lb) <= d(ir) + slack && d(ir) <= d(sr) + slack;
                let zero_ok = bits != 0.0
                    || (0..cfg.schemes.len()).all(|s| rel(d(s), r.zero_rate_distortion) <= ORDER_SLACK);
                if !ok || !zero_ok {
                    violations += 1;
                    if violations <= 3 {
                        failures.push(format!(
                            "{profile} trial {} B={bits}: LB {:.6e} IP {:.6e} IR {:.6e} SR {:.6e}",
                            r.trial,
                            d(lb),
                            d(ip),
                            d(ir),
                            d(sr)
                        ));
                    }
                }
            }
        }
        if violations > 0 {
            failures.push(format!("{profile}: {violations} per-trial violations"));
        }
        let table = aggregate(&cfg, &records);
        let nb = cfg.bits_per_user_sweep.len();
        let mean = |s: usize, b: usize| table.rows[s * nb + b].mean_distortion;
        for (s, scheme) in cfg.schemes.iter().enumerate() {
            let slack = ORDER_SLACK * mean(s, 0).max(1.0);
            for b in 1..nb {
                if mean(s, b) > mean(s, b - 1) + slack {
                    failures.push(format!("{profile} {scheme}: mean rises at B={}", cfg.bits_per_user_sweep[b]));
                }
            }
        }
        for b in 0..nb {
            if mean(ip, b) > mean(ir, b) * (1.0 + ORDER_SLACK) {
                warnings.push(format!(
                    "{profile} B={}: mean IP {:.6e} above mean IR {:.6e}",
                    cfg.bits_per_user_sweep[b],
                    mean(ip, b),
                    mean(ir, b)
                ));
            }
        }
        let last = nb - 1;
        summary.push(format!(
            "{profile} B=15 means LB {:.3e} IP {:.3e} IR {:.3e} SR {:.3e}",
            mean(lb, last),
            mean(ip, last),
            mean(ir, last),
            mean(sr, last)
        ));
    }
    let msg = format!(
        "{REFERENCE_TRIALS} paired trials per profile, grid_steps {REFERENCE_GRID_STEPS}; {}",
        summary.join("; ")
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", failures.join("; ")))
    }
}

/// Criterion 7: identical CSV bytes across runs and worker counts.
fn byte_identical_csv() -> Outcome {
    let cfg = reference_config(FronthaulProfile::Increasing, 8, 4);
    let runs: Vec<String> = [1, 4, 1, 4]
        .iter()
        .map(|&w| run_experiment_with(&cfg, w, None).and_then(|t| t.to_csv()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let msg = format!("{} CSV bytes, runs with workers 1, 4, 1, 4", runs[0].len());
    if runs.iter().all(|r| r == &runs[0]) {
        Ok(msg)
    } else {
        Err(format!("{msg} differ"))
    }
}

fn main() -> ExitCode {
    let mut warnings = Vec::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Vec<String>) -> Outcome>)> = vec![
        ("1 scalar closed form", Box::new(|_| scalar_closed_form())),
        ("2 IR joint vs innovation form", Box::new(|_| joint_matches_innovation())),
        ("3 IP equals bound at L=1", Box::new(|_| ip_meets_bound_single_rru())),
        ("4 water-fill vs dense scan", Box::new(|_| waterfill_matches_scan())),
        ("5 sampling oracles", Box::new(|_| sampling_oracles())),
        ("6 reference configuration", Box::new(reference_configuration)),
        ("7 byte-identical CSV", Box::new(|_| byte_identical_csv())),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run(&mut warnings);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    for w in &warnings {
        println!("WARN {w}");
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
