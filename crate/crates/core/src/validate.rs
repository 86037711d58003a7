//! Reduced-size property checks exposed through `shrinkcomb validate`.
//!
//! Each check compares an implementation path against an independent
//! route: finite differences, a dense grid, a dense inverse, a long-run
//! sample average, or brute-force enumeration.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::airframe::{draw_data_symbols, make_pilots, synthesize, Constellation, Phase};
use crate::combine::{direct_estimate, soft_estimates};
use crate::detect::{hard_decide, hard_decide_matrix, sample_mse, sample_mse_trace};
use crate::linalg::{dense_inverse, frobenius, rel_frobenius, sample_covariance};
use crate::regcov::{alpha_from_data, alpha_oracle, apply_r_inverse, build_prep, r_of_alpha};
use crate::scenario::{draw_channels, InterfererSpec, PositionSpec, ScenarioConfig};
use crate::shrinkfit::mse_gradient;
use crate::{CMat, Result};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn scenario(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference(6.0 + (seed % 5) as f64 * 4.0);
    if seed % 2 == 1 {
        cfg.interferers.push(InterfererSpec {
            position: PositionSpec::Random,
            power_offset_db: -5.0,
        });
    }
    cfg
}

struct Instance {
    chan: crate::scenario::ChannelRealization,
    pilots: crate::airframe::PilotMatrix,
    pilot: crate::airframe::SignalBlock,
    data: crate::airframe::SignalBlock,
}

fn instance(seed: u64) -> Result<Instance> {
    let cfg = scenario(seed);
    let chan = draw_channels(&cfg, seed)?;
    let pilots = make_pilots(cfg.pilot_len, cfg.num_ues)?;
    let pilot = synthesize(Phase::Pilot, &cfg, &chan, pilots.matrix(), seed)?;
    let d = draw_data_symbols(&cfg, seed)?;
    let data = synthesize(Phase::Data, &cfg, &chan, &d, seed)?;
    Ok(Instance {
        chan,
        pilots,
        pilot,
        data,
    })
}

fn gradient_check(seeds: u64) -> Result<Check> {
    let q = Constellation::qpsk();
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let inst = instance(seed)?;
        let prep = build_prep(&inst.pilot)?;
        let w0 = direct_estimate(&prep, &inst.pilot, &inst.pilots, 0.2)?.w;
        let hard = hard_decide_matrix(&soft_estimates(&inst.data.y, &w0)?, &q);
        let eps = |a: f64| -> Result<f64> {
            let w = direct_estimate(&prep, &inst.pilot, &inst.pilots, a)?.w;
            sample_mse(&soft_estimates(&inst.data.y, &w)?, &hard)
        };
        for i in 1..=19 {
            let a = i as f64 * 0.05;
            let h = 1e-6;
            let fd = (eps(a + h)? - eps(a - h)?) / (2.0 * h);
            let g = mse_gradient(&prep, &inst.pilot, &inst.pilots, &inst.data.y, &hard, a)?;
            worst = worst.max((g - fd).abs() / fd.abs().max(1e-8));
        }
    }
    Ok(Check {
        name: "gradient vs central difference",
        passed: worst <= 1e-4,
        detail: format!("worst relative error {worst:.2e} (tol 1e-4)"),
    })
}

fn closed_form_check(seeds: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let inst = instance(seed)?;
        let prep = build_prep(&inst.pilot)?;
        let targets = [
            (alpha_oracle(&prep, &inst.chan)?.alpha, inst.chan.true_covariance()),
            (alpha_from_data(&prep, &inst.data)?.alpha, sample_covariance(&inst.data.y)),
        ];
        for (alpha, c) in targets {
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=10_000 {
                let a = i as f64 * 1e-4;
                let f = frobenius(&(r_of_alpha(&prep, a)? - &c));
                if f < best.0 {
                    best = (f, a);
                }
            }
            worst = worst.max((alpha - best.1).abs());
        }
    }
    Ok(Check {
        name: "closed-form alpha vs grid argmin",
        passed: worst <= 1e-4 + 1e-12,
        detail: format!("worst |alpha - grid| {worst:.2e} (tol 1e-4)"),
    })
}

fn eigen_cache_check(seeds: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let inst = instance(seed)?;
        let prep = build_prep(&inst.pilot)?;
        for i in 1..=100 {
            let a = i as f64 * 0.01;
            let fast = apply_r_inverse(&prep, a, &inst.pilot.y)?;
            let dense = dense_inverse(&r_of_alpha(&prep, a)?)
                .ok_or(crate::Error::Singular("R(alpha)"))?
                * &inst.pilot.y;
            worst = worst.max(rel_frobenius(&fast, &dense));
        }
    }
    Ok(Check {
        name: "eigen-cached inverse vs dense inverse",
        passed: worst <= 1e-9,
        detail: format!("worst relative error {worst:.2e} (tol 1e-9)"),
    })
}

fn covariance_check() -> Result<Check> {
    let mut cfg = scenario(1);
    cfg.pilot_len = 100_000;
    let chan = draw_channels(&cfg, 1)?;
    let pilots = make_pilots(cfg.pilot_len, cfg.num_ues)?;
    let pilot = synthesize(Phase::Pilot, &cfg, &chan, pilots.matrix(), 1)?;
    let err = rel_frobenius(&sample_covariance(&pilot.y), &chan.true_covariance());
    Ok(Check {
        name: "pilot sample covariance convergence",
        passed: err <= 0.05,
        detail: format!("relative error {err:.3e} at 1e5 pilots (tol 0.05)"),
    })
}

fn detection_check(seeds: u64) -> Result<Check> {
    let q = Constellation::qpsk();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds);
    let mut ok = true;
    for _ in 0..200 {
        let soft: Vec<Complex64> = (0..3)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let once = hard_decide(&soft, &q);
        ok &= hard_decide(&once, &q) == once;
        let mut best = (f64::INFINITY, Vec::new());
        for i in 0..64usize {
            let seq: Vec<Complex64> = (0..3).map(|t| q.points()[(i >> (2 * t)) & 3]).collect();
            let d: f64 = seq.iter().zip(&soft).map(|(a, b)| (a - b).norm_sqr()).sum();
            if d < best.0 {
                best = (d, seq);
            }
        }
        ok &= best.1 == once;
    }
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let inst = instance(seed)?;
        let prep = build_prep(&inst.pilot)?;
        let alpha = 0.15;
        let w = direct_estimate(&prep, &inst.pilot, &inst.pilots, alpha)?.w;
        let soft = soft_estimates(&inst.data.y, &w)?;
        let hard: CMat = hard_decide_matrix(&soft, &q);
        let a = sample_mse(&soft, &hard)?;
        let b = sample_mse_trace(&prep, &inst.pilot, &inst.pilots, &inst.data.y, &hard, alpha)?;
        worst = worst.max((a - b).abs() / a.abs().max(1e-300));
    }
    Ok(Check {
        name: "detection invariants and dual MSE formula",
        passed: ok && worst <= 1e-9,
        detail: format!("argmin/idempotence {}, dual-formula error {worst:.2e} (tol 1e-9)", if ok { "ok" } else { "FAILED" }),
    })
}

/// Runs every check with `seeds` instances each.
pub fn run_all(seeds: u64) -> Result<Vec<Check>> {
    Ok(vec![
        gradient_check(seeds)?,
        closed_form_check(seeds)?,
        eigen_cache_check(seeds)?,
        covariance_check()?,
        detection_check(seeds)?,
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn reduced_suite_passes() {
        for c in super::run_all(2).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
