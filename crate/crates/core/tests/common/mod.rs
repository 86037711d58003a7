#![allow(dead_code)]

//! Test-side reference computations. Everything here is built from plain
//! dense nalgebra operations so it can serve as an oracle for the
//! eigen-cached library paths.

use nalgebra::DMatrix;
use num_complex::Complex64;

use shrinkcomb::airframe::{draw_data_symbols, make_pilots, synthesize, Phase, PilotMatrix, SignalBlock};
use shrinkcomb::scenario::{draw_channels, ChannelRealization, InterfererSpec, PositionSpec, ScenarioConfig};
use shrinkcomb::CMat;

pub struct Inst {
    pub cfg: ScenarioConfig,
    pub chan: ChannelRealization,
    pub pilots: PilotMatrix,
    pub pilot: SignalBlock,
    pub data: SignalBlock,
}

pub fn interferer() -> InterfererSpec {
    InterfererSpec {
        position: PositionSpec::Random,
        power_offset_db: -5.0,
    }
}

/// Seeded instance cycling through powers 6..22 dBm, alternating interference.
pub fn mixed(seed: u64) -> Inst {
    let mut cfg = ScenarioConfig::reference(6.0 + (seed % 5) as f64 * 4.0);
    if seed % 2 == 1 {
        cfg.interferers.push(interferer());
    }
    build(cfg, seed)
}

pub fn build(cfg: ScenarioConfig, seed: u64) -> Inst {
    let chan = draw_channels(&cfg, seed).unwrap();
    let pilots = make_pilots(cfg.pilot_len, cfg.num_ues).unwrap();
    let pilot = synthesize(Phase::Pilot, &cfg, &chan, pilots.matrix(), seed).unwrap();
    let d = draw_data_symbols(&cfg, seed).unwrap();
    let data = synthesize(Phase::Data, &cfg, &chan, &d, seed).unwrap();
    Inst {
        cfg,
        chan,
        pilots,
        pilot,
        data,
    }
}

pub fn gram(y: &CMat) -> CMat {
    y * y.adjoint() / Complex64::from(y.ncols() as f64)
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(1−α)Q + α·tr(Q)/n·I` from the raw pilot block.
pub fn dense_r(pilot: &CMat, alpha: f64) -> CMat {
    let q = gram(pilot);
    let n = q.nrows();
    let t = q.trace().re / n as f64;
    q * Complex64::from(1.0 - alpha) + DMatrix::identity(n, n) * Complex64::from(alpha * t)
}

pub fn dense_combiner(inst: &Inst, alpha: f64) -> CMat {
    let yp = &inst.pilot.y;
    let tp = yp.ncols() as f64;
    let rhs = yp * inst.pilots.matrix() / Complex64::from(tp);
    dense_r(yp, alpha).lu().solve(&rhs).expect("R(alpha) singular")
}

/// Soft estimates `τᵈ×K`: entry `(t,k)` is `w_kᴴ y_t`.
pub fn dense_soft(inst: &Inst, alpha: f64) -> CMat {
    inst.data.y.adjoint() * dense_combiner(inst, alpha)
}

/// Residual-sum sample MSE against fixed decisions.
pub fn residual_mse(soft: &CMat, hard: &CMat) -> f64 {
    (soft - hard).iter().map(|z| z.norm_sqr()).sum::<f64>() / soft.len() as f64
}

pub fn dense_eps(inst: &Inst, alpha: f64, hard: &CMat) -> f64 {
    residual_mse(&dense_soft(inst, alpha), hard)
}

/// Nearest-point decisions by exhaustive distance comparison.
pub fn brute_decide(soft: &CMat, points: &[Complex64]) -> CMat {
    soft.map(|z| {
        *points
            .iter()
            .min_by(|a, b| (z - **a).norm_sqr().total_cmp(&(z - **b).norm_sqr()))
            .unwrap()
    })
}
