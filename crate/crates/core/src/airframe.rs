//! Pilots, constellations and synthesis of the received pilot/data blocks.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::scenario::{ChannelRealization, ScenarioConfig};
use crate::seed::{complex_normal, stream_rng, Stream};
use crate::{error::dim_err, CMat, Error, Result};

/// Unit-average-energy square QAM alphabet (QPSK for order 4).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn qpsk() -> Self {
        Self::square_qam(4).expect("4-QAM is square")
    }

    /// Square `order`-QAM with Gray labels per axis. `order` must be an even
    /// power of two, at least 4.
    pub fn square_qam(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if order < 4 || side * side != order || !side.is_power_of_two() {
            return Err(Error::Config(format!(
                "constellation order {order} is not a square power of two >= 4"
            )));
        }
        let bits = side.trailing_zeros();
        // Mean energy of the unnormalised ±1, ±3, ... grid is 2(order−1)/3.
        let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) / norm;
        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        for i in 0..side {
            for q in 0..side {
                points.push(Complex64::new(level(i), level(q)));
                labels.push((gray(i as u32) << bits) | gray(q as u32));
            }
        }
        Ok(Self {
            order,
            points,
            labels,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.points.contains(&z)
    }

    pub fn random_symbol<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        self.points[rng.random_range(0..self.order)]
    }
}

/// `τᵖ×K` pilot matrix with `PᴴP = τᵖ·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix(pub CMat);

impl PilotMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
    pub fn num_ues(&self) -> usize {
        self.0.ncols()
    }
}

/// First `K` columns of the unnormalised `τᵖ`-point DFT matrix.
pub fn make_pilots(pilot_len: usize, num_ues: usize) -> Result<PilotMatrix> {
    if num_ues == 0 || pilot_len < num_ues {
        return Err(Error::Config(format!(
            "cannot build {num_ues} orthogonal pilots of length {pilot_len}"
        )));
    }
    let p = CMat::from_fn(pilot_len, num_ues, |t, k| {
        // Reduce the phase index first so that entries are exact at 1, ±j.
        let idx = (t * k) % pilot_len;
        if idx == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / pilot_len as f64)
        }
    });
    Ok(PilotMatrix(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pilot,
    Data,
}

/// A received `BM×T` block plus the `T×K` symbols that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    pub y: CMat,
    pub truth: CMat,
    pub phase: Phase,
}

impl SignalBlock {
    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.ncols() == 0
    }

    /// Dumps `y` as little-endian `f64` pairs `(re, im)`, row-major.
    pub fn write_le<W: Write>(&self, mut w: W) -> Result<()> {
        for r in 0..self.y.nrows() {
            for c in 0..self.y.ncols() {
                let z = self.y[(r, c)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Uniform i.i.d. constellation symbols, `τᵈ×K`.
pub fn draw_data_symbols(cfg: &ScenarioConfig, trial_seed: u64) -> Result<CMat> {
    let c = Constellation::square_qam(cfg.constellation_order)?;
    let mut rng = stream_rng(trial_seed, Stream::DataSymbols);
    let mut d = CMat::zeros(cfg.data_len, cfg.num_ues);
    // Column-major fill keeps each UE's sequence contiguous in the stream.
    for k in 0..cfg.num_ues {
        for t in 0..cfg.data_len {
            d[(t, k)] = c.random_symbol(&mut rng);
        }
    }
    Ok(d)
}

/// `Y = Σ_k √ρ_k h_k s_kᴴ + Z`, with `Z` built from interferer symbols and
/// AWGN drawn on the phase-specific stream.
pub fn synthesize(
    phase: Phase,
    cfg: &ScenarioConfig,
    chan: &ChannelRealization,
    symbols: &CMat,
    trial_seed: u64,
) -> Result<SignalBlock> {
    let expected_len = match phase {
        Phase::Pilot => cfg.pilot_len,
        Phase::Data => cfg.data_len,
    };
    let n = chan.h.nrows();
    let k = chan.num_ues();
    if symbols.nrows() != expected_len || symbols.ncols() != k {
        return Err(dim_err(
            "synthesize symbols",
            format!("{expected_len}x{k}"),
            format!("{}x{}", symbols.nrows(), symbols.ncols()),
        ));
    }
    let t_len = symbols.nrows();

    let mut hs = chan.h.clone();
    for (ue, &rho) in chan.ue_powers_mw.iter().enumerate() {
        hs.column_mut(ue).scale_mut(rho.sqrt());
    }
    let mut y = &hs * symbols.adjoint();

    let stream = match phase {
        Phase::Pilot => Stream::PilotImpairment,
        Phase::Data => Stream::DataImpairment,
    };
    let mut rng = stream_rng(trial_seed, stream);
    if !chan.interferer_powers_mw.is_empty() {
        let qam = Constellation::square_qam(cfg.constellation_order)?;
        let j = chan.interferer_powers_mw.len();
        let mut x = CMat::zeros(t_len, j);
        for idx in 0..j {
            for t in 0..t_len {
                x[(t, idx)] = if cfg.interferer_gaussian {
                    complex_normal(&mut rng, 1.0)
                } else {
                    qam.random_symbol(&mut rng)
                };
            }
        }
        let mut gs = chan.interferer_channels.clone();
        for (idx, &rho) in chan.interferer_powers_mw.iter().enumerate() {
            gs.column_mut(idx).scale_mut(rho.sqrt());
        }
        y += &gs * x.adjoint();
    }
    for t in 0..t_len {
        for a in 0..n {
            y[(a, t)] += complex_normal(&mut rng, chan.noise_mw);
        }
    }

    Ok(SignalBlock {
        y,
        truth: symbols.clone(),
        phase,
    })
}
