//! Network geometry, unit conventions and channel realizations.
//!
//! Powers are configured in dBm and converted once to linear milliwatts;
//! everything past [`ScenarioConfig`] works in the linear domain.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::{complex_normal, stream_rng, Stream};
use crate::{CMat, Error, Result};

/// Default spacing between consecutive APs on the x axis, in meters.
pub const DEFAULT_AP_SPACING_M: f64 = 100.0;

/// `10^(p/10)`: dBm to milliwatts (or dB to a linear ratio).
pub fn dbm_to_linear(p_dbm: f64) -> Result<f64> {
    if !p_dbm.is_finite() {
        return Err(Error::NonFinite("power in dBm"));
    }
    Ok(10f64.powf(p_dbm / 10.0))
}

/// Large-scale fading `−30.5 − 36.7·log10(r)` in dB.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Config(format!(
            "distance must be positive and finite, got {distance_m}"
        )));
    }
    Ok(-30.5 - 36.7 * distance_m.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Rejection radius around every AP.
    pub min_ap_distance: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 100.0,
            y_min: -50.0,
            y_max: 50.0,
            min_ap_distance: 10.0,
        }
    }
}

impl Region {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, aps: &[[f64; 2]]) -> Result<[f64; 2]> {
        const MAX_TRIES: usize = 10_000;
        for _ in 0..MAX_TRIES {
            let x = self.x_min + (self.x_max - self.x_min) * rng.random::<f64>();
            let y = self.y_min + (self.y_max - self.y_min) * rng.random::<f64>();
            if aps.iter().all(|a| distance(a, &[x, y]) >= self.min_ap_distance) {
                return Ok([x, y]);
            }
        }
        Err(Error::Config(
            "placement region leaves no room outside the AP exclusion radius".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UePlacement {
    Explicit(Vec<[f64; 2]>),
    Region(Region),
}

impl Default for UePlacement {
    fn default() -> Self {
        UePlacement::Region(Region::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSpec {
    Fixed([f64; 2]),
    /// Drawn per trial from the UE region (or the default region when UEs
    /// are placed explicitly).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererSpec {
    pub position: PositionSpec,
    /// Power relative to the UE transmit power, in dB.
    pub power_offset_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSpec {
    Shared(f64),
    PerUe(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    /// Defaults to APs every 100 m along the x axis starting at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_positions: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub ue_placement: UePlacement,
    pub ue_tx_power_dbm: PowerSpec,
    pub noise_power_dbm: f64,
    pub pilot_len: usize,
    pub data_len: usize,
    #[serde(default)]
    pub interferers: Vec<InterfererSpec>,
    #[serde(default = "default_order")]
    pub constellation_order: usize,
    /// Interferers send circular Gaussian samples instead of constellation
    /// symbols.
    #[serde(default)]
    pub interferer_gaussian: bool,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_order() -> usize {
    4
}

fn distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl ScenarioConfig {
    /// Two 4-antenna APs 100 m apart serving six UEs with QPSK,
    /// `τᵖ = 8`, `τᵈ = 1000`, noise at −95 dBm and no interferer.
    pub fn reference(ue_power_dbm: f64) -> Self {
        Self {
            num_aps: 2,
            antennas_per_ap: 4,
            num_ues: 6,
            ap_positions: None,
            ue_placement: UePlacement::default(),
            ue_tx_power_dbm: PowerSpec::Shared(ue_power_dbm),
            noise_power_dbm: -95.0,
            pilot_len: 8,
            data_len: 1000,
            interferers: Vec::new(),
            constellation_order: 4,
            interferer_gaussian: false,
            master_seed: 1,
        }
    }

    /// Total receive dimension `B·M`.
    pub fn dim(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }

    pub fn ap_positions(&self) -> Vec<[f64; 2]> {
        match &self.ap_positions {
            Some(p) => p.clone(),
            None => (0..self.num_aps)
                .map(|b| [b as f64 * DEFAULT_AP_SPACING_M, 0.0])
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_aps == 0 || self.antennas_per_ap == 0 || self.num_ues == 0 {
            return bad("num_aps, antennas_per_ap and num_ues must be positive".into());
        }
        if self.pilot_len < self.num_ues {
            return bad(format!(
                "pilot_len ({}) must be at least num_ues ({}) for orthogonal pilots",
                self.pilot_len, self.num_ues
            ));
        }
        if self.data_len == 0 {
            return bad("data_len must be positive".into());
        }
        if let Some(p) = &self.ap_positions {
            if p.len() != self.num_aps {
                return bad(format!("{} AP positions for {} APs", p.len(), self.num_aps));
            }
        }
        match &self.ue_placement {
            UePlacement::Explicit(p) if p.len() != self.num_ues => {
                return bad(format!("{} UE positions for {} UEs", p.len(), self.num_ues));
            }
            UePlacement::Region(r) if !(r.x_max > r.x_min && r.y_max > r.y_min) => {
                return bad("empty UE placement region".into());
            }
            _ => {}
        }
        if let PowerSpec::PerUe(p) = &self.ue_tx_power_dbm {
            if p.len() != self.num_ues {
                return bad(format!("{} UE powers for {} UEs", p.len(), self.num_ues));
            }
        }
        for p in self.ue_powers_dbm() {
            dbm_to_linear(p)?;
        }
        dbm_to_linear(self.noise_power_dbm)?;
        for i in &self.interferers {
            dbm_to_linear(i.power_offset_db)?;
        }
        crate::airframe::Constellation::square_qam(self.constellation_order)?;
        Ok(())
    }

    pub fn ue_powers_dbm(&self) -> Vec<f64> {
        match &self.ue_tx_power_dbm {
            PowerSpec::Shared(p) => vec![*p; self.num_ues],
            PowerSpec::PerUe(p) => p.clone(),
        }
    }

    pub fn ue_powers_mw(&self) -> Result<Vec<f64>> {
        self.ue_powers_dbm().into_iter().map(dbm_to_linear).collect()
    }

    pub fn noise_mw(&self) -> Result<f64> {
        dbm_to_linear(self.noise_power_dbm)
    }

    /// Interferer powers are offsets from the mean UE power in dBm.
    pub fn interferer_powers_mw(&self) -> Result<Vec<f64>> {
        let p = self.ue_powers_dbm();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        self.interferers
            .iter()
            .map(|i| dbm_to_linear(mean + i.power_offset_db))
            .collect()
    }
}

/// One draw of all small- and large-scale fading for a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Aggregated channel `H`, `BM×K`; column `k` stacks `h_{b,k}` over APs.
    pub h: CMat,
    /// Interferer channels, `BM×J`.
    pub interferer_channels: CMat,
    /// `ζ_{b,k}` in dB, `B×K`.
    pub link_gains_db: DMatrix<f64>,
    pub interferer_gains_db: DMatrix<f64>,
    /// Covariance of each impairment column: `σ²I + Σ_j ρ_j g_j g_jᴴ`.
    pub psi: CMat,
    pub ue_positions: Vec<[f64; 2]>,
    pub interferer_positions: Vec<[f64; 2]>,
    pub ue_powers_mw: Vec<f64>,
    pub interferer_powers_mw: Vec<f64>,
    pub noise_mw: f64,
}

impl ChannelRealization {
    /// `HΩ_ρHᴴ + Ψ`.
    pub fn true_covariance(&self) -> CMat {
        let mut c = self.psi.clone();
        for (k, &rho) in self.ue_powers_mw.iter().enumerate() {
            add_outer(&mut c, &self.h.column(k).into_owned(), rho);
        }
        c
    }

    pub fn num_ues(&self) -> usize {
        self.h.ncols()
    }
}

/// `m += scale · g gᴴ`, written so that `m` stays exactly Hermitian.
fn add_outer(m: &mut CMat, g: &crate::CVec, scale: f64) {
    let n = g.len();
    for i in 0..n {
        m[(i, i)] += Complex64::new(scale * g[i].norm_sqr(), 0.0);
        for j in (i + 1)..n {
            let v = g[i] * g[j].conj() * scale;
            m[(i, j)] += v;
            m[(j, i)] += v.conj();
        }
    }
}

fn draw_block_channel<R: Rng + ?Sized>(
    rng: &mut R,
    aps: &[[f64; 2]],
    m: usize,
    pos: &[f64; 2],
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let mut coeffs = Vec::with_capacity(aps.len() * m);
    let mut gains = Vec::with_capacity(aps.len());
    for ap in aps {
        let zeta_db = path_loss_db(distance(ap, pos))?;
        let var = dbm_to_linear(zeta_db)?;
        gains.push(zeta_db);
        for _ in 0..m {
            coeffs.push(complex_normal(rng, var));
        }
    }
    Ok((coeffs, gains))
}

/// Draws UE/interferer positions and Rayleigh channels for one trial.
///
/// Every antenna coefficient of `h_{b,k}` is `CN(0, ζ_{b,k})`; the result
/// is a pure function of `(cfg, trial_seed)`.
pub fn draw_channels(cfg: &ScenarioConfig, trial_seed: u64) -> Result<ChannelRealization> {
    cfg.validate()?;
    let aps = cfg.ap_positions();
    let (b, m, k) = (cfg.num_aps, cfg.antennas_per_ap, cfg.num_ues);
    let n = b * m;

    let mut geo = stream_rng(trial_seed, Stream::Geometry);
    let region = match &cfg.ue_placement {
        UePlacement::Region(r) => *r,
        UePlacement::Explicit(_) => Region::default(),
    };
    let ue_positions = match &cfg.ue_placement {
        UePlacement::Explicit(p) => p.clone(),
        UePlacement::Region(r) => (0..k)
            .map(|_| r.sample(&mut geo, &aps))
            .collect::<Result<_>>()?,
    };
    let interferer_positions = cfg
        .interferers
        .iter()
        .map(|i| match &i.position {
            PositionSpec::Fixed(p) => Ok(*p),
            PositionSpec::Random => region.sample(&mut geo, &aps),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream_rng(trial_seed, Stream::Channel);
    let mut h = CMat::zeros(n, k);
    let mut link_gains_db = DMatrix::zeros(b, k);
    for (ue, pos) in ue_positions.iter().enumerate() {
        let (coeffs, gains) = draw_block_channel(&mut rng, &aps, m, pos)?;
        for (i, c) in coeffs.into_iter().enumerate() {
            h[(i, ue)] = c;
        }
        for (ap, g) in gains.into_iter().enumerate() {
            link_gains_db[(ap, ue)] = g;
        }
    }
    let j = interferer_positions.len();
    let mut g = CMat::zeros(n, j);
    let mut interferer_gains_db = DMatrix::zeros(b, j);
    for (idx, pos) in interferer_positions.iter().enumerate() {
        let (coeffs, gains) = draw_block_channel(&mut rng, &aps, m, pos)?;
        for (i, c) in coeffs.into_iter().enumerate() {
            g[(i, idx)] = c;
        }
        for (ap, gdb) in gains.into_iter().enumerate() {
            interferer_gains_db[(ap, idx)] = gdb;
        }
    }

    let noise_mw = cfg.noise_mw()?;
    let interferer_powers_mw = cfg.interferer_powers_mw()?;
    let mut psi = CMat::identity(n, n) * Complex64::new(noise_mw, 0.0);
    for (idx, &rho) in interferer_powers_mw.iter().enumerate() {
        add_outer(&mut psi, &g.column(idx).into_owned(), rho);
    }

    Ok(ChannelRealization {
        h,
        interferer_channels: g,
        link_gains_db,
        interferer_gains_db,
        psi,
        ue_positions,
        interferer_positions,
        ue_powers_mw: cfg.ue_powers_mw()?,
        interferer_powers_mw,
        noise_mw,
    })
}
