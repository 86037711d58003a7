//! Direct-estimate (pilot LS) combiners, the perfect-CSI baseline, and
//! soft symbol estimates `(Yᵈ)ᴴw_k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airframe::{PilotMatrix, SignalBlock};
use crate::regcov::{apply_r_inverse, ShrinkagePrep};
use crate::scenario::ChannelRealization;
use crate::{error::dim_err, CMat, CVec, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerfectCsiKind {
    /// `w_k = √ρ_k (HΩ_ρHᴴ + Ψ)⁻¹ h_k`.
    #[default]
    Mmse,
    /// `W = HΩ^{1/2}(Ω^{1/2}HᴴHΩ^{1/2} + σ²I)⁻¹`, ignores interference.
    Rzf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombinerKind {
    DirectEstimate,
    PerfectCsi(PerfectCsiKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinerSet {
    /// `BM×K`, column `k` is `w_k`.
    pub w: CMat,
    pub kind: CombinerKind,
    pub alpha: Option<f64>,
}

/// `W = R(α)⁻¹YᵖP / τᵖ`. At `α = 0` this is the plain LS solution.
pub fn direct_estimate(
    prep: &ShrinkagePrep,
    pilot: &SignalBlock,
    pilots: &PilotMatrix,
    alpha: f64,
) -> Result<CombinerSet> {
    let yp_p = pilot_projection(pilot, pilots)?;
    let mut w = apply_r_inverse(prep, alpha, &yp_p)?;
    w.unscale_mut(pilots.len() as f64);
    Ok(CombinerSet {
        w,
        kind: CombinerKind::DirectEstimate,
        alpha: Some(alpha),
    })
}

/// `YᵖP`, the cross-correlation of the received pilots with the known pilots.
pub fn pilot_projection(pilot: &SignalBlock, pilots: &PilotMatrix) -> Result<CMat> {
    if pilot.y.ncols() != pilots.len() {
        return Err(dim_err("pilot block length", pilots.len(), pilot.y.ncols()));
    }
    Ok(&pilot.y * pilots.matrix())
}

pub fn perfect_csi_combiner(chan: &ChannelRealization, kind: PerfectCsiKind) -> Result<CombinerSet> {
    let mut h_scaled = chan.h.clone();
    for (k, &rho) in chan.ue_powers_mw.iter().enumerate() {
        h_scaled.column_mut(k).scale_mut(rho.sqrt());
    }
    let w = match kind {
        PerfectCsiKind::Mmse => {
            let c = chan.true_covariance();
            let chol = c
                .cholesky()
                .ok_or(Error::Singular("true covariance is not positive definite"))?;
            chol.solve(&h_scaled)
        }
        PerfectCsiKind::Rzf => {
            let k = h_scaled.ncols();
            let mut g = h_scaled.adjoint() * &h_scaled;
            for i in 0..k {
                g[(i, i)] += Complex64::new(chan.noise_mw, 0.0);
            }
            let inv = g
                .try_inverse()
                .ok_or(Error::Singular("regularised Gram matrix"))?;
            &h_scaled * inv
        }
    };
    Ok(CombinerSet {
        w,
        kind: CombinerKind::PerfectCsi(kind),
        alpha: None,
    })
}

/// `d̂_k = (Yᵈ)ᴴ w_k`.
pub fn soft_estimate(data: &CMat, w_k: &CVec) -> Result<CVec> {
    if data.nrows() != w_k.len() {
        return Err(dim_err("soft_estimate", data.nrows(), w_k.len()));
    }
    Ok(data.adjoint() * w_k)
}

/// Soft estimates for all UEs at once, `τᵈ×K`.
pub fn soft_estimates(data: &CMat, w: &CMat) -> Result<CMat> {
    if data.nrows() != w.nrows() {
        return Err(dim_err("soft_estimates", data.nrows(), w.nrows()));
    }
    Ok(data.adjoint() * w)
}

/// Post-combining SINR of UE `k` for combiner `w_k` on a known realization.
pub fn sinr(chan: &ChannelRealization, w: &CMat, k: usize) -> f64 {
    let wk = w.column(k);
    let mut signal = 0.0;
    let mut interf = 0.0;
    for (j, &rho) in chan.ue_powers_mw.iter().enumerate() {
        let g = (wk.adjoint() * chan.h.column(j))[(0, 0)].norm_sqr() * rho;
        if j == k {
            signal = g;
        } else {
            interf += g;
        }
    }
    let noise = (wk.adjoint() * &chan.psi * wk)[(0, 0)].re;
    signal / (interf + noise)
}
