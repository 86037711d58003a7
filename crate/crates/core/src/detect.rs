//! Minimum-distance decisions, symbol error counting, and the sample MSE
//! between soft estimates and hard decisions.

use num_complex::Complex64;

use crate::airframe::{Constellation, PilotMatrix, SignalBlock};
use crate::combine::pilot_projection;
use crate::linalg::re_trace_product;
use crate::regcov::{apply_r_inverse, ShrinkagePrep};
use crate::{error::dim_err, CMat, Result};

/// Index of the closest constellation point; ties go to the lowest index.
pub fn nearest_index(z: Complex64, c: &Constellation) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in c.points().iter().enumerate() {
        let d = (z - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Elementwise nearest-point mapping. Because the candidate set is a
/// product set, this is also the joint sequence argmin.
pub fn hard_decide(soft: &[Complex64], c: &Constellation) -> Vec<Complex64> {
    soft.iter().map(|&z| c.points()[nearest_index(z, c)]).collect()
}

pub fn hard_decide_matrix(soft: &CMat, c: &Constellation) -> CMat {
    soft.map(|z| c.points()[nearest_index(z, c)])
}

/// Exact symbol-error bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolErrors {
    pub errors_per_ue: Vec<u64>,
    pub symbols_per_ue: u64,
}

impl SymbolErrors {
    pub fn errors(&self) -> u64 {
        self.errors_per_ue.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.symbols_per_ue * self.errors_per_ue.len() as u64
    }

    /// Pooled over UEs.
    pub fn ser(&self) -> f64 {
        self.errors() as f64 / self.total() as f64
    }

    pub fn ser_per_ue(&self) -> Vec<f64> {
        self.errors_per_ue
            .iter()
            .map(|&e| e as f64 / self.symbols_per_ue as f64)
            .collect()
    }
}

pub fn ser(hard: &CMat, truth: &CMat) -> Result<SymbolErrors> {
    if hard.shape() != truth.shape() {
        return Err(dim_err(
            "ser",
            format!("{}x{}", truth.nrows(), truth.ncols()),
            format!("{}x{}", hard.nrows(), hard.ncols()),
        ));
    }
    let errors_per_ue = (0..hard.ncols())
        .map(|k| {
            hard.column(k)
                .iter()
                .zip(truth.column(k).iter())
                .filter(|(a, b)| a != b)
                .count() as u64
        })
        .collect();
    Ok(SymbolErrors {
        errors_per_ue,
        symbols_per_ue: hard.nrows() as u64,
    })
}

/// `(1/(Kτᵈ))·‖soft − hard‖²_F`, the residual-sum form.
pub fn sample_mse(soft: &CMat, hard: &CMat) -> Result<f64> {
    if soft.shape() != hard.shape() {
        return Err(dim_err(
            "sample_mse",
            format!("{}x{}", soft.nrows(), soft.ncols()),
            format!("{}x{}", hard.nrows(), hard.ncols()),
        ));
    }
    let n = (soft.nrows() * soft.ncols()).max(1) as f64;
    Ok(soft
        .iter()
        .zip(hard.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n)
}

/// Sample MSE of combiner `W` on data `Yᵈ` against decisions `D̄` (`τᵈ×K`).
pub fn sample_mse_with_combiner(data: &CMat, w: &CMat, hard: &CMat) -> Result<f64> {
    let soft = crate::combine::soft_estimates(data, w)?;
    sample_mse(&soft, hard)
}

/// Expanded trace form of the sample MSE:
///
/// `(1/(Kτᵈ))·tr( PᴴYᵖᴴR⁻¹YᵈYᵈᴴR⁻¹YᵖP/τᵖ² − 2·Re[PᴴYᵖᴴR⁻¹YᵈD̄]/τᵖ + D̄ᴴD̄ )`
///
/// with `D̄` stacked as `τᵈ×K` (column `k` holds `d̄_k`).
pub fn sample_mse_trace(
    prep: &ShrinkagePrep,
    pilot: &SignalBlock,
    pilots: &PilotMatrix,
    data: &CMat,
    hard: &CMat,
    alpha: f64,
) -> Result<f64> {
    let tp = pilots.len() as f64;
    let k = pilots.num_ues();
    let td = data.ncols();
    if hard.shape() != (td, k) {
        return Err(dim_err("decision matrix", format!("{td}x{k}"), format!("{}x{}", hard.nrows(), hard.ncols())));
    }
    let yp_p = pilot_projection(pilot, pilots)?;
    let a = yp_p.adjoint();
    let rinv_yd = apply_r_inverse(prep, alpha, data)?;
    let rinv_ypp = apply_r_inverse(prep, alpha, &yp_p)?;
    let a_rinv_yd = &a * &rinv_yd;
    let quad = re_trace_product(&(&a_rinv_yd * data.adjoint()), &rinv_ypp) / (tp * tp);
    let cross = re_trace_product(&a_rinv_yd, hard) / tp;
    let energy: f64 = hard.iter().map(|z| z.norm_sqr()).sum();
    Ok((quad - 2.0 * cross + energy) / (k * td) as f64)
}

/// Soft values, decisions and their diagnostics for one combiner.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub soft: CMat,
    pub hard: CMat,
    pub errors: SymbolErrors,
    pub sample_mse: f64,
}

pub fn detect(soft: CMat, truth: &CMat, c: &Constellation) -> Result<DetectionResult> {
    let hard = hard_decide_matrix(&soft, c);
    let errors = ser(&hard, truth)?;
    let sample_mse = sample_mse(&soft, &hard)?;
    Ok(DetectionResult {
        soft,
        hard,
        errors,
        sample_mse,
    })
}
