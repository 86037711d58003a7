//! Sample covariance of the pilot block, the shrinkage family
//! `R(α) = (1−α)Q + α·tr(Q)/(BM)·I`, its eigen-cached inverse, and the
//! closed-form shrinkage coefficients.
//!
//! `R(α)` shares the eigenvectors of `Q` for every `α`, so one
//! decomposition per trial serves every inverse: only the eigenvalues
//! `(1−α)λ_i + α·tr(Q)/(BM)` move.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::airframe::{Phase, SignalBlock};
use crate::linalg::{all_finite, frobenius, hermitian_eigen, re_trace_product, sample_covariance};
use crate::scenario::ChannelRealization;
use crate::{error::dim_err, CMat, Error, Result};

/// Eigenvalues of `R(α)` at or below `SINGULAR_RTOL · λ_max(Q)` are
/// treated as zero.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Cached quantities derived once from the pilot block.
#[derive(Debug, Clone)]
pub struct ShrinkagePrep {
    /// `Q = Yᵖ(Yᵖ)ᴴ/τᵖ`.
    pub q: CMat,
    /// `S = tr(Q)/(BM)·I − Q`.
    pub s: CMat,
    pub eigvecs: CMat,
    /// Eigenvalues of `Q`, ascending.
    pub eigvals: DVector<f64>,
    pub trace_over_dim: f64,
    /// `tr(SSᴴ)`.
    pub s_energy: f64,
}

impl ShrinkagePrep {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Eigenvalues of `S` in the eigenbasis of `Q`.
    pub fn s_eigvals(&self) -> Vec<f64> {
        self.eigvals
            .iter()
            .map(|&l| self.trace_over_dim - l)
            .collect()
    }

    /// Below this `tr(SSᴴ)` the shrinkage direction is treated as zero.
    pub fn degenerate_threshold(&self) -> f64 {
        1e-12 * self.trace_over_dim.powi(2) * self.dim() as f64
    }

    pub fn is_degenerate(&self) -> bool {
        self.s_energy <= self.degenerate_threshold()
    }

    fn singular_tol(&self) -> f64 {
        let lmax = self.eigvals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        SINGULAR_RTOL * lmax.max(self.trace_over_dim.abs())
    }

    /// Eigenvalues of `R(α)`; fails if any is numerically zero.
    pub fn r_eigvals(&self, alpha: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        let r: Vec<f64> = self
            .eigvals
            .iter()
            .map(|&l| (1.0 - alpha) * l + alpha * self.trace_over_dim)
            .collect();
        let tol = self.singular_tol();
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > tol) {
            return Err(Error::SingularShrinkage { min_eig: min, tol });
        }
        Ok(r)
    }

    /// Whether `R(0) = Q` is invertible under the singularity tolerance.
    pub fn q_invertible(&self) -> bool {
        self.r_eigvals(0.0).is_ok()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

pub fn build_prep(pilot: &SignalBlock) -> Result<ShrinkagePrep> {
    if pilot.phase != Phase::Pilot {
        return Err(Error::Config("shrinkage prep requires a pilot block".into()));
    }
    if !all_finite(&pilot.y) {
        return Err(Error::NonFinite("pilot block"));
    }
    prep_from_covariance(sample_covariance(&pilot.y))
}

/// Builds the cache from an explicit Hermitian sample covariance.
pub fn prep_from_covariance(q: CMat) -> Result<ShrinkagePrep> {
    if q.nrows() != q.ncols() || q.nrows() == 0 {
        return Err(dim_err("sample covariance", "square", format!("{}x{}", q.nrows(), q.ncols())));
    }
    if !all_finite(&q) {
        return Err(Error::NonFinite("sample covariance"));
    }
    let n = q.nrows();
    let trace_over_dim = q.diagonal().iter().map(|z| z.re).sum::<f64>() / n as f64;
    let mut s = -q.clone();
    for i in 0..n {
        s[(i, i)] += Complex64::new(trace_over_dim, 0.0);
    }
    let s_energy = frobenius(&s).powi(2);
    let (eigvecs, eigvals) = hermitian_eigen(&q);
    Ok(ShrinkagePrep {
        q,
        s,
        eigvecs,
        eigvals,
        trace_over_dim,
        s_energy,
    })
}

/// `(1−α)Q + α·tr(Q)/(BM)·I`.
pub fn r_of_alpha(prep: &ShrinkagePrep, alpha: f64) -> Result<CMat> {
    check_alpha(alpha)?;
    let n = prep.dim();
    let mut r = prep.q.scale(1.0 - alpha);
    for i in 0..n {
        r[(i, i)] += Complex64::new(alpha * prep.trace_over_dim, 0.0);
    }
    Ok(r)
}

/// `R(α)⁻¹X` through the cached eigenbasis.
pub fn apply_r_inverse(prep: &ShrinkagePrep, alpha: f64, x: &CMat) -> Result<CMat> {
    if x.nrows() != prep.dim() {
        return Err(dim_err("apply_r_inverse", prep.dim(), x.nrows()));
    }
    let r = prep.r_eigvals(alpha)?;
    let mut t = prep.eigvecs.adjoint() * x;
    for (i, ri) in r.iter().enumerate() {
        t.row_mut(i).unscale_mut(*ri);
    }
    Ok(&prep.eigvecs * t)
}

/// A closed-form shrinkage coefficient and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    /// Clamped to `[0, 1]`.
    pub alpha: f64,
    /// Unclamped minimiser (0 when degenerate).
    pub raw: f64,
    pub clamped: bool,
    /// `tr(SSᴴ)` below threshold; `alpha` forced to 0.
    pub degenerate: bool,
}

/// Minimiser over `α` of `‖R(α) − C‖²_F`, clamped to `[0, 1]`:
/// `Re tr((C − Q)S) / tr(SSᴴ)`.
pub fn alpha_closed_form(prep: &ShrinkagePrep, target: &CMat) -> Result<AlphaEstimate> {
    if target.shape() != prep.q.shape() {
        return Err(dim_err(
            "shrinkage target",
            format!("{0}x{0}", prep.dim()),
            format!("{}x{}", target.nrows(), target.ncols()),
        ));
    }
    if prep.is_degenerate() {
        return Ok(AlphaEstimate {
            alpha: 0.0,
            raw: 0.0,
            clamped: false,
            degenerate: true,
        });
    }
    let raw = re_trace_product(&(target - &prep.q), &prep.s) / prep.s_energy;
    let alpha = raw.clamp(0.0, 1.0);
    Ok(AlphaEstimate {
        alpha,
        raw,
        clamped: alpha != raw,
        degenerate: false,
    })
}

/// Oracle coefficient against the true covariance `HΩ_ρHᴴ + Ψ`.
pub fn alpha_oracle(prep: &ShrinkagePrep, chan: &ChannelRealization) -> Result<AlphaEstimate> {
    alpha_closed_form(prep, &chan.true_covariance())
}

/// Data-aided coefficient against `Yᵈ(Yᵈ)ᴴ/τᵈ`.
pub fn alpha_from_data(prep: &ShrinkagePrep, data: &SignalBlock) -> Result<AlphaEstimate> {
    if !all_finite(&data.y) {
        return Err(Error::NonFinite("data block"));
    }
    alpha_closed_form(prep, &sample_covariance(&data.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airframe::{draw_data_symbols, make_pilots, synthesize};
    use crate::linalg::{dense_inverse, hermitian_eigen, rel_frobenius, trace};
    use crate::scenario::{draw_channels, ScenarioConfig};

    fn pilot_prep(seed: u64) -> (ShrinkagePrep, SignalBlock, ChannelRealization) {
        let cfg = ScenarioConfig::reference(14.0);
        let ch = draw_channels(&cfg, seed).unwrap();
        let p = make_pilots(cfg.pilot_len, cfg.num_ues).unwrap();
        let blk = synthesize(Phase::Pilot, &cfg, &ch, p.matrix(), seed).unwrap();
        (build_prep(&blk).unwrap(), blk, ch)
    }

    fn isotropic_prep() -> ShrinkagePrep {
        // Rows of a scaled DFT matrix give Q = c·I.
        let p = make_pilots(4, 4).unwrap();
        let blk = SignalBlock {
            y: p.matrix().scale(0.5),
            truth: p.matrix().clone(),
            phase: Phase::Pilot,
        };
        build_prep(&blk).unwrap()
    }

    #[test]
    fn isotropic_case_is_degenerate() {
        let prep = isotropic_prep();
        assert!(frobenius(&prep.s) < 1e-15);
        assert!(prep.s_energy < 1e-28);
        let est = alpha_closed_form(&prep, &(CMat::identity(4, 4) * Complex64::new(3.0, 0.0))).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.alpha, 0.0);
    }

    #[test]
    fn prep_invariants() {
        for seed in 0..10 {
            let (prep, _, _) = pilot_prep(seed);
            assert!(trace(&prep.s).norm() <= 1e-12 * prep.trace_over_dim * 8.0);
            let rec = &prep.eigvecs * crate::linalg::real_diag(prep.eigvals.as_slice()) * prep.eigvecs.adjoint();
            assert!(rel_frobenius(&rec, &prep.q) <= 1e-10);
        }
        let bad = SignalBlock {
            y: CMat::from_element(2, 2, Complex64::new(f64::NAN, 0.0)),
            truth: CMat::zeros(2, 1),
            phase: Phase::Pilot,
        };
        assert!(build_prep(&bad).is_err());
    }

    #[test]
    fn r_of_alpha_endpoints_and_spectrum() {
        let (prep, _, _) = pilot_prep(1);
        assert_eq!(r_of_alpha(&prep, 0.0).unwrap(), prep.q);
        let t = prep.trace_over_dim;
        assert_eq!(r_of_alpha(&prep, 1.0).unwrap(), CMat::identity(8, 8) * Complex64::new(t, 0.0));
        let r = r_of_alpha(&prep, 0.5).unwrap();
        let (_, direct) = hermitian_eigen(&r);
        for (i, &l) in prep.eigvals.iter().enumerate() {
            let expect = 0.5 * l + 0.5 * t;
            assert!((direct[i] - expect).abs() <= 1e-10 * t);
        }
        assert!(matches!(r_of_alpha(&prep, 1.5), Err(Error::AlphaOutOfRange(_))));
        assert!(r_of_alpha(&prep, -0.1).is_err());
    }

    #[test]
    fn inverse_against_dense() {
        let (prep, blk, _) = pilot_prep(2);
        let t = prep.trace_over_dim;
        let x = blk.y.clone();
        let one = apply_r_inverse(&prep, 1.0, &x).unwrap();
        assert!(rel_frobenius(&one, &x.unscale(t)) < 1e-12);
        for alpha in [0.0, 0.2, 0.7] {
            let fast = apply_r_inverse(&prep, alpha, &x).unwrap();
            let r = r_of_alpha(&prep, alpha).unwrap();
            let dense = dense_inverse(&r).unwrap() * &x;
            assert!(rel_frobenius(&fast, &dense) <= 1e-9);
            assert!(rel_frobenius(&(&r * &fast), &x) <= 1e-8);
        }
    }

    #[test]
    fn rank_deficient_q_is_singular_at_zero() {
        // Two samples in four dimensions.
        let y = CMat::from_fn(4, 2, |i, j| Complex64::new((i + j) as f64, (i * j) as f64 + 0.5));
        let blk = SignalBlock {
            y,
            truth: CMat::zeros(2, 1),
            phase: Phase::Pilot,
        };
        let prep = build_prep(&blk).unwrap();
        let x = CMat::identity(4, 4);
        assert!(matches!(
            apply_r_inverse(&prep, 0.0, &x),
            Err(Error::SingularShrinkage { .. })
        ));
        assert!(!prep.q_invertible());
        assert!(apply_r_inverse(&prep, 0.1, &x).is_ok());
    }

    #[test]
    fn oracle_zero_when_q_is_true_covariance() {
        let (_, _, ch) = pilot_prep(3);
        let prep = prep_from_covariance(ch.true_covariance()).unwrap();
        let est = alpha_oracle(&prep, &ch).unwrap();
        assert!(est.raw.abs() < 1e-12);
        assert_eq!(est.alpha, est.raw.max(0.0));
    }

    #[test]
    fn data_alpha_zero_when_covariances_match() {
        let (prep, blk, _) = pilot_prep(4);
        // Reusing the pilot block as "data" makes the two covariances equal.
        let fake = SignalBlock {
            phase: Phase::Data,
            ..blk
        };
        let est = alpha_from_data(&prep, &fake).unwrap();
        assert!(est.raw.abs() < 1e-12);
    }

    fn grid_argmin(prep: &ShrinkagePrep, target: &CMat) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=10_000 {
            let a = i as f64 * 1e-4;
            let r = r_of_alpha(prep, a).unwrap();
            let f = frobenius(&(r - target)).powi(2);
            if f < best.0 {
                best = (f, a);
            }
        }
        best.1
    }

    #[test]
    fn closed_forms_match_grid() {
        for seed in 0..5 {
            let (prep, _, ch) = pilot_prep(seed);
            let o = alpha_oracle(&prep, &ch).unwrap();
            assert!((o.alpha - grid_argmin(&prep, &ch.true_covariance())).abs() <= 1e-4 + 1e-12);
            let cfg = ScenarioConfig::reference(14.0);
            let d = draw_data_symbols(&cfg, seed).unwrap();
            let blk = synthesize(Phase::Data, &cfg, &ch, &d, seed).unwrap();
            let e = alpha_from_data(&prep, &blk).unwrap();
            let c = sample_covariance(&blk.y);
            assert!((e.alpha - grid_argmin(&prep, &c)).abs() <= 1e-4 + 1e-12);
        }
    }

    #[test]
    fn data_alpha_converges_to_oracle() {
        let mut cfg = ScenarioConfig::reference(14.0);
        cfg.data_len = 100_000;
        for seed in 0..3 {
            let ch = draw_channels(&cfg, seed).unwrap();
            let p = make_pilots(cfg.pilot_len, cfg.num_ues).unwrap();
            let prep = build_prep(&synthesize(Phase::Pilot, &cfg, &ch, p.matrix(), seed).unwrap()).unwrap();
            let d = draw_data_symbols(&cfg, seed).unwrap();
            let blk = synthesize(Phase::Data, &cfg, &ch, &d, seed).unwrap();
            let a = alpha_from_data(&prep, &blk).unwrap().alpha;
            let o = alpha_oracle(&prep, &ch).unwrap().alpha;
            assert!((a - o).abs() < 0.02, "seed {seed}: {a} vs {o}");
        }
    }
}
