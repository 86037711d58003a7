//! Iterative fit of the shrinkage coefficient from hard decisions, and the
//! genie grid search used as its benchmark.
//!
//! The sample MSE at fixed decisions `D̄` is
//!
//! `ε(α) = ‖(Yᵈ)ᴴW(α) − D̄‖²_F / (Kτᵈ)`,  `W(α) = R(α)⁻¹YᵖP/τᵖ`,
//!
//! and its derivative is
//!
//! `∂ε/∂α = −(2/(Kτᵈ))·Re tr( PᴴYᵖᴴR⁻¹SR⁻¹Yᵈ·( YᵈᴴR⁻¹YᵖP/τᵖ² − D̄/τᵖ ) )`.
//!
//! In the eigenbasis of `Q` the soft estimates are a weighted sum of `BM`
//! fixed rank-one terms with weights `1/r_i(α)`, so after an `O(BM²·(τᵈ+K))`
//! precomputation both `ε` and `∂ε/∂α` cost `O(BM²)` per evaluation.
//! [`MseSurface`] implements that; [`DenseMse`] recomputes everything with a
//! dense inverse and serves as the reference path.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index;

use crate::airframe::{Constellation, PilotMatrix, SignalBlock};
use crate::combine::{pilot_projection, soft_estimates};
use crate::detect::{hard_decide_matrix, sample_mse, ser};
use crate::linalg::{dense_inverse, re_trace_product};
use crate::regcov::{apply_r_inverse, r_of_alpha, ShrinkagePrep};
use crate::seed::{stream_rng, Stream};
use crate::{error::dim_err, CMat, Error, Result};

/// Lower bound on `α` used when `R(0) = Q` is singular.
pub const SINGULAR_ALPHA_FLOOR: f64 = 1e-6;

/// Analytic `∂ε/∂α` at fixed decisions `hard` (`τᵈ×K`), evaluated with
/// explicit matrix products through the eigen-cached inverse.
pub fn mse_gradient(
    prep: &ShrinkagePrep,
    pilot: &SignalBlock,
    pilots: &PilotMatrix,
    data: &CMat,
    hard: &CMat,
    alpha: f64,
) -> Result<f64> {
    let k = pilots.num_ues();
    let td = data.ncols();
    if hard.shape() != (td, k) {
        return Err(dim_err("decision matrix", format!("{td}x{k}"), format!("{}x{}", hard.nrows(), hard.ncols())));
    }
    if prep.is_degenerate() {
        // R(α) does not depend on α.
        prep.r_eigvals(alpha)?;
        return Ok(0.0);
    }
    let tp = pilots.len() as f64;
    let yp_p = pilot_projection(pilot, pilots)?;
    let rinv_ypp = apply_r_inverse(prep, alpha, &yp_p)?;
    let rinv_yd = apply_r_inverse(prep, alpha, data)?;
    let rsr_yd = apply_r_inverse(prep, alpha, &(&prep.s * &rinv_yd))?;
    let left = yp_p.adjoint() * rsr_yd;
    let mut inner = data.adjoint() * rinv_ypp;
    inner.unscale_mut(tp * tp);
    inner -= hard.unscale(tp);
    Ok(-2.0 / (k * td) as f64 * re_trace_product(&left, &inner))
}

/// Evaluator of soft estimates, `ε` and `∂ε/∂α` along the shrinkage path.
pub trait MseEvaluator {
    /// Per-decision-matrix cache.
    type Target;

    fn data_len(&self) -> usize;
    fn num_ues(&self) -> usize;
    /// Whether `R(0)` can be inverted.
    fn zero_admissible(&self) -> bool;
    fn soft(&self, alpha: f64) -> Result<CMat>;
    fn target(&self, hard: &CMat) -> Result<Self::Target>;
    fn eps(&self, alpha: f64, target: &Self::Target) -> Result<f64>;
    fn grad(&self, alpha: f64, target: &Self::Target) -> Result<f64>;
    /// Gradient using only the data columns in `cols`.
    fn grad_subset(&self, alpha: f64, hard: &CMat, cols: &[usize]) -> Result<f64>;
}

/// Eigenbasis-cached evaluator.
#[derive(Debug, Clone)]
pub struct MseSurface {
    lambda: Vec<f64>,
    s: Vec<f64>,
    trace_over_dim: f64,
    tol: f64,
    /// `UᴴYᵖP`, `BM×K`.
    a: CMat,
    /// `UᴴYᵈ`, `BM×τᵈ`.
    b: CMat,
    /// `G_ij = Re[(BBᴴ)_ji (AAᴴ)_ij] / τᵖ²`.
    gram: DMatrix<f64>,
    tau_p: f64,
    k: usize,
    td: usize,
}

/// Linear term and constant of `ε` for a fixed decision matrix.
#[derive(Debug, Clone)]
pub struct SurfaceTarget {
    lin: Vec<f64>,
    energy: f64,
}

impl MseSurface {
    pub fn new(prep: &ShrinkagePrep, pilot: &SignalBlock, pilots: &PilotMatrix, data: &CMat) -> Result<Self> {
        if data.nrows() != prep.dim() {
            return Err(dim_err("data block rows", prep.dim(), data.nrows()));
        }
        let yp_p = pilot_projection(pilot, pilots)?;
        let uh = prep.eigvecs.adjoint();
        let a = &uh * yp_p;
        let b = &uh * data;
        let tau_p = pilots.len() as f64;
        let bb = &b * b.adjoint();
        let aa = &a * a.adjoint();
        let n = prep.dim();
        let gram = DMatrix::from_fn(n, n, |i, j| (bb[(j, i)] * aa[(i, j)]).re / (tau_p * tau_p));
        let s = if prep.is_degenerate() {
            vec![0.0; n]
        } else {
            prep.s_eigvals()
        };
        let lmax = prep.eigvals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        Ok(Self {
            lambda: prep.eigvals.iter().copied().collect(),
            s,
            trace_over_dim: prep.trace_over_dim,
            tol: crate::regcov::SINGULAR_RTOL * lmax.max(prep.trace_over_dim.abs()),
            a,
            b,
            gram,
            tau_p,
            k: pilots.num_ues(),
            td: data.ncols(),
        })
    }

    /// `1/r_i(α)`.
    fn weights(&self, alpha: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let mut out = Vec::with_capacity(self.lambda.len());
        for &l in &self.lambda {
            let r = (1.0 - alpha) * l + alpha * self.trace_over_dim;
            if !(r > self.tol) {
                return Err(Error::SingularShrinkage { min_eig: r, tol: self.tol });
            }
            out.push(1.0 / r);
        }
        Ok(out)
    }

    fn residual_dot(&self, c: &[f64], target: &SurfaceTarget) -> Vec<f64> {
        let n = c.len();
        (0..n)
            .map(|i| {
                let gc: f64 = (0..n).map(|j| self.gram[(i, j)] * c[j]).sum();
                gc - target.lin[i]
            })
            .collect()
    }
}

impl MseEvaluator for MseSurface {
    type Target = SurfaceTarget;

    fn data_len(&self) -> usize {
        self.td
    }

    fn num_ues(&self) -> usize {
        self.k
    }

    fn zero_admissible(&self) -> bool {
        self.weights(0.0).is_ok()
    }

    fn soft(&self, alpha: f64) -> Result<CMat> {
        let c = self.weights(alpha)?;
        let mut ca = self.a.clone();
        for (i, ci) in c.iter().enumerate() {
            ca.row_mut(i).scale_mut(ci / self.tau_p);
        }
        Ok(self.b.adjoint() * ca)
    }

    fn target(&self, hard: &CMat) -> Result<SurfaceTarget> {
        if hard.shape() != (self.td, self.k) {
            return Err(dim_err("decision matrix", format!("{}x{}", self.td, self.k), format!("{}x{}", hard.nrows(), hard.ncols())));
        }
        let f = &self.b * hard;
        let lin = (0..self.a.nrows())
            .map(|i| {
                (0..self.k)
                    .map(|kk| (self.a[(i, kk)] * f[(i, kk)].conj()).re)
                    .sum::<f64>()
                    / self.tau_p
            })
            .collect();
        let energy = hard.iter().map(|z| z.norm_sqr()).sum();
        Ok(SurfaceTarget { lin, energy })
    }

    fn eps(&self, alpha: f64, target: &SurfaceTarget) -> Result<f64> {
        let c = self.weights(alpha)?;
        let r = self.residual_dot(&c, target);
        // cᵀGc − 2cᵀL = cᵀ(Gc − L) − cᵀL
        let val: f64 = c
            .iter()
            .zip(r.iter().zip(&target.lin))
            .map(|(ci, (ri, li))| ci * (ri - li))
            .sum::<f64>()
            + target.energy;
        Ok(val.max(0.0) / (self.k * self.td) as f64)
    }

    fn grad(&self, alpha: f64, target: &SurfaceTarget) -> Result<f64> {
        let c = self.weights(alpha)?;
        let r = self.residual_dot(&c, target);
        let g: f64 = (0..c.len()).map(|i| r[i] * (-self.s[i] * c[i] * c[i])).sum();
        Ok(2.0 * g / (self.k * self.td) as f64)
    }

    fn grad_subset(&self, alpha: f64, hard: &CMat, cols: &[usize]) -> Result<f64> {
        let c = self.weights(alpha)?;
        let n = c.len();
        let mut acc = 0.0;
        for &col in cols {
            for kk in 0..self.k {
                let mut soft = Complex64::new(0.0, 0.0);
                let mut dsoft = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let t = self.b[(i, col)].conj() * self.a[(i, kk)];
                    soft += t * c[i];
                    dsoft -= t * (self.s[i] * c[i] * c[i]);
                }
                let resid = soft / self.tau_p - hard[(col, kk)];
                acc += (resid.conj() * dsoft / self.tau_p).re;
            }
        }
        Ok(2.0 * acc / (self.k * cols.len().max(1)) as f64)
    }
}

/// Reference evaluator: dense inverse of `R(α)` on every call.
#[derive(Debug, Clone)]
pub struct DenseMse<'a> {
    prep: &'a ShrinkagePrep,
    pilot: &'a SignalBlock,
    pilots: &'a PilotMatrix,
    data: &'a CMat,
}

impl<'a> DenseMse<'a> {
    pub fn new(prep: &'a ShrinkagePrep, pilot: &'a SignalBlock, pilots: &'a PilotMatrix, data: &'a CMat) -> Self {
        Self { prep, pilot, pilots, data }
    }

    fn r_inv(&self, alpha: f64) -> Result<CMat> {
        self.prep.r_eigvals(alpha)?;
        dense_inverse(&r_of_alpha(self.prep, alpha)?).ok_or(Error::Singular("R(alpha)"))
    }

    fn combiner(&self, alpha: f64) -> Result<CMat> {
        let w = self.r_inv(alpha)? * pilot_projection(self.pilot, self.pilots)?;
        Ok(w.unscale(self.pilots.len() as f64))
    }
}

impl MseEvaluator for DenseMse<'_> {
    type Target = CMat;

    fn data_len(&self) -> usize {
        self.data.ncols()
    }

    fn num_ues(&self) -> usize {
        self.pilots.num_ues()
    }

    fn zero_admissible(&self) -> bool {
        self.prep.q_invertible()
    }

    fn soft(&self, alpha: f64) -> Result<CMat> {
        soft_estimates(self.data, &self.combiner(alpha)?)
    }

    fn target(&self, hard: &CMat) -> Result<CMat> {
        Ok(hard.clone())
    }

    fn eps(&self, alpha: f64, hard: &CMat) -> Result<f64> {
        sample_mse(&self.soft(alpha)?, hard)
    }

    fn grad(&self, alpha: f64, hard: &CMat) -> Result<f64> {
        if self.prep.is_degenerate() {
            return Ok(0.0);
        }
        let rinv = self.r_inv(alpha)?;
        let tp = self.pilots.len() as f64;
        let ypp = pilot_projection(self.pilot, self.pilots)?;
        let left = ypp.adjoint() * &rinv * &self.prep.s * &rinv * self.data;
        let inner = (self.data.adjoint() * &rinv * &ypp).unscale(tp * tp) - hard.unscale(tp);
        Ok(-2.0 / (self.num_ues() * self.data_len()) as f64 * re_trace_product(&left, &inner))
    }

    fn grad_subset(&self, alpha: f64, hard: &CMat, cols: &[usize]) -> Result<f64> {
        let sub = CMat::from_fn(self.data.nrows(), cols.len(), |r, c| self.data[(r, cols[c])]);
        let hsub = CMat::from_fn(cols.len(), hard.ncols(), |r, c| hard[(cols[r], c)]);
        DenseMse::new(self.prep, self.pilot, self.pilots, &sub).grad(alpha, &hsub)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Start from a move of `initial_move` in `α` and halve until `ε`
    /// decreases at fixed decisions.
    Backtracking { initial_move: f64, max_halvings: u32 },
    Fixed { beta: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Backtracking {
            initial_move: 0.1,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol_alpha: f64,
    pub step: StepPolicy,
    /// Data columns per stochastic gradient; `None` uses all of them.
    pub gradient_subset: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol_alpha: 1e-4,
            step: StepPolicy::default(),
            gradient_subset: None,
        }
    }
}

/// Trajectory of one iterative fit. Entry `i` describes iteration `i+1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitState {
    /// `α` after each update.
    pub alphas: Vec<f64>,
    /// `ε` at the accepted `α`, with that iteration's decisions.
    pub eps: Vec<f64>,
    /// `ε` where the gradient was taken.
    pub eps_start: Vec<f64>,
    pub grads: Vec<f64>,
    pub betas: Vec<f64>,
    /// `ε` at every line-search candidate.
    pub line_search: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub clamp_events: usize,
    /// Lower bound on `α` (0, or [`SINGULAR_ALPHA_FLOOR`] if `R(0)` is singular).
    pub alpha_min: f64,
}

impl FitState {
    /// CSV with `iteration,alpha,epsilon,beta_used`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "alpha", "epsilon", "beta_used"])?;
        for i in 0..self.alphas.len() {
            wr.write_record([
                (i + 1).to_string(),
                self.alphas[i].to_string(),
                self.eps[i].to_string(),
                self.betas[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Iterative fit over any evaluator, starting from `α = 0`.
///
/// Each iteration recomputes the soft estimates and decisions at the
/// current `α`, takes the gradient at fixed decisions, and moves against
/// it. `subset_seed` drives the column sampling of the stochastic variant.
pub fn fit_with<E: MseEvaluator>(
    eval: &E,
    constellation: &Constellation,
    opts: &FitOptions,
    subset_seed: u64,
) -> Result<(f64, FitState)> {
    let alpha_min = if eval.zero_admissible() { 0.0 } else { SINGULAR_ALPHA_FLOOR };
    let mut state = FitState {
        alpha_min,
        ..FitState::default()
    };
    let mut alpha = alpha_min;
    let mut rng = stream_rng(subset_seed, Stream::GradientSubset);
    let td = eval.data_len();

    for it in 1..=opts.max_iters {
        let soft = eval.soft(alpha)?;
        let hard = hard_decide_matrix(&soft, constellation);
        let target = eval.target(&hard)?;
        let g = match opts.gradient_subset {
            Some(m) if m < td => {
                let mut cols = index::sample(&mut rng, td, m.max(1)).into_vec();
                cols.sort_unstable();
                eval.grad_subset(alpha, &hard, &cols)?
            }
            _ => eval.grad(alpha, &target)?,
        };
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { iteration: it, alpha });
        }
        let eps0 = eval.eps(alpha, &target)?;
        let project = |a: f64, clamps: &mut usize| {
            let c = a.clamp(alpha_min, 1.0);
            if c != a {
                *clamps += 1;
            }
            c
        };

        let mut trace = Vec::new();
        let (next, eps_next, beta_used) = match opts.step {
            _ if g == 0.0 => (alpha, eps0, 0.0),
            StepPolicy::Fixed { beta } => {
                let cand = project(alpha - beta * g, &mut state.clamp_events);
                let e = eval.eps(cand, &target)?;
                trace.push(e);
                (cand, e, beta)
            }
            StepPolicy::Backtracking { initial_move, max_halvings } => {
                let mut beta = initial_move / (g.abs() + 1e-12);
                let mut accepted = None;
                for _ in 0..=max_halvings {
                    let raw = alpha - beta * g;
                    let cand = raw.clamp(alpha_min, 1.0);
                    let e = eval.eps(cand, &target)?;
                    trace.push(e);
                    if e < eps0 {
                        if cand != raw {
                            state.clamp_events += 1;
                        }
                        accepted = Some((cand, e, beta));
                        break;
                    }
                    beta *= 0.5;
                }
                accepted.unwrap_or((alpha, eps0, 0.0))
            }
        };

        state.alphas.push(next);
        state.eps.push(eps_next);
        state.eps_start.push(eps0);
        state.grads.push(g);
        state.betas.push(beta_used);
        state.line_search.push(trace);
        state.iterations = it;
        let delta = next - alpha;
        alpha = next;
        if delta.abs() < opts.tol_alpha {
            state.converged = true;
            break;
        }
    }
    Ok((alpha, state))
}

/// Iterative fit using the eigen-cached surface.
pub fn fit_iterative(
    prep: &ShrinkagePrep,
    pilot: &SignalBlock,
    pilots: &PilotMatrix,
    data: &CMat,
    constellation: &Constellation,
    opts: &FitOptions,
    subset_seed: u64,
) -> Result<(f64, FitState)> {
    let surface = MseSurface::new(prep, pilot, pilots, data)?;
    fit_with(&surface, constellation, opts, subset_seed)
}

/// What the genie grid search minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenieObjective {
    /// Sample MSE against the transmitted symbols.
    #[default]
    Mse,
    /// Symbol errors against the transmitted symbols.
    Ser,
}

/// Minimises `f` over `{0, δ, 2δ, …, 1}`; `None` values are skipped and
/// ties keep the smallest `α`. Returns `(α, f(α))`.
pub fn grid_argmin(step: f64, mut f: impl FnMut(f64) -> Result<Option<f64>>) -> Result<Option<(f64, f64)>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=n {
        let a = i as f64 / n as f64;
        if let Some(v) = f(a)? {
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((a, v));
            }
        }
    }
    Ok(best)
}

/// Genie benchmark: grid search of `α` with the true symbols in place of
/// the decisions. Grid points where `R(α)` is singular are skipped.
pub fn fit_exhaustive_genie(
    surface: &MseSurface,
    truth: &CMat,
    step: f64,
    objective: GenieObjective,
    constellation: &Constellation,
) -> Result<f64> {
    let target = surface.target(truth)?;
    let best = grid_argmin(step, |a| {
        let r = match objective {
            GenieObjective::Mse => surface.eps(a, &target),
            GenieObjective::Ser => surface
                .soft(a)
                .and_then(|s| ser(&hard_decide_matrix(&s, constellation), truth))
                .map(|e| e.errors() as f64),
        };
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingularShrinkage { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })?;
    best.map(|(a, _)| a)
        .ok_or(Error::Singular("R(alpha) singular on every grid point"))
}
