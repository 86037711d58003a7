use crate::airframe::{draw_data_symbols, make_pilots, synthesize, Constellation, Phase, PilotMatrix, SignalBlock};
use crate::combine::{direct_estimate, perfect_csi_combiner, soft_estimates};
use crate::detect::{hard_decide_matrix, ser, SymbolErrors};
use crate::regcov::{alpha_from_data, build_prep, ShrinkagePrep};
use crate::scenario::{draw_channels, ChannelRealization, ScenarioConfig};
use crate::seed::trial_seed;
use crate::shrinkfit::{fit_exhaustive_genie, fit_with, FitState, MseSurface, SINGULAR_ALPHA_FLOOR};
use crate::{CMat, Error, Result};

use super::config::{Method, TrialOptions};

/// Draws per trial before a singular method is recorded as failed.
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    /// `None` when the method failed on every attempt.
    pub errors: Option<SymbolErrors>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
    pub clamp_events: usize,
}

impl MethodOutcome {
    fn failed() -> Self {
        Self {
            errors: None,
            alpha: None,
            iterations: None,
            clamp_events: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    /// Extra draws caused by singular `R(0)`.
    pub resamples: u32,
    /// Indexed by [`Method`] order; `None` for methods not requested.
    pub outcomes: [Option<MethodOutcome>; 5],
    pub fit_trace: Option<FitState>,
}

impl TrialOutcome {
    pub fn get(&self, m: Method) -> Option<&MethodOutcome> {
        self.outcomes[m.index()].as_ref()
    }

    pub fn errors(&self, m: Method) -> Option<u64> {
        self.get(m).and_then(|o| o.errors.as_ref()).map(|e| e.errors())
    }
}

/// Everything every method of one trial consumes.
#[derive(Debug, Clone)]
pub struct TrialBlocks {
    pub seed: u64,
    pub channel: ChannelRealization,
    pub pilots: PilotMatrix,
    pub pilot: SignalBlock,
    pub data: SignalBlock,
}

impl TrialBlocks {
    pub fn draw(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        let channel = draw_channels(cfg, seed)?;
        let pilots = make_pilots(cfg.pilot_len, cfg.num_ues)?;
        let pilot = synthesize(Phase::Pilot, cfg, &channel, pilots.matrix(), seed)?;
        let symbols = draw_data_symbols(cfg, seed)?;
        let data = synthesize(Phase::Data, cfg, &channel, &symbols, seed)?;
        Ok(Self {
            seed,
            channel,
            pilots,
            pilot,
            data,
        })
    }
}

fn is_singular(e: &Error) -> bool {
    matches!(e, Error::SingularShrinkage { .. } | Error::Singular(_))
}

struct Shared<'a> {
    blocks: &'a TrialBlocks,
    prep: ShrinkagePrep,
    surface: MseSurface,
    constellation: &'a Constellation,
}

impl Shared<'_> {
    fn alpha_floor(&self) -> f64 {
        if self.prep.q_invertible() {
            0.0
        } else {
            SINGULAR_ALPHA_FLOOR
        }
    }

    fn errors_at(&self, alpha: f64) -> Result<SymbolErrors> {
        let b = self.blocks;
        let w = direct_estimate(&self.prep, &b.pilot, &b.pilots, alpha)?.w;
        self.errors_with(&w)
    }

    fn errors_with(&self, w: &CMat) -> Result<SymbolErrors> {
        let soft = soft_estimates(&self.blocks.data.y, w)?;
        ser(&hard_decide_matrix(&soft, self.constellation), &self.blocks.data.truth)
    }
}

fn run_method(
    m: Method,
    sh: &Shared<'_>,
    opts: &TrialOptions,
    trace: &mut Option<FitState>,
) -> Result<MethodOutcome> {
    let b = sh.blocks;
    let mut out = MethodOutcome::failed();
    match m {
        Method::NoReg => {
            out.errors = Some(sh.errors_at(0.0)?);
            out.alpha = Some(0.0);
        }
        Method::RegData => {
            let est = alpha_from_data(&sh.prep, &b.data)?;
            let alpha = est.alpha.max(sh.alpha_floor());
            out.errors = Some(sh.errors_at(alpha)?);
            out.alpha = Some(alpha);
            out.clamp_events = est.clamped as usize;
        }
        Method::RegDataIter => {
            let (alpha, state) = fit_with(&sh.surface, sh.constellation, &opts.fit, b.seed)?;
            out.errors = Some(sh.errors_at(alpha)?);
            out.alpha = Some(alpha);
            out.iterations = Some(state.iterations);
            out.clamp_events = state.clamp_events;
            if opts.keep_trace {
                *trace = Some(state);
            }
        }
        Method::RegExh => {
            let alpha = fit_exhaustive_genie(
                &sh.surface,
                &b.data.truth,
                opts.exhaustive_step,
                opts.exhaustive_objective,
                sh.constellation,
            )?;
            out.errors = Some(sh.errors_at(alpha)?);
            out.alpha = Some(alpha);
        }
        Method::PerfectCsi => {
            let w = perfect_csi_combiner(&b.channel, opts.perfect_csi)?.w;
            out.errors = Some(sh.errors_with(&w)?);
        }
    }
    Ok(out)
}

/// Runs every requested method on already-drawn blocks. Singular failures
/// come back as `Err` entries so the caller can decide to resample.
pub fn run_trial_with(
    blocks: &TrialBlocks,
    cfg: &ScenarioConfig,
    opts: &TrialOptions,
) -> Result<([Option<Result<MethodOutcome>>; 5], Option<FitState>)> {
    let constellation = Constellation::square_qam(cfg.constellation_order)?;
    let prep = build_prep(&blocks.pilot)?;
    let surface = MseSurface::new(&prep, &blocks.pilot, &blocks.pilots, &blocks.data.y)?;
    let sh = Shared {
        blocks,
        prep,
        surface,
        constellation: &constellation,
    };
    let mut trace = None;
    let mut results: [Option<Result<MethodOutcome>>; 5] = Default::default();
    for &m in &opts.methods {
        results[m.index()] = Some(run_method(m, &sh, opts, &mut trace));
    }
    Ok((results, trace))
}

/// One paired trial: a single channel, pilot block and data block shared by
/// all methods. A singular `R(0)` triggers a fresh draw from a derived
/// seed; after [`MAX_ATTEMPTS`] draws the affected methods are marked failed.
pub fn run_trial(cfg: &ScenarioConfig, opts: &TrialOptions, trial_index: u64) -> Result<TrialOutcome> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = trial_seed(cfg.master_seed, trial_index, attempt);
        let blocks = TrialBlocks::draw(cfg, seed)?;
        let (results, fit_trace) = run_trial_with(&blocks, cfg, opts)?;
        let any_singular = results
            .iter()
            .flatten()
            .any(|r| matches!(r, Err(e) if is_singular(e)));
        if any_singular && attempt + 1 < MAX_ATTEMPTS {
            continue;
        }
        let mut outcomes: [Option<MethodOutcome>; 5] = Default::default();
        for (slot, r) in outcomes.iter_mut().zip(results) {
            *slot = match r {
                None => None,
                Some(Ok(o)) => Some(o),
                Some(Err(e)) if is_singular(&e) => Some(MethodOutcome::failed()),
                Some(Err(e)) => return Err(e),
            };
        }
        return Ok(TrialOutcome {
            trial_index,
            resamples: attempt,
            outcomes,
            fit_trace,
        });
    }
    unreachable!("the last attempt always returns")
}
