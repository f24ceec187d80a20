//! Simulated annealing over a fiber for the table of maximum weighted
//! agreement.
//!
//! Each step draws a signed basic move uniformly, proposes `n + m` when it is
//! nonnegative, and accepts with probability `min(exp(delta / tau), 1)` where
//! `delta` is the change in observed agreement. The temperature decays
//! geometrically, `tau = tau0 * decay^b`, on every step including rejected
//! ones. The walk stops after `stop_c` consecutive steps without a change in
//! observed agreement, or at `max_steps`. A final sweep applies every move
//! with both `+1` cells on the main diagonal until none applies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::{move_disagreement, move_disagreement_int, Evaluator, KappaValue};
use crate::error::{Error, Result};
use crate::markov::{diagonal_moves, MarkovBasis, SignedMove};
use crate::table::{apply_in_place, Table};
use crate::weights::DisagreementScheme;

pub const DEFAULT_TAU0: f64 = 1.0;
pub const DEFAULT_DECAY: f64 = 0.999;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Default stagnation window: ten times the basis size, at least 1000.
pub fn default_stop_c(basis_size: usize) -> u64 {
    (10 * basis_size as u64).max(1000)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub tau0: f64,
    pub decay: f64,
    /// `None` selects [`default_stop_c`] for the basis in use.
    pub stop_c: Option<u64>,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            tau0: DEFAULT_TAU0,
            decay: DEFAULT_DECAY,
            stop_c: None,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(seed: u64) -> Self {
        AnnealConfig {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self, stop_c: u64) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau0 must be positive, got {}",
                self.tau0
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        if stop_c == 0 {
            return Err(Error::InvalidArgument("stop_c must be at least 1".into()));
        }
        if self.max_steps < stop_c {
            return Err(Error::InvalidArgument(format!(
                "max_steps ({}) must be at least stop_c ({stop_c})",
                self.max_steps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealResult {
    pub best_table: Table,
    pub best_kappa: KappaValue,
    pub input_kappa: KappaValue,
    /// Steps executed when the walk stopped, including the stagnant tail.
    pub steps_total: u64,
    /// Step index of the last accepted move that changed observed agreement.
    pub steps_last_change: u64,
    pub accepted_moves: u64,
    pub stop_c: u64,
    pub basis_size: usize,
    pub seed: u64,
}

/// `min(exp(delta / tau), 1)`.
pub fn acceptance_probability(delta: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    if delta >= 0.0 {
        return Ok(1.0);
    }
    Ok((delta / tau).exp().min(1.0))
}

/// A basis move with its precomputed effect on the disagreement sum.
struct ScoredMove {
    mv: SignedMove,
    /// Change in `D` when the move is added with positive sign.
    delta: f64,
    delta_int: Option<i64>,
}

fn score(
    moves: impl IntoIterator<Item = SignedMove>,
    scheme: &DisagreementScheme,
) -> Vec<ScoredMove> {
    moves
        .into_iter()
        .map(|mv| ScoredMove {
            delta: move_disagreement(&mv, scheme),
            delta_int: move_disagreement_int(&mv, scheme),
            mv,
        })
        .collect()
}

fn changes_agreement(m: &ScoredMove) -> bool {
    match m.delta_int {
        Some(d) => d != 0,
        None => m.delta != 0.0,
    }
}

/// Applies diagonal moves until none applies. Observed agreement never
/// decreases along the way.
pub fn diagonal_sweep(table: &Table, scheme: &DisagreementScheme) -> Result<Table> {
    check(table, scheme)?;
    let diag = diagonal_moves(table.raters(), table.levels())?;
    let mut counts = table.counts().to_vec();
    sweep_in_place(
        &mut counts,
        &diag.iter().map(|m| m.positive()).collect::<Vec<_>>(),
    );
    Table::new(table.raters(), table.levels(), counts)
}

fn sweep_in_place(counts: &mut [u64], diag: &[SignedMove]) {
    loop {
        let mut changed = false;
        for m in diag {
            while apply_in_place(counts, m) {
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn check(table: &Table, scheme: &DisagreementScheme) -> Result<()> {
    if table.levels() != scheme.levels() {
        return Err(Error::DimensionMismatch(format!(
            "scheme has {} levels, table has {}",
            scheme.levels(),
            table.levels()
        )));
    }
    Ok(())
}

/// Reusable annealer for one `(raters, levels, scheme)` combination: the
/// basis and move scores are computed once.
pub struct Annealer<'a> {
    scheme: &'a DisagreementScheme,
    raters: usize,
    basis_size: usize,
    moves: Vec<ScoredMove>,
    diagonal: Vec<SignedMove>,
}

impl<'a> Annealer<'a> {
    pub fn new(scheme: &'a DisagreementScheme, raters: usize) -> Result<Self> {
        let basis = MarkovBasis::for_dims(raters, scheme.levels())?;
        Self::with_basis(scheme, &basis)
    }

    pub fn with_basis(scheme: &'a DisagreementScheme, basis: &MarkovBasis) -> Result<Self> {
        if basis.levels() != scheme.levels() {
            return Err(Error::DimensionMismatch(
                "basis and scheme levels differ".into(),
            ));
        }
        if basis.is_empty() {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        let diagonal = diagonal_moves(basis.raters(), basis.levels())?
            .iter()
            .map(|m| m.positive())
            .collect();
        Ok(Annealer {
            scheme,
            raters: basis.raters(),
            basis_size: basis.len(),
            moves: score(basis.moves().iter().map(|m| m.positive()), scheme),
            diagonal,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn run(&self, table: &Table, config: &AnnealConfig) -> Result<AnnealResult> {
        check(table, self.scheme)?;
        if table.raters() != self.raters {
            return Err(Error::DimensionMismatch(
                "table and basis rater counts differ".into(),
            ));
        }
        let stop_c = config
            .stop_c
            .unwrap_or_else(|| default_stop_c(self.basis_size));
        config.validate(stop_c)?;
        let eval = Evaluator::new(self.scheme, self.raters)?;
        let margins = table.fiber_statistic();
        let ctx = eval.fiber_context(&margins)?;
        let input_kappa = ctx.kappa(table.counts())?;

        let n = table.total();
        // observed agreement changes by -delta_D / (pairs * N)
        let scale = 1.0 / ((self.raters * (self.raters - 1) / 2) as f64 * n as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut counts = table.counts().to_vec();
        let mut tau = config.tau0;
        let mut stagnant = 0u64;
        let mut step = 0u64;
        let mut last_change = 0u64;
        let mut accepted = 0u64;
        // best visited state, tracked by disagreement relative to the start
        let mut level = 0.0f64;
        let mut level_int = 0i64;
        let mut best = (0.0f64, 0i64, counts.clone());

        while step < config.max_steps && stagnant < stop_c {
            step += 1;
            let idx = rng.gen_range(0..self.moves.len());
            let positive: bool = rng.gen();
            let m = &self.moves[idx];
            let mv = if positive { m.mv } else { m.mv.negated() };
            let sign = if positive { 1.0 } else { -1.0 };
            let mut changed = false;
            if mv.plus_minus().1.iter().all(|&c| counts[c] > 0) {
                let delta_ao = -sign * m.delta * scale;
                let p = if changes_agreement(m) {
                    acceptance_probability(delta_ao, tau)?
                } else {
                    1.0
                };
                let u: f64 = rng.gen();
                if p > u {
                    apply_in_place(&mut counts, &mv);
                    accepted += 1;
                    if changes_agreement(m) {
                        changed = true;
                        level += sign * m.delta;
                        level_int += (sign as i64) * m.delta_int.unwrap_or(0);
                        let better = match m.delta_int {
                            Some(_) => level_int < best.1,
                            None => level < best.0 - 1e-12,
                        };
                        if better {
                            best = (level, level_int, counts.clone());
                        }
                    }
                }
            }
            if changed {
                stagnant = 0;
                last_change = step;
            } else {
                stagnant += 1;
            }
            tau *= config.decay;
            if tau < f64::MIN_POSITIVE {
                tau = f64::MIN_POSITIVE;
            }
        }

        sweep_in_place(&mut counts, &self.diagonal);
        let mut best_counts = best.2;
        sweep_in_place(&mut best_counts, &self.diagonal);
        let final_counts = match eval.disagreement_int(&counts) {
            Some(d) if eval.disagreement_int(&best_counts).unwrap() < d => best_counts,
            Some(_) => counts,
            None if eval.disagreement(&best_counts) < eval.disagreement(&counts) - 1e-12 => {
                best_counts
            }
            None => counts,
        };
        let best_kappa = ctx.kappa(&final_counts)?;
        Ok(AnnealResult {
            best_table: Table::new(table.raters(), table.levels(), final_counts)?,
            best_kappa,
            input_kappa,
            steps_total: step,
            steps_last_change: last_change,
            accepted_moves: accepted,
            stop_c,
            basis_size: self.basis_size,
            seed: config.seed,
        })
    }

    /// Runs `restarts` independent walks with seeds `seed, seed + 1, ...`
    /// and keeps the best; ties go to the earliest seed.
    pub fn run_restarts(
        &self,
        table: &Table,
        config: &AnnealConfig,
        restarts: usize,
    ) -> Result<AnnealResult> {
        let restarts = restarts.max(1);
        let results = (0..restarts as u64)
            .into_par_iter()
            .map(|i| {
                self.run(
                    table,
                    &AnnealConfig {
                        seed: config.seed.wrapping_add(i),
                        ..*config
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = None::<AnnealResult>;
        for r in results {
            let better = match &best {
                None => true,
                Some(b) => match (r.best_kappa.exact, b.best_kappa.exact) {
                    (Some((n1, d1)), Some((n2, d2))) => n1 * d2 > n2 * d1,
                    _ => r.best_kappa.value > b.best_kappa.value + 1e-12,
                },
            };
            if better {
                best = Some(r);
            }
        }
        Ok(best.expect("at least one restart"))
    }
}

/// Single annealing run with the default basis for the table's dimensions.
pub fn anneal_max_kappa(
    table: &Table,
    scheme: &DisagreementScheme,
    config: &AnnealConfig,
) -> Result<AnnealResult> {
    check(table, scheme)?;
    Annealer::new(scheme, table.raters())?.run(table, config)
}
