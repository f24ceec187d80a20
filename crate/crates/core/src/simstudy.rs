//! Monte Carlo study of annealing convergence time.
//!
//! Each replicate draws a table from a multinomial whose cell probabilities
//! are products of per-rater marginal profiles, runs the annealer, and
//! records the number of steps until the stopping rule fired. Replicate `i`
//! uses stream `i` of a ChaCha generator keyed by the base seed, so results
//! do not depend on scheduling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::Evaluator;
use crate::anneal::{AnnealConfig, Annealer, DEFAULT_DECAY, DEFAULT_MAX_STEPS, DEFAULT_TAU0};
use crate::error::{Error, Result};
use crate::table::{cell_count, coords_of, Table};
use crate::weights::{DisagreementScheme, SchemeKind};

const MAX_RESAMPLES: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub raters: usize,
    pub levels: usize,
    /// Sample size of each simulated table.
    pub n: u64,
    /// One probability vector per rater.
    pub profiles: Vec<Vec<f64>>,
    pub scheme: SchemeKind,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default)]
    pub stop_c: Option<u64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_tau0() -> f64 {
    DEFAULT_TAU0
}

fn default_decay() -> f64 {
    DEFAULT_DECAY
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

/// One output row, laid out like a convergence-time table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub weight: SchemeKind,
    pub raters: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
    pub q99: u64,
    pub replicates: usize,
    /// Draws rejected because kappa was undefined, then redrawn.
    pub resampled: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub times: Vec<u64>,
}

impl Scenario {
    /// Scenario with default marginal profiles and annealing settings.
    pub fn new(
        raters: usize,
        levels: usize,
        n: u64,
        scheme: SchemeKind,
        homogeneous: bool,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        let s = Scenario {
            raters,
            levels,
            n,
            profiles: default_profiles(levels, raters, homogeneous)?,
            scheme,
            replicates,
            seed,
            tau0: DEFAULT_TAU0,
            decay: DEFAULT_DECAY,
            stop_c: None,
            max_steps: DEFAULT_MAX_STEPS,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.raters < 2 || self.levels < 2 {
            return Err(Error::InvalidArgument(
                "raters and levels must be at least 2".into(),
            ));
        }
        if self.profiles.len() != self.raters {
            return Err(Error::DimensionMismatch(format!(
                "{} profiles for {} raters",
                self.profiles.len(),
                self.raters
            )));
        }
        for (u, p) in self.profiles.iter().enumerate() {
            if p.len() != self.levels {
                return Err(Error::DimensionMismatch(format!(
                    "profile {u} has {} entries, expected {}",
                    p.len(),
                    self.levels
                )));
            }
            if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "profile {u} has a negative or non-finite entry"
                )));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "profile {u} sums to {s}, not 1"
                )));
            }
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be positive".into()));
        }
        if self.scheme == SchemeKind::Custom {
            return Err(Error::InvalidArgument(
                "simulations support builtin schemes only".into(),
            ));
        }
        Ok(())
    }

    fn anneal_config(&self, seed: u64) -> AnnealConfig {
        AnnealConfig {
            tau0: self.tau0,
            decay: self.decay,
            stop_c: self.stop_c,
            max_steps: self.max_steps,
            seed,
        }
    }

    /// Cell probabilities: products of profile entries, in storage order.
    pub fn cell_probabilities(&self) -> Result<Vec<f64>> {
        let cells = cell_count(self.raters, self.levels)?;
        Ok((0..cells)
            .map(|c| {
                coords_of(self.raters, self.levels, c)
                    .iter()
                    .enumerate()
                    .map(|(u, &x)| self.profiles[u][x])
                    .product()
            })
            .collect())
    }

    fn replicate_rng(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate);
        rng
    }
}

fn draw_table<R: Rng>(
    scenario: &Scenario,
    dist: &WeightedIndex<f64>,
    cells: usize,
    rng: &mut R,
) -> Table {
    let mut counts = vec![0u64; cells];
    for _ in 0..scenario.n {
        counts[dist.sample(rng)] += 1;
    }
    Table::new(scenario.raters, scenario.levels, counts).expect("valid dimensions")
}

/// One multinomial draw for the given replicate; deterministic in
/// `(scenario.seed, replicate)`.
pub fn sample_table(scenario: &Scenario, replicate: u64) -> Result<Table> {
    scenario.validate()?;
    let probs = scenario.cell_probabilities()?;
    if scenario.n == 0 {
        return Table::zeros(scenario.raters, scenario.levels);
    }
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = scenario.replicate_rng(replicate);
    Ok(draw_table(scenario, &dist, probs.len(), &mut rng))
}

/// Runs every replicate and aggregates the convergence times.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioStats> {
    run_scenario_with(scenario, false)
}

/// As [`run_scenario`], optionally keeping the per-replicate times.
pub fn run_scenario_with(scenario: &Scenario, keep_times: bool) -> Result<ScenarioStats> {
    scenario.validate()?;
    if scenario.n == 0 {
        return Err(Error::EmptyTable);
    }
    let scheme = DisagreementScheme::builtin(scenario.scheme, scenario.levels)?;
    let annealer = Annealer::new(&scheme, scenario.raters)?;
    let eval = Evaluator::new(&scheme, scenario.raters)?;
    let probs = scenario.cell_probabilities()?;
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let runs = (0..scenario.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = scenario.replicate_rng(i);
            let mut resampled = 0u64;
            let table = loop {
                let t = draw_table(scenario, &dist, probs.len(), &mut rng);
                match eval.fiber_context(&t.fiber_statistic()) {
                    Ok(_) => break t,
                    Err(Error::KappaUndefined) if resampled < MAX_RESAMPLES as u64 => {
                        resampled += 1
                    }
                    Err(e) => return Err(e),
                }
            };
            let seed: u64 = rng.gen();
            let res = annealer.run(&table, &scenario.anneal_config(seed))?;
            Ok((res.steps_total, resampled))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut times: Vec<u64> = runs.iter().map(|r| r.0).collect();
    let resampled = runs.iter().map(|r| r.1).sum();
    let (mean, sd, q99) = summarize_times(&times);
    if !keep_times {
        times.clear();
    }
    Ok(ScenarioStats {
        weight: scenario.scheme,
        raters: scenario.raters,
        k: scenario.levels,
        n: scenario.n,
        mean,
        sd,
        q99,
        replicates: scenario.replicates,
        resampled,
        times,
    })
}

/// Mean, sample standard deviation (0 for a single value), and the
/// nearest-rank 99th percentile.
pub fn summarize_times(times: &[u64]) -> (f64, f64, u64) {
    let n = times.len();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = times.iter().map(|&t| t as f64).sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = times.iter().map(|&t| (t as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
    (mean, sd, sorted[rank - 1])
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Marginal profiles for `raters` raters.
///
/// Homogeneous profiles are uniform. Non-homogeneous profiles tilt one rater
/// toward low levels and another toward high levels; for three levels the
/// pair is `(2/5, 2/5, 1/5)` and `(1/5, 2/5, 2/5)`, otherwise
/// `mu_i ∝ (k - i + 1) + k` and `nu_i ∝ i + k` for `i = 1..k`. A third rater
/// gets the milder upward tilt `i + 2k`.
pub fn default_profiles(levels: usize, raters: usize, homogeneous: bool) -> Result<Vec<Vec<f64>>> {
    if !(2..=64).contains(&levels) {
        return Err(Error::InvalidArgument(format!(
            "unsupported number of levels {levels}"
        )));
    }
    if raters < 2 {
        return Err(Error::InvalidArgument("raters must be at least 2".into()));
    }
    let k = levels as f64;
    if homogeneous {
        return Ok(vec![vec![1.0 / k; levels]; raters]);
    }
    if raters > 3 {
        return Err(Error::InvalidArgument(
            "non-homogeneous profiles are defined for at most 3 raters".into(),
        ));
    }
    let (mu, nu) = if levels == 3 {
        (vec![0.4, 0.4, 0.2], vec![0.2, 0.4, 0.4])
    } else {
        (
            normalize((1..=levels).map(|i| (levels - i + 1) as f64 + k).collect()),
            normalize((1..=levels).map(|i| i as f64 + k).collect()),
        )
    };
    let mut out = vec![mu, nu];
    if raters == 3 {
        out.push(normalize(
            (1..=levels).map(|i| i as f64 + 2.0 * k).collect(),
        ));
    }
    Ok(out)
}

/// The scenario grid of the convergence study: three schemes, `k` in
/// `{3, 5, 7}` for two raters or `{3, 5}` for three, and `N` in `{20, 100}`.
pub fn study_grid(
    raters: usize,
    homogeneous: bool,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Scenario>> {
    let ks: &[usize] = if raters == 2 { &[3, 5, 7] } else { &[3, 5] };
    let mut out = Vec::new();
    for scheme in [SchemeKind::Quadratic, SchemeKind::Linear, SchemeKind::Sqrt] {
        for &k in ks {
            for n in [20, 100] {
                out.push(Scenario::new(
                    raters,
                    k,
                    n,
                    scheme,
                    homogeneous,
                    replicates,
                    seed,
                )?);
            }
        }
    }
    Ok(out)
}
