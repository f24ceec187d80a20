//! Exhaustive enumeration of fibers: all nonnegative integer tables with
//! given one-way margins.
//!
//! Enumeration is depth-first over cells in storage order. At each cell the
//! admissible range is bounded above by the remaining budget of every margin
//! the cell belongs to, and below by what the later cells sharing a margin
//! entry could still absorb. Counts and histograms merge with integer
//! arithmetic only, so parallel runs give identical results.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::agreement::{Evaluator, FiberKappa, KappaValue};
use crate::error::{Error, Result};
use crate::markov::MarkovBasis;
use crate::table::{apply_in_place, cell_count, coords_of, Margins, Table};
use crate::weights::DisagreementScheme;

pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Kappa tolerance used for schemes without an exact form.
pub const KAPPA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct FiberOptions {
    /// Maximum number of search nodes before giving up.
    pub budget: u64,
    /// Worker threads; `Some(1)` runs sequentially, `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            budget: DEFAULT_BUDGET,
            threads: None,
        }
    }
}

impl FiberOptions {
    pub fn sequential() -> Self {
        FiberOptions {
            threads: Some(1),
            ..Default::default()
        }
    }
}

struct Enumerator {
    raters: usize,
    coords: Vec<Vec<usize>>,
    /// `later[p][s][t]`: bitmask of axis-`t` values among cells after `p`
    /// whose axis-`s` coordinate equals that of `p`.
    later: Vec<Vec<Vec<u64>>>,
    margins: Margins,
    budget: u64,
}

struct NodeCounter<'a> {
    shared: &'a AtomicU64,
    local: u64,
    budget: u64,
}

impl NodeCounter<'_> {
    const FLUSH: u64 = 1024;

    fn tick(&mut self) -> Result<()> {
        self.local += 1;
        if self.local == Self::FLUSH {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        let total = self.shared.fetch_add(self.local, Ordering::Relaxed) + self.local;
        self.local = 0;
        if total > self.budget {
            return Err(Error::FiberTooLarge {
                budget: self.budget,
            });
        }
        Ok(())
    }
}

impl Enumerator {
    fn new(margins: &Margins, budget: u64) -> Result<Self> {
        let raters = margins.raters();
        let levels = margins.levels();
        if levels > 64 {
            return Err(Error::InvalidArgument(
                "enumeration supports at most 64 levels".into(),
            ));
        }
        let cells = cell_count(raters, levels)?;
        let coords: Vec<Vec<usize>> = (0..cells).map(|c| coords_of(raters, levels, c)).collect();
        let mut later = vec![vec![vec![0u64; raters]; raters]; cells];
        // sweep backwards, accumulating masks per (axis s, value)
        let mut acc = vec![vec![vec![0u64; raters]; levels]; raters];
        for p in (0..cells).rev() {
            for s in 0..raters {
                later[p][s].clone_from(&acc[s][coords[p][s]]);
            }
            for s in 0..raters {
                for t in 0..raters {
                    acc[s][coords[p][s]][t] |= 1 << coords[p][t];
                }
            }
        }
        Ok(Enumerator {
            raters,
            coords,
            later,
            margins: margins.clone(),
            budget,
        })
    }

    fn num_cells(&self) -> usize {
        self.coords.len()
    }

    /// Admissible value range for cell `p` given remaining margin budgets.
    fn range(&self, p: usize, rem: &[Vec<u64>]) -> Option<(u64, u64)> {
        let x = &self.coords[p];
        let mut hi = u64::MAX;
        let mut lo = 0u64;
        for s in 0..self.raters {
            let need = rem[s][x[s]];
            hi = hi.min(need);
            let mut cap = u64::MAX;
            for t in 0..self.raters {
                if t == s {
                    continue;
                }
                let mut mask = self.later[p][s][t];
                let mut sum = 0u64;
                while mask != 0 {
                    let w = mask.trailing_zeros() as usize;
                    sum += rem[t][w];
                    mask &= mask - 1;
                }
                cap = cap.min(sum);
            }
            lo = lo.max(need.saturating_sub(cap));
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn dfs<F: FnMut(&[u64])>(
        &self,
        p: usize,
        counts: &mut [u64],
        rem: &mut [Vec<u64>],
        nodes: &mut NodeCounter<'_>,
        visit: &mut F,
    ) -> Result<()> {
        nodes.tick()?;
        if p == self.num_cells() {
            debug_assert!(rem.iter().flatten().all(|&x| x == 0));
            visit(counts);
            return Ok(());
        }
        let Some((lo, hi)) = self.range(p, rem) else {
            return Ok(());
        };
        for val in lo..=hi {
            self.set(p, val, counts, rem);
            let res = self.dfs(p + 1, counts, rem, nodes, visit);
            self.unset(p, val, counts, rem);
            res?;
        }
        Ok(())
    }

    fn set(&self, p: usize, val: u64, counts: &mut [u64], rem: &mut [Vec<u64>]) {
        counts[p] = val;
        for (s, &x) in self.coords[p].iter().enumerate() {
            rem[s][x] -= val;
        }
    }

    fn unset(&self, p: usize, val: u64, counts: &mut [u64], rem: &mut [Vec<u64>]) {
        counts[p] = 0;
        for (s, &x) in self.coords[p].iter().enumerate() {
            rem[s][x] += val;
        }
    }

    /// Runs the search rooted at a fixed value of the first cell (or the
    /// whole tree when `first` is `None`).
    fn run_branch<F: FnMut(&[u64])>(
        &self,
        first: Option<u64>,
        shared: &AtomicU64,
        visit: &mut F,
    ) -> Result<()> {
        let mut counts = vec![0u64; self.num_cells()];
        let mut rem = self.margins.0.clone();
        let mut nodes = NodeCounter {
            shared,
            local: 0,
            budget: self.budget,
        };
        match first {
            None => self.dfs(0, &mut counts, &mut rem, &mut nodes, visit)?,
            Some(v) => {
                nodes.tick()?;
                self.set(0, v, &mut counts, &mut rem);
                self.dfs(1, &mut counts, &mut rem, &mut nodes, visit)?;
            }
        }
        nodes.flush()
    }

    fn first_values(&self) -> Vec<u64> {
        match self.range(0, &self.margins.0) {
            Some((lo, hi)) => (lo..=hi).collect(),
            None => Vec::new(),
        }
    }
}

/// Folds a visitor over every table of the fiber. Sequential runs use one
/// accumulator; parallel runs split on the first cell's value and merge the
/// branch accumulators in ascending order of that value.
pub fn fold_fiber<T, I, V, M>(
    margins: &Margins,
    opts: FiberOptions,
    init: I,
    visit: V,
    merge: M,
) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    V: Fn(&mut T, &[u64]) + Sync,
    M: Fn(T, T) -> T,
{
    let en = Enumerator::new(margins, opts.budget)?;
    let shared = AtomicU64::new(0);
    if opts.threads == Some(1) {
        let mut acc = init();
        en.run_branch(None, &shared, &mut |c| visit(&mut acc, c))?;
        return Ok(acc);
    }
    let firsts = en.first_values();
    let work = || {
        firsts
            .par_iter()
            .map(|&v| {
                let mut acc = init();
                en.run_branch(Some(v), &shared, &mut |c| visit(&mut acc, c))?;
                Ok(acc)
            })
            .collect::<Result<Vec<T>>>()
    };
    let parts = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(parts.into_iter().fold(init(), merge))
}

/// Calls `visit` on every table of the fiber, in a deterministic order.
/// Returns the number of tables visited.
pub fn enumerate_fiber<F: FnMut(&[u64])>(
    margins: &Margins,
    budget: u64,
    mut visit: F,
) -> Result<u64> {
    let en = Enumerator::new(margins, budget)?;
    let shared = AtomicU64::new(0);
    let mut n = 0u64;
    en.run_branch(None, &shared, &mut |c| {
        n += 1;
        visit(c)
    })?;
    Ok(n)
}

/// Number of tables in the fiber.
pub fn fiber_size(margins: &Margins, opts: FiberOptions) -> Result<u64> {
    fold_fiber(margins, opts, || 0u64, |n, _| *n += 1, |a, b| a + b)
}

/// All tables of the fiber, in enumeration order.
pub fn collect_fiber(margins: &Margins, budget: u64) -> Result<Vec<Table>> {
    let mut out = Vec::new();
    enumerate_fiber(margins, budget, |c| {
        out.push(Table::new(margins.raters(), margins.levels(), c.to_vec()).expect("valid"))
    })?;
    Ok(out)
}

/// Integer ordering key for agreement within a fiber: larger means more
/// agreement. Exact for rational schemes, observed agreement rounded to
/// `1e-9` otherwise.
#[derive(Clone, Copy)]
struct KeyFn<'e, 'a> {
    eval: &'e Evaluator<'a>,
    n: u64,
}

impl KeyFn<'_, '_> {
    fn key(&self, counts: &[u64]) -> i64 {
        match self.eval.disagreement_int(counts) {
            Some(d) => -d,
            None => (self.eval.observed_agreement(counts, self.n) * 1e9).round() as i64,
        }
    }
}

fn key_to_kappa(ctx: &FiberKappa<'_, '_>, eval: &Evaluator<'_>, key: i64) -> KappaValue {
    if eval.is_exact() {
        ctx.kappa_from_int(-key).expect("rational scheme")
    } else {
        let ao = key as f64 / 1e9;
        let ae = ctx.expected_agreement();
        KappaValue {
            value: (ao - ae) / (1.0 - ae),
            exact: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    /// Exact disagreement numerator (negated) for rational schemes, observed
    /// agreement times `1e9` otherwise.
    pub key: i64,
    pub kappa: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberSummary {
    pub size: u64,
    pub expected_agreement: f64,
    pub kappa_histogram: Vec<HistogramBin>,
    pub max_kappa: KappaValue,
    pub argmax_tables: Vec<Table>,
}

#[derive(Default)]
struct Extremum {
    key: Option<i64>,
    tables: Vec<Vec<u64>>,
}

impl Extremum {
    fn offer(&mut self, key: i64, counts: &[u64]) {
        match self.key {
            Some(k) if key < k => {}
            Some(k) if key == k => self.tables.push(counts.to_vec()),
            _ => {
                self.key = Some(key);
                self.tables.clear();
                self.tables.push(counts.to_vec());
            }
        }
    }

    fn merge(mut self, other: Extremum) -> Extremum {
        match (self.key, other.key) {
            (_, None) => self,
            (None, _) => other,
            (Some(a), Some(b)) if b > a => other,
            (Some(a), Some(b)) if a == b => {
                self.tables.extend(other.tables);
                self
            }
            _ => self,
        }
    }

    fn into_tables(self, raters: usize, levels: usize) -> Vec<Table> {
        let mut t = self.tables;
        t.sort();
        t.into_iter()
            .map(|c| Table::new(raters, levels, c).expect("valid"))
            .collect()
    }
}

fn check_scheme(margins: &Margins, scheme: &DisagreementScheme) -> Result<()> {
    if scheme.levels() != margins.levels() {
        return Err(Error::DimensionMismatch(format!(
            "scheme has {} levels, fiber has {}",
            scheme.levels(),
            margins.levels()
        )));
    }
    Ok(())
}

/// Size, kappa histogram, and maximum-kappa tables of a fiber.
pub fn summarize(
    margins: &Margins,
    scheme: &DisagreementScheme,
    opts: FiberOptions,
) -> Result<FiberSummary> {
    check_scheme(margins, scheme)?;
    let eval = Evaluator::new(scheme, margins.raters())?;
    let ctx = eval.fiber_context(margins)?;
    let kf = KeyFn {
        eval: &eval,
        n: margins.total(),
    };
    type Acc = (u64, BTreeMap<i64, u64>, Extremum);
    let (size, hist, best) = fold_fiber(
        margins,
        opts,
        || -> Acc { (0, BTreeMap::new(), Extremum::default()) },
        |acc, c| {
            let key = kf.key(c);
            acc.0 += 1;
            *acc.1.entry(key).or_default() += 1;
            acc.2.offer(key, c);
        },
        |mut a, b| {
            a.0 += b.0;
            for (k, v) in b.1 {
                *a.1.entry(k).or_default() += v;
            }
            (a.0, a.1, a.2.merge(b.2))
        },
    )?;
    let max_key = best
        .key
        .ok_or_else(|| Error::InvalidArgument("empty fiber".into()))?;
    Ok(FiberSummary {
        size,
        expected_agreement: ctx.expected_agreement(),
        kappa_histogram: hist
            .into_iter()
            .map(|(key, count)| HistogramBin {
                key,
                kappa: key_to_kappa(&ctx, &eval, key).value,
                count,
            })
            .collect(),
        max_kappa: key_to_kappa(&ctx, &eval, max_key),
        argmax_tables: best.into_tables(margins.raters(), margins.levels()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSet {
    pub kappa: KappaValue,
    pub count: u64,
    pub fiber_size: u64,
    pub kappa_histogram: Vec<HistogramBin>,
}

/// Number of fiber tables sharing the table's kappa under `scheme`.
pub fn level_set_count(
    table: &Table,
    scheme: &DisagreementScheme,
    opts: FiberOptions,
) -> Result<LevelSet> {
    let margins = table.fiber_statistic();
    let summary = summarize(&margins, scheme, opts)?;
    let eval = Evaluator::new(scheme, table.raters())?;
    let ctx = eval.fiber_context(&margins)?;
    let kappa = ctx.kappa(table.counts())?;
    let count = match eval.disagreement_int(table.counts()) {
        Some(d) => summary
            .kappa_histogram
            .iter()
            .filter(|b| b.key == -d)
            .map(|b| b.count)
            .sum(),
        None => {
            let target = kappa.value;
            let eval = &eval;
            let ctx = &ctx;
            fold_fiber(
                &margins,
                opts,
                || 0u64,
                |n, c| {
                    let k = ctx.kappa_from_disagreement(eval.disagreement(c));
                    if (k - target).abs() <= KAPPA_TOLERANCE {
                        *n += 1;
                    }
                },
                |a, b| a + b,
            )?
        }
    };
    Ok(LevelSet {
        kappa,
        count,
        fiber_size: summary.size,
        kappa_histogram: summary.kappa_histogram,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossRange {
    pub level_kappa: KappaValue,
    pub level_set_size: u64,
    pub min: KappaValue,
    pub max: KappaValue,
    pub argmin_tables: Vec<Table>,
    pub argmax_tables: Vec<Table>,
}

/// Over the level set of `table` under `scheme_a`, the range of kappa under
/// `scheme_b` and the tables attaining it.
pub fn cross_scheme_range(
    table: &Table,
    scheme_a: &DisagreementScheme,
    scheme_b: &DisagreementScheme,
    opts: FiberOptions,
) -> Result<CrossRange> {
    let margins = table.fiber_statistic();
    check_scheme(&margins, scheme_a)?;
    check_scheme(&margins, scheme_b)?;
    let n = margins.total();
    let eval_a = Evaluator::new(scheme_a, table.raters())?;
    let eval_b = Evaluator::new(scheme_b, table.raters())?;
    let ctx_a = eval_a.fiber_context(&margins)?;
    let ctx_b = eval_b.fiber_context(&margins)?;
    let level_kappa = ctx_a.kappa(table.counts())?;
    let target_int = eval_a.disagreement_int(table.counts());
    let kb = KeyFn { eval: &eval_b, n };
    let (ea, ca) = (&eval_a, &ctx_a);
    let in_level = |c: &[u64]| match target_int {
        Some(d) => ea.disagreement_int(c) == Some(d),
        None => {
            (ca.kappa_from_disagreement(ea.disagreement(c)) - level_kappa.value).abs()
                <= KAPPA_TOLERANCE
        }
    };
    type Acc = (u64, Extremum, Extremum);
    let (count, lo, hi) = fold_fiber(
        &margins,
        opts,
        || -> Acc { (0, Extremum::default(), Extremum::default()) },
        |acc, c| {
            if in_level(c) {
                let key = kb.key(c);
                acc.0 += 1;
                acc.1.offer(-key, c);
                acc.2.offer(key, c);
            }
        },
        |a, b| (a.0 + b.0, a.1.merge(b.1), a.2.merge(b.2)),
    )?;
    let (r, k) = (margins.raters(), margins.levels());
    let min_key = -lo.key.expect("level set contains the input table");
    let max_key = hi.key.expect("level set contains the input table");
    Ok(CrossRange {
        level_kappa,
        level_set_size: count,
        min: key_to_kappa(&ctx_b, &eval_b, min_key),
        max: key_to_kappa(&ctx_b, &eval_b, max_key),
        argmin_tables: lo.into_tables(r, k),
        argmax_tables: hi.into_tables(r, k),
    })
}

/// Global maximum of kappa over the fiber of `table`, with every table
/// attaining it.
pub fn max_kappa_exhaustive(
    table: &Table,
    scheme: &DisagreementScheme,
    opts: FiberOptions,
) -> Result<(KappaValue, Vec<Table>)> {
    let s = summarize(&table.fiber_statistic(), scheme, opts)?;
    Ok((s.max_kappa, s.argmax_tables))
}

/// Whether the graph on the fiber whose edges are applicable signed basis
/// moves is connected.
pub fn connectivity_check(margins: &Margins, basis: &MarkovBasis, budget: u64) -> Result<bool> {
    if basis.raters() != margins.raters() || basis.levels() != margins.levels() {
        return Err(Error::DimensionMismatch(
            "basis dimensions differ from the fiber".into(),
        ));
    }
    let mut tables: Vec<Vec<u64>> = Vec::new();
    enumerate_fiber(margins, budget, |c| tables.push(c.to_vec()))?;
    if tables.len() <= 1 {
        return Ok(true);
    }
    let index: HashMap<&[u64], usize> = tables
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_slice(), i))
        .collect();
    let mut seen = vec![false; tables.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    let mut scratch = vec![0u64; tables[0].len()];
    while let Some(i) = queue.pop_front() {
        for m in basis.moves() {
            for sign in [true, false] {
                scratch.copy_from_slice(&tables[i]);
                if !apply_in_place(&mut scratch, &m.with_sign(sign)) {
                    continue;
                }
                let j = *index
                    .get(scratch.as_slice())
                    .expect("moves preserve margins");
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(reached == tables.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{expected_agreement, observed_agreement, weighted_kappa};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: every composition of `n` into the cells, filtered
    /// by margins.
    fn brute_force(margins: &Margins) -> Vec<Vec<u64>> {
        let r = margins.raters();
        let k = margins.levels();
        let cells = k.pow(r as u32);
        let n = margins.total();
        let mut out = Vec::new();
        let mut cur = vec![0u64; cells];
        fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>, m: &Margins) {
            if i == cur.len() - 1 {
                cur[i] = left;
                let t = Table::new(m.raters(), m.levels(), cur.clone()).unwrap();
                if &t.fiber_statistic() == m {
                    out.push(cur.clone());
                }
                return;
            }
            for v in 0..=left {
                cur[i] = v;
                rec(i + 1, left - v, cur, out, m);
            }
            cur[i] = 0;
        }
        rec(0, n, &mut cur, &mut out, margins);
        out
    }

    fn random_table(rng: &mut ChaCha8Rng, r: usize, k: usize, n: u64) -> Table {
        let mut c = vec![0u64; k.pow(r as u32)];
        for _ in 0..n {
            let i = rng.gen_range(0..c.len());
            c[i] += 1;
        }
        Table::new(r, k, c).unwrap()
    }

    #[test]
    fn small_fibers_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(r, k, n) in &[
            (2, 2, 5),
            (2, 3, 6),
            (2, 3, 4),
            (3, 2, 5),
            (3, 3, 3),
            (4, 2, 3),
        ] {
            for _ in 0..3 {
                let m = random_table(&mut rng, r, k, n).fiber_statistic();
                let mut ours = collect_fiber(&m, DEFAULT_BUDGET)
                    .unwrap()
                    .into_iter()
                    .map(Table::into_counts)
                    .collect::<Vec<_>>();
                let mut oracle = brute_force(&m);
                ours.sort();
                oracle.sort();
                assert_eq!(ours, oracle, "r={r} k={k} n={n}");
            }
        }
    }

    #[test]
    fn permutation_fiber() {
        let m = Margins::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(fiber_size(&m, FiberOptions::sequential()).unwrap(), 2);
        let zero = Margins::new(vec![vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(fiber_size(&zero, FiberOptions::default()).unwrap(), 1);
    }

    #[test]
    fn count_independent_of_cell_order() {
        // permuting raters changes the order in which cells are visited
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let t = random_table(&mut rng, 3, 3, 7);
            let m = t.fiber_statistic();
            let perm = Margins(vec![m.0[2].clone(), m.0[0].clone(), m.0[1].clone()]);
            let rev: Margins = Margins(
                m.0.iter()
                    .map(|v| v.iter().rev().copied().collect())
                    .collect(),
            );
            let a = fiber_size(&m, FiberOptions::sequential()).unwrap();
            assert_eq!(a, fiber_size(&perm, FiberOptions::sequential()).unwrap());
            assert_eq!(a, fiber_size(&rev, FiberOptions::sequential()).unwrap());
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let t = Table::two_way(&[vec![3, 1, 2], vec![0, 4, 1], vec![2, 0, 3]]).unwrap();
        let s = DisagreementScheme::quadratic(3).unwrap();
        let a = summarize(&t.fiber_statistic(), &s, FiberOptions::sequential()).unwrap();
        let b = summarize(
            &t.fiber_statistic(),
            &s,
            FiberOptions {
                threads: Some(4),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.size, b.size);
        assert_eq!(a.argmax_tables, b.argmax_tables);
        let ha: Vec<_> = a.kappa_histogram.iter().map(|x| (x.key, x.count)).collect();
        let hb: Vec<_> = b.kappa_histogram.iter().map(|x| (x.key, x.count)).collect();
        assert_eq!(ha, hb);
        assert_eq!(
            a.kappa_histogram.iter().map(|x| x.count).sum::<u64>(),
            a.size
        );
    }

    #[test]
    fn budget_exceeded_is_an_error() {
        let m = Margins::new(vec![vec![10, 10, 10], vec![10, 10, 10]]).unwrap();
        let opts = FiberOptions {
            budget: 100,
            threads: Some(1),
        };
        assert_eq!(
            fiber_size(&m, opts),
            Err(Error::FiberTooLarge { budget: 100 })
        );
        assert!(fiber_size(
            &m,
            FiberOptions {
                budget: 100,
                threads: Some(2)
            }
        )
        .is_err());
    }

    #[test]
    fn two_element_level_set() {
        let t = Table::two_way(&[vec![1, 0], vec![0, 1]]).unwrap();
        let id = DisagreementScheme::identity(2).unwrap();
        let ls = level_set_count(&t, &id, FiberOptions::default()).unwrap();
        assert_eq!(ls.fiber_size, 2);
        assert_eq!(ls.count, 1);
        assert_eq!(ls.kappa.value, 1.0);
        let (best, arg) = max_kappa_exhaustive(&t, &id, FiberOptions::default()).unwrap();
        assert_eq!(best.value, 1.0);
        assert_eq!(arg, vec![t]);
    }

    #[test]
    fn cross_range_same_scheme_is_degenerate() {
        let t = Table::two_way(&[vec![3, 1, 2], vec![0, 4, 1], vec![2, 0, 3]]).unwrap();
        let l = DisagreementScheme::linear(3).unwrap();
        let cr = cross_scheme_range(&t, &l, &l, FiberOptions::default()).unwrap();
        let k = weighted_kappa(&t, &l).unwrap();
        assert_eq!(cr.min.exact, k.exact);
        assert_eq!(cr.max.exact, k.exact);
        assert_eq!(cr.level_kappa.exact, k.exact);
    }

    #[test]
    fn sqrt_level_set_uses_tolerance() {
        let t = Table::two_way(&[vec![3, 1, 2], vec![0, 4, 1], vec![2, 0, 3]]).unwrap();
        let s = DisagreementScheme::sqrt(3).unwrap();
        let ls = level_set_count(&t, &s, FiberOptions::default()).unwrap();
        let target = weighted_kappa(&t, &s).unwrap().value;
        let oracle = brute_force(&t.fiber_statistic())
            .into_iter()
            .filter(|c| {
                let tt = Table::new(2, 3, c.clone()).unwrap();
                (weighted_kappa(&tt, &s).unwrap().value - target).abs() <= 1e-9
            })
            .count();
        assert_eq!(ls.count as usize, oracle);
        assert!(ls.count >= 1);
    }

    #[test]
    fn unweighted_max_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 50 {
            let k = if checked % 2 == 0 { 3 } else { 4 };
            let n = rng.gen_range(4..=12);
            let t = random_table(&mut rng, 2, k, n);
            let id = DisagreementScheme::identity(k).unwrap();
            let Ok((_, arg)) = max_kappa_exhaustive(&t, &id, FiberOptions::sequential()) else {
                continue;
            };
            let rows = t.margin(0).unwrap();
            let cols = t.margin(1).unwrap();
            let closed: u64 = rows.iter().zip(&cols).map(|(a, b)| *a.min(b)).sum();
            let got = observed_agreement(&arg[0], &id).unwrap();
            assert!((got - closed as f64 / n as f64).abs() < 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn expected_agreement_constant_on_fiber() {
        let t = Table::new(3, 2, vec![1, 0, 2, 1, 0, 1, 1, 1]).unwrap();
        let s = DisagreementScheme::linear(2).unwrap();
        let e0 = expected_agreement(&t, &s).unwrap();
        for other in collect_fiber(&t.fiber_statistic(), DEFAULT_BUDGET).unwrap() {
            assert_eq!(other.fiber_statistic(), t.fiber_statistic());
            assert_eq!(expected_agreement(&other, &s).unwrap(), e0);
        }
    }

    #[test]
    fn connectivity_small() {
        let b2 = MarkovBasis::two_way(2).unwrap();
        for m in [vec![vec![2, 1], vec![1, 2]], vec![vec![3, 0], vec![1, 2]]] {
            let m = Margins::new(m).unwrap();
            assert!(connectivity_check(&m, &b2, DEFAULT_BUDGET).unwrap());
        }
        // a basis missing moves disconnects larger fibers
        let b3 = MarkovBasis::two_way(3).unwrap();
        let partial = MarkovBasis::from_moves(2, 3, b3.moves()[..1].to_vec()).unwrap();
        let m = Margins::new(vec![vec![2, 2, 2], vec![2, 2, 2]]).unwrap();
        assert!(connectivity_check(&m, &b3, DEFAULT_BUDGET).unwrap());
        assert!(!connectivity_check(&m, &partial, DEFAULT_BUDGET).unwrap());
    }
}
