//! Observed and expected agreement and the kappa indices built on them.
//!
//! For two raters these are the usual weighted Cohen quantities. For `r > 2`
//! raters every quantity is averaged over the `r(r-1)/2` two-way margins
//! (weighted Conger kappa), with the same weights for every pair.
//!
//! Internally agreement is tracked through disagreement sums:
//! `D = sum_pairs sum_ij u_ij n^(uv)_ij` and
//! `E = sum_pairs sum_ij u_ij n^(u)_i n^(v)_j`, so that
//! `kappa = 1 - N * D / E`. `E` depends only on the one-way margins.

use num_integer::Integer;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::markov::SignedMove;
use crate::table::{coords_of, Margins, Table};
use crate::weights::{DisagreementScheme, SchemeKind};

/// A kappa value with, for rational schemes, its exact reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaValue {
    pub value: f64,
    /// `(numerator, denominator)` with positive denominator.
    pub exact: Option<(i128, i128)>,
}

impl KappaValue {
    fn from_exact(num: i128, den: i128) -> Self {
        let g = num.gcd(&den);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        KappaValue {
            value: n as f64 / d as f64,
            exact: Some((n, d)),
        }
    }

    /// The value rounded to four decimals, as conventionally reported.
    pub fn display(&self) -> String {
        format!("{:.4}", self.value)
    }
}

impl Serialize for KappaValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("KappaValue", 3)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("display", &self.display())?;
        st.serialize_field(
            "exact",
            &self.exact.map(|(n, d)| [n.to_string(), d.to_string()]),
        )?;
        st.end()
    }
}

fn check_levels(table: &Table, scheme: &DisagreementScheme) -> Result<()> {
    if scheme.levels() != table.levels() {
        return Err(Error::DimensionMismatch(format!(
            "scheme has {} levels, table has {}",
            scheme.levels(),
            table.levels()
        )));
    }
    Ok(())
}

fn rater_pairs(r: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..r).flat_map(move |u| (u + 1..r).map(move |v| (u, v)))
}

fn num_pairs(r: usize) -> usize {
    r * (r - 1) / 2
}

/// Observed agreement: the mean over rater pairs of `(1/N) sum w_ij n^(uv)_ij`.
pub fn observed_agreement(table: &Table, scheme: &DisagreementScheme) -> Result<f64> {
    check_levels(table, scheme)?;
    if table.total() == 0 {
        return Err(Error::EmptyTable);
    }
    let k = table.levels();
    let n = table.total() as f64;
    let mut acc = 0.0;
    for (u, v) in rater_pairs(table.raters()) {
        let pm = table.pair_margin(u, v)?;
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += scheme.w(i, j) * pm[i * k + j] as f64;
            }
        }
        acc += s / n;
    }
    Ok(acc / num_pairs(table.raters()) as f64)
}

/// Chance agreement under independent raters with the observed margins.
pub fn expected_agreement(table: &Table, scheme: &DisagreementScheme) -> Result<f64> {
    check_levels(table, scheme)?;
    if table.total() == 0 {
        return Err(Error::EmptyTable);
    }
    let k = table.levels();
    let n = table.total() as f64;
    let margins = table.fiber_statistic();
    let mut acc = 0.0;
    for (u, v) in rater_pairs(table.raters()) {
        let (a, b) = (margins.rater(u), margins.rater(v));
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += scheme.w(i, j) * (a[i] as f64 / n) * (b[j] as f64 / n);
            }
        }
        acc += s;
    }
    Ok(acc / num_pairs(table.raters()) as f64)
}

/// Weighted kappa (weighted Conger kappa for more than two raters).
pub fn weighted_kappa(table: &Table, scheme: &DisagreementScheme) -> Result<KappaValue> {
    check_levels(table, scheme)?;
    Evaluator::new(scheme, table.raters())?.kappa(table)
}

/// Unweighted Cohen kappa for two raters.
pub fn cohen_kappa(table: &Table) -> Result<KappaValue> {
    if table.raters() != 2 {
        return Err(Error::InvalidArgument(format!(
            "Cohen kappa is defined for two raters, table has {}",
            table.raters()
        )));
    }
    weighted_kappa(table, &DisagreementScheme::identity(table.levels())?)
}

/// Change in observed agreement caused by adding `m` to a table of total `n`.
///
/// Depends only on the move's four cells. Terms with equal weights are
/// combined before summing, so moves whose weights cancel give exactly zero.
pub fn agreement_delta(m: &SignedMove, scheme: &DisagreementScheme, n: u64) -> Result<f64> {
    if scheme.levels() != m.levels() {
        return Err(Error::DimensionMismatch(
            "move and scheme levels differ".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let d = move_disagreement(m, scheme);
    Ok(-d / (num_pairs(m.raters()) as f64 * n as f64))
}

/// `sum_pairs sum_cells sign * u` for a move, with equal weights grouped.
pub(crate) fn move_disagreement(m: &SignedMove, scheme: &DisagreementScheme) -> f64 {
    let r = m.raters();
    let k = m.levels();
    let mut terms: Vec<(u64, f64, i64)> = Vec::with_capacity(8);
    for (cell, sign) in m.entries() {
        let x = coords_of(r, k, cell);
        for (u, v) in rater_pairs(r) {
            let w = scheme.u(x[u], x[v]);
            if w == 0.0 {
                continue;
            }
            match terms.iter_mut().find(|t| t.0 == w.to_bits()) {
                Some(t) => t.2 += sign,
                None => terms.push((w.to_bits(), w, sign)),
            }
        }
    }
    terms.iter().map(|&(_, w, c)| c as f64 * w).sum()
}

/// Integer numerator of [`move_disagreement`] for rational schemes.
pub(crate) fn move_disagreement_int(m: &SignedMove, scheme: &DisagreementScheme) -> Option<i64> {
    let r = m.raters();
    let k = m.levels();
    let mut acc = 0i64;
    for (cell, sign) in m.entries() {
        let x = coords_of(r, k, cell);
        for (u, v) in rater_pairs(r) {
            acc += sign * scheme.u_numerator(x[u], x[v])?;
        }
    }
    Some(acc)
}

/// Precomputed per-cell disagreement weights for fast repeated evaluation of
/// tables sharing `(raters, levels)` and a scheme.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    scheme: &'a DisagreementScheme,
    raters: usize,
    cell_u: Vec<f64>,
    cell_u_int: Option<Vec<i64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(scheme: &'a DisagreementScheme, raters: usize) -> Result<Self> {
        if raters < 2 {
            return Err(Error::InvalidArgument("raters must be at least 2".into()));
        }
        let k = scheme.levels();
        let cells = crate::table::cell_count(raters, k)?;
        let mut cell_u = Vec::with_capacity(cells);
        let mut cell_u_int = scheme.rational().map(|_| Vec::with_capacity(cells));
        for c in 0..cells {
            let x = coords_of(raters, k, c);
            let mut s = 0.0;
            let mut si = 0i64;
            for (u, v) in rater_pairs(raters) {
                s += scheme.u(x[u], x[v]);
                si += scheme.u_numerator(x[u], x[v]).unwrap_or(0);
            }
            cell_u.push(s);
            if let Some(ci) = cell_u_int.as_mut() {
                ci.push(si);
            }
        }
        Ok(Evaluator {
            scheme,
            raters,
            cell_u,
            cell_u_int,
        })
    }

    pub fn scheme(&self) -> &DisagreementScheme {
        self.scheme
    }

    pub fn is_exact(&self) -> bool {
        self.cell_u_int.is_some()
    }

    /// `D` for raw counts.
    pub fn disagreement(&self, counts: &[u64]) -> f64 {
        counts
            .iter()
            .zip(&self.cell_u)
            .map(|(&n, &u)| n as f64 * u)
            .sum()
    }

    /// Integer numerator of `D` for rational schemes.
    pub fn disagreement_int(&self, counts: &[u64]) -> Option<i64> {
        self.cell_u_int
            .as_ref()
            .map(|w| counts.iter().zip(w).map(|(&n, &u)| n as i64 * u).sum())
    }

    /// `E` for given one-way margins.
    pub fn expected_disagreement(&self, margins: &Margins) -> f64 {
        let k = self.scheme.levels();
        let mut acc = 0.0;
        for (u, v) in rater_pairs(self.raters) {
            let (a, b) = (margins.rater(u), margins.rater(v));
            for i in 0..k {
                for j in 0..k {
                    acc += self.scheme.u(i, j) * a[i] as f64 * b[j] as f64;
                }
            }
        }
        acc
    }

    pub fn expected_disagreement_int(&self, margins: &Margins) -> Option<i128> {
        let k = self.scheme.levels();
        self.scheme.rational()?;
        let mut acc = 0i128;
        for (u, v) in rater_pairs(self.raters) {
            let (a, b) = (margins.rater(u), margins.rater(v));
            for i in 0..k {
                for j in 0..k {
                    acc += self.scheme.u_numerator(i, j)? as i128 * a[i] as i128 * b[j] as i128;
                }
            }
        }
        Some(acc)
    }

    /// Observed agreement from raw counts with total `n`.
    pub fn observed_agreement(&self, counts: &[u64], n: u64) -> f64 {
        1.0 - self.disagreement(counts) / (num_pairs(self.raters) as f64 * n as f64)
    }

    /// Kappa context for a fiber: everything that depends only on margins.
    pub fn fiber_context(&self, margins: &Margins) -> Result<FiberKappa<'_, 'a>> {
        let n = margins.total();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        let expected = self.expected_disagreement(margins);
        let expected_int = self.expected_disagreement_int(margins);
        if expected == 0.0 || expected_int == Some(0) {
            return Err(Error::KappaUndefined);
        }
        Ok(FiberKappa {
            eval: self,
            n,
            expected,
            expected_int,
        })
    }

    pub fn kappa(&self, table: &Table) -> Result<KappaValue> {
        if table.raters() != self.raters || table.levels() != self.scheme.levels() {
            return Err(Error::DimensionMismatch(
                "table dimensions differ from evaluator".into(),
            ));
        }
        self.fiber_context(&table.fiber_statistic())?
            .kappa(table.counts())
    }
}

/// Kappa evaluation for tables within a single fiber.
#[derive(Debug, Clone)]
pub struct FiberKappa<'e, 'a> {
    eval: &'e Evaluator<'a>,
    n: u64,
    expected: f64,
    expected_int: Option<i128>,
}

impl FiberKappa<'_, '_> {
    pub fn total(&self) -> u64 {
        self.n
    }

    /// Kappa from an observed disagreement sum `D`.
    pub fn kappa_from_disagreement(&self, d: f64) -> f64 {
        1.0 - self.n as f64 * d / self.expected
    }

    /// Exact kappa from an integer disagreement numerator.
    pub fn kappa_from_int(&self, d: i64) -> Option<KappaValue> {
        let e = self.expected_int?;
        Some(KappaValue::from_exact(e - self.n as i128 * d as i128, e))
    }

    pub fn kappa(&self, counts: &[u64]) -> Result<KappaValue> {
        if let Some(d) = self.eval.disagreement_int(counts) {
            return Ok(self.kappa_from_int(d).expect("rational scheme"));
        }
        Ok(KappaValue {
            value: self.kappa_from_disagreement(self.eval.disagreement(counts)),
            exact: None,
        })
    }

    /// Expected agreement, constant over the fiber.
    pub fn expected_agreement(&self) -> f64 {
        1.0 - self.expected / (num_pairs(self.eval.raters) as f64 * (self.n as f64).powi(2))
    }
}

/// All kappa values of interest for a table, keyed by scheme name.
pub fn kappa_report(
    table: &Table,
    schemes: &[DisagreementScheme],
) -> Result<Vec<(SchemeKind, KappaValue)>> {
    schemes
        .iter()
        .map(|s| Ok((s.kind(), weighted_kappa(table, s)?)))
        .collect()
}
