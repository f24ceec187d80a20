//! Dense multi-way contingency tables with a common number of levels per
//! rater.
//!
//! Cells are stored in a flat vector of length `levels^raters`, with the
//! first rater's coordinate varying slowest (row-major for two-way tables).
//! Rater indices and category coordinates are zero-based throughout the API.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::SignedMove;

/// A nonnegative integer contingency table of `raters` dimensions, each with
/// `levels` categories.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Table {
    raters: usize,
    levels: usize,
    counts: Vec<u64>,
    #[serde(skip)]
    total: u64,
}

/// The one-way margins of a table, one vector per rater in rater order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Margins(pub Vec<Vec<u64>>);

impl Margins {
    /// Validates that every margin has `levels` entries and all share the
    /// same total.
    pub fn new(margins: Vec<Vec<u64>>) -> Result<Self> {
        if margins.len() < 2 {
            return Err(Error::InvalidArgument(
                "at least two rater margins are required".into(),
            ));
        }
        let levels = margins[0].len();
        if levels < 2 {
            return Err(Error::InvalidArgument("levels must be at least 2".into()));
        }
        let total: u64 = margins[0].iter().sum();
        for (u, m) in margins.iter().enumerate() {
            if m.len() != levels {
                return Err(Error::DimensionMismatch(format!(
                    "margin {u} has {} entries, expected {levels}",
                    m.len()
                )));
            }
            let s: u64 = m.iter().sum();
            if s != total {
                return Err(Error::InvalidArgument(format!(
                    "margin {u} sums to {s}, expected {total}"
                )));
            }
        }
        Ok(Margins(margins))
    }

    pub fn raters(&self) -> usize {
        self.0.len()
    }

    pub fn levels(&self) -> usize {
        self.0[0].len()
    }

    pub fn total(&self) -> u64 {
        self.0[0].iter().sum()
    }

    pub fn rater(&self, u: usize) -> &[u64] {
        &self.0[u]
    }
}

/// `levels^raters`, or an error on overflow.
pub(crate) fn cell_count(raters: usize, levels: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..raters {
        n = n
            .checked_mul(levels)
            .ok_or_else(|| Error::InvalidArgument("table too large".into()))?;
    }
    Ok(n)
}

impl Table {
    pub fn new(raters: usize, levels: usize, counts: Vec<u64>) -> Result<Self> {
        if raters < 2 {
            return Err(Error::InvalidArgument("raters must be at least 2".into()));
        }
        if levels < 2 {
            return Err(Error::InvalidArgument("levels must be at least 2".into()));
        }
        let cells = cell_count(raters, levels)?;
        if counts.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "expected {cells} counts for {raters} raters and {levels} levels, got {}",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Table {
            raters,
            levels,
            counts,
            total,
        })
    }

    /// Builds a table from signed counts, rejecting negative entries.
    pub fn from_signed(raters: usize, levels: usize, counts: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(counts.len());
        for (i, &c) in counts.iter().enumerate() {
            if c < 0 {
                return Err(Error::InvalidArgument(format!(
                    "negative count {c} at flat index {i}"
                )));
            }
            out.push(c as u64);
        }
        Table::new(raters, levels, out)
    }

    /// Two-way table from a row-major `levels x levels` grid.
    pub fn two_way(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("grid must be square".into()));
        }
        Table::new(2, k, rows.concat())
    }

    pub fn zeros(raters: usize, levels: usize) -> Result<Self> {
        let cells = cell_count(raters, levels)?;
        Table::new(raters, levels, vec![0; cells])
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }

    /// Sample size N.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        flat_index(self.levels, coords)
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        coords_of(self.raters, self.levels, flat)
    }

    pub fn get(&self, coords: &[usize]) -> u64 {
        self.counts[self.flat_index(coords)]
    }

    fn check_rater(&self, u: usize) -> Result<()> {
        if u >= self.raters {
            return Err(Error::RaterOutOfRange {
                index: u,
                raters: self.raters,
            });
        }
        Ok(())
    }

    /// One-way marginal counts of rater `u`.
    pub fn margin(&self, u: usize) -> Result<Vec<u64>> {
        self.check_rater(u)?;
        let k = self.levels;
        let stride = k.pow((self.raters - 1 - u) as u32);
        let mut m = vec![0u64; k];
        for (idx, &c) in self.counts.iter().enumerate() {
            m[(idx / stride) % k] += c;
        }
        Ok(m)
    }

    /// Two-way marginal table of raters `u < v`, row-major `k x k`.
    pub fn pair_margin(&self, u: usize, v: usize) -> Result<Vec<u64>> {
        self.check_rater(u)?;
        self.check_rater(v)?;
        if u >= v {
            return Err(Error::InvalidArgument(format!(
                "pair margin needs u < v, got ({u}, {v})"
            )));
        }
        let k = self.levels;
        let su = k.pow((self.raters - 1 - u) as u32);
        let sv = k.pow((self.raters - 1 - v) as u32);
        let mut m = vec![0u64; k * k];
        for (idx, &c) in self.counts.iter().enumerate() {
            if c != 0 {
                m[((idx / su) % k) * k + (idx / sv) % k] += c;
            }
        }
        Ok(m)
    }

    /// All one-way margins in rater order.
    pub fn fiber_statistic(&self) -> Margins {
        Margins(
            (0..self.raters)
                .map(|u| self.margin(u).expect("rater in range"))
                .collect(),
        )
    }

    /// Returns `self + m`, or [`Error::MoveRejected`] if a cell would become
    /// negative.
    pub fn apply_move(&self, m: &SignedMove) -> Result<Table> {
        if m.raters() != self.raters || m.levels() != self.levels {
            return Err(Error::DimensionMismatch(format!(
                "move is {}x{}, table is {}x{}",
                m.raters(),
                m.levels(),
                self.raters,
                self.levels
            )));
        }
        let mut counts = self.counts.clone();
        if !apply_in_place(&mut counts, m) {
            return Err(Error::MoveRejected);
        }
        Ok(Table {
            raters: self.raters,
            levels: self.levels,
            counts,
            total: self.total,
        })
    }
}

pub(crate) fn flat_index(levels: usize, coords: &[usize]) -> usize {
    coords.iter().fold(0, |acc, &c| acc * levels + c)
}

pub(crate) fn coords_of(raters: usize, levels: usize, mut flat: usize) -> Vec<usize> {
    let mut out = vec![0; raters];
    for slot in out.iter_mut().rev() {
        *slot = flat % levels;
        flat /= levels;
    }
    out
}

/// Adds a signed move to raw counts if the result stays nonnegative.
/// Leaves `counts` untouched and returns `false` otherwise.
pub(crate) fn apply_in_place(counts: &mut [u64], m: &SignedMove) -> bool {
    let (plus, minus) = m.plus_minus();
    if minus.iter().any(|&c| counts[c] == 0) {
        return false;
    }
    for &c in minus {
        counts[c] -= 1;
    }
    for &c in plus {
        counts[c] += 1;
    }
    true
}

/// Serialization form used for the `jsonMulti` file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRecord {
    pub raters: usize,
    pub levels: usize,
    pub counts: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl From<&Table> for TableRecord {
    fn from(t: &Table) -> Self {
        TableRecord {
            raters: t.raters,
            levels: t.levels,
            counts: t.counts.iter().map(|&c| c as i64).collect(),
            labels: None,
        }
    }
}

impl TryFrom<TableRecord> for Table {
    type Error = Error;

    fn try_from(r: TableRecord) -> Result<Table> {
        if let Some(labels) = &r.labels {
            if labels.len() != r.levels {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} levels",
                    labels.len(),
                    r.levels
                )));
            }
        }
        Table::from_signed(r.raters, r.levels, &r.counts)
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = TableRecord::deserialize(d)?;
        Table::try_from(rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::BasicMove;

    pub(crate) fn sample4() -> Table {
        Table::two_way(&[
            vec![5, 3, 2, 1],
            vec![1, 4, 3, 0],
            vec![0, 1, 5, 1],
            vec![0, 1, 2, 4],
        ])
        .unwrap()
    }

    fn sample3r() -> Table {
        // slices X1 = 1, 2, 3; rows X2, columns X3
        let counts = vec![
            2, 1, 0, 0, 1, 0, 0, 0, 1, //
            0, 1, 0, 1, 3, 1, 0, 0, 0, //
            0, 1, 0, 0, 1, 0, 0, 0, 3,
        ];
        Table::new(3, 3, counts).unwrap()
    }

    #[test]
    fn construction() {
        assert_eq!(sample4().total(), 33);
        assert_eq!(sample3r().total(), 16);
        assert_eq!(Table::zeros(2, 2).unwrap().total(), 0);
        assert!(matches!(
            Table::new(2, 3, vec![0; 8]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(Table::from_signed(2, 2, &[1, -1, 0, 0]).is_err());
        assert!(Table::new(1, 3, vec![0; 3]).is_err());
        assert!(Table::new(2, 1, vec![0; 1]).is_err());
    }

    #[test]
    fn margins_of_reference_tables() {
        let t = sample4();
        assert_eq!(t.margin(0).unwrap(), vec![11, 8, 7, 7]);
        assert_eq!(t.margin(1).unwrap(), vec![6, 9, 12, 6]);
        assert!(matches!(t.margin(2), Err(Error::RaterOutOfRange { .. })));
        let t4 = sample3r();
        assert_eq!(
            t4.fiber_statistic().0,
            vec![vec![5, 6, 5], vec![5, 7, 4], vec![3, 8, 5]]
        );
    }

    #[test]
    fn pair_margins() {
        let t = sample4();
        assert_eq!(t.pair_margin(0, 1).unwrap(), t.counts().to_vec());
        assert!(t.pair_margin(1, 1).is_err());
        assert!(t.pair_margin(1, 0).is_err());

        // summing the three X1 slices elementwise
        let t4 = sample3r();
        let c = t4.counts();
        let expect: Vec<u64> = (0..9).map(|i| c[i] + c[9 + i] + c[18 + i]).collect();
        assert_eq!(t4.pair_margin(1, 2).unwrap(), expect);

        let ones = Table::new(3, 2, vec![1; 8]).unwrap();
        for (u, v) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(ones.pair_margin(u, v).unwrap(), vec![2; 4]);
        }
    }

    #[test]
    fn worked_move_example() {
        let n = Table::two_way(&[
            vec![4, 0, 0, 0],
            vec![0, 4, 1, 0],
            vec![0, 0, 4, 1],
            vec![0, 0, 0, 4],
        ])
        .unwrap();
        // +1 at (2,4),(3,3); -1 at (2,3),(3,4) in 1-based coordinates
        let m = BasicMove::new(2, 4, [vec![1, 3], vec![2, 2]], [vec![1, 2], vec![2, 3]])
            .unwrap()
            .positive();
        let expected = Table::two_way(&[
            vec![4, 0, 0, 0],
            vec![0, 4, 0, 1],
            vec![0, 0, 5, 0],
            vec![0, 0, 0, 4],
        ])
        .unwrap();
        let n2 = n.apply_move(&m).unwrap();
        assert_eq!(n2, expected);
        assert_eq!(n2.apply_move(&m.negated()).unwrap(), n);
        assert_eq!(n2.fiber_statistic(), n.fiber_statistic());
    }

    #[test]
    fn negative_cell_rejected() {
        let t = Table::two_way(&[vec![1, 0], vec![0, 1]]).unwrap();
        let m = BasicMove::new(2, 2, [vec![0, 0], vec![1, 1]], [vec![0, 1], vec![1, 0]])
            .unwrap()
            .positive();
        assert_eq!(t.apply_move(&m.negated()).unwrap().counts(), &[0, 1, 1, 0]);
        let off = Table::two_way(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(
            off.apply_move(&m.negated()).unwrap_err(),
            Error::MoveRejected
        );
        let wrong = BasicMove::new(2, 3, [vec![0, 0], vec![1, 1]], [vec![0, 1], vec![1, 0]])
            .unwrap()
            .positive();
        assert!(matches!(
            t.apply_move(&wrong),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn coordinate_round_trip() {
        for flat in 0..27 {
            assert_eq!(flat_index(3, &coords_of(3, 3, flat)), flat);
        }
        assert_eq!(flat_index(4, &[2, 3]), 11);
    }

    #[test]
    fn json_round_trip() {
        let t = sample3r();
        let s = serde_json::to_string(&TableRecord::from(&t)).unwrap();
        let back: Table = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
