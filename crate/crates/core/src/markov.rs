//! Basic moves and Markov bases for fibers with fixed one-way margins.
//!
//! A basic move has two `+1` cells and two `-1` cells arranged so every
//! one-way margin of the move is zero. For two raters these are the usual
//! `2 x 2` swaps; for more raters the `-1` cells mix the coordinates of the
//! two `+1` cells along a proper nonempty subset of the coordinates in which
//! they differ.
//!
//! Bases store unsigned moves: a move and its negation are the same basis
//! element, and a sign is attached when a move is drawn.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{cell_count, coords_of, flat_index};

/// An unsigned basic move, stored by flat cell indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasicMove {
    raters: usize,
    levels: usize,
    plus: [usize; 2],
    minus: [usize; 2],
}

/// A basic move with a sign attached, ready to be added to a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedMove {
    raters: usize,
    levels: usize,
    plus: [usize; 2],
    minus: [usize; 2],
}

/// Two-way projection of a basic move onto a pair of raters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Null,
    /// A two-way basic move, cells given as `(row, column)`.
    Basic {
        plus: [(usize, usize); 2],
        minus: [(usize, usize); 2],
    },
}

impl BasicMove {
    /// Builds a move from cell coordinates and checks that it is a basic move.
    pub fn new(
        raters: usize,
        levels: usize,
        plus: [Vec<usize>; 2],
        minus: [Vec<usize>; 2],
    ) -> Result<Self> {
        for c in plus.iter().chain(minus.iter()) {
            if c.len() != raters || c.iter().any(|&x| x >= levels) {
                return Err(Error::DimensionMismatch(format!(
                    "cell {c:?} is not a valid coordinate for {raters} raters and {levels} levels"
                )));
            }
        }
        let differing = (0..raters).filter(|&s| plus[0][s] != plus[1][s]).count();
        if differing < 2 {
            return Err(Error::InvalidArgument(
                "the two +1 cells must differ in at least two coordinates".into(),
            ));
        }
        for s in 0..raters {
            let mut p = [plus[0][s], plus[1][s]];
            let mut m = [minus[0][s], minus[1][s]];
            p.sort_unstable();
            m.sort_unstable();
            if p != m {
                return Err(Error::InvalidArgument(format!(
                    "move has a nonzero margin for rater {s}"
                )));
            }
        }
        let mv = BasicMove {
            raters,
            levels,
            plus: [flat_index(levels, &plus[0]), flat_index(levels, &plus[1])],
            minus: [flat_index(levels, &minus[0]), flat_index(levels, &minus[1])],
        };
        let cells: HashSet<usize> = mv.plus.iter().chain(mv.minus.iter()).copied().collect();
        if cells.len() != 4 {
            return Err(Error::InvalidArgument("move cells must be distinct".into()));
        }
        Ok(mv)
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn plus_cells(&self) -> [usize; 2] {
        self.plus
    }

    pub fn minus_cells(&self) -> [usize; 2] {
        self.minus
    }

    pub fn plus_coords(&self) -> [Vec<usize>; 2] {
        self.plus.map(|c| coords_of(self.raters, self.levels, c))
    }

    pub fn minus_coords(&self) -> [Vec<usize>; 2] {
        self.minus.map(|c| coords_of(self.raters, self.levels, c))
    }

    pub fn positive(&self) -> SignedMove {
        SignedMove {
            raters: self.raters,
            levels: self.levels,
            plus: self.plus,
            minus: self.minus,
        }
    }

    pub fn negative(&self) -> SignedMove {
        self.positive().negated()
    }

    pub fn with_sign(&self, positive: bool) -> SignedMove {
        if positive {
            self.positive()
        } else {
            self.negative()
        }
    }

    /// Key shared by a move and its negation.
    fn unsigned_key(&self) -> ([usize; 2], [usize; 2]) {
        let mut a = self.plus;
        let mut b = self.minus;
        a.sort_unstable();
        b.sort_unstable();
        if a[0] > b[0] {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Dense signed entries of the move, length `levels^raters`.
    pub fn to_dense(&self) -> Vec<i64> {
        self.positive().to_dense()
    }

    /// One-way margins of the move; all zero for a valid basic move.
    pub fn margins(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0i64; self.levels]; self.raters];
        let cells = self
            .plus
            .iter()
            .map(|&c| (c, 1i64))
            .chain(self.minus.iter().map(|&c| (c, -1)));
        for (c, s) in cells {
            for (u, x) in coords_of(self.raters, self.levels, c)
                .into_iter()
                .enumerate()
            {
                out[u][x] += s;
            }
        }
        out
    }

    /// Projection onto the two-way margin of raters `u < v`.
    pub fn pair_projection(&self, u: usize, v: usize) -> Result<Projection> {
        if u >= v || v >= self.raters {
            return Err(Error::InvalidArgument(format!(
                "invalid rater pair ({u}, {v}) for {} raters",
                self.raters
            )));
        }
        let proj = |c: usize| {
            let x = coords_of(self.raters, self.levels, c);
            (x[u], x[v])
        };
        let plus = self.plus.map(proj);
        let minus = self.minus.map(proj);
        let distinct: HashSet<_> = plus.iter().chain(minus.iter()).collect();
        Ok(if distinct.len() == 4 {
            Projection::Basic { plus, minus }
        } else {
            Projection::Null
        })
    }

    /// Whether both `+1` cells lie on the main diagonal `(i, ..., i)`.
    pub fn is_diagonal(&self) -> bool {
        self.plus.iter().all(|&c| {
            let x = coords_of(self.raters, self.levels, c);
            x.iter().all(|&v| v == x[0])
        })
    }
}

impl SignedMove {
    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn negated(&self) -> SignedMove {
        SignedMove {
            plus: self.minus,
            minus: self.plus,
            ..*self
        }
    }

    pub fn plus_minus(&self) -> (&[usize; 2], &[usize; 2]) {
        (&self.plus, &self.minus)
    }

    /// Iterates `(flat cell, +1 | -1)` over the four nonzero entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.plus
            .iter()
            .map(|&c| (c, 1))
            .chain(self.minus.iter().map(|&c| (c, -1)))
    }

    pub fn to_dense(&self) -> Vec<i64> {
        let cells = cell_count(self.raters, self.levels).expect("valid move dimensions");
        let mut out = vec![0; cells];
        for (c, s) in self.entries() {
            out[c] += s;
        }
        out
    }
}

/// A finite set of unsigned basic moves for a given `(raters, levels)`.
#[derive(Debug, Clone)]
pub struct MarkovBasis {
    raters: usize,
    levels: usize,
    moves: Vec<BasicMove>,
}

impl MarkovBasis {
    /// Builds a basis from moves, dropping duplicates and negations.
    pub fn from_moves(
        raters: usize,
        levels: usize,
        moves: impl IntoIterator<Item = BasicMove>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in moves {
            if m.raters != raters || m.levels != levels {
                return Err(Error::DimensionMismatch(
                    "move dimensions differ from the basis".into(),
                ));
            }
            if seen.insert(m.unsigned_key()) {
                out.push(m);
            }
        }
        Ok(MarkovBasis {
            raters,
            levels,
            moves: out,
        })
    }

    /// Basic moves for two raters: `+1` at `(i, j), (i', j')` and `-1` at
    /// `(i, j'), (i', j)` for `i < i'`, `j < j'`.
    pub fn two_way(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument("levels must be at least 2".into()));
        }
        let k = levels;
        let mut moves = Vec::with_capacity((k * (k - 1) / 2).pow(2));
        for i in 0..k {
            for i2 in i + 1..k {
                for j in 0..k {
                    for j2 in j + 1..k {
                        moves.push(BasicMove {
                            raters: 2,
                            levels: k,
                            plus: [i * k + j, i2 * k + j2],
                            minus: [i * k + j2, i2 * k + j],
                        });
                    }
                }
            }
        }
        Ok(MarkovBasis {
            raters: 2,
            levels: k,
            moves,
        })
    }

    /// Basic moves for three or more raters.
    pub fn multi_way(raters: usize, levels: usize) -> Result<Self> {
        if raters < 3 {
            return Err(Error::InvalidArgument(format!(
                "multi-way basis needs at least 3 raters, got {raters}"
            )));
        }
        Self::generic(raters, levels)
    }

    /// Two-way basis for two raters, multi-way basis otherwise.
    pub fn for_dims(raters: usize, levels: usize) -> Result<Self> {
        if raters == 2 {
            Self::two_way(levels)
        } else {
            Self::multi_way(raters, levels)
        }
    }

    /// The subset-mixing construction, valid for any `raters >= 2`.
    pub(crate) fn generic(raters: usize, levels: usize) -> Result<Self> {
        if raters < 2 || levels < 2 {
            return Err(Error::InvalidArgument(
                "raters and levels must be at least 2".into(),
            ));
        }
        let cells = cell_count(raters, levels)?;
        let coords: Vec<Vec<usize>> = (0..cells).map(|c| coords_of(raters, levels, c)).collect();
        let mut moves = Vec::new();
        for a in 0..cells {
            for b in a + 1..cells {
                moves.extend(moves_for_pair(levels, &coords[a], &coords[b]));
            }
        }
        Self::from_moves(raters, levels, moves)
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn moves(&self) -> &[BasicMove] {
        &self.moves
    }

    /// Number of unsigned moves.
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Uniform draw over moves and signs.
    pub fn random_move<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SignedMove> {
        if self.moves.is_empty() {
            return Err(Error::InvalidArgument("empty basis".into()));
        }
        let idx = rng.gen_range(0..self.moves.len());
        Ok(self.moves[idx].with_sign(rng.gen::<bool>()))
    }
}

/// All moves with `+1` at cells `a` and `b`: one per proper nonempty subset
/// of the differing coordinates, up to complement (`2^(q-1) - 1` moves when
/// they differ in `q >= 2` coordinates, none otherwise).
pub fn moves_for_pair(levels: usize, a: &[usize], b: &[usize]) -> Vec<BasicMove> {
    let raters = a.len();
    let diff: Vec<usize> = (0..raters).filter(|&s| a[s] != b[s]).collect();
    let q = diff.len();
    if q < 2 {
        return Vec::new();
    }
    let pa = flat_index(levels, a);
    let pb = flat_index(levels, b);
    // subsets always containing diff[0], excluding the full set
    let mut out = Vec::with_capacity((1 << (q - 1)) - 1);
    for rest in 0u32..(1 << (q - 1)) - 1 {
        let in_subset = |pos: usize| pos == 0 || rest & (1 << (pos - 1)) != 0;
        let mut j = a.to_vec();
        let mut j2 = b.to_vec();
        for (pos, &s) in diff.iter().enumerate() {
            if !in_subset(pos) {
                j[s] = b[s];
                j2[s] = a[s];
            }
        }
        out.push(BasicMove {
            raters,
            levels,
            plus: [pa, pb],
            minus: [flat_index(levels, &j), flat_index(levels, &j2)],
        });
    }
    out
}

/// Basis moves whose two `+1` cells are `(i, ..., i)` and `(j, ..., j)`.
pub fn diagonal_moves(raters: usize, levels: usize) -> Result<Vec<BasicMove>> {
    if raters < 2 || levels < 2 {
        return Err(Error::InvalidArgument(
            "raters and levels must be at least 2".into(),
        ));
    }
    let mut out = Vec::new();
    for i in 0..levels {
        for j in i + 1..levels {
            out.extend(moves_for_pair(levels, &vec![i; raters], &vec![j; raters]));
        }
    }
    Ok(out)
}

/// JSON form of a move, cells as coordinate lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub plus: [Vec<usize>; 2],
    pub minus: [Vec<usize>; 2],
}

impl From<&BasicMove> for MoveRecord {
    fn from(m: &BasicMove) -> Self {
        MoveRecord {
            plus: m.plus_coords(),
            minus: m.minus_coords(),
        }
    }
}
