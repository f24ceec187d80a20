//! Disagreement weighting schemes.
//!
//! A scheme stores the disagreement weights `u[i][j] = 1 - w[i][j]`, zero on
//! the diagonal and in `(0, 1]` elsewhere. Quadratic, linear and identity
//! schemes also carry an exact integer form so that kappa values can be
//! compared without rounding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Quadratic,
    Linear,
    Sqrt,
    Identity,
    Custom,
}

impl SchemeKind {
    pub const BUILTIN: [SchemeKind; 4] = [
        SchemeKind::Quadratic,
        SchemeKind::Linear,
        SchemeKind::Sqrt,
        SchemeKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Quadratic => "quadratic",
            SchemeKind::Linear => "linear",
            SchemeKind::Sqrt => "sqrt",
            SchemeKind::Identity => "identity",
            SchemeKind::Custom => "custom",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" | "q" => Ok(SchemeKind::Quadratic),
            "linear" | "l" => Ok(SchemeKind::Linear),
            "sqrt" | "s" => Ok(SchemeKind::Sqrt),
            "identity" | "cohen" | "unweighted" => Ok(SchemeKind::Identity),
            other => Err(Error::InvalidScheme(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Exact form of a rational scheme: `u[i][j] = numerators[i*k + j] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalWeights {
    pub numerators: Vec<i64>,
    pub denominator: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementScheme {
    levels: usize,
    kind: SchemeKind,
    u: Vec<f64>,
    rational: Option<RationalWeights>,
}

fn check_levels(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidScheme(format!(
            "a scheme needs at least 2 levels, got {k}"
        )));
    }
    Ok(())
}

impl DisagreementScheme {
    fn from_integer(k: usize, kind: SchemeKind, denominator: i64, f: impl Fn(i64) -> i64) -> Self {
        let mut numerators = Vec::with_capacity(k * k);
        for i in 0..k as i64 {
            for j in 0..k as i64 {
                numerators.push(f((i - j).abs()));
            }
        }
        let u = numerators
            .iter()
            .map(|&n| n as f64 / denominator as f64)
            .collect();
        DisagreementScheme {
            levels: k,
            kind,
            u,
            rational: Some(RationalWeights {
                numerators,
                denominator,
            }),
        }
    }

    /// `u[i][j] = (i - j)^2 / (k - 1)^2`.
    pub fn quadratic(k: usize) -> Result<Self> {
        check_levels(k)?;
        let d = (k as i64 - 1).pow(2);
        Ok(Self::from_integer(k, SchemeKind::Quadratic, d, |x| x * x))
    }

    /// `u[i][j] = |i - j| / (k - 1)`.
    pub fn linear(k: usize) -> Result<Self> {
        check_levels(k)?;
        Ok(Self::from_integer(
            k,
            SchemeKind::Linear,
            k as i64 - 1,
            |x| x,
        ))
    }

    /// `u[i][j] = 1` off the diagonal; reproduces the unweighted kappa.
    pub fn identity(k: usize) -> Result<Self> {
        check_levels(k)?;
        Ok(Self::from_integer(k, SchemeKind::Identity, 1, |x| {
            i64::from(x != 0)
        }))
    }

    /// `u[i][j] = sqrt(|i - j|) / sqrt(k - 1)`. No exact form.
    pub fn sqrt(k: usize) -> Result<Self> {
        check_levels(k)?;
        let scale = ((k - 1) as f64).sqrt();
        let mut u = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                u.push((i.abs_diff(j) as f64).sqrt() / scale);
            }
        }
        Ok(DisagreementScheme {
            levels: k,
            kind: SchemeKind::Sqrt,
            u,
            rational: None,
        })
    }

    pub fn builtin(kind: SchemeKind, k: usize) -> Result<Self> {
        match kind {
            SchemeKind::Quadratic => Self::quadratic(k),
            SchemeKind::Linear => Self::linear(k),
            SchemeKind::Sqrt => Self::sqrt(k),
            SchemeKind::Identity => Self::identity(k),
            SchemeKind::Custom => Err(Error::InvalidScheme(
                "custom schemes need an explicit matrix".into(),
            )),
        }
    }

    /// Validates a user-supplied `k x k` disagreement matrix.
    pub fn custom(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        check_levels(k)?;
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidScheme("matrix must be square".into()));
        }
        for i in 0..k {
            if rows[i][i] != 0.0 {
                return Err(Error::InvalidScheme(format!(
                    "diagonal entry ({i},{i}) is {}, must be 0",
                    rows[i][i]
                )));
            }
            for j in 0..k {
                let v = rows[i][j];
                if !v.is_finite() {
                    return Err(Error::InvalidScheme(format!(
                        "entry ({i},{j}) is not finite"
                    )));
                }
                if i != j && !(v > 0.0 && v <= 1.0) {
                    return Err(Error::InvalidScheme(format!(
                        "off-diagonal entry ({i},{j}) = {v} is outside (0, 1]"
                    )));
                }
                if v != rows[j][i] {
                    return Err(Error::InvalidScheme(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(DisagreementScheme {
            levels: k,
            kind: SchemeKind::Custom,
            u: rows.concat(),
            rational: None,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.levels + j]
    }

    /// Agreement weight `w[i][j] = 1 - u[i][j]`.
    pub fn w(&self, i: usize, j: usize) -> f64 {
        1.0 - self.u(i, j)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.u
    }

    pub fn rational(&self) -> Option<&RationalWeights> {
        self.rational.as_ref()
    }

    /// Integer numerator of `u[i][j]` for rational schemes.
    #[inline]
    pub fn u_numerator(&self, i: usize, j: usize) -> Option<i64> {
        self.rational
            .as_ref()
            .map(|r| r.numerators[i * self.levels + j])
    }

    /// Whether the weights satisfy the triangle inequality on every triple.
    pub fn is_distance(&self) -> bool {
        let k = self.levels;
        for i in 0..k {
            for h in 0..k {
                for j in 0..k {
                    let ok = match &self.rational {
                        Some(r) => {
                            let n = |a: usize, b: usize| r.numerators[a * k + b];
                            n(i, j) <= n(i, h) + n(h, j)
                        }
                        None => self.u(i, j) <= self.u(i, h) + self.u(h, j) + 1e-12,
                    };
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }
}
