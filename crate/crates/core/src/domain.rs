//! Axis-aligned boxes in state space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("empty interval for x{var}: [{lo}, {hi}]")]
    Inverted { var: usize, lo: f64, hi: f64 },
    #[error("non-finite bound for x{0}")]
    NotFinite(usize),
    #[error("malformed domain `{0}` (expected e.g. x1=-2:2,x2=-1:1)")]
    Malformed(String),
    #[error("domain has {got} coordinates, expected {want}")]
    Dimension { got: usize, want: usize },
}

/// Closed box `[lo_i, hi_i]` per state coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Domain, DomainError> {
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(DomainError::NotFinite(i + 1));
            }
            if lo > hi {
                return Err(DomainError::Inverted { var: i + 1, lo, hi });
            }
        }
        Ok(Domain { bounds })
    }

    /// `[-half, half]^n`.
    pub fn cube(n: usize, half: f64) -> Domain {
        Domain {
            bounds: vec![(-half, half); n],
        }
    }

    /// `[-2,2]^2` for second order and `[-1,1]^3` for third order.
    pub fn default_for(order: usize) -> Domain {
        if order == 3 {
            Domain::cube(3, 1.0)
        } else {
            Domain::cube(order, 2.0)
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains_origin(&self) -> bool {
        self.bounds.iter().all(|&(lo, hi)| lo <= 0.0 && 0.0 <= hi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(x)
                .all(|(&(lo, hi), &v)| lo <= v && v <= hi)
    }

    /// Every bound scaled towards the origin by `1/factor`.
    pub fn shrink(&self, factor: f64) -> Domain {
        self.scale(1.0 / factor)
    }

    pub fn scale(&self, s: f64) -> Domain {
        Domain {
            bounds: self.bounds.iter().map(|&(lo, hi)| (lo * s, hi * s)).collect(),
        }
    }

    /// Largest absolute bound over all axes.
    pub fn radius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo.abs().max(hi.abs()))
            .fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|&(lo, hi)| hi - lo).product()
    }

    /// Coordinates of a uniform grid along axis `i`.
    pub fn axis(&self, i: usize, resolution: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[i];
        if resolution <= 1 {
            return vec![0.5 * (lo + hi)];
        }
        let step = (hi - lo) / (resolution - 1) as f64;
        (0..resolution)
            .map(|k| if k + 1 == resolution { hi } else { lo + step * k as f64 })
            .collect()
    }

    /// All points of the `resolution^n` tensor grid, last axis fastest.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.axis(i, resolution)).collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut p = vec![0.0; self.dim()];
            for i in (0..self.dim()).rev() {
                let len = axes[i].len();
                p[i] = axes[i][k % len];
                k /= len;
            }
            out.push(p);
        }
        out
    }

    /// Corners of the box (`2^n` points).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        let (lo, hi) = self.bounds[i];
                        if mask >> i & 1 == 1 {
                            hi
                        } else {
                            lo
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn check_dim(&self, want: usize) -> Result<(), DomainError> {
        if self.dim() == want {
            Ok(())
        } else {
            Err(DomainError::Dimension {
                got: self.dim(),
                want,
            })
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for Domain {
    type Error = DomainError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Domain, DomainError> {
        Domain::new(v.into_iter().map(|[lo, hi]| (lo, hi)).collect())
    }
}

impl From<Domain> for Vec<[f64; 2]> {
    fn from(d: Domain) -> Self {
        d.bounds.into_iter().map(|(lo, hi)| [lo, hi]).collect()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "x{}={lo}:{hi}", i + 1)?;
        }
        Ok(())
    }
}

/// Parses `x1=-2:2,x2=-1:1`. Variables must appear in order `x1, x2, ...`.
impl FromStr for Domain {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Domain, DomainError> {
        let bad = || DomainError::Malformed(s.to_string());
        let mut bounds = Vec::new();
        for (i, part) in s.split(',').enumerate() {
            let (name, range) = part.trim().split_once('=').ok_or_else(bad)?;
            if name.trim() != format!("x{}", i + 1) {
                return Err(bad());
            }
            let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            bounds.push((lo, hi));
        }
        Domain::new(bounds)
    }
}
