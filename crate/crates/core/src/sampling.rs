//! Collocation points and initial-value grids.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, so a seed
//! reproduces the same points on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Lhs,
    MidpointGrid,
    RandomInCell,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lhs" => Ok(Self::Lhs),
            "midpoint" | "midpoint-grid" => Ok(Self::MidpointGrid),
            "random" | "random-in-cell" => Ok(Self::RandomInCell),
            _ => Err(Error::Config(format!("unknown sampling scheme `{s}`"))),
        }
    }
}

/// A sampling request. For the grid schemes `count` is the number of
/// subdivisions per dimension; for LHS it is the number of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub scheme: Scheme,
    pub count: usize,
    pub bounds: Vec<Interval>,
    pub seed: u64,
}

impl SamplePlan {
    pub fn generate(&self) -> Result<Vec<Vec<f64>>> {
        match self.scheme {
            Scheme::Lhs => latin_hypercube(self.count, &self.bounds, self.seed),
            Scheme::MidpointGrid => midpoint_grid(&self.bounds, &vec![self.count; self.bounds.len()]),
            Scheme::RandomInCell => {
                random_in_cell(&self.bounds, &vec![self.count; self.bounds.len()], self.seed)
            }
        }
    }
}

fn check_bounds(bounds: &[Interval]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::Config("sampling box has no dimensions".into()));
    }
    for b in bounds {
        if Interval::new(b.lo, b.hi).is_none() {
            return Err(Error::Config(format!("invalid interval [{}, {}]", b.lo, b.hi)));
        }
    }
    Ok(())
}

/// Index of the stratum holding `x` when `iv` is cut into `n` equal parts.
pub fn stratum(iv: Interval, n: usize, x: f64) -> usize {
    (((x - iv.lo) / iv.width() * n as f64).floor() as usize).min(n - 1)
}

/// `count` points in the box with exactly one coordinate per stratum in every dimension.
pub fn latin_hypercube(count: usize, bounds: &[Interval], seed: u64) -> Result<Vec<Vec<f64>>> {
    check_bounds(bounds)?;
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; bounds.len()]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for (d, iv) in bounds.iter().enumerate() {
        strata.shuffle(&mut rng);
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            let mut x = iv.lo + iv.width() * (s as f64 + u) / count as f64;
            if stratum(*iv, count, x) != s {
                x = iv.lo + iv.width() * (s as f64 + 0.5) / count as f64;
            }
            p[d] = x;
        }
    }
    Ok(points)
}

/// One-dimensional LHS on `[0, 1]`, the usual collocation set.
pub fn lhs_unit(count: usize, seed: u64) -> Result<Vec<f64>> {
    let unit = Interval { lo: 0.0, hi: 1.0 };
    Ok(latin_hypercube(count, &[unit], seed)?
        .into_iter()
        .map(|p| p[0])
        .collect())
}

fn check_subdivisions(bounds: &[Interval], subdivisions: &[usize]) -> Result<()> {
    check_bounds(bounds)?;
    if subdivisions.len() != bounds.len() || subdivisions.contains(&0) {
        return Err(Error::Config(
            "need one positive subdivision count per dimension".into(),
        ));
    }
    Ok(())
}

/// Cartesian product of per-dimension index ranges, last dimension fastest.
fn cells(subdivisions: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &m in subdivisions {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..m).map(move |j| {
                    let mut c = prefix.clone();
                    c.push(j);
                    c
                })
            })
            .collect();
    }
    out
}

/// Centre of every cell of the subdivided box.
pub fn midpoint_grid(bounds: &[Interval], subdivisions: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_subdivisions(bounds, subdivisions)?;
    Ok(cells(subdivisions)
        .into_iter()
        .map(|cell| {
            cell.iter()
                .zip(bounds)
                .zip(subdivisions)
                .map(|((&j, iv), &m)| iv.lo + (j as f64 + 0.5) * iv.width() / m as f64)
                .collect()
        })
        .collect())
}

/// One uniform point strictly inside every cell of the subdivided box.
pub fn random_in_cell(
    bounds: &[Interval],
    subdivisions: &[usize],
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_subdivisions(bounds, subdivisions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(cells(subdivisions)
        .into_iter()
        .map(|cell| {
            cell.iter()
                .zip(bounds)
                .zip(subdivisions)
                .map(|((&j, iv), &m)| {
                    let h = iv.width() / m as f64;
                    let lo = iv.lo + j as f64 * h;
                    let hi = if j + 1 == m { iv.hi } else { lo + h };
                    loop {
                        let x = rng.gen_range(lo..hi);
                        if x > lo {
                            break x;
                        }
                    }
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    #[test]
    fn lhs_stratified() {
        for n in [4, 5, 50, 500, 1000] {
            let pts = lhs_unit(n, 1234).unwrap();
            let mut seen = vec![false; n];
            for &t in &pts {
                assert!(UNIT.contains(t));
                let s = stratum(UNIT, n, t);
                assert!(!seen[s], "stratum {s} hit twice for n = {n}");
                seen[s] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn lhs_multi_dimensional() {
        let bounds = vec![Interval { lo: -30.0, hi: 30.0 }; 10];
        let pts = latin_hypercube(200, &bounds, 7).unwrap();
        for d in 0..10 {
            let mut hits: Vec<usize> = pts.iter().map(|p| stratum(bounds[d], 200, p[d])).collect();
            hits.sort_unstable();
            assert_eq!(hits, (0..200).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lhs_is_seeded() {
        assert_eq!(lhs_unit(100, 9).unwrap(), lhs_unit(100, 9).unwrap());
        assert_ne!(lhs_unit(100, 9).unwrap(), lhs_unit(100, 10).unwrap());
    }

    #[test]
    fn midpoints_on_negative_interval() {
        let iv = [Interval { lo: -40.0, hi: 0.0 }];
        assert_eq!(midpoint_grid(&iv, &[2]).unwrap(), vec![vec![-30.0], vec![-10.0]]);
        let pts = midpoint_grid(&iv, &[32]).unwrap();
        assert_eq!(pts.len(), 32);
        for (j, p) in pts.iter().enumerate() {
            assert_eq!(p[0], -39.375 + 1.25 * j as f64);
        }
    }

    #[test]
    fn square_grid() {
        let b = vec![Interval { lo: -15.0, hi: 15.0 }; 2];
        let pts = midpoint_grid(&b, &[7, 7]).unwrap();
        assert_eq!(pts.len(), 49);
        assert_eq!(pts[0], vec![-12.857142857142858, -12.857142857142858]);
        assert_eq!(pts[24], vec![0.0, 0.0]);
    }

    #[test]
    fn random_cells() {
        let b = vec![Interval { lo: -5.0, hi: 5.0 }; 2];
        let pts = random_in_cell(&b, &[10, 10], 3).unwrap();
        assert_eq!(pts.len(), 100);
        for (k, p) in pts.iter().enumerate() {
            let (i, j) = (k / 10, k % 10);
            let (lx, ly) = (-5.0 + i as f64, -5.0 + j as f64);
            assert!(p[0] > lx && p[0] < lx + 1.0);
            assert!(p[1] > ly && p[1] < ly + 1.0);
        }
        assert_eq!(pts, random_in_cell(&b, &[10, 10], 3).unwrap());
    }

    #[test]
    fn single_cell() {
        let b = [Interval { lo: 2.0, hi: 3.0 }];
        let pts = random_in_cell(&b, &[1], 0).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0][0] > 2.0 && pts[0][0] < 3.0);
    }

    #[test]
    fn invalid_inputs() {
        let bad = Interval { lo: 1.0, hi: 1.0 };
        assert!(midpoint_grid(&[bad], &[2]).is_err());
        assert!(midpoint_grid(&[UNIT], &[0]).is_err());
        assert!(latin_hypercube(0, &[UNIT], 1).is_err());
    }
}
