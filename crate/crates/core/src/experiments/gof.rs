//! Chi-square tests used to compare samplers against exact distributions
//! and against each other.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Expected count below which adjacent cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    fn from_statistic(statistic: f64, df: usize) -> Result<Self> {
        if df == 0 {
            return Err(Error::validation("chi-square test needs at least two cells"));
        }
        let dist = ChiSquared::new(df as f64).map_err(|e| Error::validation(e.to_string()))?;
        Ok(Self {
            statistic,
            df,
            p_value: dist.sf(statistic),
        })
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Upper `alpha` quantile of the chi-square distribution with `df` degrees.
pub fn chi_square_critical(df: usize, alpha: f64) -> Result<f64> {
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::validation(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Pearson goodness of fit of `observed` cell counts to `probs`.
///
/// Cells are pooled left to right until each pooled cell expects at least
/// [`MIN_EXPECTED`] observations; a short remainder joins the last pool.
/// Cells with zero probability must be empty.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() {
        return Err(Error::Shape {
            expected: probs.len(),
            actual: observed.len(),
        });
    }
    let n: u64 = observed.iter().sum();
    let mut pools: Vec<(f64, f64)> = vec![];
    let (mut e, mut o) = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            if obs > 0 {
                return Err(Error::validation("observation in a zero-probability cell"));
            }
            continue;
        }
        e += p * n as f64;
        o += obs as f64;
        if e >= MIN_EXPECTED {
            pools.push((o, e));
            (e, o) = (0.0, 0.0);
        }
    }
    if e > 0.0 || o > 0.0 {
        match pools.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pools.push((o, e)),
        }
    }
    let statistic = pools.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    ChiSquareTest::from_statistic(statistic, pools.len().saturating_sub(1))
}

/// Two-sample chi-square homogeneity test on paired cell counts, with the
/// same left-to-right pooling on the combined expectation.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::validation("homogeneity test needs two non-empty samples"));
    }
    let n = na + nb;
    let mut pools: Vec<(f64, f64)> = vec![];
    let (mut pa, mut pb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        pa += x as f64;
        pb += y as f64;
        let total = pa + pb;
        if total * na.min(nb) / n >= MIN_EXPECTED {
            pools.push((pa, pb));
            (pa, pb) = (0.0, 0.0);
        }
    }
    if pa + pb > 0.0 {
        match pools.last_mut() {
            Some(last) => {
                last.0 += pa;
                last.1 += pb;
            }
            None => pools.push((pa, pb)),
        }
    }
    let statistic = pools
        .iter()
        .map(|&(x, y)| {
            let t = x + y;
            let (ea, eb) = (t * na / n, t * nb / n);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    ChiSquareTest::from_statistic(statistic, pools.len().saturating_sub(1))
}
