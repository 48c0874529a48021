//! Finite-state chains and an empirical first-order Markov test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum trajectory length accepted by [`test_markov_order1`].
pub const MIN_TRAJECTORY: usize = 10_000;

/// Conditioning contexts seen fewer times than this are ignored.
pub const COUNT_FLOOR: usize = 50;

pub const DEFAULT_ALPHA: f64 = 0.05;

const ROW_TOL: f64 = 1e-12;

/// `transition[b][c] = P(c | b)`; with `second_order`, row `a·S + b` holds
/// `P(c | a, b)` for the two preceding states `a, b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub states: usize,
    pub transition: Vec<Vec<f64>>,
    #[serde(default)]
    pub second_order: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl ChainSpec {
    pub fn first_order(transition: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let spec = Self { states: transition.len(), transition, second_order: None, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn second_order(transition: Vec<Vec<f64>>, second: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let spec = Self { states: transition.len(), transition, second_order: Some(second), seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn order(&self) -> usize {
        if self.second_order.is_some() {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::InvalidInput("a chain needs at least one state".into()));
        }
        check_rows(&self.transition, self.states, self.states, "transition")?;
        if let Some(second) = &self.second_order {
            check_rows(second, self.states * self.states, self.states, "second_order")?;
        }
        Ok(())
    }
}

fn check_rows(rows: &[Vec<f64>], n_rows: usize, width: usize, name: &str) -> Result<()> {
    if rows.len() != n_rows {
        return Err(Error::Shape(format!("{name} must have {n_rows} rows, got {}", rows.len())));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Shape(format!("{name} row {r} must have {width} entries")));
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(format!("{name} row {r} has an entry outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(Error::Normalization(format!("{name} row {r} sums to {sum}")));
        }
    }
    Ok(())
}

pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // round-off: fall back to the last state with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Seeded trajectory. The first state is uniform; the second uses the
/// first-order table; later states use the second-order table when present.
pub fn simulate_chain(chain: &ChainSpec, length: usize) -> Result<Vec<usize>> {
    chain.validate()?;
    if length < 3 {
        return Err(Error::InvalidInput(format!("trajectory length must be at least 3, got {length}")));
    }
    let s = chain.states;
    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    let mut out = Vec::with_capacity(length);
    out.push(rng.random_range(0..s));
    let first = out[0];
    out.push(sample_index(&mut rng, &chain.transition[first]));
    for n in 2..length {
        let (a, b) = (out[n - 2], out[n - 1]);
        let row = match &chain.second_order {
            Some(second) => &second[a * s + b],
            None => &chain.transition[b],
        };
        out.push(sample_index(&mut rng, row));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTestResult {
    pub is_markov: bool,
    pub max_tv: f64,
    /// Conditioning pairs that passed the count floor.
    pub pairs_tested: usize,
}

/// Compares `P(X_n | X_{n-1})` with `P(X_n | X_{n-2}, X_{n-1})` in total variation.
pub fn test_markov_order1(trajectory: &[usize], alpha: f64) -> Result<MarkovTestResult> {
    if trajectory.len() < MIN_TRAJECTORY {
        return Err(Error::InsufficientData(format!(
            "trajectory has {} steps, need at least {MIN_TRAJECTORY}",
            trajectory.len()
        )));
    }
    let s = trajectory.iter().max().map_or(0, |m| m + 1);
    let mut one = vec![0usize; s * s];
    let mut two = vec![0usize; s * s * s];
    for w in trajectory.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        one[b * s + c] += 1;
        two[(a * s + b) * s + c] += 1;
    }
    let mut max_tv: f64 = 0.0;
    let mut pairs_tested = 0;
    for a in 0..s {
        for b in 0..s {
            let row2 = &two[(a * s + b) * s..(a * s + b + 1) * s];
            let n2: usize = row2.iter().sum();
            if n2 < COUNT_FLOOR {
                continue;
            }
            let row1 = &one[b * s..(b + 1) * s];
            let n1: usize = row1.iter().sum();
            let tv = 0.5
                * row1
                    .iter()
                    .zip(row2)
                    .map(|(&c1, &c2)| (c1 as f64 / n1 as f64 - c2 as f64 / n2 as f64).abs())
                    .sum::<f64>();
            max_tv = max_tv.max(tv);
            pairs_tested += 1;
        }
    }
    if pairs_tested == 0 {
        return Err(Error::InsufficientData(format!("no conditioning pair reached {COUNT_FLOOR} counts")));
    }
    Ok(MarkovTestResult { is_markov: max_tv <= alpha, max_tv, pairs_tested })
}
