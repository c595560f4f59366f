//! Symmetric two-player zero-sum normal-form games.
//!
//! A game is stored as the row player's payoff matrix `G`, which is
//! antisymmetric with a zero diagonal. Mixed strategies are probability
//! vectors over the game's pure strategies; a pure strategy is a one-hot
//! vector. All oracles here are exact: no sampling is involved.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of a probability vector's sum from 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Named fixture games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// Rock-Paper-Scissors with unit wins.
    Rps,
    /// Rock-Paper-Scissors plus a fourth strategy that earns 2/5 against each
    /// of the first three. The fourth strategy is the unique pure Nash
    /// equilibrium, yet Rectified PSRO never discovers it.
    RectifiedCounterexample,
}

impl Fixture {
    pub const ALL: [Fixture; 2] = [Fixture::Rps, Fixture::RectifiedCounterexample];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Rps => "rps",
            Fixture::RectifiedCounterexample => "rectified_counterexample",
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFixture(s.to_string()))
    }
}

/// Where a payoff matrix came from. Carried along so that checkpoints and
/// traces can name the game they were produced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GameOrigin {
    Random { seed: u64 },
    Fixture { name: Fixture },
    Custom,
}

/// Row-player payoff matrix of a symmetric zero-sum game.
///
/// Invariants: `entries[i][j] == -entries[j][i]`, zero diagonal, every entry
/// in `[-1, 1]`. They are checked at construction and cannot be broken
/// afterwards since the matrix is immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    dim: usize,
    entries: Vec<f64>,
    origin: GameOrigin,
}

impl PayoffMatrix {
    /// Builds a matrix from rows, validating the invariants exactly.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Self::from_flat(dim, entries, GameOrigin::Custom)
    }

    pub(crate) fn from_flat(dim: usize, entries: Vec<f64>, origin: GameOrigin) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if entries.len() != dim * dim {
            return Err(Error::Shape {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        for i in 0..dim {
            for j in i..dim {
                let value = entries[i * dim + j];
                let mirror = entries[j * dim + i];
                if !value.is_finite() || value.abs() > 1.0 {
                    return Err(Error::PayoffOutOfRange {
                        row: i,
                        col: j,
                        value,
                    });
                }
                if value != -mirror {
                    return Err(Error::NotAntisymmetric {
                        row: i,
                        col: j,
                        value,
                        mirror,
                    });
                }
            }
        }
        Ok(Self {
            dim,
            entries,
            origin,
        })
    }

    /// Builds a matrix without validation. Callers guarantee the invariants.
    pub(crate) fn from_flat_unchecked(dim: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self {
            dim,
            entries,
            origin: GameOrigin::Custom,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> GameOrigin {
        self.origin
    }

    pub fn with_origin(mut self, origin: GameOrigin) -> Self {
        self.origin = origin;
        self
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// `G · x` for an arbitrary vector of matching length.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.rows().map(|row| dot(row, x)).collect())
    }

    /// Payoff of every pure strategy against `opponent`.
    pub fn payoffs_against(&self, opponent: &MixedStrategy) -> Result<Vec<f64>> {
        self.apply(opponent.probs())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_value = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    (best, best_value)
}

/// A probability distribution over pure strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    /// Validates that `probs` is a nonempty, nonnegative vector summing to 1
    /// within [`SIMPLEX_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::NotSimplex(format!("entry {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotSimplex(format!("sum is {sum}")));
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(Self::new(probs.clone()).is_ok(), "{probs:?}");
        Self { probs }
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self {
            probs: vec![1.0 / dim as f64; dim],
        })
    }

    /// One-hot vector on `index`.
    pub fn pure(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut probs = vec![0.0; dim];
        probs[index] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Returns the index if all mass sits on a single pure strategy.
    pub fn as_pure(&self) -> Option<usize> {
        let mut found = None;
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 1.0 {
                found = Some(i);
            } else if p != 0.0 {
                return None;
            }
        }
        found
    }

    /// Largest absolute coordinate difference. Panics on length mismatch.
    pub fn linf_distance(&self, other: &MixedStrategy) -> f64 {
        assert_eq!(self.len(), other.len(), "strategy length mismatch");
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &MixedStrategy) -> f64 {
        assert_eq!(self.len(), other.len(), "strategy length mismatch");
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl AsRef<MixedStrategy> for MixedStrategy {
    fn as_ref(&self) -> &MixedStrategy {
        self
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.probs
    }
}

/// Random antisymmetric game: upper-triangle entries i.i.d. uniform on the
/// open interval (-1, 1), lower triangle negated, diagonal zero. Identical
/// `(dim, seed)` pairs yield bit-identical matrices.
pub fn generate_random_game(dim: usize, seed: u64) -> Result<PayoffMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i + 1..dim {
            let value = loop {
                // gen::<f64>() is in [0, 1); reject the single point mapping to -1.
                let v = 2.0 * rng.gen::<f64>() - 1.0;
                if v > -1.0 {
                    break v;
                }
            };
            entries[i * dim + j] = value;
            entries[j * dim + i] = -value;
        }
    }
    Ok(PayoffMatrix {
        dim,
        entries,
        origin: GameOrigin::Random { seed },
    })
}

pub fn canonical_game(fixture: Fixture) -> PayoffMatrix {
    const W: f64 = 2.0 / 5.0;
    let rows = match fixture {
        Fixture::Rps => vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ],
        Fixture::RectifiedCounterexample => vec![
            vec![0.0, -1.0, 1.0, -W],
            vec![1.0, 0.0, -1.0, -W],
            vec![-1.0, 1.0, 0.0, -W],
            vec![W, W, W, 0.0],
        ],
    };
    PayoffMatrix::from_rows(rows)
        .expect("fixture games are antisymmetric")
        .with_origin(GameOrigin::Fixture { name: fixture })
}

/// Looks a fixture up by name.
pub fn canonical_game_by_name(name: &str) -> Result<PayoffMatrix> {
    Ok(canonical_game(name.parse()?))
}

/// Pure best response to `opponent`; ties go to the lowest index.
pub fn best_response(game: &PayoffMatrix, opponent: &MixedStrategy) -> Result<usize> {
    Ok(argmax(&game.payoffs_against(opponent)?).0)
}

/// `max_i (G · opponent)[i]`.
pub fn best_response_value(game: &PayoffMatrix, opponent: &MixedStrategy) -> Result<f64> {
    Ok(argmax(&game.payoffs_against(opponent)?).1)
}

/// `rowᵀ · G · col`.
///
/// Evaluated as `Σ_{i<j} G_ij (row_i col_j − row_j col_i)`, which makes the
/// result exactly antisymmetric in its two strategy arguments (and exactly 0
/// when they coincide) in floating point, not just in exact arithmetic.
pub fn expected_utility(
    game: &PayoffMatrix,
    row: &MixedStrategy,
    col: &MixedStrategy,
) -> Result<f64> {
    game.check_len(row.len())?;
    game.check_len(col.len())?;
    let (a, b) = (row.probs(), col.probs());
    let n = game.dim();
    let mut total = 0.0;
    for i in 0..n {
        let g = game.row(i);
        let mut acc = 0.0;
        for j in i + 1..n {
            acc += g[j] * (a[i] * b[j] - a[j] * b[i]);
        }
        total += acc;
    }
    Ok(total)
}

/// Exploitability of the symmetric profile `(strategy, strategy)`.
///
/// For a two-player profile this is the mean of both best-response gains;
/// in a symmetric zero-sum game both gains coincide, so it reduces to the
/// best-response value against `strategy`. Never negative: the strategy
/// itself earns 0 against itself.
pub fn exploitability(game: &PayoffMatrix, strategy: &MixedStrategy) -> Result<f64> {
    let gain = best_response_value(game, strategy)?;
    Ok(0.5 * (gain + gain))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rps() -> PayoffMatrix {
        canonical_game(Fixture::Rps)
    }

    fn counterexample() -> PayoffMatrix {
        canonical_game(Fixture::RectifiedCounterexample)
    }

    fn third_each_of_three() -> MixedStrategy {
        MixedStrategy::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap()
    }

    #[test]
    fn random_game_dim_one_is_zero() {
        for seed in [0, 1, u64::MAX] {
            let g = generate_random_game(1, seed).unwrap();
            assert_eq!(g.to_rows(), vec![vec![0.0]]);
        }
    }

    #[test]
    fn random_game_is_antisymmetric() {
        let g = generate_random_game(5, 7).unwrap();
        assert_eq!(g.get(2, 4), -g.get(4, 2));
        for i in 0..5 {
            assert_eq!(g.get(i, i), 0.0);
            for j in 0..5 {
                assert_eq!(g.get(i, j), -g.get(j, i));
                assert!(g.get(i, j) > -1.0 && g.get(i, j) < 1.0);
            }
        }
    }

    #[test]
    fn random_game_is_deterministic() {
        let a = generate_random_game(60, 12345).unwrap();
        let b = generate_random_game(60, 12345).unwrap();
        let bits = |g: &PayoffMatrix| g.entries.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&generate_random_game(60, 12346).unwrap()));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(generate_random_game(0, 3), Err(Error::InvalidDimension(0)));
        assert!(MixedStrategy::uniform(0).is_err());
    }

    #[test]
    fn best_response_examples() {
        let rock = MixedStrategy::pure(3, 0).unwrap();
        assert_eq!(best_response(&rps(), &rock).unwrap(), 1);
        assert_eq!(
            best_response(&rps(), &MixedStrategy::uniform(3).unwrap()).unwrap(),
            0
        );
        assert_eq!(
            best_response(&counterexample(), &third_each_of_three()).unwrap(),
            3
        );
    }

    #[test]
    fn best_response_value_examples() {
        assert_eq!(
            best_response_value(&rps(), &MixedStrategy::uniform(3).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            best_response_value(&rps(), &MixedStrategy::pure(3, 0).unwrap()).unwrap(),
            1.0
        );
        let v = best_response_value(&counterexample(), &third_each_of_three()).unwrap();
        assert!((v - 0.4).abs() < 1e-15, "{v}");
    }

    #[test]
    fn expected_utility_examples() {
        let rock = MixedStrategy::pure(3, 0).unwrap();
        let scissors = MixedStrategy::pure(3, 2).unwrap();
        assert_eq!(expected_utility(&rps(), &rock, &scissors).unwrap(), 1.0);
        let four = MixedStrategy::pure(4, 3).unwrap();
        let rock4 = MixedStrategy::pure(4, 0).unwrap();
        assert_eq!(
            expected_utility(&counterexample(), &four, &rock4).unwrap(),
            0.4
        );
        let s = MixedStrategy::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(expected_utility(&rps(), &s, &s).unwrap(), 0.0);
    }

    #[test]
    fn exploitability_examples() {
        assert_eq!(
            exploitability(&rps(), &MixedStrategy::uniform(3).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            exploitability(&rps(), &MixedStrategy::pure(3, 0).unwrap()).unwrap(),
            1.0
        );
        let e = exploitability(&counterexample(), &third_each_of_three()).unwrap();
        assert!((e - 0.4).abs() < 1e-15);
        // Strategy 4 is the pure Nash equilibrium.
        let four = MixedStrategy::pure(4, 3).unwrap();
        assert_eq!(exploitability(&counterexample(), &four).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let s = MixedStrategy::uniform(4).unwrap();
        assert_eq!(
            best_response(&rps(), &s),
            Err(Error::Shape {
                expected: 3,
                found: 4
            })
        );
        assert!(expected_utility(&rps(), &s, &MixedStrategy::uniform(3).unwrap()).is_err());
        assert!(exploitability(&rps(), &s).is_err());
    }

    #[test]
    fn fixtures() {
        let c = counterexample();
        assert_eq!(c.row(3), &[0.4, 0.4, 0.4, 0.0]);
        assert_eq!(rps().get(0, 1), -1.0);
        for f in Fixture::ALL {
            let g = canonical_game(f);
            assert!(PayoffMatrix::from_rows(g.to_rows()).is_ok());
            assert_eq!(canonical_game_by_name(f.name()).unwrap(), g);
        }
        assert_eq!(
            canonical_game_by_name("chess"),
            Err(Error::UnknownFixture("chess".into()))
        );
    }

    #[test]
    fn from_rows_rejects_invalid() {
        assert!(matches!(
            PayoffMatrix::from_rows(vec![vec![0.0, 0.5], vec![0.5, 0.0]]),
            Err(Error::NotAntisymmetric { .. })
        ));
        assert!(matches!(
            PayoffMatrix::from_rows(vec![vec![0.1]]),
            Err(Error::NotAntisymmetric { .. })
        ));
        assert!(matches!(
            PayoffMatrix::from_rows(vec![vec![0.0, 2.0], vec![-2.0, 0.0]]),
            Err(Error::PayoffOutOfRange { .. })
        ));
        assert!(matches!(
            PayoffMatrix::from_rows(vec![vec![0.0, 1.0], vec![-1.0]]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn mixed_strategy_validation() {
        assert!(MixedStrategy::new(vec![0.5, 0.5]).is_ok());
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![1.5, -0.5]).is_err());
        assert!(MixedStrategy::new(vec![f64::NAN, 1.0]).is_err());
        assert_eq!(MixedStrategy::pure(3, 1).unwrap().as_pure(), Some(1));
        assert_eq!(MixedStrategy::uniform(3).unwrap().as_pure(), None);
        assert!(serde_json::from_str::<MixedStrategy>("[0.3, 0.3]").is_err());
    }
}
