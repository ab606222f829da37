use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Matchup, RatingsError};

/// Weighted win graph: an edge points from loser to winner and carries the
/// summed point differential of every such result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeagueNetwork {
    pub teams: Vec<String>,
    /// `(loser, winner) -> weight`, indices into `teams`.
    pub edges: BTreeMap<(usize, usize), f64>,
}

impl LeagueNetwork {
    pub fn len(&self) -> usize {
        self.teams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teams.is_empty()
    }

    pub fn index_of(&self, team: &str) -> Option<usize> {
        self.teams.iter().position(|t| t == team)
    }

    /// Weighted out-strength of every node, floored at 1.
    pub fn out_scale(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.teams.len()];
        for (&(from, _), &w) in &self.edges {
            d[from] += w;
        }
        d.iter().map(|x| x.max(1.0)).collect()
    }
}

pub fn build_league_network(matchups: &[Matchup]) -> LeagueNetwork {
    let teams: BTreeSet<&str> = matchups
        .iter()
        .flat_map(|m| [m.home.as_str(), m.away.as_str()])
        .collect();
    let teams: Vec<String> = teams.into_iter().map(str::to_string).collect();
    let idx = |t: &str| teams.binary_search_by(|x| x.as_str().cmp(t)).unwrap();
    let mut edges = BTreeMap::new();
    for m in matchups {
        if m.home == m.away || m.home_margin == 0.0 || !m.home_margin.is_finite() {
            continue;
        }
        let (loser, winner) = if m.home_margin > 0.0 {
            (idx(&m.away), idx(&m.home))
        } else {
            (idx(&m.home), idx(&m.away))
        };
        *edges.entry((loser, winner)).or_insert(0.0) += m.home_margin.abs();
    }
    LeagueNetwork { teams, edges }
}

/// PageRank scores `pi = D (D - alpha A^T)^{-1} beta`.
///
/// `A(i, j)` is the weight of the edge `i -> j` (j beat i) and `D` holds the
/// weighted out-strength floored at 1, so `A^T D^{-1}` pushes each loser's
/// mass to the teams that beat it in proportion to the margins. `beta`
/// defaults to uniform `1/N`. Solved by dense LU.
pub fn pagerank_ratings(
    net: &LeagueNetwork,
    alpha: f64,
    beta: Option<&[f64]>,
) -> Result<Vec<f64>, RatingsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RatingsError::BadDamping(alpha));
    }
    let n = net.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let beta = match beta {
        Some(b) if b.len() != n => {
            return Err(RatingsError::BadPersonalization { got: b.len(), expected: n })
        }
        Some(b) => DVector::from_column_slice(b),
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let d = net.out_scale();
    let mut m = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(&d));
    for (&(from, to), &w) in &net.edges {
        m[(to, from)] -= alpha * w;
    }
    let y = m.lu().solve(&beta).ok_or(RatingsError::Singular)?;
    Ok(y.iter().zip(&d).map(|(y, d)| y * d).collect())
}
