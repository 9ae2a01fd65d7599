use super::{l1_distance, normalize_l1, Algorithm, CentralityError, Convergence, ScoreVector};
use crate::ingest::UserGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunkRankParams {
    /// Probability that a follower retweets what they read.
    pub retweet_prob: f64,
    pub convergence: Convergence,
}

impl Default for TunkRankParams {
    fn default() -> Self {
        TunkRankParams {
            retweet_prob: 0.05,
            convergence: Convergence::default(),
        }
    }
}

/// TunkRank: `I(u) = sum over followers f of (1 + p * I(f)) / followees(f)`.
///
/// Reported normalized to sum 1 (all zeros when no one has followers).
pub fn tunkrank(graph: &UserGraph, params: &TunkRankParams) -> Result<ScoreVector, CentralityError> {
    let followers: Vec<&[usize]> = (0..graph.len()).map(|i| graph.followers(i)).collect();
    let out_degree: Vec<usize> = (0..graph.len()).map(|i| graph.followees(i).len()).collect();
    let (mut raw, iterations, residual, converged) = tunkrank_indexed(&followers, &out_degree, params)?;
    normalize_l1(&mut raw);
    Ok(ScoreVector::from_indexed(
        Algorithm::TunkRank,
        graph.users(),
        &raw,
        iterations,
        residual,
        converged,
    ))
}

/// Un-normalized TunkRank fixed point from follower lists and followee counts.
pub fn tunkrank_indexed<S: AsRef<[usize]>>(
    followers: &[S],
    followee_count: &[usize],
    params: &TunkRankParams,
) -> Result<(Vec<f64>, usize, f64, bool), CentralityError> {
    let n = followers.len();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    let p = params.retweet_prob;
    if !(0.0..=1.0).contains(&p) {
        return Err(CentralityError::Parameter(format!("retweet probability must lie in [0, 1], got {p}")));
    }
    params.convergence.validate()?;

    let mut inf = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=params.convergence.max_iter {
        for (u, fs) in followers.iter().enumerate() {
            next[u] = fs
                .as_ref()
                .iter()
                .map(|&f| (1.0 + p * inf[f]) / followee_count[f] as f64)
                .sum();
        }
        residual = l1_distance(&inf, &next);
        std::mem::swap(&mut inf, &mut next);
        if residual <= params.convergence.tol {
            return Ok((inf, iter, residual, true));
        }
    }
    Ok((inf, params.convergence.max_iter, residual, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_graph, UserId};

    fn u(s: &str) -> UserId {
        UserId::parse(s).unwrap()
    }

    #[test]
    fn chain_without_retweets() {
        let (g, _) = load_graph("b\ta\n".as_bytes()).unwrap();
        let p = TunkRankParams {
            retweet_prob: 0.0,
            ..Default::default()
        };
        let s = tunkrank(&g, &p).unwrap();
        assert_eq!(s.get(&u("a")), 1.0);
        assert_eq!(s.get(&u("b")), 0.0);
    }

    #[test]
    fn raw_values_on_small_chain() {
        // c -> b -> a: I(b) = 1, I(a) = 1 + p * I(b)
        let followers = vec![vec![1usize], vec![2], vec![]];
        let (raw, _, _, ok) = tunkrank_indexed(&followers, &[0, 1, 1], &TunkRankParams::default()).unwrap();
        assert!(ok);
        assert_eq!(raw, vec![1.05, 1.0, 0.0]);
    }

    #[test]
    fn no_followers_anywhere() {
        let followers = vec![Vec::<usize>::new(); 3];
        let (raw, _, _, _) = tunkrank_indexed(&followers, &[0, 0, 0], &TunkRankParams::default()).unwrap();
        assert_eq!(raw, vec![0.0; 3]);
    }

    #[test]
    fn probability_checked() {
        let p = TunkRankParams {
            retweet_prob: 1.5,
            ..Default::default()
        };
        assert!(tunkrank_indexed(&[vec![0usize]], &[1], &p).is_err());
    }
}
