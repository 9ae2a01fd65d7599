use super::{l1_distance, Algorithm, CentralityError, Convergence, ScoreVector};
use crate::ingest::UserGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams {
    pub damping: f64,
    pub convergence: Convergence,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            convergence: Convergence::default(),
        }
    }
}

/// PageRank over follower → followee edges: following someone endorses them.
/// Rank held by users who follow nobody is spread uniformly.
pub fn pagerank(graph: &UserGraph, params: &PageRankParams) -> Result<ScoreVector, CentralityError> {
    let out: Vec<&[usize]> = (0..graph.len()).map(|i| graph.followees(i)).collect();
    let (rank, iterations, residual, converged) = pagerank_indexed(&out, params)?;
    Ok(ScoreVector::from_indexed(
        Algorithm::PageRank,
        graph.users(),
        &rank,
        iterations,
        residual,
        converged,
    ))
}

/// Power iteration on adjacency lists. Returns (ranks, iterations, residual, converged).
pub fn pagerank_indexed<S: AsRef<[usize]>>(
    out_edges: &[S],
    params: &PageRankParams,
) -> Result<(Vec<f64>, usize, f64, bool), CentralityError> {
    let n = out_edges.len();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    let d = params.damping;
    if !(d > 0.0 && d < 1.0) {
        return Err(CentralityError::Parameter(format!("damping must lie in (0, 1), got {d}")));
    }
    params.convergence.validate()?;

    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=params.convergence.max_iter {
        let dangling: f64 = out_edges
            .iter()
            .zip(&rank)
            .filter(|(outs, _)| outs.as_ref().is_empty())
            .map(|(_, r)| r)
            .sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for (i, outs) in out_edges.iter().enumerate() {
            let outs = outs.as_ref();
            if outs.is_empty() {
                continue;
            }
            let share = d * rank[i] / outs.len() as f64;
            for &j in outs {
                next[j] += share;
            }
        }
        residual = l1_distance(&rank, &next);
        std::mem::swap(&mut rank, &mut next);
        if residual <= params.convergence.tol {
            return Ok((rank, iter, residual, true));
        }
    }
    Ok((rank, params.convergence.max_iter, residual, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_graph, UserId};

    #[test]
    fn mutual_follow_is_symmetric() {
        let (g, _) = load_graph("a\tb\nb\ta\n".as_bytes()).unwrap();
        let s = pagerank(&g, &PageRankParams::default()).unwrap();
        for v in s.scores.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(s.converged);
    }

    #[test]
    fn isolated_node_gets_everything() {
        let (rank, _, _, converged) = pagerank_indexed(&[Vec::<usize>::new()], &PageRankParams::default()).unwrap();
        assert_eq!(rank, vec![1.0]);
        assert!(converged);
    }

    #[test]
    fn hub_outranks_followers() {
        let (g, _) = load_graph("a\thub\nb\thub\nc\thub\n".as_bytes()).unwrap();
        let s = pagerank(&g, &PageRankParams::default()).unwrap();
        let hub = s.get(&UserId::parse("hub").unwrap());
        assert!(s.scores.values().all(|&v| v <= hub));
        assert!((s.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(
            pagerank(&UserGraph::default(), &PageRankParams::default()),
            Err(CentralityError::EmptyGraph)
        );
        let bad = PageRankParams {
            damping: 1.0,
            ..Default::default()
        };
        assert!(pagerank_indexed(&[vec![0usize]], &bad).is_err());
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let (g, _) = load_graph("a\tb\nb\tc\nc\ta\nc\tb\n".as_bytes()).unwrap();
        let p = PageRankParams {
            convergence: Convergence { tol: 0.0, max_iter: 3 },
            ..Default::default()
        };
        let s = pagerank(&g, &p).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 3);
    }
}
