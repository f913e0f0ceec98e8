//! Seeded graph generators returning unweighted Laplacians.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::Laplacian;

pub const MAX_ATTEMPTS: usize = 100;

/// Holme–Kim growth: preferential attachment of `m` edges per new node, each
/// attachment after the first closing a triangle with probability `p_triangle`.
///
/// The first `m` nodes start isolated, so a draw can leave one of them
/// unattached; such draws are discarded and the generator continues on the
/// same random stream.
pub fn generate_powerlaw_cluster(n: usize, m: usize, p_triangle: f64, seed: u64) -> Result<Laplacian> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 3")));
    }
    if m < 1 || m >= n {
        return Err(Error::InvalidArgument(format!("m = {m} must satisfy 1 <= m < n = {n}")));
    }
    if !(0.0..=1.0).contains(&p_triangle) {
        return Err(Error::InvalidArgument(format!("p_triangle = {p_triangle} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let adj = holme_kim_once(n, m, p_triangle, &mut rng);
        if is_connected(&adj) {
            return Laplacian::from_edges(n, &edge_list(&adj));
        }
    }
    Err(Error::DisconnectedAfterRetries {
        attempts: MAX_ATTEMPTS,
    })
}

fn random_subset(pool: &[usize], m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = Vec::with_capacity(m);
    while picked.len() < m {
        let x = pool[rng.random_range(0..pool.len())];
        if !picked.contains(&x) {
            picked.push(x);
        }
    }
    picked
}

fn holme_kim_once(n: usize, m: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    let mut repeated: Vec<usize> = (0..m).collect();
    let connect = |adj: &mut Vec<BTreeSet<usize>>, a: usize, b: usize| {
        adj[a].insert(b);
        adj[b].insert(a);
    };
    for source in m..n {
        let mut targets = random_subset(&repeated, m, rng);
        let mut target = targets.pop().expect("subset has m >= 1 entries");
        connect(&mut adj, source, target);
        repeated.push(target);
        let mut count = 1;
        while count < m {
            if rng.random::<f64>() < p {
                let hood: Vec<usize> = adj[target]
                    .iter()
                    .copied()
                    .filter(|&v| v != source && !adj[source].contains(&v))
                    .collect();
                if !hood.is_empty() {
                    let nbr = hood[rng.random_range(0..hood.len())];
                    connect(&mut adj, source, nbr);
                    repeated.push(nbr);
                    count += 1;
                    continue;
                }
            }
            // a triad may already have consumed a pending target
            target = loop {
                match targets.pop() {
                    Some(t) if adj[source].contains(&t) => continue,
                    Some(t) => break Some(t),
                    None => break None,
                }
            }
            .unwrap_or_else(|| {
                let free: Vec<usize> = (0..source).filter(|v| !adj[source].contains(v)).collect();
                free[rng.random_range(0..free.len())]
            });
            connect(&mut adj, source, target);
            repeated.push(target);
            count += 1;
        }
        repeated.extend(std::iter::repeat_n(source, m));
    }
    adj
}

fn edge_list(adj: &[BTreeSet<usize>]) -> Vec<(usize, usize, f64)> {
    adj.iter()
        .enumerate()
        .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| j > i).map(move |&j| (i, j, 1.0)))
        .collect()
}

fn is_connected(adj: &[BTreeSet<usize>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn ring(n: usize) -> Result<Laplacian> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("ring needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    Laplacian::from_edges(n, &edges)
}

pub fn path(n: usize) -> Result<Laplacian> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("path needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    Laplacian::from_edges(n, &edges)
}
