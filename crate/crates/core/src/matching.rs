//! Maximum bipartite matching with left-vertex priority.
//!
//! Left vertices are processed in index order, each trying an augmenting
//! path. Because the matchable left sets form a transversal matroid, this
//! greedy order yields a maximum matching whose matched left set is optimal
//! for the priority order: no other maximum matching can match a strictly
//! earlier set of left vertices. Repair code relies on this to keep
//! unmatched faults as far right as possible and to stay monotone when
//! faults are added.

const NIL: usize = usize::MAX;

/// Maximum matching of a bipartite graph given as left-vertex adjacency
/// lists over right-vertex indices `0..n_right`.
///
/// Returns the matched right vertex per left vertex. Deterministic: the
/// result depends only on the adjacency order.
pub fn max_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut visited = vec![false; n_left];
    for u in 0..n_left {
        visited.iter_mut().for_each(|v| *v = false);
        try_augment(u, adj, &mut match_left, &mut match_right, &mut visited);
    }
    match_left
        .into_iter()
        .map(|v| if v == NIL { None } else { Some(v) })
        .collect()
}

fn try_augment(
    u: usize,
    adj: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    visited: &mut [bool],
) -> bool {
    if visited[u] {
        return false;
    }
    visited[u] = true;
    for &v in &adj[u] {
        if match_right[v] == NIL
            || try_augment(match_right[v], adj, match_left, match_right, visited)
        {
            match_left[u] = v;
            match_right[v] = u;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matching_size(adj: &[Vec<usize>], n_right: usize) -> usize {
        max_matching(adj, n_right).iter().flatten().count()
    }

    /// Exhaustive maximum matching by trying every assignment.
    fn brute_force_size(adj: &[Vec<usize>], n_right: usize) -> usize {
        fn rec(u: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if u == adj.len() {
                return 0;
            }
            let mut best = rec(u + 1, adj, used);
            for &v in &adj[u] {
                if !used[v] {
                    used[v] = true;
                    best = best.max(1 + rec(u + 1, adj, used));
                    used[v] = false;
                }
            }
            best
        }
        rec(0, adj, &mut vec![false; n_right])
    }

    #[test]
    fn simple_cases() {
        assert_eq!(matching_size(&[], 0), 0);
        assert_eq!(matching_size(&[vec![0], vec![0]], 1), 1);
        assert_eq!(matching_size(&[vec![0, 1], vec![0], vec![1]], 2), 2);
        // requires an augmenting path through two matched edges
        let adj = vec![vec![0, 1], vec![0, 2], vec![1], vec![2]];
        assert_eq!(matching_size(&adj, 3), 3);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let n_left = rng.random_range(0..7);
            let n_right = rng.random_range(1..7);
            let adj: Vec<Vec<usize>> = (0..n_left)
                .map(|_| {
                    (0..n_right)
                        .filter(|_| rng.random::<f64>() < 0.4)
                        .collect()
                })
                .collect();
            assert_eq!(
                matching_size(&adj, n_right),
                brute_force_size(&adj, n_right)
            );
        }
    }

    #[test]
    fn priority_order_is_respected() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n_left = rng.random_range(1..7);
            let n_right = rng.random_range(1..6);
            let adj: Vec<Vec<usize>> = (0..n_left)
                .map(|_| {
                    (0..n_right)
                        .filter(|_| rng.random::<f64>() < 0.5)
                        .collect()
                })
                .collect();
            let matched = max_matching(&adj, n_right);
            if let Some(first_unmatched) = matched.iter().position(|m| m.is_none()) {
                // every vertex before the first failure is matched, and no
                // matching can also cover the failed vertex
                let prefix = &adj[..=first_unmatched];
                assert!(
                    brute_force_size(prefix, n_right) < prefix.len(),
                    "vertex {first_unmatched} was droppable but should not be"
                );
            }
        }
    }
}
