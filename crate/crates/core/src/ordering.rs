//! Fill-reducing minimum degree ordering on a quotient graph, and a symbolic
//! fill counter based on the elimination tree.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::sparse::{Permutation, SparseSymMatrix};

/// Undirected graph with sorted, symmetric, loop-free adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjGraph {
    adjacency: Vec<Vec<usize>>,
}

impl AdjGraph {
    pub fn new(mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        for (i, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_unstable();
            adj.dedup();
            if adj.iter().any(|&j| j >= n || j == i) {
                return Err(Error::InvalidInput(format!("vertex {i} has a self loop or out-of-range neighbour")));
            }
        }
        for (i, adj) in adjacency.iter().enumerate() {
            for &j in adj {
                if adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidInput(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(AdjGraph { adjacency })
    }

    pub fn from_matrix(a: &SparseSymMatrix) -> Self {
        AdjGraph { adjacency: a.adjacency() }
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

/// Minimum degree ordering with exact external degrees; ties go to the
/// smallest vertex id. The returned permutation's `order()` is the
/// elimination sequence.
pub fn min_degree_order(g: &AdjGraph) -> Permutation {
    let n = g.n_vertices();
    let mut adj: Vec<Vec<usize>> = g.adjacency.clone();
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elem_vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eliminated = vec![false; n];
    let mut absorbed = vec![false; n];
    let mut in_front = vec![usize::MAX; n];
    let mut seen = vec![usize::MAX; n];
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (degree[i], i)).collect();
    let mut order = Vec::with_capacity(n);
    let mut stamp = 0usize;

    while let Some((_, p)) = queue.pop_first() {
        order.push(p);
        eliminated[p] = true;

        let mut front = Vec::new();
        for &v in &adj[p] {
            if !eliminated[v] && in_front[v] != p {
                in_front[v] = p;
                front.push(v);
            }
        }
        for &e in &elems[p] {
            absorbed[e] = true;
            for &v in &elem_vars[e] {
                if !eliminated[v] && in_front[v] != p {
                    in_front[v] = p;
                    front.push(v);
                }
            }
            elem_vars[e] = Vec::new();
        }
        front.sort_unstable();
        adj[p] = Vec::new();
        elems[p] = Vec::new();

        for &i in &front {
            adj[i].retain(|&v| !eliminated[v] && in_front[v] != p);
            elems[i].retain(|&e| !absorbed[e]);
            elems[i].push(p);
        }
        elem_vars[p] = front.clone();

        for &i in &front {
            stamp += 1;
            seen[i] = stamp;
            let mut d = 0;
            for &v in &adj[i] {
                if seen[v] != stamp {
                    seen[v] = stamp;
                    d += 1;
                }
            }
            for &e in &elems[i] {
                for &v in &elem_vars[e] {
                    if seen[v] != stamp {
                        seen[v] = stamp;
                        d += 1;
                    }
                }
            }
            if d != degree[i] {
                queue.remove(&(degree[i], i));
                degree[i] = d;
                queue.insert((d, i));
            }
        }
    }
    Permutation::from_order(order).expect("elimination sequence is a permutation")
}

/// Parent array of the elimination tree of `a` (`usize::MAX` for roots).
pub fn elimination_tree(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j >= i {
                continue;
            }
            let mut r = j;
            while ancestor[r] != usize::MAX && ancestor[r] != i {
                let t = ancestor[r];
                ancestor[r] = i;
                r = t;
            }
            if ancestor[r] == usize::MAX {
                ancestor[r] = i;
                parent[r] = i;
            }
        }
    }
    parent
}

/// Nonzeros (diagonal included) in the lower factor of the complete
/// factorization of `a` permuted by `p`, treating the pattern as positive definite.
pub fn symbolic_fill_count(a: &SparseSymMatrix, p: &Permutation) -> Result<usize> {
    let b = a.permute_sym(p)?;
    let n = b.n();
    let parent = elimination_tree(&b);
    let mut mark = vec![usize::MAX; n];
    let mut count = n;
    for i in 0..n {
        mark[i] = i;
        let (cols, _) = b.row(i);
        for &j in cols {
            let mut r = j;
            while mark[r] != i {
                mark[r] = i;
                count += 1;
                r = parent[r];
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(k: usize) -> SparseSymMatrix {
        let mut t = Vec::new();
        for y in 0..k {
            for x in 0..k {
                let s = y * k + x;
                t.push((s, s, 4.0));
                if x > 0 {
                    t.push((s, s - 1, -1.0));
                }
                if y > 0 {
                    t.push((s, s - k, -1.0));
                }
            }
        }
        SparseSymMatrix::from_triplets(k * k, &t).unwrap()
    }

    #[test]
    fn empty_graph_is_identity() {
        let g = AdjGraph::new(vec![Vec::new(); 5]).unwrap();
        assert!(min_degree_order(&g).is_identity());
    }

    #[test]
    fn star_center_last() {
        // once three leaves are gone the centre and the last leaf both have degree 1,
        // so the centre carries the largest id to come last under the id tie-break
        let g = AdjGraph::new(vec![vec![4], vec![4], vec![4], vec![4], vec![0, 1, 2, 3]]).unwrap();
        let p = min_degree_order(&g);
        assert_eq!(p.order(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(AdjGraph::new(vec![vec![1], vec![]]).is_err());
        assert!(AdjGraph::new(vec![vec![0]]).is_err());
    }

    #[test]
    fn grid_fill_not_worse_than_natural() {
        let a = grid(5);
        let p = min_degree_order(&AdjGraph::from_matrix(&a));
        let md = symbolic_fill_count(&a, &p).unwrap();
        let natural = symbolic_fill_count(&a, &Permutation::identity(25)).unwrap();
        assert!(md <= natural, "{md} > {natural}");
    }

    #[test]
    fn fill_count_simple_patterns() {
        let d = SparseSymMatrix::identity(7);
        assert_eq!(symbolic_fill_count(&d, &Permutation::identity(7)).unwrap(), 7);
        let n = 9;
        let t: Vec<_> = (0..n).map(|i| (i, i, 2.0)).chain((1..n).map(|i| (i, i - 1, -1.0))).collect();
        let tri = SparseSymMatrix::from_triplets(n, &t).unwrap();
        assert_eq!(symbolic_fill_count(&tri, &Permutation::identity(n)).unwrap(), 2 * n - 1);

        // arrow with the hub first fills completely; hub last does not fill
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).chain((1..n).map(|i| (i, 0, 1.0))).collect();
        let arrow = SparseSymMatrix::from_triplets(n, &t).unwrap();
        let worst = symbolic_fill_count(&arrow, &Permutation::identity(n)).unwrap();
        let best_order: Vec<usize> = (1..n).chain(std::iter::once(0)).collect();
        let best = symbolic_fill_count(&arrow, &Permutation::from_order(best_order).unwrap()).unwrap();
        assert_eq!(worst, n * (n + 1) / 2);
        assert_eq!(best, 2 * n - 1);
        let md = min_degree_order(&AdjGraph::from_matrix(&arrow));
        assert_eq!(symbolic_fill_count(&arrow, &md).unwrap(), best);
    }

    fn arb_graph() -> impl Strategy<Value = SparseSymMatrix> {
        (1usize..40).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |edges| {
                let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
                for (i, j) in edges {
                    let (r, c) = (i.max(j), i.min(j));
                    if r != c && !t.iter().any(|e| e.0 == r && e.1 == c) {
                        t.push((r, c, 1.0));
                    }
                }
                SparseSymMatrix::from_triplets(n, &t).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn ordering_is_valid_and_deterministic(a in arb_graph()) {
            let g = AdjGraph::from_matrix(&a);
            let p = min_degree_order(&g);
            prop_assert_eq!(p.len(), a.n());
            prop_assert_eq!(&p, &min_degree_order(&g));
            let fill = symbolic_fill_count(&a, &p).unwrap();
            prop_assert!(fill <= a.n() * (a.n() + 1) / 2);
            prop_assert!(fill >= a.nnz_lower());
        }
    }
}
