use std::collections::BTreeSet;

use crate::model::BeliefNetwork;

/// Undirected neighbour sets of a network's skeleton.
pub(crate) fn skeleton(network: &BeliefNetwork) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); network.nodes.len()];
    for (i, node) in network.nodes.iter().enumerate() {
        for &p in &node.parents {
            adj[i].insert(p);
            adj[p].insert(i);
        }
    }
    adj
}

/// Fundamental cycles of an undirected graph: one per non-tree edge of a
/// depth-first spanning forest, each listed from the ancestor end down the
/// tree path. Neighbours are visited in ascending order.
pub(crate) fn fundamental_cycles(adj: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![usize::MAX; n];
    let mut cycles = Vec::new();
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        // explicit stack of (vertex, neighbours still to visit)
        let mut stack: Vec<(usize, std::collections::btree_set::Iter<'_, usize>)> = vec![(root, adj[root].iter())];
        while let Some((u, iter)) = stack.last_mut() {
            let u = *u;
            match iter.next() {
                Some(&v) => {
                    if depth[v] == usize::MAX {
                        depth[v] = depth[u] + 1;
                        parent[v] = u;
                        stack.push((v, adj[v].iter()));
                    } else if v != parent[u] && depth[v] < depth[u] {
                        let mut path = vec![u];
                        let mut w = u;
                        while w != v {
                            w = parent[w];
                            path.push(w);
                        }
                        path.reverse();
                        cycles.push(path);
                    }
                }
                None => {
                    stack.pop();
                }
            }
        }
    }
    cycles
}

/// Undirected cycles of the network skeleton, as node names. Empty exactly
/// when the skeleton is a forest.
pub fn detect_loops(network: &BeliefNetwork) -> Vec<Vec<String>> {
    fundamental_cycles(&skeleton(network))
        .into_iter()
        .map(|c| c.into_iter().map(|i| network.nodes[i].name().to_string()).collect())
        .collect()
}

/// `|E| == |V| - components` on an undirected edge list.
pub(crate) fn is_forest(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], mut x: usize) -> usize {
        while root[x] != x {
            root[x] = root[root[x]];
            x = root[x];
        }
        x
    }
    let mut edge_count = 0;
    let mut components = n;
    for (a, b) in edges {
        edge_count += 1;
        let (ra, rb) = (find(&mut root, a), find(&mut root, b));
        if ra != rb {
            root[ra] = rb;
            components -= 1;
        }
    }
    edge_count + components == n
}
