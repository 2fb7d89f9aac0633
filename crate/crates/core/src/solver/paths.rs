//! Shortest paths on the link graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linkmodel::LinkSet;

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from `source` under non-negative link weights; `None` marks
/// an unusable link. Also returns the predecessor link of each vertex.
pub fn dijkstra(links: &LinkSet, source: usize, weight: impl Fn(usize) -> Option<f64>) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = links.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &l in &links.out_links[u] {
            if let Some(w) = weight(l) {
                let v = links.links[l].rx_node;
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some(l);
                    heap.push(Entry(nd, v));
                }
            }
        }
    }
    (dist, pred)
}

/// Distances to `target` (reverse graph).
pub fn dijkstra_to(links: &LinkSet, target: usize, weight: impl Fn(usize) -> Option<f64>) -> Vec<f64> {
    let n = links.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[target] = 0.0;
    heap.push(Entry(0.0, target));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &l in &links.in_links[u] {
            if let Some(w) = weight(l) {
                let v = links.links[l].tx_node;
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
    }
    dist
}

/// Link sequence from the predecessor tree, if `target` was reached.
pub fn trace(links: &LinkSet, pred: &[Option<usize>], source: usize, target: usize) -> Option<Vec<usize>> {
    let mut route = Vec::new();
    let mut at = target;
    while at != source {
        let l = pred[at]?;
        route.push(l);
        at = links.links[l].tx_node;
    }
    route.reverse();
    Some(route)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkmodel::build_links;
    use crate::scenario::default_scenario;

    #[test]
    fn dijkstra_hops() {
        let s = default_scenario();
        let ls = build_links(&s).unwrap();
        let (dist, pred) = dijkstra(&ls, 0, |_| Some(1.0));
        assert_eq!(dist[3], 1.0);
        assert_eq!(trace(&ls, &pred, 0, 3).unwrap().len(), 1);
        let back = dijkstra_to(&ls, 3, |_| Some(1.0));
        assert_eq!(back[0], 1.0);
        assert_eq!(back[3], 0.0);
    }
}
