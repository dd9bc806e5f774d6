use std::collections::{BTreeMap, BTreeSet};

use super::model::WorkflowGraph;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("CycleDetected: {}", .0.join(" -> "))]
pub struct CycleDetected(pub Vec<String>);

/// Node-id adjacency, ignoring edges whose endpoints are not nodes.
fn adjacency(graph: &WorkflowGraph) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = graph
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), BTreeSet::new()))
        .collect();
    for e in &graph.edges {
        if adj.contains_key(e.to.node.as_str()) {
            if let Some(succ) = adj.get_mut(e.from.node.as_str()) {
                succ.insert(e.to.node.as_str());
            }
        }
    }
    adj
}

/// Kahn's algorithm, always taking the smallest ready id.
pub fn topo_order(graph: &WorkflowGraph) -> Result<Vec<String>, CycleDetected> {
    let adj = adjacency(graph);
    let mut indegree: BTreeMap<&str, usize> = adj.keys().map(|k| (*k, 0)).collect();
    for succ in adj.values() {
        for s in succ {
            *indegree.get_mut(s).expect("successor is a node") += 1;
        }
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut order = Vec::with_capacity(adj.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        for s in &adj[next] {
            let d = indegree.get_mut(s).expect("successor is a node");
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() == adj.len() {
        Ok(order)
    } else {
        Err(CycleDetected(find_cycle(graph).unwrap_or_default()))
    }
}

/// One cycle as a closed path `a, b, …, a`, if the graph has any.
pub fn find_cycle(graph: &WorkflowGraph) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let adj = adjacency(graph);
    let mut mark: BTreeMap<&str, Mark> = adj.keys().map(|k| (*k, Mark::White)).collect();

    fn visit<'a>(
        n: &'a str,
        adj: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        mark: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        mark.insert(n, Mark::Grey);
        stack.push(n);
        for s in &adj[n] {
            match mark[s] {
                Mark::Grey => {
                    let start = stack
                        .iter()
                        .position(|x| x == s)
                        .expect("grey node is on stack");
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|x| x.to_string()).collect();
                    cycle.push(s.to_string());
                    return Some(cycle);
                }
                Mark::White => {
                    if let Some(c) = visit(s, adj, mark, stack) {
                        return Some(c);
                    }
                }
                Mark::Black => {}
            }
        }
        stack.pop();
        mark.insert(n, Mark::Black);
        None
    }

    let keys: Vec<&str> = adj.keys().copied().collect();
    for k in keys {
        if mark[k] == Mark::White {
            let mut stack = Vec::new();
            if let Some(c) = visit(k, &adj, &mut mark, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}
