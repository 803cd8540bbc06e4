//! Directed acyclic graphs over the predictors and the response, d-separation
//! and intervention stable sets.

mod dsep;
mod stable;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dsep::d_separated;
pub use stable::{
    canonical_sort, intersection, stability_ratio, stable_sets, stable_sets_among,
    StableSetCollection, MAX_ENUMERATED_PREDICTORS,
};

pub(crate) use dsep::Reachability;

/// A set of node indices. Iteration order is ascending.
pub type NodeSet = BTreeSet<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Parents,
    Children,
    /// Strict ancestors; the node itself is not included.
    Ancestors,
    /// Descendants including the node itself.
    Descendants,
}

/// Parent and child lists of a DAG, shared by the public [`Dag`] and the
/// intervention-augmented graphs built during stable-set enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Adjacency {
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl Adjacency {
    fn empty(n: usize) -> Self {
        Adjacency {
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize) {
        self.parents[to].push(from);
        self.children[from].push(to);
    }

    pub(crate) fn len(&self) -> usize {
        self.parents.len()
    }
}

/// A DAG over `num_nodes` variables, one of which is the response `Y`.
/// Every other node is a predictor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DagJson", into = "DagJson")]
pub struct Dag {
    adj: Adjacency,
    response: usize,
    order: Vec<usize>,
}

/// Wire format: `{"p": <node count>, "edges": [[from, to], ...], "response": <index>}`.
#[derive(Serialize, Deserialize)]
struct DagJson {
    p: usize,
    edges: Vec<[usize; 2]>,
    response: usize,
}

impl TryFrom<DagJson> for Dag {
    type Error = Error;

    fn try_from(j: DagJson) -> Result<Self> {
        let edges: Vec<(usize, usize)> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        Dag::new(j.p, &edges, j.response)
    }
}

impl From<Dag> for DagJson {
    fn from(d: Dag) -> Self {
        DagJson {
            p: d.num_nodes(),
            edges: d.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            response: d.response,
        }
    }
}

impl Dag {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)], response: usize) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::arg("a DAG needs at least one node"));
        }
        check_index(response, num_nodes)?;
        let mut adj = Adjacency::empty(num_nodes);
        let unique: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
        for &(from, to) in &unique {
            check_index(from, num_nodes)?;
            check_index(to, num_nodes)?;
            if from == to {
                return Err(Error::arg(format!("self-loop on node {from}")));
            }
            adj.add_edge(from, to);
        }
        for list in adj.parents.iter_mut().chain(adj.children.iter_mut()) {
            list.sort_unstable();
        }
        let order = topological_order(&adj).ok_or(Error::Cyclic)?;
        Ok(Dag {
            adj,
            response,
            order,
        })
    }

    /// A DAG with no edges.
    pub fn empty(num_nodes: usize, response: usize) -> Result<Self> {
        Dag::new(num_nodes, &[], response)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_predictors(&self) -> usize {
        self.adj.len() - 1
    }

    pub fn response(&self) -> usize {
        self.response
    }

    /// All nodes except the response, ascending.
    pub fn predictors(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| i != self.response).collect()
    }

    pub fn predictor_set(&self) -> NodeSet {
        self.predictors().into_iter().collect()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.adj.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.adj.children[node]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.num_nodes() && self.adj.children[from].binary_search(&to).is_ok()
    }

    /// Edges sorted by `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (from, ch) in self.adj.children.iter().enumerate() {
            out.extend(ch.iter().map(|&to| (from, to)));
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.adj.children.iter().map(Vec::len).sum()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    pub fn relatives(&self, node: usize, kind: Relation) -> Result<NodeSet> {
        check_index(node, self.num_nodes())?;
        Ok(match kind {
            Relation::Parents => self.adj.parents[node].iter().copied().collect(),
            Relation::Children => self.adj.children[node].iter().copied().collect(),
            Relation::Ancestors => {
                let mut set = walk(&self.adj.parents, node);
                set.remove(&node);
                set
            }
            Relation::Descendants => walk(&self.adj.children, node),
        })
    }

    /// Parents, children and the children's other parents of `node`.
    pub fn markov_blanket(&self, node: usize) -> Result<NodeSet> {
        check_index(node, self.num_nodes())?;
        let mut mb: NodeSet = self.adj.parents[node].iter().copied().collect();
        for &c in &self.adj.children[node] {
            mb.insert(c);
            mb.extend(self.adj.parents[c].iter().copied());
        }
        mb.remove(&node);
        Ok(mb)
    }
}

pub(crate) fn check_index(index: usize, num_nodes: usize) -> Result<()> {
    if index < num_nodes {
        Ok(())
    } else {
        Err(Error::Index { index, num_nodes })
    }
}

/// Nodes reachable from `start` along `next`, including `start`.
fn walk(next: &[Vec<usize>], start: usize) -> NodeSet {
    let mut seen = vec![false; next.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &next[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    (0..next.len()).filter(|&i| seen[i]).collect()
}

/// Kahn's algorithm, smallest available index first. `None` on a cycle.
fn topological_order(adj: &Adjacency) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut indegree: Vec<usize> = adj.parents.iter().map(Vec::len).collect();
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_front() {
        order.push(v);
        for &c in &adj.children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push_back(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(xs: &[usize]) -> NodeSet {
        xs.iter().copied().collect()
    }

    fn collider_example() -> Dag {
        // Y is node 2
        Dag::new(5, &[(0, 2), (1, 2), (2, 3), (4, 3)], 2).unwrap()
    }

    #[test]
    fn parents_of_response_in_collider_example() {
        let dag = collider_example();
        assert_eq!(dag.relatives(2, Relation::Parents).unwrap(), set(&[0, 1]));
        assert_eq!(dag.relatives(2, Relation::Children).unwrap(), set(&[3]));
    }

    #[test]
    fn empty_graph_has_no_ancestors() {
        let dag = Dag::empty(6, 0).unwrap();
        for i in 0..6 {
            assert!(dag.relatives(i, Relation::Ancestors).unwrap().is_empty());
            assert_eq!(dag.relatives(i, Relation::Descendants).unwrap(), set(&[i]));
        }
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(Dag::new(3, &[(0, 1), (1, 0)], 2), Err(Error::Cyclic)));
        assert!(matches!(Dag::new(3, &[(1, 1)], 2), Err(Error::Argument(_))));
        assert!(matches!(Dag::new(3, &[(0, 5)], 2), Err(Error::Index { .. })));
        assert!(matches!(Dag::new(3, &[], 3), Err(Error::Index { .. })));
        let dag = collider_example();
        assert!(matches!(
            dag.relatives(9, Relation::Parents),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn descendants_match_boolean_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 8;
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random_bool(0.3) {
                        edges.push((i, j));
                    }
                }
            }
            let dag = Dag::new(n, &edges, n - 1).unwrap();
            // reflexive adjacency, squared until it stops changing
            let mut reach = vec![vec![false; n]; n];
            for (i, row) in reach.iter_mut().enumerate() {
                row[i] = true;
            }
            for &(a, b) in &edges {
                reach[a][b] = true;
            }
            loop {
                let mut next = reach.clone();
                for i in 0..n {
                    for j in 0..n {
                        next[i][j] = (0..n).any(|k| reach[i][k] && reach[k][j]);
                    }
                }
                if next == reach {
                    break;
                }
                reach = next;
            }
            for i in 0..n {
                let expect: NodeSet = (0..n).filter(|&j| reach[i][j]).collect();
                assert_eq!(dag.relatives(i, Relation::Descendants).unwrap(), expect);
                let anc: NodeSet = (0..n).filter(|&j| j != i && reach[j][i]).collect();
                assert_eq!(dag.relatives(i, Relation::Ancestors).unwrap(), anc);
            }
        }
    }

    #[test]
    fn json_roundtrip_and_format() {
        let dag = collider_example();
        let text = serde_json::to_string(&dag).unwrap();
        assert_eq!(
            text,
            r#"{"p":5,"edges":[[0,2],[1,2],[2,3],[4,3]],"response":2}"#
        );
        let back: Dag = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dag);
        let cyclic = r#"{"p":2,"edges":[[0,1],[1,0]],"response":0}"#;
        assert!(serde_json::from_str::<Dag>(cyclic).is_err());
    }

    #[test]
    fn markov_blanket_of_collider_example() {
        assert_eq!(collider_example().markov_blanket(2).unwrap(), set(&[0, 1, 3, 4]));
    }
}
