use super::{check_index, Adjacency, Dag, NodeSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Entered the node from one of its children.
    Up,
    /// Entered the node from one of its parents.
    Down,
}

/// Active-trail reachability ("Bayes ball") with reusable buffers.
pub(crate) struct Reachability {
    in_ancestral: Vec<bool>,
    seen_up: Vec<bool>,
    seen_down: Vec<bool>,
    reached: Vec<bool>,
    stack: Vec<(usize, Dir)>,
}

impl Reachability {
    pub(crate) fn new(n: usize) -> Self {
        Reachability {
            in_ancestral: vec![false; n],
            seen_up: vec![false; n],
            seen_down: vec![false; n],
            reached: vec![false; n],
            stack: Vec::new(),
        }
    }

    /// Marks every node connected to some source by a trail that is active
    /// given `given`. Sources not in `given` are marked as well.
    pub(crate) fn run(&mut self, adj: &Adjacency, sources: &[usize], given: &[bool]) -> &[bool] {
        for v in [
            &mut self.in_ancestral,
            &mut self.seen_up,
            &mut self.seen_down,
            &mut self.reached,
        ] {
            v.iter_mut().for_each(|b| *b = false);
        }

        // conditioning set and its ancestors: colliders there are open
        self.stack.clear();
        for (v, &g) in given.iter().enumerate() {
            if g {
                self.in_ancestral[v] = true;
                self.stack.push((v, Dir::Up));
            }
        }
        while let Some((v, _)) = self.stack.pop() {
            for &p in &adj.parents[v] {
                if !self.in_ancestral[p] {
                    self.in_ancestral[p] = true;
                    self.stack.push((p, Dir::Up));
                }
            }
        }

        self.stack.clear();
        self.stack.extend(sources.iter().map(|&s| (s, Dir::Up)));
        while let Some((v, dir)) = self.stack.pop() {
            let seen = match dir {
                Dir::Up => &mut self.seen_up[v],
                Dir::Down => &mut self.seen_down[v],
            };
            if *seen {
                continue;
            }
            *seen = true;
            let observed = given[v];
            if !observed {
                self.reached[v] = true;
            }
            match dir {
                Dir::Up if !observed => {
                    self.stack.extend(adj.parents[v].iter().map(|&p| (p, Dir::Up)));
                    self.stack.extend(adj.children[v].iter().map(|&c| (c, Dir::Down)));
                }
                Dir::Up => {}
                Dir::Down => {
                    if !observed {
                        self.stack.extend(adj.children[v].iter().map(|&c| (c, Dir::Down)));
                    }
                    if self.in_ancestral[v] {
                        self.stack.extend(adj.parents[v].iter().map(|&p| (p, Dir::Up)));
                    }
                }
            }
        }
        &self.reached
    }
}

/// Whether `s` d-separates `a` from `b` in `dag`. The three sets must be
/// pairwise disjoint.
pub fn d_separated(dag: &Dag, a: &NodeSet, b: &NodeSet, s: &NodeSet) -> Result<bool> {
    let n = dag.num_nodes();
    for &i in a.iter().chain(b).chain(s) {
        check_index(i, n)?;
    }
    if !a.is_disjoint(b) || !a.is_disjoint(s) || !b.is_disjoint(s) {
        return Err(Error::arg("d-separation sets must be pairwise disjoint"));
    }
    let mut given = vec![false; n];
    for &i in s {
        given[i] = true;
    }
    let sources: Vec<usize> = a.iter().copied().collect();
    let mut reach = Reachability::new(n);
    let reached = reach.run(dag.adjacency(), &sources, &given);
    Ok(b.iter().all(|&j| !reached[j]))
}
