//! Local neighborhoods around a `(user, item)` pair and their relational
//! (doubly directed) form.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Node-induced subgraph on the union of the `hops`-hop balls of an anchor
/// user and an anchor item.
///
/// Local node layout: users `0..num_users()` ascending by global index,
/// then items ascending.
#[derive(Debug, Clone)]
pub struct Subgraph {
    anchor_user: usize,
    anchor_item: usize,
    hops: usize,
    users: Vec<usize>,
    items: Vec<usize>,
    user_local: HashMap<usize, usize>,
    item_local: HashMap<usize, usize>,
    /// Global `(user, item)` pairs, ascending.
    edges: Vec<(usize, usize)>,
    /// Same edges as `(local user node, local item node)`.
    local_edges: Vec<(usize, usize)>,
}

/// A local node resolved to its side of the graph and global index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    User(usize),
    Item(usize),
}

impl Subgraph {
    pub fn anchor_user(&self) -> usize {
        self.anchor_user
    }

    pub fn anchor_item(&self) -> usize {
        self.anchor_item
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    /// Global user indices, ascending.
    pub fn users(&self) -> &[usize] {
        &self.users
    }

    /// Global item indices, ascending.
    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.users.len() + self.items.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_nodes() == 0
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn local_edges(&self) -> &[(usize, usize)] {
        &self.local_edges
    }

    pub fn local_user(&self, user: usize) -> Option<usize> {
        self.user_local.get(&user).copied()
    }

    pub fn local_item(&self, item: usize) -> Option<usize> {
        self.item_local.get(&item).map(|&j| self.users.len() + j)
    }

    pub fn global(&self, local: usize) -> NodeRef {
        if local < self.users.len() {
            NodeRef::User(self.users[local])
        } else {
            NodeRef::Item(self.items[local - self.users.len()])
        }
    }

    /// Position of the global edge `(user, item)` in [`Self::edges`].
    pub fn edge_position(&self, user: usize, item: usize) -> Option<usize> {
        self.edges.binary_search(&(user, item)).ok()
    }

    /// Whether edge `e` touches the anchor user or the anchor item.
    pub fn is_anchor_edge(&self, e: usize) -> bool {
        let (u, i) = self.edges[e];
        u == self.anchor_user || i == self.anchor_item
    }

    /// Unperturbed local degree of every local node.
    pub fn local_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes()];
        for &(a, b) in &self.local_edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Extracts the node-induced subgraph on the union of the `hops`-hop balls
/// around `user` and `item` (indices, not raw ids).
pub fn l_hop_subgraph(graph: &BipartiteGraph, user: usize, item: usize, hops: usize) -> Result<Subgraph> {
    if user >= graph.num_users() {
        return Err(Error::UnknownUser(user as u64));
    }
    if item >= graph.num_items() {
        return Err(Error::UnknownItem(item as u64));
    }
    if hops == 0 {
        return Err(Error::InvalidParameter("hop count must be at least 1".into()));
    }
    let mut nodes = ball(graph, user, hops);
    nodes.extend(ball(graph, graph.item_node(item), hops));

    let m = graph.num_users();
    let mut users: Vec<usize> = nodes.iter().copied().filter(|&v| v < m).collect();
    let mut items: Vec<usize> = nodes.iter().filter(|&&v| v >= m).map(|&v| v - m).collect();
    users.sort_unstable();
    items.sort_unstable();
    let user_local: HashMap<usize, usize> = users.iter().enumerate().map(|(k, &u)| (u, k)).collect();
    let item_local: HashMap<usize, usize> = items.iter().enumerate().map(|(k, &i)| (i, k)).collect();

    let mut edges = Vec::new();
    let mut local_edges = Vec::new();
    for (lu, &u) in users.iter().enumerate() {
        for &i in graph.user_items(u) {
            if let Some(&li) = item_local.get(&i) {
                edges.push((u, i));
                local_edges.push((lu, users.len() + li));
            }
        }
    }
    Ok(Subgraph {
        anchor_user: user,
        anchor_item: item,
        hops,
        users,
        items,
        user_local,
        item_local,
        edges,
        local_edges,
    })
}

/// Unified nodes within `hops` edges of `start`, including `start`.
fn ball(graph: &BipartiteGraph, start: usize, hops: usize) -> HashSet<usize> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((v, depth)) = queue.pop_front() {
        if depth == hops {
            continue;
        }
        for w in graph.node_neighbors(v) {
            if seen.insert(w) {
                queue.push_back((w, depth + 1));
            }
        }
    }
    seen
}

/// Doubly directed, two-relation view of a [`Subgraph`].
///
/// Directed edge `e` in either list comes from undirected edge `e` of the
/// subgraph, so both copies share one mask entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalGraph {
    num_nodes: usize,
    /// `(source item node, target user node)`.
    item_to_user: Vec<(usize, usize)>,
    /// `(source user node, target item node)`.
    user_to_item: Vec<(usize, usize)>,
    /// In-neighbor count of each node under its incoming relation.
    in_degree: Vec<usize>,
}

impl RelationalGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.item_to_user.len()
    }

    pub fn item_to_user(&self) -> &[(usize, usize)] {
        &self.item_to_user
    }

    pub fn user_to_item(&self) -> &[(usize, usize)] {
        &self.user_to_item
    }

    /// Each node receives messages along exactly one relation, so one count
    /// per node suffices.
    pub fn in_degree(&self, node: usize) -> usize {
        self.in_degree[node]
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degree
    }
}

pub fn symmetrize(subgraph: &Subgraph) -> RelationalGraph {
    let local = subgraph.local_edges();
    let item_to_user = local.iter().map(|&(u, i)| (i, u)).collect();
    let user_to_item = local.to_vec();
    RelationalGraph {
        num_nodes: subgraph.num_nodes(),
        item_to_user,
        user_to_item,
        in_degree: subgraph.local_degrees(),
    }
}
