//! Interaction graph with leader/follower roles, structural checks and
//! configuration bookkeeping.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RotationAxis, Vec3};

/// Sine of the leader-line/axis angle below which the two are treated as parallel.
pub const PARALLEL_SINE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("agent {0} lists itself as a neighbor")]
    SelfLoop(usize),
    #[error("agent {agent} lists neighbor {neighbor} more than once")]
    DuplicateNeighbor { agent: usize, neighbor: usize },
    #[error("follower {agent} has {count} neighbors; at least 2 are required")]
    TooFewNeighbors { agent: usize, count: usize },
    #[error("root pair must be two distinct agents, got ({0}, {1})")]
    InvalidRoots(usize, usize),
    #[error("at least 2 leaders are required, got {0}")]
    TooFewLeaders(usize),
    #[error("at least 1 follower is required")]
    NoFollowers,
    #[error("neighbor list count {lists} does not match role count {roles}")]
    ShapeMismatch { lists: usize, roles: usize },
    #[error("configuration has {got} positions for {n} agents")]
    ConfigLength { got: usize, n: usize },
    #[error("planar formation has agent {agent} off the z = 0 plane (z = {z})")]
    OffPlane { agent: usize, z: f64 },
    #[error("agent {agent} has non-finite position")]
    NonFinite { agent: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Follower,
    Leader,
}

/// Spatial dimension of a formation. Planar formations keep `z == 0`
/// in the 3-D storage and use 2×2 weight blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Planar,
    Spatial,
}

impl Dimension {
    pub fn d(self) -> usize {
        match self {
            Dimension::Planar => 2,
            Dimension::Spatial => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            2 => Ok(Dimension::Planar),
            3 => Ok(Dimension::Spatial),
            other => Err(format!("dimension must be 2 or 3, got {other}")),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.d() as u8
    }
}

/// Directed sensing graph: `j ∈ neighbors[i]` means agent `i` measures
/// `p_j − p_i`. Agents are 0-based internally.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    neighbors: Vec<Vec<usize>>,
    roles: Vec<Role>,
}

impl InteractionGraph {
    pub fn new(neighbors: Vec<Vec<usize>>, roles: Vec<Role>) -> Result<Self, GraphError> {
        if neighbors.len() != roles.len() {
            return Err(GraphError::ShapeMismatch { lists: neighbors.len(), roles: roles.len() });
        }
        let n = roles.len();
        for (i, list) in neighbors.iter().enumerate() {
            for (pos, &j) in list.iter().enumerate() {
                if j >= n {
                    return Err(GraphError::IndexOutOfRange { index: j, n });
                }
                if j == i {
                    return Err(GraphError::SelfLoop(i));
                }
                if list[..pos].contains(&j) {
                    return Err(GraphError::DuplicateNeighbor { agent: i, neighbor: j });
                }
            }
            if roles[i] == Role::Follower && list.len() < 2 {
                return Err(GraphError::TooFewNeighbors { agent: i, count: list.len() });
            }
        }
        let graph = Self { neighbors, roles };
        if graph.followers().is_empty() {
            return Err(GraphError::NoFollowers);
        }
        if graph.leaders().len() < 2 {
            return Err(GraphError::TooFewLeaders(graph.leaders().len()));
        }
        Ok(graph)
    }

    /// Builds a graph from directed `(i, j)` edges meaning "i senses j".
    pub fn from_edges(roles: Vec<Role>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = roles.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n {
                return Err(GraphError::IndexOutOfRange { index: i, n });
            }
            neighbors[i].push(j);
        }
        Self::new(neighbors, roles)
    }

    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn role(&self, agent: usize) -> Role {
        self.roles[agent]
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Follower indices in increasing order.
    pub fn followers(&self) -> Vec<usize> {
        self.indices_with(Role::Follower)
    }

    /// Leader indices in increasing order.
    pub fn leaders(&self) -> Vec<usize> {
        self.indices_with(Role::Leader)
    }

    fn indices_with(&self, role: Role) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == role).collect()
    }

    /// Appends a follower that senses `neighbors`. No existing list changes.
    pub fn with_follower(&self, neighbors: Vec<usize>) -> Result<Self, GraphError> {
        let mut lists = self.neighbors.clone();
        let mut roles = self.roles.clone();
        lists.push(neighbors);
        roles.push(Role::Follower);
        Self::new(lists, roles)
    }

    fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                if !adj[i].contains(&j) {
                    adj[i].push(j);
                }
                if !adj[j].contains(&i) {
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}

/// Breadth-first reachability from `sources`, skipping `removed`.
fn reachable(adj: &[Vec<usize>], sources: &[usize], removed: Option<usize>) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if Some(s) != removed && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if Some(w) != removed && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// True iff every non-root agent stays reachable from the root pair after
/// deleting any single vertex other than itself (roots included).
pub fn validate_two_rooted(graph: &InteractionGraph, roots: (usize, usize)) -> Result<bool, GraphError> {
    let n = graph.n();
    let (r1, r2) = roots;
    for r in [r1, r2] {
        if r >= n {
            return Err(GraphError::IndexOutOfRange { index: r, n });
        }
    }
    if r1 == r2 {
        return Err(GraphError::InvalidRoots(r1, r2));
    }
    let adj = graph.undirected_adjacency();
    let sources = [r1, r2];

    if !reachable(&adj, &sources, None).iter().all(|&s| s) {
        return Ok(false);
    }
    for removed in 0..n {
        let seen = reachable(&adj, &sources, Some(removed));
        let cut = (0..n).any(|v| v != removed && v != r1 && v != r2 && !seen[v]);
        if cut {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff some leader-pair difference is not parallel to the axis.
pub fn validate_leader_axis(leader_positions: &[Vec3], axis: &RotationAxis) -> Result<bool, GraphError> {
    if leader_positions.len() < 2 {
        return Err(GraphError::TooFewLeaders(leader_positions.len()));
    }
    let zeta = axis.direction();
    for (i, a) in leader_positions.iter().enumerate() {
        for b in &leader_positions[i + 1..] {
            let diff = a - b;
            let len = diff.norm();
            if len > 0.0 && diff.cross(&zeta).norm() / len > PARALLEL_SINE_TOL {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

pub fn centroid(positions: &[Vec3]) -> Vec3 {
    let sum = positions.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / positions.len() as f64
}

/// Stacks the first `d` coordinates of each position into one vector.
pub fn flatten(positions: &[Vec3], d: usize) -> DVector<f64> {
    DVector::from_iterator(
        positions.len() * d,
        positions.iter().flat_map(|p| p.iter().take(d).copied().collect::<Vec<_>>()),
    )
}

/// Inverse of [`flatten`]; missing coordinates are zero.
pub fn unflatten(v: &DVector<f64>, d: usize) -> Vec<Vec3> {
    v.as_slice()
        .chunks(d)
        .map(|c| {
            let mut p = Vec3::zeros();
            p.as_mut_slice()[..d].copy_from_slice(c);
            p
        })
        .collect()
}

/// Interaction graph plus configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub graph: InteractionGraph,
    pub positions: Vec<Vec3>,
    pub dimension: Dimension,
}

impl Formation {
    pub fn new(graph: InteractionGraph, positions: Vec<Vec3>, dimension: Dimension) -> Result<Self, GraphError> {
        if positions.len() != graph.n() {
            return Err(GraphError::ConfigLength { got: positions.len(), n: graph.n() });
        }
        for (agent, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(GraphError::NonFinite { agent });
            }
            if dimension == Dimension::Planar && p.z != 0.0 {
                return Err(GraphError::OffPlane { agent, z: p.z });
            }
        }
        Ok(Self { graph, positions, dimension })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn d(&self) -> usize {
        self.dimension.d()
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.positions)
    }

    pub fn config(&self) -> DVector<f64> {
        flatten(&self.positions, self.d())
    }

    pub fn leader_positions(&self) -> Vec<Vec3> {
        self.graph.leaders().into_iter().map(|i| self.positions[i]).collect()
    }

    /// 2-rootedness checked from the first two leaders.
    pub fn is_two_rooted(&self) -> bool {
        let leaders = self.graph.leaders();
        validate_two_rooted(&self.graph, (leaders[0], leaders[1])).unwrap_or(false)
    }
}
