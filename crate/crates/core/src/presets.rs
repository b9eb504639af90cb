//! Reference five-agent formations (three followers, two leaders) with the
//! default sensing graph.

use crate::geometry::Vec3;
use crate::graph::{Dimension, Formation, InteractionGraph, Role};

/// Directed edges `(i, j)`, 0-based: each follower senses the next
/// follower (cyclically) and both leaders.
pub fn default_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..3 {
        edges.push((i, (i + 1) % 3));
        edges.push((i, 3));
        edges.push((i, 4));
    }
    edges
}

pub fn five_agent_roles() -> Vec<Role> {
    vec![Role::Follower, Role::Follower, Role::Follower, Role::Leader, Role::Leader]
}

pub fn default_graph() -> InteractionGraph {
    InteractionGraph::from_edges(five_agent_roles(), &default_edges()).expect("valid default graph")
}

pub fn planar_nominal() -> Vec<Vec3> {
    vec![
        Vec3::new(0.5, 0.5, 0.0),
        Vec3::new(0.5, -0.5, 0.0),
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.0),
        Vec3::new(-1.0, -1.0, 0.0),
    ]
}

pub fn spatial_nominal() -> Vec<Vec3> {
    let s3 = 3f64.sqrt();
    vec![
        Vec3::new(0.05, 0.0, 1.0),
        Vec3::new(-0.05, 0.0, -1.0),
        Vec3::new(1.0, s3, 0.05),
        Vec3::new(1.0, -s3, -0.05),
        Vec3::new(-2.0, 0.0, 0.0),
    ]
}

pub fn planar_formation() -> Formation {
    Formation::new(default_graph(), planar_nominal(), Dimension::Planar).expect("valid planar reference")
}

pub fn spatial_formation() -> Formation {
    Formation::new(default_graph(), spatial_nominal(), Dimension::Spatial).expect("valid spatial reference")
}
