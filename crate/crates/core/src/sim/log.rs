use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogRole {
    Leader,
    Follower,
    /// Flying in toward its joining position, not yet part of the constraint matrix.
    Joining,
}

impl LogRole {
    pub fn as_str(self) -> &'static str {
        match self {
            LogRole::Leader => "leader",
            LogRole::Follower => "follower",
            LogRole::Joining => "joining",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "leader" => Some(LogRole::Leader),
            "follower" => Some(LogRole::Follower),
            "joining" => Some(LogRole::Joining),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// 0-based agent index.
    pub agent: usize,
    pub role: LogRole,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Leaders and joining agents: `p_i − p*_i`. Followers: their block of `e_f`.
    pub error: Vec3,
}

/// Per-sample aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub t: f64,
    /// Number of axis switches applied so far.
    pub phase: usize,
    /// Agents currently in the constraint matrix.
    pub members: usize,
    /// Scale-free `‖W p‖` over members.
    pub residual: f64,
    pub max_leader_error: f64,
    pub max_follower_error: f64,
    /// Largest `|p_i − p*_i|` component over all members.
    pub max_target_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub samples: Vec<SampleSummary>,
}

impl TrajectoryLog {
    /// `(t, position)` series of one agent, in time order.
    pub fn track(&self, agent: usize) -> Vec<(f64, Vec3)> {
        self.rows.iter().filter(|r| r.agent == agent).map(|r| (r.t, r.position)).collect()
    }

    /// Rows of one agent, in time order.
    pub fn agent_rows(&self, agent: usize) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.agent == agent)
    }

    /// Final logged position of every agent, indexed by agent.
    pub fn final_positions(&self) -> Vec<Vec3> {
        let Some(last) = self.samples.last() else { return Vec::new() };
        let mut rows: Vec<&LogRow> = self.rows.iter().filter(|r| r.t == last.t).collect();
        rows.sort_by_key(|r| r.agent);
        rows.into_iter().map(|r| r.position).collect()
    }
}
