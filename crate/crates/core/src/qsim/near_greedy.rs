use std::ops::Range;

use crate::env::JointAction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearGreedyEntry {
    pub agent: usize,
    pub action: usize,
    /// `(action, u*_{-agent})`.
    pub joint: JointAction,
}

/// All single-agent deviations from a greedy anchor, agent-major and
/// action-minor. The anchor itself appears once per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearGreedySet {
    anchor: JointAction,
    entries: Vec<NearGreedyEntry>,
    offsets: Vec<usize>,
}

impl NearGreedySet {
    pub fn build(anchor: &JointAction, avail: &[Vec<bool>]) -> Result<Self> {
        if anchor.len() != avail.len() {
            return Err(Error::shape("near_greedy", avail.len(), anchor.len()));
        }
        let mut entries = Vec::new();
        let mut offsets = Vec::with_capacity(avail.len() + 1);
        for (agent, mask) in avail.iter().enumerate() {
            let a = anchor[agent];
            if a >= mask.len() || !mask[a] {
                return Err(Error::InvalidAction { agent, action: a, reason: "anchor unavailable" });
            }
            offsets.push(entries.len());
            for (action, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                entries.push(NearGreedyEntry { agent, action, joint: anchor.with(agent, action) });
            }
        }
        offsets.push(entries.len());
        Ok(Self { anchor: anchor.clone(), entries, offsets })
    }

    pub fn anchor(&self) -> &JointAction {
        &self.anchor
    }

    pub fn entries(&self) -> &[NearGreedyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Entry indices belonging to `agent`.
    pub fn agent_range(&self, agent: usize) -> Range<usize> {
        self.offsets[agent]..self.offsets[agent + 1]
    }

    /// Index of `agent`'s non-deviating entry.
    pub fn anchor_entry(&self, agent: usize) -> usize {
        let a = self.anchor[agent];
        self.agent_range(agent).find(|&k| self.entries[k].action == a).expect("anchor is available by construction")
    }
}

pub fn build_near_greedy(anchor: &JointAction, avail: &[Vec<bool>]) -> Result<NearGreedySet> {
    NearGreedySet::build(anchor, avail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agents_three_actions() {
        let set = build_near_greedy(&JointAction(vec![0, 0]), &[vec![true; 3], vec![true; 3]]).unwrap();
        let joints: Vec<Vec<usize>> = set.entries().iter().map(|e| e.joint.0.clone()).collect();
        assert_eq!(joints, vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![0, 0], vec![0, 1], vec![0, 2]]);
        assert_eq!(set.agent_range(1), 3..6);
        assert_eq!(set.anchor_entry(1), 3);
    }

    #[test]
    fn single_agent_is_its_action_set() {
        let set = build_near_greedy(&JointAction(vec![2]), &[vec![true; 4]]).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.entries().iter().enumerate().all(|(k, e)| e.joint.0 == vec![k]));
    }

    #[test]
    fn masked_action_is_skipped() {
        let set = build_near_greedy(&JointAction(vec![0, 0]), &[vec![true; 3], vec![true, true, false]]).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.entries().iter().all(|e| e.joint.0 != vec![0, 2]));
    }

    #[test]
    fn anchor_must_be_available() {
        assert!(build_near_greedy(&JointAction(vec![1]), &[vec![true, false]]).is_err());
    }
}
