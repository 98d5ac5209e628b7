use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use super::graph::{kind_names, node_dim, EDGE_DIM};
use crate::scenario::{Domain, Scenario};

/// Feature layout shared by datasets and checkpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub domain: Domain,
    pub kinds: Vec<String>,
    pub node_dim: usize,
    pub edge_dim: usize,
}

impl FeatureSchema {
    pub fn of(scenario: &Scenario) -> Self {
        FeatureSchema {
            domain: scenario.domain,
            kinds: kind_names(scenario),
            node_dim: node_dim(scenario),
            edge_dim: EDGE_DIM,
        }
    }

    /// FNV-1a of the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h = fnv::FnvHasher::default();
        h.write(serde_json::to_string(self).expect("schema serializes").as_bytes());
        format!("{:016x}", h.finish())
    }
}
