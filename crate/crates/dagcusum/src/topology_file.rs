//! Network description files.
//!
//! ```toml
//! n_sensors = 4
//! edges = [[1, 2], [2, 3], [3, 4], [4, 1]]
//! secure = [1, 3]
//! ```
//!
//! Sensors are numbered from 1.

use std::path::Path;

use dagcusum_core::NetworkTopology;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub n_sensors: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub secure: Vec<usize>,
}

impl TopologyFile {
    pub fn from_topology(t: &NetworkTopology) -> Self {
        Self {
            n_sensors: t.n_sensors(),
            edges: t.edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            secure: t.secure_sensors().map(|j| j + 1).collect(),
        }
    }

    pub fn to_topology(&self) -> Result<NetworkTopology> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        NetworkTopology::from_one_based(self.n_sensors, &edges, &self.secure)
            .map_err(|e| HarnessError::config("topology", e.to_string()))
    }
}

pub fn parse_topology(text: &str, origin: &Path) -> Result<NetworkTopology> {
    let f: TopologyFile = toml::from_str(text)
        .map_err(|e| HarnessError::Parse { path: origin.to_path_buf(), message: e.message().to_string() })?;
    f.to_topology()
}

pub fn load_topology(path: &Path) -> Result<NetworkTopology> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_topology(&text, path)
}

pub fn write_topology(t: &NetworkTopology, path: &Path) -> Result<()> {
    let text = toml::to_string(&TopologyFile::from_topology(t)).expect("topology serializes");
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
