//! Instance files, train/test manifests, and reference optima.
//!
//! An instance file is one JSON object:
//!
//! ```json
//! {"name": "...", "n": 2, "m": 1, "objective": [-1, -1],
//!  "matrix": [[1, 1]], "rhs": [3], "known_ip_optimum": -3}
//! ```
//!
//! A manifest lists instance paths relative to its own directory:
//! `{"family": {...}, "train": [...], "test": [...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{branch_and_bound, knapsack_optimum, maxcut_optimum, planning_optimum};
use crate::instances::{
    gen_maxcut_with_graph, gen_planning_with_data, Family, GenerateError, GeneratorSpec,
};
use crate::lp::{IpInstance, LpError};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: declared size {declared:?} does not match data {actual:?}")]
    Size {
        path: PathBuf,
        declared: (usize, usize),
        actual: (usize, usize),
    },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: LpError },
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    n: usize,
    m: usize,
    objective: Vec<f64>,
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_ip_optimum: Option<f64>,
}

pub fn instance_to_json(inst: &IpInstance) -> String {
    let file = InstanceFile {
        name: inst.name.clone(),
        n: inst.num_vars(),
        m: inst.num_rows(),
        objective: inst.objective.clone(),
        matrix: inst.constraint_matrix.clone(),
        rhs: inst.rhs.clone(),
        known_ip_optimum: inst.known_ip_optimum,
    };
    serde_json::to_string(&file).expect("instance serializes")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_instance(path: &Path, inst: &IpInstance) -> Result<(), DatasetError> {
    write_text(path, &instance_to_json(inst))
}

pub fn read_instance(path: &Path) -> Result<IpInstance, DatasetError> {
    let f: InstanceFile = read_json(path)?;
    let actual = (f.objective.len(), f.matrix.len());
    if (f.n, f.m) != actual {
        return Err(DatasetError::Size {
            path: path.to_path_buf(),
            declared: (f.n, f.m),
            actual,
        });
    }
    let mut inst = IpInstance::new(f.name, f.objective, f.matrix, f.rhs).map_err(|source| {
        DatasetError::Invalid {
            path: path.to_path_buf(),
            source,
        }
    })?;
    inst.known_ip_optimum = f.known_ip_optimum;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        write_text(path, &serde_json::to_string_pretty(self).expect("manifest serializes"))
    }

    pub fn paths(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

/// Reads every instance of `split`, resolving paths against the manifest's directory.
pub fn load_split(manifest_path: &Path, split: Split) -> Result<Vec<IpInstance>, DatasetError> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .paths(split)
        .iter()
        .map(|p| read_instance(&base.join(p)))
        .collect()
}

/// Seeds for `count` instances of one split; train and test streams differ.
pub fn split_seeds(master: u64, split: Split, count: usize) -> Vec<u64> {
    let tag = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    (0..count as u64).map(|i| derive_seed(master, &[tag, i])).collect()
}

/// Exact optimum from the cheapest available oracle: dynamic programs for
/// knapsack and planning, side enumeration for small max-cut graphs, and
/// branch-and-bound otherwise. `None` when branch-and-bound exceeds
/// `node_limit`.
pub fn generate_labeled(spec: &GeneratorSpec, node_limit: usize) -> Result<IpInstance, GenerateError> {
    let mut inst = match spec.family {
        Family::Planning { horizon } => {
            let (mut inst, data) = gen_planning_with_data(horizon, spec.seed)?;
            inst.known_ip_optimum = planning_optimum(&data);
            inst
        }
        Family::MaxCut { vertices, edges } if vertices <= 20 => {
            let (mut inst, g) = gen_maxcut_with_graph(vertices, edges, spec.seed)?;
            inst.known_ip_optimum = Some(maxcut_optimum(g.vertices, &g.edges, &g.weights));
            inst
        }
        Family::Knapsack { .. } => {
            let mut inst = spec.generate()?;
            let w = inst.constraint_matrix[0].clone();
            let v: Vec<f64> = inst.objective.iter().map(|c| -c).collect();
            inst.known_ip_optimum = Some(knapsack_optimum(&w, &v, inst.rhs[0]));
            inst
        }
        _ => spec.generate()?,
    };
    if inst.known_ip_optimum.is_none() {
        inst.known_ip_optimum = branch_and_bound(&inst, node_limit).map(|r| r.value);
    }
    Ok(inst)
}
