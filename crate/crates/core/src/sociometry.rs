//! Local sociometries and the global connectivity matrix they assemble into.
//!
//! Every particle declares who informs it. Indices are 0-based; row `i` of
//! the matrix lists the informers of particle `i`. Heterogeneous local
//! specifications yield irregular, possibly non-symmetric global graphs.

use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SociometryError {
    #[error("particle {particle}: {topology} extent {extent} must be in 1..{m}")]
    InvalidExtent { particle: usize, topology: &'static str, extent: usize, m: usize },
    #[error("particle {particle}: wheel hub {hub} out of range for swarm of {m}")]
    InvalidHub { particle: usize, hub: usize, m: usize },
    #[error("particle index {index} out of range for swarm of {m}")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("particle {0} has no informers and does not include itself")]
    Orphan(usize),
    #[error("swarm must contain at least one particle")]
    EmptySwarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Topology {
    Global,
    /// `k` neighbours on each side, wrapping around.
    Ring {
        k: usize,
    },
    /// The next `k` particles by index, wrapping around.
    Forward {
        k: usize,
    },
    /// Star around `hub`: the hub hears everyone, everyone hears the hub.
    Wheel {
        hub: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LocalSociometry {
    pub topology: Topology,
    #[serde(default = "default_true")]
    pub include_self: bool,
}

fn default_true() -> bool {
    true
}

impl Default for LocalSociometry {
    fn default() -> Self {
        Self { topology: Topology::Global, include_self: true }
    }
}

impl LocalSociometry {
    pub fn new(topology: Topology, include_self: bool) -> Self {
        Self { topology, include_self }
    }

    pub fn validate(&self, particle: usize, m: usize) -> Result<(), SociometryError> {
        match self.topology {
            Topology::Ring { k } if k == 0 || k >= m => Err(SociometryError::InvalidExtent { particle, topology: "ring", extent: k, m }),
            Topology::Forward { k } if k == 0 || k >= m => {
                Err(SociometryError::InvalidExtent { particle, topology: "forward", extent: k, m })
            }
            Topology::Wheel { hub } if hub >= m => Err(SociometryError::InvalidHub { particle, hub, m }),
            _ => Ok(()),
        }
    }
}

/// Informers of particle `i` (self excluded), sorted ascending.
pub fn build_local_neighbourhood(spec: &LocalSociometry, i: usize, m: usize) -> Result<Vec<usize>, SociometryError> {
    if i >= m {
        return Err(SociometryError::IndexOutOfRange { index: i, m });
    }
    spec.validate(i, m)?;
    let mut out: Vec<usize> = match spec.topology {
        Topology::Global => (0..m).filter(|&j| j != i).collect(),
        Topology::Ring { k } => (1..=k).flat_map(|d| [(i + d) % m, (i + m - d) % m]).collect(),
        Topology::Forward { k } => (1..=k).map(|d| (i + d) % m).collect(),
        Topology::Wheel { hub } if i == hub => (0..m).filter(|&j| j != hub).collect(),
        Topology::Wheel { hub } => vec![hub],
    };
    out.sort_unstable();
    out.dedup();
    out.retain(|&j| j != i);
    Ok(out)
}

/// Immutable `m × m` informer matrix; entry `(i, j)` is true iff particle
/// `j`'s information reaches particle `i`. The diagonal holds the
/// self-inclusion flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    m: usize,
    cells: Vec<bool>,
}

impl ConnectivityMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.m + j]
    }

    pub fn includes_self(&self, i: usize) -> bool {
        self.get(i, i)
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.cells[i * self.m..(i + 1) * self.m]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.m).all(|i| (0..self.m).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Every row is a rotation of row 0.
    pub fn is_circulant(&self) -> bool {
        (0..self.m).all(|i| (0..self.m).all(|j| self.get(i, j) == self.get(0, (j + self.m - i) % self.m)))
    }

    /// 0/1 cells separated by commas; a diagonal cell reads `X` when the
    /// particle includes itself.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if j > 0 {
                    s.push(',');
                }
                let cell = match (i == j, self.get(i, j)) {
                    (true, true) => "X",
                    (_, true) => "1",
                    (_, false) => "0",
                };
                let _ = write!(s, "{cell}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn assemble_connectivity(specs: &[LocalSociometry]) -> Result<ConnectivityMatrix, SociometryError> {
    let m = specs.len();
    if m == 0 {
        return Err(SociometryError::EmptySwarm);
    }
    let mut cells = vec![false; m * m];
    for (i, spec) in specs.iter().enumerate() {
        let neighbours = build_local_neighbourhood(spec, i, m)?;
        if neighbours.is_empty() && !spec.include_self {
            return Err(SociometryError::Orphan(i));
        }
        for j in neighbours {
            cells[i * m + j] = true;
        }
        cells[i * m + i] = spec.include_self;
    }
    Ok(ConnectivityMatrix { m, cells })
}

/// Row `i` as an index set, `i` included iff its self flag is set.
pub fn informers(matrix: &ConnectivityMatrix, i: usize) -> Result<Vec<usize>, SociometryError> {
    if i >= matrix.m {
        return Err(SociometryError::IndexOutOfRange { index: i, m: matrix.m });
    }
    Ok(matrix.row(i).iter().enumerate().filter(|(_, &on)| on).map(|(j, _)| j).collect())
}
