//! Coupled network geometry: a 2D grid of pattern neurons covered by
//! overlapping square windows. Window rows are planes, window columns are the
//! clusters within a plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Convention, EdgePolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub window: usize,
    pub stride: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.window == 0 || self.stride == 0 {
            return Err(Error::Config {
                field: "grid",
                message: "all grid fields must be positive".into(),
            });
        }
        if self.window > self.height || self.window > self.width {
            return Err(Error::Config {
                field: "window",
                message: format!(
                    "window {} exceeds grid {}x{}",
                    self.window, self.height, self.width
                ),
            });
        }
        if !(self.height - self.window).is_multiple_of(self.stride) {
            return Err(Error::Config {
                field: "height",
                message: format!(
                    "(height - window) = {} not divisible by stride {}",
                    self.height - self.window,
                    self.stride
                ),
            });
        }
        if !(self.width - self.window).is_multiple_of(self.stride) {
            return Err(Error::Config {
                field: "width",
                message: format!(
                    "(width - window) = {} not divisible by stride {}",
                    self.width - self.window,
                    self.stride
                ),
            });
        }
        Ok(())
    }

    /// Number of planes (window rows).
    pub fn planes(&self) -> usize {
        (self.height - self.window) / self.stride + 1
    }

    /// Number of clusters per plane (window columns).
    pub fn clusters_per_plane(&self) -> usize {
        (self.width - self.window) / self.stride + 1
    }

    pub fn neurons(&self) -> usize {
        self.height * self.width
    }
}

/// The built geometry: per-cluster membership lists (sorted flat indices,
/// row-major) and per-neuron cover counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledTopology {
    pub grid: GridSpec,
    /// Indexed `plane * clusters_per_plane + cluster`.
    pub cluster_members: Vec<Vec<usize>>,
    pub neuron_degrees: Vec<u32>,
}

pub fn build_topology(spec: &GridSpec) -> Result<CoupledTopology> {
    spec.validate()?;
    let l = spec.planes();
    let d = spec.clusters_per_plane();
    let mut cluster_members = Vec::with_capacity(l * d);
    let mut neuron_degrees = vec![0u32; spec.neurons()];
    for plane in 0..l {
        let r0 = plane * spec.stride;
        for cluster in 0..d {
            let c0 = cluster * spec.stride;
            let mut members = Vec::with_capacity(spec.window * spec.window);
            for r in r0..r0 + spec.window {
                for c in c0..c0 + spec.window {
                    let idx = r * spec.width + c;
                    members.push(idx);
                    neuron_degrees[idx] += 1;
                }
            }
            cluster_members.push(members);
        }
    }
    Ok(CoupledTopology {
        grid: *spec,
        cluster_members,
        neuron_degrees,
    })
}

impl CoupledTopology {
    pub fn planes(&self) -> usize {
        self.grid.planes()
    }

    pub fn clusters_per_plane(&self) -> usize {
        self.grid.clusters_per_plane()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_members.len()
    }

    pub fn cluster(&self, plane: usize, cluster: usize) -> &[usize] {
        &self.cluster_members[plane * self.clusters_per_plane() + cluster]
    }

    /// Histogram of neuron cover counts, indexed by degree.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let max = *self.neuron_degrees.iter().max().unwrap_or(&0) as usize;
        let mut hist = vec![0usize; max + 1];
        for &d in &self.neuron_degrees {
            hist[d as usize] += 1;
        }
        hist
    }
}

/// Edge-perspective pattern-neuron degree distribution of a built topology:
/// `lambda_j = j * N_j / sum_k k * N_k`.
pub fn edge_degree_distribution(topo: &CoupledTopology) -> Result<EdgePolynomial> {
    let hist = topo.degree_histogram();
    let total_edges: f64 = hist
        .iter()
        .enumerate()
        .map(|(deg, &n)| (deg * n) as f64)
        .sum();
    if total_edges == 0.0 {
        return Err(Error::Degenerate("topology covers no neuron".into()));
    }
    let max_deg = hist.len() - 1;
    let coeffs: Vec<f64> = (1..=max_deg)
        .map(|j| (j * hist[j]) as f64 / total_edges)
        .collect();
    EdgePolynomial::new(coeffs, Convention::PatternSide)
}

/// JSON payload of `topology dump`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TopologyDump {
    pub grid: GridSpec,
    pub planes: usize,
    pub clusters_per_plane: usize,
    pub indexing: String,
    pub degree_histogram: Vec<usize>,
    pub lambda: Vec<f64>,
    pub clusters: Vec<ClusterDump>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterDump {
    pub plane: usize,
    pub cluster: usize,
    pub members: Vec<usize>,
}

pub fn dump_topology(topo: &CoupledTopology) -> Result<TopologyDump> {
    let lambda = edge_degree_distribution(topo)?;
    let d = topo.clusters_per_plane();
    Ok(TopologyDump {
        grid: topo.grid,
        planes: topo.planes(),
        clusters_per_plane: d,
        indexing: "row-major".into(),
        degree_histogram: topo.degree_histogram(),
        lambda: lambda.coeffs().to_vec(),
        clusters: topo
            .cluster_members
            .iter()
            .enumerate()
            .map(|(i, members)| ClusterDump {
                plane: i / d,
                cluster: i % d,
                members: members.clone(),
            })
            .collect(),
    })
}
