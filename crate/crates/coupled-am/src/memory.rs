//! Stored content synthesis: subspace-structured datasets from a staircase
//! generator matrix, and per-cluster weight matrices orthogonal to every
//! stored sub-pattern.
//!
//! Weight matrices come in two modes. `Nullspace` computes exact orthogonal
//! complements of the cluster-restricted generator columns. `Random` draws
//! sparse random bipartite graphs and stores only the all-zero pattern, which
//! is the standard shortcut for recall experiments: orthogonality is then
//! trivially exact and recall statistics are unaffected.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::rng::SplitMix64;
use crate::topology::CoupledTopology;

/// Parameters of the staircase generator construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Subspace dimension (rows of G).
    pub k: usize,
    /// Pattern length (columns of G).
    pub n: usize,
    /// Generator entries are integers in [0, gamma-1].
    pub gamma: u32,
    /// Message entries are integers in [0, upsilon-1].
    pub upsilon: u32,
    /// Alphabet size: admissible pattern entries lie in [0, alphabet-1].
    pub alphabet: u32,
    /// Maximum column weight of G.
    pub d_star: u32,
    /// Planes of the companion geometry (L).
    pub planes: usize,
    /// Clusters per plane of the companion geometry (D).
    pub clusters: usize,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.k > self.n {
            return Err(Error::Config {
                field: "k",
                message: format!("need 1 <= k <= n, got k={} n={}", self.k, self.n),
            });
        }
        if self.gamma < 2 || self.upsilon < 2 || self.alphabet < 2 {
            return Err(Error::Config {
                field: "gamma/upsilon/alphabet",
                message: "entry bounds and alphabet must be at least 2".into(),
            });
        }
        if self.d_star == 0 {
            return Err(Error::Config {
                field: "d_star",
                message: "d_star >= 1 required".into(),
            });
        }
        let dl = self.planes * self.clusters;
        if dl == 0 || !self.k.is_multiple_of(dl) || !self.n.is_multiple_of(dl) {
            return Err(Error::Config {
                field: "planes/clusters",
                message: format!(
                    "planes*clusters = {dl} must divide both k = {} and n = {}",
                    self.k, self.n
                ),
            });
        }
        // Worst-case admissibility bound on pattern entries.
        let need = u64::from(self.d_star) * u64::from(self.gamma - 1) * u64::from(self.upsilon - 1);
        if u64::from(self.alphabet - 1) < need {
            return Err(Error::Infeasible(format!(
                "alphabet-1 = {} < d_star*(gamma-1)*(upsilon-1) = {need}; admissibility is not guaranteed",
                self.alphabet - 1
            )));
        }
        Ok(())
    }

    pub fn block_rows(&self) -> usize {
        self.k / (self.planes * self.clusters)
    }

    pub fn block_cols(&self) -> usize {
        self.n / (self.planes * self.clusters)
    }
}

/// Integer pattern with bounded alphabet. Mid-recall states may leave the
/// range transiently; stored patterns never do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternState {
    pub values: Vec<i32>,
    pub alphabet: u32,
}

impl PatternState {
    pub fn zeros(n: usize, alphabet: u32) -> Self {
        Self {
            values: vec![0; n],
            alphabet,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamps every entry into [0, alphabet-1]; applied only on final output.
    pub fn clamped(&self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|&v| v.clamp(0, self.alphabet as i32 - 1))
                .collect(),
            alphabet: self.alphabet,
        }
    }
}

/// A generator matrix plus the patterns enumerated from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredDataset {
    pub spec: GeneratorSpec,
    /// Row-major k x n, entries in [0, gamma-1] (some zeroed by the weight cap).
    pub generator: Vec<Vec<i64>>,
    pub rank: usize,
    pub patterns: Vec<PatternState>,
}

const BUILD_RETRIES: usize = 100;

/// Assembles the staircase generator: planes*clusters block rows, block row
/// `b` occupying block columns `b` and `b+1` (the last row only its own),
/// each block a fresh full-row-rank draw with entries in [0, gamma-1].
/// Column weights above `d_star` are trimmed smallest-first. Retries the
/// whole draw until the assembled matrix has full rank `k`.
pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<Vec<Vec<i64>>> {
    spec.validate()?;
    let dl = spec.planes * spec.clusters;
    let br = spec.block_rows();
    let bc = spec.block_cols();
    if br > bc {
        return Err(Error::Infeasible(format!(
            "block rows {br} exceed block cols {bc}; blocks cannot have full row rank"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    for _attempt in 0..BUILD_RETRIES {
        let mut g = vec![vec![0i64; spec.n]; spec.k];
        for b in 0..dl {
            for offset in 0..=1usize {
                let col_block = b + offset;
                if col_block >= dl {
                    continue;
                }
                let block = draw_full_row_rank_block(br, bc, spec.gamma, &mut rng)?;
                for (r, row) in block.iter().enumerate() {
                    for (c, &v) in row.iter().enumerate() {
                        g[b * br + r][col_block * bc + c] = v;
                    }
                }
            }
        }
        cap_column_weights(&mut g, spec.d_star);
        if exact::rank(&g) == spec.k {
            return Ok(g);
        }
    }
    Err(Error::Infeasible(format!(
        "could not reach rank {} under the d_star = {} weight cap after {BUILD_RETRIES} draws",
        spec.k, spec.d_star
    )))
}

fn draw_full_row_rank_block(
    rows: usize,
    cols: usize,
    gamma: u32,
    rng: &mut SplitMix64,
) -> Result<Vec<Vec<i64>>> {
    for _ in 0..BUILD_RETRIES {
        let block: Vec<Vec<i64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| rng.next_below(u64::from(gamma)) as i64)
                    .collect()
            })
            .collect();
        if exact::rank(&block) == rows {
            return Ok(block);
        }
    }
    Err(Error::Infeasible(format!(
        "no full-row-rank {rows}x{cols} block with entries below {gamma} found"
    )))
}

fn cap_column_weights(g: &mut [Vec<i64>], d_star: u32) {
    let n = g[0].len();
    for c in 0..n {
        let mut nz: Vec<usize> = (0..g.len()).filter(|&r| g[r][c] != 0).collect();
        if nz.len() <= d_star as usize {
            continue;
        }
        // zero the smallest-magnitude entries first
        nz.sort_by_key(|&r| (g[r][c].abs(), r));
        let excess = nz.len() - d_star as usize;
        for &r in nz.iter().take(excess) {
            g[r][c] = 0;
        }
    }
}

/// Enumerates admissible patterns `x = u * G` with `u` in [0, upsilon-1]^k and
/// every entry of `x` in [0, alphabet-1].
///
/// When `upsilon^k <= limit` the message box is enumerated exhaustively;
/// otherwise distinct random messages are sampled until `limit` admissible
/// patterns are found.
pub fn enumerate_patterns(
    spec: &GeneratorSpec,
    generator: &[Vec<i64>],
    limit: usize,
    seed: u64,
) -> Vec<PatternState> {
    let total = (spec.upsilon as u128).checked_pow(spec.k as u32);
    let mut out = Vec::new();
    match total {
        Some(t) if t <= limit as u128 => {
            let mut u = vec![0u32; spec.k];
            loop {
                if let Some(p) = admissible(spec, generator, &u) {
                    out.push(p);
                }
                // odometer increment
                let mut i = 0;
                loop {
                    if i == spec.k {
                        return out;
                    }
                    u[i] += 1;
                    if u[i] < spec.upsilon {
                        break;
                    }
                    u[i] = 0;
                    i += 1;
                }
            }
        }
        _ => {
            let mut rng = SplitMix64::new(seed);
            let mut seen = HashSet::new();
            let mut attempts = 0usize;
            while out.len() < limit && attempts < limit.saturating_mul(50) {
                attempts += 1;
                let u: Vec<u32> = (0..spec.k)
                    .map(|_| rng.next_below(u64::from(spec.upsilon)) as u32)
                    .collect();
                if !seen.insert(u.clone()) {
                    continue;
                }
                if let Some(p) = admissible(spec, generator, &u) {
                    out.push(p);
                }
            }
            out
        }
    }
}

fn admissible(spec: &GeneratorSpec, generator: &[Vec<i64>], u: &[u32]) -> Option<PatternState> {
    let mut x = vec![0i64; spec.n];
    for (row, &coef) in generator.iter().zip(u) {
        if coef == 0 {
            continue;
        }
        for (j, &gij) in row.iter().enumerate() {
            x[j] += i64::from(coef) * gij;
        }
    }
    let bound = i64::from(spec.alphabet) - 1;
    if x.iter().all(|&v| (0..=bound).contains(&v)) {
        Some(PatternState {
            values: x.iter().map(|&v| v as i32).collect(),
            alphabet: spec.alphabet,
        })
    } else {
        None
    }
}

/// Builds the full dataset: generator, rank, and enumerated patterns.
pub fn build_dataset(spec: &GeneratorSpec, limit: usize, seed: u64) -> Result<StoredDataset> {
    let generator = build_generator(spec, seed)?;
    let rank = exact::rank(&generator);
    let patterns = enumerate_patterns(spec, &generator, limit, seed ^ 0xA5A5_A5A5);
    Ok(StoredDataset {
        spec: *spec,
        generator,
        rank,
        patterns,
    })
}

/// One row of a cluster weight matrix, stored sparse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseRow {
    pub idx: Vec<u32>,
    pub w: Vec<f64>,
}

impl SparseRow {
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        for (&i, &w) in self.idx.iter().zip(&self.w) {
            d[i as usize] = w;
        }
        d
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let mut idx = Vec::new();
        let mut w = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                idx.push(i as u32);
                w.push(v);
            }
        }
        Self { idx, w }
    }
}

/// Weight matrix of one cluster plus its local-to-flat index map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterWeights {
    pub plane: usize,
    pub cluster: usize,
    pub neuron_map: Vec<usize>,
    pub rows: Vec<SparseRow>,
}

impl ClusterWeights {
    pub fn n_neurons(&self) -> usize {
        self.neuron_map.len()
    }

    pub fn m_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Per-neuron constraint participation counts.
    pub fn column_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n_neurons()];
        for row in &self.rows {
            for &i in &row.idx {
                deg[i as usize] += 1;
            }
        }
        deg
    }

    /// Max |W . x| over the cluster restriction of `pattern`.
    pub fn max_violation(&self, pattern: &PatternState) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                row.idx
                    .iter()
                    .zip(&row.w)
                    .map(|(&i, &w)| w * f64::from(pattern.values[self.neuron_map[i as usize]]))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Random,
    Nullspace,
}

/// All cluster weight matrices of one network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsBundle {
    pub mode: WeightMode,
    pub seed: u64,
    pub m_per_cluster: usize,
    pub mean_row_degree: f64,
    pub clusters: Vec<ClusterWeights>,
}

/// Sparse random bipartite weights: each constraint row touches each cluster
/// neuron independently with probability `mean_row_degree / n_c`, weights are
/// random signs scaled by uniform [0.5, 1.5] magnitudes. Rows with fewer than
/// two contacts are redrawn; neurons left untouched get one extra contact so
/// every pattern neuron participates in at least one constraint.
pub fn random_weights(
    topo: &CoupledTopology,
    m_per_cluster: usize,
    mean_row_degree: f64,
    seed: u64,
) -> WeightsBundle {
    let d = topo.clusters_per_plane();
    let mut rng = SplitMix64::new(seed);
    let clusters = topo
        .cluster_members
        .iter()
        .enumerate()
        .map(|(ci, members)| {
            random_cluster_weights(ci / d, ci % d, members, m_per_cluster, mean_row_degree, &mut rng)
        })
        .collect();
    WeightsBundle {
        mode: WeightMode::Random,
        seed,
        m_per_cluster,
        mean_row_degree,
        clusters,
    }
}

/// Random sparse weights for one cluster; see [`random_weights`] for the law.
pub fn random_cluster_weights(
    plane: usize,
    cluster: usize,
    members: &[usize],
    m: usize,
    mean_row_degree: f64,
    rng: &mut SplitMix64,
) -> ClusterWeights {
    assert!(m >= 1, "a cluster needs at least one constraint");
    let n_c = members.len();
    let p = (mean_row_degree / n_c as f64).min(1.0);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        loop {
            let mut idx = Vec::new();
            let mut w = Vec::new();
            for j in 0..n_c {
                if rng.bernoulli(p) {
                    idx.push(j as u32);
                    w.push(rng.sign() * rng.uniform(0.5, 1.5));
                }
            }
            if idx.len() >= 2 {
                rows.push(SparseRow { idx, w });
                break;
            }
        }
    }
    let mut cw = ClusterWeights {
        plane,
        cluster,
        neuron_map: members.to_vec(),
        rows,
    };
    let deg = cw.column_degrees();
    for (j, &dj) in deg.iter().enumerate() {
        if dj == 0 {
            let r = rng.next_below(m as u64) as usize;
            let row = &mut cw.rows[r];
            let pos = row.idx.partition_point(|&i| (i as usize) < j);
            row.idx.insert(pos, j as u32);
            row.w.insert(pos, rng.sign() * rng.uniform(0.5, 1.5));
        }
    }
    cw
}

/// Exact null-space weights: for each cluster, an integer basis of
/// `{v : G_c v = 0}` is computed over the rationals and `m_per_cluster`
/// random sparse combinations of basis vectors become the constraint rows.
/// Fails when some cluster's sub-pattern space is full (empty null space).
pub fn null_space_weights(
    dataset: &StoredDataset,
    topo: &CoupledTopology,
    m_per_cluster: usize,
    seed: u64,
) -> Result<WeightsBundle> {
    if dataset.spec.n != topo.grid.neurons() {
        return Err(Error::DimensionMismatch {
            context: "generator columns vs topology neurons",
            expected: topo.grid.neurons(),
            got: dataset.spec.n,
        });
    }
    let d = topo.clusters_per_plane();
    let mut rng = SplitMix64::new(seed);
    let mut clusters = Vec::with_capacity(topo.n_clusters());
    for (ci, members) in topo.cluster_members.iter().enumerate() {
        let sub: Vec<Vec<i64>> = dataset
            .generator
            .iter()
            .map(|row| members.iter().map(|&c| row[c]).collect())
            .collect();
        let basis = exact::null_space_basis(&sub);
        if basis.is_empty() {
            return Err(Error::Degenerate(format!(
                "cluster {ci}: sub-pattern space is full; no orthogonal constraints exist"
            )));
        }
        let n_c = members.len();
        // A neuron no basis vector touches can never carry a constraint.
        for j in 0..n_c {
            if basis.iter().all(|v| v[j] == 0) {
                return Err(Error::Degenerate(format!(
                    "cluster {ci}: neuron {j} cannot be covered by any orthogonal constraint"
                )));
            }
        }
        // Every basis vector joins one of the first min(m, dim) rows, so each
        // free coordinate (touched by exactly one basis vector) is covered by
        // construction; pivot-coordinate coverage is verified and the draw is
        // retried on the rare cancellation.
        let groups = m_per_cluster.min(basis.len());
        let mut rows: Option<Vec<SparseRow>> = None;
        'draw: for _ in 0..BUILD_RETRIES {
            let mut cand: Vec<Vec<i64>> = vec![vec![0i64; n_c]; groups];
            for (i, v) in basis.iter().enumerate() {
                let coef = [-2i64, -1, 1, 2][rng.next_below(4) as usize];
                for (acc, &x) in cand[i % groups].iter_mut().zip(v) {
                    *acc += coef * x;
                }
            }
            let mut built: Vec<SparseRow> = cand
                .iter()
                .map(|dense| {
                    SparseRow::from_dense(&dense.iter().map(|&x| x as f64).collect::<Vec<_>>())
                })
                .collect();
            while built.len() < m_per_cluster {
                built.push(SparseRow::from_dense(&combine_basis(&basis, &mut rng)));
            }
            let mut covered = vec![false; n_c];
            for row in &built {
                for &j in &row.idx {
                    covered[j as usize] = true;
                }
            }
            if covered.iter().all(|&c| c) {
                rows = Some(built);
                break 'draw;
            }
        }
        let Some(rows) = rows else {
            return Err(Error::Infeasible(format!(
                "cluster {ci}: no draw of {m_per_cluster} constraint rows covered every neuron"
            )));
        };
        let cw = ClusterWeights {
            plane: ci / d,
            cluster: ci % d,
            neuron_map: members.clone(),
            rows,
        };
        debug_assert!(cw.column_degrees().iter().all(|&deg| deg >= 1));
        clusters.push(cw);
    }
    Ok(WeightsBundle {
        mode: WeightMode::Nullspace,
        seed,
        m_per_cluster,
        mean_row_degree: f64::NAN,
        clusters,
    })
}

/// Builds a dataset plus exact null-space weights, redrawing the generator
/// when a draw leaves some cluster neuron uncoverable (its coordinate vector
/// landing inside the cluster's sub-pattern row space).
pub fn nullspace_network(
    spec: &GeneratorSpec,
    topo: &CoupledTopology,
    m_per_cluster: usize,
    pattern_limit: usize,
    seed: u64,
) -> Result<(StoredDataset, WeightsBundle)> {
    let mut last = None;
    for attempt in 0..BUILD_RETRIES as u64 {
        let ds = build_dataset(spec, pattern_limit, seed.wrapping_add(attempt))?;
        match null_space_weights(&ds, topo, m_per_cluster, seed ^ 0x77F0_55AA) {
            Ok(wb) => return Ok((ds, wb)),
            Err(e @ Error::Degenerate(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Infeasible("no coverable generator draw found".into())))
}

fn combine_basis(basis: &[Vec<i64>], rng: &mut SplitMix64) -> Vec<f64> {
    let n = basis[0].len();
    let take = 1 + rng.next_below(basis.len().min(3) as u64) as usize;
    loop {
        let mut dense = vec![0i64; n];
        for _ in 0..take {
            let b = &basis[rng.next_below(basis.len() as u64) as usize];
            let coef = [-2i64, -1, 1, 2][rng.next_below(4) as usize];
            for (d, &v) in dense.iter_mut().zip(b) {
                *d += coef * v;
            }
        }
        if dense.iter().any(|&v| v != 0) {
            return dense.iter().map(|&v| v as f64).collect();
        }
    }
}
