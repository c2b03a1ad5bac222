//! Experiment harness: sweep the noise level, run recall trials in parallel,
//! and report pattern error rates with Wilson intervals.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de::Mode;
use crate::error::{Error, Result};
use crate::memory::{PatternState, WeightsBundle};
use crate::recall::{coupled_correct, inject_noise, RecallConfig};
use crate::rng::derive_seed;
use crate::topology::{build_topology, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Planes of overlapping square windows (the coupled network).
    Coupled,
    /// All clusters on a single plane: full-height column strips.
    SinglePlaneClustered,
    /// One global cluster containing every neuron.
    Unclustered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecallKnobs {
    pub phi: f64,
    pub t_max_inner: usize,
    pub t_max_outer: usize,
}

impl Default for RecallKnobs {
    fn default() -> Self {
        Self {
            phi: 0.999,
            t_max_inner: 10,
            t_max_outer: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightKnobs {
    /// Constraints per cluster as a fraction of the cluster size.
    pub m_ratio: f64,
    pub mean_row_degree: f64,
}

impl Default for WeightKnobs {
    fn default() -> Self {
        Self {
            m_ratio: 0.75,
            mean_row_degree: 8.0,
        }
    }
}

fn default_frozen_patch() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub pe_grid: Vec<f64>,
    pub trials: usize,
    pub arch: Architecture,
    pub mode: Mode,
    pub base_seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub recall: RecallKnobs,
    #[serde(default)]
    pub weights: WeightKnobs,
    /// Side length of the corner patches frozen in constrained mode.
    #[serde(default = "default_frozen_patch")]
    pub frozen_patch: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.trials == 0 {
            return Err(Error::Config {
                field: "trials",
                message: "at least one trial per grid point".into(),
            });
        }
        if self.pe_grid.is_empty() {
            return Err(Error::Config {
                field: "pe_grid",
                message: "empty noise grid".into(),
            });
        }
        for w in self.pe_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config {
                    field: "pe_grid",
                    message: format!("grid must be strictly increasing, got {} after {}", w[1], w[0]),
                });
            }
        }
        if self
            .pe_grid
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::Config {
                field: "pe_grid",
                message: "noise levels must lie in [0, 1]".into(),
            });
        }
        if self.mode == Mode::Constrained
            && (self.frozen_patch == 0 || self.frozen_patch > self.grid.height.min(self.grid.width) / 2)
        {
            return Err(Error::Config {
                field: "frozen_patch",
                message: format!("patch {} does not fit the grid", self.frozen_patch),
            });
        }
        Ok(())
    }

    /// Flat indices of the four frozen corner patches.
    pub fn frozen_set(&self) -> HashSet<usize> {
        if self.mode == Mode::Unconstrained {
            return HashSet::new();
        }
        let p = self.frozen_patch;
        let (h, w) = (self.grid.height, self.grid.width);
        let mut frozen = HashSet::new();
        for (r0, c0) in [(0, 0), (0, w - p), (h - p, 0), (h - p, w - p)] {
            for r in r0..r0 + p {
                for c in c0..c0 + p {
                    frozen.insert(r * w + c);
                }
            }
        }
        frozen
    }
}

/// Cluster membership lists for one architecture over the plan's grid.
pub fn architecture_clusters(arch: Architecture, grid: &GridSpec) -> Result<Vec<Vec<usize>>> {
    match arch {
        Architecture::Coupled => Ok(build_topology(grid)?.cluster_members),
        Architecture::SinglePlaneClustered => {
            grid.validate()?;
            let d = grid.clusters_per_plane();
            let mut clusters = Vec::with_capacity(d);
            for ci in 0..d {
                let c0 = ci * grid.stride;
                let mut members = Vec::with_capacity(grid.height * grid.window);
                for r in 0..grid.height {
                    for c in c0..c0 + grid.window {
                        members.push(r * grid.width + c);
                    }
                }
                clusters.push(members);
            }
            Ok(clusters)
        }
        Architecture::Unclustered => {
            grid.validate()?;
            Ok(vec![(0..grid.neurons()).collect()])
        }
    }
}

/// Builds the (random-mode) weight bundle for an architecture. The weight
/// draw is independent of the noise trials: it uses the reserved grid point
/// `u64::MAX` of the seed derivation.
pub fn plan_weights(plan: &ExperimentPlan) -> Result<WeightsBundle> {
    let clusters = architecture_clusters(plan.arch, &plan.grid)?;
    let seed = derive_seed(plan.base_seed, u64::MAX, 0);
    let d = match plan.arch {
        Architecture::Coupled => plan.grid.clusters_per_plane(),
        _ => clusters.len(),
    };
    let mut rng = crate::rng::SplitMix64::new(seed);
    let cluster_weights = clusters
        .iter()
        .enumerate()
        .map(|(ci, members)| {
            // m per cluster scales with the cluster size
            let m = ((plan.weights.m_ratio * members.len() as f64).round() as usize).max(1);
            crate::memory::random_cluster_weights(
                ci / d,
                ci % d,
                members,
                m,
                plan.weights.mean_row_degree,
                &mut rng,
            )
        })
        .collect();
    Ok(WeightsBundle {
        mode: crate::memory::WeightMode::Random,
        seed,
        m_per_cluster: 0, // heterogeneous; per-cluster row counts are authoritative
        mean_row_degree: plan.weights.mean_row_degree,
        clusters: cluster_weights,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PERPoint {
    pub pe: f64,
    pub trials: usize,
    pub failures: usize,
    pub per: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PERResult {
    pub arch: Architecture,
    pub mode: Mode,
    pub points: Vec<PERPoint>,
}

const WILSON_Z: f64 = 1.959963984540054;

/// Wilson 95% score interval for `failures` out of `trials`.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Runs the full plan: one fixed weight draw, then `trials` independent noise
/// trials per grid point. Failure means any neuron differs from the stored
/// pattern after recall. Trials run in parallel and reduce in (point, trial)
/// order, so results do not depend on scheduling.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PERResult> {
    plan.validate()?;
    let weights = plan_weights(plan)?;
    run_plan_with_weights(plan, &weights)
}

/// Same as [`run_plan`] but with a caller-provided weight bundle.
pub fn run_plan_with_weights(plan: &ExperimentPlan, weights: &WeightsBundle) -> Result<PERResult> {
    plan.validate()?;
    let frozen = plan.frozen_set();
    let reference = PatternState::zeros(plan.grid.neurons(), 2);
    let cfg = RecallConfig {
        phi: plan.recall.phi,
        t_max_inner: plan.recall.t_max_inner,
        t_max_outer: plan.recall.t_max_outer,
        mode: plan.mode,
        frozen: frozen.clone(),
    };
    cfg.validate()?;
    let mut points = Vec::with_capacity(plan.pe_grid.len());
    for (j, &pe) in plan.pe_grid.iter().enumerate() {
        let outcomes: Vec<bool> = (0..plan.trials)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(plan.base_seed, j as u64, i as u64);
                let noisy = inject_noise(&reference, pe, seed, &frozen)
                    .expect("pe validated");
                let (out, _) = coupled_correct(weights, &noisy, &reference, &cfg)
                    .expect("aligned dimensions");
                out.values != reference.values
            })
            .collect();
        let failures = outcomes.iter().filter(|&&f| f).count();
        let per = failures as f64 / plan.trials as f64;
        let (lo, hi) = wilson_interval(failures, plan.trials);
        points.push(PERPoint {
            pe,
            trials: plan.trials,
            failures,
            per,
            wilson_lo: lo,
            wilson_hi: hi,
        });
    }
    Ok(PERResult {
        arch: plan.arch,
        mode: plan.mode,
        points,
    })
}

/// Runs the plan across all three architectures with the same trial protocol.
/// The baseline architectures are always unconstrained.
pub fn baseline_architectures(plan: &ExperimentPlan) -> Result<Vec<PERResult>> {
    let mut out = Vec::new();
    for arch in [
        Architecture::Coupled,
        Architecture::SinglePlaneClustered,
        Architecture::Unclustered,
    ] {
        let mut p = plan.clone();
        p.arch = arch;
        if arch != Architecture::Coupled {
            p.mode = Mode::Unconstrained;
        }
        out.push(run_plan(&p)?);
    }
    Ok(out)
}

/// Indices (i, i+1) where the empirical PER decreases beyond what the 95%
/// bands allow: `wilson_lo[i] > wilson_hi[i+1]`.
pub fn nonmonotonic_violations(points: &[PERPoint]) -> Vec<(usize, usize)> {
    points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].wilson_lo > w[1].wilson_hi)
        .map(|(i, _)| (i, i + 1))
        .collect()
}

/// Deterministic CSV rendering, sorted by noise level.
pub fn per_csv(result: &PERResult) -> String {
    let mut s = String::from("pe,trials,failures,per,wilson_lo,wilson_hi\n");
    for p in &result.points {
        s.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            p.pe, p.trials, p.failures, p.per, p.wilson_lo, p.wilson_hi
        ));
    }
    s
}
