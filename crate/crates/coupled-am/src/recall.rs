//! Message-passing recall: intra-cluster forward/backward correction and the
//! sequential coupled sweep with commit-on-satisfied / revert-otherwise.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::de::Mode;
use crate::error::{Error, Result};
use crate::memory::{ClusterWeights, PatternState, WeightsBundle};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecallConfig {
    /// Vote threshold: a neuron moves only when |g_j| exceeds phi.
    pub phi: f64,
    pub t_max_inner: usize,
    pub t_max_outer: usize,
    pub mode: Mode,
    /// Flat indices held at known-correct values (side information).
    pub frozen: HashSet<usize>,
}

impl RecallConfig {
    pub fn unconstrained(phi: f64, t_max_inner: usize, t_max_outer: usize) -> Self {
        Self {
            phi,
            t_max_inner,
            t_max_outer,
            mode: Mode::Unconstrained,
            frozen: HashSet::new(),
        }
    }

    pub fn constrained(
        phi: f64,
        t_max_inner: usize,
        t_max_outer: usize,
        frozen: HashSet<usize>,
    ) -> Self {
        Self {
            phi,
            t_max_inner,
            t_max_outer,
            mode: Mode::Constrained,
            frozen,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(Error::Config {
                field: "phi",
                message: format!("phi = {} must lie in (0, 1]", self.phi),
            });
        }
        if self.t_max_inner == 0 || self.t_max_outer == 0 {
            return Err(Error::Config {
                field: "t_max",
                message: "iteration budgets must be positive".into(),
            });
        }
        match self.mode {
            Mode::Constrained if self.frozen.is_empty() => Err(Error::Config {
                field: "frozen",
                message: "constrained mode requires a nonempty frozen set".into(),
            }),
            Mode::Unconstrained if !self.frozen.is_empty() => Err(Error::Config {
                field: "frozen",
                message: "unconstrained mode must not freeze neurons".into(),
            }),
            _ => Ok(()),
        }
    }
}

impl Default for RecallConfig {
    fn default() -> Self {
        Self::unconstrained(0.999, 10, 10)
    }
}

/// Intra-cluster error correction on the cluster-local state.
///
/// Each round: constraint sums `h_i = sum_j W_ij x_j`, direction votes
/// `y_i = sign-indicator of -h_i`, normalized neuron feedback
/// `g_j = sum_i W_ij y_i / sum_i |W_ij|`, and the move `x_j += sgn(g_j)`
/// wherever `|g_j| > phi` and `j` is not frozen. Exits early once every
/// constraint is satisfied; returns whether they are satisfied at exit.
pub fn cluster_correct(
    weights: &ClusterWeights,
    state: &mut [i32],
    frozen_local: &[bool],
    phi: f64,
    t_max_inner: usize,
) -> bool {
    let n = weights.n_neurons();
    debug_assert_eq!(state.len(), n);
    let col_abs = {
        let mut c = vec![0.0f64; n];
        for row in &weights.rows {
            for (&i, &w) in row.idx.iter().zip(&row.w) {
                c[i as usize] += w.abs();
            }
        }
        c
    };

    let mut votes = vec![0.0f64; n];
    for round in 0..=t_max_inner {
        // Forward: weighted sums and the satisfaction test. The tolerance is
        // relative to the row's absolute activity so that float-valued
        // null-space weights are judged fairly.
        let mut satisfied = true;
        votes.iter_mut().for_each(|v| *v = 0.0);
        for row in &weights.rows {
            let mut h = 0.0;
            let mut act = 0.0;
            for (&i, &w) in row.idx.iter().zip(&row.w) {
                let x = f64::from(state[i as usize]);
                h += w * x;
                act += (w * x).abs();
            }
            if h.abs() > 1e-9 * (1.0 + act) {
                satisfied = false;
                let y = if h < 0.0 { 1.0 } else { -1.0 };
                for (&i, &w) in row.idx.iter().zip(&row.w) {
                    votes[i as usize] += w * y;
                }
            }
            // h == 0 contributes y = 0: no votes.
        }
        if satisfied {
            return true;
        }
        if round == t_max_inner {
            return false;
        }
        // Backward + update, synchronous across the cluster.
        let mut moved = false;
        for j in 0..n {
            if frozen_local[j] || col_abs[j] == 0.0 {
                continue;
            }
            let g = votes[j] / col_abs[j];
            if g.abs() > phi {
                state[j] += if g > 0.0 { 1 } else { -1 };
                moved = true;
            }
        }
        if !moved {
            // Static state cannot become satisfied in later rounds.
            return false;
        }
    }
    false
}

/// One record per cluster visit of the coupled sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub sweep: usize,
    pub plane: usize,
    pub cluster: usize,
    pub committed: bool,
    pub residual_errors: usize,
}

/// Sequential coupled correction: sweeps clusters in (sweep, plane, cluster)
/// order, runs [`cluster_correct`] on a snapshot, and commits the result only
/// when every constraint in the cluster is satisfied — otherwise the pattern
/// nodes revert to their pre-visit values. Stops early when a full sweep
/// changes nothing.
pub fn coupled_correct(
    weights: &WeightsBundle,
    noisy: &PatternState,
    reference: &PatternState,
    cfg: &RecallConfig,
) -> Result<(PatternState, Vec<VisitRecord>)> {
    cfg.validate()?;
    if noisy.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "noisy vs reference pattern",
            expected: reference.len(),
            got: noisy.len(),
        });
    }
    let n = noisy.len();
    let mut frozen_flat = vec![false; n];
    for &j in &cfg.frozen {
        if j >= n {
            return Err(Error::Config {
                field: "frozen",
                message: format!("frozen index {j} out of range for {n} neurons"),
            });
        }
        frozen_flat[j] = true;
    }

    let mut state = noisy.values.clone();
    let mut residual = count_diff(&state, &reference.values);
    let mut trace = Vec::new();
    for sweep in 1..=cfg.t_max_outer {
        let mut changed_any = false;
        for cw in &weights.clusters {
            let mut sub: Vec<i32> = cw.neuron_map.iter().map(|&j| state[j]).collect();
            let frozen_local: Vec<bool> = cw.neuron_map.iter().map(|&j| frozen_flat[j]).collect();
            let before = sub.clone();
            let satisfied =
                cluster_correct(cw, &mut sub, &frozen_local, cfg.phi, cfg.t_max_inner);
            let changed = sub != before;
            let committed = satisfied && changed;
            if committed {
                for (local, &flat) in cw.neuron_map.iter().enumerate() {
                    debug_assert!(
                        !frozen_flat[flat] || sub[local] == state[flat],
                        "frozen neuron moved"
                    );
                    // incremental residual update against the reference
                    let rv = reference.values[flat];
                    if state[flat] != rv && sub[local] == rv {
                        residual -= 1;
                    } else if state[flat] == rv && sub[local] != rv {
                        residual += 1;
                    }
                    state[flat] = sub[local];
                }
                changed_any = true;
            }
            trace.push(VisitRecord {
                sweep,
                plane: cw.plane,
                cluster: cw.cluster,
                committed,
                residual_errors: residual,
            });
        }
        if !changed_any {
            break;
        }
    }
    Ok((
        PatternState {
            values: state,
            alphabet: noisy.alphabet,
        },
        trace,
    ))
}

fn count_diff(a: &[i32], b: &[i32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Independent +1/-1 perturbations with probability `p_e/2` each; frozen
/// indices are exempt. A draw is consumed for every entry so the noise at
/// unfrozen neurons does not depend on the frozen set.
pub fn inject_noise(
    pattern: &PatternState,
    p_e: f64,
    seed: u64,
    frozen: &HashSet<usize>,
) -> Result<PatternState> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::domain("p_e", p_e, 0.0, 1.0));
    }
    let mut rng = SplitMix64::new(seed);
    let mut values = pattern.values.clone();
    for (j, v) in values.iter_mut().enumerate() {
        let u = rng.next_f64();
        if frozen.contains(&j) {
            continue;
        }
        if u < p_e / 2.0 {
            *v += 1;
        } else if u < p_e {
            *v -= 1;
        }
    }
    Ok(PatternState {
        values,
        alphabet: pattern.alphabet,
    })
}
