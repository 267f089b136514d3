use serde::Serialize;

use crate::decomposition::von_neumann_entropy;
use crate::dynamics::ResetSchedule;
use crate::events::{declare, reset, Dynamics, SystemState, Variant};
use crate::linalg::{trace_distance, DensityOperator};
use crate::seeds::{path_seed, stream};
use crate::{parallel, Error, Result, Tolerances};

#[derive(Debug, Clone)]
pub struct Branch {
    /// `(i_1, …, i_M)`.
    pub indices: Vec<usize>,
    /// `λ_{i_1} λ_{i_1 i_2} ⋯ λ_{i_1 … i_M}`.
    pub probability: f64,
    /// State right after the last reset (the initial state at depth 0).
    pub terminal_state: SystemState,
}

/// Exhaustive tree of reset histories.
#[derive(Debug, Clone)]
pub struct BranchTree {
    pub variant: Variant,
    pub depth: usize,
    pub initial_time: f64,
    pub reset_times: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Total probability of dropped branches.
    pub pruned_mass: f64,
    pub pruned_count: usize,
}

impl BranchTree {
    /// Time at which the terminal states are given.
    pub fn terminal_time(&self) -> f64 {
        self.reset_times.last().copied().unwrap_or(self.initial_time)
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Sum of branch probabilities grouped by index prefix of length `depth`.
    pub fn prefix_probabilities(&self, depth: usize) -> std::collections::BTreeMap<Vec<usize>, f64> {
        let mut out = std::collections::BTreeMap::new();
        for b in &self.branches {
            *out.entry(b.indices[..depth.min(b.indices.len())].to_vec())
                .or_insert(0.0) += b.probability;
        }
        out
    }
}

struct Node {
    indices: Vec<usize>,
    probability: f64,
    state: SystemState,
}

/// Enumerates every reset history level by level.
///
/// Each frontier node is evolved to the next reset time, its events declared
/// (basis stream seeded from `(basis_seed, history)`), and one child is
/// created per event. Children whose running probability falls below
/// `prune_eps` are dropped and their mass tallied. Levels are expanded in
/// parallel but children keep their parent-then-event order.
///
/// Fails with [`Error::CapExceeded`] as soon as a level would hold more than
/// `tol.branch_cap` children.
pub fn enumerate_branches(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    variant: Variant,
    basis_seed: u64,
    prune_eps: f64,
    tol: &Tolerances,
) -> Result<BranchTree> {
    dynamics.check_compatible(variant, initial)?;
    if !(prune_eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prune_eps must be ≥ 0, got {prune_eps}"
        )));
    }
    let mut frontier = vec![Node {
        indices: Vec::new(),
        probability: 1.0,
        state: initial.clone(),
    }];
    let mut pruned_mass = 0.0;
    let mut pruned_count = 0;
    let mut now = schedule.initial_time();

    for &t in schedule.times() {
        let declared = parallel::try_map_slice(&frontier, |node| {
            let state = dynamics.evolve(&node.state, now, t, tol)?;
            let mut rng = stream(path_seed(basis_seed, &node.indices));
            declare(variant, &state, &mut rng, tol)
        })?;
        let count: usize = declared.iter().map(|e| e.len()).sum();
        if count > tol.branch_cap {
            return Err(Error::CapExceeded {
                count,
                cap: tol.branch_cap,
            });
        }
        let children: Vec<Vec<Option<Node>>> = parallel::try_map_indices(frontier.len(), |n| {
            let node = &frontier[n];
            let events = &declared[n];
            (0..events.len())
                .map(|k| {
                    let probability = node.probability * events.probabilities()[k];
                    if probability < prune_eps {
                        return Ok(None);
                    }
                    let mut indices = node.indices.clone();
                    indices.push(k);
                    Ok(Some(Node {
                        indices,
                        probability,
                        state: reset(events, k)?,
                    }))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut next = Vec::with_capacity(count);
        for (n, kids) in children.into_iter().enumerate() {
            for (k, kid) in kids.into_iter().enumerate() {
                match kid {
                    Some(node) => next.push(node),
                    None => {
                        pruned_mass += frontier[n].probability * declared[n].probabilities()[k];
                        pruned_count += 1;
                    }
                }
            }
        }
        frontier = next;
        now = t;
    }

    Ok(BranchTree {
        variant,
        depth: schedule.len(),
        initial_time: schedule.initial_time(),
        reset_times: schedule.times().to_vec(),
        branches: frontier
            .into_iter()
            .map(|n| Branch {
                indices: n.indices,
                probability: n.probability,
                terminal_state: n.state,
            })
            .collect(),
        pruned_mass,
        pruned_count,
    })
}

/// Probability-weighted mixture of every branch evolved to `t`, on the matter
/// side. Alternative branches are evolved unitarily on the total space and
/// then partial-traced. Weights are divided by the retained probability, so a
/// pruned tree still yields a unit-trace operator.
pub fn statistical_operator(
    tree: &BranchTree,
    dynamics: &Dynamics,
    t: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    let t0 = tree.terminal_time();
    if t < t0 {
        return Err(Error::InvalidArgument(format!(
            "statistical operator requested at {t}, before the last reset at {t0}"
        )));
    }
    let kept = tree.total_probability();
    if tree.branches.is_empty() || !(kept > 0.0) {
        return Err(Error::InvalidArgument("branch tree is empty".into()));
    }
    let evolved = parallel::try_map_slice(&tree.branches, |b| {
        dynamics.evolve(&b.terminal_state, t0, t, tol)?.matter_density()
    })?;
    let dim = evolved[0].dim();
    Ok(DensityOperator::mixture(
        dim,
        tree.branches
            .iter()
            .zip(&evolved)
            .map(|(b, rho)| (b.probability / kept, rho)),
    ))
}

/// Matter-side state at `t` with resets switched off.
pub fn unreset_state(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    t: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    dynamics
        .evolve(initial, schedule.initial_time(), t, tol)?
        .matter_density()
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub variant: Variant,
    pub time: f64,
    pub trace_distance: f64,
    pub entropy_statistical: f64,
    pub entropy_unreset: f64,
    /// `entropy_statistical − entropy_unreset`.
    pub entropy_difference: f64,
    pub branch_count: usize,
    pub pruned_mass: f64,
}

/// Builds the branch tree, its statistical operator at `t` and the never-reset
/// state at `t`, and reports their distance and entropies.
pub fn compare_statistical_vs_unreset(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    variant: Variant,
    t: f64,
    basis_seed: u64,
    prune_eps: f64,
    tol: &Tolerances,
) -> Result<(BranchTree, DensityOperator, ComparisonReport)> {
    let tree = enumerate_branches(initial, dynamics, schedule, variant, basis_seed, prune_eps, tol)?;
    let stat = statistical_operator(&tree, dynamics, t, tol)?;
    let unreset = unreset_state(initial, dynamics, schedule, t, tol)?;
    let entropy_statistical = von_neumann_entropy(&stat, tol)?;
    let entropy_unreset = von_neumann_entropy(&unreset, tol)?;
    let report = ComparisonReport {
        variant,
        time: t,
        trace_distance: trace_distance(&stat, &unreset)?,
        entropy_statistical,
        entropy_unreset,
        entropy_difference: entropy_statistical - entropy_unreset,
        branch_count: tree.branches.len(),
        pruned_mass: tree.pruned_mass,
    };
    Ok((tree, stat, report))
}
