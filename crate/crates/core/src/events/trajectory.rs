use std::collections::BTreeMap;

use crate::dynamics::ResetSchedule;
use crate::events::{declare, reset, select_event, Dynamics, SystemState, Variant};
use crate::linalg::DensityOperator;
use crate::seeds::{derive_seed, path_seed, stream};
use crate::{parallel, Error, Result, Tolerances};

use rand::Rng;

/// One sampled reset history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub variant: Variant,
    pub seed: u64,
    pub reset_times: Vec<f64>,
    /// `(i_1, …, i_M)`.
    pub chosen_indices: Vec<usize>,
    /// Probability of each chosen event given the history before it.
    pub chosen_probabilities: Vec<f64>,
    pub states_after_reset: Vec<SystemState>,
    pub final_time: f64,
    pub final_state: SystemState,
}

impl Trajectory {
    /// Product of the conditional probabilities along the history.
    pub fn probability(&self) -> f64 {
        self.chosen_probabilities.iter().product()
    }
}

/// Alternately evolves and resets at each scheduled time, then evolves to
/// `final_time`.
///
/// Randomness is split into two streams derived from `seed`: the selection
/// stream supplies exactly one uniform draw per reset, in schedule order; the
/// basis stream for a reset is seeded from `(seed, history so far)` and is only
/// consumed by degenerate groups in the modified / alternative declarations.
/// [`crate::events::enumerate_branches`] uses the same per-node basis seeds, so a
/// trajectory with seed `s` always follows a branch of the tree built with
/// basis seed `s`.
pub fn run_trajectory(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    variant: Variant,
    final_time: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<Trajectory> {
    dynamics.check_compatible(variant, initial)?;
    if final_time < schedule.last_time() {
        return Err(Error::InvalidArgument(format!(
            "final time {final_time} precedes the last reset at {}",
            schedule.last_time()
        )));
    }
    let mut select = stream(seed);
    let mut state = initial.clone();
    let mut now = schedule.initial_time();
    let mut traj = Trajectory {
        variant,
        seed,
        reset_times: Vec::with_capacity(schedule.len()),
        chosen_indices: Vec::with_capacity(schedule.len()),
        chosen_probabilities: Vec::with_capacity(schedule.len()),
        states_after_reset: Vec::with_capacity(schedule.len()),
        final_time,
        final_state: initial.clone(),
    };
    for &t in schedule.times() {
        state = dynamics.evolve(&state, now, t, tol)?;
        let mut basis_rng = stream(path_seed(seed, &traj.chosen_indices));
        let events = declare(variant, &state, &mut basis_rng, tol)?;
        let u: f64 = select.random();
        let k = select_event(events.probabilities(), u);
        state = reset(&events, k)?;
        traj.reset_times.push(t);
        traj.chosen_indices.push(k);
        traj.chosen_probabilities.push(events.probabilities()[k]);
        traj.states_after_reset.push(state.clone());
        now = t;
    }
    traj.final_state = dynamics.evolve(&state, now, final_time, tol)?;
    Ok(traj)
}

/// State of one trajectory, and of the never-reset evolution, at a sample time.
#[derive(Debug, Clone)]
pub struct SeriesSample {
    pub time: f64,
    pub state: SystemState,
    pub unreset: SystemState,
    /// Number of resets applied at or before `time`.
    pub resets_applied: usize,
}

/// Follows the trajectory that [`run_trajectory`] would take with `seed` and
/// records it at each of `sample_times` (non-decreasing, not before the
/// schedule start). A sample at a reset time sees the state just after the
/// reset. The never-reset state is carried alongside.
pub fn sample_trajectory(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    variant: Variant,
    seed: u64,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<Vec<SeriesSample>> {
    dynamics.check_compatible(variant, initial)?;
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be non-decreasing".into()));
    }
    if let Some(&first) = sample_times.first() {
        if first < schedule.initial_time() {
            return Err(Error::InvalidArgument(format!(
                "sample time {first} precedes the initial time {}",
                schedule.initial_time()
            )));
        }
    }
    let mut select = stream(seed);
    let mut history = Vec::with_capacity(schedule.len());
    let mut state = initial.clone();
    let mut unreset = initial.clone();
    let mut now = schedule.initial_time();
    let mut pending = schedule.times().iter().copied().peekable();
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        while let Some(tr) = pending.next_if(|&tr| tr <= ts) {
            state = dynamics.evolve(&state, now, tr, tol)?;
            unreset = dynamics.evolve(&unreset, now, tr, tol)?;
            let mut basis_rng = stream(path_seed(seed, &history));
            let events = declare(variant, &state, &mut basis_rng, tol)?;
            let u: f64 = select.random();
            let k = select_event(events.probabilities(), u);
            state = reset(&events, k)?;
            history.push(k);
            now = tr;
        }
        state = dynamics.evolve(&state, now, ts, tol)?;
        unreset = dynamics.evolve(&unreset, now, ts, tol)?;
        now = ts;
        out.push(SeriesSample {
            time: ts,
            state: state.clone(),
            unreset: unreset.clone(),
            resets_applied: history.len(),
        });
    }
    Ok(out)
}

/// Independent trajectories; trajectory `i` uses seed `derive_seed(master_seed, i)`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub master_seed: u64,
    pub trajectories: Vec<Trajectory>,
}

pub fn run_ensemble(
    initial: &SystemState,
    dynamics: &Dynamics,
    schedule: &ResetSchedule,
    variant: Variant,
    final_time: f64,
    master_seed: u64,
    samples: usize,
    tol: &Tolerances,
) -> Result<Ensemble> {
    dynamics.check_compatible(variant, initial)?;
    let trajectories = parallel::try_map_indices(samples, |i| {
        run_trajectory(
            initial,
            dynamics,
            schedule,
            variant,
            final_time,
            derive_seed(master_seed, i as u64),
            tol,
        )
    })?;
    Ok(Ensemble {
        master_seed,
        trajectories,
    })
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Counts of every index prefix of length `depth`.
    pub fn prefix_counts(&self, depth: usize) -> BTreeMap<Vec<usize>, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.trajectories {
            if t.chosen_indices.len() >= depth {
                *counts.entry(t.chosen_indices[..depth].to_vec()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Average of the final matter-side density operators.
    pub fn mean_final_state(&self) -> Result<DensityOperator> {
        let states: Vec<DensityOperator> =
            parallel::try_map_slice(&self.trajectories, |t| t.final_state.matter_density())?;
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty ensemble has no mean state".into()))?;
        let w = 1.0 / states.len() as f64;
        Ok(DensityOperator::mixture(first.dim(), states.iter().map(|s| (w, s))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{master_evolve, MasterGenerator};
    use crate::linalg::{max_entry_distance, HermitianOperator};
    use crate::seeds::stream;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn empty_schedule_is_plain_evolution() {
        let mut rng = stream(1);
        let rho = DensityOperator::random(3, 3, &mut rng);
        let gen = MasterGenerator::dephasing(
            HermitianOperator::random_unit(3, &mut rng),
            HermitianOperator::diagonal(&[0., 1., 2.]).matrix().clone(),
            0.5,
        )
        .unwrap();
        let dyn_ = Dynamics::master(gen.clone(), 1e-3).unwrap();
        let t = run_trajectory(
            &SystemState::Mixed(rho.clone()),
            &dyn_,
            &ResetSchedule::empty(0.0),
            Variant::Plain,
            0.7,
            9,
            &tol(),
        )
        .unwrap();
        assert!(t.chosen_indices.is_empty());
        let direct = master_evolve(&rho, &gen, 0.0, 0.7, 1e-3, &tol()).unwrap();
        assert_eq!(t.final_state, SystemState::Mixed(direct));
    }

    #[test]
    fn degenerate_reset_under_zero_generator() {
        let half = DensityOperator::maximally_mixed(2).unwrap();
        let dyn_ = Dynamics::master(MasterGenerator::zero(2), 1e-3).unwrap();
        let sched = ResetSchedule::new(0.0, vec![0.5]).unwrap();
        for seed in 0..20 {
            let t = run_trajectory(
                &SystemState::Mixed(half.clone()),
                &dyn_,
                &sched,
                Variant::Plain,
                0.5,
                seed,
                &tol(),
            )
            .unwrap();
            assert_eq!(t.chosen_indices, vec![0]);
            assert_eq!(t.chosen_probabilities, vec![1.0]);
            let after = t.states_after_reset[0].as_mixed().unwrap();
            assert!(max_entry_distance(after.matrix(), half.matrix()) < 1e-12);
        }
    }

    #[test]
    fn reproducible_from_seed() {
        let rho = DensityOperator::random(3, 3, &mut stream(4));
        let dyn_ = Dynamics::master(MasterGenerator::zero(3), 1e-3).unwrap();
        let sched = ResetSchedule::new(0.0, vec![0.1, 0.2, 0.3]).unwrap();
        let run = |seed| {
            run_trajectory(
                &SystemState::Mixed(rho.clone()),
                &dyn_,
                &sched,
                Variant::Modified,
                0.3,
                seed,
                &tol(),
            )
            .unwrap()
        };
        let a = run(77);
        let b = run(77);
        assert_eq!(a.chosen_indices, b.chosen_indices);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn rejects_bad_combinations() {
        let half = DensityOperator::maximally_mixed(2).unwrap();
        let dyn_ = Dynamics::master(MasterGenerator::zero(2), 1e-3).unwrap();
        let sched = ResetSchedule::new(0.0, vec![0.5]).unwrap();
        assert!(matches!(
            run_trajectory(
                &SystemState::Mixed(half.clone()),
                &dyn_,
                &sched,
                Variant::Alternative,
                1.0,
                0,
                &tol()
            ),
            Err(Error::VariantMismatch(_))
        ));
        assert!(run_trajectory(&SystemState::Mixed(half), &dyn_, &sched, Variant::Plain, 0.2, 0, &tol()).is_err());
    }

    #[test]
    fn ensemble_is_deterministic_and_counts_prefixes() {
        let rho = DensityOperator::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let dyn_ = Dynamics::master(MasterGenerator::zero(3), 1e-3).unwrap();
        let sched = ResetSchedule::new(0.0, vec![1.0]).unwrap();
        let run = || {
            run_ensemble(
                &SystemState::Mixed(rho.clone()),
                &dyn_,
                &sched,
                Variant::Plain,
                1.0,
                5,
                2000,
                &tol(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        let ia: Vec<_> = a.trajectories.iter().map(|t| t.chosen_indices.clone()).collect();
        let ib: Vec<_> = b.trajectories.iter().map(|t| t.chosen_indices.clone()).collect();
        assert_eq!(ia, ib);
        let counts = a.prefix_counts(1);
        assert_eq!(counts.values().sum::<usize>(), 2000);
        assert_eq!(counts.len(), 3);
        let mean = a.mean_final_state().unwrap();
        assert!((mean.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_trajectory_follows_run_trajectory() {
        let rho = DensityOperator::random(3, 3, &mut stream(8));
        let gen = MasterGenerator::dephasing(
            HermitianOperator::random_unit(3, &mut stream(9)),
            HermitianOperator::diagonal(&[0., 1., 2.]).matrix().clone(),
            0.3,
        )
        .unwrap();
        let dyn_ = Dynamics::master(gen, 1e-3).unwrap();
        let sched = ResetSchedule::new(0.0, vec![0.2, 0.4]).unwrap();
        let initial = SystemState::Mixed(rho);
        let traj = run_trajectory(&initial, &dyn_, &sched, Variant::Plain, 0.4, 21, &tol()).unwrap();
        let samples = sample_trajectory(
            &initial,
            &dyn_,
            &sched,
            Variant::Plain,
            21,
            &[0.0, 0.1, 0.2, 0.4],
            &tol(),
        )
        .unwrap();
        assert_eq!(samples[0].resets_applied, 0);
        assert_eq!(samples[2].resets_applied, 1);
        assert_eq!(samples[3].resets_applied, 2);
        let a = samples[3].state.as_mixed().unwrap();
        let b = traj.final_state.as_mixed().unwrap();
        assert!(max_entry_distance(a.matrix(), b.matrix()) < 1e-12);
        assert!(sample_trajectory(&initial, &dyn_, &sched, Variant::Plain, 21, &[0.3, 0.1], &tol()).is_err());
    }
}
