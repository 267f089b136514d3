//! Subcommand implementations. Each returns the rendered primary output.

use std::collections::BTreeMap;

use mgent_core::decomposition::von_neumann_entropy;
use mgent_core::dynamics::Propagator;
use mgent_core::events::{
    compare_statistical_vs_unreset, declare, enumerate_branches, run_ensemble, run_trajectory, sample_trajectory,
    statistical_operator, ComparisonReport, Event, SystemState, Variant,
};
use mgent_core::linalg::{partial_trace, trace_distance, PureState, Side};
use mgent_core::scenarios::{
    entanglement_growth_curve, parity, swap, symmetry_demo, PartitionBoxModel, SymmetryReport,
};
use mgent_core::seeds::{derive_seed, stream};
use mgent_core::{CVector, Tolerances};
use serde::Serialize;

use crate::config::{Format, HamiltonianConfig, RunConfig, ScenarioConfig};
use crate::error::CliError;
use crate::output::{json, matrix_pairs, series_csv, SeriesRecord};

type CliResult<T> = Result<T, CliError>;

fn core<T>(what: &str, r: mgent_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_core(what, e))
}

fn only_json(command: &str, format: Format) -> CliResult<()> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Config(format!(
            "output.format: csv is not available for `{command}`, use json"
        ))),
    }
}

/// Matter entropy, gravity entropy (pure global states only) and matter purity.
fn entropies(state: &SystemState, tol: &Tolerances) -> CliResult<(f64, Option<f64>, f64)> {
    let rho = core("partial trace", state.matter_density())?;
    let s_matter = core("entropy", von_neumann_entropy(&rho, tol))?;
    let s_gravity = match state {
        SystemState::Pure(psi) => {
            let sigma = core("partial trace", partial_trace(psi, psi.space(), Side::Gravity))?;
            Some(core("entropy", von_neumann_entropy(&sigma, tol))?)
        }
        SystemState::Mixed(_) => None,
    };
    Ok((s_matter, s_gravity, rho.purity()))
}

/// Variant used by `evolve`: the configured one, else alternative when a
/// total Hamiltonian is given and plain otherwise.
fn evolve_variant(cfg: &RunConfig) -> Variant {
    match (&cfg.events, &cfg.hamiltonian) {
        (Some(e), _) => e.variant,
        (None, Some(_)) => Variant::Alternative,
        (None, None) => Variant::Plain,
    }
}

pub fn evolve(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let tol = cfg.tolerances();
    let variant = evolve_variant(cfg);
    let (initial, dynamics) = cfg.system(variant)?;
    let schedule = cfg.schedule()?;
    let times = cfg.series_times()?;
    let seed = if schedule.is_empty() {
        cfg.seed.unwrap_or(0)
    } else {
        cfg.require_seed("scheduled resets")?
    };
    let samples = core(
        "evolve",
        sample_trajectory(&initial, &dynamics, &schedule, variant, seed, &times, &tol),
    )?;
    let rows = samples
        .iter()
        .map(|s| {
            let (s_matter, s_gravity, purity) = entropies(&s.state, &tol)?;
            let distance = if schedule.is_empty() {
                None
            } else {
                let a = core("partial trace", s.state.matter_density())?;
                let b = core("partial trace", s.unreset.matter_density())?;
                Some(core("trace distance", trace_distance(&a, &b))?)
            };
            Ok(SeriesRecord {
                t: s.time,
                s_matter,
                s_gravity,
                purity,
                trace_distance_to_unreset: distance,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(match format {
        Format::Csv => series_csv(&rows),
        Format::Json => json(&rows),
    })
}

#[derive(Debug, Serialize)]
struct EventRecord {
    index: usize,
    probability: f64,
    multiplicity: usize,
    /// Eigenvalue of the declaring density operator (plain / modified).
    eigenvalue: Option<f64>,
    /// Schmidt coefficient (alternative).
    schmidt_coefficient: Option<f64>,
    /// Matter-side projector of the event.
    matrix: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Serialize)]
struct EventsDump {
    variant: Variant,
    time: f64,
    seed: Option<u64>,
    count: usize,
    probability_sum: f64,
    events: Vec<EventRecord>,
}

pub fn events(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let tol = cfg.tolerances();
    let variant = cfg.variant()?;
    let (initial, dynamics) = cfg.system(variant)?;
    let schedule = cfg.schedule()?;
    let ev_cfg = cfg.events.as_ref().expect("variant() checked the section");
    let t0 = schedule.initial_time();
    let time = ev_cfg.time.unwrap_or(t0);
    if time < t0 {
        return Err(CliError::Config(format!(
            "events.time: {time} precedes schedule.initial_time {t0}"
        )));
    }
    let seed = match variant {
        Variant::Plain => cfg.seed,
        _ => Some(cfg.require_seed("modified / alternative declarations")?),
    };
    let state = core("evolve", dynamics.evolve(&initial, t0, time, &tol))?;
    let set = core(
        "declare",
        declare(variant, &state, &mut stream(seed.unwrap_or(0)), &tol),
    )?;
    let records: Vec<EventRecord> = set
        .events()
        .iter()
        .zip(set.probabilities())
        .enumerate()
        .map(|(index, (ev, &probability))| {
            let (eigenvalue, schmidt_coefficient) = match ev {
                Event::Projector { eigenvalue, .. } | Event::Ray { eigenvalue, .. } => (Some(*eigenvalue), None),
                Event::Product { coefficient, .. } => (None, Some(*coefficient)),
            };
            EventRecord {
                index,
                probability,
                multiplicity: ev.multiplicity(),
                eigenvalue,
                schmidt_coefficient,
                matrix: ev_cfg.include_matrices.then(|| matrix_pairs(&ev.matter_projector())),
            }
        })
        .collect();
    let dump = EventsDump {
        variant,
        time,
        seed,
        count: records.len(),
        probability_sum: set.probabilities().iter().sum(),
        events: records,
    };
    Ok(match format {
        Format::Json => json(&dump),
        Format::Csv => {
            let mut out = String::from("index,probability,multiplicity\n");
            for r in &dump.events {
                out.push_str(&format!(
                    "{},{},{}\n",
                    r.index,
                    crate::output::fmt_f64(r.probability),
                    r.multiplicity
                ));
            }
            out
        }
    })
}

#[derive(Debug, Serialize)]
struct ResetRecord {
    time: f64,
    index: usize,
    probability: f64,
    #[serde(rename = "S_matter")]
    s_matter: f64,
    purity: f64,
}

#[derive(Debug, Serialize)]
struct StateSummary {
    #[serde(rename = "S_matter")]
    s_matter: f64,
    #[serde(rename = "S_gravity")]
    s_gravity: Option<f64>,
    purity: f64,
}

#[derive(Debug, Serialize)]
struct TrajectoryLog {
    variant: Variant,
    seed: u64,
    final_time: f64,
    probability: f64,
    resets: Vec<ResetRecord>,
    final_state: StateSummary,
}

pub fn trajectory(cfg: &RunConfig, format: Format) -> CliResult<String> {
    only_json("trajectory", format)?;
    let tol = cfg.tolerances();
    let variant = cfg.variant()?;
    let (initial, dynamics) = cfg.system(variant)?;
    let schedule = cfg.schedule()?;
    let seed = cfg.require_seed("trajectory")?;
    let traj = core(
        "trajectory",
        run_trajectory(&initial, &dynamics, &schedule, variant, cfg.final_time()?, seed, &tol),
    )?;
    let resets = traj
        .reset_times
        .iter()
        .zip(&traj.chosen_indices)
        .zip(&traj.chosen_probabilities)
        .zip(&traj.states_after_reset)
        .map(|(((&time, &index), &probability), state)| {
            let (s_matter, _, purity) = entropies(state, &tol)?;
            Ok(ResetRecord {
                time,
                index,
                probability,
                s_matter,
                purity,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (s_matter, s_gravity, purity) = entropies(&traj.final_state, &tol)?;
    Ok(json(&TrajectoryLog {
        variant,
        seed,
        final_time: traj.final_time,
        probability: traj.probability(),
        resets,
        final_state: StateSummary {
            s_matter,
            s_gravity,
            purity,
        },
    }))
}

#[derive(Debug, Serialize)]
struct FrequencyRecord {
    prefix: Vec<usize>,
    count: usize,
    frequency: f64,
    /// Product of declared probabilities along the prefix, from the branch tree.
    declared_probability: f64,
    /// Binomial standard error `sqrt(p (1 − p) / N)`.
    sigma: f64,
    within_3_sigma: bool,
}

#[derive(Debug, Serialize)]
struct TrajectorySummary {
    index: usize,
    seed: u64,
    chosen_indices: Vec<usize>,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct EnsembleSummary {
    variant: Variant,
    master_seed: u64,
    samples: usize,
    final_time: f64,
    /// Basis seed of the reference branch tree.
    tree_basis_seed: u64,
    frequencies: Vec<FrequencyRecord>,
    /// Trace distance between the ensemble-averaged final state and the
    /// statistical operator at the final time.
    mean_state_distance_to_statistical: f64,
    trajectories: Vec<TrajectorySummary>,
}

pub fn ensemble(cfg: &RunConfig, format: Format, samples: Option<usize>) -> CliResult<String> {
    only_json("ensemble", format)?;
    let tol = cfg.tolerances();
    let variant = cfg.variant()?;
    let (initial, dynamics) = cfg.system(variant)?;
    let schedule = cfg.schedule()?;
    let master_seed = cfg.require_seed("ensemble")?;
    let samples = samples.unwrap_or(cfg.ensemble.samples);
    if samples == 0 {
        return Err(CliError::Config("ensemble.samples: must be positive".into()));
    }
    let final_time = cfg.final_time()?;
    let ens = core(
        "ensemble",
        run_ensemble(
            &initial,
            &dynamics,
            &schedule,
            variant,
            final_time,
            master_seed,
            samples,
            &tol,
        ),
    )?;
    let tree = core(
        "branches",
        enumerate_branches(
            &initial,
            &dynamics,
            &schedule,
            variant,
            master_seed,
            cfg.branches.prune_eps,
            &tol,
        ),
    )?;
    let stat = core(
        "statistical operator",
        statistical_operator(&tree, &dynamics, final_time, &tol),
    )?;
    let mean = core("mean state", ens.mean_final_state())?;
    let distance = core("trace distance", trace_distance(&mean, &stat))?;

    let n = samples as f64;
    let mut frequencies = Vec::new();
    for depth in 1..=cfg.ensemble.frequency_depth.min(schedule.len()) {
        let declared = tree.prefix_probabilities(depth);
        let counts = ens.prefix_counts(depth);
        let mut prefixes: BTreeMap<Vec<usize>, ()> = declared.keys().map(|k| (k.clone(), ())).collect();
        prefixes.extend(counts.keys().map(|k| (k.clone(), ())));
        for prefix in prefixes.into_keys() {
            let p = declared.get(&prefix).copied().unwrap_or(0.0);
            let count = counts.get(&prefix).copied().unwrap_or(0);
            let frequency = count as f64 / n;
            let sigma = (p * (1.0 - p) / n).max(0.0).sqrt();
            frequencies.push(FrequencyRecord {
                within_3_sigma: (frequency - p).abs() <= 3.0 * sigma + 1e-12,
                prefix,
                count,
                frequency,
                declared_probability: p,
                sigma,
            });
        }
    }
    let trajectories = ens
        .trajectories
        .iter()
        .enumerate()
        .map(|(index, t)| TrajectorySummary {
            index,
            seed: t.seed,
            chosen_indices: t.chosen_indices.clone(),
            probability: t.probability(),
        })
        .collect();
    Ok(json(&EnsembleSummary {
        variant,
        master_seed,
        samples,
        final_time,
        tree_basis_seed: master_seed,
        frequencies,
        mean_state_distance_to_statistical: distance,
        trajectories,
    }))
}

#[derive(Debug, Serialize)]
struct BranchRecord {
    indices: Vec<usize>,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct BranchesDump {
    variant: Variant,
    depth: usize,
    initial_time: f64,
    reset_times: Vec<f64>,
    time: f64,
    basis_seed: u64,
    branch_count: usize,
    probability_sum: f64,
    pruned_mass: f64,
    pruned_count: usize,
    branches: Vec<BranchRecord>,
    statistical_operator: Vec<Vec<[f64; 2]>>,
    report: ComparisonReport,
}

pub fn branches(cfg: &RunConfig, format: Format) -> CliResult<String> {
    only_json("branches", format)?;
    let tol = cfg.tolerances();
    let variant = cfg.variant()?;
    let (initial, dynamics) = cfg.system(variant)?;
    let schedule = cfg.schedule()?;
    let basis_seed = match variant {
        Variant::Plain => cfg.seed.unwrap_or(0),
        _ => cfg.require_seed("modified / alternative branch trees")?,
    };
    let time = match cfg.branches.time {
        Some(t) => t,
        None => cfg.final_time()?,
    };
    let (tree, stat, report) = core(
        "branches",
        compare_statistical_vs_unreset(
            &initial,
            &dynamics,
            &schedule,
            variant,
            time,
            basis_seed,
            cfg.branches.prune_eps,
            &tol,
        ),
    )?;
    Ok(json(&BranchesDump {
        variant,
        depth: tree.depth,
        initial_time: tree.initial_time,
        reset_times: tree.reset_times.clone(),
        time,
        basis_seed,
        branch_count: tree.branches.len(),
        probability_sum: tree.total_probability() + tree.pruned_mass,
        pruned_mass: tree.pruned_mass,
        pruned_count: tree.pruned_count,
        branches: tree
            .branches
            .iter()
            .map(|b| BranchRecord {
                indices: b.indices.clone(),
                probability: b.probability,
            })
            .collect(),
        statistical_operator: matrix_pairs(stat.matrix()),
        report,
    }))
}

#[derive(Debug, Serialize)]
struct PartitionRecord {
    /// `None` for the symmetric superposition.
    seed: Option<u64>,
    left_probability: f64,
    entropy_after: f64,
    /// `−p ln p − (1 − p) ln(1 − p)` with `p` the left probability.
    binary_entropy: f64,
}

#[derive(Debug, Serialize)]
struct PartitionDump {
    n_sites: usize,
    ln_2: f64,
    records: Vec<PartitionRecord>,
}

#[derive(Debug, Serialize)]
struct SymmetryDump {
    variant: Variant,
    symmetry: String,
    seeds: Vec<u64>,
    max_event_norm: f64,
    max_reset_norm: f64,
    reports: Vec<SymmetryReport>,
}

fn binary_entropy(p: f64) -> f64 {
    mgent_core::decomposition::shannon_entropy(&[p, 1.0 - p], 0.0)
}

pub fn scenario(cfg: &RunConfig, format: Format) -> CliResult<String> {
    let tol = cfg.tolerances();
    let sc = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario: missing [scenario] section".into()))?;
    match sc {
        ScenarioConfig::PartitionBox { n_sites, random_states } => {
            only_json("scenario partition_box", format)?;
            let model = PartitionBoxModel::new(*n_sites).map_err(|e| CliError::from_core("scenario.n_sites", e))?;
            let mut vectors: Vec<(Option<u64>, CVector)> = vec![(None, model.symmetric_superposition())];
            if *random_states > 0 {
                let seed = cfg.require_seed("scenario.random_states")?;
                for i in 0..*random_states as u64 {
                    let s = derive_seed(seed, i);
                    vectors.push((
                        Some(s),
                        mgent_core::linalg::random_complex_vector(*n_sites, &mut stream(s)),
                    ));
                }
            }
            let records = vectors
                .into_iter()
                .map(|(seed, v)| {
                    let v = v.normalize();
                    let p = core("partition box", model.left_probability(&v))?;
                    let rho = core("partition box", model.measure_left_right(&v))?;
                    Ok(PartitionRecord {
                        seed,
                        left_probability: p,
                        entropy_after: core("entropy", von_neumann_entropy(&rho, &tol))?,
                        binary_entropy: binary_entropy(p),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(json(&PartitionDump {
                n_sites: *n_sites,
                ln_2: std::f64::consts::LN_2,
                records,
            }))
        }
        ScenarioConfig::Growth { times } => {
            let spec = match &cfg.hamiltonian {
                Some(HamiltonianConfig::Toy { .. }) => cfg.toy_spec()?.expect("toy variant"),
                _ => {
                    return Err(CliError::Config(
                        "hamiltonian.kind: the growth scenario needs the toy Hamiltonian".into(),
                    ))
                }
            };
            let psi0 = cfg.initial_pure()?;
            let curve = core("scenario.growth", entanglement_growth_curve(&spec, &psi0, times, &tol))?;
            let (_, h) = cfg.total_hamiltonian()?;
            let prop = core("propagator", Propagator::new(&h))?;
            let rows = times
                .iter()
                .zip(curve)
                .map(|(&t, s_matter)| {
                    let psi: PureState = core("evolve", prop.evolve(&psi0, t))?;
                    let (_, s_gravity, purity) = entropies(&SystemState::Pure(psi), &tol)?;
                    Ok(SeriesRecord {
                        t,
                        s_matter,
                        s_gravity,
                        purity,
                        trace_distance_to_unreset: None,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(match format {
                Format::Csv => series_csv(&rows),
                Format::Json => json(&rows),
            })
        }
        ScenarioConfig::Symmetry {
            variant,
            symmetry,
            seeds,
        } => {
            only_json("scenario symmetry", format)?;
            let (state, _) = cfg.system(*variant)?;
            let dim = core("partial trace", state.matter_density())?.dim();
            let u = match symmetry.as_str() {
                "swap" => swap(dim),
                "parity" => parity(dim),
                other => {
                    return Err(CliError::Config(format!(
                        "scenario.symmetry: unknown symmetry {other:?} (swap, parity)"
                    )))
                }
            };
            let base = match variant {
                Variant::Plain => cfg.seed.unwrap_or(0),
                _ => cfg.require_seed("scenario symmetry")?,
            };
            let used: Vec<u64> = (0..*seeds).map(|i| derive_seed(base, i)).collect();
            let reports = used
                .iter()
                .map(|&s| {
                    core(
                        "scenario.symmetry",
                        symmetry_demo(&u, &state, *variant, &mut stream(s), &tol),
                    )
                })
                .collect::<CliResult<Vec<_>>>()?;
            let max = |f: fn(&SymmetryReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
            Ok(json(&SymmetryDump {
                variant: *variant,
                symmetry: symmetry.clone(),
                max_event_norm: max(|r| r.max_event_norm),
                max_reset_norm: max(|r| r.max_reset_norm),
                seeds: used,
                reports,
            }))
        }
    }
}
