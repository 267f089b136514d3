//! Run configuration file (TOML).
//!
//! Matrices are row-major lists of `[re, im]` pairs; vectors are lists of
//! `[re, im]` pairs.

use std::path::Path;

use mgent_core::dynamics::{assemble_hamiltonian, MasterGenerator, ResetSchedule};
use mgent_core::events::{Dynamics, SystemState, Variant};
use mgent_core::linalg::{partial_trace, BipartiteSpace, DensityOperator, HermitianOperator, PureState, Side};
use mgent_core::scenarios::{build_toy_model, toy_entangled_state, toy_product_state, ToyModelSpec};
use mgent_core::seeds::stream;
use mgent_core::{CMatrix, CVector, Tolerances, C64};
use serde::Deserialize;

use crate::error::CliError;

pub type MatrixSpec = Vec<Vec<[f64; 2]>>;
pub type VectorSpec = Vec<[f64; 2]>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub space: Option<SpaceConfig>,
    pub hamiltonian: Option<HamiltonianConfig>,
    pub generator: Option<GeneratorConfig>,
    pub initial: Option<InitialConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub events: Option<EventsConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub series: Option<SeriesConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub branches: BranchesConfig,
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub dim_matter: usize,
    pub dim_gravity: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Toy {
        #[serde(default = "default_coupling")]
        coupling: f64,
        seed: Option<u64>,
        matter_spectrum: Option<Vec<f64>>,
        gravity_spectrum: Option<Vec<f64>>,
    },
    Inline {
        matter: Option<MatrixSpec>,
        gravity: Option<MatrixSpec>,
        interaction: Option<MatrixSpec>,
    },
}

fn default_coupling() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub hamiltonian: Option<MatrixSpec>,
    pub hamiltonian_diagonal: Option<Vec<f64>>,
    /// Scale of a seeded random unit-Frobenius Hamiltonian.
    pub hamiltonian_random: Option<f64>,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub rate: f64,
    pub matrix: Option<MatrixSpec>,
    /// `number` (diag(0..d)), `lowering`, `raising`.
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Product {
        matter: VectorSpec,
        gravity: VectorSpec,
    },
    Basis {
        matter: usize,
        gravity: usize,
    },
    Amplitudes {
        amplitudes: VectorSpec,
    },
    Random {
        seed: Option<u64>,
    },
    ToyProduct,
    Density {
        matrix: MatrixSpec,
    },
    Diagonal {
        probabilities: Vec<f64>,
    },
    RandomDensity {
        dim: usize,
        rank: Option<usize>,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub initial_time: f64,
    #[serde(default)]
    pub times: Vec<f64>,
    pub final_time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsConfig {
    pub variant: Variant,
    pub time: Option<f64>,
    #[serde(default)]
    pub include_matrices: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_max: default_dt_max(),
        }
    }
}

fn default_dt_max() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub times: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Depth up to which frequencies are tabulated.
    #[serde(default = "default_frequency_depth")]
    pub frequency_depth: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            frequency_depth: default_frequency_depth(),
        }
    }
}

fn default_samples() -> usize {
    1000
}

fn default_frequency_depth() -> usize {
    2
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchesConfig {
    #[serde(default)]
    pub prune_eps: f64,
    pub cap: Option<usize>,
    /// Evaluation time of the statistical operator (default: schedule final time).
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    PartitionBox {
        #[serde(default = "default_sites")]
        n_sites: usize,
        /// Number of seeded asymmetric wave vectors to report besides the symmetric one.
        #[serde(default)]
        random_states: usize,
    },
    Growth {
        times: Vec<f64>,
    },
    Symmetry {
        variant: Variant,
        /// `swap` or `parity`, acting on the matter side.
        symmetry: String,
        #[serde(default = "default_seed_scan")]
        seeds: u64,
    },
}

fn default_sites() -> usize {
    8
}

fn default_seed_scan() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = &self.schedule {
            ResetSchedule::new(s.initial_time, s.times.clone()).map_err(|e| config_err("schedule.times", e))?;
            if let Some(tf) = s.final_time {
                let last = s.times.last().copied().unwrap_or(s.initial_time);
                if tf < last {
                    return Err(CliError::Config(format!(
                        "schedule.final_time: {tf} precedes the last reset time {last}"
                    )));
                }
            }
        }
        if !(self.integrator.dt_max > 0.0) {
            return Err(CliError::Config("integrator.dt_max: must be positive".into()));
        }
        if let Some(sp) = &self.space {
            BipartiteSpace::new(sp.dim_matter, sp.dim_gravity).map_err(|e| config_err("space", e))?;
        }
        if !(self.branches.prune_eps >= 0.0) {
            return Err(CliError::Config("branches.prune_eps: must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut tol = self.tolerances;
        if let Some(cap) = self.branches.cap {
            tol.branch_cap = cap;
        }
        tol
    }

    /// Top-level seed, required by any randomized operation.
    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config(format!("seed: required for {what} (set `seed` or pass --seed)")))
    }

    pub fn space(&self) -> Result<BipartiteSpace, CliError> {
        if let Some(sp) = &self.space {
            return BipartiteSpace::new(sp.dim_matter, sp.dim_gravity).map_err(|e| config_err("space", e));
        }
        if let Some(HamiltonianConfig::Toy { .. }) = &self.hamiltonian {
            let spec = ToyModelSpec::default();
            return Ok(spec.space().expect("default toy space is valid"));
        }
        Err(CliError::Config("space: missing [space] section".into()))
    }

    pub fn toy_spec(&self) -> Result<Option<ToyModelSpec>, CliError> {
        let Some(HamiltonianConfig::Toy {
            coupling,
            seed,
            matter_spectrum,
            gravity_spectrum,
        }) = &self.hamiltonian
        else {
            return Ok(None);
        };
        let space = self.space()?;
        let linear = |n: usize| (0..n).map(|i| i as f64).collect::<Vec<_>>();
        let seed = match seed {
            Some(s) => *s,
            None => self.require_seed("the toy Hamiltonian")?,
        };
        Ok(Some(ToyModelSpec {
            dim_matter: space.dim_matter(),
            dim_gravity: space.dim_gravity(),
            coupling_strength: *coupling,
            seed,
            matter_spectrum: matter_spectrum.clone().unwrap_or_else(|| linear(space.dim_matter())),
            gravity_spectrum: gravity_spectrum.clone().unwrap_or_else(|| linear(space.dim_gravity())),
        }))
    }

    /// Total-space Hamiltonian.
    pub fn total_hamiltonian(&self) -> Result<(BipartiteSpace, HermitianOperator), CliError> {
        match &self.hamiltonian {
            None => Err(CliError::Config("hamiltonian: missing [hamiltonian] section".into())),
            Some(HamiltonianConfig::Toy { .. }) => {
                let spec = self.toy_spec()?.expect("toy variant");
                build_toy_model(&spec).map_err(|e| config_err("hamiltonian", e))
            }
            Some(HamiltonianConfig::Inline {
                matter,
                gravity,
                interaction,
            }) => {
                let space = self.space()?;
                let herm = |m: &Option<MatrixSpec>, n: usize, key: &str| -> Result<HermitianOperator, CliError> {
                    match m {
                        None => Ok(HermitianOperator::zeros(n)),
                        Some(m) => {
                            let m = matrix(m, key)?;
                            expect_dim(&m, n, key)?;
                            HermitianOperator::new(m).map_err(|e| config_err(key, e))
                        }
                    }
                };
                let h = assemble_hamiltonian(
                    &herm(matter, space.dim_matter(), "hamiltonian.matter")?,
                    &herm(gravity, space.dim_gravity(), "hamiltonian.gravity")?,
                    &herm(interaction, space.total(), "hamiltonian.interaction")?,
                )
                .map_err(|e| config_err("hamiltonian", e))?;
                Ok((space, h))
            }
        }
    }

    pub fn initial_pure(&self) -> Result<PureState, CliError> {
        let space = self.space()?;
        let key = "initial";
        match self
            .initial
            .as_ref()
            .ok_or_else(|| CliError::Config("initial: missing [initial] section".into()))?
        {
            InitialConfig::Product { matter, gravity } => {
                mgent_core::linalg::tensor_state(&vector(matter), &vector(gravity), space)
                    .map_err(|e| config_err(key, e))
            }
            InitialConfig::Basis { matter, gravity } => {
                PureState::basis(space, *matter, *gravity).map_err(|e| config_err(key, e))
            }
            InitialConfig::Amplitudes { amplitudes } => {
                PureState::normalized(vector(amplitudes), space).map_err(|e| config_err("initial.amplitudes", e))
            }
            InitialConfig::Random { seed } => {
                let seed = match seed {
                    Some(s) => *s,
                    None => self.require_seed("a random initial state")?,
                };
                Ok(toy_entangled_state(space, seed))
            }
            InitialConfig::ToyProduct => Ok(toy_product_state(space)),
            _ => Err(CliError::Config(
                "initial.kind: a total pure state is required here (product, basis, amplitudes, random, toy_product)"
                    .into(),
            )),
        }
    }

    /// Density operator for plain / modified runs. Pure total states are
    /// reduced to their matter side.
    pub fn initial_density(&self) -> Result<DensityOperator, CliError> {
        let tol = self.tolerances();
        match self
            .initial
            .as_ref()
            .ok_or_else(|| CliError::Config("initial: missing [initial] section".into()))?
        {
            InitialConfig::Density { matrix: m } => DensityOperator::new_with(matrix(m, "initial.matrix")?, &tol)
                .map_err(|e| config_err("initial.matrix", e)),
            InitialConfig::Diagonal { probabilities } => {
                DensityOperator::diagonal(probabilities).map_err(|e| config_err("initial.probabilities", e))
            }
            InitialConfig::RandomDensity { dim, rank, seed } => {
                if *dim == 0 {
                    return Err(CliError::Config("initial.dim: must be positive".into()));
                }
                let seed = match seed {
                    Some(s) => *s,
                    None => self.require_seed("a random density operator")?,
                };
                Ok(DensityOperator::random(*dim, rank.unwrap_or(*dim), &mut stream(seed)))
            }
            _ => {
                let psi = self.initial_pure()?;
                partial_trace(&psi, psi.space(), Side::Matter).map_err(|e| config_err("initial", e))
            }
        }
    }

    pub fn master_generator(&self, dim: usize) -> Result<MasterGenerator, CliError> {
        let Some(g) = &self.generator else {
            return Ok(MasterGenerator::zero(dim));
        };
        let given = [
            g.hamiltonian.is_some(),
            g.hamiltonian_diagonal.is_some(),
            g.hamiltonian_random.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given > 1 {
            return Err(CliError::Config(
                "generator.hamiltonian: give at most one of hamiltonian, hamiltonian_diagonal, hamiltonian_random"
                    .into(),
            ));
        }
        let h = if let Some(m) = &g.hamiltonian {
            let m = matrix(m, "generator.hamiltonian")?;
            expect_dim(&m, dim, "generator.hamiltonian")?;
            HermitianOperator::new(m).map_err(|e| config_err("generator.hamiltonian", e))?
        } else if let Some(d) = &g.hamiltonian_diagonal {
            if d.len() != dim {
                return Err(CliError::Config(format!(
                    "generator.hamiltonian_diagonal: expected {dim} entries, got {}",
                    d.len()
                )));
            }
            HermitianOperator::diagonal(d)
        } else if let Some(scale) = g.hamiltonian_random {
            let seed = self.require_seed("generator.hamiltonian_random")?;
            let r = HermitianOperator::random_unit(dim, &mut stream(mgent_core::seeds::derive_seed(seed, 0x4841)));
            HermitianOperator::new(r.matrix() * C64::new(scale, 0.0)).map_err(|e| config_err("generator", e))?
        } else {
            HermitianOperator::zeros(dim)
        };
        let mut jumps = Vec::with_capacity(g.jumps.len());
        let mut rates = Vec::with_capacity(g.jumps.len());
        for (k, j) in g.jumps.iter().enumerate() {
            let m = match (&j.matrix, &j.preset) {
                (Some(m), None) => {
                    let m = matrix(m, "generator.jumps.matrix")?;
                    expect_dim(&m, dim, "generator.jumps.matrix")?;
                    m
                }
                (None, Some(p)) => preset_jump(p, dim)?,
                _ => {
                    return Err(CliError::Config(format!(
                        "generator.jumps[{k}]: give exactly one of matrix or preset"
                    )))
                }
            };
            jumps.push(m);
            rates.push(j.rate);
        }
        MasterGenerator::new(h, jumps, rates).map_err(|e| config_err("generator.jumps", e))
    }

    pub fn variant(&self) -> Result<Variant, CliError> {
        self.events
            .as_ref()
            .map(|e| e.variant)
            .ok_or_else(|| CliError::Config("events.variant: missing [events] section".into()))
    }

    pub fn schedule(&self) -> Result<ResetSchedule, CliError> {
        match &self.schedule {
            None => Ok(ResetSchedule::empty(0.0)),
            Some(s) => ResetSchedule::new(s.initial_time, s.times.clone()).map_err(|e| config_err("schedule.times", e)),
        }
    }

    pub fn final_time(&self) -> Result<f64, CliError> {
        let sched = self.schedule()?;
        Ok(self
            .schedule
            .as_ref()
            .and_then(|s| s.final_time)
            .unwrap_or_else(|| sched.last_time()))
    }

    /// Initial state and dynamics appropriate for `variant`.
    pub fn system(&self, variant: Variant) -> Result<(SystemState, Dynamics), CliError> {
        match variant {
            Variant::Plain | Variant::Modified => {
                let rho = self.initial_density()?;
                let gen = self.master_generator(rho.dim())?;
                let dynamics =
                    Dynamics::master(gen, self.integrator.dt_max).map_err(|e| config_err("integrator", e))?;
                Ok((SystemState::Mixed(rho), dynamics))
            }
            Variant::Alternative => {
                let (space, h) = self.total_hamiltonian()?;
                let psi = self.initial_pure()?;
                let dynamics = Dynamics::unitary(&h, space).map_err(|e| config_err("hamiltonian", e))?;
                Ok((SystemState::Pure(psi), dynamics))
            }
        }
    }

    pub fn series_times(&self) -> Result<Vec<f64>, CliError> {
        let s = self
            .series
            .as_ref()
            .ok_or_else(|| CliError::Config("series: missing [series] section".into()))?;
        if let Some(t) = &s.times {
            if t.windows(2).any(|w| w[1] < w[0]) {
                return Err(CliError::Config("series.times: must be non-decreasing".into()));
            }
            return Ok(t.clone());
        }
        match (s.start, s.stop, s.step) {
            (Some(a), Some(b), Some(h)) if h > 0.0 && b >= a => {
                let n = ((b - a) / h + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| a + i as f64 * h).collect())
            }
            _ => Err(CliError::Config(
                "series: give `times`, or `start`, `stop` and a positive `step` with stop ≥ start".into(),
            )),
        }
    }
}

fn preset_jump(name: &str, dim: usize) -> Result<CMatrix, CliError> {
    let c = |x: f64| C64::new(x, 0.0);
    match name {
        "number" => Ok(CMatrix::from_fn(
            dim,
            dim,
            |i, j| if i == j { c(i as f64) } else { c(0.0) },
        )),
        "lowering" => Ok(CMatrix::from_fn(dim, dim, |i, j| {
            if j == i + 1 {
                c((j as f64).sqrt())
            } else {
                c(0.0)
            }
        })),
        "raising" => Ok(CMatrix::from_fn(dim, dim, |i, j| {
            if i == j + 1 {
                c((i as f64).sqrt())
            } else {
                c(0.0)
            }
        })),
        other => Err(CliError::Config(format!(
            "generator.jumps.preset: unknown preset {other:?} (number, lowering, raising)"
        ))),
    }
}

pub fn matrix(rows: &MatrixSpec, key: &str) -> Result<CMatrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{key}: matrix must be square and nonempty")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn vector(entries: &VectorSpec) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|[re, im]| C64::new(*re, *im)))
}

fn expect_dim(m: &CMatrix, n: usize, key: &str) -> Result<(), CliError> {
    if m.nrows() != n {
        return Err(CliError::Config(format!(
            "{key}: expected a {n}x{n} matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn config_err(key: &str, e: mgent_core::Error) -> CliError {
    if e.is_numerical() {
        CliError::Numerical(format!("{key}: {e}"))
    } else {
        CliError::Config(format!("{key}: {e}"))
    }
}
