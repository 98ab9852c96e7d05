//! Multi-stage cooling sequences and detuning scans.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::ensemble::{run_ensemble, EnsembleResult, Executor, TrajectorySummary};
use crate::error::{Error, Result};
use crate::hilbert::{initial_state, ExchangeSymmetry, Geometry, HilbertDims, ParitySector, StateVector};
use crate::model::{CavityModel, DriveParams, PhysicalParams};
use crate::observables::ObservableRecord;
use crate::trajectory::{sample_grid, JumpRecord, Propagator, Trajectory, TrajectoryConfig};
use crate::{trajectory_rng, trajectory_stream};

/// One interval of constant drive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    pub delta_c: f64,
    pub eta: f64,
    /// Length of the stage in `1/ω_R`. Zero is allowed and leaves the state untouched.
    pub duration: f64,
    /// The stage is tuned to move `|n| = target_n` down to `target_n − 2`.
    pub target_n: i32,
}

impl StageSpec {
    pub fn new(delta_c: f64, eta: f64, duration: f64, target_n: i32) -> Result<Self> {
        let s = StageSpec {
            delta_c,
            eta,
            duration,
            target_n,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        DriveParams::new(self.eta, self.delta_c)?;
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "duration = {}, need duration >= 0",
                self.duration
            )));
        }
        if self.target_n < 2 {
            return Err(Error::InvalidParameter(format!(
                "target_n = {}, need target_n >= 2",
                self.target_n
            )));
        }
        Ok(())
    }

    pub fn drive(&self) -> DriveParams {
        DriveParams {
            eta: self.eta,
            delta_c: self.delta_c,
        }
    }
}

/// Default stage lengths in `1/ω_R`.
pub const DEFAULT_DURATIONS: [f64; 3] = [500.0, 500.0, 1000.0];

/// Stages applied back to back; the cavity field carries over between them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub stages: Vec<StageSpec>,
    pub sym: ExchangeSymmetry,
    pub geometry: Geometry,
}

impl ProtocolSpec {
    pub fn new(stages: Vec<StageSpec>, sym: ExchangeSymmetry, geometry: Geometry) -> Result<Self> {
        let p = ProtocolSpec {
            stages,
            sym,
            geometry,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidParameter("protocol needs at least one stage".into()));
        }
        self.stages.iter().try_for_each(StageSpec::validate)
    }

    /// Three stages aimed at `4 → 2`, `3 → 1` and `2 → 0`, with the tuned
    /// detunings for each geometry and statistics and the default durations.
    pub fn three_stage(sym: ExchangeSymmetry, geometry: Geometry) -> Self {
        let delta = match (geometry, sym) {
            (Geometry::Ring, ExchangeSymmetry::Boson) => [-14.75, -12.0, -7.0],
            (Geometry::Linear, ExchangeSymmetry::Boson) => [-14.5, -10.25, -7.0],
            (Geometry::Ring, ExchangeSymmetry::Fermion) => [-14.25, -10.75, -6.75],
            (Geometry::Linear, ExchangeSymmetry::Fermion) => [-14.5, -10.75, -6.25],
        };
        let eta = [3.0, 2.0, 0.5];
        let target = [4, 3, 2];
        let stages = (0..3)
            .map(|i| StageSpec {
                delta_c: delta[i],
                eta: eta[i],
                duration: DEFAULT_DURATIONS[i],
                target_n: target[i],
            })
            .collect();
        ProtocolSpec {
            stages,
            sym,
            geometry,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }

    /// Times at which each stage ends.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.stages
            .iter()
            .map(|s| {
                t += s.duration;
                t
            })
            .collect()
    }
}

/// Free-particle resonance for moving `|K| → |K| − 2`, shifted by the
/// mean light shift `N·u0·B` of the cavity mode.
pub fn predict_detuning(target_k: i32, n_particles: u32, u0: f64, bunching: f64) -> Result<f64> {
    if target_k < 2 {
        return Err(Error::InvalidParameter(format!("target K = {target_k}, need K >= 2")));
    }
    if !(0.0..=1.0).contains(&bunching) {
        return Err(Error::InvalidParameter(format!("bunching = {bunching}, need 0 <= B <= 1")));
    }
    Ok(n_particles as f64 * u0 * bunching + 4.0 * (1 - target_k) as f64)
}

/// Weight of a single-particle distribution (indexed `−n_max..=n_max`) at
/// `|n| ≥ target_n`.
pub fn residual_population(dist: &[f64], target_n: i32) -> Result<f64> {
    if dist.len() % 2 == 0 {
        return Err(Error::InvalidDims(format!(
            "distribution has {} entries, expected 2 n_max + 1",
            dist.len()
        )));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization(total));
    }
    let n_max = (dist.len() / 2) as i32;
    Ok(dist
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i32 - n_max).abs() >= target_n)
        .map(|(_, p)| p)
        .sum())
}

/// How the two-particle state is prepared at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Gaussian packets with a random phase per momentum pair.
    RandomPhase,
    /// As `RandomPhase`, projected onto even momenta for both particles.
    EvenOnly,
    /// The same normalized state for every trajectory.
    State(StateVector),
}

/// Everything besides the stage list that a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub params: PhysicalParams,
    /// Truncation; the geometry is taken from the protocol.
    pub dims: HilbertDims,
    /// Momentum width `σ_n` of the initial packets, in `ħk`.
    pub width: f64,
    pub initial: InitialCondition,
    pub dt_max: f64,
    pub ode_tol: f64,
    pub jump_time_tol: f64,
    /// Spacing of the global sample grid, in `1/ω_R`.
    pub sample_spacing: f64,
}

impl RunSettings {
    pub fn new(params: PhysicalParams, dims: HilbertDims, width: f64) -> Self {
        let t = TrajectoryConfig::default();
        RunSettings {
            params,
            dims,
            width,
            initial: InitialCondition::RandomPhase,
            dt_max: t.dt_max,
            ode_tol: t.ode_tol,
            jump_time_tol: t.jump_time_tol,
            sample_spacing: 1.0,
        }
    }

    fn trajectory_config(&self, seed: u64, sample_times: Vec<f64>) -> TrajectoryConfig {
        TrajectoryConfig {
            seed,
            dt_max: self.dt_max,
            ode_tol: self.ode_tol,
            jump_time_tol: self.jump_time_tol,
            sample_times,
        }
    }

    fn initial(&self, sym: ExchangeSymmetry, dims: HilbertDims, rng: &mut crate::TrajectoryRng) -> Result<StateVector> {
        match &self.initial {
            InitialCondition::RandomPhase => initial_state(sym, self.width, dims, rng),
            InitialCondition::EvenOnly => {
                let mut psi = initial_state(sym, self.width, dims, rng)?;
                psi.retain_even_momenta()?;
                Ok(psi)
            }
            InitialCondition::State(psi) => {
                if psi.dims() != dims {
                    return Err(Error::InvalidDims("initial state does not match the truncation".into()));
                }
                Ok(psi.clone())
            }
        }
    }
}

/// Stage propagators for one parity sector.
struct SectorStages {
    sector: ParitySector,
    keep: Vec<usize>,
    stages: Vec<(Propagator, f64)>,
}

/// Propagators for each stage and parity sector, built once and shared by
/// all trajectories.
struct Prepared {
    dims: HilbertDims,
    sectors: Vec<SectorStages>,
}

impl Prepared {
    fn new(stages: &[StageSpec], settings: &RunSettings, geometry: Geometry) -> Result<Self> {
        let dims = settings.dims.with_geometry(geometry)?;
        let mut sectors: Vec<SectorStages> = ParitySector::ALL
            .iter()
            .map(|&sector| SectorStages {
                sector,
                keep: sector.indices(dims),
                stages: Vec::with_capacity(stages.len()),
            })
            .collect();
        let mut t = 0.0;
        for s in stages {
            s.validate()?;
            let model = CavityModel::new(settings.params, s.drive(), dims)?;
            t += s.duration;
            for sec in &mut sectors {
                let prop = Propagator::restricted(&model.effective, &model.jumps, &sec.keep)?;
                sec.stages.push((prop, t));
            }
        }
        Ok(Prepared { dims, sectors })
    }

    /// Runs trajectory `seed` through all stages. Calls `on_sample` with the
    /// sector, its weight, the sample index and the renormalized sector state.
    ///
    /// The initial state has no coherence between parity sectors once its
    /// random phases are averaged over, and the dynamics never couples them.
    /// Each occupied sector is therefore propagated as its own normalized
    /// state with an independent jump record; observables are combined with
    /// the initial sector weights.
    fn run_sectors<F>(
        &self,
        settings: &RunSettings,
        sym: ExchangeSymmetry,
        times: &[f64],
        seed: u64,
        on_sample: &mut F,
    ) -> Result<JumpRecord>
    where
        F: FnMut(ParitySector, f64, usize, &StateVector) -> Result<()>,
    {
        let mut rng = trajectory_rng(seed);
        let psi0 = settings.initial(sym, self.dims, &mut rng)?;
        let weights: Vec<f64> = self
            .sectors
            .iter()
            .map(|sec| sec.keep.iter().map(|&i| psi0.amplitudes()[i].norm_sqr()).sum())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut jumps = JumpRecord::default();
        for (sec, &w) in self.sectors.iter().zip(&weights) {
            if w == 0.0 {
                continue;
            }
            let weight = w / total;
            let mut part = StateVector::zeros(self.dims);
            for &i in &sec.keep {
                part.amplitudes_mut()[i] = psi0.amplitudes()[i];
            }
            part.normalize();
            let rng = trajectory_stream(seed, 1 + sec.sector.slot() as u64);
            let config = settings.trajectory_config(seed, times.to_vec());
            let mut traj = Trajectory::in_subspace(&part, &sec.keep, 0.0, rng, config)?;
            let mut k = 0;
            for (prop, t_end) in &sec.stages {
                traj.advance(prop, *t_end, &mut |_, psi: &StateVector| {
                    on_sample(sec.sector, weight, k, psi)?;
                    k += 1;
                    Ok(())
                })?;
            }
            jumps.events.extend(traj.into_jumps().events);
        }
        jumps.events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(jumps)
    }

    /// Weighted observables of one trajectory at `times`; `extras` turns the
    /// final record into scan objectives.
    fn simulate<F>(
        &self,
        settings: &RunSettings,
        sym: ExchangeSymmetry,
        times: &[f64],
        seed: u64,
        extras: &F,
    ) -> Result<TrajectorySummary>
    where
        F: Fn(&ObservableRecord) -> Result<Vec<f64>>,
    {
        let len = ObservableRecord::linear_len(self.dims);
        let mut combined = vec![0.0; len * times.len()];
        let mut linear = Vec::with_capacity(len);
        let jumps = self.run_sectors(settings, sym, times, seed, &mut |_, weight, k, psi| {
            linear.clear();
            ObservableRecord::from_state(psi, sym).to_linear(&mut linear);
            for (acc, v) in combined[k * len..(k + 1) * len].iter_mut().zip(&linear) {
                *acc += weight * v;
            }
            Ok(())
        })?;
        let extra = match times.len() {
            0 => Vec::new(),
            n => extras(&ObservableRecord::from_linear(self.dims, &combined[(n - 1) * len..]))?,
        };
        Ok(TrajectorySummary::new(self.dims, combined, jumps, extra))
    }
}

fn no_extras(_: &ObservableRecord) -> Result<Vec<f64>> {
    Ok(Vec::new())
}

/// Runs the protocol for `n_traj` trajectories (seeds `base_seed + i`) and
/// returns ensemble statistics on the grid `0, Δ, 2Δ, …, T`.
pub fn run_protocol<E: Executor>(
    exec: &E,
    protocol: &ProtocolSpec,
    settings: &RunSettings,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    protocol.validate()?;
    let prepared = Prepared::new(&protocol.stages, settings, protocol.geometry)?;
    let times = sample_grid(protocol.total_duration(), settings.sample_spacing);
    run_ensemble(exec, prepared.dims, &times, n_traj, base_seed, |seed| {
        prepared.simulate(settings, protocol.sym, &times, seed, &no_extras)
    })
}

/// Replays trajectory `index` of a `run_protocol` ensemble with seed
/// `base_seed + index`, handing every sector state to `on_sample` as
/// `(sector, weight, time, state)`. Returns the merged jump record.
pub fn trace_trajectory<F>(
    protocol: &ProtocolSpec,
    settings: &RunSettings,
    seed: u64,
    on_sample: &mut F,
) -> Result<JumpRecord>
where
    F: FnMut(ParitySector, f64, f64, &StateVector) -> Result<()>,
{
    protocol.validate()?;
    let prepared = Prepared::new(&protocol.stages, settings, protocol.geometry)?;
    let times = sample_grid(protocol.total_duration(), settings.sample_spacing);
    prepared.run_sectors(settings, protocol.sym, &times, seed, &mut |sector, w, k, psi| {
        on_sample(sector, w, times[k], psi)
    })
}

/// Detuning scan of one stage of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    /// Index of the scanned stage; earlier stages run unchanged first.
    pub stage: usize,
    /// Ascending detunings to try.
    pub grid: Vec<f64>,
    pub n_traj: usize,
}

impl ScanSpec {
    pub fn new(stage: usize, grid: Vec<f64>, n_traj: usize) -> Result<Self> {
        let s = ScanSpec { stage, grid, n_traj };
        s.validate()?;
        Ok(s)
    }

    /// Grid `center ± half_window` in steps of `step`.
    pub fn around(stage: usize, center: f64, half_window: f64, step: f64, n_traj: usize) -> Result<Self> {
        if !(step > 0.0) || !(half_window >= 0.0) {
            return Err(Error::InvalidParameter("need step > 0 and half_window >= 0".into()));
        }
        let k = (half_window / step + 1e-9).floor() as i64;
        let grid = (-k..=k).map(|i| center + i as f64 * step).collect();
        ScanSpec::new(stage, grid, n_traj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("scan grid is empty".into()));
        }
        if self.grid.iter().any(|d| !d.is_finite()) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("scan grid must be finite and strictly ascending".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
        }
        Ok(())
    }
}

/// Residual population at the end of the scanned stage for each detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub grid: Vec<f64>,
    pub objective: Vec<f64>,
    pub stderr: Vec<f64>,
    pub optimum: usize,
}

impl ScanResult {
    pub fn optimal_delta_c(&self) -> f64 {
        self.grid[self.optimum]
    }
}

/// Index of the smallest objective; ties go to the smaller `|Δ_c|`, then to
/// the earlier grid point.
pub fn select_optimum(grid: &[f64], objective: &[f64]) -> Result<usize> {
    if grid.is_empty() || grid.len() != objective.len() {
        return Err(Error::InvalidParameter("grid and objective must be non-empty and equally long".into()));
    }
    if objective.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("objective contains NaN".into()));
    }
    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (objective[i], objective[best]);
        if a < b || (a == b && grid[i].abs() < grid[best].abs()) {
            best = i;
        }
    }
    Ok(best)
}

/// Runs an ensemble per grid point and picks the detuning that leaves the
/// least population at `|n| ≥ target_n` when the scanned stage ends. Every
/// grid point uses the same seeds.
pub fn scan_detunings<E: Executor>(
    exec: &E,
    scan: &ScanSpec,
    protocol: &ProtocolSpec,
    settings: &RunSettings,
    base_seed: u64,
) -> Result<ScanResult> {
    scan.validate()?;
    protocol.validate()?;
    if scan.stage >= protocol.stages.len() {
        return Err(Error::Bounds(format!(
            "scan stage {} of a {}-stage protocol",
            scan.stage,
            protocol.stages.len()
        )));
    }
    let target = protocol.stages[scan.stage].target_n;
    let end: f64 = protocol.stages[..=scan.stage].iter().map(|s| s.duration).sum();
    let times = vec![end];
    let residual = |rec: &ObservableRecord| Ok(vec![residual_population(&rec.p_single, target)?]);
    let mut objective = Vec::with_capacity(scan.grid.len());
    let mut stderr = Vec::with_capacity(scan.grid.len());
    for &delta in &scan.grid {
        let mut stages = protocol.stages[..=scan.stage].to_vec();
        stages[scan.stage].delta_c = delta;
        let prepared = Prepared::new(&stages, settings, protocol.geometry)?;
        let r = run_ensemble(exec, prepared.dims, &times, scan.n_traj, base_seed, |seed| {
            prepared.simulate(settings, protocol.sym, &times, seed, &residual)
        })?;
        objective.push(r.extras_mean[0]);
        stderr.push(r.extras_stderr[0]);
    }
    let optimum = select_optimum(&scan.grid, &objective)?;
    Ok(ScanResult {
        grid: scan.grid.clone(),
        objective,
        stderr,
        optimum,
    })
}
