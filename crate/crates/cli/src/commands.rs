//! The four experiment subcommands.
//!
//! Each command writes its tables into the output directory and returns a
//! [`Report`]; the caller writes `report.json` and maps `passed` to the exit
//! code. Nothing written depends on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use cavity_core::ensemble::{EnsembleResult, Executor};
use cavity_core::hilbert::{dark_state, ParitySector, TRUNCATION_TOLERANCE};
use cavity_core::model::{CavityModel, JumpChannel};
use cavity_core::observables::ObservableRecord;
use cavity_core::oracle::{oracle_master_equation, DensityMatrix, OracleOptions};
use cavity_core::protocol::{run_protocol, scan_detunings, trace_trajectory, InitialCondition, ProtocolSpec, RunSettings};
use cavity_core::{Geometry, HilbertDims};
use serde_json::{json, Value};

use crate::config::{Initial, RunConfig};
use crate::error::CliError;
use crate::output::{self, format_value, Column, Stamp};

/// Largest tolerated drift of a parity-sector population per trajectory.
pub const PARITY_DRIFT_LIMIT: f64 = 1e-6;
/// Largest tolerated deviation of a distribution sum from one.
pub const NORMALIZATION_LIMIT: f64 = 1e-8;
/// Largest tolerated population on the top photon Fock level.
pub const TOP_FOCK_LIMIT: f64 = 1e-3;
/// Ground population the linear cavity must stay below for the dark state.
pub const DARK_LINEAR_LIMIT: f64 = 1e-4;
/// Required ratio of ring to linear ground population at the end.
pub const DARK_RING_RATIO: f64 = 100.0;

/// Outcome of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub passed: bool,
    pub body: Value,
}

fn stamp(cfg: &RunConfig) -> Stamp {
    Stamp {
        config_hash: cfg.hash(),
        seed: cfg.ensemble.seed,
    }
}

fn base_report(command: &str, cfg: &RunConfig) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("command".into(), json!(command));
    m.insert("config_hash".into(), json!(cfg.hash()));
    m.insert("seed".into(), json!(cfg.ensemble.seed));
    m
}

fn finish(mut m: BTreeMap<String, Value>, violations: Vec<String>, warnings: Vec<String>) -> Report {
    let passed = violations.is_empty();
    m.insert("status".into(), json!(if passed { "ok" } else { "failed" }));
    m.insert("violations".into(), json!(violations));
    m.insert("warnings".into(), json!(warnings));
    Report {
        passed,
        body: Value::Object(m.into_iter().collect()),
    }
}

fn dims_json(d: HilbertDims) -> Value {
    json!({
        "n_max": d.n_max(),
        "q_c": d.q_c(),
        "q_s": d.q_s(),
        "geometry": match d.geometry() {
            Geometry::Ring => "ring",
            Geometry::Linear => "linear",
        },
        "dim": d.dim(),
    })
}

/// Invariant and truncation checks on an ensemble.
fn monitor(res: &EnsembleResult, violations: &mut Vec<String>, warnings: &mut Vec<String>) -> Value {
    let drift = res.max_parity_drift();
    if drift >= PARITY_DRIFT_LIMIT {
        violations.push(format!("parity drift {drift:e} >= {PARITY_DRIFT_LIMIT:e}"));
    }
    let boundary = res.max_boundary_population();
    if boundary >= TRUNCATION_TOLERANCE {
        violations.push(format!(
            "population {boundary:e} on the momentum cutoff >= {TRUNCATION_TOLERANCE:e}; increase n_max"
        ));
    }
    let top = res.max_top_fock_population();
    if top > TOP_FOCK_LIMIT {
        warnings.push(format!(
            "top photon Fock level population {top:e} > {TOP_FOCK_LIMIT:e}; consider larger q_c, q_s"
        ));
    }
    let mut norm_err: f64 = 0.0;
    for r in &res.mean {
        norm_err = norm_err
            .max((r.p_single.iter().sum::<f64>() - 1.0).abs())
            .max((r.p_joint.iter().sum::<f64>() - 1.0).abs());
        if let Some(p) = r.p_single.iter().chain(&r.p_joint).find(|p| **p < -1e-12) {
            violations.push(format!("negative probability {p:e}"));
            break;
        }
    }
    if norm_err > NORMALIZATION_LIMIT {
        violations.push(format!("distribution sums deviate from 1 by {norm_err:e}"));
    }
    json!({
        "max_parity_drift": drift,
        "max_boundary_population": boundary,
        "max_top_fock_population": top,
        "max_normalization_error": norm_err,
    })
}

fn opt(v: f64) -> Option<f64> {
    Some(v)
}

fn write_energy(path: &Path, stamp: &Stamp, res: &EnsembleResult) -> Result<(), CliError> {
    let cols = [
        Column::new("t", "1/omega_R"),
        Column::new("e_kin", "E_R"),
        Column::new("e_kin_se", "E_R"),
        Column::new("p_ground", "1"),
        Column::new("p_ground_se", "1"),
        Column::new("n_c", "photons"),
        Column::new("n_c_se", "photons"),
        Column::new("n_s", "photons"),
        Column::new("n_s_se", "photons"),
        Column::new("bunching", "1"),
        Column::new("bunching_se", "1"),
        Column::new("t_eff", "E_R/k_B"),
        Column::new("t_eff_se", "E_R/k_B"),
    ];
    let rows: Vec<Vec<Option<f64>>> = res
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (m, se) = (&res.mean[k], &res.stderr[k]);
            vec![
                opt(t),
                opt(m.e_kin),
                opt(se[0]),
                opt(m.p_ground),
                opt(se[1]),
                opt(m.n_photons[0]),
                opt(se[3]),
                opt(m.n_photons[1]),
                opt(se[4]),
                opt(m.bunching),
                opt(se[2]),
                m.t_eff,
                res.t_eff_stderr[k],
            ]
        })
        .collect();
    output::write_timeseries(path, "energy", stamp, &cols, &rows)
}

fn write_correlation(path: &Path, stamp: &Stamp, res: &EnsembleResult) -> Result<(), CliError> {
    let cols = [
        Column::new("t", "1/omega_R"),
        Column::new("c_p", "1"),
        Column::new("c_p_se", "1"),
        Column::new("parity_ee", "1"),
        Column::new("parity_oo", "1"),
        Column::new("parity_mixed", "1"),
        Column::new("boundary_population", "1"),
        Column::new("top_fock_population", "1"),
    ];
    let rows: Vec<Vec<Option<f64>>> = res
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let m = &res.mean[k];
            vec![
                opt(t),
                m.c_p,
                res.c_p_stderr[k],
                opt(m.parity_fracs[0]),
                opt(m.parity_fracs[1]),
                opt(m.parity_fracs[2]),
                opt(m.boundary_population),
                opt(m.top_fock_population),
            ]
        })
        .collect();
    output::write_timeseries(path, "correlation", stamp, &cols, &rows)
}

fn write_marginal(path: &Path, stamp: &Stamp, res: &EnsembleResult) -> Result<(), CliError> {
    let mut cols = vec![Column::new("t", "1/omega_R")];
    cols.extend(res.dims.momenta().map(|n| Column::new(format!("p[{n}]"), "1")));
    let rows: Vec<Vec<Option<f64>>> = res
        .times
        .iter()
        .zip(&res.mean)
        .map(|(&t, m)| std::iter::once(t).chain(m.p_single.iter().copied()).map(Some).collect())
        .collect();
    output::write_timeseries(path, "marginal", stamp, &cols, &rows)
}

/// Sample indices for the configured joint-distribution times plus the final
/// time, nearest grid point, deduplicated.
fn joint_indices(times: &[f64], requested: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = requested
        .iter()
        .map(|&t| {
            times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .chain(times.len().checked_sub(1))
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// `joint_t<time>.tsv`.
pub fn joint_file_name(t: f64) -> String {
    format!("joint_t{t}.tsv")
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io {
        path: out.display().to_string(),
        source: e,
    })
}

fn file_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Runs the configured protocol and writes `energy.tsv`, `marginal.tsv`,
/// `correlation.tsv` and `joint_t*.tsv`. With `dump = Some(i)` the raw
/// states of trajectory `i` go to `trajectory_<i>.txt`.
pub fn cool<E: Executor>(cfg: &RunConfig, out: &Path, exec: &E, dump: Option<usize>) -> Result<Report, CliError> {
    ensure_dir(out)?;
    let protocol = cfg.protocol()?;
    let settings = cfg.settings()?;
    let st = stamp(cfg);
    let res = run_protocol(exec, &protocol, &settings, cfg.ensemble.trajectories, cfg.ensemble.seed)?;

    write_energy(&out.join("energy.tsv"), &st, &res)?;
    write_marginal(&out.join("marginal.tsv"), &st, &res)?;
    write_correlation(&out.join("correlation.tsv"), &st, &res)?;
    let mut files = vec!["energy.tsv".to_string(), "marginal.tsv".into(), "correlation.tsv".into()];
    for k in joint_indices(&res.times, &cfg.sampling.joint_times) {
        let name = joint_file_name(res.times[k]);
        let title = format!("joint t = {}", res.times[k]);
        output::write_matrix(&out.join(&name), &title, &st, res.dims.n_max(), &res.mean[k].p_joint)?;
        files.push(name);
    }
    if let Some(i) = dump {
        if i >= cfg.ensemble.trajectories {
            return Err(CliError::Invalid(format!(
                "dump index {i} outside the ensemble of {}",
                cfg.ensemble.trajectories
            )));
        }
        let name = format!("trajectory_{i}.txt");
        dump_trajectory(&out.join(&name), cfg, &protocol, &settings, i)?;
        files.push(name);
    }

    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let mut m = base_report("cool", cfg);
    m.insert("monitors".into(), monitor(&res, &mut violations, &mut warnings));
    m.insert("trajectories".into(), json!(res.n_traj));
    m.insert("dims".into(), dims_json(res.dims));
    m.insert("jumps".into(), json!({"cosine": res.jump_totals[0], "sine": res.jump_totals[1]}));
    if let (Some(last), Some(&t)) = (res.mean.last(), res.times.last()) {
        let se = res.stderr.last().expect("stderr per time");
        m.insert(
            "final".into(),
            json!({
                "t": t,
                "e_kin": last.e_kin,
                "e_kin_se": se[0],
                "p_ground": last.p_ground,
                "p_ground_se": se[1],
                "c_p": last.c_p,
                "t_eff": last.t_eff,
            }),
        );
    }
    m.insert("files".into(), json!(files));
    Ok(finish(m, violations, warnings))
}

/// Raw dump of one trajectory: a `#` header with dims, parameters and seed,
/// then one block per sample time and parity sector:
///
/// ```text
/// sample t=<t> sector=<even-even|odd-odd|mixed> weight=<w>
/// <n1> <n2> <k_c> <k_s> <re> <im>     (one line per basis state of the sector)
/// ```
///
/// followed by one `jump t=<t> channel=<cosine|sine>` line per detection.
fn dump_trajectory(
    path: &Path,
    cfg: &RunConfig,
    protocol: &ProtocolSpec,
    settings: &RunSettings,
    index: usize,
) -> Result<(), CliError> {
    let err = file_err(path);
    let mut w = BufWriter::new(File::create(path).map_err(&err)?);
    let dims = settings.dims.with_geometry(protocol.geometry)?;
    let seed = cfg.ensemble.seed.wrapping_add(index as u64);
    let mut head = String::new();
    output::header("raw trajectory", &stamp(cfg), &mut head);
    let _ = writeln!(head, "# trajectory = {index}");
    let _ = writeln!(head, "# trajectory_seed = {seed}");
    let _ = writeln!(
        head,
        "# dims: n_max = {} q_c = {} q_s = {} geometry = {:?} dim = {}",
        dims.n_max(),
        dims.q_c(),
        dims.q_s(),
        dims.geometry(),
        dims.dim()
    );
    let _ = writeln!(head, "# params: u0 = {} kappa = {}", cfg.physics.u0, cfg.physics.kappa);
    for s in &protocol.stages {
        let _ = writeln!(
            head,
            "# stage: delta_c = {} eta = {} duration = {} target_n = {}",
            s.delta_c, s.eta, s.duration, s.target_n
        );
    }
    let _ = writeln!(head, "# block: sample t=<t> sector=<name> weight=<w>; lines: n1 n2 k_c k_s re im");
    w.write_all(head.as_bytes()).map_err(&err)?;
    let sector_indices: Vec<Vec<usize>> = ParitySector::ALL.iter().map(|s| s.indices(dims)).collect();
    let mut io_error = None;
    let jumps = trace_trajectory(protocol, settings, seed, &mut |sector, weight, t, psi| {
        let mut block = String::new();
        let name = match sector {
            ParitySector::EvenEven => "even-even",
            ParitySector::OddOdd => "odd-odd",
            ParitySector::Mixed => "mixed",
        };
        let _ = writeln!(block, "sample t={} sector={name} weight={}", format_value(Some(t)), format_value(Some(weight)));
        for &i in &sector_indices[sector.slot()] {
            let b = dims.unflatten_unchecked(i);
            let a = psi.amplitudes()[i];
            let _ = writeln!(
                block,
                "{} {} {} {} {} {}",
                b.n1,
                b.n2,
                b.k_c,
                b.k_s,
                format_value(Some(a.re)),
                format_value(Some(a.im))
            );
        }
        if let Err(e) = w.write_all(block.as_bytes()) {
            io_error.get_or_insert(e);
        }
        Ok(())
    })?;
    if let Some(e) = io_error {
        return Err(err(e));
    }
    for j in &jumps.events {
        let ch = match j.channel {
            JumpChannel::Cosine => "cosine",
            JumpChannel::Sine => "sine",
        };
        writeln!(w, "jump t={} channel={ch}", format_value(Some(j.time))).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

/// Detuning scan of the configured stage; writes `scan.tsv`.
pub fn scan<E: Executor>(cfg: &RunConfig, out: &Path, exec: &E) -> Result<Report, CliError> {
    ensure_dir(out)?;
    let (spec, predicted) = cfg
        .scan_spec()?
        .ok_or_else(|| CliError::Invalid("the scan command needs a [scan] section".into()))?;
    let protocol = cfg.protocol()?;
    let settings = cfg.settings()?;
    let res = scan_detunings(exec, &spec, &protocol, &settings, cfg.ensemble.seed)?;
    let cols = [
        Column::new("delta_c", "omega_R"),
        Column::new("residual", "1"),
        Column::new("residual_se", "1"),
    ];
    let rows: Vec<Vec<Option<f64>>> = (0..res.grid.len())
        .map(|i| vec![opt(res.grid[i]), opt(res.objective[i]), opt(res.stderr[i])])
        .collect();
    output::write_timeseries(&out.join("scan.tsv"), "scan", &stamp(cfg), &cols, &rows)?;
    let stage = &protocol.stages[spec.stage];
    let mut m = base_report("scan", cfg);
    m.insert("stage".into(), json!(spec.stage));
    m.insert("target_n".into(), json!(stage.target_n));
    m.insert("trajectories".into(), json!(spec.n_traj));
    m.insert("predicted_delta_c".into(), json!(predicted));
    m.insert("optimal_delta_c".into(), json!(res.optimal_delta_c()));
    m.insert("optimal_residual".into(), json!(res.objective[res.optimum]));
    m.insert("optimal_residual_se".into(), json!(res.stderr[res.optimum]));
    m.insert("files".into(), json!(["scan.tsv"]));
    Ok(finish(m, Vec::new(), Vec::new()))
}

/// Ground-state population of the dark state in both geometries.
#[derive(Debug, Clone)]
pub struct DarkStateRun {
    pub ring: EnsembleResult,
    pub linear: EnsembleResult,
}

impl DarkStateRun {
    pub fn linear_max(&self) -> f64 {
        self.linear.mean.iter().map(|r| r.p_ground).fold(0.0, f64::max)
    }

    pub fn ring_final(&self) -> f64 {
        self.ring.mean.last().map_or(0.0, |r| r.p_ground)
    }

    pub fn linear_final(&self) -> f64 {
        self.linear.mean.last().map_or(0.0, |r| r.p_ground)
    }

    pub fn passed(&self) -> bool {
        self.linear_max() < DARK_LINEAR_LIMIT && self.ring_final() > DARK_RING_RATIO * self.linear_final()
    }
}

/// Runs the configured stages from the dark state in a ring and in a
/// linear cavity with the same momentum cutoff and sine-mode size.
pub fn run_darkstate<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<DarkStateRun, CliError> {
    let protocol = cfg.protocol()?;
    let base = cfg.dims()?;
    let run = |geometry: Geometry| -> Result<EnsembleResult, CliError> {
        let dims = base.with_geometry(geometry)?;
        let mut settings = cfg.settings_for(dims)?;
        settings.initial = InitialCondition::State(dark_state(dims)?);
        let p = ProtocolSpec {
            geometry,
            ..protocol.clone()
        };
        Ok(run_protocol(exec, &p, &settings, cfg.ensemble.trajectories, cfg.ensemble.seed)?)
    };
    Ok(DarkStateRun {
        ring: run(Geometry::Ring)?,
        linear: run(Geometry::Linear)?,
    })
}

/// Writes `darkstate.tsv` with the ground population in both geometries.
pub fn darkstate<E: Executor>(cfg: &RunConfig, out: &Path, exec: &E) -> Result<Report, CliError> {
    ensure_dir(out)?;
    let run = run_darkstate(cfg, exec)?;
    let cols = [
        Column::new("t", "1/omega_R"),
        Column::new("p_ground_ring", "1"),
        Column::new("p_ground_ring_se", "1"),
        Column::new("p_ground_linear", "1"),
        Column::new("p_ground_linear_se", "1"),
    ];
    let rows: Vec<Vec<Option<f64>>> = (0..run.ring.times.len())
        .map(|k| {
            vec![
                opt(run.ring.times[k]),
                opt(run.ring.mean[k].p_ground),
                opt(run.ring.stderr[k][1]),
                opt(run.linear.mean[k].p_ground),
                opt(run.linear.stderr[k][1]),
            ]
        })
        .collect();
    output::write_timeseries(&out.join("darkstate.tsv"), "darkstate", &stamp(cfg), &cols, &rows)?;

    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    if run.linear_max() >= DARK_LINEAR_LIMIT {
        violations.push(format!(
            "linear-cavity ground population reached {:e} >= {DARK_LINEAR_LIMIT:e}",
            run.linear_max()
        ));
    }
    if !(run.ring_final() > DARK_RING_RATIO * run.linear_final()) {
        violations.push(format!(
            "final ring ground population {:e} is not above {DARK_RING_RATIO} x linear {:e}",
            run.ring_final(),
            run.linear_final()
        ));
    }
    let mut m = base_report("darkstate", cfg);
    m.insert("ring_monitors".into(), monitor(&run.ring, &mut violations, &mut warnings));
    m.insert("linear_monitors".into(), monitor(&run.linear, &mut violations, &mut warnings));
    m.insert("linear_max_p_ground".into(), json!(run.linear_max()));
    m.insert("linear_final_p_ground".into(), json!(run.linear_final()));
    m.insert("ring_final_p_ground".into(), json!(run.ring_final()));
    m.insert("trajectories".into(), json!(cfg.ensemble.trajectories));
    m.insert("files".into(), json!(["darkstate.tsv"]));
    Ok(finish(m, violations, warnings))
}

/// One MCWF-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub t: f64,
    pub name: String,
    pub mcwf: Option<f64>,
    pub stderr: Option<f64>,
    pub oracle: Option<f64>,
    /// `|mcwf − oracle| / stderr`; `None` if either side is undefined.
    pub z: Option<f64>,
}

impl Comparison {
    /// Within `z_max` standard errors, or both sides undefined.
    pub fn agrees(&self, z_max: f64) -> bool {
        match (self.mcwf, self.oracle) {
            (None, None) => true,
            (Some(_), Some(_)) => self.z.is_some_and(|z| z <= z_max),
            _ => false,
        }
    }
}

/// `z = |mcwf − oracle| / √(se² + floor²)`; `floor` absorbs the
/// integration error of both solvers on entries without sampling noise.
fn compare(
    t: f64,
    name: String,
    mcwf: Option<f64>,
    stderr: Option<f64>,
    oracle: Option<f64>,
    floor: f64,
) -> Comparison {
    let z = match (mcwf, oracle) {
        (Some(a), Some(b)) => {
            let se = stderr.unwrap_or(0.0).hypot(floor);
            Some(if a == b { 0.0 } else if se > 0.0 { (a - b).abs() / se } else { f64::INFINITY })
        }
        _ => None,
    };
    Comparison {
        t,
        name,
        mcwf,
        stderr,
        oracle,
        z,
    }
}

/// Density-matrix records at `times` for the configured protocol, starting
/// from the phase average of the trajectory initial state.
pub fn oracle_records(cfg: &RunConfig, dims: HilbertDims, times: &[f64]) -> Result<Vec<ObservableRecord>, CliError> {
    let protocol = cfg.protocol()?;
    let settings = cfg.settings_for(dims)?;
    let sym = protocol.sym;
    let mut rho = match &settings.initial {
        InitialCondition::RandomPhase => DensityMatrix::phase_averaged_initial(sym, settings.width, dims)?,
        InitialCondition::State(psi) => DensityMatrix::from_state(psi),
        InitialCondition::EvenOnly => {
            return Err(CliError::Invalid(
                "oracle-check supports random-phase and dark-state initial conditions".into(),
            ))
        }
    };
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        out.push(ObservableRecord::from_state(&rho, sym));
        next += 1;
    }
    let mut t0 = 0.0;
    for stage in &protocol.stages {
        let t1 = t0 + stage.duration;
        let model = CavityModel::new(settings.params, stage.drive(), dims)?;
        let mut local: Vec<f64> = Vec::new();
        let first = next;
        while next < times.len() && times[next] <= t1 {
            local.push(times[next] - t0);
            next += 1;
        }
        let recorded = local.len();
        if local.last().map_or(true, |&t| t < t1 - t0) && t1 > t0 {
            local.push(t1 - t0);
        }
        if local.is_empty() {
            continue;
        }
        let rhos = oracle_master_equation(&rho, &model.hamiltonian, &model.jumps, &local, OracleOptions::default())?;
        for r in &rhos[..recorded] {
            out.push(ObservableRecord::from_state(r, sym));
        }
        debug_assert_eq!(out.len(), first + recorded);
        rho = rhos.last().expect("at least one sample").clone();
        t0 = t1;
    }
    Ok(out)
}

/// Compares every ensemble entry with the oracle at `k·T/N`, `k = 1..N`.
pub fn run_oracle_check<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Vec<Comparison>, CliError> {
    let oc = cfg
        .oracle
        .ok_or_else(|| CliError::Invalid("the oracle-check command needs an [oracle] section".into()))?;
    if cfg.particles.initial == Initial::EvenOnly {
        return Err(CliError::Invalid(
            "oracle-check supports random-phase and dark-state initial conditions".into(),
        ));
    }
    let protocol = cfg.protocol()?;
    let total = protocol.total_duration();
    if !(total > 0.0) {
        return Err(CliError::Invalid("oracle-check needs a positive total duration".into()));
    }
    let mut settings = cfg.settings()?;
    settings.sample_spacing = total / oc.samples as f64;
    let res = run_protocol(exec, &protocol, &settings, cfg.ensemble.trajectories, cfg.ensemble.seed)?;
    let times: Vec<f64> = res.times.iter().copied().filter(|&t| t > 0.0).take(oc.samples).collect();
    let oracle = oracle_records(cfg, res.dims, &times)?;
    let names = ObservableRecord::linear_names(res.dims);
    let offset = res.times.iter().take_while(|&&t| t <= 0.0).count();
    let mut out = Vec::new();
    let mut mc_lin = Vec::new();
    let mut or_lin = Vec::new();
    for (j, (&t, orec)) in times.iter().zip(&oracle).enumerate() {
        let k = offset + j;
        let mrec = &res.mean[k];
        mc_lin.clear();
        or_lin.clear();
        mrec.to_linear(&mut mc_lin);
        orec.to_linear(&mut or_lin);
        for (e, name) in names.iter().enumerate() {
            out.push(compare(t, name.clone(), Some(mc_lin[e]), Some(res.stderr[k][e]), Some(or_lin[e]), oc.numerical_floor));
        }
        out.push(compare(t, "c_p".into(), mrec.c_p, res.c_p_stderr[k], orec.c_p, oc.numerical_floor));
        out.push(compare(t, "t_eff".into(), mrec.t_eff, res.t_eff_stderr[k], orec.t_eff, oc.numerical_floor));
    }
    Ok(out)
}

/// Writes `oracle_check.tsv` and reports per-observable z-scores.
pub fn oracle_check<E: Executor>(cfg: &RunConfig, out: &Path, exec: &E) -> Result<Report, CliError> {
    ensure_dir(out)?;
    let z_max = cfg.oracle.map(|o| o.z_max).unwrap_or(3.0);
    let rows = run_oracle_check(cfg, exec)?;
    let mut text = String::new();
    output::header("oracle check", &stamp(cfg), &mut text);
    let _ = writeln!(text, "# units: t [1/omega_R]; values in the units of each observable; z [standard errors]");
    let _ = writeln!(text, "t\tobservable\tmcwf\tmcwf_se\toracle\tz");
    for c in &rows {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            format_value(Some(c.t)),
            c.name,
            format_value(c.mcwf),
            format_value(c.stderr),
            format_value(c.oracle),
            format_value(c.z)
        );
    }
    output::write_file(&out.join("oracle_check.tsv"), &text)?;

    let mut per: BTreeMap<String, f64> = BTreeMap::new();
    let mut violations = Vec::new();
    for c in &rows {
        let z = c.z.unwrap_or(0.0);
        let e = per.entry(c.name.clone()).or_insert(0.0);
        *e = e.max(z);
        if !c.agrees(z_max) {
            violations.push(format!(
                "{} at t = {}: mcwf {} +- {} vs oracle {}",
                c.name,
                c.t,
                format_value(c.mcwf),
                format_value(c.stderr),
                format_value(c.oracle)
            ));
        }
    }
    let max_z = per.values().copied().fold(0.0, f64::max);
    let mut m = base_report("oracle-check", cfg);
    m.insert("z_max".into(), json!(z_max));
    m.insert("max_z".into(), json!(max_z));
    m.insert("comparisons".into(), json!(rows.len()));
    m.insert("trajectories".into(), json!(cfg.ensemble.trajectories));
    m.insert("per_observable_max_z".into(), json!(per));
    m.insert("files".into(), json!(["oracle_check.tsv"]));
    Ok(finish(m, violations, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_indices_include_final_time() {
        let times = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(joint_indices(&times, &[]), vec![3]);
        assert_eq!(joint_indices(&times, &[1.2, 0.9, 3.0]), vec![1, 3]);
    }

    #[test]
    fn joint_names() {
        assert_eq!(joint_file_name(1000.0), "joint_t1000.tsv");
        assert_eq!(joint_file_name(12.5), "joint_t12.5.tsv");
    }

    #[test]
    fn comparison_rules() {
        let c = |a, se, b, floor| compare(1.0, "x".into(), a, se, b, floor);
        assert!(c(Some(1.0), Some(0.1), Some(1.2), 0.0).agrees(3.0));
        assert!(!c(Some(1.0), Some(0.1), Some(1.4), 0.0).agrees(3.0));
        assert!(c(Some(0.5), Some(0.0), Some(0.5), 0.0).agrees(3.0));
        assert!(!c(Some(0.5), Some(0.0), Some(0.6), 0.0).agrees(3.0));
        assert!(c(Some(0.5), Some(0.0), Some(0.5 + 1e-9), 1e-9).agrees(3.0));
        assert!(!c(Some(0.5), Some(0.0), Some(0.5 + 1e-8), 1e-9).agrees(3.0));
        assert!(c(None, None, None, 0.0).agrees(3.0));
        assert!(!c(Some(0.5), None, None, 0.0).agrees(3.0));
    }
}
