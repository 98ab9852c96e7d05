//! Monte Carlo wave-function trajectories with photon-counting jumps.
//!
//! The unnormalized state decays under `H_eff` until `‖ψ‖² ≤ r` for a
//! uniform `r`. The crossing is located by bisection, a jump channel is
//! chosen with probability `‖L_j ψ‖² / Σ_k ‖L_k ψ‖²`, and the state is
//! renormalized after applying `L_j`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::integrator::{next_step, Dopri5, InteractionPicture};
use crate::model::{JumpChannel, JumpOperator};
use crate::sparse::SparseOperator;
use crate::{trajectory_rng, TrajectoryRng};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub seed: u64,
    /// Largest step, in `1/ω_R`.
    pub dt_max: f64,
    /// Local error tolerance relative to the state norm.
    pub ode_tol: f64,
    /// Resolution of jump times.
    pub jump_time_tol: f64,
    /// Ascending sample times, in `1/ω_R`.
    pub sample_times: Vec<f64>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            seed: 0,
            dt_max: 0.5,
            ode_tol: 1e-8,
            jump_time_tol: 1e-6,
            sample_times: Vec::new(),
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt_max", self.dt_max),
            ("ode_tol", self.ode_tol),
            ("jump_time_tol", self.jump_time_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v}, need {name} > 0")));
            }
        }
        validate_sample_times(&self.sample_times)
    }
}

pub fn validate_sample_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("sample times must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: JumpChannel,
}

/// Photon detections of one trajectory, in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpRecord {
    pub events: Vec<JumpEvent>,
}

impl JumpRecord {
    pub fn count(&self, channel: JumpChannel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }
}

/// Read-only generator data for one set of drive parameters; shared by all
/// trajectories.
#[derive(Debug, Clone)]
pub struct Propagator {
    picture: InteractionPicture,
    jumps: Vec<JumpOperator>,
}

impl Propagator {
    pub fn new(h_eff: &SparseOperator, jumps: &[JumpOperator]) -> Result<Self> {
        if jumps.iter().any(|j| j.op.dim() != h_eff.dim()) {
            return Err(Error::InvalidDims("jump operator dimension mismatch".into()));
        }
        Ok(Propagator {
            picture: InteractionPicture::new(h_eff),
            jumps: jumps.to_vec(),
        })
    }

    /// Generator and jump operators restricted to the basis states `keep`.
    /// The subspace must be invariant under both.
    pub fn restricted(h_eff: &SparseOperator, jumps: &[JumpOperator], keep: &[usize]) -> Result<Self> {
        let jumps: Vec<JumpOperator> = jumps
            .iter()
            .map(|j| JumpOperator {
                channel: j.channel,
                op: j.op.restrict(keep),
            })
            .collect();
        Self::new(&h_eff.restrict(keep), &jumps)
    }

    pub fn dim(&self) -> usize {
        self.picture.dim()
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }
}

fn embed(keep: Option<&[usize]>, psi: &[Complex64], out: &mut [Complex64]) {
    match keep {
        Some(keep) => {
            out.fill(ZERO);
            for (&i, v) in keep.iter().zip(psi) {
                out[i] = *v;
            }
        }
        None => out.copy_from_slice(psi),
    }
}

/// One stochastic trajectory in progress.
pub struct Trajectory {
    psi: Vec<Complex64>,
    slope: Vec<Complex64>,
    slope_valid: bool,
    time: f64,
    threshold: f64,
    step: f64,
    rng: TrajectoryRng,
    config: TrajectoryConfig,
    next_sample: usize,
    record: JumpRecord,
    work: Dopri5,
    scratch: Vec<Complex64>,
    sample: StateVector,
    /// Basis indices of the propagated subspace, if not the full space.
    embedding: Option<Vec<usize>>,
    steps: u64,
}

impl Trajectory {
    /// Starts at `t0` from `psi0`, which must have unit norm. Uses the given
    /// generator for jump thresholds and channel choices.
    pub fn new(psi0: &StateVector, t0: f64, rng: TrajectoryRng, config: TrajectoryConfig) -> Result<Self> {
        Self::build(psi0, None, t0, rng, config)
    }

    /// Like `new`, but propagates only the components at `keep` (ascending
    /// basis indices), which must hold all of `psi0`. Propagators passed to
    /// `advance` must be restricted to the same subspace.
    pub fn in_subspace(
        psi0: &StateVector,
        keep: &[usize],
        t0: f64,
        rng: TrajectoryRng,
        config: TrajectoryConfig,
    ) -> Result<Self> {
        let dim = psi0.dims().dim();
        if keep.windows(2).any(|w| w[1] <= w[0]) || keep.last().is_some_and(|&k| k >= dim) {
            return Err(Error::InvalidDims("subspace indices must be ascending and in range".into()));
        }
        Self::build(psi0, Some(keep.to_vec()), t0, rng, config)
    }

    fn build(
        psi0: &StateVector,
        embedding: Option<Vec<usize>>,
        t0: f64,
        rng: TrajectoryRng,
        config: TrajectoryConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = psi0.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("initial norm² = {n}, need 1")));
        }
        let psi: Vec<Complex64> = match &embedding {
            Some(keep) => keep.iter().map(|&i| psi0.amplitudes()[i]).collect(),
            None => psi0.amplitudes().to_vec(),
        };
        let inside: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        if (inside - n).abs() > 1e-12 {
            return Err(Error::InvalidParameter("initial state leaves the subspace".into()));
        }
        let dim = psi.len();
        let next_sample = config.sample_times.partition_point(|&s| s < t0);
        let mut traj = Trajectory {
            psi,
            slope: vec![ZERO; dim],
            slope_valid: false,
            time: t0,
            threshold: 0.0,
            step: config.dt_max,
            rng,
            next_sample,
            record: JumpRecord::default(),
            work: Dopri5::new(dim),
            scratch: vec![ZERO; dim],
            sample: psi0.clone(),
            embedding,
            steps: 0,
            config,
        };
        traj.threshold = traj.draw_threshold();
        Ok(traj)
    }

    fn draw_threshold(&mut self) -> f64 {
        // uniform in (0, 1]
        1.0 - self.rng.gen::<f64>()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn jumps(&self) -> &JumpRecord {
        &self.record
    }

    pub fn into_jumps(self) -> JumpRecord {
        self.record
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Renormalized copy of the current state.
    pub fn state(&self) -> StateVector {
        let mut s = self.sample.clone();
        embed(self.embedding.as_deref(), &self.psi, s.amplitudes_mut());
        s.normalize();
        s
    }


    fn emit<F>(&mut self, on_sample: &mut F) -> Result<()>
    where
        F: FnMut(f64, &StateVector) -> Result<()>,
    {
        embed(self.embedding.as_deref(), &self.psi, self.sample.amplitudes_mut());
        self.sample.normalize();
        on_sample(self.time, &self.sample)
    }

    /// Propagates to `t_end` under `prop`, calling `on_sample` with the
    /// renormalized state at every configured sample time in
    /// `[current time, t_end]` not yet emitted.
    pub fn advance<F>(&mut self, prop: &Propagator, t_end: f64, on_sample: &mut F) -> Result<()>
    where
        F: FnMut(f64, &StateVector) -> Result<()>,
    {
        if prop.dim() != self.psi.len() {
            return Err(Error::InvalidDims("propagator does not match the state".into()));
        }
        // A new generator invalidates the cached slope.
        self.slope_valid = false;
        loop {
            while self.next_sample < self.config.sample_times.len()
                && self.config.sample_times[self.next_sample] <= self.time
                && self.config.sample_times[self.next_sample] <= t_end
            {
                self.next_sample += 1;
                self.emit(on_sample)?;
            }
            if self.time >= t_end {
                return Ok(());
            }
            let stop = match self.config.sample_times.get(self.next_sample) {
                Some(&s) if s < t_end => s,
                _ => t_end,
            };
            self.step_towards(prop, stop)?;
        }
    }

    /// Takes one accepted step (possibly ending in a jump) towards `stop`.
    fn step_towards(&mut self, prop: &Propagator, stop: f64) -> Result<()> {
        let ip = &prop.picture;
        if !self.slope_valid {
            Dopri5::slope(ip, &self.psi, &mut self.slope);
            self.slope_valid = true;
        }
        let tol = self.config.ode_tol;
        let norm_before: f64 = self.psi.iter().map(|v| v.norm_sqr()).sum();
        let mut h = self.step.min(self.config.dt_max);
        let (h, clipped, result) = loop {
            let remaining = stop - self.time;
            let clipped = h >= remaining;
            let h_try = if clipped { remaining } else { h };
            let min_step = 1e-12 * self.time.abs().max(1.0);
            if h_try < min_step && !clipped {
                return Err(Error::Integration {
                    t: self.time,
                    reason: format!("step size underflow (h = {h_try:e})"),
                });
            }
            let r = self.work.try_step(ip, &self.psi, &self.slope, h_try, tol);
            if !r.error_ratio.is_finite() {
                return Err(Error::Integration {
                    t: self.time,
                    reason: "non-finite error estimate".to_string(),
                });
            }
            if r.error_ratio <= 1.0 {
                let proposal = next_step(h_try, r.error_ratio).min(self.config.dt_max);
                self.step = if clipped { self.step.max(proposal) } else { proposal };
                break (h_try, clipped, r);
            }
            h = next_step(h_try, r.error_ratio);
            self.step = h;
        };
        self.steps += 1;
        if result.norm_sqr > norm_before * (1.0 + 10.0 * tol) {
            return Err(Error::NonContractivity {
                t: self.time,
                before: norm_before,
                after: result.norm_sqr,
            });
        }

        if result.norm_sqr > self.threshold {
            self.psi.copy_from_slice(&self.work.candidate);
            self.slope.copy_from_slice(&self.work.candidate_slope);
            self.time = if clipped { stop } else { self.time + h };
            return Ok(());
        }

        // The threshold is crossed inside (t, t + h]: bisect on the step size.
        let mut lo = 0.0;
        let mut hi = h;
        let mut best = self.work.candidate.clone();
        while hi - lo > self.config.jump_time_tol {
            let mid = 0.5 * (lo + hi);
            let r = self.work.try_step(ip, &self.psi, &self.slope, mid, tol);
            if r.norm_sqr <= self.threshold {
                hi = mid;
                best.copy_from_slice(&self.work.candidate);
            } else {
                lo = mid;
            }
        }
        self.psi.copy_from_slice(&best);
        self.time = if clipped && hi == h { stop } else { self.time + hi };
        self.jump(prop)?;
        self.slope_valid = false;
        Ok(())
    }

    fn jump(&mut self, prop: &Propagator) -> Result<()> {
        let mut weights = Vec::with_capacity(prop.jumps.len());
        for j in &prop.jumps {
            j.op.apply(&self.psi, &mut self.scratch);
            weights.push(self.scratch.iter().map(|v| v.norm_sqr()).sum::<f64>());
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Integration {
                t: self.time,
                reason: "norm threshold crossed with zero jump rate".to_string(),
            });
        }
        let mut u = self.rng.gen::<f64>() * total;
        let mut chosen = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = k;
                break;
            }
            u -= w;
        }
        let op = &prop.jumps[chosen];
        op.op.apply(&self.psi, &mut self.scratch);
        let n: f64 = self.scratch.iter().map(|v| v.norm_sqr()).sum();
        let s = 1.0 / n.sqrt();
        for (p, v) in self.psi.iter_mut().zip(&self.scratch) {
            *p = v * s;
        }
        self.record.events.push(crate::trajectory::JumpEvent {
            time: self.time,
            channel: op.channel,
        });
        self.threshold = self.draw_threshold();
        Ok(())
    }
}

/// Result of `evolve_trajectory`.
#[derive(Debug, Clone)]
pub struct TrajectoryOutput {
    pub samples: Vec<(f64, StateVector)>,
    pub jumps: JumpRecord,
}

/// Evolves `psi0` from `t = 0` under a single effective Hamiltonian and
/// returns renormalized states at the configured sample times.
pub fn evolve_trajectory(
    psi0: &StateVector,
    h_eff: &SparseOperator,
    jumps: &[JumpOperator],
    config: &TrajectoryConfig,
) -> Result<TrajectoryOutput> {
    let prop = Propagator::new(h_eff, jumps)?;
    let t_end = config.sample_times.last().copied().unwrap_or(0.0);
    let mut traj = Trajectory::new(psi0, 0.0, trajectory_rng(config.seed), config.clone())?;
    let mut samples = Vec::with_capacity(config.sample_times.len());
    traj.advance(&prop, t_end, &mut |t, s: &StateVector| {
        samples.push((t, s.clone()));
        Ok(())
    })?;
    Ok(TrajectoryOutput {
        samples,
        jumps: traj.into_jumps(),
    })
}

/// Evenly spaced sample times `0, Δ, 2Δ, …` up to and including `t_end`.
pub fn sample_grid(t_end: f64, spacing: f64) -> Vec<f64> {
    let n = (t_end / spacing + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| k as f64 * spacing).collect();
    if let Some(&last) = out.last() {
        if t_end - last > 1e-9 * spacing {
            out.push(t_end);
        }
    }
    out
}
