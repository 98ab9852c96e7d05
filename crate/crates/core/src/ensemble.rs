//! Ensemble execution and reduction.
//!
//! Trajectory `i` is seeded with `base_seed + i`. Trajectories run in fixed
//! chunks through an [`Executor`]; results are folded into the accumulator
//! strictly in trajectory order, so the output does not depend on how many
//! workers the executor uses.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::HilbertDims;
use crate::observables::{temperature_populations, ObservableRecord};
use crate::trajectory::JumpRecord;

/// Trajectories evaluated per reduction round.
pub const CHUNK: usize = 16;

/// Runs independent jobs and returns their results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}

/// What one trajectory hands to the reduction.
#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    /// `to_linear` vectors, one per sample time, concatenated.
    pub samples: Vec<f64>,
    pub jumps: JumpRecord,
    /// Largest change of any parity-sector population from the first sample.
    pub parity_drift: f64,
    /// Extra per-trajectory scalars (e.g. a scan objective).
    pub extras: Vec<f64>,
}

impl TrajectorySummary {
    /// `samples` holds one `to_linear` vector per sample time.
    pub fn new(dims: HilbertDims, samples: Vec<f64>, jumps: JumpRecord, extras: Vec<f64>) -> Self {
        let len = ObservableRecord::linear_len(dims);
        let mut parity_drift: f64 = 0.0;
        if let Some(first) = samples.get(..len) {
            for rec in samples.chunks_exact(len) {
                for k in PARITY {
                    parity_drift = parity_drift.max((rec[k] - first[k]).abs());
                }
            }
        }
        TrajectorySummary {
            samples,
            jumps,
            parity_drift,
            extras,
        }
    }
}

/// Positions of the parity fractions in `to_linear`.
const PARITY: core::ops::Range<usize> = 5..8;

/// Inputs to the non-linear derived quantities, tracked with full
/// covariance for delta-method errors.
const DERIVED: usize = 7;

/// Running mean and co-moments, updated in a fixed order.
#[derive(Debug, Clone)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Welford {
            n: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    fn stderr(&self) -> Vec<f64> {
        if self.n < 2.0 {
            return vec![0.0; self.mean.len()];
        }
        self.m2
            .iter()
            .map(|s| ((s / (self.n - 1.0)).max(0.0) / self.n).sqrt())
            .collect()
    }
}

/// Full covariance of a small vector.
#[derive(Debug, Clone)]
struct CoMoments {
    n: f64,
    mean: [f64; DERIVED],
    c: [[f64; DERIVED]; DERIVED],
}

impl CoMoments {
    fn new() -> Self {
        CoMoments {
            n: 0.0,
            mean: [0.0; DERIVED],
            c: [[0.0; DERIVED]; DERIVED],
        }
    }

    fn push(&mut self, x: &[f64; DERIVED]) {
        self.n += 1.0;
        let mut d_old = [0.0; DERIVED];
        for i in 0..DERIVED {
            d_old[i] = x[i] - self.mean[i];
            self.mean[i] += d_old[i] / self.n;
        }
        for i in 0..DERIVED {
            let d_new = x[i] - self.mean[i];
            for j in 0..DERIVED {
                self.c[j][i] += d_old[j] * d_new;
            }
        }
    }

    /// Standard error of `g(mean)` given its gradient.
    fn delta_stderr(&self, grad: &[f64; DERIVED]) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let mut v = 0.0;
        for i in 0..DERIVED {
            for j in 0..DERIVED {
                v += grad[i] * grad[j] * self.c[i][j];
            }
        }
        ((v / (self.n - 1.0)).max(0.0) / self.n).sqrt()
    }
}

fn derived_inputs(rec: &[f64], dims: HilbertDims) -> [f64; DERIVED] {
    let side = dims.momentum_count();
    let p_single = &rec[15..15 + side];
    let (p0, p2) = temperature_populations(p_single, dims);
    [rec[8], rec[9], rec[10], rec[11], rec[12], p0, p2]
}

/// Gradient of `C_p` with respect to `(μ1, μ2, s1, s2, x, ·, ·)`.
fn correlation_gradient(m: &[f64; DERIVED]) -> Option<[f64; DERIVED]> {
    let (mu1, mu2, s1, s2, x) = (m[0], m[1], m[2], m[3], m[4]);
    let v1 = s1 - mu1 * mu1;
    let v2 = s2 - mu2 * mu2;
    if !(v1 > 0.0 && v2 > 0.0) {
        return None;
    }
    let cov = x - mu1 * mu2;
    let denom = (v1 * v2).sqrt();
    let c = cov / denom;
    // ∂C/∂v1 = −C/(2 v1), ∂v1/∂μ1 = −2μ1, ∂v1/∂s1 = 1
    let dv1 = -c / (2.0 * v1);
    let dv2 = -c / (2.0 * v2);
    Some([
        -mu2 / denom + dv1 * (-2.0 * mu1),
        -mu1 / denom + dv2 * (-2.0 * mu2),
        dv1,
        dv2,
        1.0 / denom,
        0.0,
        0.0,
    ])
}

/// Gradient of `4/ln(p0/p2)`.
fn temperature_gradient(m: &[f64; DERIVED]) -> Option<[f64; DERIVED]> {
    let (p0, p2) = (m[5], m[6]);
    if !(p0 > 0.0 && p2 > 0.0 && p2 < p0) {
        return None;
    }
    let l = (p0 / p2).ln();
    let dl = -4.0 / (l * l);
    Some([0.0, 0.0, 0.0, 0.0, 0.0, dl / p0, -dl / p2])
}

/// Ensemble means and standard errors on the shared sample grid.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub dims: HilbertDims,
    pub n_traj: usize,
    pub times: Vec<f64>,
    /// Mean record per time; `c_p` and `t_eff` are evaluated on the means.
    pub mean: Vec<ObservableRecord>,
    /// Standard errors of the `to_linear` entries per time.
    pub stderr: Vec<Vec<f64>>,
    pub c_p_stderr: Vec<Option<f64>>,
    pub t_eff_stderr: Vec<Option<f64>>,
    /// Per-trajectory parity drift.
    pub parity_drift: Vec<f64>,
    /// Photon detections per channel `(cosine, sine)`, summed over trajectories.
    pub jump_totals: [u64; 2],
    pub extras_mean: Vec<f64>,
    pub extras_stderr: Vec<f64>,
}

impl EnsembleResult {
    pub fn max_parity_drift(&self) -> f64 {
        self.parity_drift.iter().copied().fold(0.0, f64::max)
    }

    /// Largest ensemble-mean population on the momentum cutoff.
    pub fn max_boundary_population(&self) -> f64 {
        self.mean.iter().map(|r| r.boundary_population).fold(0.0, f64::max)
    }

    pub fn max_top_fock_population(&self) -> f64 {
        self.mean.iter().map(|r| r.top_fock_population).fold(0.0, f64::max)
    }
}

/// Folds trajectory summaries in the order they are pushed.
pub struct EnsembleAccumulator {
    dims: HilbertDims,
    times: Vec<f64>,
    linear: Vec<Welford>,
    derived: Vec<CoMoments>,
    extras: Option<Welford>,
    parity_drift: Vec<f64>,
    jump_totals: [u64; 2],
}

impl EnsembleAccumulator {
    pub fn new(dims: HilbertDims, times: Vec<f64>) -> Self {
        let len = ObservableRecord::linear_len(dims);
        EnsembleAccumulator {
            linear: (0..times.len()).map(|_| Welford::new(len)).collect(),
            derived: (0..times.len()).map(|_| CoMoments::new()).collect(),
            extras: None,
            parity_drift: Vec::new(),
            jump_totals: [0; 2],
            dims,
            times,
        }
    }

    pub fn push(&mut self, s: &TrajectorySummary) -> Result<()> {
        let len = ObservableRecord::linear_len(self.dims);
        if s.samples.len() != len * self.times.len() {
            return Err(Error::InvalidDims(format!(
                "trajectory produced {} values, expected {}",
                s.samples.len(),
                len * self.times.len()
            )));
        }
        for (k, chunk) in s.samples.chunks_exact(len).enumerate() {
            self.linear[k].push(chunk);
            self.derived[k].push(&derived_inputs(chunk, self.dims));
        }
        let extras = self.extras.get_or_insert_with(|| Welford::new(s.extras.len()));
        if extras.mean.len() != s.extras.len() {
            return Err(Error::InvalidDims("inconsistent extras length".into()));
        }
        extras.push(&s.extras);
        self.parity_drift.push(s.parity_drift);
        for e in &s.jumps.events {
            let c = match e.channel {
                crate::model::JumpChannel::Cosine => 0,
                crate::model::JumpChannel::Sine => 1,
            };
            self.jump_totals[c] += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> EnsembleResult {
        let dims = self.dims;
        let mean: Vec<ObservableRecord> = self
            .linear
            .iter()
            .map(|w| ObservableRecord::from_linear(dims, &w.mean))
            .collect();
        let c_p_stderr = self
            .derived
            .iter()
            .map(|c| correlation_gradient(&c.mean).map(|g| c.delta_stderr(&g)))
            .collect();
        let t_eff_stderr = self
            .derived
            .iter()
            .map(|c| temperature_gradient(&c.mean).map(|g| c.delta_stderr(&g)))
            .collect();
        let (extras_mean, extras_stderr) = match &self.extras {
            Some(w) => (w.mean.clone(), w.stderr()),
            None => (Vec::new(), Vec::new()),
        };
        EnsembleResult {
            dims,
            n_traj: self.parity_drift.len(),
            times: self.times,
            stderr: self.linear.iter().map(Welford::stderr).collect(),
            mean,
            c_p_stderr,
            t_eff_stderr,
            parity_drift: self.parity_drift,
            jump_totals: self.jump_totals,
            extras_mean,
            extras_stderr,
        }
    }
}

/// Runs `n_traj` trajectories with seeds `base_seed + i` and reduces them in
/// index order. Fails if any trajectory fails.
pub fn run_ensemble<E, F>(
    exec: &E,
    dims: HilbertDims,
    times: &[f64],
    n_traj: usize,
    base_seed: u64,
    simulate: F,
) -> Result<EnsembleResult>
where
    E: Executor,
    F: Fn(u64) -> Result<TrajectorySummary> + Sync + Send,
{
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    let mut acc = EnsembleAccumulator::new(dims, times.to_vec());
    let mut failed = 0;
    let mut first = None;
    let mut start = 0;
    while start < n_traj {
        let end = (start + CHUNK).min(n_traj);
        let results = exec.map(start..end, |i| simulate(base_seed.wrapping_add(i as u64)));
        for (offset, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => acc.push(&s)?,
                Err(e) => {
                    failed += 1;
                    if first.is_none() {
                        first = Some(format!("trajectory {}: {e}", start + offset));
                    }
                }
            }
        }
        start = end;
    }
    if failed > 0 {
        return Err(Error::Ensemble {
            failed,
            total: n_traj,
            first: first.unwrap_or_else(|| "unknown".to_string()),
        });
    }
    Ok(acc.finish())
}
