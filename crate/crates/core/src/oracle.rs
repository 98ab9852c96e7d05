//! Dense Lindblad integration for small Hilbert spaces. Serves as the
//! reference the trajectory ensemble is checked against.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{packet_amplitudes, ExchangeSymmetry, HilbertDims, StateVector};
use crate::integrator::next_step;
use crate::model::{effective_hamiltonian, JumpOperator};
use crate::observables::QuantumState;
use crate::sparse::SparseOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default largest dimension accepted by the dense integrator.
pub const DEFAULT_ORACLE_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: HilbertDims,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dims: HilbertDims) -> Self {
        let n = dims.dim();
        DensityMatrix {
            dims,
            data: vec![ZERO; n * n],
        }
    }

    pub fn from_state(psi: &StateVector) -> Self {
        let mut rho = DensityMatrix::zeros(psi.dims());
        let n = psi.norm_sqr();
        let a = psi.amplitudes();
        let d = a.len();
        for i in 0..d {
            for j in 0..d {
                rho.data[i * d + j] = a[i] * a[j].conj() / n;
            }
        }
        rho
    }

    /// Average over random pair phases of the trajectory initial state:
    /// an incoherent mixture of the (anti)symmetrized momentum pairs.
    pub fn phase_averaged_initial(sym: ExchangeSymmetry, width: f64, dims: HilbertDims) -> Result<Self> {
        let packet = packet_amplitudes(sym, width, dims)?;
        let side = dims.momentum_count();
        let d = dims.dim();
        let mut rho = DensityMatrix::zeros(dims);
        for s1 in 0..side {
            for s2 in s1..side {
                let n1 = s1 as i32 - dims.n_max();
                let n2 = s2 as i32 - dims.n_max();
                let mut idx = vec![(dims.index(n1, n2, 0, 0), packet[s1 * side + s2])];
                if s1 != s2 {
                    idx.push((dims.index(n2, n1, 0, 0), packet[s2 * side + s1]));
                }
                for &(a, va) in &idx {
                    for &(b, vb) in &idx {
                        rho.data[a * d + b] += va * vb.conj();
                    }
                }
            }
        }
        let tr = rho.trace();
        for v in &mut rho.data {
            *v /= tr;
        }
        Ok(rho)
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dims.dim() + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace_complex(&self) -> Complex64 {
        let d = self.dims.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dims.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Replaces `ρ` by `(ρ + ρ†)/2`.
    pub fn hermitize(&mut self) {
        let d = self.dims.dim();
        for i in 0..d {
            for j in i..d {
                let a = self.data[i * d + j];
                let b = self.data[j * d + i];
                let m = (a + b.conj()) * 0.5;
                self.data[i * d + j] = m;
                self.data[j * d + i] = m.conj();
            }
        }
    }

    /// Whether all eigenvalues are `≥ −eps`, via a Cholesky factorization
    /// of `ρ + eps·I`.
    pub fn is_positive(&self, eps: f64) -> bool {
        let d = self.dims.dim();
        let mut l = vec![ZERO; d * d];
        for j in 0..d {
            let mut diag = self.data[j * d + j].re + eps;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if !(diag > 0.0) {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = Complex64::new(ljj, 0.0);
            for i in j + 1..d {
                let mut s = self.data[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }
}

impl QuantumState for DensityMatrix {
    fn dims(&self) -> HilbertDims {
        self.dims
    }

    fn population(&self, i: usize) -> f64 {
        self.data[i * self.dims.dim() + i].re
    }

    fn element(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dims.dim() + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub max_dim: usize,
    pub tol: f64,
    pub dt_max: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_dim: DEFAULT_ORACLE_LIMIT,
            tol: 1e-10,
            dt_max: 0.1,
        }
    }
}

/// `out = A·ρ` for sparse `A` and dense row-major `ρ`.
fn sparse_left(a: &SparseOperator, rho: &[Complex64], out: &mut [Complex64]) {
    let d = a.dim();
    out.fill(ZERO);
    for (r, k, v) in a.triplets() {
        let (dst, src) = (&mut out[r * d..(r + 1) * d], &rho[k * d..(k + 1) * d]);
        for (o, s) in dst.iter_mut().zip(src) {
            *o += v * s;
        }
    }
}

struct Lindblad<'a> {
    h_eff: SparseOperator,
    jumps: &'a [JumpOperator],
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl Lindblad<'_> {
    /// `dρ = −i(H_eff ρ − ρ H_eff†) + Σ_j L_j ρ L_j†` for Hermitian `ρ`.
    fn rhs(&mut self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.h_eff.dim();
        sparse_left(&self.h_eff, rho, &mut self.a);
        // ρ H_eff† = (H_eff ρ)† when ρ = ρ†.
        for i in 0..d {
            for j in 0..d {
                let v = self.a[i * d + j] - self.a[j * d + i].conj();
                out[i * d + j] = Complex64::new(v.im, -v.re);
            }
        }
        for jump in self.jumps {
            sparse_left(&jump.op, rho, &mut self.b);
            for (col, l, v) in jump.op.triplets() {
                let vc = v.conj();
                for i in 0..d {
                    out[i * d + col] += self.b[i * d + l] * vc;
                }
            }
        }
    }
}

/// Integrates `ρ̇ = −i[H, ρ] + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})` from `t = 0`
/// and returns `ρ` at each sample time.
pub fn oracle_master_equation(
    rho0: &DensityMatrix,
    h: &SparseOperator,
    jumps: &[JumpOperator],
    sample_times: &[f64],
    options: OracleOptions,
) -> Result<Vec<DensityMatrix>> {
    let dims = rho0.dims();
    let d = dims.dim();
    if d > options.max_dim {
        return Err(Error::Capacity(format!(
            "oracle dimension {d} exceeds limit {}",
            options.max_dim
        )));
    }
    if h.dim() != d || jumps.iter().any(|j| j.op.dim() != d) {
        return Err(Error::InvalidDims("operator dimension mismatch".into()));
    }
    crate::trajectory::validate_sample_times(sample_times)?;
    if sample_times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("sample times must be >= 0".into()));
    }
    let mut sys = Lindblad {
        h_eff: effective_hamiltonian(h, jumps),
        jumps,
        a: vec![ZERO; d * d],
        b: vec![ZERO; d * d],
    };
    let n = d * d;
    let mut rho = rho0.clone();
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut stage = vec![ZERO; n];
    let mut t = 0.0;
    let mut h_step = options.dt_max;
    let mut out = Vec::with_capacity(sample_times.len());

    const A: [&[f64]; 6] = [
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    for &target in sample_times {
        while t < target {
            let remaining = target - t;
            let clipped = h_step >= remaining;
            let h = if clipped { remaining } else { h_step };
            sys.rhs(&rho.data, &mut k[0]);
            for (s, row) in A.iter().enumerate() {
                for i in 0..n {
                    let mut acc = ZERO;
                    for (j, a) in row.iter().enumerate() {
                        acc += k[j][i] * *a;
                    }
                    stage[i] = rho.data[i] + acc * h;
                }
                sys.rhs(&stage, &mut k[s + 1]);
            }
            let mut err = 0.0;
            let mut scale = 0.0;
            for i in 0..n {
                let mut acc = ZERO;
                for (j, e) in E.iter().enumerate() {
                    acc += k[j][i] * *e;
                }
                err += (acc * h).norm_sqr();
                scale += rho.data[i].norm_sqr();
            }
            let ratio = err.sqrt() / (options.tol * scale.sqrt().max(1e-300));
            if !ratio.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite error in oracle".into(),
                });
            }
            if ratio <= 1.0 {
                // The last stage holds the fifth-order solution.
                rho.data.copy_from_slice(&stage);
                rho.hermitize();
                t = if clipped { target } else { t + h };
                let proposal = next_step(h, ratio).min(options.dt_max);
                h_step = if clipped { h_step.max(proposal) } else { proposal };
            } else {
                h_step = next_step(h, ratio);
                if h_step < 1e-12 * t.max(1.0) {
                    return Err(Error::Integration {
                        t,
                        reason: "oracle step size underflow".into(),
                    });
                }
            }
        }
        out.push(rho.clone());
    }
    Ok(out)
}
