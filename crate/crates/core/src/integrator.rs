//! Adaptive Dormand–Prince 5(4) for `dψ/dt = −i H_eff ψ`, taken in the
//! interaction picture of the diagonal of `H_eff`.
//!
//! Split `H_eff = D + V` with `D` diagonal. Within a step starting at `t0`,
//! `φ(τ) = e^{iDτ} ψ(t0 + τ)` obeys `φ' = −i e^{iDτ} V e^{−iDτ} φ`. The free
//! evolution (kinetic phases, photon detuning and cavity damping) is then
//! exact and the step size is set by the couplings only.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::sparse::SparseOperator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
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

/// Splitting of a non-Hermitian generator into diagonal and coupling parts.
///
/// Diagonal entries take few distinct values (kinetic energies times photon
/// sectors), so phase factors are tabulated per distinct value.
#[derive(Debug, Clone)]
pub struct InteractionPicture {
    coupling: SparseOperator,
    levels: Vec<Complex64>,
    level_of: Vec<u32>,
}

impl InteractionPicture {
    pub fn new(generator: &SparseOperator) -> Self {
        let diag = generator.diagonal();
        let key = |z: &Complex64| (z.re.to_bits(), z.im.to_bits());
        let mut levels = diag.clone();
        levels.sort_unstable_by_key(key);
        levels.dedup_by_key(|z| key(z));
        let level_of = diag
            .iter()
            .map(|z| levels.binary_search_by_key(&key(z), key).unwrap() as u32)
            .collect();
        InteractionPicture {
            coupling: generator.off_diagonal(),
            levels,
            level_of,
        }
    }

    pub fn dim(&self) -> usize {
        self.level_of.len()
    }

    pub fn coupling(&self) -> &SparseOperator {
        &self.coupling
    }

    /// Table of `e^{−i d τ}` per distinct diagonal value `d`.
    fn phase_table(&self, tau: f64, out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(self.levels.iter().map(|d| (Complex64::new(0.0, -tau) * d).exp()));
    }

    /// `out = e^{−iDτ} x` elementwise using a table from `phase_table`.
    fn rotate(&self, table: &[Complex64], x: &[Complex64], out: &mut [Complex64]) {
        for ((o, v), &l) in out.iter_mut().zip(x).zip(&self.level_of) {
            *o = table[l as usize] * v;
        }
    }

    fn rotate_in_place(&self, table: &[Complex64], x: &mut [Complex64]) {
        for (v, &l) in x.iter_mut().zip(&self.level_of) {
            *v *= table[l as usize];
        }
    }

    /// `e^{−iDτ} ψ` for an arbitrary `τ`.
    pub fn free_evolution(&self, tau: f64, psi: &mut [Complex64]) {
        let mut table = Vec::new();
        self.phase_table(tau, &mut table);
        self.rotate_in_place(&table, psi);
    }
}

/// Outcome of one attempted step.
#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    /// Error estimate relative to the tolerance; accept when `≤ 1`.
    pub error_ratio: f64,
    pub norm_sqr: f64,
}

/// Reusable Dormand–Prince workspace.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    rotated: Vec<Complex64>,
    applied: Vec<Complex64>,
    forward: Vec<Complex64>,
    backward: Vec<Complex64>,
    /// Candidate state in the Schrödinger frame after the last `try_step`.
    pub candidate: Vec<Complex64>,
    /// Derivative `−iVψ` at the candidate, valid after `try_step`.
    pub candidate_slope: Vec<Complex64>,
}

impl Dopri5 {
    pub fn new(dim: usize) -> Self {
        let z = || vec![ZERO; dim];
        Dopri5 {
            k: [z(), z(), z(), z(), z(), z(), z()],
            stage: z(),
            rotated: z(),
            applied: z(),
            forward: Vec::new(),
            backward: Vec::new(),
            candidate: z(),
            candidate_slope: z(),
        }
    }

    /// `−iVψ`, the interaction-picture derivative at `τ = 0`.
    pub fn slope(ip: &InteractionPicture, psi: &[Complex64], out: &mut [Complex64]) {
        ip.coupling.apply(psi, out);
        for v in out.iter_mut() {
            *v = Complex64::new(v.im, -v.re);
        }
    }

    /// Evaluates `k = e^{iDτ}(−iV)(e^{−iDτ} y)` at the tabulated `τ`.
    fn eval(&mut self, ip: &InteractionPicture, slot: usize) {
        ip.rotate(&self.forward, &self.stage, &mut self.rotated);
        ip.coupling.apply(&self.rotated, &mut self.applied);
        let k = &mut self.k[slot];
        for ((o, a), &l) in k.iter_mut().zip(&self.applied).zip(&ip.level_of) {
            *o = self.backward[l as usize] * Complex64::new(a.im, -a.re);
        }
    }

    fn tables(&mut self, ip: &InteractionPicture, tau: f64) {
        ip.phase_table(tau, &mut self.forward);
        ip.phase_table(-tau, &mut self.backward);
    }

    /// Attempts a step of size `h` from `psi` with starting slope `slope`
    /// (`−iVψ`). The candidate state and its slope are left in
    /// `self.candidate` and `self.candidate_slope`.
    pub fn try_step(
        &mut self,
        ip: &InteractionPicture,
        psi: &[Complex64],
        slope: &[Complex64],
        h: f64,
        tol: f64,
    ) -> StepResult {
        self.k[0].copy_from_slice(slope);
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, row) in rows.iter().enumerate() {
            let slot = s + 1;
            for (i, y) in self.stage.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (j, a) in row.iter().enumerate() {
                    acc += self.k[j][i] * *a;
                }
                *y = psi[i] + acc * h;
            }
            self.tables(ip, C[slot] * h);
            self.eval(ip, slot);
        }
        // Fifth-order solution in the interaction frame.
        for (i, y) in self.stage.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (j, b) in B.iter().enumerate() {
                if *b != 0.0 {
                    acc += self.k[j][i] * *b;
                }
            }
            *y = psi[i] + acc * h;
        }
        // C[6] = C[5] = 1: the forward/backward tables are still valid.
        self.eval(ip, 6);

        let mut err_sqr = 0.0;
        let mut psi_sqr = 0.0;
        for i in 0..psi.len() {
            let mut acc = ZERO;
            for (j, e) in E.iter().enumerate() {
                if *e != 0.0 {
                    acc += self.k[j][i] * *e;
                }
            }
            err_sqr += (acc * h).norm_sqr();
            psi_sqr += psi[i].norm_sqr();
        }

        ip.rotate(&self.forward, &self.stage, &mut self.candidate);
        ip.rotate(&self.forward, &self.k[6], &mut self.candidate_slope);
        let norm_sqr = self.candidate.iter().map(|v| v.norm_sqr()).sum();
        let scale = tol * psi_sqr.sqrt();
        StepResult {
            error_ratio: if scale > 0.0 { err_sqr.sqrt() / scale } else { 0.0 },
            norm_sqr,
        }
    }
}

/// Step-size update for an error ratio from a fifth-order pair.
pub fn next_step(h: f64, error_ratio: f64) -> f64 {
    let factor = if error_ratio == 0.0 {
        5.0
    } else {
        (0.9 * error_ratio.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}
