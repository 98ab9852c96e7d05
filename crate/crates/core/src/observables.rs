//! Observables of a pure state or density matrix.
//!
//! Every function normalizes by the trace, so results do not depend on the
//! norm or global phase of a wave function.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{ExchangeSymmetry, Geometry, HilbertDims, StateVector};

/// Below this momentum spread `C_p` is undefined.
pub const MIN_SPREAD: f64 = 1e-9;

/// Access to `ρ_ij` of a (possibly unnormalized) state.
pub trait QuantumState {
    fn dims(&self) -> HilbertDims;
    /// Diagonal element `ρ_ii`.
    fn population(&self, i: usize) -> f64;
    /// `ρ_ij`.
    fn element(&self, i: usize, j: usize) -> Complex64;
    fn trace(&self) -> f64 {
        (0..self.dims().dim()).map(|i| self.population(i)).sum()
    }
}

impl QuantumState for StateVector {
    fn dims(&self) -> HilbertDims {
        StateVector::dims(self)
    }

    fn population(&self, i: usize) -> f64 {
        self.amplitudes()[i].norm_sqr()
    }

    fn element(&self, i: usize, j: usize) -> Complex64 {
        let a = self.amplitudes();
        a[i] * a[j].conj()
    }

    fn trace(&self) -> f64 {
        self.norm_sqr()
    }
}

/// Joint momentum distribution `P(n1, n2)` summed over photon sectors,
/// row-major over `(slot(n1), slot(n2))`.
pub fn momentum_joint<S: QuantumState + ?Sized>(state: &S) -> Vec<f64> {
    let dims = state.dims();
    let photons = dims.photon_count();
    let side = dims.momentum_count();
    let norm = state.trace();
    let mut out = vec![0.0; side * side];
    for (pair, p) in out.iter_mut().enumerate() {
        let base = pair * photons;
        *p = (base..base + photons).map(|i| state.population(i)).sum::<f64>() / norm;
    }
    out
}

/// Single-particle marginal `P(n) = Σ_m [P(n,m) + P(m,n)]/2`.
pub fn marginal_from_joint(joint: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; side];
    for a in 0..side {
        for b in 0..side {
            let p = joint[a * side + b];
            out[a] += 0.5 * p;
            out[b] += 0.5 * p;
        }
    }
    out
}

pub fn momentum_marginal<S: QuantumState + ?Sized>(state: &S) -> Vec<f64> {
    marginal_from_joint(&momentum_joint(state), state.dims().momentum_count())
}

/// First and second moments of the two momenta.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentumMoments {
    pub mean1: f64,
    pub mean2: f64,
    pub sq1: f64,
    pub sq2: f64,
    pub cross: f64,
}

impl MomentumMoments {
    pub fn from_joint(joint: &[f64], dims: HilbertDims) -> Self {
        let side = dims.momentum_count();
        let mut m = MomentumMoments::default();
        for a in 0..side {
            let n = (a as i32 - dims.n_max()) as f64;
            for b in 0..side {
                let k = (b as i32 - dims.n_max()) as f64;
                let p = joint[a * side + b];
                m.mean1 += n * p;
                m.mean2 += k * p;
                m.sq1 += n * n * p;
                m.sq2 += k * k * p;
                m.cross += n * k * p;
            }
        }
        m
    }

    /// Normalized covariance, or `None` when either spread is below
    /// `MIN_SPREAD`.
    pub fn correlation(&self) -> Option<f64> {
        let v1 = self.sq1 - self.mean1 * self.mean1;
        let v2 = self.sq2 - self.mean2 * self.mean2;
        if !(v1 > 0.0 && v2 > 0.0) {
            return None;
        }
        let (s1, s2) = (v1.sqrt(), v2.sqrt());
        if s1 < MIN_SPREAD || s2 < MIN_SPREAD {
            return None;
        }
        Some(((self.cross - self.mean1 * self.mean2) / (s1 * s2)).clamp(-1.0, 1.0))
    }

    /// Kinetic energy per particle, `(⟨n1²⟩ + ⟨n2²⟩)/2`.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.sq1 + self.sq2)
    }
}

pub fn kinetic_energy<S: QuantumState + ?Sized>(state: &S) -> f64 {
    MomentumMoments::from_joint(&momentum_joint(state), state.dims()).kinetic_energy()
}

pub fn momentum_correlation<S: QuantumState + ?Sized>(state: &S) -> Option<f64> {
    MomentumMoments::from_joint(&momentum_joint(state), state.dims()).correlation()
}

/// Population of the motional ground manifold, summed over photon sectors.
///
/// Bosons: `|0,0⟩`. Fermions: `(|±1,0⟩ − |0,±1⟩)/√2`.
pub fn ground_state_projection<S: QuantumState + ?Sized>(state: &S, sym: ExchangeSymmetry) -> f64 {
    let dims = state.dims();
    let norm = state.trace();
    let mut total = 0.0;
    for k_c in 0..dims.q_c() {
        for k_s in 0..dims.q_s() {
            match sym {
                ExchangeSymmetry::Boson => {
                    total += state.population(dims.index(0, 0, k_c, k_s));
                }
                ExchangeSymmetry::Fermion => {
                    for s in [1, -1] {
                        let a = dims.index(s, 0, k_c, k_s);
                        let b = dims.index(0, s, k_c, k_s);
                        let v = state.population(a) + state.population(b)
                            - 2.0 * state.element(a, b).re;
                        total += 0.5 * v;
                    }
                }
            }
        }
    }
    total / norm
}

/// `⟨cos(2kx_i)⟩` for particle 1 and 2.
fn cos2kx<S: QuantumState + ?Sized>(state: &S) -> [f64; 2] {
    let dims = state.dims();
    let norm = state.trace();
    let mut out = [0.0; 2];
    for n1 in dims.momenta() {
        for n2 in dims.momenta() {
            for k_c in 0..dims.q_c() {
                for k_s in 0..dims.q_s() {
                    let here = dims.index(n1, n2, k_c, k_s);
                    if dims.contains_momentum(n1 + 2) {
                        out[0] += state.element(here, dims.index(n1 + 2, n2, k_c, k_s)).re;
                    }
                    if dims.contains_momentum(n2 + 2) {
                        out[1] += state.element(here, dims.index(n1, n2 + 2, k_c, k_s)).re;
                    }
                }
            }
        }
    }
    [out[0] / norm, out[1] / norm]
}

/// Bunching parameter `B = (⟨sin²(kx₁)⟩ + ⟨sin²(kx₂)⟩)/2`.
pub fn bunching_parameter<S: QuantumState + ?Sized>(state: &S) -> f64 {
    let [c1, c2] = cos2kx(state);
    0.5 * ((0.5 - 0.5 * c1) + (0.5 - 0.5 * c2))
}

/// `(even-even, odd-odd, mixed)` momentum-parity populations.
pub fn parity_fractions_from_joint(joint: &[f64], dims: HilbertDims) -> [f64; 3] {
    let side = dims.momentum_count();
    let mut out = [0.0; 3];
    for a in 0..side {
        let n_even = (a as i32 - dims.n_max()) % 2 == 0;
        for b in 0..side {
            let m_even = (b as i32 - dims.n_max()) % 2 == 0;
            let class = match (n_even, m_even) {
                (true, true) => 0,
                (false, false) => 1,
                _ => 2,
            };
            out[class] += joint[a * side + b];
        }
    }
    out
}

pub fn parity_fractions<S: QuantumState + ?Sized>(state: &S) -> [f64; 3] {
    parity_fractions_from_joint(&momentum_joint(state), state.dims())
}

/// Mean photon numbers `(⟨n̂_c⟩, ⟨n̂_s⟩)`.
pub fn photon_numbers<S: QuantumState + ?Sized>(state: &S) -> [f64; 2] {
    let dims = state.dims();
    let norm = state.trace();
    let mut out = [0.0; 2];
    for i in 0..dims.dim() {
        let b = dims.unflatten_unchecked(i);
        let p = state.population(i);
        out[0] += b.k_c as f64 * p;
        out[1] += b.k_s as f64 * p;
    }
    [out[0] / norm, out[1] / norm]
}

/// Effective temperature `4/ln(p0/p2)` in `E_R/k_B` from
/// `P₂/P₀ ≈ exp(−4E_R/k_B T)`.
///
/// `None` for `p2 = 0` (zero temperature) and for `p2 ≥ p0` (non-thermal
/// ordering).
pub fn effective_temperature(p0: f64, p2: f64) -> Result<Option<f64>> {
    if !(p0 > 0.0) {
        return Err(Error::Domain(alloc::format!("p0 = {p0}, need p0 > 0")));
    }
    if p2 < 0.0 {
        return Err(Error::Domain(alloc::format!("p2 = {p2}, need p2 >= 0")));
    }
    if p2 == 0.0 || p2 >= p0 {
        return Ok(None);
    }
    Ok(Some(4.0 / (p0 / p2).ln()))
}

/// Pooled `(P(0), P(2) + P(−2))` from a single-particle marginal.
pub fn temperature_populations(p_single: &[f64], dims: HilbertDims) -> (f64, f64) {
    let p = |n: i32| {
        if dims.contains_momentum(n) {
            p_single[dims.momentum_slot(n)]
        } else {
            0.0
        }
    };
    (p(0), p(2) + p(-2))
}

fn temperature_or_undefined(p_single: &[f64], dims: HilbertDims) -> Option<f64> {
    let (p0, p2) = temperature_populations(p_single, dims);
    effective_temperature(p0, p2.max(0.0)).ok().flatten()
}

/// Population with either momentum on the cutoff `|n| = n_max`.
pub fn boundary_population(joint: &[f64], dims: HilbertDims) -> f64 {
    let side = dims.momentum_count();
    let mut total = 0.0;
    for a in 0..side {
        for b in 0..side {
            if a == 0 || b == 0 || a == side - 1 || b == side - 1 {
                total += joint[a * side + b];
            }
        }
    }
    total
}

/// Population in the highest Fock level of any active mode.
pub fn top_fock_population<S: QuantumState + ?Sized>(state: &S) -> f64 {
    let dims = state.dims();
    let norm = state.trace();
    let ring = dims.geometry() == Geometry::Ring;
    let mut total = 0.0;
    for i in 0..dims.dim() {
        let b = dims.unflatten_unchecked(i);
        if b.k_s == dims.q_s() - 1 || (ring && b.k_c == dims.q_c() - 1) {
            total += state.population(i);
        }
    }
    total / norm
}

/// Every reported quantity at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub e_kin: f64,
    pub p_single: Vec<f64>,
    pub p_joint: Vec<f64>,
    pub moments: MomentumMoments,
    pub c_p: Option<f64>,
    pub p_ground: f64,
    pub parity_fracs: [f64; 3],
    pub n_photons: [f64; 2],
    pub bunching: f64,
    pub t_eff: Option<f64>,
    pub boundary_population: f64,
    pub top_fock_population: f64,
}

/// Number of scalar entries before the distributions in `to_linear`.
const SCALARS: usize = 15;

impl ObservableRecord {
    pub fn from_state<S: QuantumState + ?Sized>(state: &S, sym: ExchangeSymmetry) -> Self {
        let dims = state.dims();
        let p_joint = momentum_joint(state);
        let p_single = marginal_from_joint(&p_joint, dims.momentum_count());
        let moments = MomentumMoments::from_joint(&p_joint, dims);
        ObservableRecord {
            e_kin: moments.kinetic_energy(),
            c_p: moments.correlation(),
            t_eff: temperature_or_undefined(&p_single, dims),
            parity_fracs: parity_fractions_from_joint(&p_joint, dims),
            boundary_population: boundary_population(&p_joint, dims),
            p_ground: ground_state_projection(state, sym),
            n_photons: photon_numbers(state),
            bunching: bunching_parameter(state),
            top_fock_population: top_fock_population(state),
            moments,
            p_single,
            p_joint,
        }
    }

    /// Length of the vector produced by `to_linear`.
    pub fn linear_len(dims: HilbertDims) -> usize {
        let side = dims.momentum_count();
        SCALARS + side + side * side
    }

    /// Quantities that are linear in the density matrix, flattened. `c_p`
    /// and `t_eff` are not included; they follow from these entries.
    pub fn to_linear(&self, out: &mut Vec<f64>) {
        let m = &self.moments;
        out.extend_from_slice(&[
            self.e_kin,
            self.p_ground,
            self.bunching,
            self.n_photons[0],
            self.n_photons[1],
            self.parity_fracs[0],
            self.parity_fracs[1],
            self.parity_fracs[2],
            m.mean1,
            m.mean2,
            m.sq1,
            m.sq2,
            m.cross,
            self.boundary_population,
            self.top_fock_population,
        ]);
        out.extend_from_slice(&self.p_single);
        out.extend_from_slice(&self.p_joint);
    }

    /// Inverse of `to_linear`, deriving `c_p` and `t_eff` from the entries.
    pub fn from_linear(dims: HilbertDims, v: &[f64]) -> Self {
        assert_eq!(v.len(), Self::linear_len(dims));
        let side = dims.momentum_count();
        let moments = MomentumMoments {
            mean1: v[8],
            mean2: v[9],
            sq1: v[10],
            sq2: v[11],
            cross: v[12],
        };
        let p_single = v[SCALARS..SCALARS + side].to_vec();
        ObservableRecord {
            e_kin: v[0],
            p_ground: v[1],
            bunching: v[2],
            n_photons: [v[3], v[4]],
            parity_fracs: [v[5], v[6], v[7]],
            c_p: moments.correlation(),
            t_eff: temperature_or_undefined(&p_single, dims),
            moments,
            boundary_population: v[13],
            top_fock_population: v[14],
            p_single,
            p_joint: v[SCALARS + side..].to_vec(),
        }
    }

    /// Names of the entries of `to_linear`.
    pub fn linear_names(dims: HilbertDims) -> Vec<alloc::string::String> {
        use alloc::string::ToString;
        let mut names: Vec<alloc::string::String> = [
            "e_kin", "p_ground", "bunching", "n_c", "n_s", "parity_ee", "parity_oo", "parity_mixed",
            "mean_p1", "mean_p2", "mean_p1_sq", "mean_p2_sq", "mean_p1p2", "boundary_population",
            "top_fock_population",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for n in dims.momenta() {
            names.push(alloc::format!("p_single[{n}]"));
        }
        for n in dims.momenta() {
            for m in dims.momenta() {
                names.push(alloc::format!("p_joint[{n},{m}]"));
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{initial_state, symmetrize, BasisIndex};
    use crate::trajectory_rng;
    use core::f64::consts::FRAC_1_SQRT_2;
    use proptest::prelude::*;

    fn dims() -> HilbertDims {
        HilbertDims::ring(3, 2, 2).unwrap()
    }

    fn superpose(terms: &[(i32, i32, f64)]) -> StateVector {
        let d = dims();
        let mut psi = StateVector::zeros(d);
        for &(n, m, a) in terms {
            psi.amplitudes_mut()[d.flatten(BasisIndex::vacuum(n, m)).unwrap()] += Complex64::new(a, 0.0);
        }
        psi
    }

    fn slot(n: i32) -> usize {
        dims().momentum_slot(n)
    }

    #[test]
    fn kinetic_energy_examples() {
        let d = dims();
        let b = ExchangeSymmetry::Boson;
        assert_eq!(kinetic_energy(&superpose(&[(0, 0, 1.0)])), 0.0);
        let two = symmetrize(2, 0, b, d).unwrap();
        assert!((kinetic_energy(&two) - 2.0).abs() < 1e-15);
        let f = symmetrize(1, 0, ExchangeSymmetry::Fermion, d).unwrap();
        assert!((kinetic_energy(&f) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_examples() {
        let p = momentum_marginal(&superpose(&[(1, 1, 1.0)]));
        assert_eq!(p[slot(1)], 1.0);
        let f = momentum_marginal(&symmetrize(1, 0, ExchangeSymmetry::Fermion, dims()).unwrap());
        assert!((f[slot(0)] - 0.5).abs() < 1e-15);
        assert!((f[slot(1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn correlation_examples() {
        let r = FRAC_1_SQRT_2;
        let plus = superpose(&[(1, 1, r), (-1, -1, r)]);
        assert!((momentum_correlation(&plus).unwrap() - 1.0).abs() < 1e-12);
        let minus = superpose(&[(1, -1, r), (-1, 1, -r)]);
        assert!((momentum_correlation(&minus).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(momentum_correlation(&superpose(&[(0, 0, 1.0)])), None);
        // product state φ⊗φ with φ = (|−1⟩ + 2|0⟩ + |2⟩)/√6
        let phi = [(-1, 1.0), (0, 2.0), (2, 1.0)];
        let mut terms = Vec::new();
        for (n, a) in phi {
            for (m, b) in phi {
                terms.push((n, m, a * b / 6.0));
            }
        }
        assert!(momentum_correlation(&superpose(&terms)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ground_projection_examples() {
        let d = dims();
        assert_eq!(ground_state_projection(&superpose(&[(0, 0, 1.0)]), ExchangeSymmetry::Boson), 1.0);
        let f = symmetrize(1, 0, ExchangeSymmetry::Fermion, d).unwrap();
        assert!((ground_state_projection(&f, ExchangeSymmetry::Fermion) - 1.0).abs() < 1e-15);
        let f2 = symmetrize(-1, 0, ExchangeSymmetry::Fermion, d).unwrap();
        assert!((ground_state_projection(&f2, ExchangeSymmetry::Fermion) - 1.0).abs() < 1e-15);
        let b = symmetrize(2, 0, ExchangeSymmetry::Boson, d).unwrap();
        assert_eq!(ground_state_projection(&b, ExchangeSymmetry::Boson), 0.0);
        // photon sectors are summed
        let mut p = StateVector::basis(d, BasisIndex::new(0, 0, 1, 1)).unwrap();
        p.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
        assert_eq!(ground_state_projection(&p, ExchangeSymmetry::Boson), 1.0);
    }

    #[test]
    fn bunching_examples() {
        assert_eq!(bunching_parameter(&superpose(&[(3, -1, 1.0)])), 0.5);
        let r = FRAC_1_SQRT_2;
        // particle 1 in (|0⟩ + |2⟩)/√2, particle 2 in |0⟩ (distinguishable product)
        let psi = superpose(&[(0, 0, r), (2, 0, r)]);
        assert!((bunching_parameter(&psi) - 0.375).abs() < 1e-15);
        assert!((cos2kx(&psi)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn temperature_examples() {
        let e = |x: f64| x.exp();
        assert!((effective_temperature(1.0, e(-4.0)).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!((effective_temperature(0.3, 0.3 * e(-8.0)).unwrap().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(effective_temperature(0.5, 0.0).unwrap(), None);
        assert_eq!(effective_temperature(0.2, 0.3).unwrap(), None);
        assert!(matches!(effective_temperature(0.0, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn parity_examples() {
        let r = FRAC_1_SQRT_2;
        let f = parity_fractions(&superpose(&[(0, 0, r), (1, 1, r)]));
        assert!((f[0] - 0.5).abs() < 1e-15 && (f[1] - 0.5).abs() < 1e-15 && f[2] == 0.0);
        let d = HilbertDims::ring(8, 2, 2).unwrap();
        let mut rng = trajectory_rng(4);
        let b = initial_state(ExchangeSymmetry::Boson, 2.0, d, &mut rng).unwrap();
        assert!(parity_fractions(&b)[2] < 1e-12);
        let f = initial_state(ExchangeSymmetry::Fermion, 2.0, d, &mut rng).unwrap();
        let pf = parity_fractions(&f);
        assert!(pf[0] < 1e-12 && pf[1] < 1e-12);
    }

    #[test]
    fn linear_round_trip_recomputes_derived() {
        let d = HilbertDims::ring(4, 2, 2).unwrap();
        let psi = initial_state(ExchangeSymmetry::Boson, 1.2, d, &mut trajectory_rng(2)).unwrap();
        let rec = ObservableRecord::from_state(&psi, ExchangeSymmetry::Boson);
        let mut v = Vec::new();
        rec.to_linear(&mut v);
        assert_eq!(v.len(), ObservableRecord::linear_len(d));
        assert_eq!(ObservableRecord::linear_names(d).len(), v.len());
        assert_eq!(ObservableRecord::from_linear(d, &v), rec);
    }

    fn random_state(seed: u64, fermion: bool) -> (StateVector, ExchangeSymmetry) {
        let d = HilbertDims::ring(3, 2, 2).unwrap();
        let sym = if fermion { ExchangeSymmetry::Fermion } else { ExchangeSymmetry::Boson };
        let mut rng = trajectory_rng(seed);
        use rand::Rng;
        let mut psi = StateVector::zeros(d);
        for i in 0..d.dim() {
            psi.amplitudes_mut()[i] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        // (anti)symmetrize
        let sw = psi.swapped();
        for (a, b) in psi.amplitudes_mut().iter_mut().zip(sw.amplitudes()) {
            *a = (*a + b * sym.sign()) * 0.5;
        }
        psi.normalize();
        (psi, sym)
    }

    proptest! {
        #[test]
        fn record_invariants(seed in any::<u64>(), fermion in any::<bool>(), phase in 0.0f64..6.28, scale in 0.1f64..3.0) {
            let (psi, sym) = random_state(seed, fermion);
            let d = psi.dims();
            let rec = ObservableRecord::from_state(&psi, sym);
            let mut other = psi.clone();
            for a in other.amplitudes_mut() {
                *a *= Complex64::from_polar(scale, phase);
            }
            let rec2 = ObservableRecord::from_state(&other, sym);
            let mut v1 = Vec::new();
            let mut v2 = Vec::new();
            rec.to_linear(&mut v1);
            rec2.to_linear(&mut v2);
            for (a, b) in v1.iter().zip(&v2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((rec.p_single.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!((rec.p_joint.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            let side = d.momentum_count();
            for a in 0..side {
                for b in 0..side {
                    prop_assert!((rec.p_joint[a * side + b] - rec.p_joint[b * side + a]).abs() < 1e-14);
                }
                if fermion {
                    prop_assert!(rec.p_joint[a * side + a] < 1e-8);
                }
            }
            if let Some(c) = rec.c_p {
                prop_assert!((-1.0..=1.0).contains(&c));
            }
            prop_assert!((rec.moments.mean1 - rec.moments.mean2).abs() < 1e-12);
            prop_assert!((rec.moments.sq1 - rec.moments.sq2).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&rec.p_ground));
            let pf: f64 = rec.parity_fracs.iter().sum();
            prop_assert!((pf - 1.0).abs() < 1e-12);
            // ⟨sin²⟩ + ⟨cos²⟩ = 1 via the operator identity
            let [c1, _] = cos2kx(&psi);
            let sin_sq = 0.5 - 0.5 * c1;
            let cos_sq = 0.5 + 0.5 * c1;
            prop_assert!((sin_sq + cos_sq - 1.0).abs() < 1e-15);
        }
    }
}
