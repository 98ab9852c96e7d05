//! Truncated two-particle, two-mode Hilbert space.
//!
//! Basis states are `|n1, n2⟩ ⊗ |k_c⟩ ⊗ |k_s⟩`: particle momenta `n·ħk` with
//! `|n| ≤ n_max` and Fock occupancies of the cosine and sine cavity modes.
//! Flattening is row-major with `n1` slowest, then `n2`, `k_c` and `k_s`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Largest basis the model will allocate operators for.
pub const MAX_DIM: usize = 4_000_000;

/// Fraction of Gaussian weight allowed outside the momentum cutoff.
pub const TRUNCATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    /// Two degenerate standing-wave modes (cosine and sine).
    Ring,
    /// Single sine mode; the cosine mode is frozen in vacuum.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExchangeSymmetry {
    Boson,
    Fermion,
}

impl ExchangeSymmetry {
    /// Eigenvalue of the particle swap on states of this symmetry.
    pub fn sign(self) -> f64 {
        match self {
            ExchangeSymmetry::Boson => 1.0,
            ExchangeSymmetry::Fermion => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub n1: i32,
    pub n2: i32,
    pub k_c: usize,
    pub k_s: usize,
}

impl BasisIndex {
    pub fn new(n1: i32, n2: i32, k_c: usize, k_s: usize) -> Self {
        BasisIndex { n1, n2, k_c, k_s }
    }

    /// Particle momenta with both cavity modes in vacuum.
    pub fn vacuum(n1: i32, n2: i32) -> Self {
        BasisIndex::new(n1, n2, 0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertDims {
    n_max: i32,
    q_c: usize,
    q_s: usize,
    geometry: Geometry,
}

impl HilbertDims {
    pub fn new(n_max: i32, q_c: usize, q_s: usize, geometry: Geometry) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidDims(format!("n_max = {n_max}, need n_max >= 1")));
        }
        if q_s < 2 {
            return Err(Error::InvalidDims(format!("q_s = {q_s}, need q_s >= 2")));
        }
        match geometry {
            Geometry::Linear if q_c != 1 => {
                return Err(Error::InvalidDims(format!(
                    "linear geometry requires q_c = 1, got {q_c}"
                )))
            }
            Geometry::Ring if q_c < 2 => {
                return Err(Error::InvalidDims(format!(
                    "ring geometry requires q_c >= 2, got {q_c}"
                )))
            }
            _ => {}
        }
        let dims = HilbertDims {
            n_max,
            q_c,
            q_s,
            geometry,
        };
        let side = dims.momentum_count() as u128;
        let total = side * side * q_c as u128 * q_s as u128;
        if total > MAX_DIM as u128 {
            return Err(Error::Capacity(format!(
                "Hilbert space dimension {total} exceeds {MAX_DIM}"
            )));
        }
        Ok(dims)
    }

    pub fn ring(n_max: i32, q_c: usize, q_s: usize) -> Result<Self> {
        HilbertDims::new(n_max, q_c, q_s, Geometry::Ring)
    }

    pub fn linear(n_max: i32, q_s: usize) -> Result<Self> {
        HilbertDims::new(n_max, 1, q_s, Geometry::Linear)
    }

    /// Same momentum cutoff and sine-mode size in the other geometry. A ring
    /// built from a linear space gets a cosine mode as large as the sine mode.
    pub fn with_geometry(self, geometry: Geometry) -> Result<Self> {
        match geometry {
            Geometry::Linear => HilbertDims::linear(self.n_max, self.q_s),
            Geometry::Ring if self.geometry == Geometry::Ring => Ok(self),
            Geometry::Ring => HilbertDims::ring(self.n_max, self.q_s, self.q_s),
        }
    }

    pub fn n_max(&self) -> i32 {
        self.n_max
    }

    pub fn q_c(&self) -> usize {
        self.q_c
    }

    pub fn q_s(&self) -> usize {
        self.q_s
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Number of single-particle momentum states, `2·n_max + 1`.
    pub fn momentum_count(&self) -> usize {
        (2 * self.n_max + 1) as usize
    }

    pub fn photon_count(&self) -> usize {
        self.q_c * self.q_s
    }

    pub fn dim(&self) -> usize {
        let side = self.momentum_count();
        side * side * self.photon_count()
    }

    pub fn momenta(&self) -> core::ops::RangeInclusive<i32> {
        -self.n_max..=self.n_max
    }

    /// Position of momentum `n` in `momenta()`.
    #[inline]
    pub fn momentum_slot(&self, n: i32) -> usize {
        (n + self.n_max) as usize
    }

    #[inline]
    pub fn contains_momentum(&self, n: i32) -> bool {
        n.abs() <= self.n_max
    }

    /// Flattened index without bounds checks.
    #[inline]
    pub fn index(&self, n1: i32, n2: i32, k_c: usize, k_s: usize) -> usize {
        let side = self.momentum_count();
        ((self.momentum_slot(n1) * side + self.momentum_slot(n2)) * self.q_c + k_c) * self.q_s + k_s
    }

    pub fn flatten(&self, idx: BasisIndex) -> Result<usize> {
        if !self.contains_momentum(idx.n1) || !self.contains_momentum(idx.n2) {
            return Err(Error::Bounds(format!(
                "momenta ({}, {}) outside |n| <= {}",
                idx.n1, idx.n2, self.n_max
            )));
        }
        if idx.k_c >= self.q_c || idx.k_s >= self.q_s {
            return Err(Error::Bounds(format!(
                "occupancies ({}, {}) outside q_c = {}, q_s = {}",
                idx.k_c, idx.k_s, self.q_c, self.q_s
            )));
        }
        Ok(self.index(idx.n1, idx.n2, idx.k_c, idx.k_s))
    }

    pub fn unflatten(&self, i: usize) -> Result<BasisIndex> {
        if i >= self.dim() {
            return Err(Error::Bounds(format!("index {i} >= dimension {}", self.dim())));
        }
        Ok(self.unflatten_unchecked(i))
    }

    #[inline]
    pub fn unflatten_unchecked(&self, i: usize) -> BasisIndex {
        let side = self.momentum_count();
        let k_s = i % self.q_s;
        let rest = i / self.q_s;
        let k_c = rest % self.q_c;
        let rest = rest / self.q_c;
        let s2 = rest % side;
        let s1 = rest / side;
        BasisIndex {
            n1: s1 as i32 - self.n_max,
            n2: s2 as i32 - self.n_max,
            k_c,
            k_s,
        }
    }

    /// Index of the state with the two particle momenta exchanged.
    #[inline]
    pub fn swap_index(&self, i: usize) -> usize {
        let b = self.unflatten_unchecked(i);
        self.index(b.n2, b.n1, b.k_c, b.k_s)
    }
}

/// Stochastic wave function over the composite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: HilbertDims,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(dims: HilbertDims) -> Self {
        StateVector {
            dims,
            amplitudes: vec![Complex64::new(0.0, 0.0); dims.dim()],
        }
    }

    pub fn basis(dims: HilbertDims, idx: BasisIndex) -> Result<Self> {
        let mut psi = StateVector::zeros(dims);
        let i = dims.flatten(idx)?;
        psi.amplitudes[i] = Complex64::new(1.0, 0.0);
        Ok(psi)
    }

    pub fn from_amplitudes(dims: HilbertDims, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != dims.dim() {
            return Err(Error::InvalidDims(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                dims.dim()
            )));
        }
        Ok(StateVector { dims, amplitudes })
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, idx: BasisIndex) -> Result<Complex64> {
        Ok(self.amplitudes[self.dims.flatten(idx)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm. A zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            for a in &mut self.amplitudes {
                *a *= s;
            }
        }
    }

    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.normalize();
        out
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// The state with the two particle slots exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = StateVector::zeros(self.dims);
        for (i, a) in self.amplitudes.iter().enumerate() {
            out.amplitudes[self.dims.swap_index(i)] = *a;
        }
        out
    }

    /// Largest `|swap(ψ) − sign·ψ|` over components.
    pub fn exchange_violation(&self, sym: ExchangeSymmetry) -> f64 {
        let s = sym.sign();
        (0..self.amplitudes.len())
            .map(|i| (self.amplitudes[self.dims.swap_index(i)] - self.amplitudes[i] * s).norm())
            .fold(0.0, f64::max)
    }

    /// Keeps only components where both momenta are even and renormalizes.
    pub fn retain_even_momenta(&mut self) -> Result<()> {
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let b = self.dims.unflatten_unchecked(i);
            if b.n1 % 2 != 0 || b.n2 % 2 != 0 {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::Domain("state has no even-momentum component".into()));
        }
        self.normalize();
        Ok(())
    }
}

/// Classes of `(n1 mod 2, n2 mod 2)`. Each is invariant under the dynamics
/// and under particle exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParitySector {
    EvenEven,
    OddOdd,
    Mixed,
}

impl ParitySector {
    pub const ALL: [ParitySector; 3] = [ParitySector::EvenEven, ParitySector::OddOdd, ParitySector::Mixed];

    pub fn of(n1: i32, n2: i32) -> Self {
        match (n1 % 2 == 0, n2 % 2 == 0) {
            (true, true) => ParitySector::EvenEven,
            (false, false) => ParitySector::OddOdd,
            _ => ParitySector::Mixed,
        }
    }

    /// Position in `ALL` and in parity-fraction triples.
    pub fn slot(self) -> usize {
        self as usize
    }

    /// Ascending basis indices belonging to the sector.
    pub fn indices(self, dims: HilbertDims) -> Vec<usize> {
        (0..dims.dim())
            .filter(|&i| {
                let b = dims.unflatten_unchecked(i);
                ParitySector::of(b.n1, b.n2) == self
            })
            .collect()
    }
}

/// Normalized `(|n,m⟩ ± |m,n⟩)/√2` with both modes in vacuum.
pub fn symmetrize(n: i32, m: i32, sym: ExchangeSymmetry, dims: HilbertDims) -> Result<StateVector> {
    let mut psi = StateVector::zeros(dims);
    let a = dims.flatten(BasisIndex::vacuum(n, m))?;
    let b = dims.flatten(BasisIndex::vacuum(m, n))?;
    if n == m {
        return match sym {
            ExchangeSymmetry::Boson => {
                psi.amplitudes[a] = Complex64::new(1.0, 0.0);
                Ok(psi)
            }
            ExchangeSymmetry::Fermion => Err(Error::PauliExclusion(n)),
        };
    }
    psi.amplitudes[a] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    psi.amplitudes[b] = Complex64::new(sym.sign() * FRAC_1_SQRT_2, 0.0);
    Ok(psi)
}

/// Bosonic state `(|0,2⟩ + |2,0⟩ − |0,−2⟩ − |−2,0⟩)/2`, odd under reflection
/// `x → −x` and therefore decoupled from `|0,0⟩` in a linear cavity.
pub fn dark_state(dims: HilbertDims) -> Result<StateVector> {
    let mut psi = StateVector::zeros(dims);
    for (n1, n2, s) in [(0, 2, 0.5), (2, 0, 0.5), (0, -2, -0.5), (-2, 0, -0.5)] {
        let i = dims.flatten(BasisIndex::vacuum(n1, n2))?;
        psi.amplitudes[i] = Complex64::new(s, 0.0);
    }
    Ok(psi)
}

/// Unnormalized Gaussian momentum envelope `exp(−n²/(4σ²))`.
fn envelope(n: i32, width: f64) -> f64 {
    let n = n as f64;
    (-(n * n) / (4.0 * width * width)).exp()
}

/// Weight of the single-particle envelope outside `|n| ≤ n_max`.
pub fn truncated_weight(width: f64, n_max: i32) -> f64 {
    // The tail beyond 12σ is below 1e-30 of the total.
    let reach = n_max.max((12.0 * width).ceil() as i32 + 1);
    let mut inside = 0.0;
    let mut outside = 0.0;
    for n in -reach..=reach {
        let w = envelope(n, width).powi(2);
        if n.abs() <= n_max {
            inside += w;
        } else {
            outside += w;
        }
    }
    outside / (inside + outside)
}

/// Two-particle amplitudes of the (anti)symmetrized product of wave packets
/// centred at `kx = ±π/2`, before random phases, unnormalized. Indexed by
/// `(slot(n1), slot(n2))` row-major.
pub(crate) fn packet_amplitudes(
    sym: ExchangeSymmetry,
    width: f64,
    dims: HilbertDims,
) -> Result<Vec<Complex64>> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("width = {width}, need width > 0")));
    }
    let weight = truncated_weight(width, dims.n_max());
    if weight > TRUNCATION_TOLERANCE {
        return Err(Error::Truncation {
            weight,
            n_max: dims.n_max(),
        });
    }
    let side = dims.momentum_count();
    let single = |n: i32, centre: f64| -> Complex64 {
        Complex64::from_polar(envelope(n, width), -(n as f64) * centre)
    };
    let mut out = vec![Complex64::new(0.0, 0.0); side * side];
    for n in dims.momenta() {
        for m in dims.momenta() {
            let direct = single(n, PI / 2.0) * single(m, -PI / 2.0);
            let exchanged = single(n, -PI / 2.0) * single(m, PI / 2.0);
            let mut amp = direct + exchanged * sym.sign();
            // cos(π(n−m)/2) or sin(π(n−m)/2) vanishes exactly for the wrong
            // relative parity; keep it exactly zero.
            let allowed = match sym {
                ExchangeSymmetry::Boson => (n - m) % 2 == 0,
                ExchangeSymmetry::Fermion => (n - m) % 2 != 0,
            };
            if !allowed {
                amp = Complex64::new(0.0, 0.0);
            }
            out[dims.momentum_slot(n) * side + dims.momentum_slot(m)] = amp;
        }
    }
    Ok(out)
}

/// Random-phase initial state of one trajectory.
///
/// Each unordered momentum pair `{n, m}` gets a phase `θ` uniform in
/// `[0, 2π)`, shared by `|n,m⟩` and `|m,n⟩`, so the exchange symmetry is
/// exact. Both cavity modes start in vacuum.
pub fn initial_state<R: Rng + ?Sized>(
    sym: ExchangeSymmetry,
    width: f64,
    dims: HilbertDims,
    rng: &mut R,
) -> Result<StateVector> {
    let packet = packet_amplitudes(sym, width, dims)?;
    let side = dims.momentum_count();
    let mut psi = StateVector::zeros(dims);
    for s1 in 0..side {
        for s2 in s1..side {
            let theta = rng.gen::<f64>() * TAU;
            let phase = Complex64::from_polar(1.0, theta);
            let n1 = s1 as i32 - dims.n_max();
            let n2 = s2 as i32 - dims.n_max();
            psi.amplitudes[dims.index(n1, n2, 0, 0)] = packet[s1 * side + s2] * phase;
            psi.amplitudes[dims.index(n2, n1, 0, 0)] = packet[s2 * side + s1] * phase;
        }
    }
    psi.normalize();
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory_rng;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parity_sectors_partition_the_basis() {
        let d = HilbertDims::ring(3, 2, 2).unwrap();
        let mut seen = vec![0u8; d.dim()];
        for s in ParitySector::ALL {
            let idx = s.indices(d);
            for &i in &idx {
                seen[i] += 1;
                assert!(idx.binary_search(&d.swap_index(i)).is_ok());
            }
        }
        assert!(seen.iter().all(|&k| k == 1));
        // 3 even and 4 odd momenta, 4 photon states
        assert_eq!(ParitySector::EvenEven.indices(d).len(), 9 * 4);
        assert_eq!(ParitySector::OddOdd.indices(d).len(), 16 * 4);
        assert_eq!(ParitySector::Mixed.indices(d).len(), 24 * 4);
        assert_eq!(ParitySector::of(-3, 1), ParitySector::OddOdd);
    }

    #[test]
    fn flatten_endpoints() {
        let d = HilbertDims::ring(3, 2, 4).unwrap();
        assert_eq!(d.flatten(BasisIndex::new(-3, -3, 0, 0)).unwrap(), 0);
        assert_eq!(d.flatten(BasisIndex::new(3, 3, 1, 3)).unwrap(), d.dim() - 1);
        assert!(matches!(
            d.flatten(BasisIndex::new(4, 0, 0, 0)),
            Err(Error::Bounds(_))
        ));
        assert!(matches!(
            d.flatten(BasisIndex::new(0, 0, 2, 0)),
            Err(Error::Bounds(_))
        ));
        assert!(d.unflatten(d.dim()).is_err());
    }

    #[test]
    fn flatten_round_trip_small() {
        let d = HilbertDims::ring(2, 2, 2).unwrap();
        for i in 0..d.dim() {
            assert_eq!(d.flatten(d.unflatten(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn default_dimension_formula() {
        let d = HilbertDims::ring(8, 3, 3).unwrap();
        assert_eq!(d.dim(), 17 * 17 * 9);
        assert_eq!(HilbertDims::linear(8, 3).unwrap().dim(), 17 * 17 * 3);
    }

    #[test]
    fn dims_validation() {
        assert!(HilbertDims::ring(0, 2, 2).is_err());
        assert!(HilbertDims::ring(2, 2, 1).is_err());
        assert!(HilbertDims::ring(2, 1, 2).is_err());
        assert!(HilbertDims::new(2, 2, 2, Geometry::Linear).is_err());
        assert!(matches!(
            HilbertDims::ring(400, 10, 10),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn symmetrize_examples() {
        let d = HilbertDims::linear(3, 2).unwrap();
        let b = symmetrize(0, 2, ExchangeSymmetry::Boson, d).unwrap();
        let r = FRAC_1_SQRT_2;
        assert_eq!(b.amplitude(BasisIndex::vacuum(0, 2)).unwrap(), c(r, 0.0));
        assert_eq!(b.amplitude(BasisIndex::vacuum(2, 0)).unwrap(), c(r, 0.0));
        let f = symmetrize(1, 0, ExchangeSymmetry::Fermion, d).unwrap();
        assert_eq!(f.amplitude(BasisIndex::vacuum(1, 0)).unwrap(), c(r, 0.0));
        assert_eq!(f.amplitude(BasisIndex::vacuum(0, 1)).unwrap(), c(-r, 0.0));
        assert_eq!(
            symmetrize(1, 1, ExchangeSymmetry::Fermion, d),
            Err(Error::PauliExclusion(1))
        );
        let bb = symmetrize(1, 1, ExchangeSymmetry::Boson, d).unwrap();
        assert_eq!(bb.norm_sqr(), 1.0);
        assert!(symmetrize(4, 0, ExchangeSymmetry::Boson, d).is_err());
    }

    #[test]
    fn initial_state_support_by_parity() {
        let d = HilbertDims::linear(8, 2).unwrap();
        let mut rng = trajectory_rng(7);
        for sym in [ExchangeSymmetry::Boson, ExchangeSymmetry::Fermion] {
            let psi = initial_state(sym, 2.0, d, &mut rng).unwrap();
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
            assert!(psi.exchange_violation(sym) < 1e-15);
            let mut same_parity = 0.0;
            for (i, a) in psi.amplitudes().iter().enumerate() {
                let b = d.unflatten(i).unwrap();
                // brute-force support scan
                if (b.n1 - b.n2).rem_euclid(2) == 0 {
                    same_parity += a.norm_sqr();
                }
                if b.k_s != 0 {
                    assert_eq!(a.norm_sqr(), 0.0);
                }
            }
            match sym {
                ExchangeSymmetry::Boson => assert!((same_parity - 1.0).abs() < 1e-12),
                ExchangeSymmetry::Fermion => assert!(same_parity.abs() < 1e-12),
            }
        }
    }

    #[test]
    fn initial_state_truncation() {
        let d = HilbertDims::linear(3, 2).unwrap();
        let mut rng = trajectory_rng(1);
        assert!(matches!(
            initial_state(ExchangeSymmetry::Boson, 2.0, d, &mut rng),
            Err(Error::Truncation { .. })
        ));
        assert!(initial_state(ExchangeSymmetry::Boson, 0.0, d, &mut rng).is_err());
        assert!(initial_state(ExchangeSymmetry::Boson, 0.75, d, &mut rng).is_ok());
    }

    #[test]
    fn random_phases_remove_coherences() {
        // Monte Carlo estimate of the phase-averaged projector.
        let d = HilbertDims::linear(2, 2).unwrap();
        let side = d.momentum_count();
        let pairs = side * side;
        let draws = 10_000usize;
        let mut rng = trajectory_rng(99);
        let mut sum = vec![c(0.0, 0.0); pairs * pairs];
        let mut sum_sq = vec![(0.0, 0.0); pairs * pairs];
        for _ in 0..draws {
            let psi = initial_state(ExchangeSymmetry::Boson, 0.75, d, &mut rng).unwrap();
            let amps: Vec<Complex64> = (0..pairs).map(|p| psi.amplitudes()[p * d.photon_count()]).collect();
            for a in 0..pairs {
                for b in 0..pairs {
                    let v = amps[a] * amps[b].conj();
                    sum[a * pairs + b] += v;
                    let s = &mut sum_sq[a * pairs + b];
                    s.0 += v.re * v.re;
                    s.1 += v.im * v.im;
                }
            }
        }
        let nd = draws as f64;
        let mut checked = 0;
        for a in 0..pairs {
            for b in 0..pairs {
                let (a1, a2) = (a / side, a % side);
                let (b1, b2) = (b / side, b % side);
                let same_pair = (a1 == b1 && a2 == b2) || (a1 == b2 && a2 == b1);
                if same_pair {
                    continue;
                }
                let m = sum[a * pairs + b] / nd;
                let (sq_re, sq_im) = sum_sq[a * pairs + b];
                let se_re = ((sq_re / nd - m.re * m.re).max(0.0) / nd).sqrt();
                let se_im = ((sq_im / nd - m.im * m.im).max(0.0) / nd).sqrt();
                assert!(m.re.abs() <= 5.0 * se_re + 1e-15, "re {a},{b}: {} vs {}", m.re, se_re);
                assert!(m.im.abs() <= 5.0 * se_im + 1e-15, "im {a},{b}: {} vs {}", m.im, se_im);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn dark_state_is_normalized_boson() {
        let d = HilbertDims::ring(3, 2, 2).unwrap();
        let psi = dark_state(d).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(psi.exchange_violation(ExchangeSymmetry::Boson), 0.0);
    }

    #[test]
    fn even_only_projection() {
        let d = HilbertDims::linear(8, 2).unwrap();
        let mut psi = initial_state(ExchangeSymmetry::Boson, 2.0, d, &mut trajectory_rng(3)).unwrap();
        psi.retain_even_momenta().unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        for (i, a) in psi.amplitudes().iter().enumerate() {
            let b = d.unflatten(i).unwrap();
            if b.n1 % 2 != 0 {
                assert_eq!(*a, c(0.0, 0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn flatten_bijection(n_max in 1i32..5, q_c in 2usize..4, q_s in 2usize..4, ring in any::<bool>()) {
            let dims = if ring {
                HilbertDims::ring(n_max, q_c, q_s).unwrap()
            } else {
                HilbertDims::linear(n_max, q_s).unwrap()
            };
            prop_assert!(dims.dim() <= 10_000);
            for i in 0..dims.dim() {
                let b = dims.unflatten(i).unwrap();
                prop_assert_eq!(dims.flatten(b).unwrap(), i);
                prop_assert_eq!(dims.swap_index(dims.swap_index(i)), i);
            }
        }

        #[test]
        fn symmetrize_has_exchange_sign(n in -3i32..=3, m in -3i32..=3, fermion in any::<bool>()) {
            let dims = HilbertDims::ring(3, 2, 2).unwrap();
            let sym = if fermion { ExchangeSymmetry::Fermion } else { ExchangeSymmetry::Boson };
            match symmetrize(n, m, sym, dims) {
                Ok(psi) => {
                    prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
                    prop_assert_eq!(psi.exchange_violation(sym), 0.0);
                }
                Err(e) => {
                    prop_assert!(fermion && n == m);
                    prop_assert_eq!(e, Error::PauliExclusion(n));
                }
            }
        }
    }
}
