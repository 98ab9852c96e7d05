//! Single-particle trigonometric operators and cavity ladder operators,
//! embedded in the composite basis.
//!
//! In the plane-wave basis `e^{±2ikx}|n⟩ = |n±2⟩`, so
//! `⟨n±2|cos 2kx|n⟩ = 1/2`, `⟨n+2|sin 2kx|n⟩ = −i/2` and
//! `⟨n−2|sin 2kx|n⟩ = +i/2`. Couplings leaving `|n| ≤ n_max` are dropped.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::hilbert::HilbertDims;
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Cos2kx,
    Sin2kx,
    CosSq,
    SinSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cosine,
    Sine,
}

/// Single-particle matrix elements `(Δn, value)` for `⟨n+Δn|op|n⟩`.
fn single_particle_elements(kind: TrigKind) -> &'static [(i32, Complex64)] {
    const HALF: Complex64 = Complex64::new(0.5, 0.0);
    const QUARTER: Complex64 = Complex64::new(0.25, 0.0);
    const NEG_QUARTER: Complex64 = Complex64::new(-0.25, 0.0);
    const UP: Complex64 = Complex64::new(0.0, -0.5);
    const DOWN: Complex64 = Complex64::new(0.0, 0.5);
    match kind {
        TrigKind::Cos2kx => &[(2, HALF), (-2, HALF)],
        TrigKind::Sin2kx => &[(2, UP), (-2, DOWN)],
        TrigKind::CosSq => &[(0, HALF), (2, QUARTER), (-2, QUARTER)],
        TrigKind::SinSq => &[(0, HALF), (2, NEG_QUARTER), (-2, NEG_QUARTER)],
    }
}

pub fn build_trig_operator(kind: TrigKind, particle: Particle, dims: HilbertDims) -> SparseOperator {
    let elements = single_particle_elements(kind);
    let mut entries = Vec::with_capacity(dims.dim() * elements.len());
    for col in 0..dims.dim() {
        let b = dims.unflatten_unchecked(col);
        for &(shift, value) in elements {
            let (n1, n2) = match particle {
                Particle::First => (b.n1 + shift, b.n2),
                Particle::Second => (b.n1, b.n2 + shift),
            };
            if dims.contains_momentum(n1) && dims.contains_momentum(n2) {
                entries.push((dims.index(n1, n2, b.k_c, b.k_s), col, value));
            }
        }
    }
    SparseOperator::from_triplets(dims.dim(), entries)
}

/// Annihilation operator `a|q⟩ = √q |q−1⟩` of one cavity mode.
pub fn annihilation(mode: Mode, dims: HilbertDims) -> SparseOperator {
    let mut entries = Vec::new();
    for col in 0..dims.dim() {
        let b = dims.unflatten_unchecked(col);
        let q = match mode {
            Mode::Cosine => b.k_c,
            Mode::Sine => b.k_s,
        };
        if q == 0 {
            continue;
        }
        let row = match mode {
            Mode::Cosine => dims.index(b.n1, b.n2, b.k_c - 1, b.k_s),
            Mode::Sine => dims.index(b.n1, b.n2, b.k_c, b.k_s - 1),
        };
        entries.push((row, col, Complex64::new((q as f64).sqrt(), 0.0)));
    }
    SparseOperator::from_triplets(dims.dim(), entries)
}

/// Photon number `a†a` of one mode, built diagonally.
pub fn number(mode: Mode, dims: HilbertDims) -> SparseOperator {
    let diag: Vec<Complex64> = (0..dims.dim())
        .map(|i| {
            let b = dims.unflatten_unchecked(i);
            let q = match mode {
                Mode::Cosine => b.k_c,
                Mode::Sine => b.k_s,
            };
            Complex64::new(q as f64, 0.0)
        })
        .collect();
    SparseOperator::from_diagonal(&diag)
}

/// Kinetic energy `n1² + n2²` in recoil units.
pub fn kinetic(dims: HilbertDims) -> SparseOperator {
    let diag: Vec<Complex64> = (0..dims.dim())
        .map(|i| {
            let b = dims.unflatten_unchecked(i);
            Complex64::new((b.n1 * b.n1 + b.n2 * b.n2) as f64, 0.0)
        })
        .collect();
    SparseOperator::from_diagonal(&diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{BasisIndex, HilbertDims};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn at(op: &SparseOperator, dims: HilbertDims, row: BasisIndex, col: BasisIndex) -> Complex64 {
        op.get(dims.flatten(row).unwrap(), dims.flatten(col).unwrap())
    }

    #[test]
    fn plane_wave_matrix_elements() {
        let d = HilbertDims::linear(4, 2).unwrap();
        let cos = build_trig_operator(TrigKind::Cos2kx, Particle::First, d);
        let sin = build_trig_operator(TrigKind::Sin2kx, Particle::First, d);
        let (n0, n2) = (BasisIndex::vacuum(0, 1), BasisIndex::vacuum(2, 1));
        assert_eq!(at(&cos, d, n2, n0), c(0.5, 0.0));
        assert_eq!(at(&sin, d, n2, n0), c(0.0, -0.5));
        assert_eq!(at(&sin, d, n0, n2), c(0.0, 0.5));
        // second particle slot
        let sin2 = build_trig_operator(TrigKind::Sin2kx, Particle::Second, d);
        assert_eq!(at(&sin2, d, BasisIndex::vacuum(0, 3), BasisIndex::vacuum(0, 1)), c(0.0, -0.5));
        assert_eq!(at(&sin2, d, n2, n0), c(0.0, 0.0));
    }

    #[test]
    fn sin_squared_rows() {
        let d = HilbertDims::linear(4, 2).unwrap();
        let s = build_trig_operator(TrigKind::SinSq, Particle::First, d);
        for i in 0..d.dim() {
            assert_eq!(s.get(i, i), c(0.5, 0.0));
            let b = d.unflatten(i).unwrap();
            let off: f64 = s.row(i).filter(|e| e.0 != i).map(|e| e.1.norm()).sum();
            let sides = [b.n1 + 2, b.n1 - 2].iter().filter(|n| n.abs() <= 4).count();
            assert_eq!(off, 0.25 * sides as f64);
        }
    }

    #[test]
    fn open_truncation_drops_edge_couplings() {
        let d = HilbertDims::linear(2, 2).unwrap();
        let cos = build_trig_operator(TrigKind::Cos2kx, Particle::First, d);
        let edge = d.flatten(BasisIndex::vacuum(2, 0)).unwrap();
        // only the coupling to n = 0 survives
        assert_eq!(cos.row(edge).count(), 1);
    }

    #[test]
    fn ladder_algebra() {
        let d = HilbertDims::ring(1, 3, 3).unwrap();
        let a_s = annihilation(Mode::Sine, d);
        let two = StateIdx(d, BasisIndex::new(0, 0, 0, 2));
        let out = a_s.apply_vec(&two.vector());
        let one = d.flatten(BasisIndex::new(0, 0, 0, 1)).unwrap();
        assert_eq!(out[one], c(2f64.sqrt(), 0.0));
        assert_eq!(out.iter().filter(|v| v.norm() > 0.0).count(), 1);
        let vac = StateIdx(d, BasisIndex::new(0, 0, 0, 0));
        assert!(a_s.apply_vec(&vac.vector()).iter().all(|v| *v == c(0.0, 0.0)));
        let n = a_s.adjoint().compose(&a_s);
        assert!(n.max_abs_diff(&number(Mode::Sine, d)) < 1e-15);
    }

    struct StateIdx(HilbertDims, BasisIndex);

    impl StateIdx {
        fn vector(&self) -> Vec<Complex64> {
            let mut v = alloc::vec![c(0.0, 0.0); self.0.dim()];
            v[self.0.flatten(self.1).unwrap()] = c(1.0, 0.0);
            v
        }
    }

    proptest! {
        #[test]
        fn trig_operators_hermitian_and_complementary(n_max in 1i32..6, second in any::<bool>()) {
            let d = HilbertDims::ring(n_max, 2, 2).unwrap();
            let p = if second { Particle::Second } else { Particle::First };
            for kind in [TrigKind::Cos2kx, TrigKind::Sin2kx, TrigKind::CosSq, TrigKind::SinSq] {
                prop_assert!(build_trig_operator(kind, p, d).is_hermitian());
            }
            let sum = build_trig_operator(TrigKind::CosSq, p, d)
                .add(&build_trig_operator(TrigKind::SinSq, p, d));
            prop_assert_eq!(sum, SparseOperator::identity(d.dim()));
        }
    }
}
