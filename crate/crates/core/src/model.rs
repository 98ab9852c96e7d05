//! Hamiltonian, photon-loss channels and the non-Hermitian effective
//! Hamiltonian of two particles coupled to a driven cavity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hilbert::{Geometry, HilbertDims, MAX_DIM};
use crate::operators::{self, build_trig_operator, Mode, Particle, TrigKind};
use crate::sparse::SparseOperator;

/// Light shift per photon `u0` and field decay rate `κ`, both in `ω_R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub u0: f64,
    pub kappa: f64,
}

impl PhysicalParams {
    /// `u0 = 0` is accepted so that empty-cavity dynamics can be checked.
    pub fn new(u0: f64, kappa: f64) -> Result<Self> {
        if !u0.is_finite() || u0 > 0.0 {
            return Err(Error::InvalidParameter(format!("u0 = {u0}, need u0 <= 0")));
        }
        if !kappa.is_finite() || !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa}, need kappa > 0")));
        }
        Ok(PhysicalParams { u0, kappa })
    }

    /// Linewidth below the smallest two-photon recoil transfer, `κ < 4 ω_R`.
    pub fn is_subrecoil(&self) -> bool {
        self.kappa < 4.0
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            u0: -2.5,
            kappa: 0.25,
        }
    }
}

/// Pump strength `η` and pump–cavity detuning `Δ_c`, in `ω_R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub eta: f64,
    pub delta_c: f64,
}

impl DriveParams {
    pub fn new(eta: f64, delta_c: f64) -> Result<Self> {
        if !eta.is_finite() || !delta_c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drive (eta = {eta}, delta_c = {delta_c}) must be finite"
            )));
        }
        Ok(DriveParams { eta, delta_c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JumpChannel {
    Cosine,
    Sine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub channel: JumpChannel,
    pub op: SparseOperator,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(A + A†)/2`, which is Hermitian exactly entry by entry.
fn hermitize(a: &SparseOperator) -> SparseOperator {
    a.add(&a.adjoint()).scale(real(0.5))
}

/// Cavity Hamiltonian in recoil units:
///
/// `H = Σᵢ nᵢ² + u0·n̂_c·Σᵢ cos²(kxᵢ) + u0·n̂_s·Σᵢ sin²(kxᵢ)
///      + (u0/2)(a_c†a_s + a_s†a_c)·Σᵢ sin(2kxᵢ) − Δ_c(n̂_c + n̂_s) − iη(a_s − a_s†)`.
///
/// The linear geometry drops every cosine-mode term.
pub fn build_hamiltonian(
    params: PhysicalParams,
    drive: DriveParams,
    dims: HilbertDims,
) -> Result<SparseOperator> {
    if dims.dim() > MAX_DIM {
        return Err(Error::Capacity(format!(
            "dimension {} exceeds {MAX_DIM}",
            dims.dim()
        )));
    }
    let u0 = params.u0;
    let pair = |kind| {
        build_trig_operator(kind, Particle::First, dims).add(&build_trig_operator(
            kind,
            Particle::Second,
            dims,
        ))
    };
    let a_s = operators::annihilation(Mode::Sine, dims);
    let n_s = operators::number(Mode::Sine, dims);

    let mut h = operators::kinetic(dims)
        .add(&n_s.compose(&pair(TrigKind::SinSq)).scale(real(u0)))
        .add(&n_s.scale(real(-drive.delta_c)))
        .add(&a_s.add(&a_s.adjoint().scale(real(-1.0))).scale(Complex64::new(0.0, -drive.eta)));

    if dims.geometry() == Geometry::Ring {
        let a_c = operators::annihilation(Mode::Cosine, dims);
        let n_c = operators::number(Mode::Cosine, dims);
        let exchange = a_c.adjoint().compose(&a_s).add(&a_s.adjoint().compose(&a_c));
        h = h
            .add(&n_c.compose(&pair(TrigKind::CosSq)).scale(real(u0)))
            .add(&exchange.compose(&pair(TrigKind::Sin2kx)).scale(real(u0 / 2.0)))
            .add(&n_c.scale(real(-drive.delta_c)));
    }
    Ok(hermitize(&h))
}

/// `√(2κ)·a` for every mode present in the geometry.
pub fn build_jump_operators(params: PhysicalParams, dims: HilbertDims) -> Vec<JumpOperator> {
    let rate = real((2.0 * params.kappa).sqrt());
    let mut out = Vec::with_capacity(2);
    if dims.geometry() == Geometry::Ring {
        out.push(JumpOperator {
            channel: JumpChannel::Cosine,
            op: operators::annihilation(Mode::Cosine, dims).scale(rate),
        });
    }
    out.push(JumpOperator {
        channel: JumpChannel::Sine,
        op: operators::annihilation(Mode::Sine, dims).scale(rate),
    });
    out
}

/// `H_eff = H − (i/2)·Σ_j L_j†L_j`.
pub fn effective_hamiltonian(h: &SparseOperator, jumps: &[JumpOperator]) -> SparseOperator {
    let mut decay = SparseOperator::zero(h.dim());
    for j in jumps {
        assert_eq!(j.op.dim(), h.dim(), "jump operator dimension mismatch");
        decay = decay.add(&j.op.adjoint().compose(&j.op));
    }
    h.add(&decay.scale(Complex64::new(0.0, -0.5)))
}

/// Everything a trajectory needs for one set of drive parameters.
#[derive(Debug, Clone)]
pub struct CavityModel {
    pub dims: HilbertDims,
    pub params: PhysicalParams,
    pub drive: DriveParams,
    pub hamiltonian: SparseOperator,
    pub jumps: Vec<JumpOperator>,
    pub effective: SparseOperator,
}

impl CavityModel {
    pub fn new(params: PhysicalParams, drive: DriveParams, dims: HilbertDims) -> Result<Self> {
        let hamiltonian = build_hamiltonian(params, drive, dims)?;
        let jumps = build_jump_operators(params, dims);
        let effective = effective_hamiltonian(&hamiltonian, &jumps);
        Ok(CavityModel {
            dims,
            params,
            drive,
            hamiltonian,
            jumps,
            effective,
        })
    }
}

/// Diagonal of the anti-Hermitian part, `−κ(k_c + k_s)` for each basis state.
pub fn decay_rates(dims: HilbertDims, kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; dims.dim()];
    for (i, r) in out.iter_mut().enumerate() {
        let b = dims.unflatten_unchecked(i);
        *r = -kappa * (b.k_c + b.k_s) as f64;
    }
    out
}
