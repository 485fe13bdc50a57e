//! Conserved functionals, their gradients, and the velocity inversion.
//!
//! Gradients follow the formal convention in which every lattice mode `ω_k`
//! is an independent variable; [`CotangentField`] is therefore indexed by
//! mode position over the whole lattice, not the half-lattice.

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::state::{ReducedState, VorticityState};
use crate::{CVec2, CVec3, Complex64};

/// Relative bound on the imaginary part of the helicity sum.
const HELICITY_IMAG_RTOL: f64 = 1e-13;

/// Per-mode partial derivatives `∂f/∂ω_k`, indexed by mode position.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentField(pub Vec<CVec3>);

impl CotangentField {
    /// Flattened `3·|modes|` covector in lattice order.
    pub fn flatten(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(self.0.len() * 3, self.0.iter().flat_map(|v| v.iter().copied()))
    }
}

/// Reduced-coordinate partial derivatives `∂f/∂ω̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCotangent(pub Vec<CVec2>);

impl ReducedCotangent {
    pub fn flatten(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_iterator(self.0.len() * 2, self.0.iter().flat_map(|v| v.iter().copied()))
    }
}

fn cvec(v: &crate::RVec3) -> CVec3 {
    v.map(Complex64::from)
}

/// Unconjugated dot product.
fn dot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `H = ½ Σ_j ω_{-j}·ω_j / |j|²`.
pub fn energy(state: &VorticityState) -> f64 {
    let modes = state.modes();
    // each canonical term and its partner contribute the same real value
    modes.half().iter().zip(state.half_values()).map(|(&i, w)| w.norm_squared() / modes.mode(i).norm_sq).sum()
}

/// `H̃ = ½ Σ_j ω̃_{-j}ᵀ S̃ ω̃_j / |j|²`, summed over all modes explicitly.
pub fn energy_reduced(state: &ReducedState) -> f64 {
    let modes = state.modes();
    let total: Complex64 = modes
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let w = state.get(i);
            let p = state.get(m.partner);
            (-p[0] * w[0] + p[1] * w[1]) / m.norm_sq
        })
        .sum();
    0.5 * total.re
}

/// `h = Σ_k (i/|k|²) k·(ω_k × ω_{-k})`.
pub fn helicity(state: &VorticityState) -> Result<f64> {
    let modes = state.modes();
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (i, m) in modes.modes().iter().enumerate() {
        let w = state.get(i);
        let p = state.get(m.partner);
        let term = Complex64::i() * dot(&cvec(&m.wavevector), &w.cross(&p)) / m.norm_sq;
        scale += term.norm();
        total += term;
    }
    if total.im.abs() > HELICITY_IMAG_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InconsistentState(format!("helicity has imaginary part {:e} (real part {:e})", total.im, total.re)));
    }
    Ok(total.re)
}

/// `h̃ = Σ_k (2/|k|) Im(conj(ω̃_{k,y}) ω̃_{k,z})`.
pub fn helicity_reduced(state: &ReducedState) -> f64 {
    let modes = state.modes();
    (0..modes.len())
        .map(|i| {
            let w = state.get(i);
            2.0 * (w[0].conj() * w[1]).im / modes.mode(i).norm
        })
        .sum()
}

/// `∂H/∂ω_k = ω_{-k}/|k|²`.
pub fn grad_energy(state: &VorticityState) -> CotangentField {
    let modes = state.modes();
    CotangentField(modes.modes().iter().map(|m| state.get(m.partner) / Complex64::from(m.norm_sq)).collect())
}

/// `∂h/∂ω_k = −(2i/|k|²) k × ω_{-k}`.
pub fn grad_helicity(state: &VorticityState) -> CotangentField {
    let modes = state.modes();
    let factor = Complex64::new(0.0, -2.0);
    CotangentField(
        modes.modes().iter().map(|m| cvec(&m.wavevector).cross(&state.get(m.partner)) * (factor / m.norm_sq)).collect(),
    )
}

/// `∂H̃/∂ω̃_k = S̃ ω̃_{-k}/|k|²`.
pub fn grad_energy_reduced(state: &ReducedState) -> ReducedCotangent {
    let modes = state.modes();
    ReducedCotangent(
        modes
            .modes()
            .iter()
            .map(|m| {
                let p = state.get(m.partner);
                Vector2::new(-p[0], p[1]) / Complex64::from(m.norm_sq)
            })
            .collect(),
    )
}

/// `∂h̃/∂ω̃_k = (2i/|k|) (ω̃_{-k,z}, ω̃_{-k,y})`.
pub fn grad_helicity_reduced(state: &ReducedState) -> ReducedCotangent {
    let modes = state.modes();
    ReducedCotangent(
        modes
            .modes()
            .iter()
            .map(|m| {
                let p = state.get(m.partner);
                Vector2::new(p[1], p[0]) * Complex64::new(0.0, 2.0 / m.norm)
            })
            .collect(),
    )
}

/// `v_j = i (j × ω_j)/|j|²`, indexed by mode position.
pub fn velocity_modes(state: &VorticityState) -> Vec<CVec3> {
    let modes = state.modes();
    modes
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| cvec(&m.wavevector).cross(&state.get(i)) * Complex64::new(0.0, 1.0 / m.norm_sq))
        .collect()
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub helicity: f64,
    pub div_max: f64,
    pub amp_max: f64,
}

impl DiagnosticsRecord {
    pub fn measure(state: &VorticityState) -> Result<Self> {
        Ok(DiagnosticsRecord {
            t: state.time,
            energy: energy(state),
            helicity: helicity(state)?,
            div_max: state.divergence_residual(),
            amp_max: state.amp_max(),
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.energy, self.helicity, self.div_max, self.amp_max].iter().all(|v| v.is_finite())
    }
}
