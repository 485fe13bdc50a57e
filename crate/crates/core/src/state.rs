//! Vorticity fields in full coordinates `ω_j ∈ ℂ³` and reduced coordinates
//! `ω̃_j ∈ ℂ²`.
//!
//! Only the canonical half-lattice is stored. The value at `-a` is always
//! derived from the stored one (`ω_{-j} = conj(ω_j)`, `ω̃_{-j} = S̃ conj(ω̃_j)`),
//! so no state can violate the reality pairing.

use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{leray_projector, FrameSet};
use crate::lattice::{IVec3, ModeSet};
use crate::{CVec2, CVec3, Complex64};

/// Subspace tolerance, relative to the largest mode amplitude.
pub const DIVERGENCE_RTOL: f64 = 1e-10;

fn conj3(v: &CVec3) -> CVec3 {
    v.map(|c| c.conj())
}

/// `S̃ conj(v)` with `S̃ = diag(-1, 1)`.
fn reduced_partner(v: &CVec2) -> CVec2 {
    Vector2::new(-v[0].conj(), v[1].conj())
}

#[derive(Debug, Clone)]
pub struct VorticityState {
    modes: Arc<ModeSet>,
    values: Vec<CVec3>,
    pub time: f64,
}

impl VorticityState {
    pub fn zeros(modes: Arc<ModeSet>) -> Self {
        let n = modes.half().len();
        VorticityState { modes, values: vec![CVec3::zeros(); n], time: 0.0 }
    }

    /// Builds a state from half-lattice values in canonical order.
    pub fn from_half(modes: Arc<ModeSet>, values: Vec<CVec3>) -> Result<Self> {
        if values.len() != modes.half().len() {
            return Err(Error::ModeSetMismatch);
        }
        Ok(VorticityState { modes, values, time: 0.0 })
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// Canonical half-lattice values, in the order of [`ModeSet::half`].
    pub fn half_values(&self) -> &[CVec3] {
        &self.values
    }

    pub fn half_values_mut(&mut self) -> &mut [CVec3] {
        &mut self.values
    }

    /// Value at mode position `i`.
    pub fn get(&self, i: usize) -> CVec3 {
        let m = self.modes.mode(i);
        let v = &self.values[m.half_pos];
        if m.canonical {
            *v
        } else {
            conj3(v)
        }
    }

    /// Value at an arbitrary lattice index; zero for `a = 0` and outside the box.
    pub fn at(&self, a: IVec3) -> CVec3 {
        self.modes.position(a).map_or_else(CVec3::zeros, |i| self.get(i))
    }

    /// Sets the value at `a`; the partner `-a` becomes its conjugate.
    pub fn set_mode(&mut self, a: IVec3, value: CVec3) -> Result<()> {
        if a.is_zero() {
            return Err(Error::InvalidMode(a));
        }
        let i = self.modes.position(a).ok_or(Error::OutOfRange { mode: a, n: self.modes.truncation().n() })?;
        let m = self.modes.mode(i);
        self.values[m.half_pos] = if m.canonical { value } else { conj3(&value) };
        Ok(())
    }

    /// Uniform random components in `[-amplitude, amplitude]`, then projected
    /// onto the divergence-free subspace mode by mode.
    pub fn random_divfree(modes: Arc<ModeSet>, seed: u64, amplitude: f64) -> Result<Self> {
        let mut s = Self::random_raw(modes, seed, amplitude)?;
        for (pos, &i) in s.modes.half().iter().enumerate() {
            let p = leray_projector(&s.modes.mode(i).wavevector)?;
            s.values[pos] = p.map(Complex64::from) * s.values[pos];
        }
        Ok(s)
    }

    /// Uniform random components without projection (not divergence-free).
    pub fn random_raw(modes: Arc<ModeSet>, seed: u64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be positive, got {amplitude}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..modes.half().len())
            .map(|_| {
                Vector3::from_fn(|_, _| {
                    let re = rng.gen_range(-amplitude..=amplitude);
                    let im = rng.gen_range(-amplitude..=amplitude);
                    Complex64::new(re, im)
                })
            })
            .collect();
        Ok(VorticityState { modes, values, time: 0.0 })
    }

    /// `max_j |j · ω_j|`.
    pub fn divergence_residual(&self) -> f64 {
        self.modes
            .half()
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| {
                let j = self.modes.mode(i).wavevector.map(Complex64::from);
                j.dot(v).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max_j |ω_j|`.
    pub fn amp_max(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest component magnitude of `self - other`.
    pub fn max_deviation(&self, other: &VorticityState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| (a - b).iter().map(|c| c.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    /// Rotated coordinates `ω̌_j = R_j ω_j`, keeping the last two components.
    pub fn to_reduced(&self, frames: &FrameSet, rtol: f64) -> Result<ReducedState> {
        let amp = self.amp_max();
        let tolerance = rtol * amp;
        let mut worst = 0.0f64;
        let values = self
            .modes
            .half()
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| {
                let checked = frames.get(i).r.map(Complex64::from) * v;
                worst = worst.max(checked[0].norm());
                Vector2::new(checked[1], checked[2])
            })
            .collect();
        if worst > tolerance {
            return Err(Error::NotOnSubspace { residual: worst, tolerance });
        }
        Ok(ReducedState { modes: self.modes.clone(), values, time: self.time })
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let modes = self
            .modes
            .half()
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| SnapshotMode {
                a: self.modes.mode(i).index,
                re: [v[0].re, v[1].re, v[2].re],
                im: [v[0].im, v[1].im, v[2].im],
            })
            .collect();
        Snapshot { t: self.time, modes }
    }

    pub fn from_snapshot(modes: Arc<ModeSet>, snap: &Snapshot) -> Result<Self> {
        let mut s = Self::zeros(modes);
        for m in &snap.modes {
            let v = Vector3::from_fn(|r, _| Complex64::new(m.re[r], m.im[r]));
            s.set_mode(m.a, v)?;
        }
        s.time = snap.t;
        Ok(s)
    }
}

/// JSON state snapshot over the canonical half-lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub modes: Vec<SnapshotMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMode {
    pub a: IVec3,
    pub re: [f64; 3],
    pub im: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ReducedState {
    modes: Arc<ModeSet>,
    values: Vec<CVec2>,
    pub time: f64,
}

impl ReducedState {
    pub fn zeros(modes: Arc<ModeSet>) -> Self {
        let n = modes.half().len();
        ReducedState { modes, values: vec![CVec2::zeros(); n], time: 0.0 }
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn half_values(&self) -> &[CVec2] {
        &self.values
    }

    pub fn half_values_mut(&mut self) -> &mut [CVec2] {
        &mut self.values
    }

    pub fn get(&self, i: usize) -> CVec2 {
        let m = self.modes.mode(i);
        let v = &self.values[m.half_pos];
        if m.canonical {
            *v
        } else {
            reduced_partner(v)
        }
    }

    pub fn at(&self, a: IVec3) -> CVec2 {
        self.modes.position(a).map_or_else(CVec2::zeros, |i| self.get(i))
    }

    pub fn set_mode(&mut self, a: IVec3, value: CVec2) -> Result<()> {
        if a.is_zero() {
            return Err(Error::InvalidMode(a));
        }
        let i = self.modes.position(a).ok_or(Error::OutOfRange { mode: a, n: self.modes.truncation().n() })?;
        let m = self.modes.mode(i);
        self.values[m.half_pos] = if m.canonical { value } else { reduced_partner(&value) };
        Ok(())
    }

    /// `ω_j = R_jᵀ (0, ω̃_j)`; exactly divergence-free up to the rounding of `R`.
    pub fn to_full(&self, frames: &FrameSet) -> VorticityState {
        let values = self
            .modes
            .half()
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| {
                let checked = Vector3::new(Complex64::new(0.0, 0.0), v[0], v[1]);
                frames.get(i).r.transpose().map(Complex64::from) * checked
            })
            .collect();
        VorticityState { modes: self.modes.clone(), values, time: self.time }
    }

    pub fn amp_max(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_deviation(&self, other: &ReducedState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| (a - b).iter().map(|c| c.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameBuilder;
    use crate::lattice::{Anisotropy, Truncation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn modes(n: u32) -> Arc<ModeSet> {
        Arc::new(ModeSet::build(Truncation::new(n).unwrap(), Anisotropy::ISOTROPIC))
    }

    #[test]
    fn set_mode_conjugation() {
        let mut s = VorticityState::zeros(modes(1));
        s.set_mode(IVec3::new(1, 0, 0), Vector3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, -1.0))).unwrap();
        assert_eq!(s.at(IVec3::new(-1, 0, 0)), Vector3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)));

        let v = Vector3::new(c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0));
        s.set_mode(IVec3::new(0, -1, 1), v).unwrap();
        assert_eq!(s.at(IVec3::new(0, 1, -1)), v.map(|x| x.conj()));
        assert_eq!(s.at(IVec3::new(0, -1, 1)), v);

        assert!(matches!(s.set_mode(IVec3::ZERO, v), Err(Error::InvalidMode(_))));
        assert!(matches!(s.set_mode(IVec3::new(2, 0, 0), v), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn random_state_properties() {
        let m = modes(2);
        let a = VorticityState::random_divfree(m.clone(), 7, 1.0).unwrap();
        let b = VorticityState::random_divfree(m.clone(), 7, 1.0).unwrap();
        assert_eq!(a.half_values(), b.half_values());
        assert!(a.divergence_residual() <= 1e-14 * a.amp_max());
        assert!(VorticityState::random_divfree(m.clone(), 7, 0.0).is_err());
        let raw = VorticityState::random_raw(m, 7, 1.0).unwrap();
        assert!(raw.divergence_residual() > 0.1);
    }

    #[test]
    fn divergence_residual_examples() {
        let m = modes(1);
        let mut s = VorticityState::zeros(m);
        assert_eq!(s.divergence_residual(), 0.0);
        let a = IVec3::new(1, 1, 0);
        s.set_mode(a, Vector3::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(s.divergence_residual(), 2.0);
    }

    #[test]
    fn reduced_examples() {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let mut s = VorticityState::zeros(m.clone());
        s.set_mode(IVec3::new(1, 0, 0), Vector3::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, -1.0))).unwrap();
        let r = s.to_reduced(&frames, DIVERGENCE_RTOL).unwrap();
        assert_eq!(r.at(IVec3::new(1, 0, 0)), Vector2::new(c(1.0, 0.0), c(0.0, -1.0)));
        // at -e_x the frame is S: S (0, 1, i) = (0, -1, i)
        assert_eq!(r.at(IVec3::new(-1, 0, 0)), Vector2::new(c(-1.0, 0.0), c(0.0, 1.0)));
        let neg = m.position(IVec3::new(-1, 0, 0)).unwrap();
        let checked = frames.get(neg).r.map(Complex64::from) * s.at(IVec3::new(-1, 0, 0));
        assert_eq!(checked, Vector3::new(c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)));

        let back = r.to_full(&frames);
        assert_eq!(back.at(IVec3::new(1, 0, 0)), s.at(IVec3::new(1, 0, 0)));
    }

    #[test]
    fn reduced_rejects_divergent_state() {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let mut s = VorticityState::zeros(m);
        s.set_mode(IVec3::new(1, 0, 0), Vector3::new(c(0.1, 0.0), c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert!(matches!(s.to_reduced(&frames, DIVERGENCE_RTOL), Err(Error::NotOnSubspace { .. })));
    }

    #[test]
    fn reduced_reality_and_round_trip() {
        let m = Arc::new(ModeSet::build(Truncation::new(2).unwrap(), Anisotropy::new([1.0, 0.5, 2.0]).unwrap()));
        for builder in [FrameBuilder::ex(), FrameBuilder::new(crate::RVec3::new(0.2, 1.0, -0.3)).unwrap()] {
            let frames = FrameSet::new(&m, builder);
            let s = VorticityState::random_divfree(m.clone(), 3, 1.0).unwrap();
            let r = s.to_reduced(&frames, DIVERGENCE_RTOL).unwrap();
            for (i, mode) in m.modes().iter().enumerate() {
                // explicit rotation of the stored conjugate partner
                let checked = frames.get(i).r.map(Complex64::from) * s.get(i);
                assert!(checked[0].norm() < 1e-13);
                let red = r.get(i);
                assert!((checked[1] - red[0]).norm() < 1e-13 && (checked[2] - red[1]).norm() < 1e-13);
                let partner = r.get(mode.partner);
                assert!((partner - reduced_partner(&red)).norm() < 1e-15);
            }
            let back = r.to_full(&frames);
            assert!(back.max_deviation(&s) <= 1e-13 * s.amp_max());
            let again = back.to_reduced(&frames, DIVERGENCE_RTOL).unwrap();
            assert!(again.max_deviation(&r) <= 1e-13 * r.amp_max());
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let m = modes(1);
        let mut s = VorticityState::random_divfree(m.clone(), 1, 0.5).unwrap();
        s.time = 0.125;
        let text = serde_json::to_string(&s.to_snapshot()).unwrap();
        let back: Snapshot = serde_json::from_str(&text).unwrap();
        let t = VorticityState::from_snapshot(m, &back).unwrap();
        assert_eq!(t.half_values(), s.half_values());
        assert_eq!(t.time, 0.125);
        assert!(text.starts_with("{\"t\":0.125,\"modes\":[{\"a\":[0,0,1],\"re\":["));
    }
}
