//! Hamiltonian vector fields in full and reduced coordinates, and RK4 time
//! stepping.
//!
//! Fields are evaluated on the canonical half-lattice only; the partner modes
//! follow from the reality pairing. Each output mode is an independent
//! sequential sum, so parallel evaluation is bit-identical to serial.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::FrameSet;
use crate::lattice::ModeSet;
use crate::observables::{energy_reduced, helicity_reduced, DiagnosticsRecord};
use crate::state::{ReducedState, VorticityState};
use crate::structures::{a_apply, j_apply, project, tilde_coefficients, RMat2, Structure};
use crate::{CVec2, CVec3, Complex64};

#[derive(Debug, Clone, Copy)]
struct Triad {
    /// Position of `k`.
    k: usize,
    /// Position of `-k`.
    minus_k: usize,
    /// Position of `j + k`.
    m: usize,
    /// `1/|k|²`.
    weight: f64,
}

/// For every canonical mode `j`, all lattice `k` with `j + k` inside the box.
#[derive(Debug, Clone)]
pub struct TriadTable {
    modes: Arc<ModeSet>,
    rows: Vec<Vec<Triad>>,
}

impl TriadTable {
    pub fn build(modes: Arc<ModeSet>) -> Self {
        let rows = modes
            .half()
            .iter()
            .map(|&i| {
                (0..modes.len())
                    .filter_map(|l| {
                        let mk = modes.mode(l);
                        modes.sum_position(i, l).map(|m| Triad { k: l, minus_k: mk.partner, m, weight: 1.0 / mk.norm_sq })
                    })
                    .collect()
            })
            .collect();
        TriadTable { modes, rows }
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    /// Number of interacting `(j, k)` pairs with `j` canonical.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// State types that RK4 can advance.
pub trait OdeState: Clone + Send + Sync {
    fn time(&self) -> f64;
    fn set_time(&mut self, t: f64);
    /// `self += a · x` on the stored half-lattice values.
    fn axpy(&mut self, a: f64, x: &Self);
    fn all_finite(&self) -> bool;
}

impl OdeState for VorticityState {
    fn time(&self) -> f64 {
        self.time
    }

    fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (v, d) in self.half_values_mut().iter_mut().zip(x.half_values()) {
            *v += d * Complex64::from(a);
        }
    }

    fn all_finite(&self) -> bool {
        self.half_values().iter().all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

impl OdeState for ReducedState {
    fn time(&self) -> f64 {
        self.time
    }

    fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (v, d) in self.half_values_mut().iter_mut().zip(x.half_values()) {
            *v += d * Complex64::from(a);
        }
    }

    fn all_finite(&self) -> bool {
        self.half_values().iter().all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// A time-independent vector field on an [`OdeState`].
pub trait VectorField: Sync {
    type State: OdeState;
    fn eval(&self, state: &Self::State) -> Self::State;
}

/// Full-coordinate field `dω_j/dt = Σ_k B(j,k,ω_{j+k}) ω_{-k}/|k|²`.
#[derive(Debug, Clone)]
pub struct FullField {
    which: Structure,
    table: Arc<TriadTable>,
}

impl FullField {
    pub fn new(modes: Arc<ModeSet>, which: Structure) -> Result<Self> {
        Self::with_table(Arc::new(TriadTable::build(modes)), which)
    }

    pub fn with_table(table: Arc<TriadTable>, which: Structure) -> Result<Self> {
        if which == Structure::Reduced {
            return Err(Error::InvalidParameter("the reduced field acts on reduced states".into()));
        }
        Ok(FullField { which, table })
    }

    pub fn structure(&self) -> Structure {
        self.which
    }
}

impl VectorField for FullField {
    type State = VorticityState;

    fn eval(&self, state: &VorticityState) -> VorticityState {
        let modes = &self.table.modes;
        debug_assert_eq!(modes.len(), state.modes().len());
        let all: Vec<CVec3> = (0..modes.len()).map(|i| state.get(i)).collect();
        let coupling: Vec<CVec3> = if self.which == Structure::Projected {
            all.iter().enumerate().map(|(i, w)| project(&modes.mode(i).wavevector, w)).collect()
        } else {
            all.clone()
        };
        let values = modes
            .half()
            .par_iter()
            .zip(self.table.rows.par_iter())
            .map(|(&i, row)| {
                let j = &modes.mode(i).wavevector;
                let mut acc = CVec3::zeros();
                for t in row {
                    let k = &modes.mode(t.k).wavevector;
                    let x = all[t.minus_k] * Complex64::from(t.weight);
                    let w = &coupling[t.m];
                    acc += match self.which {
                        Structure::Direct => a_apply(j, k, w, &x),
                        _ => j_apply(j, k, w, &x),
                    };
                }
                acc
            })
            .collect();
        let mut out = VorticityState::from_half(state.modes().clone(), values).expect("half-lattice length");
        out.time = state.time;
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct ReducedTriad {
    minus_k: usize,
    m: usize,
    weight: f64,
    y: RMat2,
    z: RMat2,
}

/// Reduced field `dω̃_j/dt = Σ_k J̃(j,k,ω̃_{j+k}) S̃ ω̃_{-k}/|k|²`, with the
/// restricted coefficients precomputed per triad.
#[derive(Debug, Clone)]
pub struct ReducedField {
    modes: Arc<ModeSet>,
    rows: Vec<Vec<ReducedTriad>>,
}

impl ReducedField {
    pub fn new(modes: Arc<ModeSet>, frames: &FrameSet) -> Result<Self> {
        let table = TriadTable::build(modes.clone());
        let rows = modes
            .half()
            .par_iter()
            .zip(table.rows.par_iter())
            .map(|(&i, row)| {
                row.iter()
                    .map(|t| {
                        let c = tilde_coefficients(frames, modes.mode(i).index, modes.mode(t.k).index)?;
                        Ok(ReducedTriad { minus_k: t.minus_k, m: t.m, weight: t.weight, y: c.y, z: c.z })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReducedField { modes, rows })
    }
}

fn real_mat_apply(a: &RMat2, x: &CVec2) -> CVec2 {
    CVec2::new(x[0] * a[(0, 0)] + x[1] * a[(0, 1)], x[0] * a[(1, 0)] + x[1] * a[(1, 1)])
}

impl VectorField for ReducedField {
    type State = ReducedState;

    fn eval(&self, state: &ReducedState) -> ReducedState {
        let modes = &self.modes;
        let all: Vec<CVec2> = (0..modes.len()).map(|i| state.get(i)).collect();
        let values: Vec<CVec2> = self
            .rows
            .par_iter()
            .map(|row| {
                let mut acc = CVec2::zeros();
                for t in row {
                    let p = all[t.minus_k];
                    let x = CVec2::new(-p[0], p[1]) * Complex64::from(t.weight);
                    let w = all[t.m];
                    acc += real_mat_apply(&t.y, &x) * w[0] + real_mat_apply(&t.z, &x) * w[1];
                }
                acc
            })
            .collect();
        let mut out = ReducedState::zeros(state.modes().clone());
        out.half_values_mut().copy_from_slice(&values);
        out.time = state.time;
        out
    }
}

/// One-off evaluation of the full field.
pub fn vector_field_full(state: &VorticityState, which: Structure) -> Result<VorticityState> {
    Ok(FullField::new(state.modes().clone(), which)?.eval(state))
}

/// One-off evaluation of the reduced field.
pub fn vector_field_reduced(state: &ReducedState, frames: &FrameSet) -> Result<ReducedState> {
    Ok(ReducedField::new(state.modes().clone(), frames)?.eval(state))
}

/// One classical fourth-order Runge-Kutta step.
///
/// Returns [`Error::BlowUp`] with `step = 0` when a stage or the result is
/// not finite; [`advance`] substitutes the actual step index.
pub fn rk4_step<F: VectorField>(state: &F::State, dt: f64, field: &F) -> Result<F::State> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be finite and nonzero, got {dt}")));
    }
    let check = |s: &F::State| if s.all_finite() { Ok(()) } else { Err(Error::BlowUp { step: 0 }) };
    let k1 = field.eval(state);
    check(&k1)?;
    let mut y = state.clone();
    y.axpy(0.5 * dt, &k1);
    let k2 = field.eval(&y);
    check(&k2)?;
    let mut y = state.clone();
    y.axpy(0.5 * dt, &k2);
    let k3 = field.eval(&y);
    check(&k3)?;
    let mut y = state.clone();
    y.axpy(dt, &k3);
    let k4 = field.eval(&y);
    check(&k4)?;
    let mut out = state.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    check(&out)?;
    out.set_time(state.time() + dt);
    Ok(out)
}

/// Advances `state` in place by `steps` RK4 steps, calling `observer` before
/// the first step and after every `every`-th step (and after the last).
///
/// On blow-up `state` still holds the last finite state and the error carries
/// the 1-based index of the failing step.
pub fn advance<F, O>(state: &mut F::State, dt: f64, steps: usize, field: &F, every: usize, mut observer: O) -> Result<()>
where
    F: VectorField,
    O: FnMut(usize, &F::State) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let every = every.max(1);
    observer(0, state)?;
    for step in 1..=steps {
        // the clock accumulates `t += dt`, so a run resumed from a snapshot
        // reproduces the uninterrupted run bit for bit
        *state = match rk4_step(state, dt, field) {
            Ok(s) => s,
            Err(Error::BlowUp { .. }) => return Err(Error::BlowUp { step }),
            Err(e) => return Err(e),
        };
        if step % every == 0 || step == steps {
            observer(step, state)?;
        }
    }
    Ok(())
}

/// Integrates a full-coordinate state, recording diagnostics every `every` steps.
pub fn integrate(
    state: &VorticityState,
    dt: f64,
    steps: usize,
    which: Structure,
    every: usize,
) -> Result<(VorticityState, Vec<DiagnosticsRecord>)> {
    let field = FullField::new(state.modes().clone(), which)?;
    let mut s = state.clone();
    let mut records = Vec::new();
    advance(&mut s, dt, steps, &field, every, |_, st| {
        let r = DiagnosticsRecord::measure(st)?;
        records.push(r);
        Ok(())
    })?;
    Ok((s, records))
}

/// Diagnostics of a reduced state; the divergence column is identically zero.
pub fn measure_reduced(state: &ReducedState) -> DiagnosticsRecord {
    DiagnosticsRecord {
        t: state.time,
        energy: energy_reduced(state),
        helicity: helicity_reduced(state),
        div_max: 0.0,
        amp_max: state.amp_max(),
    }
}

/// Integrates a reduced state, recording diagnostics every `every` steps.
pub fn integrate_reduced(
    state: &ReducedState,
    dt: f64,
    steps: usize,
    frames: &FrameSet,
    every: usize,
) -> Result<(ReducedState, Vec<DiagnosticsRecord>)> {
    let field = ReducedField::new(state.modes().clone(), frames)?;
    let mut s = state.clone();
    let mut records = Vec::new();
    advance(&mut s, dt, steps, &field, every, |_, st| {
        records.push(measure_reduced(st));
        Ok(())
    })?;
    Ok((s, records))
}
