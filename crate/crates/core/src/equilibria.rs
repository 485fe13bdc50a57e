//! Shear-flow equilibria and the kernel analysis at them.
//!
//! A shear flow has vorticity `ω_{np} = G c_n` on a single lattice line through
//! a primitive direction `p`, with `G ⟂ 𝔅p`. Both gradients of the energy and
//! of the helicity are supported on that line, and at such a state the energy
//! gradient lies in the kernel of the Poisson tensor.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{vector_field_full, vector_field_reduced};
use crate::error::{Error, Result};
use crate::frames::FrameSet;
use crate::lattice::{in_lattice, wavevector, IVec3, ModeSet};
use crate::observables::{grad_energy, grad_energy_reduced, grad_helicity, grad_helicity_reduced};
use crate::state::{VorticityState, DIVERGENCE_RTOL};
use crate::structures::{assemble_global, GlobalTensor, Structure};
use crate::verify::{kernel_residual, poisson_rank, RankReport};
use crate::{CVec3, Complex64, RVec3};

/// One profile coefficient `c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub n: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Shear flow `Ω(x) = G C(p·x)` with `C = Σ c_n e^{i n p·x}`.
///
/// Coefficients of negative `n` may be omitted; they default to `conj(c_{-n})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearFlowSpec {
    pub p: IVec3,
    #[serde(rename = "G")]
    pub g: [f64; 3],
    pub profile: Vec<Harmonic>,
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Relative tolerance of `G · 𝔅p = 0` for non-integer anisotropies.
const ORTHOGONALITY_RTOL: f64 = 1e-14;

impl ShearFlowSpec {
    /// The coefficients `c_n` for `n > 0`, validated against `c_{-n} = conj(c_n)`.
    pub fn positive_harmonics(&self) -> Result<BTreeMap<i32, Complex64>> {
        let mut given: BTreeMap<i32, Complex64> = BTreeMap::new();
        for h in &self.profile {
            if h.n == 0 {
                return Err(Error::InvalidShear("the profile has no n = 0 coefficient".into()));
            }
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::InvalidShear(format!("non-finite coefficient at n = {}", h.n)));
            }
            if given.insert(h.n, Complex64::new(h.re, h.im)).is_some() {
                return Err(Error::InvalidShear(format!("coefficient n = {} given twice", h.n)));
            }
        }
        let mut out = BTreeMap::new();
        for (&n, &c) in &given {
            let (pos, val) = if n > 0 { (n, c) } else { (-n, c.conj()) };
            if let Some(other) = given.get(&-n) {
                let expect = other.conj();
                if c != expect {
                    return Err(Error::InvalidShear(format!("c_{{-{pos}}} must equal conj(c_{pos})")));
                }
            }
            out.insert(pos, val);
        }
        Ok(out)
    }

    /// Checks coprimality, `G ⟂ 𝔅p` and the profile.
    pub fn validate(&self, modes: &ModeSet) -> Result<()> {
        let [a, b, c] = self.p.0;
        if self.p.is_zero() {
            return Err(Error::InvalidShear("p must be nonzero".into()));
        }
        if gcd(gcd(a, b), c) != 1 {
            return Err(Error::InvalidShear(format!("components of p = {} are not coprime", self.p)));
        }
        let g = RVec3::from(self.g);
        if !g.iter().all(|v| v.is_finite()) || g.norm() == 0.0 {
            return Err(Error::InvalidShear("G must be finite and nonzero".into()));
        }
        let pw = wavevector(self.p, modes.anisotropy())?;
        let dot = g.dot(&pw);
        if dot.abs() > ORTHOGONALITY_RTOL * g.norm() * pw.norm() {
            return Err(Error::InvalidShear(format!("G is not orthogonal to the wavevector of p (G·p = {dot:e})")));
        }
        self.positive_harmonics()?;
        Ok(())
    }
}

/// `ω_{np} = G c_n`, all other modes zero.
pub fn shear_state(spec: &ShearFlowSpec, modes: Arc<ModeSet>) -> Result<VorticityState> {
    spec.validate(&modes)?;
    let g = CVec3::from(spec.g.map(Complex64::from));
    let mut s = VorticityState::zeros(modes.clone());
    for (n, c) in spec.positive_harmonics()? {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let a = spec.p.scale(n);
        if !in_lattice(a, modes.truncation()) {
            return Err(Error::TruncationTooSmall { harmonic: n, mode: a, n: modes.truncation().n() });
        }
        s.set_mode(a, g * c)?;
    }
    Ok(s)
}

/// Max-norm of the vector field relative to the largest mode amplitude (0 for the zero state).
pub fn equilibrium_residual(state: &VorticityState, which: Structure, frames: &FrameSet) -> Result<f64> {
    let amp = state.amp_max();
    if amp == 0.0 {
        return Ok(0.0);
    }
    let field = match which {
        Structure::Reduced => {
            let reduced = state.to_reduced(frames, DIVERGENCE_RTOL)?;
            let f = vector_field_reduced(&reduced, frames)?;
            return Ok(f.half_values().iter().flat_map(|v| v.iter()).map(|c| c.norm()).fold(0.0, f64::max) / amp);
        }
        other => vector_field_full(state, other)?,
    };
    Ok(field.half_values().iter().flat_map(|v| v.iter()).map(|c| c.norm()).fold(0.0, f64::max) / amp)
}

/// Gradients of the known Casimirs in the coordinates of `tensor`:
/// helicity and, in full coordinates, one divergence direction per mode.
pub fn known_casimir_gradients(
    state: &VorticityState,
    tensor: &GlobalTensor,
    frames: &FrameSet,
) -> Result<Vec<DVector<Complex64>>> {
    if tensor.structure == Structure::Reduced {
        let r = state.to_reduced(frames, DIVERGENCE_RTOL)?;
        return Ok(vec![grad_helicity_reduced(&r).flatten()]);
    }
    let modes = state.modes();
    let mut out = vec![grad_helicity(state).flatten()];
    for (i, m) in modes.modes().iter().enumerate() {
        let mut v = DVector::zeros(3 * modes.len());
        for r in 0..3 {
            v[3 * i + r] = Complex64::from(m.wavevector[r]);
        }
        out.push(v);
    }
    Ok(out)
}

fn energy_gradient(state: &VorticityState, tensor: &GlobalTensor, frames: &FrameSet) -> Result<DVector<Complex64>> {
    Ok(if tensor.structure == Structure::Reduced {
        grad_energy_reduced(&state.to_reduced(frames, DIVERGENCE_RTOL)?).flatten()
    } else {
        grad_energy(state).flatten()
    })
}

fn helicity_gradient(state: &VorticityState, tensor: &GlobalTensor, frames: &FrameSet) -> Result<DVector<Complex64>> {
    Ok(if tensor.structure == Structure::Reduced {
        grad_helicity_reduced(&state.to_reduced(frames, DIVERGENCE_RTOL)?).flatten()
    } else {
        grad_helicity(state).flatten()
    })
}

/// Orthonormal basis (columns) of the span of `vectors`, by SVD with relative cut-off `1e-12`.
fn orthonormal_basis(vectors: &[DVector<Complex64>], dim: usize) -> DMatrix<Complex64> {
    let nonzero: Vec<&DVector<Complex64>> = vectors.iter().filter(|v| v.norm() > 0.0).collect();
    if nonzero.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    let b = DMatrix::from_columns(&nonzero.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
    let svd = b.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-12 * smax).collect();
    DMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
}

/// `‖v − Π v‖` where `Π` projects onto the column span of the orthonormal `basis`.
fn projection_residual(basis: &DMatrix<Complex64>, v: &DVector<Complex64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let coeffs = basis.adjoint() * v;
    (v - basis * coeffs).norm()
}

/// Outcome of [`gradient_span_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    pub structure: Structure,
    pub equilibrium_residual: f64,
    pub grad_energy_norm: f64,
    /// `‖K ∇H‖ / (‖K‖ ‖∇H‖)`.
    pub kernel_residual: f64,
    pub in_kernel: bool,
    /// Residual of projecting `∇H` onto the known Casimir gradients, relative to `‖∇H‖`.
    pub projection_residual_ratio: f64,
    /// Angle in degrees between `∇H` and `∇h` over the populated modes; `None` if either vanishes.
    pub angle_degrees: Option<f64>,
    /// Number of independent known Casimir gradients.
    pub known_span_dim: usize,
    /// `∇H = 0`: membership and projection carry no information.
    pub degenerate: bool,
}

/// Energy gradient against the tensor kernel and the known Casimir span.
///
/// Fails with [`Error::NotEquilibrium`] when the field at `state` exceeds `eq_tol`
/// (relative to the largest amplitude).
pub fn gradient_span_test(
    state: &VorticityState,
    tensor: &GlobalTensor,
    frames: &FrameSet,
    tol: f64,
    eq_tol: f64,
) -> Result<SpanReport> {
    if !Arc::ptr_eq(state.modes(), &tensor.modes) && state.modes().len() != tensor.modes.len() {
        return Err(Error::ModeSetMismatch);
    }
    let eq = equilibrium_residual(state, tensor.structure, frames)?;
    if eq > eq_tol {
        return Err(Error::NotEquilibrium(eq));
    }
    span_report(state, tensor, frames, tol, eq)
}

/// As [`gradient_span_test`] without the equilibrium precondition.
pub fn span_report(state: &VorticityState, tensor: &GlobalTensor, frames: &FrameSet, tol: f64, eq: f64) -> Result<SpanReport> {
    let ge = energy_gradient(state, tensor, frames)?;
    let gh = helicity_gradient(state, tensor, frames)?;
    let known = known_casimir_gradients(state, tensor, frames)?;
    let basis = orthonormal_basis(&known, tensor.dim());
    let ge_norm = ge.norm();
    let kr = kernel_residual(tensor, &ge)?;
    let degenerate = ge_norm == 0.0;
    let ratio = if degenerate { 0.0 } else { projection_residual(&basis, &ge) / ge_norm };
    let angle = {
        // both gradients vanish off the populated modes
        let (a, b) = (ge_norm, gh.norm());
        if a == 0.0 || b == 0.0 {
            None
        } else {
            let c = (ge.dotc(&gh).norm() / (a * b)).min(1.0);
            Some(c.acos().to_degrees())
        }
    };
    Ok(SpanReport {
        structure: tensor.structure,
        equilibrium_residual: eq,
        grad_energy_norm: ge_norm,
        kernel_residual: kr,
        in_kernel: kr <= tol,
        projection_residual_ratio: ratio,
        angle_degrees: angle,
        known_span_dim: basis.ncols(),
        degenerate,
    })
}

/// Kernel dimension accounting at one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub rank: usize,
    pub corank: usize,
    /// Independent known Casimir gradients lying in the kernel.
    pub explained: usize,
    /// `corank − explained`: kernel directions outside the known Casimir span.
    pub unexplained: usize,
    pub amp_max: f64,
}

fn summarize(
    state: &VorticityState,
    tensor: &GlobalTensor,
    frames: &FrameSet,
    rank: &RankReport,
    tol: f64,
) -> Result<KernelSummary> {
    let known = known_casimir_gradients(state, tensor, frames)?;
    let mut in_kernel = Vec::new();
    for v in known {
        if kernel_residual(tensor, &v)? <= tol.max(1e-12) {
            in_kernel.push(v);
        }
    }
    let explained = orthonormal_basis(&in_kernel, tensor.dim()).ncols();
    Ok(KernelSummary {
        rank: rank.rank,
        corank: rank.corank,
        explained,
        unexplained: rank.corank.saturating_sub(explained),
        amp_max: state.amp_max(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub kernel: KernelSummary,
}

/// Outcome of [`corank_comparison`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorankReport {
    pub structure: Structure,
    pub dim: usize,
    pub tol: f64,
    pub shear: KernelSummary,
    pub baselines: Vec<BaselineSummary>,
    /// All baselines share one corank.
    pub baseline_consistent: bool,
    /// Shear corank minus the smallest baseline corank.
    pub kernel_enlargement: i64,
    /// Both tensors vanish identically.
    pub degenerate: bool,
}

/// Random divergence-free state rescaled to a given largest mode amplitude.
pub fn matched_baseline(modes: Arc<ModeSet>, seed: u64, amp_max: f64) -> Result<VorticityState> {
    if amp_max == 0.0 {
        return Ok(VorticityState::zeros(modes));
    }
    let mut s = VorticityState::random_divfree(modes, seed, 1.0)?;
    let scale = Complex64::from(amp_max / s.amp_max());
    for v in s.half_values_mut() {
        *v *= scale;
    }
    Ok(s)
}

/// Ranks at a shear state and at seeded generic baselines of matched amplitude.
pub fn corank_comparison(
    spec: &ShearFlowSpec,
    modes: Arc<ModeSet>,
    which: Structure,
    frames: &FrameSet,
    seeds: &[u64],
    tol: f64,
) -> Result<CorankReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one baseline seed is required".into()));
    }
    let shear = shear_state(spec, modes.clone())?;
    let tensor = assemble_global(&shear, which, frames)?;
    let rank = poisson_rank(&tensor, tol);
    let shear_summary = summarize(&shear, &tensor, frames, &rank, tol)?;
    let mut baselines = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let b = matched_baseline(modes.clone(), seed, shear.amp_max())?;
        let t = assemble_global(&b, which, frames)?;
        let r = poisson_rank(&t, tol);
        baselines.push(BaselineSummary { seed, kernel: summarize(&b, &t, frames, &r, tol)? });
    }
    let min_corank = baselines.iter().map(|b| b.kernel.corank).min().unwrap_or(0);
    let baseline_consistent = baselines.iter().all(|b| b.kernel.corank == min_corank);
    let degenerate = shear_summary.rank == 0 && baselines.iter().all(|b| b.kernel.rank == 0);
    Ok(CorankReport {
        structure: which,
        dim: tensor.dim(),
        tol,
        kernel_enlargement: shear_summary.corank as i64 - min_corank as i64,
        shear: shear_summary,
        baselines,
        baseline_consistent,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameBuilder;
    use crate::lattice::{Anisotropy, Truncation};

    fn modes(n: u32) -> Arc<ModeSet> {
        Arc::new(ModeSet::build(Truncation::new(n).unwrap(), Anisotropy::ISOTROPIC))
    }

    fn spec(p: [i32; 3], g: [f64; 3], profile: &[(i32, f64, f64)]) -> ShearFlowSpec {
        ShearFlowSpec { p: IVec3(p), g, profile: profile.iter().map(|&(n, re, im)| Harmonic { n, re, im }).collect() }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn shear_state_examples() {
        let m = modes(1);
        let s = shear_state(&spec([1, 0, 0], [0.0, 0.0, 1.0], &[(1, 1.0, 0.0), (-1, 1.0, 0.0)]), m.clone()).unwrap();
        let one = CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(s.at(IVec3::new(1, 0, 0)), one);
        assert_eq!(s.at(IVec3::new(-1, 0, 0)), one);
        assert_eq!(s.half_values().iter().filter(|v| v.norm() > 0.0).count(), 1);

        let m2 = modes(2);
        let s = shear_state(&spec([1, 1, 0], [1.0, -1.0, 0.0], &[(1, 0.5, 0.0), (2, 0.25, 0.1)]), m2).unwrap();
        assert_eq!(s.half_values().iter().filter(|v| v.norm() > 0.0).count(), 2);
        assert_eq!(s.divergence_residual(), 0.0);
        assert_eq!(s.at(IVec3::new(-2, -2, 0))[0], c(0.25, -0.1));
    }

    #[test]
    fn invalid_specs() {
        let m = modes(2);
        let bad_g = spec([1, 0, 0], [1.0, 0.0, 1.0], &[(1, 1.0, 0.0)]);
        assert!(matches!(shear_state(&bad_g, m.clone()), Err(Error::InvalidShear(_))));
        let not_coprime = spec([2, 0, 0], [0.0, 1.0, 0.0], &[(1, 1.0, 0.0)]);
        assert!(matches!(shear_state(&not_coprime, m.clone()), Err(Error::InvalidShear(_))));
        let too_big = spec([1, 0, 0], [0.0, 1.0, 0.0], &[(3, 1.0, 0.0)]);
        assert!(matches!(shear_state(&too_big, m.clone()), Err(Error::TruncationTooSmall { harmonic: 3, .. })));
        let inconsistent = spec([1, 0, 0], [0.0, 1.0, 0.0], &[(1, 1.0, 1.0), (-1, 1.0, 1.0)]);
        assert!(matches!(shear_state(&inconsistent, m), Err(Error::InvalidShear(_))));
    }

    #[test]
    fn shear_states_are_equilibria() {
        let m = modes(2);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let specs = [
            spec([1, 0, 0], [0.0, 0.0, 1.0], &[(1, 1.0, 0.0)]),
            spec([1, 1, 0], [1.0, -1.0, 0.0], &[(1, 0.5, 0.0), (2, -0.3, 0.7)]),
            spec([0, 1, -1], [2.0, 1.0, 1.0], &[(1, 0.2, -0.9)]),
        ];
        for sp in &specs {
            let s = shear_state(sp, m.clone()).unwrap();
            for which in [Structure::Direct, Structure::Simple, Structure::Projected, Structure::Reduced] {
                assert!(equilibrium_residual(&s, which, &frames).unwrap() <= 1e-14);
            }
        }
        let r = VorticityState::random_divfree(m, 4, 1.0).unwrap();
        assert!(equilibrium_residual(&r, Structure::Projected, &frames).unwrap() > 1e-2);
    }

    #[test]
    fn span_test_at_single_harmonic_shear() {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let s = shear_state(&spec([1, 0, 0], [0.0, 0.0, 1.0], &[(1, 1.0, 0.0)]), m.clone()).unwrap();
        let t = assemble_global(&s, Structure::Projected, &frames).unwrap();
        let rep = gradient_span_test(&s, &t, &frames, 1e-13, 1e-14).unwrap();
        assert!(rep.in_kernel);
        assert!(rep.projection_residual_ratio > 0.5);
        assert!((rep.angle_degrees.unwrap() - 90.0).abs() < 1e-12);
        assert!(!rep.degenerate);

        let r = VorticityState::random_divfree(m, 1, 1.0).unwrap();
        let t = assemble_global(&r, Structure::Projected, &frames).unwrap();
        assert!(matches!(gradient_span_test(&r, &t, &frames, 1e-13, 1e-14), Err(Error::NotEquilibrium(_))));
        let rep = span_report(&r, &t, &frames, 1e-13, 0.0).unwrap();
        assert!(!rep.in_kernel);
    }

    #[test]
    fn zero_profile_is_degenerate() {
        let m = modes(1);
        let frames = FrameSet::new(&m, FrameBuilder::ex());
        let sp = spec([1, 0, 0], [0.0, 0.0, 1.0], &[(1, 0.0, 0.0)]);
        let rep = corank_comparison(&sp, m, Structure::Projected, &frames, &[0, 1], 1e-14).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.shear.rank, 0);
        assert!(rep.baselines.iter().all(|b| b.kernel.rank == 0));
    }
}
