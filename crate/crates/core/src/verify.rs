//! Executable checks of the algebraic identities behind the three structures,
//! the numerical rank of the assembled tensor, and a seeded suite runner.
//!
//! Residuals are normalised so that a correct implementation sits at a small
//! multiple of machine epsilon independently of the sampled magnitudes.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{cross_matrix, FrameBuilder, FrameSet, Special};
use crate::lattice::{in_lattice, wavevector, Anisotropy, IVec3, ModeSet, Truncation};
use crate::observables::{grad_helicity, grad_helicity_reduced, CotangentField};
use crate::state::{VorticityState, DIVERGENCE_RTOL};
use crate::structures::{
    a_block, assemble_global, assemble_reduced, j_block, jcheck_block, jproj_block, jtilde_block, project, tilde_coefficients,
    GlobalTensor, Structure, TildeRoute,
};
use crate::{CMat3, CVec2, CVec3, Complex64, RVec3};

/// A structure block `B(j, k, w)`.
pub type BlockFn = fn(&RVec3, &RVec3, &CVec3) -> CMat3;

/// Default relative rank tolerance, `2⁻⁴⁶`.
pub const DEFAULT_RANK_TOL: f64 = 1.0 / 70_368_744_177_664.0;

pub fn block_fn(which: Structure) -> Result<BlockFn> {
    match which {
        Structure::Direct => Ok(a_block),
        Structure::Simple => Ok(j_block),
        Structure::Projected => Ok(jproj_block),
        Structure::Reduced => Err(Error::InvalidParameter("reduced blocks are 2×2; use cross_check_tilde".into())),
    }
}

fn cvec(v: &RVec3) -> CVec3 {
    v.map(Complex64::from)
}

/// `‖B(j,k,w) + B(k,j,w)ᵀ‖ / max(1, ‖B(j,k,w)‖)`.
pub fn check_antisymmetry(block: BlockFn, j: &RVec3, k: &RVec3, w: &CVec3) -> f64 {
    let b = block(j, k, w);
    (b + block(k, j, w).transpose()).norm() / b.norm().max(1.0)
}

/// `|B(j,k,w) k| / (max(1, ‖B‖) |k|)`.
pub fn right_kernel_residual(block: BlockFn, j: &RVec3, k: &RVec3, w: &CVec3) -> f64 {
    let b = block(j, k, w);
    (b * cvec(k)).norm() / (b.norm().max(1.0) * k.norm())
}

/// `|jᵀ B(j,k,w)| / (max(1, ‖B‖) |j|)`.
pub fn left_kernel_residual(block: BlockFn, j: &RVec3, k: &RVec3, w: &CVec3) -> f64 {
    let b = block(j, k, w);
    (cvec(j).transpose() * b).norm() / (b.norm().max(1.0) * j.norm())
}

/// `‖(J − A) − ((j+k)·w)[k]×‖`, relative to `max(1, |(j+k)·w| |k|)`.
pub fn direct_simple_difference(j: &RVec3, k: &RVec3, w: &CVec3) -> f64 {
    let div = cvec(&(j + k)).dot(w);
    let expected = cross_matrix(&cvec(k)) * div;
    let diff = j_block(j, k, w) - a_block(j, k, w) - expected;
    diff.norm() / (div.norm() * k.norm()).max(1.0)
}

fn is_coordinate(a: IVec3, trunc: Truncation) -> bool {
    in_lattice(a, trunc)
}

fn resolvable(a: IVec3, trunc: Truncation) -> bool {
    a.is_zero() || in_lattice(a, trunc)
}

/// True when `i, j, k` are lattice modes and every partial sum is zero or in the box.
pub fn triple_inside(modes: &ModeSet, i: IVec3, j: IVec3, k: IVec3) -> bool {
    let t = modes.truncation();
    [i, j, k].iter().all(|&a| is_coordinate(a, t)) && [i + j, j + k, k + i, i + j + k].iter().all(|&a| resolvable(a, t))
}

/// The Jacobi tensor `Z_{αβγ}(i,j,k)` of the truncated structure.
///
/// Blocks are linear in `ω_{j+k}`, so `∂B(j,k)/∂(ω_{j+k})_δ = B(j,k,e_δ)`
/// exactly. A derivative term is absent when `j+k` is not a lattice mode.
pub fn jacobi_tensor(
    modes: &ModeSet,
    i: IVec3,
    j: IVec3,
    k: IVec3,
    state: &VorticityState,
    which: Structure,
) -> Result<[[[Complex64; 3]; 3]; 3]> {
    let block = block_fn(which)?;
    let t = modes.truncation();
    for a in [i, j, k] {
        if !is_coordinate(a, t) {
            return Err(Error::OutOfRange { mode: a, n: t.n() });
        }
    }
    let aniso = modes.anisotropy();
    let wv = |a: IVec3| wavevector(a, aniso);
    let l = i + j + k;
    let wl = state.at(l);
    let e = |d: usize| CVec3::from_fn(|r, _| Complex64::from(if r == d { 1.0 } else { 0.0 }));

    // term (x, y, z): B(x, y+z, ω_l) contracted with ∂B(y, z)
    let term = |x: IVec3, y: IVec3, z: IVec3| -> Result<Option<(CMat3, [CMat3; 3])>> {
        let yz = y + z;
        if !is_coordinate(yz, t) {
            return Ok(None);
        }
        let (vx, vy, vz, vyz) = (wv(x)?, wv(y)?, wv(z)?, wv(yz)?);
        let outer = block(&vx, &vyz, &wl);
        let d = [block(&vy, &vz, &e(0)), block(&vy, &vz, &e(1)), block(&vy, &vz, &e(2))];
        Ok(Some((outer, d)))
    };
    let t1 = term(i, j, k)?;
    let t2 = term(k, i, j)?;
    let t3 = term(j, k, i)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut z = [[[zero; 3]; 3]; 3];
    for (al, za) in z.iter_mut().enumerate() {
        for (be, zb) in za.iter_mut().enumerate() {
            for (ga, zg) in zb.iter_mut().enumerate() {
                let mut s = zero;
                for de in 0..3 {
                    if let Some((o, d)) = &t1 {
                        s += o[(al, de)] * d[de][(be, ga)];
                    }
                    if let Some((o, d)) = &t2 {
                        s += o[(ga, de)] * d[de][(al, be)];
                    }
                    if let Some((o, d)) = &t3 {
                        s += o[(be, de)] * d[de][(ga, al)];
                    }
                }
                *zg = s;
            }
        }
    }
    Ok(z)
}

/// `max_{αβγ} |Z_{αβγ}(i,j,k)|`.
pub fn jacobi_residual(modes: &ModeSet, i: IVec3, j: IVec3, k: IVec3, state: &VorticityState, which: Structure) -> Result<f64> {
    let z = jacobi_tensor(modes, i, j, k, state, which)?;
    Ok(z.iter().flatten().flatten().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Natural magnitude of `Z`: `|ω_{i+j+k}| · M⁴` with `M` the largest of `|i|, |j|, |k|`.
pub fn jacobi_scale(modes: &ModeSet, i: IVec3, j: IVec3, k: IVec3, state: &VorticityState) -> Result<f64> {
    let aniso = modes.anisotropy();
    let m = [i, j, k].iter().map(|&a| wavevector(a, aniso).map(|v| v.norm())).collect::<Result<Vec<_>>>()?;
    let m = m.into_iter().fold(0.0, f64::max);
    Ok(state.at(i + j + k).norm() * m.powi(4))
}

/// Residual of the pairwise helicity identity
/// `𝒥(j,k,ω_{j+k})(k×ω_{-k})/|k|² + 𝒥(j,−j−k,ω_{-k})((−j−k)×ω_{j+k})/|j+k|²`,
/// relative to `|j| |ω_{j+k}| |ω_{-k}|`.
pub fn casimir_identity_residual(modes: &ModeSet, a_j: IVec3, a_k: IVec3, state: &VorticityState) -> Result<f64> {
    let aniso = modes.anisotropy();
    let a_m = a_j + a_k;
    if a_m.is_zero() {
        return Ok(0.0);
    }
    let j = wavevector(a_j, aniso)?;
    let k = wavevector(a_k, aniso)?;
    let m = wavevector(a_m, aniso)?;
    let w = state.at(a_m);
    let u = state.at(-a_k);
    let t1 = jproj_block(&j, &k, &w) * cvec(&k).cross(&u) / Complex64::from(k.norm_squared());
    let t2 = jproj_block(&j, &(-m), &u) * cvec(&(-m)).cross(&w) / Complex64::from(m.norm_squared());
    let r = (t1 + t2).norm();
    let scale = j.norm() * w.norm() * u.norm();
    Ok(if scale > 0.0 { r / scale } else { r })
}

/// `max_j |Σ_k jᵀ 𝒥(j,k,ω_{j+k}) g_k|`, relative to `|j| Σ_k ‖𝒥(j,k)‖ |g_k|`.
///
/// Vanishes for every covector `g` because each `j · ω_j` is a Casimir.
pub fn divergence_casimir_check(state: &VorticityState, g: &CotangentField) -> Result<f64> {
    let modes = state.modes();
    if g.0.len() != modes.len() {
        return Err(Error::ModeSetMismatch);
    }
    let res: Vec<f64> = (0..modes.len())
        .into_par_iter()
        .map(|i| {
            let j = &modes.mode(i).wavevector;
            let jc = cvec(j).transpose();
            let mut acc = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for (l, gk) in g.0.iter().enumerate() {
                if let Some(m) = modes.sum_position(i, l) {
                    let b = jproj_block(j, &modes.mode(l).wavevector, &state.get(m));
                    acc += (jc * b * gk)[0];
                    scale += b.norm() * gk.norm();
                }
            }
            let scale = scale * j.norm();
            if scale > 0.0 {
                acc.norm() / scale
            } else {
                acc.norm()
            }
        })
        .collect();
    Ok(res.into_iter().fold(0.0, f64::max))
}

/// Restricted helicity identities for the pair `k`, `−j−k`, as the largest
/// magnitude over `b ∈ {y, z}` and the four coefficient families, relative to `|j|`.
///
/// The fourth family pairs `J̃_z(j,k)_{b,z}` with `J̃_y(j,−j−k)_{b,y}`; it is the
/// first family with `k` and `−j−k` exchanged.
pub fn reduced_identity_residual(frames: &FrameSet, a_j: IVec3, a_k: IVec3) -> Result<f64> {
    let a_m = a_j + a_k;
    if a_m.is_zero() {
        return Err(Error::InvalidParameter(format!("j + k = 0 for j = {a_j}, k = {a_k}")));
    }
    let aniso = frames.anisotropy();
    let nj = wavevector(a_j, aniso)?.norm();
    let nk = wavevector(a_k, aniso)?.norm();
    let nm = wavevector(a_m, aniso)?.norm();
    let p = tilde_coefficients(frames, a_j, a_k)?;
    let q = tilde_coefficients(frames, a_j, -a_m)?;
    let mut worst = 0.0f64;
    for b in 0..2 {
        let r = [
            p.y[(b, 0)] / nk + q.z[(b, 1)] / nm,
            p.y[(b, 1)] / nk + q.y[(b, 1)] / nm,
            p.z[(b, 0)] / nk + q.z[(b, 0)] / nm,
            p.z[(b, 1)] / nk + q.y[(b, 0)] / nm,
        ];
        worst = r.iter().fold(worst, |a, v| a.max(v.abs()));
    }
    Ok(worst / nj)
}

/// `‖J̃(j,k,w̃) − [R_j J(j,k,R_{j+k}ᵀ(0,w̃)) R_kᵀ]_{yz}‖ / (‖w̃‖ |j| |k|)`,
/// together with the route the explicit block used.
pub fn cross_check_tilde(frames: &FrameSet, a_j: IVec3, a_k: IVec3, wtilde: &CVec2) -> Result<(f64, TildeRoute)> {
    let explicit = jtilde_block(frames, a_j, a_k, wtilde)?;
    let zero = Complex64::new(0.0, 0.0);
    let check = jcheck_block(frames, a_j, a_k, &CVec3::new(zero, wtilde[0], wtilde[1]))?;
    let lower = check.fixed_view::<2, 2>(1, 1).into_owned();
    let diff = (explicit.matrix - lower).norm();
    let aniso = frames.anisotropy();
    let scale = wtilde.norm() * wavevector(a_j, aniso)?.norm() * wavevector(a_k, aniso)?.norm();
    Ok((if scale > 0.0 { diff / scale } else { diff }, explicit.route))
}

/// Numerical rank of an assembled tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub dim: usize,
    pub rank: usize,
    pub corank: usize,
    pub tol: f64,
    /// Absolute cut-off `tol · σ_max · dim`.
    pub threshold: f64,
    pub sigma_max: f64,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
}

/// Rank by singular values `σ > tol · σ_max · dim`; an all-zero tensor has rank 0.
pub fn poisson_rank(tensor: &GlobalTensor, tol: f64) -> RankReport {
    let dim = tensor.dim();
    let mut sv: Vec<f64> =
        if dim == 0 { Vec::new() } else { tensor.matrix.clone().svd(false, false).singular_values.iter().copied().collect() };
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = tol * sigma_max * dim as f64;
    let rank = if sigma_max > 0.0 { sv.iter().filter(|&&s| s > threshold).count() } else { 0 };
    RankReport { dim, rank, corank: dim - rank, tol, threshold, sigma_max, singular_values: sv }
}

/// Assembles the chosen tensor at `state` and returns its numerical rank.
pub fn poisson_rank_at(state: &VorticityState, which: Structure, frames: &FrameSet, tol: f64) -> Result<RankReport> {
    Ok(poisson_rank(&assemble_global(state, which, frames)?, tol))
}

/// `‖K v‖ / (‖K‖ ‖v‖)`, or 0 when either norm vanishes.
pub fn kernel_residual(tensor: &GlobalTensor, covector: &DVector<Complex64>) -> Result<f64> {
    if covector.len() != tensor.dim() {
        return Err(Error::InvalidParameter(format!(
            "covector length {} does not match tensor dimension {}",
            covector.len(),
            tensor.dim()
        )));
    }
    let scale = tensor.norm() * covector.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((&tensor.matrix * covector).norm() / scale)
}

/// True iff `‖K v‖ ≤ tol · ‖K‖ · ‖v‖`.
pub fn kernel_contains(tensor: &GlobalTensor, covector: &DVector<Complex64>, tol: f64) -> Result<bool> {
    Ok(kernel_residual(tensor, covector)? <= tol)
}

/// Deliberate defects for negative-control runs of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Flips the sign of the `(j·w)[k]×` term of the simple block.
    FlipCrossTermSign,
}

fn faulty_j_block(j: &RVec3, k: &RVec3, w: &CVec3) -> CMat3 {
    let kj = cvec(&k.cross(j));
    w * kj.transpose() - cross_matrix(&cvec(k)) * cvec(j).dot(w)
}

fn faulty_jproj_block(j: &RVec3, k: &RVec3, w: &CVec3) -> CMat3 {
    faulty_j_block(j, k, &project(&(j + k), w))
}

/// Settings of [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub n: Truncation,
    pub aniso: Anisotropy,
    pub n_vector: [f64; 3],
    /// Samples per check.
    pub cases: usize,
    pub seed: u64,
    /// Tolerance of the Jacobi, helicity, restricted and cross-check families.
    pub identity_tol: f64,
    /// Tolerance of the antisymmetry, kernel and divergence-Casimir checks.
    pub block_tol: f64,
    pub fault: Option<Fault>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n: Truncation::new(1).expect("valid truncation"),
            aniso: Anisotropy::ISOTROPIC,
            n_vector: [1.0, 0.0, 0.0],
            cases: 1000,
            seed: 0,
            identity_tol: 1e-12,
            block_tol: 1e-13,
            fault: None,
        }
    }
}

/// Outcome of one identity family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    /// `None` for measured-only checks.
    pub tolerance: Option<f64>,
    pub passed: bool,
    /// Description of the case attaining `max_residual`.
    pub worst_case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckReport>,
    pub failed: Vec<String>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn random_index(rng: &mut ChaCha8Rng, n: u32) -> IVec3 {
    let n = n as i32;
    loop {
        let a = IVec3::new(rng.gen_range(-n..=n), rng.gen_range(-n..=n), rng.gen_range(-n..=n));
        if !a.is_zero() {
            return a;
        }
    }
}

fn random_c3(rng: &mut ChaCha8Rng) -> CVec3 {
    CVec3::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
}

fn random_c2(rng: &mut ChaCha8Rng) -> CVec2 {
    CVec2::from_fn(|_, _| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
}

/// `v > w`, with NaN ranked above every number.
fn exceeds(v: f64, w: f64) -> bool {
    (v.is_nan() && !w.is_nan()) || v > w
}

/// Lattice indices `(i, j, k)` of one Jacobi evaluation.
pub type Triple = (IVec3, IVec3, IVec3);

/// Evaluates `f` over `cases` in parallel and reduces to the worst residual in case order.
fn sweep<C, F>(name: &str, cases: &[C], tolerance: Option<f64>, f: F) -> Result<CheckReport>
where
    C: Sync + std::fmt::Debug,
    F: Fn(&C) -> Result<f64> + Sync,
{
    let values = cases.par_iter().map(&f).collect::<Result<Vec<f64>>>()?;
    let mut worst: Option<(usize, f64)> = None;
    for (idx, v) in values.iter().enumerate() {
        if worst.is_none_or(|(_, w)| exceeds(*v, w)) {
            worst = Some((idx, *v));
        }
    }
    let max_residual = worst.map_or(0.0, |(_, v)| v);
    let passed = tolerance.is_none_or(|t| max_residual <= t);
    Ok(CheckReport {
        name: name.to_string(),
        cases: cases.len(),
        max_residual,
        tolerance,
        passed,
        worst_case: worst.map(|(i, _)| format!("{:?}", cases[i])),
        note: None,
    })
}

fn max_of(name: &str, parts: Vec<CheckReport>) -> CheckReport {
    let mut out = parts[0].clone();
    out.name = name.to_string();
    for p in &parts[1..] {
        out.cases += p.cases;
        if exceeds(p.max_residual, out.max_residual) {
            out.max_residual = p.max_residual;
            out.worst_case = p.worst_case.clone();
        }
        out.passed &= p.passed;
    }
    out
}

/// Taintedness of the simple bracket: Jacobi residual of `J` at
/// `ω_l = P_l u + d l/|l|²` (so `l·ω_l = d`) for `d = 0.1` and `d = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaintReport {
    pub cases: usize,
    /// Triples whose residual vanishes identically even off the subspace.
    pub degenerate: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `min Z / (|d| · scale)` over non-degenerate triples.
    pub min_slope: f64,
}

pub fn jacobi_taint(modes: &Arc<ModeSet>, triples: &[(IVec3, IVec3, IVec3)], seed: u64) -> Result<TaintReport> {
    let results = triples
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j, k))| {
            let l = i + j + k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
            let lv = modes.wavevector_of(l)?;
            let base = project(&lv, &random_c3(&mut rng));
            let at = |d: f64| -> Result<(f64, f64)> {
                let mut s = VorticityState::zeros(modes.clone());
                s.set_mode(l, base + cvec(&lv) * Complex64::from(d / lv.norm_squared()))?;
                let z = jacobi_residual(modes, i, j, k, &s, Structure::Simple)?;
                let m = [i, j, k].iter().map(|&a| modes.wavevector_of(a).map(|v| v.norm())).collect::<Result<Vec<_>>>()?;
                Ok((z, m.into_iter().fold(0.0, f64::max).powi(4)))
            };
            let (z_small, scale) = at(0.1)?;
            let (z_big, _) = at(1.0)?;
            Ok((z_small, z_big, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report =
        TaintReport { cases: triples.len(), degenerate: 0, min_ratio: f64::INFINITY, max_ratio: 0.0, min_slope: f64::INFINITY };
    for (z_small, z_big, scale) in results {
        if z_big <= 1e-9 * scale {
            report.degenerate += 1;
            continue;
        }
        let ratio = z_big / z_small;
        report.min_ratio = report.min_ratio.min(ratio);
        report.max_ratio = report.max_ratio.max(ratio);
        report.min_slope = report.min_slope.min(z_big / scale);
    }
    Ok(report)
}

/// Draws Jacobi triples: `inside` ones up to `cases`, and truncated ("leaky") ones up to `cases`.
pub fn sample_triples(modes: &ModeSet, rng: &mut ChaCha8Rng, cases: usize) -> (Vec<Triple>, Vec<Triple>) {
    let n = modes.truncation().n();
    let (mut inside, mut leaky) = (Vec::new(), Vec::new());
    let mut draws = 0usize;
    while (inside.len() < cases || leaky.len() < cases) && draws < 1000 * cases.max(1) {
        draws += 1;
        let t = (random_index(rng, n), random_index(rng, n), random_index(rng, n));
        if triple_inside(modes, t.0, t.1, t.2) {
            if inside.len() < cases {
                inside.push(t);
            }
        } else if leaky.len() < cases {
            leaky.push(t);
        }
    }
    (inside, leaky)
}

/// Samples index pairs `(j, k)` in a chosen special-case category.
fn special_pairs(
    frames: &FrameSet,
    modes: &ModeSet,
    rng: &mut ChaCha8Rng,
    cases: usize,
    want: TildeRoute,
) -> Vec<(IVec3, IVec3, CVec2)> {
    let n = modes.truncation().n();
    let parallel: Vec<IVec3> = modes
        .modes()
        .iter()
        .enumerate()
        .filter(|(i, _)| frames.get(*i).special != Special::Generic)
        .map(|(_, m)| m.index)
        .collect();
    let mut out = Vec::new();
    if parallel.is_empty() {
        return out;
    }
    let mut draws = 0usize;
    while out.len() < cases && draws < 1000 * cases.max(1) {
        draws += 1;
        let p = parallel[rng.gen_range(0..parallel.len())];
        let r = random_index(rng, n);
        let (a_j, a_k) = match want {
            TildeRoute::JParallel => (p, r),
            TildeRoute::KParallel => (r, p),
            TildeRoute::SumParallel => (r, p - r),
            _ => (r, random_index(rng, n)),
        };
        if a_k.is_zero() || (a_j + a_k).is_zero() {
            continue;
        }
        match tilde_coefficients(frames, a_j, a_k) {
            Ok(c) if c.route == want => out.push((a_j, a_k, random_c2(rng))),
            _ => continue,
        }
    }
    out
}

/// Runs every identity family over seeded random samples.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.cases == 0 {
        return Err(Error::InvalidParameter("cases must be at least 1".into()));
    }
    for t in [cfg.identity_tol, cfg.block_tol] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerances must be positive, got {t}")));
        }
    }
    let modes = Arc::new(ModeSet::build(cfg.n, cfg.aniso));
    let frames = FrameSet::new(&modes, FrameBuilder::new(RVec3::from(cfg.n_vector))?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n.n();
    let aniso = cfg.aniso;
    let wv = move |a: IVec3| wavevector(a, &aniso);
    let mut checks = Vec::new();

    let (simple, projected): (BlockFn, BlockFn) = match cfg.fault {
        Some(Fault::FlipCrossTermSign) => (faulty_j_block, faulty_jproj_block),
        None => (j_block, jproj_block),
    };

    // block identities over random (j, k, w)
    let blocks: Vec<(IVec3, IVec3, CVec3)> =
        (0..cfg.cases).map(|_| (random_index(&mut rng, n), random_index(&mut rng, n), random_c3(&mut rng))).collect();
    let lt = Some(cfg.block_tol);
    let per = |name: &str, f: fn(BlockFn, &RVec3, &RVec3, &CVec3) -> f64| -> Result<CheckReport> {
        let a = sweep(name, &blocks, lt, |(j, k, w)| Ok(f(simple, &wv(*j)?, &wv(*k)?, w)))?;
        let b = sweep(name, &blocks, lt, |(j, k, w)| Ok(f(projected, &wv(*j)?, &wv(*k)?, w)))?;
        Ok(max_of(name, vec![a, b]))
    };
    checks.push(per("check_antisymmetry", check_antisymmetry)?);
    checks.push(per("right_kernel", right_kernel_residual)?);
    checks.push(per("left_kernel", left_kernel_residual)?);
    checks.push(sweep("direct_simple_difference", &blocks, lt, |(j, k, w)| Ok(direct_simple_difference(&wv(*j)?, &wv(*k)?, w)))?);

    // Jacobi family
    let divfree = VorticityState::random_divfree(modes.clone(), cfg.seed ^ 0x5eed, 1.0)?;
    let raw = VorticityState::random_raw(modes.clone(), cfg.seed ^ 0xbad, 1.0)?;
    let (inside, leaky) = sample_triples(&modes, &mut rng, cfg.cases);
    let it = Some(cfg.identity_tol);
    let jac = |s: &VorticityState, which: Structure, t: &(IVec3, IVec3, IVec3)| -> Result<f64> {
        let z = jacobi_residual(&modes, t.0, t.1, t.2, s, which)?;
        let scale = jacobi_scale(&modes, t.0, t.1, t.2, s)?;
        Ok(if scale > 0.0 { z / scale } else { z })
    };
    checks.push(sweep("jacobi_simple_subspace", &inside, it, |t| jac(&divfree, Structure::Simple, t))?);
    checks.push(max_of(
        "jacobi_projected",
        vec![
            sweep("jacobi_projected", &inside, it, |t| jac(&raw, Structure::Projected, t))?,
            sweep("jacobi_projected", &inside, it, |t| jac(&divfree, Structure::Projected, t))?,
        ],
    ));
    let mut truncated = sweep("jacobi_truncated", &leaky, None, |t| jac(&raw, Structure::Projected, t))?;
    truncated.note = Some("triples with a partial sum outside the box; measured only".into());
    checks.push(truncated);

    let taint_triples: Vec<_> = inside.iter().copied().filter(|t| !(t.0 + t.1 + t.2).is_zero()).collect();
    let taint = jacobi_taint(&modes, &taint_triples, cfg.seed)?;
    let ratio_ok = taint.min_ratio >= 9.9 && taint.max_ratio <= 10.1;
    let nondegenerate = taint.cases - taint.degenerate;
    checks.push(CheckReport {
        name: "jacobi_taint".into(),
        cases: taint.cases,
        max_residual: (taint.max_ratio - 10.0).abs().max((taint.min_ratio - 10.0).abs()) / 10.0,
        tolerance: Some(0.01),
        passed: nondegenerate > 0 && ratio_ok && taint.min_slope > 0.0,
        worst_case: None,
        note: Some(format!(
            "simple J off the subspace: ratio over a 10x divergence sweep in [{}, {}], min slope {:e}, {} degenerate triples",
            taint.min_ratio, taint.max_ratio, taint.min_slope, taint.degenerate
        )),
    });

    // Casimirs
    let pairs: Vec<(IVec3, IVec3)> = (0..cfg.cases)
        .map(|_| loop {
            let (a, b) = (random_index(&mut rng, n), random_index(&mut rng, n));
            if !(a + b).is_zero() {
                break (a, b);
            }
        })
        .collect();
    checks.push(max_of(
        "casimir_identity",
        vec![
            sweep("casimir_identity", &pairs, it, |(j, k)| casimir_identity_residual(&modes, *j, *k, &raw))?,
            sweep("casimir_identity", &pairs, it, |(j, k)| casimir_identity_residual(&modes, *j, *k, &divfree))?,
        ],
    ));
    let projected_tensor = assemble_global(&divfree, Structure::Projected, &frames)?;
    let gh = grad_helicity(&divfree);
    let hk = kernel_residual(&projected_tensor, &gh.flatten())?;
    checks.push(CheckReport {
        name: "helicity_kernel".into(),
        cases: 1,
        max_residual: hk,
        tolerance: it,
        passed: hk <= cfg.identity_tol,
        worst_case: None,
        note: None,
    });
    let reduced = divfree.to_reduced(&frames, DIVERGENCE_RTOL)?;
    let reduced_tensor = assemble_reduced(&reduced, &frames)?;
    let rhk = kernel_residual(&reduced_tensor, &grad_helicity_reduced(&reduced).flatten())?;
    checks.push(CheckReport {
        name: "reduced_helicity_kernel".into(),
        cases: 1,
        max_residual: rhk,
        tolerance: it,
        passed: rhk <= cfg.identity_tol,
        worst_case: None,
        note: None,
    });
    let covectors: Vec<u64> = (0..8).map(|s| cfg.seed.wrapping_mul(31).wrapping_add(s)).collect();
    let dc = sweep("divergence_casimir", &covectors, lt, |&s| {
        let mut r = ChaCha8Rng::seed_from_u64(s);
        let g = CotangentField((0..modes.len()).map(|_| random_c3(&mut r)).collect());
        divergence_casimir_check(&raw, &g)
    })?;
    checks.push(dc);
    checks.push(sweep("reduced_identity", &pairs, it, |(j, k)| reduced_identity_residual(&frames, *j, *k))?);

    // Reduced tables against conjugation
    let generic: Vec<(IVec3, IVec3, CVec2)> = pairs.iter().map(|&(j, k)| (j, k, random_c2(&mut rng))).collect();
    let cc = |name: &str, cases: &[(IVec3, IVec3, CVec2)]| {
        sweep(name, cases, it, |(j, k, w)| cross_check_tilde(&frames, *j, *k, w).map(|r| r.0))
    };
    checks.push(cc("cross_check_tilde", &generic)?);
    for (name, route) in [
        ("cross_check_tilde_j_parallel", TildeRoute::JParallel),
        ("cross_check_tilde_k_parallel", TildeRoute::KParallel),
        ("cross_check_tilde_sum_parallel", TildeRoute::SumParallel),
    ] {
        let cases = special_pairs(&frames, &modes, &mut rng, cfg.cases.clamp(1, 100), route);
        let mut report = cc(name, &cases)?;
        if cases.is_empty() {
            report.note = Some("no lattice pairs in this category for the configured n".into());
        }
        checks.push(report);
    }

    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    Ok(SuiteReport { config: cfg.clone(), passed: failed.is_empty(), failed, checks })
}
