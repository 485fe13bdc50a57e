//! Structure-matrix blocks and the assembled Poisson tensor.
//!
//! All blocks are functions of two wavevectors `j`, `k` and the single
//! vorticity coefficient `w = ω_{j+k}`, linear in `w`:
//!
//! * `A(j,k,w) = w (k×j)ᵀ − (k·w) [k]×`, the block of the raw mode equations;
//! * `J(j,k,w) = w (k×j)ᵀ + (j·w) [k]×`, the simple Poisson structure;
//! * `𝒥(j,k,w) = J(j,k, P_{j+k} w)`, its projected extension;
//! * `J̌ = R_j J R_kᵀ` in rotated coordinates, and `J̃` its lower-right 2×2 block.
//!
//! Block functions never truncate. Callers pass `w = 0` when `j+k` is zero or
//! outside the lattice.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{cross_matrix, leray_projector, FrameSet, Special};
use crate::lattice::{IVec3, ModeSet};
use crate::state::{ReducedState, VorticityState};
use crate::{CMat2, CMat3, CVec2, CVec3, Complex64, RVec3};

/// Real 2×2 matrix.
pub type RMat2 = Matrix2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Raw mode equations built from `A` (not a Poisson structure).
    Direct,
    Simple,
    Projected,
    Reduced,
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::Direct => "direct",
            Structure::Simple => "simple",
            Structure::Projected => "projected",
            Structure::Reduced => "reduced",
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Structure::Direct),
            "simple" => Ok(Structure::Simple),
            "projected" => Ok(Structure::Projected),
            "reduced" => Ok(Structure::Reduced),
            other => Err(Error::InvalidParameter(format!("unknown structure '{other}'"))),
        }
    }
}

fn c(v: &RVec3) -> CVec3 {
    v.map(Complex64::from)
}

pub fn a_block(j: &RVec3, k: &RVec3, w: &CVec3) -> CMat3 {
    let kj = c(&k.cross(j));
    let kc = c(k);
    w * kj.transpose() - cross_matrix(&kc) * kc.dot(w)
}

pub fn j_block(j: &RVec3, k: &RVec3, w: &CVec3) -> CMat3 {
    let kj = c(&k.cross(j));
    w * kj.transpose() + cross_matrix(&c(k)) * c(j).dot(w)
}

/// `P_{j+k} w`, with the zero-mode convention `P_0 w = 0`.
pub fn project(m: &RVec3, w: &CVec3) -> CVec3 {
    match leray_projector(m) {
        Ok(p) => p.map(Complex64::from) * w,
        Err(_) => CVec3::zeros(),
    }
}

pub fn jproj_block(j: &RVec3, k: &RVec3, w: &CVec3) -> CMat3 {
    j_block(j, k, &project(&(j + k), w))
}

/// `J(j,k,w) x` without forming the matrix.
#[inline]
pub fn j_apply(j: &RVec3, k: &RVec3, w: &CVec3, x: &CVec3) -> CVec3 {
    let kj = k.cross(j);
    let t1 = kj[0] * x[0] + kj[1] * x[1] + kj[2] * x[2];
    let jw = j[0] * w[0] + j[1] * w[1] + j[2] * w[2];
    let kx = CVec3::new(k[1] * x[2] - k[2] * x[1], k[2] * x[0] - k[0] * x[2], k[0] * x[1] - k[1] * x[0]);
    w * t1 + kx * jw
}

/// `A(j,k,w) x` without forming the matrix.
#[inline]
pub fn a_apply(j: &RVec3, k: &RVec3, w: &CVec3, x: &CVec3) -> CVec3 {
    let kj = k.cross(j);
    let t1 = kj[0] * x[0] + kj[1] * x[1] + kj[2] * x[2];
    let kw = k[0] * w[0] + k[1] * w[1] + k[2] * w[2];
    let kx = CVec3::new(k[1] * x[2] - k[2] * x[1], k[2] * x[0] - k[0] * x[2], k[0] * x[1] - k[1] * x[0]);
    w * t1 - kx * kw
}

/// `R_j J(j, k, R_{j+k}ᵀ w̌) R_kᵀ` for lattice indices `a_j`, `a_k`.
pub fn jcheck_block(frames: &FrameSet, a_j: IVec3, a_k: IVec3, wcheck: &CVec3) -> Result<CMat3> {
    let fj = frames.frame_of(a_j)?;
    let fk = frames.frame_of(a_k)?;
    let m = a_j + a_k;
    if m.is_zero() {
        return Ok(CMat3::zeros());
    }
    let fm = frames.frame_of(m)?;
    let w = fm.r.transpose().map(Complex64::from) * wcheck;
    let block = j_block(&fj.j, &fk.j, &w);
    Ok(fj.r.map(Complex64::from) * block * fk.r.transpose().map(Complex64::from))
}

/// Which construction produced a restricted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TildeRoute {
    /// `j + k = 0`: the block multiplies `ω̃_0 = 0`.
    Zero,
    Generic,
    JParallel,
    KParallel,
    SumParallel,
    /// Two or more of `j, k, j+k` parallel to `n`, or `n ≠ e_x`: lower-right
    /// block of `J̌`.
    Conjugation,
}

/// The coefficient matrices of `J̃(j,k) = J̃_y ω̃_{j+k,y} + J̃_z ω̃_{j+k,z}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeCoefficients {
    pub y: RMat2,
    pub z: RMat2,
    pub route: TildeRoute,
}

impl TildeCoefficients {
    pub fn apply(&self, wtilde: &CVec2) -> CMat2 {
        self.y.map(Complex64::from) * wtilde[0] + self.z.map(Complex64::from) * wtilde[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeBlock {
    pub matrix: CMat2,
    pub route: TildeRoute,
}

/// Explicit restricted coefficients for `j, k, j+k` all non-parallel to `n`.
///
/// The closed-form components below use the opposite orientation of the last
/// two frame rows; they are negated so that they agree with `J̌`.
pub fn tilde_generic(j: &RVec3, k: &RVec3, n: &RVec3) -> (RMat2, RMat2) {
    let m = j + k;
    let y = tilde_y_closed_form(j, k, n);
    let c = j.cross(k);
    let nc = n.dot(&c);
    let (nj, nk, nm) = (j.norm(), k.norm(), m.norm());
    let (pj, pk, pm) = (j.cross(n).norm(), k.cross(n).norm(), m.cross(n).norm());
    let zyy = nc * n.cross(&c).norm_squared() / (pj * pk * pm * nm);
    let zyz = -(nk / nm) * tilde_y_closed_form(j, &-m, n)[(0, 0)];
    // J̃_z(j,k)_{zy} = -J̃_z(k,j)_{yz} = (|j|/|j+k|) J̃_y(k,-j-k)_{yy}
    let zzy = (nj / nm) * tilde_y_closed_form(k, &-m, n)[(0, 0)];
    let zzz = -nc * nj * nk * pm / (pj * pk * nm);
    let z = RMat2::new(zyy, zyz, zzy, zzz);
    (-y, -z)
}

fn tilde_y_closed_form(j: &RVec3, k: &RVec3, n: &RVec3) -> RMat2 {
    let m = j + k;
    let c = j.cross(k);
    let nc = n.dot(&c);
    let (nj, nk) = (j.norm(), k.norm());
    let (pj, pk, pm) = (j.cross(n).norm(), k.cross(n).norm(), m.cross(n).norm());
    let yy = n.dot(&c.cross(&(k * (pj * pj) + j * (pk * pk)))) / (pj * pk * pm);
    let yz = -nc * pj * nk / (pm * pk);
    let zy = -nc * pk * nj / (pm * pj);
    RMat2::new(yy, yz, zy, 0.0)
}

fn sign(s: Special) -> f64 {
    if s == Special::MinusN {
        -1.0
    } else {
        1.0
    }
}

/// `j = s a e_x`.
fn tilde_j_parallel(j: &RVec3, k: &RVec3, s: f64) -> (RMat2, RMat2) {
    let m = (j + k).norm();
    let jx = j[0];
    let y = RMat2::new(jx * k[2] * s, 0.0, -jx * k[1], 0.0);
    let z = RMat2::new(jx * jx * k[1] * s, jx * k[2] * k.norm() * s, jx * jx * k[2], -jx * k[1] * k.norm()) / m;
    (y, z)
}

/// `k = s a e_x`.
fn tilde_k_parallel(j: &RVec3, k: &RVec3, s: f64) -> (RMat2, RMat2) {
    let m = (j + k).norm();
    let kx = k[0];
    let nj = j.norm();
    let y = RMat2::new(-kx * j[2] * s, kx * j[1], 0.0, 0.0);
    let z = RMat2::new(-j[1] * kx * kx * s, -j[2] * kx * kx, -kx * j[2] * nj * s, kx * j[1] * nj) / m;
    (y, z)
}

/// `j + k = s a e_x`.
fn tilde_sum_parallel(j: &RVec3, k: &RVec3, s: f64) -> (RMat2, RMat2) {
    let sx = j[0] + k[0];
    let (nj, nk) = (j.norm(), k.norm());
    let y = RMat2::new(sx * j[2] * s, nk * j[1] * s, nj * j[1] * s, 0.0);
    let z = RMat2::new(-sx * j[1], nk * j[2], nj * j[2], 0.0);
    (y, z)
}

/// Restricted coefficients read off the conjugated block `J̌`.
pub fn tilde_by_conjugation(frames: &FrameSet, a_j: IVec3, a_k: IVec3) -> Result<(RMat2, RMat2)> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let by = jcheck_block(frames, a_j, a_k, &CVec3::new(zero, one, zero))?;
    let bz = jcheck_block(frames, a_j, a_k, &CVec3::new(zero, zero, one))?;
    let lower = |b: &CMat3| RMat2::new(b[(1, 1)].re, b[(1, 2)].re, b[(2, 1)].re, b[(2, 2)].re);
    Ok((lower(&by), lower(&bz)))
}

/// Restricted coefficients `(J̃_y, J̃_z)` for lattice indices `a_j`, `a_k`,
/// dispatched over the generic formulas, the three special-case tables, or
/// the conjugation construction.
pub fn tilde_coefficients(frames: &FrameSet, a_j: IVec3, a_k: IVec3) -> Result<TildeCoefficients> {
    let a_m = a_j + a_k;
    if a_m.is_zero() {
        let zero = RMat2::zeros();
        return Ok(TildeCoefficients { y: zero, z: zero, route: TildeRoute::Zero });
    }
    let fj = frames.frame_of(a_j)?;
    let fk = frames.frame_of(a_k)?;
    let fm = frames.frame_of(a_m)?;
    let specials = [fj.special, fk.special, fm.special];
    let count = specials.iter().filter(|s| **s != Special::Generic).count();
    let builder = frames.builder();
    let (route, (y, z)) = match count {
        0 => (TildeRoute::Generic, tilde_generic(&fj.j, &fk.j, builder.n())),
        1 if builder.is_ex() => {
            if fj.special != Special::Generic {
                (TildeRoute::JParallel, tilde_j_parallel(&fj.j, &fk.j, sign(fj.special)))
            } else if fk.special != Special::Generic {
                (TildeRoute::KParallel, tilde_k_parallel(&fj.j, &fk.j, sign(fk.special)))
            } else {
                (TildeRoute::SumParallel, tilde_sum_parallel(&fj.j, &fk.j, sign(fm.special)))
            }
        }
        _ => (TildeRoute::Conjugation, tilde_by_conjugation(frames, a_j, a_k)?),
    };
    Ok(TildeCoefficients { y, z, route })
}

pub fn jtilde_block(frames: &FrameSet, a_j: IVec3, a_k: IVec3, wtilde: &CVec2) -> Result<TildeBlock> {
    let coeffs = tilde_coefficients(frames, a_j, a_k)?;
    Ok(TildeBlock { matrix: coeffs.apply(wtilde), route: coeffs.route })
}

/// Dense Poisson tensor over all lattice modes.
#[derive(Debug, Clone)]
pub struct GlobalTensor {
    pub structure: Structure,
    pub block_dim: usize,
    pub modes: Arc<ModeSet>,
    pub matrix: DMatrix<Complex64>,
}

impl GlobalTensor {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `‖K + Kᵀ‖_F`.
    pub fn antisymmetry_defect(&self) -> f64 {
        (&self.matrix + self.matrix.transpose()).norm()
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "structure": self.structure.name(),
            "block_dim": self.block_dim,
            "rows": self.matrix.nrows(),
            "cols": self.matrix.ncols(),
            "encoding": "row-major, little-endian f64 pairs (re, im)",
            "N": self.modes.truncation().n(),
            "aniso": self.modes.anisotropy().entries(),
            "modes": self.modes.modes().iter().map(|m| m.index.0).collect::<Vec<_>>(),
        })
    }

    /// Row-major little-endian `(re, im)` pairs of 64-bit floats.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in 0..self.matrix.nrows() {
            for col in 0..self.matrix.ncols() {
                let v = self.matrix[(r, col)];
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Assembles the block matrix with block `(j, k)` equal to the chosen structure
/// at `ω_{j+k}`, zero when `j+k` is zero or outside the lattice.
pub fn assemble_global(state: &VorticityState, which: Structure, frames: &FrameSet) -> Result<GlobalTensor> {
    match which {
        Structure::Simple | Structure::Projected => Ok(assemble_full(state, which)),
        Structure::Reduced => {
            let reduced = state.to_reduced(frames, crate::state::DIVERGENCE_RTOL)?;
            assemble_reduced(&reduced, frames)
        }
        Structure::Direct => Err(Error::InvalidParameter("the direct (A-based) evaluator has no Poisson tensor".into())),
    }
}

fn assemble_full(state: &VorticityState, which: Structure) -> GlobalTensor {
    let modes = state.modes().clone();
    let n = modes.len();
    let rows: Vec<Vec<CMat3>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let j = &modes.mode(i).wavevector;
            (0..n)
                .map(|l| {
                    let k = &modes.mode(l).wavevector;
                    match modes.sum_position(i, l) {
                        Some(m) => {
                            let w = state.get(m);
                            if which == Structure::Projected {
                                jproj_block(j, k, &w)
                            } else {
                                j_block(j, k, &w)
                            }
                        }
                        None => CMat3::zeros(),
                    }
                })
                .collect()
        })
        .collect();
    let mut matrix = DMatrix::zeros(3 * n, 3 * n);
    for (i, row) in rows.iter().enumerate() {
        for (l, b) in row.iter().enumerate() {
            matrix.fixed_view_mut::<3, 3>(3 * i, 3 * l).copy_from(b);
        }
    }
    GlobalTensor { structure: which, block_dim: 3, modes, matrix }
}

pub fn assemble_reduced(state: &ReducedState, frames: &FrameSet) -> Result<GlobalTensor> {
    let modes = state.modes().clone();
    let n = modes.len();
    let rows: Vec<Result<Vec<CMat2>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|l| match modes.sum_position(i, l) {
                    Some(m) => {
                        let coeffs = tilde_coefficients(frames, modes.mode(i).index, modes.mode(l).index)?;
                        Ok(coeffs.apply(&state.get(m)))
                    }
                    None => Ok(CMat2::zeros()),
                })
                .collect()
        })
        .collect();
    let mut matrix = DMatrix::zeros(2 * n, 2 * n);
    for (i, row) in rows.into_iter().enumerate() {
        for (l, b) in row?.iter().enumerate() {
            matrix.fixed_view_mut::<2, 2>(2 * i, 2 * l).copy_from(b);
        }
    }
    Ok(GlobalTensor { structure: Structure::Reduced, block_dim: 2, modes, matrix })
}
