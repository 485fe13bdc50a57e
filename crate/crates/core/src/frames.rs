//! Fixed-size linear algebra: cross-product matrices, the divergence-free
//! projector, and the per-mode rotation frames `R_j` that send `j` to the x-axis.

use nalgebra::{Matrix3, Scalar, Vector3};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{in_lattice, set_position, Anisotropy, IVec3, ModeSet, Truncation};
use crate::{RMat3, RVec3};

/// Relative threshold for `|j × n|` when `n` is not a coordinate axis and
/// integer parallelism tests are unavailable.
const PARALLEL_RTOL: f64 = 1e-14;

/// Antisymmetric matrix with `cross_matrix(a) * b == a × b`.
pub fn cross_matrix<T>(a: &Vector3<T>) -> Matrix3<T>
where
    T: Scalar + Zero + Copy + std::ops::Neg<Output = T>,
{
    let z = T::zero();
    Matrix3::new(z, -a[2], a[1], a[2], z, -a[0], -a[1], a[0], z)
}

/// `I - j jᵀ / |j|²`.
pub fn leray_projector(j: &RVec3) -> Result<RMat3> {
    let n2 = j.norm_squared();
    if n2 == 0.0 {
        return Err(Error::InvalidParameter("projector of the zero wavevector".into()));
    }
    Ok(RMat3::identity() - j * j.transpose() / n2)
}

/// `diag(-1, -1, 1)`, the relation `R_{-j} R_jᵀ` between opposite frames.
pub fn signature() -> RMat3 {
    RMat3::from_diagonal(&RVec3::new(-1.0, -1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Special {
    Generic,
    /// `j = a n` with `a > 0`.
    PlusN,
    /// `j = -a n` with `a > 0`.
    MinusN,
}

#[derive(Debug, Clone)]
pub struct RotationFrame {
    pub j: RVec3,
    pub r: RMat3,
    pub norm: f64,
    /// `|j × n|` for the unit reference vector `n`; zero in the special cases.
    pub norm2: f64,
    pub special: Special,
}

/// Builds rotation frames for a fixed reference vector `n`.
#[derive(Debug, Clone)]
pub struct FrameBuilder {
    n: RVec3,
    /// `Some((axis, sign))` when `n` is a positive multiple of `sign * e_axis`.
    axis: Option<(usize, i32)>,
    /// Frame used for `j = a n`, `a > 0`. Identity when `n = e_x`.
    base: RMat3,
}

impl FrameBuilder {
    pub fn new(n: RVec3) -> Result<Self> {
        let len = n.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParameter(format!("reference vector n must be nonzero, got {n:?}")));
        }
        let n = n / len;
        let nonzero: Vec<usize> = (0..3).filter(|&i| n[i] != 0.0).collect();
        let axis = (nonzero.len() == 1).then(|| (nonzero[0], n[nonzero[0]].signum() as i32));
        let base = if axis == Some((0, 1)) {
            RMat3::identity()
        } else {
            // The least-aligned coordinate axis is never parallel to n.
            let aux =
                (0..3).min_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).map(|i| RVec3::ith(i, 1.0)).unwrap_or_else(RVec3::x);
            generic_rows(&n, &aux)
        };
        Ok(FrameBuilder { n, axis, base })
    }

    /// The default reference vector `n = e_x`.
    pub fn ex() -> Self {
        FrameBuilder { n: RVec3::x(), axis: Some((0, 1)), base: RMat3::identity() }
    }

    pub fn n(&self) -> &RVec3 {
        &self.n
    }

    /// True when the special-case formula tables (written in e_x components) apply.
    pub fn is_ex(&self) -> bool {
        self.axis == Some((0, 1))
    }

    /// Special-case classification of the lattice index `a` with wavevector `j`.
    ///
    /// Uses integer logic when `n` is a coordinate axis (the anisotropy is
    /// diagonal, so `j ∥ e_i` iff `a` has only its i-th component nonzero).
    pub fn classify(&self, a: IVec3, j: &RVec3) -> Special {
        match self.axis {
            Some((ax, sign)) => {
                let only_axis = (0..3).all(|i| i == ax || a.0[i] == 0);
                if !only_axis || a.0[ax] == 0 {
                    Special::Generic
                } else if a.0[ax].signum() == sign {
                    Special::PlusN
                } else {
                    Special::MinusN
                }
            }
            None => self.classify_real(j),
        }
    }

    /// Classification from the wavevector alone.
    pub fn classify_real(&self, j: &RVec3) -> Special {
        let c = j.cross(&self.n);
        let exact_axis = self.axis.is_some() && c == RVec3::zeros();
        if exact_axis || (self.axis.is_none() && c.norm() <= PARALLEL_RTOL * j.norm()) {
            if j.dot(&self.n) > 0.0 {
                Special::PlusN
            } else {
                Special::MinusN
            }
        } else {
            Special::Generic
        }
    }

    pub fn frame_with(&self, j: &RVec3, special: Special) -> RotationFrame {
        let norm = j.norm();
        match special {
            Special::PlusN => RotationFrame { j: *j, r: self.base, norm, norm2: 0.0, special },
            Special::MinusN => RotationFrame { j: *j, r: signature() * self.base, norm, norm2: 0.0, special },
            Special::Generic => {
                RotationFrame { j: *j, r: generic_rows(j, &self.n), norm, norm2: j.cross(&self.n).norm(), special }
            }
        }
    }

    /// Frame for a lattice index (in or out of the truncation box).
    pub fn frame(&self, a: IVec3, j: &RVec3) -> RotationFrame {
        self.frame_with(j, self.classify(a, j))
    }
}

fn generic_rows(j: &RVec3, n: &RVec3) -> RMat3 {
    let norm = j.norm();
    let c = j.cross(n);
    let norm2 = c.norm();
    let r1 = j / norm;
    let r2 = c / norm2;
    let r3 = j.cross(&c) / (norm2 * norm);
    RMat3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()])
}

/// Rotation frame for a real wavevector `j` and reference vector `n`.
pub fn rotation_frame(j: &RVec3, n: &RVec3) -> Result<RotationFrame> {
    if j.norm_squared() == 0.0 {
        return Err(Error::InvalidParameter("rotation frame of the zero wavevector".into()));
    }
    let b = FrameBuilder::new(*n)?;
    let special = b.classify_real(j);
    Ok(b.frame_with(j, special))
}

/// Frames for every mode of a [`ModeSet`], plus on-the-fly frames for
/// intermediate sums that leave the box.
#[derive(Debug, Clone)]
pub struct FrameSet {
    builder: FrameBuilder,
    aniso: Anisotropy,
    trunc: Truncation,
    frames: Vec<RotationFrame>,
}

impl FrameSet {
    pub fn new(modes: &ModeSet, builder: FrameBuilder) -> Self {
        let frames = modes.modes().iter().map(|m| builder.frame(m.index, &m.wavevector)).collect();
        FrameSet { builder, aniso: *modes.anisotropy(), trunc: modes.truncation(), frames }
    }

    /// Frame of any nonzero index, cached when `a` lies in the box.
    pub fn frame_of(&self, a: IVec3) -> Result<RotationFrame> {
        if in_lattice(a, self.trunc) {
            return Ok(self.frames[set_position(self.trunc, a)].clone());
        }
        let j = crate::lattice::wavevector(a, &self.aniso)?;
        Ok(self.builder.frame(a, &j))
    }

    pub fn anisotropy(&self) -> &Anisotropy {
        &self.aniso
    }

    pub fn builder(&self) -> &FrameBuilder {
        &self.builder
    }

    pub fn get(&self, i: usize) -> &RotationFrame {
        &self.frames[i]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
