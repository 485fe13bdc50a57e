//! The truncated wavenumber lattice.
//!
//! Modes are nonzero integer triples `a` inside the symmetric box
//! `|a_x|, |a_y|, |a_z| <= N`. Each carries its physical wavevector
//! `j = diag(nu) a`. Modes are stored in lexicographic order on `(a_x, a_y, a_z)`;
//! the canonical half-lattice holds the modes whose first nonzero component is
//! positive.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::RVec3;

/// An integer lattice index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IVec3(pub [i32; 3]);

impl IVec3 {
    pub const ZERO: IVec3 = IVec3([0, 0, 0]);

    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        IVec3([x, y, z])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// True when the first nonzero component is positive.
    pub fn is_canonical(&self) -> bool {
        self.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
    }

    pub fn scale(&self, s: i32) -> Self {
        IVec3(self.0.map(|c| c * s))
    }
}

impl fmt::Display for IVec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl Add for IVec3 {
    type Output = IVec3;
    fn add(self, o: IVec3) -> IVec3 {
        IVec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for IVec3 {
    type Output = IVec3;
    fn sub(self, o: IVec3) -> IVec3 {
        self + (-o)
    }
}

impl Neg for IVec3 {
    type Output = IVec3;
    fn neg(self) -> IVec3 {
        IVec3(self.0.map(|c| -c))
    }
}

impl From<[i32; 3]> for IVec3 {
    fn from(a: [i32; 3]) -> Self {
        IVec3(a)
    }
}

/// Diagonal anisotropy matrix: the unit wavenumbers along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Anisotropy([f64; 3]);

impl Anisotropy {
    pub const ISOTROPIC: Anisotropy = Anisotropy([1.0, 1.0, 1.0]);

    pub fn new(nu: [f64; 3]) -> Result<Self> {
        if nu.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(Anisotropy(nu))
        } else {
            Err(Error::InvalidParameter(format!("anisotropy entries must be finite and positive, got {nu:?}")))
        }
    }

    pub fn entries(&self) -> [f64; 3] {
        self.0
    }

    fn apply(&self, a: IVec3) -> RVec3 {
        RVec3::new(self.0[0] * a.0[0] as f64, self.0[1] * a.0[1] as f64, self.0[2] * a.0[2] as f64)
    }
}

impl Default for Anisotropy {
    fn default() -> Self {
        Self::ISOTROPIC
    }
}

impl TryFrom<[f64; 3]> for Anisotropy {
    type Error = Error;
    fn try_from(nu: [f64; 3]) -> Result<Self> {
        Anisotropy::new(nu)
    }
}

impl From<Anisotropy> for [f64; 3] {
    fn from(a: Anisotropy) -> [f64; 3] {
        a.0
    }
}

/// Box half-width `N >= 1` on integer mode indices. The zero mode is never included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Truncation(u32);

impl Truncation {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("truncation N must be >= 1".into()));
        }
        // Keeps (2N+1)^3 comfortably inside usize and i32 arithmetic on sums.
        if n > 64 {
            return Err(Error::InvalidParameter(format!("truncation N = {n} is too large")));
        }
        Ok(Truncation(n))
    }

    pub fn n(&self) -> u32 {
        self.0
    }

    fn width(&self) -> usize {
        2 * self.0 as usize + 1
    }
}

impl TryFrom<u32> for Truncation {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Truncation::new(n)
    }
}

impl From<Truncation> for u32 {
    fn from(t: Truncation) -> u32 {
        t.0
    }
}

/// Physical wavevector `diag(nu) a` of a nonzero lattice index.
pub fn wavevector(a: IVec3, aniso: &Anisotropy) -> Result<RVec3> {
    if a.is_zero() {
        return Err(Error::InvalidMode(a));
    }
    Ok(aniso.apply(a))
}

/// Truncation membership: `a != 0` and every component within the box.
pub fn in_lattice(a: IVec3, trunc: Truncation) -> bool {
    !a.is_zero() && a.max_abs() <= trunc.n()
}

/// A single lattice mode with its precomputed wavevector data.
#[derive(Debug, Clone)]
pub struct Mode {
    pub index: IVec3,
    pub wavevector: RVec3,
    pub norm_sq: f64,
    pub norm: f64,
    /// Position of `-index` in the mode list.
    pub partner: usize,
    pub canonical: bool,
    /// Position in the half-lattice list of the canonical member of `{a, -a}`.
    pub half_pos: usize,
}

/// The truncated lattice: all nonzero integer triples in the box, with wavevectors.
#[derive(Debug, Clone)]
pub struct ModeSet {
    trunc: Truncation,
    aniso: Anisotropy,
    modes: Vec<Mode>,
    half: Vec<usize>,
}

impl ModeSet {
    pub fn build(trunc: Truncation, aniso: Anisotropy) -> Self {
        let n = trunc.n() as i32;
        let mut indices = Vec::with_capacity(trunc.width().pow(3) - 1);
        for x in -n..=n {
            for y in -n..=n {
                for z in -n..=n {
                    let a = IVec3::new(x, y, z);
                    if !a.is_zero() {
                        indices.push(a);
                    }
                }
            }
        }
        let len = indices.len();
        let mut modes: Vec<Mode> = indices
            .into_iter()
            .map(|a| {
                let j = aniso.apply(a);
                let norm_sq = j.norm_squared();
                Mode {
                    index: a,
                    wavevector: j,
                    norm_sq,
                    norm: norm_sq.sqrt(),
                    partner: usize::MAX,
                    canonical: a.is_canonical(),
                    half_pos: usize::MAX,
                }
            })
            .collect();

        for m in modes.iter_mut() {
            m.partner = set_position(trunc, -m.index);
        }
        let half: Vec<usize> = (0..len).filter(|&i| modes[i].canonical).collect();
        for (pos, &i) in half.iter().enumerate() {
            modes[i].half_pos = pos;
            let p = modes[i].partner;
            modes[p].half_pos = pos;
        }
        ModeSet { trunc, aniso, modes, half }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn anisotropy(&self) -> &Anisotropy {
        &self.aniso
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.modes[i]
    }

    /// Mode positions of the canonical half-lattice, in lattice order.
    pub fn half(&self) -> &[usize] {
        &self.half
    }

    pub fn contains(&self, a: IVec3) -> bool {
        in_lattice(a, self.trunc)
    }

    /// Position of `a` in the mode list, if it is a lattice mode.
    pub fn position(&self, a: IVec3) -> Option<usize> {
        self.contains(a).then(|| set_position(self.trunc, a))
    }

    /// Wavevector of an arbitrary (possibly out-of-box) nonzero index.
    pub fn wavevector_of(&self, a: IVec3) -> Result<RVec3> {
        wavevector(a, &self.aniso)
    }

    /// Position of `a + b` when that sum is a lattice mode.
    pub fn sum_position(&self, i: usize, k: usize) -> Option<usize> {
        self.position(self.modes[i].index + self.modes[k].index)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.trunc.n(),
            "aniso": self.aniso.entries(),
            "modes": self.modes.iter().map(|m| m.index.0).collect::<Vec<_>>(),
        })
    }
}

/// Lexicographic position inside the box with the zero mode removed.
pub(crate) fn set_position(trunc: Truncation, a: IVec3) -> usize {
    let n = trunc.n() as i32;
    let w = trunc.width();
    let box_pos = ((a.0[0] + n) as usize * w + (a.0[1] + n) as usize) * w + (a.0[2] + n) as usize;
    let center = (w * w * w - 1) / 2;
    if box_pos > center {
        box_pos - 1
    } else {
        box_pos
    }
}
