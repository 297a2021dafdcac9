//! Pauli strings in the symplectic `(x, z)` bit representation.
//!
//! A string `P(x, z)` is the tensor product over sites of `I`, `X`, `Z`, `Y`
//! for `(x_n, z_n) = (0,0), (1,0), (0,1), (1,1)`. With `Y = iXZ` this is
//! `P(x, z) = i^{|x∧z|} X^x Z^z`, so acting on a basis state
//!
//! ```text
//! P(x, z)|b⟩ = i^{|x∧z|} (−1)^{|z∧b|} |b ⊕ x⟩
//! ```

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::prelude::*;
use crate::{Error, Result};

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn single(site: usize, pauli: Pauli) -> Self {
        let (x, z) = pauli.bits();
        let bit = 1u64 << site;
        PauliString {
            x: if x { bit } else { 0 },
            z: if z { bit } else { 0 },
        }
    }

    pub fn from_ops(ops: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        ops.into_iter()
            .fold(Self::IDENTITY, |acc, (site, p)| acc.product(&Self::single(site, p)).1)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Sites on which the string acts nontrivially, as a bit mask.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn at(&self, site: usize) -> Pauli {
        let bit = 1u64 << site;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// Number of `Y` factors, i.e. the exponent of `i` in `i^{|x∧z|} X^x Z^z`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `self · other = i^k · P`, returned as `(k mod 4, P)`.
    pub fn product(&self, other: &PauliString) -> (u8, PauliString) {
        let out = PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        };
        // X^{x1} Z^{z1} X^{x2} Z^{z2} = (−1)^{|z1∧x2|} X^{x1⊕x2} Z^{z1⊕z2}
        let exponent = self.y_count() as i64 + other.y_count() as i64
            + 2 * (self.z & other.x).count_ones() as i64
            - out.y_count() as i64;
        (exponent.rem_euclid(4) as u8, out)
    }

    /// Phase and image of `P|b⟩ = phase · |b'⟩`.
    #[inline]
    pub fn act(&self, basis: usize) -> (C64, usize) {
        let b = basis as u64;
        let mut k = self.y_count();
        if (self.z & b).count_ones() & 1 == 1 {
            k += 2;
        }
        (I_POWERS[(k & 3) as usize], (b ^ self.x) as usize)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    pub fn label(&self, sites: usize) -> String {
        (0..sites)
            .map(|n| match self.at(n) {
                Pauli::I => '.',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            })
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("I");
        }
        let top = 64 - self.support().leading_zeros() as usize;
        let mut first = true;
        for n in 0..top {
            let p = self.at(n);
            if p == Pauli::I {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{:?}{}", p, n)?;
        }
        Ok(())
    }
}

pub(crate) const I_POWERS: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// Real unit 3-vector selecting the Pauli combination `n · σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector([f64; 3]);

impl UnitVector {
    pub const X: UnitVector = UnitVector([1.0, 0.0, 0.0]);
    pub const Y: UnitVector = UnitVector([0.0, 1.0, 0.0]);
    pub const Z: UnitVector = UnitVector([0.0, 0.0, 1.0]);

    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::NotUnitVector { norm });
        }
        Ok(UnitVector(v))
    }

    /// Scales a nonzero vector to unit length.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotUnitVector { norm });
        }
        Ok(UnitVector([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Direction with polar angle `theta` from `+z` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector([st * cp, st * sp, ct])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }
}

impl TryFrom<[f64; 3]> for UnitVector {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for [f64; 3] {
    fn from(v: UnitVector) -> Self {
        v.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(p: &PauliString, sites: usize) -> Vec<Vec<C64>> {
        let dim = 1 << sites;
        let mut m = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        for b in 0..dim {
            let (ph, out) = p.act(b);
            m[out][b] = ph;
        }
        m
    }

    fn matmul(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let n = a.len();
        let mut c = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    #[test]
    fn single_site_matrices() {
        let y = dense(&PauliString::single(0, Pauli::Y), 1);
        assert_eq!(y[0][1], C64::new(0.0, -1.0));
        assert_eq!(y[1][0], C64::new(0.0, 1.0));
        let z = dense(&PauliString::single(0, Pauli::Z), 1);
        assert_eq!(z[0][0], C64::new(1.0, 0.0));
        assert_eq!(z[1][1], C64::new(-1.0, 0.0));
    }

    #[test]
    fn product_matches_dense_multiplication() {
        let sites = 2;
        let labels = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let mut all = Vec::new();
        for a in labels {
            for b in labels {
                all.push(PauliString::from_ops([(0, a), (1, b)]));
            }
        }
        for p in &all {
            for q in &all {
                let (k, r) = p.product(q);
                let lhs = matmul(&dense(p, sites), &dense(q, sites));
                let rhs = dense(&r, sites);
                for i in 0..4 {
                    for j in 0..4 {
                        let diff = lhs[i][j] - I_POWERS[k as usize] * rhs[i][j];
                        assert!(diff.norm() < 1e-15, "{p} * {q}");
                    }
                }
                let commute = p.product(q).1 == q.product(p).1 && k == q.product(p).0;
                assert_eq!(commute, p.commutes_with(q));
            }
        }
    }

    #[test]
    fn xy_is_iz() {
        let (k, r) = PauliString::single(0, Pauli::X).product(&PauliString::single(0, Pauli::Y));
        assert_eq!(r, PauliString::single(0, Pauli::Z));
        assert_eq!(k, 1);
    }

    #[test]
    fn unit_vector_validation() {
        assert!(UnitVector::new([1.0, 0.0, 0.0]).is_ok());
        assert!(matches!(
            UnitVector::new([1.0, 1.0, 0.0]),
            Err(Error::NotUnitVector { .. })
        ));
        let v = UnitVector::normalized([1.0, 1.0, 1.0]).unwrap();
        assert!(UnitVector::new(v.components()).is_ok());
    }
}
