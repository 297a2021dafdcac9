//! Operators on the chain Hilbert space as sums of Pauli strings.
//!
//! Every operator used by the protocols (Hamiltonian, energy densities,
//! single-site Paulis, projectors, feedback unitaries, Kraus elements and
//! their products) has a short Pauli expansion, so products, adjoints and
//! commutators are carried out symbolically and only matrix-vector products
//! ever touch the `2^N` amplitudes.

use alloc::collections::BTreeMap;

use crate::pauli::{Pauli, PauliString, UnitVector, I_POWERS};
use crate::prelude::*;
use crate::state::StateVector;
use crate::{Error, Result};

/// Coefficients with magnitude below this are dropped after arithmetic.
const PRUNE: f64 = 1e-15;

/// Dense 2×2 complex block acting on one site, rows first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2([[o, z], [z, o]])
    }

    pub fn zero() -> Self {
        Mat2([[C64::new(0.0, 0.0); 2]; 2])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[i][0] * other.0[0][j] + self.0[i][1] * other.0[1][j];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += other.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    /// Largest entry magnitude of `self − other`.
    pub fn distance(&self, other: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        d
    }

    /// Coefficients `(a, b, c, d)` of `aI + bX + cY + dZ`.
    pub fn pauli_coefficients(&self) -> [C64; 4] {
        let m = &self.0;
        let half = 0.5;
        [
            (m[0][0] + m[1][1]) * half,
            (m[0][1] + m[1][0]) * half,
            (m[0][1] - m[1][0]) * C64::new(0.0, half),
            (m[0][0] - m[1][1]) * half,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOperator {
    sites: usize,
    terms: BTreeMap<PauliString, C64>,
}

impl ChainOperator {
    pub fn zero(sites: usize) -> Self {
        ChainOperator {
            sites,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(sites: usize) -> Self {
        Self::scalar(sites, C64::new(1.0, 0.0))
    }

    pub fn scalar(sites: usize, value: C64) -> Self {
        Self::from_terms(sites, [(PauliString::IDENTITY, value)])
    }

    pub fn from_terms(sites: usize, terms: impl IntoIterator<Item = (PauliString, C64)>) -> Self {
        let mut op = Self::zero(sites);
        for (p, c) in terms {
            op.add_term(p, c);
        }
        op.prune();
        op
    }

    pub fn pauli(sites: usize, site: usize, pauli: Pauli) -> Self {
        Self::from_terms(sites, [(PauliString::single(site, pauli), C64::new(1.0, 0.0))])
    }

    /// `n · σ` at `site`.
    pub fn axis(sites: usize, site: usize, axis: &UnitVector) -> Self {
        let [nx, ny, nz] = axis.components();
        Self::from_terms(
            sites,
            [
                (PauliString::single(site, Pauli::X), C64::new(nx, 0.0)),
                (PauliString::single(site, Pauli::Y), C64::new(ny, 0.0)),
                (PauliString::single(site, Pauli::Z), C64::new(nz, 0.0)),
            ],
        )
    }

    /// Embeds a 2×2 block acting on `site`.
    pub fn site_matrix(sites: usize, site: usize, m: &Mat2) -> Self {
        let [a, b, c, d] = m.pauli_coefficients();
        Self::from_terms(
            sites,
            [
                (PauliString::IDENTITY, a),
                (PauliString::single(site, Pauli::X), b),
                (PauliString::single(site, Pauli::Y), c),
                (PauliString::single(site, Pauli::Z), d),
            ],
        )
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1usize << self.sites
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &C64)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, p: &PauliString) -> C64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    /// Sites touched by any term, as a bit mask.
    pub fn support(&self) -> u64 {
        self.terms.keys().fold(0, |acc, p| acc | p.support())
    }

    pub fn support_sites(&self) -> Vec<usize> {
        let mask = self.support();
        (0..self.sites).filter(|n| mask & (1 << n) != 0).collect()
    }

    fn add_term(&mut self, p: PauliString, c: C64) {
        *self.terms.entry(p).or_default() += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() > PRUNE);
    }

    fn check_sites(&self, other: &ChainOperator) {
        assert_eq!(self.sites, other.sites, "operators on different chains");
    }

    pub fn add(&self, other: &ChainOperator) -> ChainOperator {
        self.check_sites(other);
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(*p, *c);
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &ChainOperator) -> ChainOperator {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> ChainOperator {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out.prune();
        out
    }

    pub fn scale_real(&self, s: f64) -> ChainOperator {
        self.scale(C64::new(s, 0.0))
    }

    pub fn mul(&self, other: &ChainOperator) -> ChainOperator {
        self.check_sites(other);
        let mut out = ChainOperator::zero(self.sites);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                let (k, r) = p.product(q);
                out.add_term(r, *a * *b * I_POWERS[k as usize]);
            }
        }
        out.prune();
        out
    }

    pub fn adjoint(&self) -> ChainOperator {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c = c.conj());
        out
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &ChainOperator) -> ChainOperator {
        self.check_sites(other);
        let mut out = ChainOperator::zero(self.sites);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                if p.commutes_with(q) {
                    continue;
                }
                // anticommuting strings: PQ − QP = 2PQ
                let (k, r) = p.product(q);
                out.add_term(r, *a * *b * I_POWERS[k as usize] * 2.0);
            }
        }
        out.prune();
        out
    }

    /// Largest coefficient magnitude of `self − other`.
    pub fn distance(&self, other: &ChainOperator) -> f64 {
        self.sub(other)
            .terms
            .values()
            .fold(0.0, |m: f64, c| m.max(c.norm()))
    }

    /// Deviation from `O = O†`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.terms.values().fold(0.0, |m: f64, c| m.max(c.im.abs()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Deviation from `O†O = I`.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .distance(&ChainOperator::identity(self.sites))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Deviation from `O² = I`.
    pub fn involution_defect(&self) -> f64 {
        self.mul(self).distance(&ChainOperator::identity(self.sites))
    }

    /// `Tr[O]`, computed from the identity coefficient.
    pub fn trace(&self) -> C64 {
        self.coefficient(&PauliString::IDENTITY) * self.dim() as f64
    }

    /// True when every term is real in the computational basis.
    pub fn is_real(&self) -> bool {
        self.terms
            .iter()
            .all(|(p, c)| (*c * I_POWERS[(p.y_count() & 3) as usize]).im.abs() <= PRUNE)
    }

    /// `out = O v`.
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (p, c) in &self.terms {
            for (b, amp) in v.iter().enumerate() {
                let (ph, target) = p.act(b);
                out[target] += *c * ph * *amp;
            }
        }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.expect_sites(state.sites())?;
        let mut out = vec![C64::new(0.0, 0.0); state.dim()];
        self.apply_into(state.amplitudes(), &mut out);
        Ok(StateVector::from_amplitudes_unchecked(state.sites(), out))
    }

    /// `⟨ψ|O|ψ⟩` without materialising `O|ψ⟩`.
    pub fn sandwich(&self, v: &[C64]) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for (p, c) in &self.terms {
            let mut acc = C64::new(0.0, 0.0);
            for (b, amp) in v.iter().enumerate() {
                let (ph, target) = p.act(b);
                acc += v[target].conj() * ph * *amp;
            }
            total += *c * acc;
        }
        total
    }

    pub(crate) fn expect_sites(&self, sites: usize) -> Result<()> {
        if sites != self.sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.sites,
                found: 1 << sites,
            });
        }
        Ok(())
    }

    /// Dense row-major matrix. Only sensible for small chains.
    pub fn to_dense(&self) -> Vec<C64> {
        let dim = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for (p, c) in &self.terms {
            for b in 0..dim {
                let (ph, target) = p.act(b);
                m[target * dim + b] += *c * ph;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn site_matrix_roundtrip() {
        let m = Mat2([[c(0.3, 0.1), c(-0.2, 0.7)], [c(1.1, -0.4), c(0.05, 0.0)]]);
        let op = ChainOperator::site_matrix(1, 0, &m);
        let d = op.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[i * 2 + j] - m.0[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn commutator_matches_products() {
        let n = 3;
        let a = ChainOperator::pauli(n, 0, Pauli::X)
            .mul(&ChainOperator::pauli(n, 1, Pauli::X))
            .add(&ChainOperator::pauli(n, 1, Pauli::Z).scale_real(0.7));
        let b = ChainOperator::axis(n, 1, &UnitVector::normalized([0.3, -0.4, 0.5]).unwrap());
        let direct = a.mul(&b).sub(&b.mul(&a));
        assert!(direct.distance(&a.commutator(&b)) < 1e-14);
    }

    #[test]
    fn axis_operator_is_hermitian_involution() {
        let u = ChainOperator::axis(4, 2, &UnitVector::normalized([1.0, -2.0, 0.5]).unwrap());
        assert!(u.is_hermitian(1e-12));
        assert!(u.involution_defect() < 1e-12);
        assert!(u.is_unitary(1e-12));
        assert_eq!(u.support_sites(), vec![2]);
    }

    #[test]
    fn apply_matches_dense() {
        let n = 3;
        let op = ChainOperator::pauli(n, 0, Pauli::Y)
            .mul(&ChainOperator::pauli(n, 2, Pauli::X))
            .add(&ChainOperator::pauli(n, 1, Pauli::Z).scale(c(0.0, 0.5)));
        let v: Vec<C64> = (0..8).map(|k| c(k as f64 * 0.1, 1.0 - k as f64 * 0.05)).collect();
        let mut out = vec![C64::default(); 8];
        op.apply_into(&v, &mut out);
        let d = op.to_dense();
        for i in 0..8 {
            let expected: C64 = (0..8).map(|j| d[i * 8 + j] * v[j]).sum();
            assert!((expected - out[i]).norm() < 1e-14);
        }
        let sandwich: C64 = (0..8).map(|i| v[i].conj() * out[i]).sum();
        assert!((sandwich - op.sandwich(&v)).norm() < 1e-14);
    }

    #[test]
    fn realness_detection() {
        let xx = ChainOperator::pauli(2, 0, Pauli::X).mul(&ChainOperator::pauli(2, 1, Pauli::X));
        assert!(xx.is_real());
        assert!(!ChainOperator::pauli(2, 0, Pauli::Y).is_real());
        let yy = ChainOperator::pauli(2, 0, Pauli::Y).mul(&ChainOperator::pauli(2, 1, Pauli::Y));
        assert!(yy.is_real());
    }
}
