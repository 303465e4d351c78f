//! n-qubit Pauli strings with exact phase tracking.
//!
//! A string is stored as `i^e · ⊗_q X^{x_q} Z^{z_q}` with bit-packed x/z
//! vectors, so products and commutation checks are word operations.

use num_complex::Complex64;

use crate::{Error, Result};

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    /// Base-4 digit with the map 0=I, 1=X, 2=Y, 3=Z.
    pub fn from_digit(d: u8) -> Axis {
        match d & 3 {
            0 => Axis::I,
            1 => Axis::X,
            2 => Axis::Y,
            _ => Axis::Z,
        }
    }

    pub fn to_digit(self) -> u8 {
        match self {
            Axis::I => 0,
            Axis::X => 1,
            Axis::Y => 2,
            Axis::Z => 3,
        }
    }
}

/// Pauli string on `n` qubits, `i^{phase_exp} · ⊗_q X^{x_q} Z^{z_q}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase_exp: u8,
}

fn words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            phase_exp: 0,
        }
    }

    /// Hermitian Pauli string from per-qubit axes; Y contributes the phase
    /// `i` on top of XZ so the result is Hermitian.
    pub fn from_support(n: usize, support: &[(usize, Axis)]) -> Result<Self> {
        let mut p = Self::identity(n);
        for &(q, axis) in support {
            if q >= n {
                return Err(Error::QubitOutOfRange(q, n));
            }
            if p.x_bit(q) || p.z_bit(q) {
                return Err(Error::InvalidRegion("duplicate qubit in support".into()));
            }
            match axis {
                Axis::I => {}
                Axis::X => p.set_x(q, true),
                Axis::Y => {
                    p.set_x(q, true);
                    p.set_z(q, true);
                    p.phase_exp = (p.phase_exp + 1) & 3;
                }
                Axis::Z => p.set_z(q, true),
            }
        }
        Ok(p)
    }

    /// Pauli string on the qubits of `domain` from a base-4 index,
    /// little-endian in domain order (digit j acts on `domain[j]`).
    pub fn from_base4(n: usize, domain: &[usize], mut index: usize) -> Result<Self> {
        let mut support = Vec::with_capacity(domain.len());
        for &q in domain {
            let axis = Axis::from_digit((index & 3) as u8);
            index >>= 2;
            if axis != Axis::I {
                support.push((q, axis));
            }
        }
        Self::from_support(n, &support)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    fn set_x(&mut self, q: usize, v: bool) {
        if v {
            self.x[q / 64] |= 1 << (q % 64);
        } else {
            self.x[q / 64] &= !(1 << (q % 64));
        }
    }

    fn set_z(&mut self, q: usize, v: bool) {
        if v {
            self.z[q / 64] |= 1 << (q % 64);
        } else {
            self.z[q / 64] &= !(1 << (q % 64));
        }
    }

    pub fn axis(&self, q: usize) -> Axis {
        match (self.x_bit(q), self.z_bit(q)) {
            (false, false) => Axis::I,
            (true, false) => Axis::X,
            (true, true) => Axis::Y,
            (false, true) => Axis::Z,
        }
    }

    /// Overall phase as one of the four units.
    pub fn phase(&self) -> Complex64 {
        match self.phase_exp & 3 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        let xz: u32 = self
            .x
            .iter()
            .zip(self.z.iter())
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        (self.phase_exp as u32 & 1) == (xz & 1)
    }

    /// Product `self · other` with exact phase.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch);
        }
        let mut anti: u32 = 0;
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        for w in 0..self.x.len() {
            anti += (self.z[w] & other.x[w]).count_ones();
            x.push(self.x[w] ^ other.x[w]);
            z.push(self.z[w] ^ other.z[w]);
        }
        let phase_exp = (self.phase_exp + other.phase_exp + 2 * (anti & 1) as u8) & 3;
        Ok(PauliString {
            n: self.n,
            x,
            z,
            phase_exp,
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut s: u32 = 0;
        for w in 0..self.x.len() {
            s += (self.x[w] & other.z[w]).count_ones();
            s += (self.z[w] & other.x[w]).count_ones();
        }
        s & 1 == 0
    }

    /// Action on a computational basis state: `P|j⟩ = amp · |j ⊕ x⟩`.
    /// Returns `(flipped_index, amplitude)`. Only valid for n ≤ 63.
    pub fn apply_to_basis(&self, j: usize) -> (usize, Complex64) {
        debug_assert!(self.n <= 63);
        let x = self.x[0] as usize;
        let z = self.z[0] as usize;
        let sign = if ((z & j).count_ones() & 1) == 1 {
            -1.0
        } else {
            1.0
        };
        (j ^ x, self.phase() * sign)
    }

    /// Same string with the overall sign flipped.
    pub fn negated(mut self) -> Self {
        self.phase_exp = (self.phase_exp + 2) & 3;
        self
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| self.x_bit(q) || self.z_bit(q))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_is_hermitian_with_i_phase() {
        let y = PauliString::from_support(1, &[(0, Axis::Y)]).unwrap();
        assert!(y.is_hermitian());
        assert_eq!(y.phase(), Complex64::new(0.0, 1.0));
        // Y|0> = i|1>, Y|1> = -i|0>
        let (j, a) = y.apply_to_basis(0);
        assert_eq!(j, 1);
        assert_eq!(a, Complex64::new(0.0, 1.0));
        let (j, a) = y.apply_to_basis(1);
        assert_eq!(j, 0);
        assert_eq!(a, Complex64::new(0.0, -1.0));
    }

    #[test]
    fn xy_product_is_iz() {
        let x = PauliString::from_support(1, &[(0, Axis::X)]).unwrap();
        let y = PauliString::from_support(1, &[(0, Axis::Y)]).unwrap();
        let xy = x.mul(&y).unwrap();
        // XY = iZ
        assert_eq!(xy.axis(0), Axis::Z);
        assert_eq!(xy.phase(), Complex64::new(0.0, 1.0));
        let yx = y.mul(&x).unwrap();
        assert_eq!(yx.phase(), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn anticommutation() {
        let x = PauliString::from_support(2, &[(0, Axis::X)]).unwrap();
        let z = PauliString::from_support(2, &[(0, Axis::Z)]).unwrap();
        let z1 = PauliString::from_support(2, &[(1, Axis::Z)]).unwrap();
        assert!(!x.commutes_with(&z));
        assert!(x.commutes_with(&z1));
        let xx = PauliString::from_support(2, &[(0, Axis::X), (1, Axis::X)]).unwrap();
        let zz = PauliString::from_support(2, &[(0, Axis::Z), (1, Axis::Z)]).unwrap();
        assert!(xx.commutes_with(&zz));
    }

    #[test]
    fn base4_roundtrip() {
        let domain = [2usize, 5, 7];
        // digits little-endian: index 0b.. = 1 + 2*4 + 3*16 = 57 -> X on 2, Y on 5, Z on 7
        let p = PauliString::from_base4(8, &domain, 57).unwrap();
        assert_eq!(p.axis(2), Axis::X);
        assert_eq!(p.axis(5), Axis::Y);
        assert_eq!(p.axis(7), Axis::Z);
        assert!(p.is_hermitian());
    }

    #[test]
    fn square_of_hermitian_is_identity() {
        let p = PauliString::from_support(3, &[(0, Axis::Y), (1, Axis::X), (2, Axis::Y)])
            .unwrap();
        let sq = p.mul(&p).unwrap();
        assert_eq!(sq, PauliString::identity(3));
    }
}
