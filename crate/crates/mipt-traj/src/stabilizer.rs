//! Aaronson–Gottesman stabilizer tableau with bit-packed rows.
//!
//! Rows store the x/z bit vectors in `u64` words, so gates are O(1) bit
//! operations per row and entanglement entropies reduce to GF(2) ranks of
//! packed restrictions. Entropies are in bits; for stabilizer states all
//! Rényi entropies coincide, so the rank formula is exact von Neumann
//! entropy.

use rand::Rng;

use crate::clifford2q::{self, Gen};
use crate::gf2::BitMatrix;
use crate::pauli::{Axis, PauliString};
use crate::{Error, Result, SubsystemSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Row {
    x: Vec<u64>,
    z: Vec<u64>,
    /// Sign bit: the row represents (−1)^r ⊗_j σ(x_j, z_j) with σ(1,1) = Y.
    r: bool,
}

impl Row {
    fn zero(words: usize) -> Row {
        Row {
            x: vec![0; words],
            z: vec![0; words],
            r: false,
        }
    }

    fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    fn z_bit(&self, q: usize) -> bool {
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
}

/// Left-multiplies `target` by `source` (target := source · target), with the
/// Aaronson–Gottesman phase bookkeeping.
fn row_mul_into(target: &mut Row, source: &Row) {
    let mut plus: u32 = 0;
    let mut minus: u32 = 0;
    for w in 0..target.x.len() {
        let a = source.x[w];
        let b = source.z[w];
        let c = target.x[w];
        let d = target.z[w];
        let p = (a & !b & c & d) | (a & b & d & !c) | (!a & b & c & !d);
        let m = (a & !b & d & !c) | (a & b & c & !d) | (!a & b & c & d);
        plus += p.count_ones();
        minus += m.count_ones();
        target.x[w] ^= a;
        target.z[w] ^= b;
    }
    let total = (2 * target.r as i64 + 2 * source.r as i64 + plus as i64 - minus as i64)
        .rem_euclid(4);
    debug_assert!(total % 2 == 0, "product of commuting rows has real sign");
    target.r = total == 2;
}

fn rows_commute(a: &Row, b: &Row) -> bool {
    let mut s: u32 = 0;
    for w in 0..a.x.len() {
        s += (a.x[w] & b.z[w]).count_ones();
        s += (a.z[w] & b.x[w]).count_ones();
    }
    s & 1 == 0
}

/// Stabilizer state of `n` qubits: `n` stabilizer and `n` destabilizer
/// generators with signs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    destab: Vec<Row>,
    stab: Vec<Row>,
}

impl StabilizerTableau {
    /// |0...0⟩.
    pub fn new(n: usize) -> Self {
        Self::from_bitstring(&vec![false; n])
    }

    /// Computational basis state with the given bits.
    pub fn from_bitstring(bits: &[bool]) -> Self {
        let n = bits.len();
        let words = n.div_ceil(64).max(1);
        let mut destab = Vec::with_capacity(n);
        let mut stab = Vec::with_capacity(n);
        for (i, &b) in bits.iter().enumerate() {
            let mut d = Row::zero(words);
            d.set_x(i, true);
            destab.push(d);
            let mut s = Row::zero(words);
            s.set_z(i, true);
            s.r = b;
            stab.push(s);
        }
        StabilizerTableau {
            n,
            words,
            destab,
            stab,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange(q, self.n));
        }
        Ok(())
    }

    fn for_each_row(&mut self, mut f: impl FnMut(&mut Row)) {
        for row in self.destab.iter_mut().chain(self.stab.iter_mut()) {
            f(row);
        }
    }

    pub fn h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.for_each_row(|row| {
            let x = row.x_bit(q);
            let z = row.z_bit(q);
            row.r ^= x & z;
            row.set_x(q, z);
            row.set_z(q, x);
        });
        Ok(())
    }

    pub fn s(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.for_each_row(|row| {
            let x = row.x_bit(q);
            let z = row.z_bit(q);
            row.r ^= x & z;
            row.set_z(q, z ^ x);
        });
        Ok(())
    }

    pub fn cx(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::EqualQubits(a));
        }
        self.for_each_row(|row| {
            let xa = row.x_bit(a);
            let za = row.z_bit(a);
            let xb = row.x_bit(b);
            let zb = row.z_bit(b);
            row.r ^= xa & zb & (xb ^ za ^ true);
            row.set_x(b, xb ^ xa);
            row.set_z(a, za ^ zb);
        });
        Ok(())
    }

    /// Conjugates the state by the two-qubit Clifford with the given
    /// canonical index, acting on `(q0, q1)`.
    pub fn apply_clifford_2q(&mut self, gate_index: usize, q0: usize, q1: usize) -> Result<()> {
        self.check_qubit(q0)?;
        self.check_qubit(q1)?;
        if q0 == q1 {
            return Err(Error::EqualQubits(q0));
        }
        let word = clifford2q::table().word(gate_index)?;
        for &g in word {
            match g {
                Gen::H0 => self.h(q0)?,
                Gen::H1 => self.h(q1)?,
                Gen::S0 => self.s(q0)?,
                Gen::S1 => self.s(q1)?,
                Gen::Cx01 => self.cx(q0, q1)?,
                Gen::Cx10 => self.cx(q1, q0)?,
            }
        }
        Ok(())
    }

    /// Z-basis measurement of qubit `q`. Returns the outcome bit and its Born
    /// probability (1.0 when deterministic, 0.5 when random).
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<(bool, f64)> {
        self.check_qubit(q)?;
        match self.random_pivot(q) {
            Some(p) => {
                let outcome: bool = rng.gen();
                self.collapse_random(q, p, outcome);
                Ok((outcome, 0.5))
            }
            None => Ok((self.deterministic_outcome(q), 1.0)),
        }
    }

    /// Projects qubit `q` onto the requested outcome. Errors when the
    /// opposite outcome is deterministic.
    pub fn force_z(&mut self, q: usize, outcome: bool) -> Result<f64> {
        self.check_qubit(q)?;
        match self.random_pivot(q) {
            Some(p) => {
                self.collapse_random(q, p, outcome);
                Ok(0.5)
            }
            None => {
                if self.deterministic_outcome(q) != outcome {
                    Err(Error::ImpossibleOutcome)
                } else {
                    Ok(1.0)
                }
            }
        }
    }

    fn random_pivot(&self, q: usize) -> Option<usize> {
        (0..self.n).find(|&i| self.stab[i].x_bit(q))
    }

    fn collapse_random(&mut self, q: usize, p: usize, outcome: bool) {
        let pivot = self.stab[p].clone();
        for i in 0..self.n {
            if i != p && self.destab[i].x_bit(q) {
                row_mul_into(&mut self.destab[i], &pivot);
            }
            if i != p && self.stab[i].x_bit(q) {
                row_mul_into(&mut self.stab[i], &pivot);
            }
        }
        self.destab[p] = pivot;
        let mut z_row = Row::zero(self.words);
        z_row.set_z(q, true);
        z_row.r = outcome;
        self.stab[p] = z_row;
    }

    fn deterministic_outcome(&self, q: usize) -> bool {
        let mut scratch = Row::zero(self.words);
        for i in 0..self.n {
            if self.destab[i].x_bit(q) {
                row_mul_into(&mut scratch, &self.stab[i]);
            }
        }
        scratch.r
    }

    /// Entanglement entropy of `region` in bits:
    /// rank over GF(2) of the stabilizer restriction minus |region|.
    pub fn entropy(&self, region: &SubsystemSpec) -> f64 {
        let k = region.len();
        if k == 0 {
            return 0.0;
        }
        let mut m = BitMatrix::zeros(self.n, 2 * k);
        for (row_idx, row) in self.stab.iter().enumerate() {
            for (col, &q) in region.qubits().iter().enumerate() {
                m.set(row_idx, col, row.x_bit(q));
                m.set(row_idx, k + col, row.z_bit(q));
            }
        }
        m.rank() as f64 - k as f64
    }

    /// Mutual information I(A,C) = S(A) + S(C) − S(A∪C), in bits.
    pub fn mutual_info(&self, a: &SubsystemSpec, c: &SubsystemSpec) -> Result<f64> {
        if !a.is_disjoint(c) {
            return Err(Error::OverlappingRegions);
        }
        let union = a.union(c);
        Ok(self.entropy(a) + self.entropy(c) - self.entropy(&union))
    }

    /// Stabilizer generator `i` as a Pauli string.
    pub fn stabilizer(&self, i: usize) -> PauliString {
        self.row_pauli(&self.stab[i])
    }

    /// Destabilizer generator `i` as a Pauli string.
    pub fn destabilizer(&self, i: usize) -> PauliString {
        self.row_pauli(&self.destab[i])
    }

    fn row_pauli(&self, row: &Row) -> PauliString {
        let mut support = Vec::new();
        for q in 0..self.n {
            let axis = match (row.x_bit(q), row.z_bit(q)) {
                (false, false) => continue,
                (true, false) => Axis::X,
                (true, true) => Axis::Y,
                (false, true) => Axis::Z,
            };
            support.push((q, axis));
        }
        let p = PauliString::from_support(self.n, &support).expect("row bits are in range");
        if row.r {
            p.negated()
        } else {
            p
        }
    }

    /// Checks the canonical symplectic structure: stabilizers commute
    /// pairwise, destabilizers commute pairwise, stab i anticommutes with
    /// destab j exactly when i == j, and the 2n generators are independent.
    pub fn symplectic_ok(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                if !rows_commute(&self.stab[i], &self.stab[j]) {
                    return false;
                }
                if !rows_commute(&self.destab[i], &self.destab[j]) {
                    return false;
                }
                let anti = !rows_commute(&self.stab[i], &self.destab[j]);
                if anti != (i == j) {
                    return false;
                }
            }
        }
        let mut m = BitMatrix::zeros(2 * self.n, 2 * self.n);
        for (idx, row) in self.stab.iter().chain(self.destab.iter()).enumerate() {
            for q in 0..self.n {
                m.set(idx, q, row.x_bit(q));
                m.set(idx, self.n + q, row.z_bit(q));
            }
        }
        m.rank() == 2 * self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ghz3() -> StabilizerTableau {
        let mut t = StabilizerTableau::new(3);
        t.h(0).unwrap();
        t.cx(0, 1).unwrap();
        t.cx(0, 2).unwrap();
        t
    }

    fn region(n: usize, qs: &[usize]) -> SubsystemSpec {
        SubsystemSpec::new(n, qs.to_vec()).unwrap()
    }

    #[test]
    fn measure_zero_state_is_deterministic() {
        let mut t = StabilizerTableau::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for q in 0..4 {
            let (outcome, p) = t.measure_z(q, &mut rng).unwrap();
            assert!(!outcome);
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn plus_state_measurement_is_unbiased() {
        let mut ones = 0;
        for seed in 0..10_000u64 {
            let mut t = StabilizerTableau::new(2);
            t.h(0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (outcome, p) = t.measure_z(0, &mut rng).unwrap();
            assert_eq!(p, 0.5);
            if outcome {
                ones += 1;
            }
        }
        // 3 standard errors of Binomial(10^4, 0.5)
        let dev = (ones as f64 - 5000.0).abs();
        assert!(dev < 3.0 * 50.0, "deviation {dev} exceeds 3 sigma");
    }

    #[test]
    fn ghz_second_measurement_is_correlated() {
        for seed in [0u64, 1, 2, 3, 10, 99] {
            let mut t = ghz3();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (first, p1) = t.measure_z(0, &mut rng).unwrap();
            assert_eq!(p1, 0.5);
            let (second, p2) = t.measure_z(1, &mut rng).unwrap();
            assert_eq!(p2, 1.0);
            assert_eq!(first, second);
        }
    }

    #[test]
    fn force_impossible_outcome_errors() {
        let mut t = StabilizerTableau::new(1);
        assert!(matches!(t.force_z(0, true), Err(Error::ImpossibleOutcome)));
        assert!(t.force_z(0, false).is_ok());
    }

    #[test]
    fn force_ghz_collapses_to_product() {
        let mut t = ghz3();
        let p = t.force_z(0, false).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(t.entropy(&region(3, &[0])), 0.0);
        assert_eq!(t.entropy(&region(3, &[1, 2])), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for q in 0..3 {
            let (outcome, bp) = t.measure_z(q, &mut rng).unwrap();
            assert!(!outcome);
            assert_eq!(bp, 1.0);
        }
    }

    #[test]
    fn cnot_conjugates_z_stabilizers() {
        let t = clifford2q::table();
        let idx = t.index_of_word(&[Gen::Cx01]);
        let mut tab = StabilizerTableau::new(2);
        tab.apply_clifford_2q(idx, 0, 1).unwrap();
        // stabilizers of CNOT|00> = |00>: still Z0, Z0Z1 up to generator choice
        use crate::pauli::Axis;
        let s0 = tab.stabilizer(0);
        assert_eq!(s0.axis(0), Axis::Z);
        assert_eq!(s0.axis(1), Axis::I);
        let s1 = tab.stabilizer(1);
        assert_eq!(s1.axis(0), Axis::Z);
        assert_eq!(s1.axis(1), Axis::Z);
    }

    #[test]
    fn identity_gate_leaves_tableau_unchanged() {
        let mut t = ghz3();
        let before = t.clone();
        let id = clifford2q::table().identity_index();
        t.apply_clifford_2q(id, 0, 2).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn equal_qubits_rejected() {
        let mut t = StabilizerTableau::new(2);
        assert!(matches!(
            t.apply_clifford_2q(0, 1, 1),
            Err(Error::EqualQubits(1))
        ));
    }

    #[test]
    fn bell_pair_entropy() {
        let mut t = StabilizerTableau::new(2);
        t.h(0).unwrap();
        t.cx(0, 1).unwrap();
        assert_eq!(t.entropy(&region(2, &[0])), 1.0);
        assert_eq!(t.entropy(&region(2, &[0, 1])), 0.0);
    }

    #[test]
    fn ghz_mutual_info_is_one_bit() {
        let t = ghz3();
        let i = t
            .mutual_info(&region(3, &[0]), &region(3, &[2]))
            .unwrap();
        assert_eq!(i, 1.0);
    }

    #[test]
    fn product_state_mutual_info_is_zero() {
        let t = StabilizerTableau::new(16);
        let i = t
            .mutual_info(&region(16, &[0, 1]), &region(16, &[8, 9, 10]))
            .unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let t = StabilizerTableau::new(4);
        assert!(t
            .mutual_info(&region(4, &[0, 1]), &region(4, &[1, 2]))
            .is_err());
    }

    #[test]
    fn random_circuit_preserves_symplectic_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut t = StabilizerTableau::new(8);
        for step in 0..200 {
            let idx = rng.gen_range(0..clifford2q::GROUP_ORDER);
            let a = rng.gen_range(0..8);
            let mut b = rng.gen_range(0..8);
            if b == a {
                b = (b + 1) % 8;
            }
            t.apply_clifford_2q(idx, a, b).unwrap();
            if step % 3 == 0 {
                let q = rng.gen_range(0..8);
                t.measure_z(q, &mut rng).unwrap();
            }
            if step % 17 == 0 {
                assert!(t.symplectic_ok());
            }
        }
        assert!(t.symplectic_ok());
        // purity: full-system entropy is zero
        let full = SubsystemSpec::new(8, (0..8).collect()).unwrap();
        assert_eq!(t.entropy(&full), 0.0);
    }
}
