//! Canonical enumeration of the 11520-element two-qubit Clifford group.
//!
//! Each group element is identified by its conjugation action on the signed
//! Pauli generators (X₀, Z₀, X₁, Z₁), packed into a 24-bit key. The table is
//! built once by breadth-first search over the generating set
//! {H₀, H₁, S₀, S₁, CX₀₁, CX₁₀}; the canonical index of an element is the
//! rank of its key in ascending order, so indices are stable across runs and
//! platforms. Set `MIPT_TRAJ_CACHE` to a directory to persist the table.
//!
//! Local basis convention: for a gate on (q0, q1) the 4x4 matrix acts on the
//! two-bit index `b(q0)·2 + b(q1)`, i.e. the first listed qubit is the first
//! tensor factor.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::PathBuf;

use nalgebra::Matrix4;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Order of the two-qubit Clifford group (including Pauli phases).
pub const GROUP_ORDER: usize = 11520;

/// Generating set used for words and tableau replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gen {
    H0,
    H1,
    S0,
    S1,
    Cx01,
    Cx10,
}

pub const GENERATORS: [Gen; 6] = [Gen::H0, Gen::H1, Gen::S0, Gen::S1, Gen::Cx01, Gen::Cx10];

impl Gen {
    fn idx(self) -> usize {
        match self {
            Gen::H0 => 0,
            Gen::H1 => 1,
            Gen::S0 => 2,
            Gen::S1 => 3,
            Gen::Cx01 => 4,
            Gen::Cx10 => 5,
        }
    }

    fn from_idx(i: u8) -> Gen {
        GENERATORS[i as usize]
    }

    /// 4x4 matrix in the (q0 = first factor) convention.
    pub fn matrix(self) -> Matrix4<Complex64> {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let h1 = Matrix4::from_row_slice(&[h, h, z, z, h, -h, z, z, z, z, h, h, z, z, h, -h]);
        match self {
            // H ⊗ I
            Gen::H0 => Matrix4::from_row_slice(&[
                h, z, h, z, z, h, z, h, h, z, -h, z, z, h, z, -h,
            ]),
            // I ⊗ H
            Gen::H1 => h1,
            // S ⊗ I
            Gen::S0 => Matrix4::from_row_slice(&[
                o, z, z, z, z, o, z, z, z, z, i, z, z, z, z, i,
            ]),
            // I ⊗ S
            Gen::S1 => Matrix4::from_row_slice(&[
                o, z, z, z, z, i, z, z, z, z, o, z, z, z, z, i,
            ]),
            // control q0, target q1
            Gen::Cx01 => Matrix4::from_row_slice(&[
                o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z,
            ]),
            // control q1, target q0
            Gen::Cx10 => Matrix4::from_row_slice(&[
                o, z, z, z, z, z, z, o, z, z, o, z, z, o, z, z,
            ]),
        }
    }
}

/// Signed two-qubit Pauli: bits (x0, z0, x1, z1) plus an i-exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SignedPauli {
    bits: u8,
    phase: u8,
}

fn pauli1_matrix(x: bool, zb: bool) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    // X^x Z^z without any phase factor
    match (x, zb) {
        (false, false) => [[o, z], [z, o]],
        (true, false) => [[z, o], [o, z]],
        (false, true) => [[o, z], [z, -o]],
        (true, true) => [[z, -o], [o, z]], // XZ
    }
}

fn pauli4_matrix(bits: u8) -> Matrix4<Complex64> {
    let m0 = pauli1_matrix(bits & 1 != 0, bits & 2 != 0);
    let m1 = pauli1_matrix(bits & 4 != 0, bits & 8 != 0);
    let mut out = Matrix4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out[(a * 2 + b, c * 2 + d)] = m0[a][c] * m1[b][d];
                }
            }
        }
    }
    out
}

/// Conjugation table: `conj[g][bits] = (bits', phase_delta)` such that
/// `G (X^xZ^z) G† = i^{phase_delta} X^{x'}Z^{z'}`.
fn build_conj_table() -> [[(u8, u8); 16]; 6] {
    let mut table = [[(0u8, 0u8); 16]; 6];
    let i_pows = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    for g in GENERATORS {
        let gm = g.matrix();
        let gd = gm.adjoint();
        for bits in 0u8..16 {
            let conj = gm * pauli4_matrix(bits) * gd;
            let mut found = None;
            'outer: for cand in 0u8..16 {
                let cm = pauli4_matrix(cand);
                for (e, ip) in i_pows.iter().enumerate() {
                    if (conj - cm.map(|v| v * ip)).norm() < 1e-9 {
                        found = Some((cand, e as u8));
                        break 'outer;
                    }
                }
            }
            table[g.idx()][bits as usize] =
                found.expect("Clifford conjugate of a Pauli must be a signed Pauli");
        }
    }
    table
}

/// Group element as its action on the four Pauli generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Element {
    images: [SignedPauli; 4],
}

impl Element {
    fn identity() -> Self {
        Element {
            images: [
                SignedPauli { bits: 0b0001, phase: 0 }, // X0
                SignedPauli { bits: 0b0010, phase: 0 }, // Z0
                SignedPauli { bits: 0b0100, phase: 0 }, // X1
                SignedPauli { bits: 0b1000, phase: 0 }, // Z1
            ],
        }
    }

    fn apply(&self, g: Gen, conj: &[[(u8, u8); 16]; 6]) -> Element {
        let mut images = self.images;
        for im in images.iter_mut() {
            let (bits, delta) = conj[g.idx()][im.bits as usize];
            im.bits = bits;
            im.phase = (im.phase + delta) & 3;
        }
        Element { images }
    }

    fn key(&self) -> u32 {
        let mut k = 0u32;
        for im in self.images {
            k = (k << 6) | ((im.phase as u32) << 4) | im.bits as u32;
        }
        k
    }
}

/// Canonical table of the full group.
pub struct Clifford2qTable {
    /// Generator word per canonical index (applied first-to-last).
    words: Vec<Vec<Gen>>,
    index_by_key: HashMap<u32, usize>,
    conj: [[(u8, u8); 16]; 6],
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    order: usize,
    words: Vec<Vec<u8>>,
}

fn cache_path() -> Option<PathBuf> {
    std::env::var_os("MIPT_TRAJ_CACHE").map(|d| PathBuf::from(d).join("clifford2q.json"))
}

impl Clifford2qTable {
    fn build() -> Self {
        let conj = build_conj_table();
        let words = match Self::load_cached_words() {
            Some(w) => w,
            None => {
                let w = Self::bfs_words(&conj);
                Self::store_cached_words(&w);
                w
            }
        };
        // Canonical order: ascending key.
        let mut keyed: Vec<(u32, Vec<Gen>)> = words
            .into_iter()
            .map(|w| {
                let mut e = Element::identity();
                for &g in &w {
                    e = e.apply(g, &conj);
                }
                (e.key(), w)
            })
            .collect();
        keyed.sort_by_key(|(k, _)| *k);
        let mut index_by_key = HashMap::with_capacity(GROUP_ORDER);
        let mut sorted_words = Vec::with_capacity(GROUP_ORDER);
        for (i, (k, w)) in keyed.into_iter().enumerate() {
            index_by_key.insert(k, i);
            sorted_words.push(w);
        }
        assert_eq!(sorted_words.len(), GROUP_ORDER);
        Clifford2qTable {
            words: sorted_words,
            index_by_key,
            conj,
        }
    }

    fn bfs_words(conj: &[[(u8, u8); 16]; 6]) -> Vec<Vec<Gen>> {
        let mut seen: HashMap<u32, Vec<Gen>> = HashMap::with_capacity(GROUP_ORDER);
        let mut queue = VecDeque::new();
        let id = Element::identity();
        seen.insert(id.key(), Vec::new());
        queue.push_back((id, Vec::new()));
        while let Some((e, word)) = queue.pop_front() {
            for g in GENERATORS {
                let e2 = e.apply(g, conj);
                let k = e2.key();
                if !seen.contains_key(&k) {
                    let mut w2 = word.clone();
                    w2.push(g);
                    seen.insert(k, w2.clone());
                    queue.push_back((e2, w2));
                }
            }
        }
        assert_eq!(seen.len(), GROUP_ORDER, "two-qubit Clifford BFS must close");
        seen.into_values().collect()
    }

    fn load_cached_words() -> Option<Vec<Vec<Gen>>> {
        let path = cache_path()?;
        let bytes = std::fs::read(path).ok()?;
        let cache: CacheFile = serde_json::from_slice(&bytes).ok()?;
        if cache.order != GROUP_ORDER || cache.words.len() != GROUP_ORDER {
            return None;
        }
        Some(
            cache
                .words
                .into_iter()
                .map(|w| w.into_iter().map(Gen::from_idx).collect())
                .collect(),
        )
    }

    fn store_cached_words(words: &[Vec<Gen>]) {
        let Some(path) = cache_path() else { return };
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let cache = CacheFile {
            order: GROUP_ORDER,
            words: words
                .iter()
                .map(|w| w.iter().map(|g| g.idx() as u8).collect())
                .collect(),
        };
        if let Ok(bytes) = serde_json::to_vec(&cache) {
            let _ = std::fs::write(path, bytes);
        }
    }

    /// Generator word realizing the element at `index` (applied first-to-last).
    pub fn word(&self, index: usize) -> Result<&[Gen]> {
        self.words
            .get(index)
            .map(|w| w.as_slice())
            .ok_or(Error::GateIndexOutOfRange(index))
    }

    /// Dense 4x4 unitary for the element at `index`.
    pub fn unitary(&self, index: usize) -> Result<Matrix4<Complex64>> {
        let word = self.word(index)?;
        let mut u = Matrix4::identity();
        for g in word {
            u = g.matrix() * u;
        }
        Ok(u)
    }

    /// Canonical index of the element realized by a generator word.
    pub fn index_of_word(&self, word: &[Gen]) -> usize {
        let mut e = Element::identity();
        for &g in word {
            e = e.apply(g, &self.conj);
        }
        self.index_by_key[&e.key()]
    }

    pub fn identity_index(&self) -> usize {
        self.index_of_word(&[])
    }
}

/// Shared, lazily built group table.
pub fn table() -> &'static Clifford2qTable {
    static TABLE: Lazy<Clifford2qTable> = Lazy::new(Clifford2qTable::build);
    &TABLE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_order_is_11520() {
        assert_eq!(table().words.len(), GROUP_ORDER);
    }

    #[test]
    fn identity_has_empty_word() {
        let t = table();
        let idx = t.identity_index();
        assert!(t.word(idx).unwrap().is_empty());
        let u = t.unitary(idx).unwrap();
        assert!((u - Matrix4::identity()).norm() < 1e-12);
    }

    #[test]
    fn all_unitaries_are_unitary() {
        let t = table();
        for idx in (0..GROUP_ORDER).step_by(397) {
            let u = t.unitary(idx).unwrap();
            assert!((u.adjoint() * u - Matrix4::identity()).norm() < 1e-10);
        }
    }

    #[test]
    fn cnot_word_maps_to_cnot_matrix() {
        let t = table();
        let idx = t.index_of_word(&[Gen::Cx01]);
        let u = t.unitary(idx).unwrap();
        assert!((u - Gen::Cx01.matrix()).norm() < 1e-12);
    }

    #[test]
    fn index_is_stable_under_word_equivalence() {
        let t = table();
        // HH = identity
        assert_eq!(t.index_of_word(&[Gen::H0, Gen::H0]), t.identity_index());
        // SSSS = identity
        assert_eq!(
            t.index_of_word(&[Gen::S1, Gen::S1, Gen::S1, Gen::S1]),
            t.identity_index()
        );
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        assert!(table().word(GROUP_ORDER).is_err());
    }
}
