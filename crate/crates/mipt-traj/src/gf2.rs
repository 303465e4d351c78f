//! Bit-packed matrices over GF(2) and row-rank via Gaussian elimination.
//!
//! Rows are packed into `u64` words so that elimination of a 128-column
//! tableau restriction is a handful of word XORs per pivot.

/// Dense bit matrix with rows packed into machine words.
#[derive(Debug, Clone)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64).max(1);
        BitMatrix {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        let w = self.data[r * self.words_per_row + c / 64];
        (w >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.words_per_row + c / 64];
        if v {
            *w |= 1u64 << (c % 64);
        } else {
            *w &= !(1u64 << (c % 64));
        }
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * self.words_per_row);
            (
                &lo[src * self.words_per_row..(src + 1) * self.words_per_row],
                &mut hi[..self.words_per_row],
            )
        } else {
            let (lo, hi) = self.data.split_at_mut(src * self.words_per_row);
            let a = &hi[..self.words_per_row];
            let b = &mut lo[dst * self.words_per_row..(dst + 1) * self.words_per_row];
            (a, b)
        };
        for (x, y) in b.iter_mut().zip(a.iter()) {
            *x ^= *y;
        }
    }

    /// GF(2) row rank via in-place elimination on a working copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let word = c / 64;
            let bit = 1u64 << (c % 64);
            let pivot = (rank..m.rows).find(|&r| m.row(r)[word] & bit != 0);
            let Some(pivot) = pivot else { continue };
            if pivot != rank {
                for w in 0..m.words_per_row {
                    m.data.swap(
                        pivot * m.words_per_row + w,
                        rank * m.words_per_row + w,
                    );
                }
            }
            for r in 0..m.rows {
                if r != rank && m.row(r)[word] & bit != 0 {
                    m.xor_row_into(rank, r);
                }
            }
            rank += 1;
        }
        rank
    }
}

/// GF(2) row rank of a bit matrix.
pub fn rank_gf2(m: &BitMatrix) -> usize {
    m.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive elimination on unpacked bools, used as the independent oracle.
    fn naive_rank(rows: &[Vec<bool>]) -> usize {
        let mut m: Vec<Vec<bool>> = rows.to_vec();
        if m.is_empty() {
            return 0;
        }
        let cols = m[0].len();
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..m.len()).find(|&r| m[r][c]) else {
                continue;
            };
            m.swap(p, rank);
            for r in 0..m.len() {
                if r != rank && m[r][c] {
                    for k in 0..cols {
                        let v = m[rank][k];
                        m[r][k] ^= v;
                    }
                }
            }
            rank += 1;
            if rank == m.len() {
                break;
            }
        }
        rank
    }

    #[test]
    fn identity_has_full_rank() {
        for k in [1, 5, 64, 65, 130] {
            assert_eq!(BitMatrix::identity(k).rank(), k);
        }
    }

    #[test]
    fn zeros_have_rank_zero() {
        assert_eq!(BitMatrix::zeros(10, 200).rank(), 0);
        assert_eq!(BitMatrix::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn random_matrices_match_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..50 {
            let rows = 1 + trial % 64;
            let cols = 1 + (trial * 7) % 128;
            let mut packed = BitMatrix::zeros(rows, cols);
            let mut unpacked = vec![vec![false; cols]; rows];
            for r in 0..rows {
                for c in 0..cols {
                    let v: bool = rng.gen();
                    packed.set(r, c, v);
                    unpacked[r][c] = v;
                }
            }
            assert_eq!(packed.rank(), naive_rank(&unpacked));
        }
    }

    #[test]
    fn rank_64x128_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut packed = BitMatrix::zeros(64, 128);
        let mut unpacked = vec![vec![false; 128]; 64];
        for r in 0..64 {
            for c in 0..128 {
                let v: bool = rng.gen();
                packed.set(r, c, v);
                unpacked[r][c] = v;
            }
        }
        assert_eq!(packed.rank(), naive_rank(&unpacked));
    }

    #[test]
    fn duplicate_rows_do_not_raise_rank() {
        let mut m = BitMatrix::zeros(4, 70);
        for c in [0, 3, 69] {
            m.set(0, c, true);
            m.set(2, c, true);
        }
        m.set(1, 5, true);
        assert_eq!(m.rank(), 2);
    }
}
