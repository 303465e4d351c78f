//! Dense statevector backend: exact unitary evolution, projective
//! measurement, nonunitary imaginary-time evolution, reduced density
//! matrices, and the finite-β fidelity machinery.
//!
//! Basis convention: qubit q holds bit q of the amplitude index. For a local
//! operator with support list `s`, the local index is big-endian in support
//! order (`s[0]` is the most significant bit), matching the two-qubit gate
//! convention in [`crate::clifford2q`].

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rand::Rng;

use crate::pauli::PauliString;
use crate::{Error, Result, SubsystemSpec};

const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
const ZERO_PROB_TOL: f64 = 1e-14;

/// Largest region for which a reduced density matrix may be materialized.
pub const REGION_CAP: usize = 12;

/// Normalized pure state of `n` qubits.
#[derive(Debug, Clone)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl StateVector {
    /// |0...0⟩.
    pub fn zero_state(n: usize) -> Self {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::default(); 1 << n];
        amps[index] = c(1.0);
        StateVector { n, amps }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (q, &b)| acc | ((b as usize) << q));
        Self::basis_state(bits.len(), index)
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch);
        }
        let mut s = StateVector { n, amps };
        let norm = s.norm();
        if norm < ZERO_PROB_TOL {
            return Err(Error::VanishingNorm);
        }
        s.scale(1.0 / norm);
        Ok(s)
    }

    /// Haar-random state (normalized complex Gaussian amplitudes).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
            .collect();
        Self::from_amplitudes(n, amps).expect("gaussian vector has nonzero norm")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn scale(&mut self, f: f64) {
        for a in &mut self.amps {
            *a *= f;
        }
    }

    fn renormalize(&mut self) {
        let norm = self.norm();
        self.scale(1.0 / norm);
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies a 4x4 unitary to `(q0, q1)`; the local index is b(q0)·2 + b(q1).
    pub fn apply_2q_unitary(&mut self, u: &Matrix4<Complex64>, q0: usize, q1: usize) -> Result<()> {
        if q0 >= self.n {
            return Err(Error::QubitOutOfRange(q0, self.n));
        }
        if q1 >= self.n {
            return Err(Error::QubitOutOfRange(q1, self.n));
        }
        if q0 == q1 {
            return Err(Error::EqualQubits(q0));
        }
        if (u.adjoint() * u - Matrix4::identity()).norm() > UNITARY_TOL {
            return Err(Error::NotUnitary);
        }
        let b0 = 1usize << q0;
        let b1 = 1usize << q1;
        for i in 0..self.amps.len() {
            if i & b0 != 0 || i & b1 != 0 {
                continue;
            }
            let idx = [i, i | b1, i | b0, i | b0 | b1];
            let v = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for (r, &target) in idx.iter().enumerate() {
                let mut acc = Complex64::default();
                for (col, &vc) in v.iter().enumerate() {
                    acc += u[(r, col)] * vc;
                }
                self.amps[target] = acc;
            }
        }
        self.renormalize();
        Ok(())
    }

    /// Applies a unitary local operator.
    pub fn apply_local_unitary(&mut self, op: &LocalOperator) -> Result<()> {
        if !op.is_unitary() {
            return Err(Error::NotUnitary);
        }
        self.apply_local_matrix(op)?;
        self.renormalize();
        Ok(())
    }

    /// Applies an arbitrary (possibly nonunitary) local operator without
    /// renormalizing.
    pub(crate) fn apply_local_matrix(&mut self, op: &LocalOperator) -> Result<()> {
        op.check_support(self.n)?;
        let k = op.support.len();
        let d = 1usize << k;
        let scatter = scatter_table(&op.support);
        let comp = complement(self.n, &op.support);
        let comp_scatter = scatter_table(&comp);
        let mut local = vec![Complex64::default(); d];
        for cbits in 0..1usize << comp.len() {
            let base = comp_scatter[cbits];
            for (l, s) in scatter.iter().enumerate() {
                local[l] = self.amps[base | s];
            }
            for (r, s) in scatter.iter().enumerate() {
                let mut acc = Complex64::default();
                for (col, &v) in local.iter().enumerate() {
                    acc += op.matrix[(r, col)] * v;
                }
                self.amps[base | s] = acc;
            }
        }
        Ok(())
    }

    /// Born probability of measuring `outcome` on qubit `q`.
    pub fn born_probability(&self, q: usize, outcome: bool) -> Result<f64> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange(q, self.n));
        }
        let bit = 1usize << q;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & bit) != 0) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects qubit `q` onto `outcome` and renormalizes. Returns the Born
    /// probability of the outcome.
    pub fn project_z(&mut self, q: usize, outcome: bool) -> Result<f64> {
        let p = self.born_probability(q, outcome)?;
        if p <= ZERO_PROB_TOL {
            return Err(Error::VanishingProbability(p));
        }
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & bit) != 0) != outcome {
                *a = Complex64::default();
            }
        }
        self.scale(1.0 / p.sqrt());
        Ok(p)
    }

    /// Samples a Z measurement of qubit `q`, collapsing the state.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<(bool, f64)> {
        let p1 = self.born_probability(q, true)?;
        let outcome = rng.gen::<f64>() < p1;
        let p = self.project_z(q, outcome)?;
        Ok((outcome, p))
    }

    /// Normalized imaginary-time evolution `N_β e^{−βh} |ψ⟩`, computed by
    /// eigendecomposition of `h` on its support. `beta = f64::INFINITY`
    /// projects onto the ground subspace of `h` restricted to the support.
    pub fn imaginary_evolve(&self, h: &LocalOperator, beta: f64) -> Result<StateVector> {
        if beta < 0.0 {
            return Err(Error::InvalidArgument("beta must be nonnegative".into()));
        }
        if !h.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        let (eigenvalues, eigenvectors) = hermitian_eigen(&h.matrix);
        let emin = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        // e^{−β(λ − λ_min)}; the dropped global factor is absorbed by the norm
        let weights: Vec<f64> = eigenvalues
            .iter()
            .map(|&ev| {
                if beta.is_infinite() {
                    if (ev - emin).abs() < 1e-12 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-beta * (ev - emin)).exp()
                }
            })
            .collect();
        let d = h.matrix.nrows();
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (j, w) in weights.iter().enumerate() {
            let col = eigenvectors.column(j);
            for r in 0..d {
                for s in 0..d {
                    m[(r, s)] += col[r] * c(*w) * col[s].conj();
                }
            }
        }
        let op = LocalOperator {
            support: h.support.clone(),
            matrix: m,
        };
        let mut out = self.clone();
        out.apply_local_matrix(&op)?;
        let norm = out.norm();
        if norm < ZERO_PROB_TOL {
            return Err(Error::VanishingNorm);
        }
        out.scale(1.0 / norm);
        Ok(out)
    }

    /// Reduced density matrix on `region` (partial trace of the complement).
    pub fn reduced_density(&self, region: &SubsystemSpec) -> Result<DensityMatrix> {
        if region.len() > REGION_CAP {
            return Err(Error::RegionTooLarge(region.len(), REGION_CAP));
        }
        let m = reduced_cross(self, self, region)?;
        // hermitize away roundoff
        let h = (&m + m.adjoint()).scale(0.5);
        Ok(DensityMatrix { mat: h })
    }

    /// Real part of ⟨ψ|σ|ψ⟩.
    pub fn pauli_expectation(&self, sigma: &PauliString) -> Result<f64> {
        Ok(self.pauli_matrix_element(sigma, self)?.re)
    }

    /// ⟨self|σ|other⟩.
    pub fn pauli_matrix_element(
        &self,
        sigma: &PauliString,
        other: &StateVector,
    ) -> Result<Complex64> {
        if sigma.n() != self.n || other.n != self.n {
            return Err(Error::DimensionMismatch);
        }
        let mut acc = Complex64::default();
        for j in 0..self.amps.len() {
            let (j2, amp) = sigma.apply_to_basis(j);
            acc += self.amps[j2].conj() * amp * other.amps[j];
        }
        Ok(acc)
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// |⟨s1|s2⟩|².
pub fn fidelity(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    Ok(s1.inner(s2)?.norm_sqr())
}

/// Eigendecomposition of a complex Hermitian matrix by cyclic Jacobi
/// rotations. Returns `(eigenvalues, eigenvectors)` with orthonormal columns
/// satisfying `m · v_j = λ_j · v_j`.
///
/// Jacobi is unconditionally convergent and keeps the eigenvector matrix
/// unitary to machine precision even for highly degenerate spectra, where QR
/// iteration on the complex tridiagonalization can fail to converge.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let d = m.nrows();
    assert_eq!(d, m.ncols(), "matrix must be square");
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = DMatrix::<Complex64>::identity(d, d);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;
    for _sweep in 0..60 {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b <= 1e-2 * tol / (d as f64) {
                    continue;
                }
                let u = apq / c(b); // phase of the pivot
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // J: J_pp = cs, J_pq = sn, J_qp = −ū·sn, J_qq = ū·cs
                let jqp = -u.conj() * c(sn);
                let jqq = u.conj() * c(cs);
                for k in 0..d {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c(cs) + akq * jqp;
                    a[(k, q)] = akp * c(sn) + akq * jqq;
                }
                for k in 0..d {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c(cs) + aqk * jqp.conj();
                    a[(q, k)] = apk * c(sn) + aqk * jqq.conj();
                }
                a[(p, q)] = c(0.0);
                a[(q, p)] = c(0.0);
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c(cs) + vkq * jqp;
                    v[(k, q)] = vkp * c(sn) + vkq * jqq;
                }
            }
        }
    }
    let eigenvalues = DVector::from_iterator(d, (0..d).map(|j| a[(j, j)].re));
    (eigenvalues, v)
}

/// Table mapping a local index (big-endian in support order) to the scattered
/// full-index bits.
fn scatter_table(support: &[usize]) -> Vec<usize> {
    let k = support.len();
    (0..1usize << k)
        .map(|local| {
            let mut full = 0usize;
            for (j, &q) in support.iter().enumerate() {
                if (local >> (k - 1 - j)) & 1 == 1 {
                    full |= 1 << q;
                }
            }
            full
        })
        .collect()
}

fn complement(n: usize, support: &[usize]) -> Vec<usize> {
    (0..n).filter(|q| !support.contains(q)).collect()
}

/// Partial trace of |a⟩⟨b| over the complement of `region`.
pub fn reduced_cross(
    a: &StateVector,
    b: &StateVector,
    region: &SubsystemSpec,
) -> Result<DMatrix<Complex64>> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch);
    }
    let k = region.len();
    if k > REGION_CAP {
        return Err(Error::RegionTooLarge(k, REGION_CAP));
    }
    let d = 1usize << k;
    let scatter = scatter_table(region.qubits());
    let comp = complement(a.n, region.qubits());
    let comp_scatter = scatter_table(&comp);
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    let mut va = vec![Complex64::default(); d];
    let mut vb = vec![Complex64::default(); d];
    for cbits in 0..1usize << comp.len() {
        let base = comp_scatter[cbits];
        for (l, s) in scatter.iter().enumerate() {
            va[l] = a.amps[base | s];
            vb[l] = b.amps[base | s];
        }
        for r in 0..d {
            for col in 0..d {
                m[(r, col)] += va[r] * vb[col].conj();
            }
        }
    }
    Ok(m)
}

/// Operator acting on an explicit list of qubits.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    support: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let k = support.len();
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::DimensionMismatch);
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::InvalidRegion("duplicate qubit in support".into()));
        }
        Ok(LocalOperator { support, matrix })
    }

    /// Single-qubit Hamiltonian `(2m−1)·σ_Z` on `q`: ground state |m⟩, gap 2.
    pub fn outcome_hamiltonian(q: usize, outcome: bool) -> Self {
        let sign = if outcome { 1.0 } else { -1.0 };
        let matrix = DMatrix::from_row_slice(2, 2, &[c(sign), c(0.0), c(0.0), c(-sign)]);
        LocalOperator {
            support: vec![q],
            matrix,
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    fn check_support(&self, n: usize) -> Result<()> {
        for &q in &self.support {
            if q >= n {
                return Err(Error::QubitOutOfRange(q, n));
            }
        }
        Ok(())
    }

    pub fn is_unitary(&self) -> bool {
        let d = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::identity(d, d)).norm() <= UNITARY_TOL
    }

    pub fn is_hermitian(&self) -> bool {
        (&self.matrix - self.matrix.adjoint()).norm() <= HERMITIAN_TOL
    }
}

/// Density matrix with Hermiticity and unit trace enforced at use sites.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch);
        }
        Ok(DensityMatrix { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Checks Hermiticity (1e−10), unit trace (1e−10), and eigenvalues
    /// ≥ −1e−10.
    pub fn validate(&self) -> Result<()> {
        if (&self.mat - self.mat.adjoint()).norm() > HERMITIAN_TOL {
            return Err(Error::NotHermitian);
        }
        if (self.trace() - c(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidArgument("trace differs from 1".into()));
        }
        let (eigenvalues, _) = hermitian_eigen(&self.mat);
        if eigenvalues.iter().any(|&ev| ev < -1e-10) {
            return Err(Error::InvalidArgument("negative eigenvalue".into()));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        hermitian_eigen(&self.mat).0
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }
}

/// Von Neumann entropy in bits: −Σ λ log₂ λ over eigenvalues > 1e−14.
pub fn entropy_vn(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .iter()
        .filter(|&&ev| ev > 1e-14)
        .map(|&ev| -ev * ev.log2())
        .sum()
}

/// Entropy of a region of a pure state, in bits.
pub fn entropy_region(state: &StateVector, region: &SubsystemSpec) -> Result<f64> {
    Ok(entropy_vn(&state.reduced_density(region)?))
}

/// Mutual information I(A,C) = S(A) + S(C) − S(A∪C) of a pure state, in bits.
pub fn mutual_info(state: &StateVector, a: &SubsystemSpec, cr: &SubsystemSpec) -> Result<f64> {
    if !a.is_disjoint(cr) {
        return Err(Error::OverlappingRegions);
    }
    let union = a.union(cr);
    Ok(entropy_region(state, a)? + entropy_region(state, cr)? - entropy_region(state, &union)?)
}

/// Finite-β fidelity lower bound `1 − ((1−P)/P)·e^{−2βΔ}`. May be negative
/// for small β, where the bound is vacuous.
pub fn fidelity_bound(p: f64, beta: f64, delta_gap: f64) -> Result<f64> {
    if p <= 0.0 || p > 1.0 {
        return Err(Error::InvalidArgument("P must be in (0, 1]".into()));
    }
    let cc = (1.0 - p) / p;
    Ok(1.0 - cc * (-2.0 * beta * delta_gap).exp())
}

/// Exact closed-form fidelity `1 / (1 + Σ_{i≥1} (w_i/w_0) e^{−2β(E_i−E_0)})`
/// for the spectral weights of the initial state, with index 0 the minimal
/// energy.
pub fn exact_fidelity_closed_form(weights: &[f64], energies: &[f64], beta: f64) -> Result<f64> {
    if weights.len() != energies.len() || weights.is_empty() {
        return Err(Error::DimensionMismatch);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("weights must sum to 1".into()));
    }
    let mut i0 = 0;
    for (i, &e) in energies.iter().enumerate() {
        if e < energies[i0] {
            i0 = i;
        }
    }
    if energies
        .iter()
        .enumerate()
        .any(|(i, &e)| i != i0 && (e - energies[i0]).abs() < 1e-12)
    {
        return Err(Error::InvalidArgument(
            "ground energy must be strictly minimal".into(),
        ));
    }
    let w0 = weights[i0];
    if w0 <= 0.0 {
        return Err(Error::VanishingNorm);
    }
    let mut s = 0.0;
    for (i, (&w, &e)) in weights.iter().zip(energies.iter()).enumerate() {
        if i != i0 {
            s += (w / w0) * (-2.0 * beta * (e - energies[i0])).exp();
        }
    }
    Ok(1.0 / (1.0 + s))
}

/// Haar-random 4x4 unitary: complex Ginibre matrix, QR decomposition, then
/// the R-diagonal phase correction.
pub fn haar_2q<R: Rng + ?Sized>(rng: &mut R) -> Matrix4<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(4, 4, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = Matrix4::<Complex64>::zeros();
    for col in 0..4 {
        let diag = r[(col, col)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            c(1.0)
        };
        for row in 0..4 {
            u[(row, col)] = q[(row, col)] * phase;
        }
    }
    u
}

/// Decomposes a 2^k × 2^k matrix into Pauli coefficients `a` with
/// `M = Σ_I a_I σ_I`, indexed base-4 little-endian with the MSB qubit of the
/// local index as digit 0 (matching [`PauliString::from_base4`] over a sorted
/// domain).
pub fn pauli_decompose(m: &DMatrix<Complex64>, k: usize) -> Vec<Complex64> {
    assert_eq!(m.nrows(), 1 << k);
    if k == 0 {
        return vec![m[(0, 0)]];
    }
    let half = 1usize << (k - 1);
    let view = |r0: usize, c0: usize| m.view((r0, c0), (half, half)).into_owned();
    let m00 = view(0, 0);
    let m01 = view(0, half);
    let m10 = view(half, 0);
    let m11 = view(half, half);
    let ai = (&m00 + &m11).scale(0.5);
    let ax = (&m01 + &m10).scale(0.5);
    let ay = (&m01 - &m10).map(|v| v * Complex64::new(0.0, 1.0) * 0.5);
    let az = (&m00 - &m11).scale(0.5);
    let blocks = [ai, ax, ay, az];
    let inner_len = 1usize << (2 * (k - 1));
    let mut out = vec![Complex64::default(); 4 * inner_len];
    for (digit, block) in blocks.iter().enumerate() {
        let sub = pauli_decompose(block, k - 1);
        for (inner, v) in sub.into_iter().enumerate() {
            out[digit + 4 * inner] = v;
        }
    }
    out
}

/// Inverse of [`pauli_decompose`].
pub fn pauli_compose(coeffs: &[Complex64], k: usize) -> DMatrix<Complex64> {
    assert_eq!(coeffs.len(), 1 << (2 * k));
    if k == 0 {
        return DMatrix::from_element(1, 1, coeffs[0]);
    }
    let inner_len = 1usize << (2 * (k - 1));
    let mut blocks = Vec::with_capacity(4);
    for digit in 0..4 {
        let sub: Vec<Complex64> = (0..inner_len).map(|i| coeffs[digit + 4 * i]).collect();
        blocks.push(pauli_compose(&sub, k - 1));
    }
    let half = 1usize << (k - 1);
    let d = 1usize << k;
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    let i = Complex64::new(0.0, 1.0);
    for r in 0..half {
        for col in 0..half {
            let (a, x, y, z) = (
                blocks[0][(r, col)],
                blocks[1][(r, col)],
                blocks[2][(r, col)],
                blocks[3][(r, col)],
            );
            m[(r, col)] = a + z;
            m[(r, col + half)] = x - i * y;
            m[(r + half, col)] = x + i * y;
            m[(r + half, col + half)] = a - z;
        }
    }
    m
}
