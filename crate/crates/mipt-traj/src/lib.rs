//! Simulation toolkit for measured random quantum circuits and deterministic
//! postselection of measurement outcomes via imaginary-time evolution.
//!
//! The crate has two simulation backends: a bit-packed stabilizer tableau for
//! large-n Clifford trajectories ([`stabilizer`]) and a dense statevector for
//! Haar circuits and nonunitary evolution ([`dense`]). On top of those,
//! [`circuit`] generates and records brickwork measured-circuit trajectories,
//! [`dqite`] learns local unitaries that replace projective measurements, and
//! [`analysis`] provides ensemble sweeps, exponential fits, finite-size data
//! collapse, and the ancilla amplification gadget.

pub mod analysis;
pub mod circuit;
pub mod clifford2q;
pub mod dense;
pub mod dqite;
pub mod gf2;
pub mod pauli;
pub mod rng;
pub mod stabilizer;

pub mod cli;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {0} out of range for {1} qubits")]
    QubitOutOfRange(usize, usize),
    #[error("two-qubit operation requires distinct qubits (got {0})")]
    EqualQubits(usize),
    #[error("Clifford gate index {0} out of range (group order 11520)")]
    GateIndexOutOfRange(usize),
    #[error("requested measurement outcome has zero probability")]
    ImpossibleOutcome,
    #[error("regions overlap")]
    OverlappingRegions,
    #[error("matrix is not unitary within tolerance")]
    NotUnitary,
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error("state dimensions do not match")]
    DimensionMismatch,
    #[error("projection probability below threshold ({0:.3e})")]
    VanishingProbability(f64),
    #[error("state has no weight in the ground subspace")]
    VanishingNorm,
    #[error("region of {0} qubits exceeds the configured cap of {1}")]
    RegionTooLarge(usize, usize),
    #[error("invalid circuit spec: {0}")]
    InvalidSpec(String),
    #[error("invalid subsystem spec: {0}")]
    InvalidRegion(String),
    #[error("trajectory record format version {0} not supported (expected {1})")]
    VersionMismatch(u32, u32),
    #[error("malformed trajectory record: {0}")]
    MalformedRecord(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("fit did not converge after {0} restarts")]
    FitDiverged(usize),
    #[error("degenerate search interval")]
    DegenerateInterval,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A strictly increasing list of qubit indices in `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubsystemSpec {
    qubits: Vec<usize>,
}

impl SubsystemSpec {
    pub fn new(n: usize, qubits: Vec<usize>) -> Result<Self> {
        for w in qubits.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidRegion(
                    "indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = qubits.last() {
            if last >= n {
                return Err(Error::QubitOutOfRange(last, n));
            }
        }
        Ok(SubsystemSpec { qubits })
    }

    /// Builds a region from indices in any order, rejecting duplicates.
    pub fn from_unsorted(n: usize, mut qubits: Vec<usize>) -> Result<Self> {
        qubits.sort_unstable();
        let before = qubits.len();
        qubits.dedup();
        if qubits.len() != before {
            return Err(Error::InvalidRegion("duplicate qubit index".into()));
        }
        Self::new(n, qubits)
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.qubits.binary_search(&q).is_ok()
    }

    pub fn is_disjoint(&self, other: &SubsystemSpec) -> bool {
        self.qubits.iter().all(|q| !other.contains(*q))
    }

    pub fn union(&self, other: &SubsystemSpec) -> SubsystemSpec {
        let mut qubits: Vec<usize> = self
            .qubits
            .iter()
            .chain(other.qubits.iter())
            .copied()
            .collect();
        qubits.sort_unstable();
        qubits.dedup();
        SubsystemSpec { qubits }
    }
}

/// Distance between two sites on a ring of `n` qubits.
pub fn ring_distance(n: usize, i: usize, j: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}
