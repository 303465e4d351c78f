//! Brickwork measured-random-circuit generation, trajectory recording, and
//! reference replay.
//!
//! One layer is U_odd·U_even on a ring: the even sublayer pairs
//! (0,1),(2,3),…,(n−2,n−1) acts first, then the odd sublayer
//! (1,2),(3,4),…,(n−1,0) with the periodic wrap gate. Between consecutive
//! layers every qubit is measured in the Z basis with probability p, so a
//! circuit of L layers has L−1 measurement gaps.
//!
//! All randomness is drawn from counter-based streams keyed by
//! `(seed, layer-or-gap, qubit, purpose)` (see [`crate::rng`]), so a record
//! is reproducible byte-for-byte regardless of iteration order.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford2q;
use crate::dense::StateVector;
use crate::rng::{stream, Purpose};
use crate::stabilizer::StabilizerTableau;
use crate::{Error, Result};

/// Current trajectory file format version.
pub const FORMAT_VERSION: u32 = 1;

/// Largest qubit count simulated densely.
pub const DENSE_QUBIT_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateFamily {
    Clifford,
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    pub p: f64,
    pub gate_family: GateFamily,
    pub seed: u64,
    /// Computational-basis initial state, one '0'/'1' character per qubit.
    pub initial_bitstring: String,
}

impl CircuitSpec {
    pub fn new(n: usize, layers: usize, p: f64, gate_family: GateFamily, seed: u64) -> Self {
        CircuitSpec {
            n,
            layers,
            p,
            gate_family,
            seed,
            initial_bitstring: "0".repeat(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "n must be even and >= 4, got {}",
                self.n
            )));
        }
        if self.layers < 1 {
            return Err(Error::InvalidSpec("L must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidSpec(format!(
                "p must be in [0, 1], got {}",
                self.p
            )));
        }
        if self.initial_bitstring.len() != self.n
            || !self.initial_bitstring.chars().all(|ch| ch == '0' || ch == '1')
        {
            return Err(Error::InvalidSpec(
                "initial_bitstring must be n characters of 0/1".into(),
            ));
        }
        if self.gate_family == GateFamily::Haar && self.n > DENSE_QUBIT_CAP {
            return Err(Error::InvalidSpec(format!(
                "haar family requires n <= {DENSE_QUBIT_CAP}"
            )));
        }
        Ok(())
    }

    pub fn initial_bits(&self) -> Vec<bool> {
        self.initial_bitstring.chars().map(|ch| ch == '1').collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublayer {
    Even,
    Odd,
}

/// One two-qubit gate application. Clifford gates are stored by canonical
/// index; Haar gates as a row-major 4x4 of [re, im] pairs at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEvent {
    pub layer: usize,
    pub sublayer: Sublayer,
    pub qubits: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clifford_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl GateEvent {
    pub fn haar_matrix(&self) -> Result<Matrix4<Complex64>> {
        let flat = self
            .matrix
            .as_ref()
            .ok_or_else(|| Error::MalformedRecord("gate event lacks a matrix".into()))?;
        if flat.len() != 16 {
            return Err(Error::MalformedRecord("gate matrix must have 16 entries".into()));
        }
        let mut m = Matrix4::zeros();
        for r in 0..4 {
            for col in 0..4 {
                let [re, im] = flat[r * 4 + col];
                m[(r, col)] = Complex64::new(re, im);
            }
        }
        Ok(m)
    }
}

fn matrix_to_flat(m: &Matrix4<Complex64>) -> Vec<[f64; 2]> {
    let mut flat = Vec::with_capacity(16);
    for r in 0..4 {
        for col in 0..4 {
            flat.push([m[(r, col)].re, m[(r, col)].im]);
        }
    }
    flat
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    /// Gap index k: the measurement sits between layer k and layer k+1.
    pub layer_gap: usize,
    pub qubit: usize,
    pub outcome: u8,
    pub born_p: f64,
}

/// A witnessed trajectory: circuit spec, every gate, every measurement with
/// its outcome and Born probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub format_version: u32,
    pub spec: CircuitSpec,
    pub gates: Vec<GateEvent>,
    pub measurements: Vec<MeasurementEvent>,
}

impl TrajectoryRecord {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(self.format_version, FORMAT_VERSION));
        }
        self.spec.validate()?;
        let n = self.spec.n;
        let mut prev = (0usize, Sublayer::Even, 0usize);
        for g in &self.gates {
            let (i, j) = g.qubits;
            let pattern_ok = match g.sublayer {
                Sublayer::Even => i % 2 == 0 && j == i + 1 && i < n,
                Sublayer::Odd => i % 2 == 1 && j == (i + 1) % n && i < n,
            };
            if !pattern_ok {
                return Err(Error::MalformedRecord(format!(
                    "gate on ({i}, {j}) does not match the {:?} sublayer pattern",
                    g.sublayer
                )));
            }
            if g.layer < 1 || g.layer > self.spec.layers {
                return Err(Error::MalformedRecord("gate layer out of range".into()));
            }
            let key = (g.layer, g.sublayer, i);
            let ord = (key.0, matches!(key.1, Sublayer::Odd) as usize, key.2);
            let prev_ord = (prev.0, matches!(prev.1, Sublayer::Odd) as usize, prev.2);
            if ord < prev_ord {
                return Err(Error::MalformedRecord("gates out of order".into()));
            }
            prev = key;
            match self.spec.gate_family {
                GateFamily::Clifford => {
                    if g.clifford_index.is_none() || g.matrix.is_some() {
                        return Err(Error::MalformedRecord(
                            "clifford record must store gates by index".into(),
                        ));
                    }
                }
                GateFamily::Haar => {
                    if g.matrix.is_none() || g.clifford_index.is_some() {
                        return Err(Error::MalformedRecord(
                            "haar record must store gate matrices".into(),
                        ));
                    }
                }
            }
        }
        let mut prev_gap = (0usize, 0usize);
        for m in &self.measurements {
            if m.layer_gap < 1 || m.layer_gap >= self.spec.layers.max(1) {
                return Err(Error::MalformedRecord(
                    "measurement gap must lie strictly between layers".into(),
                ));
            }
            if m.qubit >= n || m.outcome > 1 {
                return Err(Error::MalformedRecord("bad measurement event".into()));
            }
            if !(m.born_p > 0.0 && m.born_p <= 1.0) {
                return Err(Error::MalformedRecord("born_p must be in (0, 1]".into()));
            }
            if (m.layer_gap, m.qubit) < prev_gap {
                return Err(Error::MalformedRecord("measurements out of order".into()));
            }
            prev_gap = (m.layer_gap, m.qubit);
        }
        Ok(())
    }
}

/// Final state of a trajectory, one variant per backend.
#[derive(Debug, Clone)]
pub enum FinalState {
    Tableau(StabilizerTableau),
    Dense(StateVector),
}

impl FinalState {
    pub fn dense(&self) -> Option<&StateVector> {
        match self {
            FinalState::Dense(s) => Some(s),
            FinalState::Tableau(_) => None,
        }
    }

    pub fn tableau(&self) -> Option<&StabilizerTableau> {
        match self {
            FinalState::Tableau(t) => Some(t),
            FinalState::Dense(_) => None,
        }
    }
}

/// Qubit pairs of one sublayer on the ring.
fn sublayer_pairs(n: usize, sub: Sublayer) -> Vec<(usize, usize)> {
    match sub {
        Sublayer::Even => (0..n).step_by(2).map(|i| (i, i + 1)).collect(),
        Sublayer::Odd => (1..n).step_by(2).map(|i| (i, (i + 1) % n)).collect(),
    }
}

/// Simulates one trajectory, recording every gate and measurement.
pub fn generate_and_record(spec: &CircuitSpec) -> Result<(TrajectoryRecord, FinalState)> {
    spec.validate()?;
    let n = spec.n;
    let bits = spec.initial_bits();
    let mut state = match spec.gate_family {
        GateFamily::Clifford => FinalState::Tableau(StabilizerTableau::from_bitstring(&bits)),
        GateFamily::Haar => FinalState::Dense(StateVector::from_bits(&bits)),
    };
    let mut gates = Vec::new();
    let mut measurements = Vec::new();
    for layer in 1..=spec.layers {
        for sub in [Sublayer::Even, Sublayer::Odd] {
            for (i, j) in sublayer_pairs(n, sub) {
                let mut grng = stream(spec.seed, layer as u64, i as u64, Purpose::GateDraw);
                let mut event = GateEvent {
                    layer,
                    sublayer: sub,
                    qubits: (i, j),
                    clifford_index: None,
                    matrix: None,
                };
                match (&mut state, spec.gate_family) {
                    (FinalState::Tableau(tab), GateFamily::Clifford) => {
                        let idx = grng.gen_range(0..clifford2q::GROUP_ORDER);
                        tab.apply_clifford_2q(idx, i, j)?;
                        event.clifford_index = Some(idx);
                    }
                    (FinalState::Dense(sv), GateFamily::Haar) => {
                        let u = crate::dense::haar_2q(&mut grng);
                        sv.apply_2q_unitary(&u, i, j)?;
                        event.matrix = Some(matrix_to_flat(&u));
                    }
                    _ => unreachable!("backend matches gate family"),
                }
                gates.push(event);
            }
        }
        if layer < spec.layers {
            for q in 0..n {
                let mut select = stream(spec.seed, layer as u64, q as u64, Purpose::MeasureSelect);
                if select.gen::<f64>() >= spec.p {
                    continue;
                }
                let mut orng = stream(spec.seed, layer as u64, q as u64, Purpose::MeasureOutcome);
                let (outcome, born_p) = match &mut state {
                    FinalState::Tableau(tab) => tab.measure_z(q, &mut orng)?,
                    FinalState::Dense(sv) => sv.measure_z(q, &mut orng)?,
                };
                measurements.push(MeasurementEvent {
                    layer_gap: layer,
                    qubit: q,
                    outcome: outcome as u8,
                    born_p,
                });
            }
        }
    }
    let record = TrajectoryRecord {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        gates,
        measurements,
    };
    Ok((record, state))
}

/// Replays a record, force-projecting every recorded outcome. Returns the
/// exact postselected trajectory state.
pub fn replay_reference(record: &TrajectoryRecord) -> Result<FinalState> {
    record.validate()?;
    let spec = &record.spec;
    let bits = spec.initial_bits();
    let mut state = match spec.gate_family {
        GateFamily::Clifford => FinalState::Tableau(StabilizerTableau::from_bitstring(&bits)),
        GateFamily::Haar => FinalState::Dense(StateVector::from_bits(&bits)),
    };
    let mut meas_iter = record.measurements.iter().peekable();
    let mut current_layer = 0usize;
    for g in &record.gates {
        if g.layer > current_layer {
            // flush measurements of the gaps before this layer
            while let Some(m) = meas_iter.peek() {
                if m.layer_gap < g.layer {
                    apply_forced(&mut state, m)?;
                    meas_iter.next();
                } else {
                    break;
                }
            }
            current_layer = g.layer;
        }
        apply_gate(&mut state, g, spec.gate_family)?;
    }
    for m in meas_iter {
        apply_forced(&mut state, m)?;
    }
    Ok(state)
}

fn apply_gate(state: &mut FinalState, g: &GateEvent, family: GateFamily) -> Result<()> {
    let (i, j) = g.qubits;
    match (state, family) {
        (FinalState::Tableau(tab), GateFamily::Clifford) => {
            let idx = g
                .clifford_index
                .ok_or_else(|| Error::MalformedRecord("missing clifford index".into()))?;
            tab.apply_clifford_2q(idx, i, j)
        }
        (FinalState::Dense(sv), GateFamily::Haar) => {
            sv.apply_2q_unitary(&g.haar_matrix()?, i, j)
        }
        _ => Err(Error::MalformedRecord("gate does not match backend".into())),
    }
}

fn apply_forced(state: &mut FinalState, m: &MeasurementEvent) -> Result<()> {
    let outcome = m.outcome == 1;
    match state {
        FinalState::Tableau(tab) => {
            tab.force_z(m.qubit, outcome)?;
        }
        FinalState::Dense(sv) => {
            sv.project_z(m.qubit, outcome)
                .map_err(|e| match e {
                    Error::VanishingProbability(_) => Error::ImpossibleOutcome,
                    other => other,
                })?;
        }
    }
    Ok(())
}

/// Replays a Clifford-family record on the dense backend, as an oracle for
/// the stabilizer tableau. Limited to small n.
pub fn replay_clifford_dense(record: &TrajectoryRecord) -> Result<StateVector> {
    record.validate()?;
    if record.spec.gate_family != GateFamily::Clifford {
        return Err(Error::InvalidSpec("record is not from the clifford family".into()));
    }
    if record.spec.n > DENSE_QUBIT_CAP {
        return Err(Error::RegionTooLarge(record.spec.n, DENSE_QUBIT_CAP));
    }
    let mut state = StateVector::from_bits(&record.spec.initial_bits());
    let table = crate::clifford2q::table();
    let mut meas_iter = record.measurements.iter().peekable();
    for g in &record.gates {
        while let Some(m) = meas_iter.peek() {
            if m.layer_gap < g.layer {
                state
                    .project_z(m.qubit, m.outcome == 1)
                    .map_err(|e| match e {
                        Error::VanishingProbability(_) => Error::ImpossibleOutcome,
                        other => other,
                    })?;
                meas_iter.next();
            } else {
                break;
            }
        }
        let idx = g
            .clifford_index
            .ok_or_else(|| Error::MalformedRecord("missing clifford index".into()))?;
        state.apply_2q_unitary(&table.unitary(idx)?, g.qubits.0, g.qubits.1)?;
    }
    for m in meas_iter {
        state.project_z(m.qubit, m.outcome == 1).map_err(|e| match e {
            Error::VanishingProbability(_) => Error::ImpossibleOutcome,
            other => other,
        })?;
    }
    Ok(state)
}

/// Serializes a record to its JSON wire format.
pub fn serialize(record: &TrajectoryRecord) -> Result<Vec<u8>> {
    record.validate()?;
    Ok(serde_json::to_vec(record)?)
}

/// Parses and validates a record from its JSON wire format.
pub fn deserialize(bytes: &[u8]) -> Result<TrajectoryRecord> {
    let record: TrajectoryRecord = serde_json::from_slice(bytes)
        .map_err(|e| Error::MalformedRecord(e.to_string()))?;
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;

    #[test]
    fn p_zero_records_no_measurements() {
        let spec = CircuitSpec::new(6, 4, 0.0, GateFamily::Clifford, 1);
        let (record, _) = generate_and_record(&spec).unwrap();
        assert!(record.measurements.is_empty());
        assert_eq!(record.gates.len(), 4 * 6); // n gates per layer on a ring
    }

    #[test]
    fn p_one_measures_every_qubit_every_gap() {
        let spec = CircuitSpec::new(4, 3, 1.0, GateFamily::Clifford, 2);
        let (record, _) = generate_and_record(&spec).unwrap();
        assert_eq!(record.measurements.len(), 4 * 2);
    }

    #[test]
    fn odd_sublayer_contains_wrap_gate() {
        let spec = CircuitSpec::new(8, 2, 0.0, GateFamily::Clifford, 3);
        let (record, _) = generate_and_record(&spec).unwrap();
        for layer in 1..=2 {
            assert!(record
                .gates
                .iter()
                .any(|g| g.layer == layer
                    && g.sublayer == Sublayer::Odd
                    && g.qubits == (7, 0)));
        }
    }

    #[test]
    fn records_are_deterministic() {
        let spec = CircuitSpec::new(16, 16, 0.3, GateFamily::Clifford, 7);
        let (r1, _) = generate_and_record(&spec).unwrap();
        let (r2, _) = generate_and_record(&spec).unwrap();
        assert_eq!(serialize(&r1).unwrap(), serialize(&r2).unwrap());
    }

    #[test]
    fn serialize_roundtrip() {
        let spec = CircuitSpec::new(6, 5, 0.4, GateFamily::Haar, 11);
        let (record, _) = generate_and_record(&spec).unwrap();
        let bytes = serialize(&record).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(record, back);
        // haar matrices reproduced bit-exactly
        for (a, b) in record.gates.iter().zip(back.gates.iter()) {
            assert_eq!(a.matrix, b.matrix);
        }
    }

    #[test]
    fn truncated_payload_is_malformed() {
        let spec = CircuitSpec::new(4, 2, 0.5, GateFamily::Clifford, 1);
        let (record, _) = generate_and_record(&spec).unwrap();
        let bytes = serialize(&record).unwrap();
        let err = deserialize(&bytes[..bytes.len() / 2]);
        assert!(matches!(err, Err(Error::MalformedRecord(_))));
    }

    #[test]
    fn version_mismatch_rejected() {
        let spec = CircuitSpec::new(4, 2, 0.5, GateFamily::Clifford, 1);
        let (mut record, _) = generate_and_record(&spec).unwrap();
        record.format_version = 99;
        assert!(matches!(
            record.validate(),
            Err(Error::VersionMismatch(99, 1))
        ));
    }

    #[test]
    fn dense_replay_matches_recorded_final_state() {
        let spec = CircuitSpec::new(8, 6, 0.3, GateFamily::Haar, 5);
        let (record, final_state) = generate_and_record(&spec).unwrap();
        let replayed = replay_reference(&record).unwrap();
        let f = dense::fidelity(
            final_state.dense().unwrap(),
            replayed.dense().unwrap(),
        )
        .unwrap();
        assert!(f > 1.0 - 1e-12, "fidelity {f}");
    }

    #[test]
    fn unitary_only_replay_matches_direct_simulation() {
        let spec = CircuitSpec::new(6, 4, 0.0, GateFamily::Haar, 9);
        let (record, final_state) = generate_and_record(&spec).unwrap();
        assert!(record.measurements.is_empty());
        let replayed = replay_reference(&record).unwrap();
        let f = dense::fidelity(
            final_state.dense().unwrap(),
            replayed.dense().unwrap(),
        )
        .unwrap();
        assert!(f > 1.0 - 1e-12);
    }

    #[test]
    fn tampered_deterministic_outcome_fails_replay() {
        // p = 1 forces heavy measurement; deterministic outcomes appear for
        // repeated measurements of the same qubit across gaps
        let spec = CircuitSpec::new(4, 4, 1.0, GateFamily::Clifford, 13);
        let (record, _) = generate_and_record(&spec).unwrap();
        let det_idx = record
            .measurements
            .iter()
            .position(|m| m.born_p == 1.0)
            .expect("a deterministic outcome exists at p = 1");
        let mut tampered = record.clone();
        tampered.measurements[det_idx].outcome ^= 1;
        assert!(matches!(
            replay_reference(&tampered),
            Err(Error::ImpossibleOutcome)
        ));
    }

    #[test]
    fn measurement_count_is_binomial() {
        // mean p*n*(L-1) within 4 sigma over many seeds
        let n = 8;
        let layers = 6;
        let p = 0.3;
        let trials = 2000;
        let mut total = 0usize;
        for seed in 0..trials {
            let spec = CircuitSpec::new(n, layers, p, GateFamily::Clifford, seed);
            let (record, _) = generate_and_record(&spec).unwrap();
            total += record.measurements.len();
        }
        let trials_f = trials as f64;
        let count_per = n as f64 * (layers - 1) as f64;
        let mean = total as f64 / trials_f;
        let expected = p * count_per;
        let sigma = (count_per * p * (1.0 - p) / trials_f).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * sigma,
            "mean {mean}, expected {expected}, sigma {sigma}"
        );
    }

    #[test]
    fn stabilizer_and_dense_backends_agree() {
        use crate::SubsystemSpec;
        for seed in 0..5 {
            let spec = CircuitSpec::new(6, 6, 0.3, GateFamily::Clifford, 100 + seed);
            let (record, fs) = generate_and_record(&spec).unwrap();
            let tab = fs.tableau().unwrap();
            let sv = replay_clifford_dense(&record).unwrap();
            for qs in [vec![0], vec![0, 1, 2], vec![1, 4, 5]] {
                let region = SubsystemSpec::new(6, qs).unwrap();
                let se = tab.entropy(&region);
                let de = dense::entropy_region(&sv, &region).unwrap();
                assert!((se - de).abs() < 1e-9, "entropy {se} vs {de}");
            }
            let a = SubsystemSpec::new(6, vec![0]).unwrap();
            let c = SubsystemSpec::new(6, vec![3, 4]).unwrap();
            let mi_t = tab.mutual_info(&a, &c).unwrap();
            let mi_d = dense::mutual_info(&sv, &a, &c).unwrap();
            assert!((mi_t - mi_d).abs() < 1e-9, "mi {mi_t} vs {mi_d}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CircuitSpec::new(5, 4, 0.3, GateFamily::Clifford, 0)
            .validate()
            .is_err());
        assert!(CircuitSpec::new(4, 0, 0.3, GateFamily::Clifford, 0)
            .validate()
            .is_err());
        assert!(CircuitSpec::new(4, 4, 1.5, GateFamily::Clifford, 0)
            .validate()
            .is_err());
        assert!(CircuitSpec::new(64, 4, 0.3, GateFamily::Haar, 0)
            .validate()
            .is_err());
    }
}
