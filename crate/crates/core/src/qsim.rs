//! Dense statevector simulator for the gate set used by the kernel circuit.
//!
//! Amplitude index bit `q` holds qubit `q`; qubit 0 is the least significant
//! bit. States are never renormalized after a gate, so numerical drift stays
//! visible to the norm checks in the test suite.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (2^24 amplitudes, ~256 MB).
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Hadamard,
    RotX,
    RotY,
    ControlledNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Gate {
            kind: GateKind::Hadamard,
            target,
            control: None,
            angle: None,
        }
    }

    pub fn rx(angle: f64, target: usize) -> Self {
        Gate {
            kind: GateKind::RotX,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn ry(angle: f64, target: usize) -> Self {
        Gate {
            kind: GateKind::RotY,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::ControlledNot,
            target,
            control: Some(control),
            angle: None,
        }
    }

    /// The inverse gate. H and CNOT are self-inverse; rotations negate.
    pub fn inverse(&self) -> Self {
        let mut g = *self;
        if let Some(a) = g.angle {
            g.angle = Some(-a);
        }
        g
    }

    /// 2x2 unitary for single-qubit gates, `None` for CNOT.
    pub fn matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let re = |x: f64| Complex64::new(x, 0.0);
        let im = |x: f64| Complex64::new(0.0, x);
        match self.kind {
            GateKind::Hadamard => Some([
                [re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)],
                [re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2)],
            ]),
            GateKind::RotX => {
                let half = self.angle.unwrap_or(0.0) / 2.0;
                let (s, c) = half.sin_cos();
                Some([[re(c), im(-s)], [im(-s), re(c)]])
            }
            GateKind::RotY => {
                let half = self.angle.unwrap_or(0.0) / 2.0;
                let (s, c) = half.sin_cos();
                Some([[re(c), re(-s)], [re(s), re(c)]])
            }
            GateKind::ControlledNot => None,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::Circuit(format!(
                "target qubit {} out of range for {n_qubits} qubits",
                self.target
            )));
        }
        match self.kind {
            GateKind::ControlledNot => {
                let control = self
                    .control
                    .ok_or_else(|| Error::Circuit("controlled-not without control".into()))?;
                if control >= n_qubits {
                    return Err(Error::Circuit(format!(
                        "control qubit {control} out of range for {n_qubits} qubits"
                    )));
                }
                if control == self.target {
                    return Err(Error::Circuit(format!(
                        "control and target are both qubit {control}"
                    )));
                }
            }
            GateKind::RotX | GateKind::RotY => match self.angle {
                Some(a) if a.is_finite() => {}
                Some(a) => return Err(Error::Circuit(format!("non-finite rotation angle {a}"))),
                None => return Err(Error::Circuit("rotation without angle".into())),
            },
            GateKind::Hadamard => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCircuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        Ok(QuantumCircuit {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Reversed gate order with each gate inverted.
    pub fn adjoint(&self) -> QuantumCircuit {
        QuantumCircuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// Debug dump: `{"n_qubits": .., "gates": [{"kind", "target", "control", "angle"}]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Config(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// |0…0⟩ on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Config(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate.matrix() {
            Some(m) => self.apply_single(&m, gate.target),
            None => {
                let control = gate.control.expect("validated");
                self.apply_cnot(control, gate.target);
            }
        }
        Ok(())
    }

    fn apply_single(&mut self, m: &[[Complex64; 2]; 2], target: usize) {
        let stride = 1usize << target;
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i0 in base..base + stride {
                let i1 = i0 | stride;
                let a0 = self.amplitudes[i0];
                let a1 = self.amplitudes[i1];
                self.amplitudes[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i1] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += stride << 1;
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }

    /// Probability of measuring |0…0⟩.
    pub fn zero_probability(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }

    /// Shot-based estimate of [`zero_probability`](Self::zero_probability):
    /// draws `shots` basis states from |amplitude|² and returns the fraction
    /// that landed on index 0.
    pub fn sample_zero_probability(&self, shots: usize, seed: u64) -> Result<f64> {
        if shots == 0 {
            return Err(Error::Config("shot count must be at least 1".into()));
        }
        let mut cumulative = Vec::with_capacity(self.amplitudes.len());
        let mut acc = 0.0;
        for a in &self.amplitudes {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut zeros = 0usize;
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            // first index whose cumulative mass exceeds u
            let idx = cumulative.partition_point(|&c| c <= u);
            if idx == 0 {
                zeros += 1;
            }
        }
        Ok(zeros as f64 / shots as f64)
    }
}

/// Applies every gate of `circuit` to a copy of `initial`.
pub fn run_circuit(circuit: &QuantumCircuit, initial: &StateVector) -> Result<StateVector> {
    if circuit.n_qubits != initial.n_qubits {
        return Err(Error::Circuit(format!(
            "circuit has {} qubits but state has {}",
            circuit.n_qubits, initial.n_qubits
        )));
    }
    let mut state = initial.clone();
    for gate in &circuit.gates {
        state.apply_gate(gate)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_amps(state: &StateVector, expected: &[Complex64]) {
        assert_eq!(state.amplitudes().len(), expected.len());
        for (a, b) in state.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{a} != {b}");
        }
    }

    #[test]
    fn zero_state_shapes() {
        assert_amps(&StateVector::zero_state(1).unwrap(), &[c(1., 0.), c(0., 0.)]);
        assert_amps(
            &StateVector::zero_state(2).unwrap(),
            &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)],
        );
        let s6 = StateVector::zero_state(6).unwrap();
        assert_eq!(s6.amplitudes().len(), 64);
        assert_eq!(s6.amplitudes()[0], c(1., 0.));
        assert!(StateVector::zero_state(0).is_err());
        assert!(matches!(
            StateVector::zero_state(25),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_gate_examples() {
        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        assert_amps(&s, &[c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)]);
        assert!((s.zero_probability() - 0.5).abs() < 1e-15);

        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_gate(&Gate::rx(PI, 0)).unwrap();
        assert_amps(&s, &[c(0., 0.), c(0., -1.)]);
        assert!(s.zero_probability() < 1e-30);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> in (qubit1, qubit0) notation is index 2
        let mut amps = vec![c(0., 0.); 4];
        amps[2] = c(1., 0.);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.apply_gate(&Gate::cnot(1, 0)).unwrap();
        assert_amps(&s, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
    }

    #[test]
    fn invalid_gates_rejected() {
        let mut s = StateVector::zero_state(2).unwrap();
        assert!(matches!(s.apply_gate(&Gate::h(2)), Err(Error::Circuit(_))));
        assert!(matches!(s.apply_gate(&Gate::cnot(1, 1)), Err(Error::Circuit(_))));
        assert!(matches!(
            s.apply_gate(&Gate::rx(f64::NAN, 0)),
            Err(Error::Circuit(_))
        ));
        let mut circ = QuantumCircuit::new(2).unwrap();
        assert!(circ.push(Gate::cnot(3, 0)).is_err());
    }

    #[test]
    fn run_circuit_identities() {
        let s = StateVector::zero_state(2).unwrap();
        let empty = QuantumCircuit::new(2).unwrap();
        assert_eq!(run_circuit(&empty, &s).unwrap(), s);

        let mut hh = QuantumCircuit::new(1).unwrap();
        hh.push(Gate::h(0)).unwrap();
        hh.push(Gate::h(0)).unwrap();
        let out = run_circuit(&hh, &StateVector::zero_state(1).unwrap()).unwrap();
        assert_amps(&out, &[c(1., 0.), c(0., 0.)]);

        let mismatch = QuantumCircuit::new(3).unwrap();
        assert!(matches!(run_circuit(&mismatch, &s), Err(Error::Circuit(_))));
    }

    #[test]
    fn h_then_rx_matches_matrix_product() {
        let mut circ = QuantumCircuit::new(1).unwrap();
        circ.push(Gate::h(0)).unwrap();
        circ.push(Gate::rx(PI / 2.0, 0)).unwrap();
        let out = run_circuit(&circ, &StateVector::zero_state(1).unwrap()).unwrap();

        // Rx(pi/2) * H * |0>, multiplied out by hand
        let h = Gate::h(0).matrix().unwrap();
        let rx = Gate::rx(PI / 2.0, 0).matrix().unwrap();
        let v = [h[0][0], h[1][0]];
        let w = [
            rx[0][0] * v[0] + rx[0][1] * v[1],
            rx[1][0] * v[0] + rx[1][1] * v[1],
        ];
        assert_amps(&out, &w);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjoint_reverses_and_negates() {
        let mut h = QuantumCircuit::new(1).unwrap();
        h.push(Gate::h(0)).unwrap();
        assert_eq!(h.adjoint(), h);

        let mut circ = QuantumCircuit::new(2).unwrap();
        circ.push(Gate::rx(0.7, 0)).unwrap();
        circ.push(Gate::ry(0.2, 1)).unwrap();
        let adj = circ.adjoint();
        assert_eq!(adj.gates, vec![Gate::ry(-0.2, 1), Gate::rx(-0.7, 0)]);
        assert_eq!(adj.adjoint(), circ);
    }

    #[test]
    fn sampling_edge_cases() {
        let s = StateVector::zero_state(2).unwrap();
        assert_eq!(s.sample_zero_probability(100, 3).unwrap(), 1.0);
        assert!(matches!(
            s.sample_zero_probability(0, 3),
            Err(Error::Config(_))
        ));

        let mut flipped = StateVector::zero_state(1).unwrap();
        flipped.apply_gate(&Gate::rx(PI, 0)).unwrap();
        for seed in 0..5 {
            assert_eq!(flipped.sample_zero_probability(500, seed).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampling_concentrates_on_half() {
        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_gate(&Gate::h(0)).unwrap();
        let within = (0..100)
            .filter(|&seed| (s.sample_zero_probability(10_000, seed).unwrap() - 0.5).abs() <= 0.05)
            .count();
        assert!(within >= 95);
        assert_eq!(
            s.sample_zero_probability(1000, 11).unwrap(),
            s.sample_zero_probability(1000, 11).unwrap()
        );
    }

    #[test]
    fn circuit_json_dump() {
        let mut circ = QuantumCircuit::new(2).unwrap();
        circ.push(Gate::h(0)).unwrap();
        circ.push(Gate::cnot(0, 1)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&circ.to_json()).unwrap();
        assert_eq!(v["n_qubits"], 2);
        assert_eq!(v["gates"][0]["kind"], "Hadamard");
        assert!(v["gates"][0]["control"].is_null());
        assert_eq!(v["gates"][1]["control"], 0);
    }
}
