//! Exact state algebra for systems of one to four qubits.
//!
//! Amplitudes are indexed lexicographically with qubit 0 as the most
//! significant bit, so a two-qubit register is ordered `|HH⟩, |HV⟩, |VH⟩, |VV⟩`
//! with `H` the 0 state. Every stochastic operation takes its uniform sample
//! as an argument; nothing in here owns a random number generator.

mod density;
mod state;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use density::{chsh_value, correlator, mix, TwoQubitDensity};
pub use state::{apply_pauli, bell_measure, bell_state, measure_qubit, tensor, PureState};

/// Largest register the simulator will build.
pub const MAX_QUBITS: usize = 4;

/// Tolerance for algebraic invariants (norm, trace, Hermiticity).
pub const INVARIANT_TOL: f64 = 1e-12;

/// Tolerance for analytic equalities such as global-phase equivalence.
pub const ANALYTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("register of {requested} qubits exceeds the {MAX_QUBITS}-qubit capacity")]
    CapacityExceeded { requested: usize },
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {0} addressed twice")]
    DuplicateQubit(usize),
    #[error("amplitude vector of length {0} is not 2^n for 1 <= n <= {MAX_QUBITS}")]
    InvalidLength(usize),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("uniform sample {0} outside [0, 1)")]
    SampleOutOfRange(f64),
    #[error("no live qubit tagged {0}")]
    UnknownQubit(String),
    #[error("malformed mixture weights: {0}")]
    InvalidWeights(String),
    #[error("not a valid two-qubit density matrix: {0}")]
    InvalidDensity(String),
}

/// The four maximally entangled two-qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellStateId {
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
}

impl BellStateId {
    /// All four states, in the order of their two-bit labels.
    pub const ALL: [BellStateId; 4] = [
        BellStateId::PsiPlus,
        BellStateId::PsiMinus,
        BellStateId::PhiPlus,
        BellStateId::PhiMinus,
    ];

    /// The two-bit label: ψ+ = 00, ψ− = 01, φ+ = 10, φ− = 11.
    pub fn two_bits(self) -> u8 {
        match self {
            BellStateId::PsiPlus => 0b00,
            BellStateId::PsiMinus => 0b01,
            BellStateId::PhiPlus => 0b10,
            BellStateId::PhiMinus => 0b11,
        }
    }

    pub fn from_two_bits(bits: u8) -> Option<Self> {
        Self::ALL.get(bits as usize).copied()
    }

    /// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩` of the addressed pair.
    pub(crate) fn amplitudes(self) -> [f64; 4] {
        let h = FRAC_1_SQRT_2;
        match self {
            BellStateId::PsiPlus => [0.0, h, h, 0.0],
            BellStateId::PsiMinus => [0.0, h, -h, 0.0],
            BellStateId::PhiPlus => [h, 0.0, 0.0, h],
            BellStateId::PhiMinus => [h, 0.0, 0.0, -h],
        }
    }
}

impl fmt::Display for BellStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellStateId::PsiPlus => "psi+",
            BellStateId::PsiMinus => "psi-",
            BellStateId::PhiPlus => "phi+",
            BellStateId::PhiMinus => "phi-",
        })
    }
}

/// Identity and the three Pauli matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    Sigma0,
    Sigma1,
    Sigma2,
    Sigma3,
}

impl PauliOp {
    pub const ALL: [PauliOp; 4] = [
        PauliOp::Sigma0,
        PauliOp::Sigma1,
        PauliOp::Sigma2,
        PauliOp::Sigma3,
    ];

    pub fn index(self) -> u8 {
        match self {
            PauliOp::Sigma0 => 0,
            PauliOp::Sigma1 => 1,
            PauliOp::Sigma2 => 2,
            PauliOp::Sigma3 => 3,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        Self::ALL.get(index as usize).copied()
    }

    /// Row-major 2x2 matrix in the `H, V` basis.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            PauliOp::Sigma0 => [[l, o], [o, l]],
            PauliOp::Sigma1 => [[o, l], [l, o]],
            PauliOp::Sigma2 => [[o, -i], [i, o]],
            PauliOp::Sigma3 => [[l, o], [o, -l]],
        }
    }
}

/// A ±1-valued observable `cos(θ)·σz + sin(θ)·σx` in the linear-polarization plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanarObservable {
    angle: f64,
}

impl PlanarObservable {
    /// The σz measurement.
    pub const Z: PlanarObservable = PlanarObservable { angle: 0.0 };
    /// The σx measurement.
    pub const X: PlanarObservable = PlanarObservable { angle: FRAC_PI_2 };

    /// Builds the observable at `angle`, reduced into `[0, 2π)`.
    pub fn new(angle: f64) -> Self {
        let mut angle = angle.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if angle >= TAU {
            angle = 0.0;
        }
        PlanarObservable { angle }
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    /// Eigenvector for `outcome`, as real amplitudes over `H, V`.
    pub(crate) fn eigenvector(self, outcome: Outcome) -> [f64; 2] {
        let (s, c) = (self.angle / 2.0).sin_cos();
        match outcome {
            Outcome::Plus => [c, s],
            Outcome::Minus => [-s, c],
        }
    }

    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, s], [s, -c]]
    }
}

/// A measurement eigenvalue, ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    /// Product of two eigenvalues.
    pub fn times(self, other: Outcome) -> Outcome {
        if self == other {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn from_sign(positive: bool) -> Outcome {
        if positive {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(format!("outcome must be +1 or -1, got {other}")),
        }
    }
}

/// Measurement angles for a CHSH test: two for Alice, two for Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
}

impl ChshSettings {
    pub fn new(alice_angles: [f64; 2], bob_angles: [f64; 2]) -> Self {
        ChshSettings {
            alice_angles,
            bob_angles,
        }
    }

    pub fn alice(&self, index: usize) -> PlanarObservable {
        PlanarObservable::new(self.alice_angles[index])
    }

    pub fn bob(&self, index: usize) -> PlanarObservable {
        PlanarObservable::new(self.bob_angles[index])
    }

    /// Sign of each correlator term, indexed `[alice][bob]`.
    pub const SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];
}

impl Default for ChshSettings {
    /// Alice at {0, π/2}, Bob at {3π/4, π/4}: S = +2√2 on ψ+ and −2√2 on φ−.
    fn default() -> Self {
        ChshSettings {
            alice_angles: [0.0, FRAC_PI_2],
            bob_angles: [3.0 * FRAC_PI_4, FRAC_PI_4],
        }
    }
}

pub(crate) fn check_sample(rand: f64) -> Result<(), StateError> {
    if (0.0..1.0).contains(&rand) {
        Ok(())
    } else {
        Err(StateError::SampleOutOfRange(rand))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bit_labels_are_bijective() {
        for id in BellStateId::ALL {
            assert_eq!(BellStateId::from_two_bits(id.two_bits()), Some(id));
        }
        assert_eq!(BellStateId::PsiPlus.two_bits(), 0b00);
        assert_eq!(BellStateId::PsiMinus.two_bits(), 0b01);
        assert_eq!(BellStateId::PhiPlus.two_bits(), 0b10);
        assert_eq!(BellStateId::PhiMinus.two_bits(), 0b11);
        assert_eq!(BellStateId::from_two_bits(4), None);
    }

    #[test]
    fn pauli_matrices_are_unitary_and_hermitian() {
        for op in PauliOp::ALL {
            let m = op.matrix();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((m[r][c] - m[c][r].conj()).norm() < INVARIANT_TOL);
                    let prod: Complex64 = (0..2).map(|k| m[r][k] * m[k][c]).sum();
                    let expected = if r == c { 1.0 } else { 0.0 };
                    assert!((prod - Complex64::new(expected, 0.0)).norm() < INVARIANT_TOL);
                }
            }
        }
    }

    #[test]
    fn planar_observable_eigenvalues() {
        for k in 0..16 {
            let obs = PlanarObservable::new(k as f64 * 0.41 - 2.0);
            assert!((0.0..TAU).contains(&obs.angle()));
            let m = obs.matrix();
            for outcome in [Outcome::Plus, Outcome::Minus] {
                let v = obs.eigenvector(outcome);
                let lambda = outcome.value() as f64;
                for r in 0..2 {
                    let mv = m[r][0] * v[0] + m[r][1] * v[1];
                    assert!((mv - lambda * v[r]).abs() < INVARIANT_TOL);
                }
            }
        }
        assert_eq!(PlanarObservable::Z.matrix(), [[1.0, 0.0], [0.0, -1.0]]);
        let x = PlanarObservable::X.matrix();
        assert!(x[0][0].abs() < 1e-15 && (x[0][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outcome_serde_as_signed_integer() {
        assert_eq!(Outcome::try_from(-1), Ok(Outcome::Minus));
        assert!(Outcome::try_from(0).is_err());
        assert_eq!(Outcome::Minus.times(Outcome::Minus), Outcome::Plus);
        assert_eq!(Outcome::Plus.times(Outcome::Minus), Outcome::Minus);
    }
}
