use num_complex::Complex64;

use super::{
    check_sample, BellStateId, Outcome, PauliOp, PlanarObservable, StateError, INVARIANT_TOL,
    MAX_QUBITS,
};

/// Normalized amplitude vector over `2^num_qubits` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Wraps an amplitude vector, rejecting bad lengths and non-unit norms.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, StateError> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || !(2..=1 << MAX_QUBITS).contains(&len) {
            return Err(StateError::InvalidLength(len));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > INVARIANT_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(PureState {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Real amplitudes, for convenience in tests and fixtures.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self, StateError> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis state `|index⟩` on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self, StateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(StateError::CapacityExceeded {
                requested: num_qubits,
            });
        }
        let dim = 1 << num_qubits;
        if index >= dim {
            return Err(StateError::InvalidLength(index));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(PureState {
            num_qubits,
            amplitudes,
        })
    }

    /// Horizontal polarization, `|0⟩`.
    pub fn horizontal() -> Self {
        Self::basis(1, 0).expect("single-qubit basis state")
    }

    /// Vertical polarization, `|1⟩`.
    pub fn vertical() -> Self {
        Self::basis(1, 1).expect("single-qubit basis state")
    }

    /// The `outcome` eigenstate of `obs` on one qubit.
    pub fn eigenstate(obs: PlanarObservable, outcome: Outcome) -> Self {
        let v = obs.eigenvector(outcome);
        PureState {
            num_qubits: 1,
            amplitudes: vec![Complex64::new(v[0], 0.0), Complex64::new(v[1], 0.0)],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`; `None` when the registers differ in size.
    pub fn inner(&self, other: &PureState) -> Option<Complex64> {
        if self.num_qubits != other.num_qubits {
            return None;
        }
        Some(
            self.amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a.conj() * b)
                .sum(),
        )
    }

    /// Equality up to a global phase: `|⟨a|b⟩| = 1` within `tol`.
    pub fn same_ray(&self, other: &PureState, tol: f64) -> bool {
        self.inner(other)
            .is_some_and(|ip| (ip.norm() - 1.0).abs() <= tol)
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit < self.num_qubits {
            Ok(())
        } else {
            Err(StateError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            })
        }
    }

    /// Bit mask selecting `qubit` within a basis index.
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn apply_single(&self, qubit: usize, gate: &[[Complex64; 2]; 2]) -> PureState {
        let mask = self.mask(qubit);
        let mut out = self.amplitudes.clone();
        for low in (0..out.len()).filter(|i| i & mask == 0) {
            let high = low | mask;
            let (a0, a1) = (self.amplitudes[low], self.amplitudes[high]);
            out[low] = gate[0][0] * a0 + gate[0][1] * a1;
            out[high] = gate[1][0] * a0 + gate[1][1] * a1;
        }
        PureState {
            num_qubits: self.num_qubits,
            amplitudes: out,
        }
    }

    fn renormalized(num_qubits: usize, mut amplitudes: Vec<Complex64>) -> PureState {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amplitudes {
            *a /= norm;
        }
        PureState {
            num_qubits,
            amplitudes,
        }
    }
}

/// Ideal Bell pair on two qubits.
pub fn bell_state(id: BellStateId) -> PureState {
    let amps = id.amplitudes();
    PureState {
        num_qubits: 2,
        amplitudes: amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
    }
}

/// Kronecker product; the qubits of `b` follow those of `a`.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState, StateError> {
    let requested = a.num_qubits + b.num_qubits;
    if requested > MAX_QUBITS {
        return Err(StateError::CapacityExceeded { requested });
    }
    let amplitudes = a
        .amplitudes
        .iter()
        .flat_map(|x| b.amplitudes.iter().map(move |y| x * y))
        .collect();
    Ok(PureState {
        num_qubits: requested,
        amplitudes,
    })
}

/// Projective measurement of `obs` on one qubit.
///
/// The outcome is `+1` when `rand` falls below the Born probability of `+1`.
pub fn measure_qubit(
    state: &PureState,
    qubit: usize,
    obs: PlanarObservable,
    rand: f64,
) -> Result<(Outcome, PureState), StateError> {
    state.check_qubit(qubit)?;
    check_sample(rand)?;
    let project = |outcome: Outcome| {
        let v = obs.eigenvector(outcome);
        let mask = state.mask(qubit);
        let mut out = vec![Complex64::new(0.0, 0.0); state.amplitudes.len()];
        for low in (0..out.len()).filter(|i| i & mask == 0) {
            let high = low | mask;
            let along = state.amplitudes[low] * v[0] + state.amplitudes[high] * v[1];
            out[low] = along * v[0];
            out[high] = along * v[1];
        }
        out
    };
    let plus = project(Outcome::Plus);
    let p_plus: f64 = plus.iter().map(|a| a.norm_sqr()).sum();
    let (outcome, projected) = if rand < p_plus {
        (Outcome::Plus, plus)
    } else {
        (Outcome::Minus, project(Outcome::Minus))
    };
    Ok((
        outcome,
        PureState::renormalized(state.num_qubits, projected),
    ))
}

pub fn apply_pauli(state: &PureState, qubit: usize, op: PauliOp) -> Result<PureState, StateError> {
    state.check_qubit(qubit)?;
    Ok(state.apply_single(qubit, &op.matrix()))
}

/// Projects qubits `(qubit_a, qubit_b)` onto the Bell basis.
///
/// Returns the observed Bell state and the renormalized state of the
/// remaining qubits in ascending index order, or `None` when no qubits remain.
pub fn bell_measure(
    state: &PureState,
    qubit_a: usize,
    qubit_b: usize,
    rand: f64,
) -> Result<(BellStateId, Option<PureState>), StateError> {
    state.check_qubit(qubit_a)?;
    state.check_qubit(qubit_b)?;
    if qubit_a == qubit_b {
        return Err(StateError::DuplicateQubit(qubit_a));
    }
    check_sample(rand)?;

    let n = state.num_qubits;
    let rest: Vec<usize> = (0..n).filter(|&q| q != qubit_a && q != qubit_b).collect();
    let (mask_a, mask_b) = (state.mask(qubit_a), state.mask(qubit_b));
    let rest_dim = 1usize << rest.len();

    // full index for residual index `r` and pair bits `(x, y)`
    let full_index = |r: usize, x: usize, y: usize| {
        let mut idx = 0;
        for (pos, &q) in rest.iter().enumerate() {
            if r >> (rest.len() - 1 - pos) & 1 == 1 {
                idx |= state.mask(q);
            }
        }
        if x == 1 {
            idx |= mask_a;
        }
        if y == 1 {
            idx |= mask_b;
        }
        idx
    };

    let branches: Vec<(BellStateId, Vec<Complex64>, f64)> = BellStateId::ALL
        .iter()
        .map(|&id| {
            let bell = id.amplitudes();
            let residual: Vec<Complex64> = (0..rest_dim)
                .map(|r| {
                    (0..4)
                        .map(|xy| state.amplitudes[full_index(r, xy >> 1, xy & 1)] * bell[xy])
                        .sum()
                })
                .collect();
            let p = residual.iter().map(|a| a.norm_sqr()).sum();
            (id, residual, p)
        })
        .collect();

    let mut cumulative = 0.0;
    let mut chosen = None;
    for (i, (_, _, p)) in branches.iter().enumerate() {
        cumulative += p;
        if rand < cumulative {
            chosen = Some(i);
            break;
        }
    }
    // rounding can leave the cumulative sum a hair below 1
    let chosen = chosen.unwrap_or_else(|| {
        branches
            .iter()
            .rposition(|(_, _, p)| *p > 0.0)
            .expect("normalized state has a nonzero branch")
    });
    let (id, residual, _) = branches.into_iter().nth(chosen).expect("index in range");
    let residual = if rest.is_empty() {
        None
    } else {
        Some(PureState::renormalized(rest.len(), residual))
    };
    Ok((id, residual))
}
