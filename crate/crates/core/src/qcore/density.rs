use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use super::{ChshSettings, PlanarObservable, PureState, StateError, INVARIANT_TOL};

/// Smallest eigenvalue tolerated before a matrix is rejected as non-positive.
const EIGEN_FLOOR: f64 = -1e-10;

/// Density matrix of a two-qubit system.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity {
    matrix: Matrix4<Complex64>,
}

impl TwoQubitDensity {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(matrix: Matrix4<Complex64>) -> Result<Self, StateError> {
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > INVARIANT_TOL || trace.im.abs() > INVARIANT_TOL {
            return Err(StateError::InvalidDensity(format!("trace {trace}")));
        }
        let skew = max_abs(&(matrix - matrix.adjoint()));
        if skew > INVARIANT_TOL {
            return Err(StateError::InvalidDensity(format!(
                "non-Hermitian by {skew}"
            )));
        }
        let min_eigen = matrix.symmetric_eigenvalues().min();
        if min_eigen < EIGEN_FLOOR {
            return Err(StateError::InvalidDensity(format!(
                "eigenvalue {min_eigen}"
            )));
        }
        Ok(TwoQubitDensity { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a two-qubit pure state.
    pub fn from_pure(state: &PureState) -> Result<Self, StateError> {
        if state.num_qubits() != 2 {
            return Err(StateError::InvalidDensity(format!(
                "{}-qubit state is not a pair",
                state.num_qubits()
            )));
        }
        let v = state.amplitudes();
        Ok(TwoQubitDensity {
            matrix: Matrix4::from_fn(|r, c| v[r] * v[c].conj()),
        })
    }

    /// Reduced state of `(qubit_a, qubit_b)`, tracing out every other qubit.
    ///
    /// `qubit_a` becomes the first factor of the pair.
    pub fn marginal(state: &PureState, qubit_a: usize, qubit_b: usize) -> Result<Self, StateError> {
        let n = state.num_qubits();
        for q in [qubit_a, qubit_b] {
            if q >= n {
                return Err(StateError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: n,
                });
            }
        }
        if qubit_a == qubit_b {
            return Err(StateError::DuplicateQubit(qubit_a));
        }
        let amps = state.amplitudes();
        let bit = |i: usize, q: usize| (i >> (n - 1 - q)) & 1;
        let pair_index = |i: usize| bit(i, qubit_a) * 2 + bit(i, qubit_b);
        let env_mask = (0..n)
            .filter(|&q| q != qubit_a && q != qubit_b)
            .fold(0usize, |m, q| m | 1 << (n - 1 - q));
        let mut matrix = Matrix4::zeros();
        for (i, a) in amps.iter().enumerate() {
            for (j, b) in amps.iter().enumerate() {
                if i & env_mask == j & env_mask {
                    matrix[(pair_index(i), pair_index(j))] += a * b.conj();
                }
            }
        }
        Ok(TwoQubitDensity { matrix })
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }
}

/// Convex combination of density matrices.
pub fn mix(components: &[(f64, TwoQubitDensity)]) -> Result<TwoQubitDensity, StateError> {
    if components.is_empty() {
        return Err(StateError::InvalidWeights("empty mixture".into()));
    }
    if let Some((w, _)) = components.iter().find(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(StateError::InvalidWeights(format!("negative weight {w}")));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > INVARIANT_TOL {
        return Err(StateError::InvalidWeights(format!(
            "weights sum to {total}"
        )));
    }
    let matrix = components
        .iter()
        .fold(Matrix4::zeros(), |acc, (w, rho)| acc + rho.matrix.scale(*w));
    TwoQubitDensity::new(matrix)
}

pub(crate) fn max_abs(m: &Matrix4<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn observable_matrix(obs: PlanarObservable) -> Matrix2<Complex64> {
    let m = obs.matrix();
    Matrix2::from_fn(|r, c| Complex64::new(m[r][c], 0.0))
}

/// `Tr(ρ · A ⊗ B)`, with `obs_a` acting on the first qubit.
pub fn correlator(
    state: &TwoQubitDensity,
    obs_a: PlanarObservable,
    obs_b: PlanarObservable,
) -> f64 {
    let joint = observable_matrix(obs_a).kronecker(&observable_matrix(obs_b));
    (state.matrix * joint).trace().re
}

/// CHSH combination `E(a1,b1) − E(a1,b2) + E(a2,b1) + E(a2,b2)`.
pub fn chsh_value(state: &TwoQubitDensity, settings: &ChshSettings) -> f64 {
    let mut s = 0.0;
    for (i, signs) in ChshSettings::SIGNS.iter().enumerate() {
        for (j, sign) in signs.iter().enumerate() {
            s += sign * correlator(state, settings.alice(i), settings.bob(j));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{bell_state, tensor, BellStateId, ANALYTIC_TOL};
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn pure(id: BellStateId) -> TwoQubitDensity {
        TwoQubitDensity::from_pure(&bell_state(id)).unwrap()
    }

    fn equal_mixture() -> TwoQubitDensity {
        mix(&[
            (0.5, pure(BellStateId::PsiPlus)),
            (0.5, pure(BellStateId::PhiMinus)),
        ])
        .unwrap()
    }

    fn angles() -> impl Iterator<Item = (f64, f64)> {
        (0..12).flat_map(|i| (0..12).map(move |j| (i as f64 * 0.53, j as f64 * 0.47 - 1.0)))
    }

    #[test]
    fn singleton_mixture_is_identity() {
        let rho = pure(BellStateId::PsiMinus);
        assert_eq!(mix(&[(1.0, rho.clone())]).unwrap(), rho);
    }

    #[test]
    fn equal_mixture_matrix() {
        // ½|ψ+⟩⟨ψ+| + ½|φ−⟩⟨φ−| by hand: 1/4 on the diagonal, ±1/4 on the anti-corners
        let rho = equal_mixture();
        let m = rho.matrix();
        let expected = [
            [0.25, 0.0, 0.0, -0.25],
            [0.0, 0.25, 0.25, 0.0],
            [0.0, 0.25, 0.25, 0.0],
            [-0.25, 0.0, 0.0, 0.25],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert!((m[(r, c)] - Complex64::new(expected[r][c], 0.0)).norm() < INVARIANT_TOL);
            }
        }
        assert!((rho.trace().re - 1.0).abs() < INVARIANT_TOL);
    }

    #[test]
    fn malformed_weights() {
        let rho = pure(BellStateId::PsiPlus);
        assert!(matches!(mix(&[]), Err(StateError::InvalidWeights(_))));
        assert!(matches!(
            mix(&[(0.7, rho.clone()), (0.7, rho.clone())]),
            Err(StateError::InvalidWeights(_))
        ));
        assert!(matches!(
            mix(&[(1.5, rho.clone()), (-0.5, rho)]),
            Err(StateError::InvalidWeights(_))
        ));
    }

    #[test]
    fn rejects_non_physical_matrices() {
        let mut m = Matrix4::<Complex64>::zeros();
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(TwoQubitDensity::new(m).is_err());
        let mut m = Matrix4::<Complex64>::identity().scale(0.25);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(TwoQubitDensity::new(m).is_err());
        assert!(TwoQubitDensity::new(Matrix4::identity().scale(0.25)).is_ok());
    }

    #[test]
    fn psi_plus_correlator_is_minus_cos_sum() {
        let rho = pure(BellStateId::PsiPlus);
        for (a, b) in angles() {
            let e = correlator(&rho, PlanarObservable::new(a), PlanarObservable::new(b));
            assert!((e + (a + b).cos()).abs() < ANALYTIC_TOL, "a={a} b={b}");
        }
        let xx = correlator(
            &rho,
            PlanarObservable::new(FRAC_PI_2),
            PlanarObservable::new(FRAC_PI_2),
        );
        assert!((xx - 1.0).abs() < ANALYTIC_TOL);
    }

    #[test]
    fn equal_mixture_correlator_vanishes() {
        let rho = equal_mixture();
        for (a, b) in angles() {
            let e = correlator(&rho, PlanarObservable::new(a), PlanarObservable::new(b));
            assert!(e.abs() < ANALYTIC_TOL);
        }
    }

    #[test]
    fn chsh_reference_values() {
        let settings = ChshSettings::default();
        let s = chsh_value(&pure(BellStateId::PsiPlus), &settings);
        assert!((s - 2.0 * SQRT_2).abs() < ANALYTIC_TOL);
        let s = chsh_value(&pure(BellStateId::PhiMinus), &settings);
        assert!((s + 2.0 * SQRT_2).abs() < ANALYTIC_TOL);

        for (a, b) in angles() {
            let custom = ChshSettings::new([a, b], [b * 0.5, a + 1.0]);
            assert!(chsh_value(&equal_mixture(), &custom).abs() < ANALYTIC_TOL);
        }

        let hh = tensor(&PureState::horizontal(), &PureState::horizontal()).unwrap();
        let hh = TwoQubitDensity::from_pure(&hh).unwrap();
        let zeros = ChshSettings::new([0.0, 0.0], [0.0, 0.0]);
        assert!((chsh_value(&hh, &zeros) - 2.0).abs() < ANALYTIC_TOL);
    }

    #[test]
    fn marginal_of_swapped_register() {
        // ψ+ on (0, 1) tensored with |H⟩: marginal on (0, 1) is ψ+ itself
        let s = tensor(&bell_state(BellStateId::PsiPlus), &PureState::horizontal()).unwrap();
        let m = TwoQubitDensity::marginal(&s, 0, 1).unwrap();
        assert!(max_abs(&(m.matrix() - pure(BellStateId::PsiPlus).matrix())) < INVARIANT_TOL);
        // marginal of qubits (0, 2) is separable: I/2 ⊗ |H⟩⟨H|
        let m = TwoQubitDensity::marginal(&s, 0, 2).unwrap();
        assert!((m.matrix()[(0, 0)].re - 0.5).abs() < INVARIANT_TOL);
        assert!((m.matrix()[(2, 2)].re - 0.5).abs() < INVARIANT_TOL);
        assert!(TwoQubitDensity::new(*m.matrix()).is_ok());
    }
}
