use crate::qcore::{
    bell_measure, bell_state, measure_qubit, tensor, BellStateId, Outcome, PlanarObservable,
    PureState, StateError, TwoQubitDensity,
};

/// Owner and position of a physical qubit in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum QubitTag {
    /// Half of Bob's pair; 0 travels first.
    Bob(u8),
    /// Half of a pair prepared by the adversary.
    Eve(u8),
}

/// Every qubit alive in a round, addressed by tag instead of register index.
///
/// Bell measurements consume the measured qubits, so indices shift; tags do not.
#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    state: Option<PureState>,
    tags: Vec<QubitTag>,
}

impl Register {
    /// A register holding Bob's freshly prepared pair.
    pub fn with_bob_pair(id: BellStateId) -> Self {
        Register {
            state: Some(bell_state(id)),
            tags: vec![QubitTag::Bob(0), QubitTag::Bob(1)],
        }
    }

    pub fn tags(&self) -> &[QubitTag] {
        &self.tags
    }

    pub fn state(&self) -> Option<&PureState> {
        self.state.as_ref()
    }

    fn index(&self, tag: QubitTag) -> Result<usize, StateError> {
        self.tags
            .iter()
            .position(|&t| t == tag)
            .ok_or_else(|| StateError::UnknownQubit(format!("{tag:?}")))
    }

    fn live(&self) -> Result<&PureState, StateError> {
        self.state
            .as_ref()
            .ok_or_else(|| StateError::UnknownQubit("empty register".into()))
    }

    /// Adds a Bell pair under `tags`, after every existing qubit.
    pub fn append_pair(&mut self, id: BellStateId, tags: [QubitTag; 2]) -> Result<(), StateError> {
        let pair = bell_state(id);
        self.state = Some(match &self.state {
            Some(s) => tensor(s, &pair)?,
            None => pair,
        });
        self.tags.extend(tags);
        Ok(())
    }

    pub fn measure(
        &mut self,
        tag: QubitTag,
        obs: PlanarObservable,
        rand: f64,
    ) -> Result<Outcome, StateError> {
        let index = self.index(tag)?;
        let (outcome, next) = measure_qubit(self.live()?, index, obs, rand)?;
        self.state = Some(next);
        Ok(outcome)
    }

    /// Bell measurement that consumes both qubits.
    pub fn bell_measure(
        &mut self,
        a: QubitTag,
        b: QubitTag,
        rand: f64,
    ) -> Result<BellStateId, StateError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (id, rest) = bell_measure(self.live()?, ia, ib, rand)?;
        self.state = rest;
        self.tags.retain(|&t| t != a && t != b);
        Ok(id)
    }

    /// Reduced density matrix of two tagged qubits.
    pub fn marginal(&self, a: QubitTag, b: QubitTag) -> Result<TwoQubitDensity, StateError> {
        TwoQubitDensity::marginal(self.live()?, self.index(a)?, self.index(b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::ANALYTIC_TOL;

    #[test]
    fn tags_survive_bell_measurement() {
        let mut reg = Register::with_bob_pair(BellStateId::PsiPlus);
        reg.append_pair(BellStateId::PsiPlus, [QubitTag::Eve(0), QubitTag::Eve(1)])
            .unwrap();
        reg.bell_measure(QubitTag::Bob(0), QubitTag::Eve(1), 0.3)
            .unwrap();
        assert_eq!(reg.tags(), &[QubitTag::Bob(1), QubitTag::Eve(0)]);
        // the untouched halves are left in some Bell state
        let rest = reg.state().unwrap();
        assert!(BellStateId::ALL
            .iter()
            .any(|&id| rest.same_ray(&bell_state(id), ANALYTIC_TOL)));
    }

    #[test]
    fn unknown_tag_is_an_error() {
        let mut reg = Register::with_bob_pair(BellStateId::PhiMinus);
        assert!(reg
            .measure(QubitTag::Eve(0), PlanarObservable::Z, 0.1)
            .is_err());
        reg.bell_measure(QubitTag::Bob(0), QubitTag::Bob(1), 0.1)
            .unwrap();
        assert!(reg.state().is_none());
        assert!(reg
            .measure(QubitTag::Bob(0), PlanarObservable::Z, 0.1)
            .is_err());
    }
}
