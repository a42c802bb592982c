//! Four-state variant: Bob sends any Bell state (two bits), Alice reads it with
//! a Bell measurement, then answers with the index of the Pauli operation that
//! maps Bob's state onto the two bits she wants to send back.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{cabello_efficiency, Efficiency, EfficiencyQuery};
use crate::attacks::{Adversary, EveLog};
use crate::protocol::{
    correlation_signature, pair_streams, Basis, Leg, Party, ProtocolError, ProtocolMessage,
    QubitTag, Round, SimulationConfig, TraceEvent,
};
use crate::qcore::{BellStateId, Outcome, PauliOp};

/// Two key bits, carried by a Bell state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TwoBits(u8);

impl TwoBits {
    pub fn new(value: u8) -> Option<Self> {
        (value < 4).then_some(TwoBits(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn state(self) -> BellStateId {
        BellStateId::from_two_bits(self.0).expect("value below 4")
    }
}

impl From<BellStateId> for TwoBits {
    fn from(id: BellStateId) -> Self {
        TwoBits(id.two_bits())
    }
}

impl From<TwoBits> for u8 {
    fn from(b: TwoBits) -> u8 {
        b.0
    }
}

impl TryFrom<u8> for TwoBits {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        TwoBits::new(v).ok_or_else(|| format!("two-bit value {v} out of range"))
    }
}

/// Bell state reached by applying `op` to the first qubit of `state`, up to phase.
pub fn pauli_transition(state: BellStateId, op: PauliOp) -> BellStateId {
    use BellStateId::*;
    match (op, state) {
        (PauliOp::Sigma0, s) => s,
        (PauliOp::Sigma1, PsiPlus) => PhiPlus,
        (PauliOp::Sigma1, PhiPlus) => PsiPlus,
        (PauliOp::Sigma1, PsiMinus) => PhiMinus,
        (PauliOp::Sigma1, PhiMinus) => PsiMinus,
        (PauliOp::Sigma2, PsiPlus) => PhiMinus,
        (PauliOp::Sigma2, PhiMinus) => PsiPlus,
        (PauliOp::Sigma2, PsiMinus) => PhiPlus,
        (PauliOp::Sigma2, PhiPlus) => PsiMinus,
        (PauliOp::Sigma3, PsiPlus) => PsiMinus,
        (PauliOp::Sigma3, PsiMinus) => PsiPlus,
        (PauliOp::Sigma3, PhiPlus) => PhiMinus,
        (PauliOp::Sigma3, PhiMinus) => PhiPlus,
    }
}

/// The operation taking `current` to `target`.
pub fn pauli_for_target(current: BellStateId, target: BellStateId) -> PauliOp {
    PauliOp::ALL
        .into_iter()
        .find(|&op| pauli_transition(current, op) == target)
        .expect("the Pauli group acts transitively on the Bell basis")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModifiedMode {
    Message,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedPairRecord {
    pub pair_index: u64,
    pub mode: ModifiedMode,
    pub bob_state: BellStateId,
    pub alice_bell_outcome: Option<BellStateId>,
    pub alice_pauli: Option<PauliOp>,
    pub alice_target: Option<BellStateId>,
    pub bob_decoded: Option<BellStateId>,
    pub control_basis: Option<Basis>,
    pub control_outcomes: Vec<Outcome>,
    pub control_passed: Option<bool>,
    pub announcements: Vec<ProtocolMessage>,
    pub trace: Vec<TraceEvent>,
    pub eve_log: Option<EveLog>,
}

/// Fixed message content for one pair of the four-state variant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModifiedPayload {
    pub bob_state: Option<BellStateId>,
    pub alice_target: Option<BellStateId>,
}

pub fn run_modified_pair(
    config: &SimulationConfig,
    adversary: &mut dyn Adversary,
    index: u64,
) -> Result<ModifiedPairRecord, ProtocolError> {
    run_modified_pair_with(config, Some(adversary), index, ModifiedPayload::default())
}

pub fn run_modified_pair_with(
    config: &SimulationConfig,
    adversary: Option<&mut dyn Adversary>,
    index: u64,
    payload: ModifiedPayload,
) -> Result<ModifiedPairRecord, ProtocolError> {
    config.validate()?;
    let (mut rng, adversary_rng) = pair_streams(config.seed, index);

    let drawn_state = BellStateId::ALL[rng.random_range(0..4)];
    let bob_state = payload.bob_state.unwrap_or(drawn_state);
    let control = rng.random::<f64>() < config.control_probability;
    let basis = Basis::from_bit(rng.random());
    let drawn_target = BellStateId::ALL[rng.random_range(0..4)];
    let alice_target = payload.alice_target.unwrap_or(drawn_target);

    let mut record = ModifiedPairRecord {
        pair_index: index,
        mode: if control {
            ModifiedMode::Control
        } else {
            ModifiedMode::Message
        },
        bob_state,
        alice_bell_outcome: None,
        alice_pauli: None,
        alice_target: None,
        bob_decoded: None,
        control_basis: None,
        control_outcomes: Vec::new(),
        control_passed: None,
        announcements: Vec::new(),
        trace: Vec::new(),
        eve_log: None,
    };

    let mut round = Round::new(bob_state, adversary, adversary_rng);
    let first = round.transit(Leg::First, QubitTag::Bob(0))?;

    if control {
        let a1 = round
            .register
            .measure(first, basis.observable(), rng.random())?;
        round.trace.push(TraceEvent::AliceMeasured(Leg::First));
        round.announce(ProtocolMessage::MeasuredFirst { control: true })?;
        round.announce(ProtocolMessage::ControlDisclosure {
            party: Party::Alice,
            setting: basis.observable(),
            outcome: a1,
            state_id: None,
        })?;
        round.announce(ProtocolMessage::StateDisclosure {
            state_id: bob_state,
        })?;
        let second = round.transit(Leg::Second, QubitTag::Bob(1))?;
        let a2 = round
            .register
            .measure(second, basis.observable(), rng.random())?;
        round.trace.push(TraceEvent::AliceMeasured(Leg::Second));
        record.control_basis = Some(basis);
        record.control_outcomes = vec![a1, a2];
        record.control_passed = Some(a1.times(a2) == correlation_signature(bob_state, basis));
    } else {
        // receipt acknowledgement
        round.announce(ProtocolMessage::MeasuredFirst { control: false })?;
        let second = round.transit(Leg::Second, QubitTag::Bob(1))?;
        let received = round.register.bell_measure(first, second, rng.random())?;
        round.trace.push(TraceEvent::AliceBellMeasured);
        let op = pauli_for_target(received, alice_target);
        round.announce(ProtocolMessage::OperationAnnouncement { op })?;
        record.alice_bell_outcome = Some(received);
        record.alice_pauli = Some(op);
        record.alice_target = Some(alice_target);
        record.bob_decoded = Some(pauli_transition(bob_state, op));
    }

    let (announcements, trace, eve_log) = round.finish();
    record.announcements = announcements;
    record.trace = trace;
    record.eve_log = eve_log;
    Ok(record)
}

pub fn run_modified_session(
    config: &SimulationConfig,
    adversary: &mut dyn Adversary,
) -> Result<Vec<ModifiedPairRecord>, ProtocolError> {
    if config.pairs == 0 {
        return Err(ProtocolError::Config("pairs must be at least 1".into()));
    }
    (0..config.pairs)
        .map(|i| run_modified_pair(config, adversary, i))
        .collect()
}

/// Efficiency of the four-state variant, ignoring control rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModifiedEfficiency {
    /// Both parties encode on one pair: 4 secret bits over 2 qubits and 3 classical bits.
    pub per_run: Efficiency,
    /// Bob's run (2 bits, 1 classical receipt bit) averaged with Alice's (2 bits, 3 classical bits).
    pub average: Efficiency,
}

pub fn modified_efficiency() -> ModifiedEfficiency {
    const RECEIPT_BITS: u64 = 1;
    const OPERATION_BITS: u64 = 2;
    let query = |secret_bits, classical_bits| EfficiencyQuery {
        secret_bits,
        qubits: 2,
        classical_bits,
    };
    let cabello = |q| cabello_efficiency(q).expect("nonzero denominator");
    let per_run = cabello(query(4, RECEIPT_BITS + OPERATION_BITS));
    let alice_run = cabello(query(2, RECEIPT_BITS + OPERATION_BITS));
    let bob_run = cabello(query(2, RECEIPT_BITS));
    ModifiedEfficiency {
        per_run,
        average: Efficiency::mean(&[alice_run, bob_run]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{AdversaryModel, AttackKind, NoAdversary};
    use crate::protocol::ProtocolKind;
    use crate::qcore::{apply_pauli, bell_state, ANALYTIC_TOL};

    fn config(pairs: u64, c: f64) -> SimulationConfig {
        SimulationConfig {
            protocol: ProtocolKind::Modified,
            pairs,
            control_probability: c,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn transitions_agree_with_state_algebra() {
        for state in BellStateId::ALL {
            for op in PauliOp::ALL {
                let moved = apply_pauli(&bell_state(state), 0, op).unwrap();
                let target = pauli_transition(state, op);
                assert!(
                    moved.same_ray(&bell_state(target), ANALYTIC_TOL),
                    "{state} {op:?}"
                );
            }
        }
        assert_eq!(
            pauli_transition(BellStateId::PsiPlus, PauliOp::Sigma1),
            BellStateId::PhiPlus
        );
        assert_eq!(
            pauli_transition(BellStateId::PhiPlus, PauliOp::Sigma3),
            BellStateId::PhiMinus
        );
    }

    #[test]
    fn operation_for_target() {
        for s in BellStateId::ALL {
            assert_eq!(pauli_for_target(s, s), PauliOp::Sigma0);
            for t in BellStateId::ALL {
                assert_eq!(pauli_transition(s, pauli_for_target(s, t)), t);
            }
        }
        assert_eq!(
            pauli_for_target(BellStateId::PsiPlus, BellStateId::PhiMinus),
            PauliOp::Sigma2
        );
    }

    #[test]
    fn two_bits_round_trip() {
        for id in BellStateId::ALL {
            assert_eq!(TwoBits::from(id).state(), id);
        }
        assert!(TwoBits::new(4).is_none());
        assert_eq!(
            TwoBits::try_from(3u8).unwrap().state(),
            BellStateId::PhiMinus
        );
    }

    #[test]
    fn clean_channel_decodes_both_ways() {
        let records = run_modified_session(&config(3_000, 0.2), &mut NoAdversary).unwrap();
        let mut messages = 0;
        for r in &records {
            match r.mode {
                ModifiedMode::Message => {
                    messages += 1;
                    assert_eq!(r.alice_bell_outcome, Some(r.bob_state));
                    assert_eq!(r.bob_decoded, r.alice_target);
                }
                ModifiedMode::Control => assert_eq!(r.control_passed, Some(true)),
            }
        }
        assert!(messages > 2_000);
    }

    #[test]
    fn passive_listener_guesses_target_at_chance() {
        // without Bob's state, the announced index says nothing about the target
        let records = run_modified_session(&config(20_000, 0.0), &mut NoAdversary).unwrap();
        let hits = records
            .iter()
            .filter(|r| {
                let op = r.alice_pauli.unwrap();
                Some(pauli_transition(BellStateId::PsiPlus, op)) == r.alice_target
            })
            .count();
        let rate = hits as f64 / records.len() as f64;
        let se = (0.25 * 0.75 / records.len() as f64).sqrt();
        assert!((rate - 0.25).abs() < 4.0 * se, "{rate}");
    }

    #[test]
    fn substitution_fails_control_checks() {
        let mut cfg = config(4_000, 0.5);
        cfg.attack = AdversaryModel::new(AttackKind::QmmSubstitute);
        let mut eve = cfg.attack.build(cfg.protocol);
        let records = run_modified_session(&cfg, eve.as_mut()).unwrap();
        let checks: Vec<bool> = records.iter().filter_map(|r| r.control_passed).collect();
        let pass_rate = checks.iter().filter(|p| **p).count() as f64 / checks.len() as f64;
        assert!(pass_rate < 1.0);
        // a mismatched substitute fails in one basis or both; matching never fails
        for r in &records {
            if let Some(passed) = r.control_passed {
                let sub = r.eve_log.as_ref().unwrap().substitute_state.unwrap();
                if sub == r.bob_state {
                    assert!(passed);
                }
            }
        }
    }

    #[test]
    fn efficiency_values() {
        let e = modified_efficiency();
        assert_eq!(e.per_run.to_string(), "4/5");
        assert_eq!(e.average.to_string(), "8/15");
    }
}
