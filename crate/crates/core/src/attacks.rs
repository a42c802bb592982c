//! Eavesdroppers on the quantum channel.
//!
//! An adversary sees each qubit as it crosses the channel and every public
//! announcement after it is sent. It never sees the honest parties' local
//! outcomes or choices. Three attacks are provided:
//!
//! * intercept-resend: measure each transiting half in σx or σz and forward
//!   the collapsed qubit, reusing the first half's basis on the second half;
//! * pair substitution (man in the middle): keep Bob's halves, forward halves
//!   of a pair Eve prepared herself, and Bell-measure Bob's pair at the end;
//! * substitution with entanglement swapping: as above, but once Alice reveals
//!   a control round, Bell-measure Bob's first half together with Eve's own
//!   retained half so that Bob's second half becomes entangled with Alice's.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::modified::pauli_transition;
use crate::protocol::{
    alice_decode, bob_decode, correlation_signature, Basis, Leg, PairRng, ProtocolKind,
    ProtocolMessage, QubitTag, Register, BASE_STATES,
};
use crate::qcore::{BellStateId, Outcome, StateError};

/// Channel-attack hooks, called by the protocol driver in transcript order.
pub trait Adversary {
    fn begin_round(&mut self) {}

    /// `qubit` is on the channel during `leg`; returns the qubit delivered to Alice.
    fn on_transit(
        &mut self,
        leg: Leg,
        qubit: QubitTag,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<QubitTag, StateError>;

    /// Called after each public announcement.
    fn on_announcement(
        &mut self,
        msg: &ProtocolMessage,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<(), StateError>;

    /// Hands back what the adversary learned this round.
    fn end_round(&mut self) -> Option<EveLog>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    #[default]
    None,
    InterceptResend,
    QmmSubstitute,
    QmmSwap,
}

/// Intercept-resend basis choice on the first half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPolicy {
    #[default]
    Uniform,
    Fixed(Basis),
}

/// State of the pair Eve substitutes for Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstitutePolicy {
    /// Uniform over the states the protocol variant uses.
    #[default]
    Uniform,
    Fixed(BellStateId),
}

/// Attack selection and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdversaryModel {
    pub kind: AttackKind,
    pub basis_policy: BasisPolicy,
    pub substitute_policy: SubstitutePolicy,
}

impl AdversaryModel {
    pub fn new(kind: AttackKind) -> Self {
        AdversaryModel {
            kind,
            ..AdversaryModel::default()
        }
    }

    /// One adversary instance for one session.
    pub fn build(&self, protocol: ProtocolKind) -> Box<dyn Adversary> {
        match self.kind {
            AttackKind::None => Box::new(NoAdversary),
            AttackKind::InterceptResend => {
                Box::new(InterceptResend::new(self.basis_policy, protocol))
            }
            AttackKind::QmmSubstitute => {
                Box::new(ManInTheMiddle::new(self.substitute_policy, protocol, false))
            }
            AttackKind::QmmSwap => {
                Box::new(ManInTheMiddle::new(self.substitute_policy, protocol, true))
            }
        }
    }
}

/// What Eve saw, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Qubit(Leg),
    Announcement(ProtocolMessage),
}

/// Per-round record of an attack.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EveLog {
    pub observed: Vec<Observation>,
    pub measured_bases: Vec<Basis>,
    pub measured_outcomes: Vec<Outcome>,
    pub substitute_state: Option<BellStateId>,
    /// Bell measurement on Bob's two halves.
    pub bell_outcome: Option<BellStateId>,
    /// Bell measurement on Bob's first half and Eve's retained half.
    pub swap_outcome: Option<BellStateId>,
    /// Guess of Alice's key bits: her basis bit, or her two-bit target in the four-state variant.
    pub guessed_alice_bits: Option<u8>,
    /// Guess of Bob's key bits: his state bit, or his state's two-bit label.
    pub guessed_bob_bits: Option<u8>,
}

/// The clean channel.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAdversary;

impl Adversary for NoAdversary {
    fn on_transit(
        &mut self,
        _leg: Leg,
        qubit: QubitTag,
        _register: &mut Register,
        _rng: &mut PairRng,
    ) -> Result<QubitTag, StateError> {
        Ok(qubit)
    }

    fn on_announcement(
        &mut self,
        _msg: &ProtocolMessage,
        _register: &mut Register,
        _rng: &mut PairRng,
    ) -> Result<(), StateError> {
        Ok(())
    }

    fn end_round(&mut self) -> Option<EveLog> {
        None
    }
}

/// Guess of Bob's state from the two outcomes of a same-basis measurement.
///
/// In the four-state variant two states share each signature; the first is taken.
fn state_from_signature(protocol: ProtocolKind, basis: Basis, product: Outcome) -> BellStateId {
    match protocol {
        ProtocolKind::Base => alice_decode(basis, product == Outcome::Plus),
        ProtocolKind::Modified => BellStateId::ALL
            .into_iter()
            .find(|&s| correlation_signature(s, basis) == product)
            .expect("every signature is shared by two Bell states"),
    }
}

/// Measures transiting qubits in σx or σz and forwards the collapsed halves.
#[derive(Debug, Clone)]
pub struct InterceptResend {
    policy: BasisPolicy,
    protocol: ProtocolKind,
    basis: Option<Basis>,
    log: EveLog,
}

impl InterceptResend {
    pub fn new(policy: BasisPolicy, protocol: ProtocolKind) -> Self {
        InterceptResend {
            policy,
            protocol,
            basis: None,
            log: EveLog::default(),
        }
    }

    /// Measures the transiting qubit; the second leg reuses the first leg's basis.
    pub fn ir_on_qubit(
        &mut self,
        leg: Leg,
        qubit: QubitTag,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<QubitTag, StateError> {
        let basis = match (leg, self.basis) {
            (Leg::Second, Some(b)) => b,
            _ => {
                let b = match self.policy {
                    BasisPolicy::Uniform => Basis::from_bit(rng.random()),
                    BasisPolicy::Fixed(b) => b,
                };
                self.basis = Some(b);
                b
            }
        };
        let outcome = register.measure(qubit, basis.observable(), rng.random())?;
        self.log.measured_bases.push(basis);
        self.log.measured_outcomes.push(outcome);
        Ok(qubit)
    }

    fn guessed_state(&self) -> Option<BellStateId> {
        match (self.basis, self.log.measured_outcomes.as_slice()) {
            (Some(basis), [a, b]) => Some(state_from_signature(self.protocol, basis, a.times(*b))),
            _ => None,
        }
    }
}

impl Adversary for InterceptResend {
    fn begin_round(&mut self) {
        self.basis = None;
        self.log = EveLog::default();
    }

    fn on_transit(
        &mut self,
        leg: Leg,
        qubit: QubitTag,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<QubitTag, StateError> {
        self.log.observed.push(Observation::Qubit(leg));
        self.ir_on_qubit(leg, qubit, register, rng)
    }

    fn on_announcement(
        &mut self,
        msg: &ProtocolMessage,
        _register: &mut Register,
        _rng: &mut PairRng,
    ) -> Result<(), StateError> {
        self.log.observed.push(Observation::Announcement(*msg));
        let Some(state) = self.guessed_state() else {
            return Ok(());
        };
        match *msg {
            ProtocolMessage::CorrelationAnnouncement { correlated } => {
                self.log.guessed_bob_bits = crate::protocol::state_bit(state);
                self.log.guessed_alice_bits = bob_decode(state, correlated).ok().map(Basis::bit);
            }
            ProtocolMessage::OperationAnnouncement { op } => {
                self.log.guessed_bob_bits = Some(state.two_bits());
                self.log.guessed_alice_bits = Some(pauli_transition(state, op).two_bits());
            }
            _ => {}
        }
        Ok(())
    }

    fn end_round(&mut self) -> Option<EveLog> {
        Some(std::mem::take(&mut self.log))
    }
}

/// Pair substitution, optionally followed by entanglement swapping in control rounds.
#[derive(Debug, Clone)]
pub struct ManInTheMiddle {
    policy: SubstitutePolicy,
    protocol: ProtocolKind,
    swap_on_control: bool,
    swapped: bool,
    log: EveLog,
}

impl ManInTheMiddle {
    pub fn new(policy: SubstitutePolicy, protocol: ProtocolKind, swap_on_control: bool) -> Self {
        ManInTheMiddle {
            policy,
            protocol,
            swap_on_control,
            swapped: false,
            log: EveLog::default(),
        }
    }

    fn draw_substitute(&self, rng: &mut PairRng) -> BellStateId {
        match (self.policy, self.protocol) {
            (SubstitutePolicy::Fixed(s), _) => s,
            (SubstitutePolicy::Uniform, ProtocolKind::Base) => BASE_STATES[rng.random_range(0..2)],
            (SubstitutePolicy::Uniform, ProtocolKind::Modified) => {
                BellStateId::ALL[rng.random_range(0..4)]
            }
        }
    }

    /// Keeps Bob's half and forwards the matching half of Eve's own pair.
    ///
    /// On the second leg Eve Bell-measures Bob's two halves, which she now holds.
    pub fn qmm_substitute(
        &mut self,
        leg: Leg,
        qubit: QubitTag,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<QubitTag, StateError> {
        match leg {
            Leg::First => {
                let substitute = self.draw_substitute(rng);
                register.append_pair(substitute, [QubitTag::Eve(0), QubitTag::Eve(1)])?;
                self.log.substitute_state = Some(substitute);
                Ok(QubitTag::Eve(0))
            }
            Leg::Second => {
                let bob_first = QubitTag::Bob(0);
                self.log.bell_outcome =
                    Some(register.bell_measure(bob_first, qubit, rng.random())?);
                Ok(QubitTag::Eve(1))
            }
        }
    }

    /// Bell-measures Bob's first half with Eve's retained half, applying no correction.
    ///
    /// Afterwards Bob's second half and the half Alice received share a Bell
    /// state that is uniformly random and unknown to Alice and Bob.
    pub fn qmm_swap(
        &mut self,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<(), StateError> {
        let outcome = register.bell_measure(QubitTag::Bob(0), QubitTag::Eve(1), rng.random())?;
        self.log.swap_outcome = Some(outcome);
        self.swapped = true;
        Ok(())
    }
}

impl Adversary for ManInTheMiddle {
    fn begin_round(&mut self) {
        self.swapped = false;
        self.log = EveLog::default();
    }

    fn on_transit(
        &mut self,
        leg: Leg,
        qubit: QubitTag,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<QubitTag, StateError> {
        self.log.observed.push(Observation::Qubit(leg));
        if self.swapped && leg == Leg::Second {
            // Bob's second half is now Alice's partner; pass it along untouched
            return Ok(qubit);
        }
        self.qmm_substitute(leg, qubit, register, rng)
    }

    fn on_announcement(
        &mut self,
        msg: &ProtocolMessage,
        register: &mut Register,
        rng: &mut PairRng,
    ) -> Result<(), StateError> {
        self.log.observed.push(Observation::Announcement(*msg));
        let substitute = self.log.substitute_state;
        match *msg {
            ProtocolMessage::MeasuredFirst { control: true } if self.swap_on_control => {
                self.qmm_swap(register, rng)?;
            }
            ProtocolMessage::CorrelationAnnouncement { correlated } => {
                // Alice measured Eve's pair, so its signature reveals her basis
                if let Some(s) = substitute {
                    self.log.guessed_alice_bits = bob_decode(s, correlated).ok().map(Basis::bit);
                }
                self.log.guessed_bob_bits =
                    self.log.bell_outcome.and_then(crate::protocol::state_bit);
            }
            ProtocolMessage::OperationAnnouncement { op } => {
                if let Some(s) = substitute {
                    self.log.guessed_alice_bits = Some(pauli_transition(s, op).two_bits());
                }
                self.log.guessed_bob_bits = self.log.bell_outcome.map(BellStateId::two_bits);
            }
            _ => {}
        }
        Ok(())
    }

    fn end_round(&mut self) -> Option<EveLog> {
        Some(std::mem::take(&mut self.log))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{
        pair_streams, run_pair_with, CheckKind, Duplex, Mode, Payload, SimulationConfig, TraceEvent,
    };
    use crate::qcore::{chsh_value, ChshSettings, PlanarObservable};

    fn qber_config(kind: AttackKind) -> SimulationConfig {
        SimulationConfig {
            check: CheckKind::Qber,
            control_probability: 0.5,
            attack: AdversaryModel::new(kind),
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn ir_in_alices_basis_is_invisible() {
        for basis in Basis::ALL {
            let mut config = qber_config(AttackKind::InterceptResend);
            config.attack.basis_policy = BasisPolicy::Fixed(basis);
            let mut eve = config.attack.build(config.protocol);
            let payload = Payload {
                alice_basis: Some(basis),
                bob_state: Some(BellStateId::PsiPlus),
            };
            for i in 0..400 {
                let r = run_pair_with(&config, Some(eve.as_mut()), i, payload).unwrap();
                if let Some(err) = r.check_error {
                    assert!(!err);
                }
                if r.mode == Mode::Message {
                    let product = r.alice_outcomes[0].times(r.alice_outcomes[1]);
                    assert_eq!(product, correlation_signature(BellStateId::PsiPlus, basis));
                }
            }
        }
    }

    #[test]
    fn ir_in_wrong_basis_errs_half_the_time() {
        // σz on Bob's halves while Alice measures σx: her product is a fair coin
        let mut config = qber_config(AttackKind::InterceptResend);
        config.attack.basis_policy = BasisPolicy::Fixed(Basis::Z);
        let mut eve = config.attack.build(config.protocol);
        let payload = Payload {
            alice_basis: Some(Basis::X),
            bob_state: None,
        };
        let (mut checks, mut errors) = (0u32, 0u32);
        for i in 0..8_000 {
            let r = run_pair_with(&config, Some(eve.as_mut()), i, payload).unwrap();
            if let Some(e) = r.check_error {
                checks += 1;
                errors += e as u32;
            }
        }
        let d = errors as f64 / checks as f64;
        let se = (0.25 / checks as f64).sqrt();
        assert!((d - 0.5).abs() < 4.0 * se, "d = {d}");
    }

    #[test]
    fn ir_leaves_a_separable_pair() {
        // analytic CHSH of the Alice–Bob pair right after Eve's first-leg measurement
        let settings_grid: Vec<ChshSettings> = (0..40)
            .map(|k| {
                let t = k as f64 * 0.37;
                ChshSettings::new([t, t * 1.7 + 0.2], [t * 0.3 - 1.0, t + 2.1])
            })
            .chain([ChshSettings::default()])
            .collect();
        for state in BASE_STATES {
            for k in 0..50u64 {
                let mut reg = Register::with_bob_pair(state);
                let mut eve = InterceptResend::new(BasisPolicy::Uniform, ProtocolKind::Base);
                let (_, mut rng) = pair_streams(11, k);
                eve.on_transit(Leg::First, QubitTag::Bob(0), &mut reg, &mut rng)
                    .unwrap();
                let rho = reg.marginal(QubitTag::Bob(0), QubitTag::Bob(1)).unwrap();
                for s in &settings_grid {
                    assert!(chsh_value(&rho, s).abs() <= 2.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn substitution_matching_bobs_state_reads_everything() {
        for state in BASE_STATES {
            let mut config = qber_config(AttackKind::QmmSubstitute);
            config.duplex = Duplex::Full;
            config.control_probability = 0.0;
            config.attack.substitute_policy = SubstitutePolicy::Fixed(state);
            let mut eve = config.attack.build(config.protocol);
            let payload = Payload {
                alice_basis: None,
                bob_state: Some(state),
            };
            for i in 0..300 {
                let r = run_pair_with(&config, Some(eve.as_mut()), i, payload).unwrap();
                let log = r.eve_log.unwrap();
                assert_eq!(log.guessed_alice_bits, Some(r.alice_basis.bit()));
                assert_eq!(log.guessed_bob_bits, crate::protocol::state_bit(state));
                assert_eq!(r.bob_decoded_basis, Some(r.alice_basis));
                assert_eq!(r.alice_decoded_state, Some(state));
            }
        }
    }

    #[test]
    fn substitution_errors_exactly_when_states_differ() {
        let config = qber_config(AttackKind::QmmSubstitute);
        let mut eve = config.attack.build(config.protocol);
        for i in 0..2_000 {
            let r = run_pair_with(&config, Some(eve.as_mut()), i, Payload::default()).unwrap();
            if let Some(err) = r.check_error {
                let sub = r.eve_log.as_ref().unwrap().substitute_state.unwrap();
                assert_eq!(err, sub != r.bob_state);
            }
        }
    }

    #[test]
    fn swap_commutes_with_alices_measurement() {
        // Alice measures Eve(0) and Eve swaps (Bob0, Eve1): disjoint qubits, so
        // the joint outcome distribution is the same in either order.
        let obs = PlanarObservable::new(0.7);
        let joint = |alice_first: bool| {
            let mut reg = Register::with_bob_pair(BellStateId::PsiPlus);
            reg.append_pair(BellStateId::PhiMinus, [QubitTag::Eve(0), QubitTag::Eve(1)])
                .unwrap();
            let mut probs = std::collections::BTreeMap::<_, f64>::new();
            // enumerate branches via stratified samples
            for i in 0..200 {
                for j in 0..200 {
                    let (ra, rb) = ((i as f64 + 0.5) / 200.0, (j as f64 + 0.5) / 200.0);
                    let mut r = reg.clone();
                    let (a, s) = if alice_first {
                        let a = r.measure(QubitTag::Eve(0), obs, ra).unwrap();
                        (
                            a,
                            r.bell_measure(QubitTag::Bob(0), QubitTag::Eve(1), rb)
                                .unwrap(),
                        )
                    } else {
                        let s = r
                            .bell_measure(QubitTag::Bob(0), QubitTag::Eve(1), rb)
                            .unwrap();
                        (r.measure(QubitTag::Eve(0), obs, ra).unwrap(), s)
                    };
                    *probs.entry((a.value(), s)).or_insert(0.0) += 1.0 / 40_000.0;
                }
            }
            probs
        };
        let (x, y) = (joint(true), joint(false));
        assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
        for (k, p) in &x {
            assert!((p - y[k]).abs() < 0.02, "{k:?}: {p} vs {}", y[k]);
        }
    }

    #[test]
    fn adversary_never_sees_control_before_alice_measures() {
        let config = SimulationConfig {
            control_probability: 0.5,
            attack: AdversaryModel::new(AttackKind::QmmSwap),
            ..SimulationConfig::default()
        };
        let mut eve = config.attack.build(config.protocol);
        for i in 0..500 {
            let r = run_pair_with(&config, Some(eve.as_mut()), i, Payload::default()).unwrap();
            let measured_at = r
                .trace
                .iter()
                .position(|e| *e == TraceEvent::AliceMeasured(Leg::First))
                .unwrap();
            let log = r.eve_log.unwrap();
            for obs in &log.observed {
                if let Observation::Announcement(ProtocolMessage::MeasuredFirst { .. }) = obs {
                    let at = r
                        .trace
                        .iter()
                        .position(|e| {
                            matches!(
                                e,
                                TraceEvent::Announced(ProtocolMessage::MeasuredFirst { .. })
                            )
                        })
                        .unwrap();
                    assert!(at > measured_at);
                }
            }
            if r.mode == Mode::ControlChsh {
                assert!(log.swap_outcome.is_some());
            } else {
                assert!(log.swap_outcome.is_none());
            }
        }
    }
}
