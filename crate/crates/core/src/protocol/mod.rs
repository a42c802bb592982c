//! The two-way protocol on {ψ+, φ−} pairs.
//!
//! Bob prepares one of the two states and sends its halves to Alice one at a
//! time. Alice measures both halves in the same basis (σx or σz) and announces
//! only whether the outcomes were correlated. Bob learns her basis from the
//! announcement and she learns his state from her basis choice. Control rounds
//! either run a CHSH test (Bob keeps and measures the second half) or an error
//! check (Alice measures both halves and discloses her basis).

mod register;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{Adversary, AdversaryModel, EveLog};
use crate::qcore::{
    BellStateId, ChshSettings, Outcome, PauliOp, PlanarObservable, StateError, INVARIANT_TOL,
};

pub use register::{QubitTag, Register};

/// Random stream driving one pair.
pub type PairRng = ChaCha8Rng;

/// Independent streams for the honest parties and for the adversary of pair `index`.
///
/// Both depend only on `(seed, index)`, so a pair's record does not change when
/// more or fewer pairs are run around it, and the honest choices of a pair are
/// the same whichever adversary is installed.
pub fn pair_streams(seed: u64, index: u64) -> (PairRng, PairRng) {
    let mut honest = ChaCha8Rng::seed_from_u64(seed);
    honest.set_stream(index.wrapping_mul(2));
    let mut adversary = ChaCha8Rng::seed_from_u64(seed);
    adversary.set_stream(index.wrapping_mul(2).wrapping_add(1));
    (honest, adversary)
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Alice's measurement basis in message rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::X, Basis::Z];

    pub fn observable(self) -> PlanarObservable {
        match self {
            Basis::X => PlanarObservable::X,
            Basis::Z => PlanarObservable::Z,
        }
    }

    /// Key bit carried by the basis choice: X = 0, Z = 1.
    pub fn bit(self) -> u8 {
        match self {
            Basis::X => 0,
            Basis::Z => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Basis {
        if bit {
            Basis::Z
        } else {
            Basis::X
        }
    }

    /// Position of this basis among Alice's CHSH angles (Z first, then X).
    pub fn chsh_slot(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

/// Key bit carried by Bob's state choice: ψ+ = 0, φ− = 1.
pub fn state_bit(state: BellStateId) -> Option<u8> {
    match state {
        BellStateId::PsiPlus => Some(0),
        BellStateId::PhiMinus => Some(1),
        _ => None,
    }
}

/// The two states Bob chooses between.
pub const BASE_STATES: [BellStateId; 2] = [BellStateId::PsiPlus, BellStateId::PhiMinus];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// Which half of the pair is on the quantum channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    First,
    Second,
}

/// Everything sent over the (authenticated, public) classical channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ProtocolMessage {
    /// Alice has the first half. One bit: whether this is a control round.
    MeasuredFirst { control: bool },
    /// Whether Alice's two outcomes agreed. One bit.
    CorrelationAnnouncement { correlated: bool },
    /// A CHSH control disclosure; Bob also names his state so estimates can be binned.
    ControlDisclosure {
        party: Party,
        setting: PlanarObservable,
        outcome: Outcome,
        state_id: Option<BellStateId>,
    },
    /// Error-check control: Alice's basis and whether her outcomes agreed.
    QberDisclosure { basis: Basis, correlated: bool },
    /// Bob's prepared state, revealed in a control round of the four-state variant.
    StateDisclosure { state_id: BellStateId },
    /// Index of the Pauli operation chosen by Alice in the four-state variant. Two bits.
    OperationAnnouncement { op: PauliOp },
}

/// One step of a round, in the order it happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TraceEvent {
    Transit(Leg),
    AliceMeasured(Leg),
    AliceBellMeasured,
    BobMeasured,
    Announced(ProtocolMessage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Base,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Chsh,
    Qber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Duplex {
    /// Runs alternate between Alice encoding and Bob encoding.
    Separate,
    /// Both parties encode on every pair.
    Full,
}

/// Who carries key material on a given pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encoder {
    AliceRun,
    BobRun,
    FullDuplex,
}

impl Encoder {
    pub fn alice_encodes(self) -> bool {
        self != Encoder::BobRun
    }

    pub fn bob_encodes(self) -> bool {
        self != Encoder::AliceRun
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Message,
    ControlChsh,
    ControlQber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub protocol: ProtocolKind,
    pub pairs: u64,
    pub control_probability: f64,
    pub check: CheckKind,
    pub duplex: Duplex,
    pub attack: AdversaryModel,
    pub seed: u64,
    pub settings: ChshSettings,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            protocol: ProtocolKind::Base,
            pairs: 10_000,
            control_probability: 0.25,
            check: CheckKind::Chsh,
            duplex: Duplex::Separate,
            attack: AdversaryModel::default(),
            seed: 0,
            settings: ChshSettings::default(),
        }
    }
}

fn same_angle(a: f64, b: f64) -> bool {
    (PlanarObservable::new(a).angle() - PlanarObservable::new(b).angle()).abs() <= INVARIANT_TOL
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let c = self.control_probability;
        if !(0.0..1.0).contains(&c) {
            return Err(ProtocolError::Config(format!(
                "control probability {c} outside [0, 1)"
            )));
        }
        let s = &self.settings;
        if s.alice_angles
            .iter()
            .chain(&s.bob_angles)
            .any(|a| !a.is_finite())
        {
            return Err(ProtocolError::Config("CHSH angles must be finite".into()));
        }
        // In Bob's runs Alice learns of a control round only after measuring in
        // her message basis, so her CHSH angles have to be exactly σz and σx.
        if self.protocol == ProtocolKind::Base
            && self.check == CheckKind::Chsh
            && self.duplex == Duplex::Separate
            && !(same_angle(s.alice_angles[0], Basis::Z.observable().angle())
                && same_angle(s.alice_angles[1], Basis::X.observable().angle()))
        {
            return Err(ProtocolError::Config(
                "separate runs with CHSH control need Alice's angles to be (0, pi/2)".into(),
            ));
        }
        Ok(())
    }

    pub fn encoder_for(&self, index: u64) -> Encoder {
        match self.duplex {
            Duplex::Full => Encoder::FullDuplex,
            Duplex::Separate if index & 1 == 0 => Encoder::AliceRun,
            Duplex::Separate => Encoder::BobRun,
        }
    }
}

/// Full transcript of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_index: u64,
    pub mode: Mode,
    pub encoder: Encoder,
    pub bob_state: BellStateId,
    pub alice_basis: Basis,
    /// Angle Alice actually measured the first half at.
    pub alice_angle: f64,
    /// Angle Bob measured his retained half at, control CHSH rounds only.
    pub bob_angle: Option<f64>,
    /// CHSH slot indices, control CHSH rounds only.
    pub alice_setting: Option<usize>,
    pub bob_setting: Option<usize>,
    pub alice_outcomes: Vec<Outcome>,
    pub bob_outcome: Option<Outcome>,
    pub announcements: Vec<ProtocolMessage>,
    pub trace: Vec<TraceEvent>,
    pub bob_decoded_basis: Option<Basis>,
    pub alice_decoded_state: Option<BellStateId>,
    /// Error-check verdict, control QBER rounds only.
    pub check_error: Option<bool>,
    pub eve_log: Option<EveLog>,
}

/// Message bits to send instead of drawing them at random.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Payload {
    pub alice_basis: Option<Basis>,
    pub bob_state: Option<BellStateId>,
}

/// Outcome product when both halves of `state` are measured in `basis`.
pub fn correlation_signature(state: BellStateId, basis: Basis) -> Outcome {
    use BellStateId::*;
    match (state, basis) {
        (PsiPlus, Basis::X) | (PhiPlus, Basis::X) | (PhiPlus, Basis::Z) | (PhiMinus, Basis::Z) => {
            Outcome::Plus
        }
        (PsiPlus, Basis::Z) | (PsiMinus, _) | (PhiMinus, Basis::X) => Outcome::Minus,
    }
}

/// Bob's reading of Alice's basis from his state and her announcement.
pub fn bob_decode(sent: BellStateId, correlated: bool) -> Result<Basis, ProtocolError> {
    if state_bit(sent).is_none() {
        return Err(ProtocolError::Violation(format!(
            "{sent} is not one of the two base-protocol states"
        )));
    }
    let announced = Outcome::from_sign(correlated);
    Ok(Basis::ALL
        .into_iter()
        .find(|&b| correlation_signature(sent, b) == announced)
        .expect("ψ+ and φ− have opposite signatures in the two bases"))
}

/// Alice's reading of Bob's state from her basis and her own outcomes.
pub fn alice_decode(basis: Basis, correlated: bool) -> BellStateId {
    let announced = Outcome::from_sign(correlated);
    BASE_STATES
        .into_iter()
        .find(|&s| correlation_signature(s, basis) == announced)
        .expect("ψ+ and φ− have opposite signatures in each basis")
}

/// Quantum register plus the channel plumbing shared by both protocol variants.
pub(crate) struct Round<'a> {
    pub register: Register,
    adversary: Option<&'a mut dyn Adversary>,
    adversary_rng: PairRng,
    pub trace: Vec<TraceEvent>,
    pub announcements: Vec<ProtocolMessage>,
}

impl<'a> Round<'a> {
    pub fn new(
        bob_state: BellStateId,
        mut adversary: Option<&'a mut dyn Adversary>,
        adversary_rng: PairRng,
    ) -> Self {
        if let Some(a) = adversary.as_deref_mut() {
            a.begin_round();
        }
        Round {
            register: Register::with_bob_pair(bob_state),
            adversary,
            adversary_rng,
            trace: Vec::new(),
            announcements: Vec::new(),
        }
    }

    /// Sends `qubit` over the quantum channel; returns what arrives.
    pub fn transit(&mut self, leg: Leg, qubit: QubitTag) -> Result<QubitTag, StateError> {
        self.trace.push(TraceEvent::Transit(leg));
        match self.adversary.as_deref_mut() {
            Some(a) => a.on_transit(leg, qubit, &mut self.register, &mut self.adversary_rng),
            None => Ok(qubit),
        }
    }

    pub fn announce(&mut self, msg: ProtocolMessage) -> Result<(), StateError> {
        self.trace.push(TraceEvent::Announced(msg));
        self.announcements.push(msg);
        match self.adversary.as_deref_mut() {
            Some(a) => a.on_announcement(&msg, &mut self.register, &mut self.adversary_rng),
            None => Ok(()),
        }
    }

    pub fn finish(self) -> (Vec<ProtocolMessage>, Vec<TraceEvent>, Option<EveLog>) {
        let log = self.adversary.and_then(|a| a.end_round());
        (self.announcements, self.trace, log)
    }
}

/// Runs pair `index` of a session with uniformly drawn message bits.
pub fn run_pair(
    config: &SimulationConfig,
    adversary: &mut dyn Adversary,
    index: u64,
) -> Result<PairRecord, ProtocolError> {
    run_pair_with(config, Some(adversary), index, Payload::default())
}

/// Runs one pair, optionally with no adversary layer at all and with fixed message bits.
pub fn run_pair_with(
    config: &SimulationConfig,
    adversary: Option<&mut dyn Adversary>,
    index: u64,
    payload: Payload,
) -> Result<PairRecord, ProtocolError> {
    config.validate()?;
    let (mut rng, adversary_rng) = pair_streams(config.seed, index);
    let encoder = config.encoder_for(index);

    let drawn_state = BASE_STATES[rng.random::<bool>() as usize];
    let bob_state = payload.bob_state.unwrap_or(drawn_state);
    if state_bit(bob_state).is_none() {
        return Err(ProtocolError::Config(format!(
            "{bob_state} cannot be sent in the base protocol"
        )));
    }
    let control = rng.random::<f64>() < config.control_probability;
    let drawn_basis = Basis::from_bit(rng.random());
    let alice_basis = payload.alice_basis.unwrap_or(drawn_basis);
    let mode = match (control, config.check) {
        (false, _) => Mode::Message,
        (true, CheckKind::Chsh) => Mode::ControlChsh,
        (true, CheckKind::Qber) => Mode::ControlQber,
    };

    let mut round = Round::new(bob_state, adversary, adversary_rng);

    // (2) first half crosses the channel; (3) Alice measures it
    let first = round.transit(Leg::First, QubitTag::Bob(0))?;
    let slot = alice_basis.chsh_slot();
    // only the encoding party knows in advance; in Bob's runs he calls control afterwards
    let alice_knows_control = encoder.alice_encodes();
    let first_obs = if mode == Mode::ControlChsh && alice_knows_control {
        config.settings.alice(slot)
    } else {
        alice_basis.observable()
    };
    let a1 = round.register.measure(first, first_obs, rng.random())?;
    round.trace.push(TraceEvent::AliceMeasured(Leg::First));
    // (4) control status is public only from here on
    round.announce(ProtocolMessage::MeasuredFirst { control })?;

    let mut record = PairRecord {
        pair_index: index,
        mode,
        encoder,
        bob_state,
        alice_basis,
        alice_angle: first_obs.angle(),
        bob_angle: None,
        alice_setting: None,
        bob_setting: None,
        alice_outcomes: vec![a1],
        bob_outcome: None,
        announcements: Vec::new(),
        trace: Vec::new(),
        bob_decoded_basis: None,
        alice_decoded_state: None,
        check_error: None,
        eve_log: None,
    };

    match mode {
        Mode::Message => {
            let second = round.transit(Leg::Second, QubitTag::Bob(1))?;
            let a2 = round
                .register
                .measure(second, alice_basis.observable(), rng.random())?;
            round.trace.push(TraceEvent::AliceMeasured(Leg::Second));
            let correlated = a1.times(a2) == Outcome::Plus;
            round.announce(ProtocolMessage::CorrelationAnnouncement { correlated })?;
            record.alice_outcomes.push(a2);
            if encoder.alice_encodes() {
                record.bob_decoded_basis = Some(bob_decode(bob_state, correlated)?);
            }
            if encoder.bob_encodes() {
                record.alice_decoded_state = Some(alice_decode(alice_basis, correlated));
            }
        }
        Mode::ControlChsh => {
            let bob_slot = rng.random::<bool>() as usize;
            let bob_obs = config.settings.bob(bob_slot);
            let b = round
                .register
                .measure(QubitTag::Bob(1), bob_obs, rng.random())?;
            round.trace.push(TraceEvent::BobMeasured);
            round.announce(ProtocolMessage::ControlDisclosure {
                party: Party::Alice,
                setting: first_obs,
                outcome: a1,
                state_id: None,
            })?;
            round.announce(ProtocolMessage::ControlDisclosure {
                party: Party::Bob,
                setting: bob_obs,
                outcome: b,
                state_id: Some(bob_state),
            })?;
            record.alice_setting = Some(slot);
            record.bob_setting = Some(bob_slot);
            record.bob_angle = Some(bob_obs.angle());
            record.bob_outcome = Some(b);
        }
        Mode::ControlQber => {
            let second = round.transit(Leg::Second, QubitTag::Bob(1))?;
            let a2 = round
                .register
                .measure(second, alice_basis.observable(), rng.random())?;
            round.trace.push(TraceEvent::AliceMeasured(Leg::Second));
            let correlated = a1.times(a2) == Outcome::Plus;
            round.announce(ProtocolMessage::QberDisclosure {
                basis: alice_basis,
                correlated,
            })?;
            record.alice_outcomes.push(a2);
            record.check_error = Some(
                Outcome::from_sign(correlated) != correlation_signature(bob_state, alice_basis),
            );
        }
    }

    let (announcements, trace, eve_log) = round.finish();
    record.announcements = announcements;
    record.trace = trace;
    record.eve_log = eve_log;
    Ok(record)
}

/// Runs `config.pairs` pairs in index order against one adversary instance.
pub fn run_session(
    config: &SimulationConfig,
    adversary: &mut dyn Adversary,
) -> Result<Vec<PairRecord>, ProtocolError> {
    if config.pairs == 0 {
        return Err(ProtocolError::Config("pairs must be at least 1".into()));
    }
    (0..config.pairs)
        .map(|i| run_pair(config, adversary, i))
        .collect()
}
