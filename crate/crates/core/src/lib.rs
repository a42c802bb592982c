//! Simulation of a deterministic two-way key distribution protocol built on
//! pairs of Bell states: exact state algebra, the protocol state machines,
//! eavesdropper models and the estimators used to detect them.

pub mod analysis;
pub mod attacks;
pub mod modified;
pub mod protocol;
pub mod qcore;

pub use analysis::{
    build_report, cabello_efficiency, estimate_chsh, estimate_qber, evasion_probability,
    AnalysisError, ChshEstimate, DetectionStats, Efficiency, EfficiencyQuery, EfficiencyTable,
    ReportDocument, SimulationReport,
};
pub use attacks::{Adversary, AdversaryModel, AttackKind, BasisPolicy, EveLog, SubstitutePolicy};
pub use modified::{
    pauli_transition, run_modified_pair, run_modified_session, ModifiedPairRecord, TwoBits,
};
pub use protocol::{
    run_pair, run_session, Basis, CheckKind, Duplex, Mode, PairRecord, ProtocolError, ProtocolKind,
    ProtocolMessage, SimulationConfig,
};
pub use qcore::{
    BellStateId, ChshSettings, Outcome, PauliOp, PlanarObservable, PureState, StateError,
    TwoQubitDensity,
};
