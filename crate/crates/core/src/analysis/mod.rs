//! Estimators over round records and the closed-form figures of merit.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::modified::{ModifiedMode, ModifiedPairRecord};
use crate::protocol::{state_bit, Mode, PairRecord};
use crate::qcore::{BellStateId, ChshSettings, PlanarObservable, INVARIANT_TOL};

pub use report::{
    build_report, Accuracy, EfficiencyTable, ReportDocument, SimulationReport, Tally,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("efficiency undefined: no qubits or classical bits transmitted")]
    ZeroDenominator,
    #[error("pair {pair_index} was measured at angles that differ from the CHSH settings")]
    SettingsMismatch { pair_index: u64 },
}

/// One CHSH control round, reduced to what the estimator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSample {
    pub pair_index: u64,
    pub state: BellStateId,
    pub alice_slot: usize,
    pub bob_slot: usize,
    pub alice_angle: f64,
    pub bob_angle: f64,
    /// Product of the two ±1 outcomes.
    pub product: i8,
}

/// Per-round facts shared by both protocol variants.
pub trait RoundSummary {
    fn is_control(&self) -> bool;
    /// `Some(true)` when an error check flagged this round.
    fn check_error(&self) -> Option<bool>;
    fn chsh_sample(&self) -> Option<ChshSample>;
    /// Whether Alice decoded Bob's message correctly, when she decoded one.
    fn alice_decode_ok(&self) -> Option<bool>;
    /// Whether Bob decoded Alice's message correctly, when he decoded one.
    fn bob_decode_ok(&self) -> Option<bool>;
    /// Correctness of each guess the adversary made about key bits.
    fn eve_guesses(&self) -> Vec<bool>;
}

impl RoundSummary for PairRecord {
    fn is_control(&self) -> bool {
        self.mode != Mode::Message
    }

    fn check_error(&self) -> Option<bool> {
        self.check_error
    }

    fn chsh_sample(&self) -> Option<ChshSample> {
        if self.mode != Mode::ControlChsh {
            return None;
        }
        Some(ChshSample {
            pair_index: self.pair_index,
            state: self.bob_state,
            alice_slot: self.alice_setting?,
            bob_slot: self.bob_setting?,
            alice_angle: self.alice_angle,
            bob_angle: self.bob_angle?,
            product: self
                .alice_outcomes
                .first()?
                .times(self.bob_outcome?)
                .value(),
        })
    }

    fn alice_decode_ok(&self) -> Option<bool> {
        self.alice_decoded_state.map(|s| s == self.bob_state)
    }

    fn bob_decode_ok(&self) -> Option<bool> {
        self.bob_decoded_basis.map(|b| b == self.alice_basis)
    }

    fn eve_guesses(&self) -> Vec<bool> {
        let Some(log) = self.eve_log.as_ref().filter(|_| self.mode == Mode::Message) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if let (true, Some(g)) = (self.encoder.alice_encodes(), log.guessed_alice_bits) {
            out.push(g == self.alice_basis.bit());
        }
        if let (true, Some(g)) = (self.encoder.bob_encodes(), log.guessed_bob_bits) {
            out.push(Some(g) == state_bit(self.bob_state));
        }
        out
    }
}

impl RoundSummary for ModifiedPairRecord {
    fn is_control(&self) -> bool {
        self.mode == ModifiedMode::Control
    }

    fn check_error(&self) -> Option<bool> {
        self.control_passed.map(|p| !p)
    }

    fn chsh_sample(&self) -> Option<ChshSample> {
        None
    }

    fn alice_decode_ok(&self) -> Option<bool> {
        self.alice_bell_outcome.map(|s| s == self.bob_state)
    }

    fn bob_decode_ok(&self) -> Option<bool> {
        self.bob_decoded.map(|s| Some(s) == self.alice_target)
    }

    fn eve_guesses(&self) -> Vec<bool> {
        let Some(log) = self
            .eve_log
            .as_ref()
            .filter(|_| self.mode == ModifiedMode::Message)
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if let (Some(g), Some(t)) = (log.guessed_alice_bits, self.alice_target) {
            out.push(g == t.two_bits());
        }
        if let Some(g) = log.guessed_bob_bits {
            out.push(g == self.bob_state.two_bits());
        }
        out
    }
}

/// Correlator counts for the four CHSH setting pairs, indexed `[alice][bob]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshBin {
    pub counts: [[u64; 2]; 2],
    /// Sum of outcome products.
    pub sums: [[i64; 2]; 2],
}

impl ChshBin {
    pub fn add(&mut self, sample: &ChshSample) {
        self.counts[sample.alice_slot][sample.bob_slot] += 1;
        self.sums[sample.alice_slot][sample.bob_slot] += sample.product as i64;
    }

    pub fn merge(&mut self, other: &ChshBin) {
        for i in 0..2 {
            for j in 0..2 {
                self.counts[i][j] += other.counts[i][j];
                self.sums[i][j] += other.sums[i][j];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correlator(&self, alice: usize, bob: usize) -> Option<f64> {
        let n = self.counts[alice][bob];
        (n > 0).then(|| self.sums[alice][bob] as f64 / n as f64)
    }

    /// Estimated S, or `None` if any setting pair has no samples.
    pub fn s_hat(&self) -> Option<f64> {
        let mut s = 0.0;
        for (i, signs) in ChshSettings::SIGNS.iter().enumerate() {
            for (j, sign) in signs.iter().enumerate() {
                s += sign * self.correlator(i, j)?;
            }
        }
        Some(s)
    }

    /// Root-sum-square of the four correlator standard errors.
    pub fn stderr(&self) -> Option<f64> {
        let mut var = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = self.correlator(i, j)?;
                var += (1.0 - e * e) / self.counts[i][j] as f64;
            }
        }
        Some(var.sqrt())
    }

    pub fn estimate(&self) -> BinEstimate {
        BinEstimate {
            s_hat: self.s_hat(),
            stderr: self.stderr(),
            correlators: [
                [self.correlator(0, 0), self.correlator(0, 1)],
                [self.correlator(1, 0), self.correlator(1, 1)],
            ],
            counts: self.counts,
        }
    }
}

/// Published CHSH estimate for one bin. `None` marks an unavailable value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    pub s_hat: Option<f64>,
    pub stderr: Option<f64>,
    pub correlators: [[Option<f64>; 2]; 2],
    pub counts: [[u64; 2]; 2],
}

/// CHSH counts binned by the state Bob disclosed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshTally {
    pub per_state: BTreeMap<BellStateId, ChshBin>,
}

impl ChshTally {
    pub fn add(&mut self, sample: &ChshSample) {
        self.per_state.entry(sample.state).or_default().add(sample);
    }

    pub fn merge(&mut self, other: &ChshTally) {
        for (state, bin) in &other.per_state {
            self.per_state.entry(*state).or_default().merge(bin);
        }
    }

    /// All bins summed, ignoring Bob's disclosed state.
    pub fn pooled(&self) -> ChshBin {
        self.per_state
            .values()
            .fold(ChshBin::default(), |mut acc, b| {
                acc.merge(b);
                acc
            })
    }

    pub fn estimate(&self) -> ChshEstimate {
        ChshEstimate {
            per_state: self
                .per_state
                .iter()
                .map(|(s, b)| (*s, b.estimate()))
                .collect(),
            pooled: self.pooled().estimate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub per_state: BTreeMap<BellStateId, BinEstimate>,
    pub pooled: BinEstimate,
}

fn angle_matches(recorded: f64, expected: PlanarObservable) -> bool {
    (PlanarObservable::new(recorded).angle() - expected.angle()).abs() <= INVARIANT_TOL
}

/// Bins every CHSH control round by Bob's disclosed state and setting pair.
pub fn estimate_chsh<R: RoundSummary>(
    records: &[R],
    settings: &ChshSettings,
) -> Result<ChshEstimate, AnalysisError> {
    let mut tally = ChshTally::default();
    for sample in records.iter().filter_map(RoundSummary::chsh_sample) {
        if !angle_matches(sample.alice_angle, settings.alice(sample.alice_slot))
            || !angle_matches(sample.bob_angle, settings.bob(sample.bob_slot))
        {
            return Err(AnalysisError::SettingsMismatch {
                pair_index: sample.pair_index,
            });
        }
        tally.add(&sample);
    }
    Ok(tally.estimate())
}

/// Error-check counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub checks: u64,
    pub errors: u64,
}

impl DetectionStats {
    /// Observed error rate; `None` with no checks.
    pub fn d_hat(&self) -> Option<f64> {
        (self.checks > 0).then(|| self.errors as f64 / self.checks as f64)
    }

    pub fn merge(&mut self, other: &DetectionStats) {
        self.checks += other.checks;
        self.errors += other.errors;
    }
}

pub fn estimate_qber<R: RoundSummary>(records: &[R]) -> DetectionStats {
    records.iter().filter_map(RoundSummary::check_error).fold(
        DetectionStats::default(),
        |mut acc, e| {
            acc.checks += 1;
            acc.errors += e as u64;
            acc
        },
    )
}

/// Probability that an adversary disturbing each checked round with probability
/// `d` gets through `n` message rounds unseen, when each round is a check with
/// probability `c`: `(1−c)^n / (1 − c(1−d))^n`.
pub fn evasion_probability(c: f64, d: f64, n: u32) -> Result<f64, AnalysisError> {
    if !(0.0..1.0).contains(&c) {
        return Err(AnalysisError::OutOfRange(format!(
            "control probability {c}"
        )));
    }
    if !(0.0..=1.0).contains(&d) {
        return Err(AnalysisError::OutOfRange(format!(
            "detection probability {d}"
        )));
    }
    let n = i32::try_from(n).map_err(|_| AnalysisError::OutOfRange(format!("n = {n}")))?;
    Ok((1.0 - c).powi(n) / (1.0 - c * (1.0 - d)).powi(n))
}

/// Secret bits, transmitted qubits and classical bits for one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EfficiencyQuery {
    pub secret_bits: u64,
    pub qubits: u64,
    pub classical_bits: u64,
}

/// An exact efficiency ratio. Serialized as `"num/den"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Efficiency(pub Ratio<u64>);

impl Efficiency {
    pub fn ratio(self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Arithmetic mean of several efficiencies.
    pub fn mean(values: &[Efficiency]) -> Efficiency {
        let sum = values
            .iter()
            .fold(Ratio::from_integer(0), |acc, e| acc + e.0);
        Efficiency(sum / values.len() as u64)
    }
}

impl fmt::Display for Efficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Efficiency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s
            .split_once('/')
            .ok_or_else(|| format!("expected num/den, got {s:?}"))?;
        let n: u64 = n.trim().parse().map_err(|e| format!("{e}"))?;
        let d: u64 = d.trim().parse().map_err(|e| format!("{e}"))?;
        if d == 0 {
            return Err("zero denominator".into());
        }
        Ok(Efficiency(Ratio::new(n, d)))
    }
}

impl Serialize for Efficiency {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Efficiency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Secret bits per transmitted qubit-or-bit: `b_s / (q_t + b_t)`.
pub fn cabello_efficiency(q: EfficiencyQuery) -> Result<Efficiency, AnalysisError> {
    let denom = q.qubits + q.classical_bits;
    if denom == 0 {
        return Err(AnalysisError::ZeroDenominator);
    }
    Ok(Efficiency(Ratio::new(q.secret_bits, denom)))
}

/// Efficiency of the two-state protocol with both parties encoding on each pair.
pub fn base_efficiency() -> Efficiency {
    // 2 key bits over 2 qubits, the control-status bit and the correlation bit
    cabello_efficiency(EfficiencyQuery {
        secret_bits: 2,
        qubits: 2,
        classical_bits: 2,
    })
    .expect("nonzero denominator")
}

/// Average efficiency when Alice and Bob encode in separate runs.
pub fn base_average_efficiency() -> Efficiency {
    let run = |classical_bits| {
        cabello_efficiency(EfficiencyQuery {
            secret_bits: 1,
            qubits: 2,
            classical_bits,
        })
        .expect("nonzero denominator")
    };
    Efficiency::mean(&[run(1), run(2)])
}
