use serde::{Deserialize, Serialize};

use super::{
    base_average_efficiency, base_efficiency, ChshEstimate, ChshTally, DetectionStats, Efficiency,
    RoundSummary,
};
use crate::modified::modified_efficiency;
use crate::protocol::SimulationConfig;

/// Successes out of attempts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub hits: u64,
    pub total: u64,
}

impl Accuracy {
    pub fn add(&mut self, hit: bool) {
        self.total += 1;
        self.hits += hit as u64;
    }

    pub fn merge(&mut self, other: &Accuracy) {
        self.hits += other.hits;
        self.total += other.total;
    }

    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// Integer counters accumulated over a set of rounds. Merging is plain addition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pairs: u64,
    pub control_rounds: u64,
    pub alice_decode: Accuracy,
    pub bob_decode: Accuracy,
    pub eve_guess: Accuracy,
    pub detection: DetectionStats,
    pub chsh: ChshTally,
}

impl Tally {
    pub fn add<R: RoundSummary>(&mut self, record: &R) {
        self.pairs += 1;
        self.control_rounds += record.is_control() as u64;
        if let Some(ok) = record.alice_decode_ok() {
            self.alice_decode.add(ok);
        }
        if let Some(ok) = record.bob_decode_ok() {
            self.bob_decode.add(ok);
        }
        for ok in record.eve_guesses() {
            self.eve_guess.add(ok);
        }
        if let Some(err) = record.check_error() {
            self.detection.checks += 1;
            self.detection.errors += err as u64;
        }
        if let Some(sample) = record.chsh_sample() {
            self.chsh.add(&sample);
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.pairs += other.pairs;
        self.control_rounds += other.control_rounds;
        self.alice_decode.merge(&other.alice_decode);
        self.bob_decode.merge(&other.bob_decode);
        self.eve_guess.merge(&other.eve_guess);
        self.detection.merge(&other.detection);
        self.chsh.merge(&other.chsh);
    }
}

/// Closed-form efficiencies, independent of any simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub base: Efficiency,
    pub base_avg: Efficiency,
    pub modified: Efficiency,
    pub modified_avg: Efficiency,
}

impl EfficiencyTable {
    pub fn closed_form() -> Self {
        let modified = modified_efficiency();
        EfficiencyTable {
            base: base_efficiency(),
            base_avg: base_average_efficiency(),
            modified: modified.per_run,
            modified_avg: modified.average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub tally: Tally,
}

pub fn build_report<R: RoundSummary>(records: &[R], config: &SimulationConfig) -> SimulationReport {
    let mut tally = Tally::default();
    for record in records {
        tally.add(record);
    }
    SimulationReport {
        config: config.clone(),
        tally,
    }
}

impl SimulationReport {
    /// Adds the counters of `other`; the configuration of `self` is kept.
    pub fn merge(&mut self, other: &SimulationReport) {
        self.tally.merge(&other.tally);
    }

    pub fn document(&self) -> ReportDocument {
        let t = &self.tally;
        ReportDocument {
            config_echo: self.config.clone(),
            pairs: t.pairs,
            control_fraction: (t.pairs > 0).then(|| t.control_rounds as f64 / t.pairs as f64),
            decode_accuracy_alice: t.alice_decode.value(),
            decode_accuracy_bob: t.bob_decode.value(),
            eve_guess_accuracy: t.eve_guess.value(),
            d_hat: t.detection.d_hat(),
            detection: t.detection,
            chsh: t.chsh.estimate(),
            efficiency: EfficiencyTable::closed_form(),
            seed: self.config.seed,
        }
    }
}

/// The serialized report. `null` marks a value with no supporting samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config_echo: SimulationConfig,
    pub pairs: u64,
    pub control_fraction: Option<f64>,
    pub decode_accuracy_alice: Option<f64>,
    pub decode_accuracy_bob: Option<f64>,
    pub eve_guess_accuracy: Option<f64>,
    pub d_hat: Option<f64>,
    pub detection: DetectionStats,
    pub chsh: ChshEstimate,
    pub efficiency: EfficiencyTable,
    pub seed: u64,
}
