use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qtel_core::analysis::{build_report, estimate_chsh};
use qtel_core::attacks::{AdversaryModel, AttackKind};
use qtel_core::modified::run_modified_pair;
use qtel_core::protocol::{run_pair, PairRecord, ProtocolKind, SimulationConfig};
use qtel_core::qcore::{
    bell_measure, bell_state, chsh_value, tensor, BellStateId, ChshSettings, TwoQubitDensity,
};

fn pairs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_pair");
    for kind in [
        AttackKind::None,
        AttackKind::InterceptResend,
        AttackKind::QmmSwap,
    ] {
        let config = SimulationConfig {
            control_probability: 0.5,
            attack: AdversaryModel::new(kind),
            ..SimulationConfig::default()
        };
        let mut adversary = config.attack.build(ProtocolKind::Base);
        let mut index = 0u64;
        group.bench_function(format!("{kind:?}"), |b| {
            b.iter(|| {
                index += 1;
                run_pair(&config, adversary.as_mut(), black_box(index)).unwrap()
            })
        });
    }
    let config = SimulationConfig {
        protocol: ProtocolKind::Modified,
        ..SimulationConfig::default()
    };
    let mut adversary = config.attack.build(ProtocolKind::Modified);
    let mut index = 0u64;
    group.bench_function("modified", |b| {
        b.iter(|| {
            index += 1;
            run_modified_pair(&config, adversary.as_mut(), black_box(index)).unwrap()
        })
    });
    group.finish();
}

fn state_ops(c: &mut Criterion) {
    let four = tensor(
        &bell_state(BellStateId::PsiPlus),
        &bell_state(BellStateId::PhiMinus),
    )
    .unwrap();
    c.bench_function("bell_measure/4 qubits", |b| {
        b.iter(|| bell_measure(black_box(&four), 0, 3, black_box(0.37)).unwrap())
    });
    let rho = TwoQubitDensity::from_pure(&bell_state(BellStateId::PsiPlus)).unwrap();
    let settings = ChshSettings::default();
    c.bench_function("chsh_value", |b| {
        b.iter(|| chsh_value(black_box(&rho), &settings))
    });
}

fn estimators(c: &mut Criterion) {
    let config = SimulationConfig {
        control_probability: 0.5,
        ..SimulationConfig::default()
    };
    let mut adversary = config.attack.build(ProtocolKind::Base);
    let records: Vec<PairRecord> = (0..10_000)
        .map(|i| run_pair(&config, adversary.as_mut(), i).unwrap())
        .collect();
    c.bench_function("estimate_chsh/10k", |b| {
        b.iter(|| estimate_chsh(black_box(&records), &config.settings).unwrap())
    });
    c.bench_function("build_report/10k", |b| {
        b.iter(|| build_report(black_box(&records), &config))
    });
}

criterion_group!(benches, pairs, state_ops, estimators);
criterion_main!(benches);
