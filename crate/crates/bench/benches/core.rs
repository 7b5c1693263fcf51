use criterion::{black_box, criterion_group, criterion_main, Criterion};

use adasim::attack::{AttackSpec, AttackType, Strategy};
use adasim::can::{decode_frame, encode_command};
use adasim::config::SimConfig;
use adasim::control::ControlCommand;
use adasim::runner::{run_scenario, RunSpec};
use adasim::scenario::{Scenario, ScenarioId};
use adasim::sim::{step_vehicle, VehicleState};
use adasim::SignalLayout;

fn bench_step_vehicle(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let state = VehicleState::new(0.0, 0.4, 0.002, 26.8224);
    let cmd = ControlCommand { accel: 0.3, brake: 0.0, steer_delta: -0.05 };
    c.bench_function("step_vehicle", |b| {
        b.iter(|| {
            step_vehicle(
                black_box(&state),
                black_box(&cmd),
                cfg.dt,
                &cfg.lane,
                cfg.vehicle.wheelbase,
            )
            .unwrap()
        })
    });
}

fn bench_codec(c: &mut Criterion) {
    let layout = SignalLayout::standard();
    let cmd = ControlCommand { accel: 1.25, brake: 0.0, steer_delta: -0.43 };
    c.bench_function("encode_command", |b| {
        b.iter(|| encode_command(black_box(&cmd), &layout).unwrap())
    });
    let frames = encode_command(&cmd, &layout).unwrap();
    c.bench_function("decode_frames", |b| {
        b.iter(|| {
            for f in &frames {
                decode_frame(black_box(f), &layout).unwrap();
            }
        })
    });
}

fn bench_full_run(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let scenario = Scenario::new(ScenarioId::SlowLead, 70.0, &cfg);
    let attacked = RunSpec::attacked(
        scenario,
        AttackSpec::new(AttackType::Acceleration, Strategy::ContextAware),
        true,
        77,
    );
    let clean = RunSpec::attack_free(scenario, false, 77);
    let mut group = c.benchmark_group("run_scenario");
    group.sample_size(10);
    group.bench_function("attack_free", |b| b.iter(|| run_scenario(&cfg, &clean).unwrap()));
    group.bench_function("context_aware", |b| b.iter(|| run_scenario(&cfg, &attacked).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_step_vehicle, bench_codec, bench_full_run);
criterion_main!(benches);
