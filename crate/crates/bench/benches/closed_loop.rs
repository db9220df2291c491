use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;
use sleigh_bench::{reference_start, short_horizon};
use sleigh_core::analysis;
use sleigh_core::controller;
use sleigh_core::model;
use sleigh_core::transforms::{self, ZState};
use sleigh_core::{simulate, ControllerParams, ModelParams};

fn bench_transforms(c: &mut Criterion) {
    let q = Vector3::new(-3.0, -2.0, 0.4);
    c.bench_function("q_to_w_round_trip", |b| {
        b.iter(|| {
            let z = transforms::q_to_z(black_box(&q));
            let w = transforms::z_to_w(&z).unwrap();
            transforms::z_to_q(&transforms::w_to_z(&w))
        })
    });
    let z = ZState::new(0.4, -3.5, 0.7);
    c.bench_function("input_matrix_w", |b| {
        b.iter(|| transforms::input_matrix_w(&transforms::z_to_w(black_box(&z)).unwrap()))
    });
}

fn bench_control(c: &mut Criterion) {
    let model = ModelParams::reference();
    let ctrl = ControllerParams::reference();
    let mut state = reference_start();
    state.p = nalgebra::Vector2::new(1.0, -0.5);
    let q_dot = model::configuration_rate(&state, &model);
    c.bench_function("control_from_q", |b| {
        b.iter(|| controller::control_from_q(black_box(&state), black_box(&q_dot), &ctrl, &model))
    });
}

fn bench_simulate(c: &mut Criterion) {
    let model = ModelParams::reference();
    let ctrl = ControllerParams::reference();
    let start = reference_start();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("10s", |b| b.iter(|| simulate(black_box(&start), &model, &ctrl, &short_horizon(10.0))));
    group.bench_function("100s", |b| b.iter(|| simulate(black_box(&start), &model, &ctrl, &short_horizon(100.0))));
    group.finish();
}

fn bench_sweeps(c: &mut Criterion) {
    let model = ModelParams::reference();
    let ctrl = ControllerParams::reference();
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    group.bench_function("matching_1000", |b| b.iter(|| analysis::check_matching(&model, &ctrl, 1000, 0)));
    group.bench_function("schwarz_1000", |b| b.iter(|| analysis::schwarz_sweep(1000, 0)));
    group.finish();
}

criterion_group!(benches, bench_transforms, bench_control, bench_simulate, bench_sweeps);
criterion_main!(benches);
