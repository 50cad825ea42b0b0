use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use aht_core::cspace::{minimal_composite_cspace, CSpaceOptions, FrameAction};
use aht_core::model::{ControlSegment, ControlSequence, EnsembleSpec, NetworkSpec, Topology};
use aht_core::par::Execution;
use aht_core::pauli::Pauli;
use aht_core::search;
use aht_core::simlab::{self, Campaign};

const W: f64 = 2.0 * PI * 0.25;

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn cycle() -> ControlSequence {
    // WAHUHA-like X / -X pulse pair padded with idles.
    let pulse = |phi: f64| ControlSegment { duration: 2.0, omega1: W / 2.0, phi, delta_omega: 0.0 };
    let segs = vec![ControlSegment::idle(2.0), pulse(0.0), ControlSegment::idle(4.0), pulse(PI), ControlSegment::idle(2.0)];
    ControlSequence::new(segs, 2.0, W, false)
}

fn autocorrelation(c: &mut Criterion) {
    let seq = cycle();
    let mut group = c.benchmark_group("autocorrelation");
    group.sample_size(10);
    for n in [3, 5] {
        let campaign = Campaign {
            net: NetworkSpec::new(n, &Topology::AllToAll),
            ensemble: EnsembleSpec { sigma_dip: 0.03, sigma_z: 0.015, sigma_eps: 0.02, rho_corr: 0.0, seed: 1 },
            realizations: 64,
            cycles: 200,
            observable: Pauli::X,
        };
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, n), &campaign, |b, campaign| {
                b.iter(|| black_box(simlab::autocorrelation(&seq, campaign, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn span_probe(c: &mut Criterion) {
    let net = NetworkSpec::new(3, &Topology::AllToAll);
    let basis = minimal_composite_cspace(&net, &CSpaceOptions::default()).unwrap();
    let frame = FrameAction::new(&net, &basis).unwrap();
    let mut group = c.benchmark_group("span_probe_r2");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| black_box(search::span_probe(&frame, 2, 64, 16, 2.0, W, 1.0, 3, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, autocorrelation, span_probe);
criterion_main!(benches);
