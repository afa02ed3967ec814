use criterion::{criterion_group, criterion_main, Criterion};

use dse_core::filters::{run_kalman, KalmanKind};
use dse_core::observers::{run_observer, synthesize};
use dse_core::scenario::{default_paper_scenario, simulate};
use dse_core::EstimatorKind;

// Gains are synthesized once; only the estimation pass is timed.
fn estimators(c: &mut Criterion) {
    let s = default_paper_scenario();
    let sim = simulate(&s).expect("reference scenario simulates");
    let mut g = c.benchmark_group("full_trace");
    for kind in EstimatorKind::ALL {
        match KalmanKind::try_from(kind) {
            Ok(k) => g.bench_function(kind.name(), |b| b.iter(|| run_kalman(k, &s, &sim))),
            Err(_) => {
                let gains = synthesize(kind, &s).expect("reference gains");
                g.bench_function(kind.name(), |b| b.iter(|| run_observer(&s, &sim, &gains)))
            }
        };
    }
    g.finish();
}

criterion_group!(benches, estimators);
criterion_main!(benches);
