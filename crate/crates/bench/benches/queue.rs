use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spreadsim::{FlatSchedule, IndexedQueue, Schedule};

/// Pop the minimum and reschedule it plus a few random entries, the access
/// pattern of one simulation event.
fn churn<Q: Schedule>(q: &mut Q, rng: &mut StdRng, n: usize, events: usize) {
    for _ in 0..events {
        let (node, t) = q.pop_min().unwrap();
        q.push(node, t + rng.random::<f64>()).unwrap();
        for _ in 0..8 {
            let j = rng.random_range(0..n);
            q.schedule(j, t + rng.random::<f64>()).unwrap();
        }
    }
}

fn filled<Q: Schedule>(n: usize, rng: &mut StdRng) -> Q {
    let mut q = Q::with_capacity(n);
    for i in 0..n {
        q.push(i, rng.random::<f64>()).unwrap();
    }
    q
}

fn bench_queues(c: &mut Criterion) {
    let mut group = c.benchmark_group("schedule_churn");
    let events = 1000;
    group.throughput(Throughput::Elements(events as u64));
    for n in [1_000usize, 100_000, 1_000_000] {
        group.bench_with_input(BenchmarkId::new("indexed", n), &n, |b, &n| {
            let mut rng = StdRng::seed_from_u64(1);
            let mut q: IndexedQueue = filled(n, &mut rng);
            b.iter(|| churn(black_box(&mut q), &mut rng, n, events));
        });
        if n <= 100_000 {
            group.bench_with_input(BenchmarkId::new("flat", n), &n, |b, &n| {
                let mut rng = StdRng::seed_from_u64(1);
                let mut q: FlatSchedule = filled(n, &mut rng);
                b.iter(|| churn(black_box(&mut q), &mut rng, n, events));
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_queues);
criterion_main!(benches);
