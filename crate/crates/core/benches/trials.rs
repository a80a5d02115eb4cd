use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hashprobe::{run_point, Execution, Scheme, TableConfig};

fn sequential_vs_parallel(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_point");
    group.sample_size(10);
    for scheme in Scheme::ALL {
        let cfg = TableConfig::new(scheme, 1 << 14, 4);
        for (label, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(label, scheme), &cfg, |b, cfg| {
                b.iter(|| run_point(cfg, 1, 16, exec).expect("valid config"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sequential_vs_parallel);
criterion_main!(benches);
