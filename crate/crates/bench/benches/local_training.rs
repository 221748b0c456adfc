use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fedgps_bench::desk_fixture;
use fedgps_core::algorithms::{fedavg_local_train, fedgps_local_train, FedGpsHyper, FedGpsInputs};
use fedgps_core::data::dirichlet_partition;
use fedgps_core::eval::w1_empirical_1d;
use fedgps_core::LocalHyper;
use rand::{Rng, SeedableRng};

fn local_rounds(c: &mut Criterion) {
    let f = desk_fixture();
    let local = LocalHyper::default();
    let hyper = FedGpsHyper::default();
    let nsg = f.direction();
    let mut g = c.benchmark_group("local_round");
    g.bench_function("fedavg", |b| {
        b.iter_batched(
            || f.busiest_client(),
            |mut client| fedavg_local_train(&f.arch, &f.theta0, &f.train, &mut client, &local, 1).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("fedgps", |b| {
        b.iter_batched(
            || f.busiest_client(),
            |mut client| {
                let inputs = FedGpsInputs {
                    surrogate: Some(&f.surrogate),
                    global_prototypes: None,
                    nsg: Some(&nsg),
                    hyper: &hyper,
                };
                fedgps_local_train(&f.arch, &f.theta0, &f.train, &mut client, &local, inputs, 1).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn utilities(c: &mut Criterion) {
    let f = desk_fixture();
    c.bench_function("dirichlet_partition_4000x10", |b| {
        b.iter(|| dirichlet_partition(&f.train.labels, 10, 0.1, 3).unwrap())
    });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let a: Vec<f64> = (0..4096).map(|_| rng.random()).collect();
    let z: Vec<f64> = (0..4096).map(|_| rng.random::<f64>() + 0.1).collect();
    c.bench_function("w1_1d_4096", |b| b.iter(|| w1_empirical_1d(&a, &z).unwrap()));
}

criterion_group!(benches, local_rounds, utilities);
criterion_main!(benches);
