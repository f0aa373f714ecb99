use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mrfmotion::learning::{run_learning, LearningMode};
use mrfmotion::mcmc::gibbs_sweep_full;
use mrfmotion::meanfield::{self, MeanFieldState};
use mrfmotion::FieldState;
use mrfmotion_bench::{fixed_schedule, observation, one_step, params, SIDES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("zhang_50_sweeps");
    group.sample_size(10);
    for side in SIDES {
        let obs = observation(side);
        let (p, schedule) = (params(), fixed_schedule());
        group.bench_with_input(BenchmarkId::from_parameter(side * side), &obs, |b, obs| {
            b.iter(|| meanfield::solve(obs, &p, &schedule, MeanFieldState::max_entropy(obs.lattice())).unwrap())
        });
    }
    group.finish();
}

fn gibbs(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_sweep");
    for side in SIDES {
        let obs = observation(side);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut f = FieldState::zeros(obs.lattice());
        group.bench_function(BenchmarkId::from_parameter(side * side), |b| {
            b.iter(|| gibbs_sweep_full(&obs, &p, p.beta, &mut f, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn learning(c: &mut Criterion) {
    for (name, mode) in [("hybrid_step", LearningMode::Hybrid), ("simple_mcmc_step", LearningMode::SimpleMcmc)] {
        let mut group = c.benchmark_group(name);
        group.sample_size(10);
        for side in SIDES {
            let obs = observation(side);
            let cfg = one_step(mode);
            group.bench_function(BenchmarkId::from_parameter(side * side), |b| {
                b.iter(|| run_learning(&obs, &cfg, None, &mut |_| {}).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, mean_field, gibbs, learning);
criterion_main!(benches);
