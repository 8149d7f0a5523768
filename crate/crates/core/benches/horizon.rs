use criterion::{criterion_group, criterion_main, Criterion};
use dnflex::builtin_test_feeder;
use dnflex::fas::FasConfig;
use dnflex::powerflow::{simulate_horizon, solve_power_flow};
use dnflex::rdopf::{dispatch_horizon, solve_soc_rdopf, Formulation, RdopfConfig, StepData};
use dnflex::scenario::Scenario;
use dnflex::sensitivity::{estimate_nvs, LogUniformSampler};

fn twin(c: &mut Criterion) {
    let (net, profiles) = builtin_test_feeder();
    let s_base = net.bases().s_base_kva;
    let mut g = c.benchmark_group("twin");
    g.bench_function("parallel", |b| {
        b.iter(|| simulate_horizon(&net, &profiles).unwrap())
    });
    g.bench_function("sequential", |b| {
        b.iter(|| {
            (0..profiles.horizon())
                .map(|t| solve_power_flow(&net, &profiles.injections_pu(t, s_base)).unwrap())
                .collect::<Vec<_>>()
        })
    });
    g.finish();
}

fn dispatch(c: &mut Criterion) {
    let (net, profiles) = builtin_test_feeder();
    let sampler = LogUniformSampler::new(&net, &profiles, 7);
    let nvs = estimate_nvs(&net, &sampler, 20).unwrap();
    let cfg = RdopfConfig {
        formulation: Formulation::Soc,
        ..RdopfConfig::default()
    };
    let sc =
        Scenario::with_sensitivity(net, profiles, FasConfig::default(), cfg.clone(), nvs).unwrap();
    let env = sc.envelope(25.0).unwrap();
    let mut g = c.benchmark_group("soc_dispatch");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| dispatch_horizon(&sc.network, &sc.profiles, &sc.fas, &env, &cfg).unwrap())
    });
    g.bench_function("sequential", |b| {
        b.iter(|| {
            (0..sc.horizon())
                .map(|t| {
                    let step = StepData::from_horizon(&sc.profiles, &sc.fas, &env, t);
                    solve_soc_rdopf(&sc.network, &step, &cfg).unwrap()
                })
                .collect::<Vec<_>>()
        })
    });
    g.finish();
}

criterion_group!(benches, twin, dispatch);
criterion_main!(benches);
