use ammq_bench::*;
use ammq_core::quoting::QuotePolicy;
use ammq_core::riccati::solve_heston_bates_ab;
use ammq_core::simulator::{run_episodes, simulate_episode, RngSpec, SimSetup};
use ammq_core::*;
use criterion::{criterion_group, criterion_main, Criterion};

fn setup() -> SimSetup {
    SimSetup {
        price: PriceModel::HestonBates(heston_bates()),
        liquidity: LiquidityModel::Constant,
        curve: desk_curve(),
        pool0: PoolState::balanced(100.0, 1.0),
        risk: risk(),
        dt: None,
        record_trades: false,
    }
}

fn episodes(c: &mut Criterion) {
    let curve = desk_curve();
    let surface = solve_heston_bates_ab(&heston_bates(), &risk(), &curve, None, &Default::default()).unwrap();
    let optimal = QuotePolicy::from_surface(surface, curve.clone());
    let myopic = QuotePolicy::myopic(curve, 1.0);
    let s = setup();
    let mut g = c.benchmark_group("simulator");
    g.bench_function("episode/myopic", |b| {
        let mut path = 0;
        b.iter(|| {
            path += 1;
            simulate_episode(&myopic, &s, RngSpec { seed: 1, path }).unwrap()
        })
    });
    g.bench_function("episode/surface", |b| {
        let mut path = 0;
        b.iter(|| {
            path += 1;
            simulate_episode(&optimal, &s, RngSpec { seed: 1, path }).unwrap()
        })
    });
    g.sample_size(10);
    g.bench_function("1000_paths/surface", |b| b.iter(|| run_episodes(&optimal, &s, 1000, 3).unwrap()));
    g.finish();
}

criterion_group!(benches, episodes);
criterion_main!(benches);
