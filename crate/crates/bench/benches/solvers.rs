use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use grating_core::mesh::{build_cell_mesh, build_supercell_mesh};
use grating_core::modes::smallest_singular;
use grating_core::perturbed::{solve_perturbed, Incident};
use grating_core::profile::{LocalPerturbation, PeriodicProfile};
use grating_core::qpsolver::{default_order, solve_plane_wave, CellOperators};
use grating_core::wave::WaveParams;

fn cell_solve(c: &mut Criterion) {
    let p = PeriodicProfile::sine(0.3).unwrap();
    let mesh = build_cell_mesh(&p, p.default_height(), 0.1).unwrap();
    let ops = CellOperators::new(&mesh);
    let w = WaveParams::new(1.3, 0.2).unwrap();
    c.bench_function("cell solve sine(0.3) target 0.1", |b| {
        b.iter(|| solve_plane_wave(&ops, &w, None).unwrap())
    });
}

fn sigma_min(c: &mut Criterion) {
    let p = PeriodicProfile::default_resonator().unwrap();
    let mesh = build_cell_mesh(&p, p.default_height(), 0.2).unwrap();
    let ops = CellOperators::new(&mesh);
    let n = default_order(1.3, 0.5);
    c.bench_function("sigma_min resonator target 0.2", |b| {
        b.iter(|| smallest_singular(0.2, 1.3, &ops, n).unwrap())
    });
}

fn supercell_solve(c: &mut Criterion) {
    let p = PeriodicProfile::flat();
    let pert = LocalPerturbation::bump(&p, 1.0, 0.4).unwrap();
    let sc = Arc::new(
        build_supercell_mesh(&p, Some(&pert), 1.5, 7, 2.0 * std::f64::consts::PI, 0.2).unwrap(),
    );
    let inc = Incident::PlaneWave { k: 1.5, theta: 0.3 };
    let mut g = c.benchmark_group("supercell");
    g.sample_size(10);
    g.bench_function("perturbed solve flat + bump, 7 periods", |b| {
        b.iter(|| solve_perturbed(&sc, inc, None).unwrap())
    });
    g.finish();
}

criterion_group!(benches, cell_solve, sigma_min, supercell_solve);
criterion_main!(benches);
