//! Randomized invariants of the potentials, grid operators and scheme.

use std::f64::consts::PI;

use proptest::prelude::*;

use chisel::diagnostics;
use chisel::grid::{BulkField, GridSpec, StripGrid};
use chisel::potential::{MonotoneGraph, PotentialPair, PotentialPreset};
use chisel::solver::{FieldPreset, PotentialSpec, RunConfig, Simulation};

fn graphs() -> impl Strategy<Value = MonotoneGraph> {
    prop_oneof![
        Just(MonotoneGraph::cubic()),
        Just(MonotoneGraph::Polynomial {
            coefficients: vec![0.5, 2.0, 1.0]
        }),
        Just(MonotoneGraph::Logarithmic),
        Just(MonotoneGraph::obstacle(-1.0, 1.0)),
        Just(MonotoneGraph::obstacle(-0.5, 2.0)),
    ]
}

fn presets() -> impl Strategy<Value = PotentialPreset> {
    prop_oneof![
        Just(PotentialPreset::Regular),
        Just(PotentialPreset::Logarithmic),
        Just(PotentialPreset::DoubleObstacle),
        Just(PotentialPreset::ObstacleLog),
    ]
}

fn field(grid: &StripGrid, values: &[f64]) -> BulkField {
    BulkField(values.iter().copied().cycle().take(grid.node_count()).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn yosida_is_monotone_and_lipschitz(g in graphs(), eps in 0.01f64..0.5, r1 in -3.0f64..3.0, r2 in -3.0f64..3.0) {
        let (b1, b2) = (g.yosida(eps, r1), g.yosida(eps, r2));
        prop_assert!((b1 - b2) * (r1 - r2) >= -1e-12);
        prop_assert!((b1 - b2).abs() <= (r1 - r2).abs() / eps * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn resolvent_is_nonexpansive_and_in_domain(g in graphs(), eps in 0.01f64..0.5, r1 in -3.0f64..3.0, r2 in -3.0f64..3.0) {
        let (j1, j2) = (g.resolvent(eps, r1), g.resolvent(eps, r2));
        prop_assert!((j1 - j2).abs() <= (r1 - r2).abs() + 1e-12);
        prop_assert!(g.domain().closure_contains(j1));
    }

    #[test]
    fn yosida_slope_matches_difference_quotient(g in graphs(), eps in 0.02f64..0.5, r in -2.5f64..2.5) {
        let h = 1e-6;
        // the indicator kind has kinks at its endpoints
        if let MonotoneGraph::Indicator { lower, upper } = g {
            prop_assume!((r - lower).abs() > 1e-3 && (r - upper).abs() > 1e-3);
        }
        let fd = (g.yosida(eps, r + h) - g.yosida(eps, r - h)) / (2.0 * h);
        let (_, slope) = g.yosida_with_slope(eps, r);
        prop_assert!((fd - slope).abs() <= 1e-5 * slope.abs().max(1.0), "fd {} slope {}", fd, slope);
    }

    #[test]
    fn bulk_and_boundary_yosida_share_sign(p in presets(), eps in 0.01f64..0.5, r in -3.0f64..3.0) {
        let pair = PotentialPair::preset(p, 1.0);
        prop_assert!(pair.bulk_yosida(eps, r) * pair.boundary_yosida(eps, r) >= 0.0);
    }

    #[test]
    fn moreau_envelope_is_nondecreasing_as_eps_decreases(g in graphs(), r in -2.0f64..2.0) {
        let mut prev = f64::NEG_INFINITY;
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let e = g.yosida_primitive(eps, r);
            prop_assert!(e >= prev - 1e-12 * e.abs().max(1.0));
            prev = e;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn summation_by_parts(f in prop::collection::vec(-1.0f64..1.0, 1..64), g in prop::collection::vec(-1.0f64..1.0, 1..64)) {
        let grid = StripGrid::new(12, 7, 1.0, 0.5).unwrap();
        let (f, g) = (field(&grid, &f), field(&grid, &g));
        let lhs = grid.inner(&grid.bulk_laplacian(&f), &g);
        let rhs = -grid.grad_inner(&f, &g);
        // size of the summed terms; gradients alone vanish for near-constant fields
        let scale: f64 = grid.stiffness_apply(&f.0).iter().zip(&g.0).map(|(a, b)| (a * b).abs()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale.max(1e-300), "{} vs {} (scale {})", lhs, rhs, scale);
    }

    #[test]
    fn operators_are_linear(f in prop::collection::vec(-1.0f64..1.0, 1..64), g in prop::collection::vec(-1.0f64..1.0, 1..64), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = StripGrid::new(12, 7, 1.0, 0.5).unwrap();
        let (f, g) = (field(&grid, &f), field(&grid, &g));
        let comb = f.lincomb(a, &g, b);
        let lap = grid.bulk_laplacian(&comb);
        let lap_lin = grid.bulk_laplacian(&f).lincomb(a, &grid.bulk_laplacian(&g), b);
        prop_assert!(lap.sub(&lap_lin).max_abs() <= 1e-12 * lap_lin.max_abs().max(1.0) * 1e3);
        let tr = grid.trace(&comb);
        let tr_lin = grid.trace(&f).lincomb(a, &grid.trace(&g), b);
        prop_assert!(tr.sub(&tr_lin).max_abs() <= 1e-12 * tr_lin.max_abs().max(1.0));
        let lb = grid.laplace_beltrami(&tr);
        let lb_lin = grid.laplace_beltrami(&grid.trace(&f)).lincomb(a, &grid.laplace_beltrami(&grid.trace(&g)), b);
        prop_assert!(lb.sub(&lb_lin).max_abs() <= 1e-12 * lb_lin.max_abs().max(1.0) * 1e3);
    }

    #[test]
    fn neumann_solve_is_a_two_sided_inverse(u in prop::collection::vec(-1.0f64..1.0, 1..64)) {
        let grid = StripGrid::new(16, 9, 1.0, 0.5).unwrap();
        let u = field(&grid, &u);
        let m = grid.mean_value(&u);
        let v = u.map(|x| x - m);
        // relative to the input: v is pure roundoff for constant u
        let scale = u.max_abs().max(1e-300);
        // −Δ_h(𝒩v) = v
        let nv = grid.neumann_solve(&v).unwrap();
        let back = grid.bulk_laplacian(&nv).scale(-1.0);
        prop_assert!(back.sub(&v).max_abs() <= 1e-9 * scale);
        // 𝒩(−Δ_h u) = u − mean(u)
        let again = grid.neumann_solve(&grid.bulk_laplacian(&u).scale(-1.0)).unwrap();
        prop_assert!(again.sub(&v).max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn norm_chain_holds(u in prop::collection::vec(-1.0f64..1.0, 1..64)) {
        let grid = StripGrid::new(16, 9, 1.0, 0.5).unwrap();
        let v = field(&grid, &u);
        // smallest nonzero eigenvalue of the lumped operator: first x-mode
        let hx = grid.hx();
        let lam1 = (2.0 / hx * (PI * hx / grid.lx()).sin()).powi(2)
            .min((2.0 / grid.hy() * (PI * grid.hy() / (2.0 * grid.ly())).sin()).powi(2));
        let c = (1.0 / lam1).max(1.0 / grid.area()).sqrt();
        let (d, h, w) = (grid.dual_norm(&v).unwrap(), grid.l2_norm(&v), grid.v_norm(&v));
        prop_assert!(d <= c * h * (1.0 + 1e-10));
        prop_assert!(h <= w * (1.0 + 1e-12));
    }

    #[test]
    fn mass_is_conserved_for_random_data(p in presets(), amp in 0.05f64..0.6, seed in 0u64..1000, tau in prop_oneof![Just(0.0), Just(1.0)]) {
        let cfg = RunConfig {
            grid: GridSpec { nx: 12, ny: 7, lx: 1.0, ly: 0.5 },
            potential: PotentialSpec::preset(p),
            y0: FieldPreset::Random { amplitude: amp, mean: 0.1, seed },
            tau,
            t_final: 0.01,
            ..RunConfig::default()
        };
        let sim = Simulation::new(&cfg).unwrap();
        let run = sim.run(1).unwrap();
        for r in &run.diagnostics {
            prop_assert!((r.mass - sim.m0()).abs() <= 1e-10);
        }
    }
}

fn small(preset: PotentialPreset) -> RunConfig {
    RunConfig {
        grid: GridSpec {
            nx: 32,
            ny: 17,
            lx: 1.0,
            ly: 0.5,
        },
        potential: PotentialSpec::preset(preset),
        t_final: 0.05,
        ..RunConfig::default()
    }
}

#[test]
fn identical_configs_give_bitwise_identical_diagnostics() {
    for preset in [PotentialPreset::Logarithmic, PotentialPreset::DoubleObstacle] {
        let cfg = small(preset);
        let a = Simulation::new(&cfg).unwrap().run(1).unwrap();
        let b = Simulation::new(&cfg).unwrap().run(1).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        diagnostics::write_csv(&mut ca, &a.diagnostics).unwrap();
        diagnostics::write_csv(&mut cb, &b.diagnostics).unwrap();
        assert_eq!(ca, cb);
    }
}

#[test]
fn newton_converges_quadratically_near_the_end() {
    for preset in [
        PotentialPreset::Regular,
        PotentialPreset::Logarithmic,
        PotentialPreset::DoubleObstacle,
    ] {
        let sim = Simulation::new(&small(preset)).unwrap();
        let mut state = sim.initial_state();
        for _ in 0..10 {
            let (next, stats) = sim.step(&state).unwrap();
            if let Some(ratio) = stats.last_ratio {
                assert!(ratio <= 0.5, "{preset:?}: last residual ratio {ratio}");
            }
            state = next;
        }
    }
}

/// Energy recomputed node by node from the definition, without the grid's
/// quadrature helpers.
fn slow_energy(sim: &Simulation, y: &BulkField) -> f64 {
    let grid = sim.grid();
    let pair = sim.pair();
    let eps = sim.eps();
    let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
    let at = |i: usize, j: usize| y.0[j * nx + i];
    let mut e = 0.0;
    for j in 0..ny {
        let wy = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
        for i in 0..nx {
            let v = at(i, j);
            e += hx * wy * (pair.bulk.graph.yosida_primitive(eps, v) + pair.bulk.perturbation.primitive(v));
            // x-difference on the cell row, weighted like the measure
            let dx = (at((i + 1) % nx, j) - v) / hx;
            e += 0.5 * dx * dx * hx * wy;
            if j + 1 < ny {
                let dy = (at(i, j + 1) - v) / hy;
                e += 0.5 * dy * dy * hx * hy;
            }
        }
    }
    for j in [0, ny - 1] {
        for i in 0..nx {
            let v = at(i, j);
            let dx = (at((i + 1) % nx, j) - v) / hx;
            e +=
                hx * (0.5 * dx * dx + pair.boundary_yosida_primitive(eps, v) + pair.boundary.perturbation.primitive(v));
        }
    }
    e
}

#[test]
fn energy_matches_independent_assembly() {
    for preset in [
        PotentialPreset::Regular,
        PotentialPreset::Logarithmic,
        PotentialPreset::DoubleObstacle,
    ] {
        let cfg = RunConfig {
            y0: FieldPreset::Random {
                amplitude: 0.5,
                mean: 0.0,
                seed: 3,
            },
            ..small(preset)
        };
        let sim = Simulation::new(&cfg).unwrap();
        let run = sim.run(5).unwrap();
        for (_, s) in &run.snapshots {
            let e = diagnostics::energy(&sim, &s.y, &sim.data_at(s.time));
            let slow = slow_energy(&sim, &s.y);
            assert!(rel(e, slow) <= 1e-10, "{preset:?}: {e} vs {slow}");
        }
    }
}

type Monitor = fn(&diagnostics::DiagnosticsRecord) -> f64;

#[test]
fn monitors_are_bounded_uniformly_in_eps() {
    let cfg = small(PotentialPreset::DoubleObstacle);
    let study = chisel::solver::eps_continuation(&cfg, &[0.2, 0.1, 0.05], 3).unwrap();
    let sup = |run: &chisel::solver::RunOutput, f: Monitor| run.diagnostics.iter().map(f).fold(0.0, f64::max);
    let monitors: [(&str, Monitor); 3] = [
        ("dy_dual", |r| r.dy_dual),
        ("y_grad", |r| r.y_grad),
        ("yosida_energy", |r| r.yosida_energy),
    ];
    for (name, f) in monitors {
        let values: Vec<f64> = study.runs.iter().map(|r| sup(r, f)).collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        // all-zero monitors are trivially bounded
        assert!(max == 0.0 || max / min <= 10.0, "{name}: {values:?}");
    }
}
