//! End-to-end checks of the alternating-optimization schemes.

use mawpmec::ao::{solve_exhaustive_small, upa_layout, validate_solution, DiscreteGrid, Positioning, SchemeConfig};
use mawpmec::channel::channel_response;
use mawpmec::harness::battery::time_energy_grid_oracle;
use mawpmec::harness::seeds::solver_rng;
use mawpmec::harness::{build_scenario, run_scheme, Scenario};
use mawpmec::harvest::harvested_power;
use mawpmec::pso::PsoConfig;
use mawpmec::rates::SystemParams;
use mawpmec::subsolvers::{mrc_gain, OffloadMode};

fn small(m: usize, k: usize, seed: u64) -> Scenario {
    let mut p = SystemParams::default().with_k(k);
    p.m_antennas = m;
    build_scenario(&p, seed).unwrap()
}

fn quick(pos: Positioning, lambda: f64) -> SchemeConfig {
    let mut pso = PsoConfig::reference(lambda);
    pso.n_particles = 12;
    pso.max_iters = 20;
    SchemeConfig::new(pos).with_pso(pso)
}

const ALL: [Positioning; 4] = [
    Positioning::Dynamic,
    Positioning::SemiDynamic,
    Positioning::Static,
    Positioning::Fpa,
];

#[test]
fn every_scheme_is_valid_and_monotone() {
    let sc = small(4, 3, 11);
    for pos in ALL {
        for mode in [OffloadMode::Partial, OffloadMode::OffloadingOnly] {
            let cfg = quick(pos, sc.params.lambda).with_offload_mode(mode);
            let sol = run_scheme(&sc, &cfg, &mut solver_rng(11, 0)).unwrap();
            let rep = validate_solution(&sc, &sol).unwrap();
            assert!(rep.all_ok(), "{}: {:?}", cfg.label(), rep.failures());
            assert!(
                sol.convergence_trace.windows(2).all(|w| w[1] >= w[0]),
                "{}",
                cfg.label()
            );
            assert_eq!(sol.scr, *sol.convergence_trace.last().unwrap());
            let expected_apvs = match pos {
                Positioning::Dynamic => 4,
                Positioning::SemiDynamic => 2,
                _ => 1,
            };
            assert_eq!(sol.apvs.len(), expected_apvs);
        }
    }
}

#[test]
fn same_seed_same_solution() {
    let sc = small(4, 2, 5);
    for pos in [Positioning::Dynamic, Positioning::Static] {
        let cfg = quick(pos, sc.params.lambda);
        let a = run_scheme(&sc, &cfg, &mut solver_rng(5, 0)).unwrap();
        let b = run_scheme(&sc, &cfg, &mut solver_rng(5, 0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn single_wd_fixed_array_matches_composed_oracle() {
    // With one WD the best energy beam is full power along its channel, so the
    // optimum is the time/energy grid optimum at that harvested power.
    for seed in 0..3 {
        let sc = small(4, 1, seed);
        let p = &sc.params;
        let apv = upa_layout(p.m_antennas, p.min_dist, p.region_a).unwrap();
        let h = channel_response(&apv, &sc.wd_channels[0], p.lambda);
        let xi = harvested_power(p.p_max * h.norm_sqr(), &p.eh[0]);
        let oracle = time_energy_grid_oracle(p, &[xi], &[mrc_gain(&h, p.noise)], OffloadMode::Partial);
        let sol = run_scheme(&sc, &SchemeConfig::new(Positioning::Fpa), &mut solver_rng(seed, 0)).unwrap();
        assert!(
            (sol.scr - oracle).abs() <= 0.02 * oracle,
            "seed {seed}: {} vs {oracle}",
            sol.scr
        );
        assert!(sol.scr <= oracle * (1.0 + 1e-3));
    }
}

#[test]
fn partial_offloading_is_at_least_offloading_only_for_fixed_arrays() {
    for seed in 0..4 {
        let sc = small(4, 3, seed);
        let fpa = SchemeConfig::new(Positioning::Fpa);
        let part = run_scheme(&sc, &fpa, &mut solver_rng(seed, 0)).unwrap();
        let only = SchemeConfig::new(Positioning::Fpa).with_offload_mode(OffloadMode::OffloadingOnly);
        let only = run_scheme(&sc, &only, &mut solver_rng(seed, 0)).unwrap();
        assert!(
            part.scr >= only.scr * (1.0 - 1e-6),
            "seed {seed}: {} < {}",
            part.scr,
            only.scr
        );
    }
}

#[test]
fn single_wd_semi_dynamic_tracks_dynamic() {
    for seed in 0..3 {
        let sc = small(4, 1, seed);
        let dynamic = run_scheme(
            &sc,
            &quick(Positioning::Dynamic, sc.params.lambda),
            &mut solver_rng(seed, 0),
        );
        let semi = run_scheme(
            &sc,
            &quick(Positioning::SemiDynamic, sc.params.lambda),
            &mut solver_rng(seed, 0),
        );
        let (d, s) = (dynamic.unwrap().scr, semi.unwrap().scr);
        assert!((d - s).abs() <= 0.02 * d, "seed {seed}: dynamic {d} semi {s}");
    }
}

#[test]
fn exhaustive_bounds_the_grid_schemes() {
    let sc = small(2, 2, 3);
    for pos in [Positioning::Dynamic, Positioning::SemiDynamic, Positioning::Static] {
        let mut cfg = SchemeConfig::new(pos);
        cfg.grid = Some(DiscreteGrid::default());
        let ex = solve_exhaustive_small(&sc, &cfg).unwrap();
        let ao = run_scheme(&sc, &cfg, &mut solver_rng(3, 0)).unwrap();
        assert!(validate_solution(&sc, &ex).unwrap().all_ok());
        assert!(
            ao.scr <= ex.scr * (1.0 + 1e-3),
            "{}: AO {} exhaustive {}",
            pos.name(),
            ao.scr,
            ex.scr
        );
        let levels = ex.allocation.tau0 * 100.0;
        assert!((levels - levels.round()).abs() < 1e-9);
    }
}

#[test]
fn exhaustive_rejects_unsupported_setups() {
    let sc = small(4, 2, 0);
    assert!(solve_exhaustive_small(&sc, &SchemeConfig::new(Positioning::Static)).is_err());
    let sc = small(2, 2, 0);
    assert!(solve_exhaustive_small(&sc, &SchemeConfig::new(Positioning::Fpa)).is_err());
}

#[test]
fn bad_scheme_configs_are_rejected() {
    let sc = small(4, 2, 0);
    let mut cfg = SchemeConfig::new(Positioning::Static);
    cfg.max_outer_iters = 0;
    assert!(run_scheme(&sc, &cfg, &mut solver_rng(0, 0)).is_err());
    let mut cfg = SchemeConfig::new(Positioning::Static);
    cfg.grid = Some(DiscreteGrid {
        cells_per_side: 0,
        tau0_levels: 100,
    });
    assert!(run_scheme(&sc, &cfg, &mut solver_rng(0, 0)).is_err());
    // 11 antennas only form a 1 x 11 row, which is wider than the region.
    let sc = small(11, 2, 0);
    assert!(run_scheme(&sc, &SchemeConfig::new(Positioning::Fpa), &mut solver_rng(0, 0)).is_err());
}
