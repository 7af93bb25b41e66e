use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ldi_control::controller::{certify_decrease, ControllerSettings, ControllerState, Mode};
use ldi_control::dataset::consistency_gram;
use ldi_control::experiments::{generate_offline, run_closed_loop, ExperimentConfig, Law};
use ldi_control::linalg::{Mat, Vector};
use ldi_control::lmi::{adaptive_problem, robust_problem, solve, Margins, SolverSettings};
use ldi_control::plant::{generate_offline_data, BenchmarkPlant, DeltaSchedule};

fn benchmark_state(cfg: &ExperimentConfig) -> ControllerState {
    let offline = generate_offline(cfg).unwrap();
    ControllerState::new(&offline.datasets, cfg.cost_weights().unwrap(), cfg.polytope().unwrap(), cfg.controller_settings())
        .unwrap()
}

#[test]
fn forced_gain_reuse_still_converges() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.horizon = 150;
    let mut state = benchmark_state(&cfg);
    let mut settings = *state.settings();
    settings.force_reuse_from = Some(6);
    let offline = generate_offline(&cfg).unwrap();
    state = ControllerState::new(&offline.datasets, cfg.cost_weights().unwrap(), cfg.polytope().unwrap(), settings)
        .unwrap();
    let l = run_closed_loop(&cfg, state, &cfg.schedule().unwrap(), &cfg.run_x0(), Law::Adaptive).unwrap();
    assert!(l.decisions[6..].iter().all(|d| d.mode == Mode::ReusedGain));
    assert!(l.terminal_state().norm() < 1e-4, "{}", l.terminal_state().norm());
}

#[test]
fn mode_trace_tracks_steps_and_solution_persists() {
    let cfg = ExperimentConfig::default();
    let mut state = benchmark_state(&cfg);
    let bp = cfg.benchmark();
    let mut x = cfg.run_x0();
    for k in 0..8 {
        let (d, next) = state.adaptive_step(&x).unwrap();
        assert_eq!(next.modes().len(), k + 1);
        assert!(next.last_solution().is_some());
        assert_eq!(d.u, &d.k * &x);
        if d.mode == Mode::SolvedFresh {
            assert!(d.lyapunov <= d.gamma * (1.0 + 1e-9));
        }
        x = bp.system(0.15).step(&x, &d.u);
        state = next;
    }
}

#[test]
fn steps_are_pure_functions_of_the_state() {
    let cfg = ExperimentConfig::default();
    let state = benchmark_state(&cfg);
    let x = cfg.run_x0();
    let (a, _) = state.robust_step(&x).unwrap();
    let (b, _) = state.robust_step(&x).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.gamma, b.gamma);
    assert!(state.modes().is_empty());
}

#[test]
fn cost_bound_scales_with_the_square_of_the_state() {
    let cfg = ExperimentConfig::default();
    let state = benchmark_state(&cfg);
    let x = Vector::from_vec(vec![0.05, -0.02]);
    let (a, _) = state.robust_step(&x).unwrap();
    let (b, _) = state.robust_step(&(&x * 10.0)).unwrap();
    assert!((b.gamma / a.gamma - 100.0).abs() < 1e-4, "{} {}", a.gamma, b.gamma);
    assert!((&a.k - &b.k).norm() < 1e-9);
}

#[test]
fn synthesized_gain_decreases_on_vertices_and_mixtures() {
    let cfg = ExperimentConfig::default();
    let state = benchmark_state(&cfg);
    let (_, next) = state.robust_step(&cfg.run_x0()).unwrap();
    let sol = next.last_solution().unwrap();
    let bp = BenchmarkPlant::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let report = certify_decrease(sol, &bp.vertices(), 200, &mut rng);
    assert_eq!(report.per_system.len(), 2);
    assert_eq!(report.combinations.len(), 200);
    assert!(report.all_positive(), "{report:?}");
}

#[test]
fn single_vertex_robust_matches_adaptive_on_the_same_data() {
    let bp = BenchmarkPlant::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ds = generate_offline_data(&bp.system(0.5), 4, &Vector::from_vec(vec![0.95, 0.0]), -1.0, 1.0, &mut rng).unwrap();
    let g = consistency_gram(&ds);
    let cfg = ExperimentConfig::default();
    let w = cfg.cost_weights().unwrap();
    let poly = cfg.polytope().unwrap();
    let x = Vector::from_vec(vec![0.5, -0.3]);
    let m = Margins::default();
    let s = SolverSettings::default();
    let r = solve(&robust_problem(std::slice::from_ref(&g), &w, &x, &poly, &m).unwrap(), &s).unwrap();
    let a = solve(&adaptive_problem(std::slice::from_ref(&g), &g, &w, &x, &poly, &m).unwrap(), &s).unwrap();
    let (gr, ga) = (r.gamma.unwrap(), a.gamma.unwrap());
    assert!((gr - ga).abs() <= 1e-6 * gr, "{gr} {ga}");
    assert!((&r.k - &a.k).norm() <= 1e-4);
}

#[test]
fn inconsistent_window_falls_back() {
    let mut cfg = ExperimentConfig::default();
    cfg.plant.schedule = vec![(0, 0.15), (12, 6.0)];
    cfg.run.horizon = 25;
    let state = benchmark_state(&cfg);
    let l = run_closed_loop(&cfg, state, &cfg.schedule().unwrap(), &cfg.run_x0(), Law::Adaptive).unwrap();
    let fallback: Vec<usize> = l
        .decisions
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d.mode, Mode::ResolvedPreviousWindow | Mode::ReusedGain))
        .map(|(k, _)| k)
        .collect();
    // windows ending at steps 13..=16 mix both parameter values; later fallbacks
    // come from the states lining up and the window losing excitation
    assert!((13..=16).all(|k| fallback.contains(&k)), "{fallback:?}");
    assert!(fallback.iter().all(|&k| k >= 13), "{fallback:?}");
    assert!(l.decisions[..13].iter().all(|d| d.mode != Mode::ResolvedPreviousWindow));
}

#[test]
fn state_dimension_is_checked() {
    let cfg = ExperimentConfig::default();
    let state = benchmark_state(&cfg);
    assert!(state.adaptive_step(&Vector::zeros(3)).is_err());
    assert!(state.robust_step(&Vector::from_vec(vec![f64::NAN, 0.0])).is_err());
}

#[test]
fn mismatched_weights_rejected() {
    let cfg = ExperimentConfig::default();
    let offline = generate_offline(&cfg).unwrap();
    let w = ldi_control::lmi::CostWeights::new(Mat::identity(3, 3), Mat::identity(1, 1)).unwrap();
    let r = ControllerState::new(&offline.datasets, w, cfg.polytope().unwrap(), ControllerSettings::default());
    assert!(r.is_err());
}

#[test]
fn constant_schedule_plant_matches_direct_model() {
    let bp = BenchmarkPlant::default();
    let mut plant = bp.plant(&DeltaSchedule::constant(0.3), Vector::from_vec(vec![1.0, 0.5])).unwrap();
    let u = Vector::from_vec(vec![0.2]);
    let want = bp.system(0.3).step(&Vector::from_vec(vec![1.0, 0.5]), &u);
    assert!((plant.step_plant(&u).unwrap() - want).norm() < 1e-14);
}
