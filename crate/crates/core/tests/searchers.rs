use svmtune_core::search::gridlike::{grid_points, normrand_raw, rand_points, run_flat, run_hier, Generator};
use svmtune_core::search::{annealing, cma, pso, run_on_surface, tpe, Algorithm, Family, OptimizerConfig};
use svmtune_core::surface::{ConcaveSurrogate, FnSurface, HyperPoint, SearchBox, SurfaceEvaluator};

fn surface_algorithms() -> Vec<Algorithm> {
    Algorithm::registry().into_iter().filter(|a| !a.needs_data()).collect()
}

/// Terraced surface with many exact ties.
fn terraces(p: HyperPoint<f64>) -> f64 {
    let v = ConcaveSurrogate::default().value(p);
    (v * 4.0).floor() / 4.0
}

fn rand_best(n: usize, seed: u64) -> f64 {
    let s = ConcaveSurrogate::default();
    let mut ev = SurfaceEvaluator::<f64>::new(&s, n);
    run_flat(&mut ev, &rand_points(n, seed)).unwrap();
    ev.best_value().unwrap()
}

#[test]
fn every_searcher_honours_the_contract() {
    let s = FnSurface(terraces);
    let bx = SearchBox::<f64>::standard();
    for alg in surface_algorithms().into_iter().filter(|a| a.budget() <= 100) {
        let a = run_on_surface(alg, &s, 17).unwrap();
        let b = run_on_surface(alg, &s, 17).unwrap();
        assert_eq!(a.eval_log, b.eval_log, "{alg} not deterministic");
        assert!(a.evaluations <= alg.budget(), "{alg} overspent");
        if alg.is_grid_like() {
            assert_eq!(a.evaluations, alg.budget(), "{alg}");
        }
        assert!(a.eval_log.iter().all(|e| bx.contains(&e.point)), "{alg} left the box");
        let max = a.eval_log.iter().map(|e| e.accuracy).fold(f64::MIN, f64::max);
        assert_eq!(a.best_value, max, "{alg}");
        let argmax: Vec<_> = a.eval_log.iter().filter(|e| e.accuracy == max).map(|e| e.point.key()).collect();
        assert!(a.tie_set.points().iter().all(|p| argmax.contains(&p.key())), "{alg}");
        // hierarchical searches drop level-1 ties other than the refined winner
        let hier = matches!(alg.family(), Family::GridHier | Family::UdHier);
        if !hier {
            assert!(argmax.iter().all(|k| a.tie_set.points().iter().any(|p| p.key() == *k)), "{alg}");
        }
    }
}

#[test]
fn annealing_beats_small_random_plans_on_average() {
    let s = ConcaveSurrogate::default();
    let (mut sa, mut base) = (0.0, 0.0);
    for seed in 0..20 {
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 400);
        annealing::simulated_annealing(&mut ev, &OptimizerConfig { budget: 400, seed }).unwrap();
        sa += ev.best_value().unwrap();
        base += rand_best(25, seed);
    }
    assert!(sa >= base, "sa {sa} rand25 {base}");
}

#[test]
fn swarm_lands_near_the_peak() {
    let s = ConcaveSurrogate::default();
    let mut total = 0.0;
    for seed in 0..20 {
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        let ties = pso::particle_swarm(&mut ev, &OptimizerConfig { budget: 100, seed }).unwrap();
        assert_eq!(ev.used(), 100);
        total += ties.points()[0].distance(&ConcaveSurrogate::optimum());
    }
    assert!(total / 20.0 <= 1.0, "mean distance {}", total / 20.0);
}

#[test]
fn cma_mean_best_near_peak() {
    let s = ConcaveSurrogate::default();
    let mut total = 0.0;
    for seed in 0..20 {
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 400);
        let ties = cma::cma_es(&mut ev, &OptimizerConfig { budget: 400, seed }).unwrap();
        assert_eq!(ev.used(), 396);
        total += ties.points()[0].distance(&ConcaveSurrogate::optimum());
    }
    assert!(total / 20.0 <= 0.5);
}

#[test]
fn tpe_beats_equal_budget_random_search() {
    let s = ConcaveSurrogate::default();
    let (mut t, mut r) = (0.0, 0.0);
    for seed in 0..20 {
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        tpe::tpe(&mut ev, &OptimizerConfig { budget: 100, seed }).unwrap();
        t += ev.best_value().unwrap();
        r += rand_best(100, seed);
    }
    assert!(t >= r, "tpe {t} rand100 {r}");
}

#[test]
fn hierarchical_refinement_never_loses_ground() {
    let s = ConcaveSurrogate::default();
    for generator in [Generator::Grid, Generator::Ud] {
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 50);
        let ties = run_hier(&mut ev, generator, 25).unwrap();
        let level1_best = ev.eval_log()[..25].iter().map(|e| e.accuracy).fold(f64::MIN, f64::max);
        assert!(s.value(ties.points()[0]) >= level1_best);
        assert_eq!(ev.used(), 50);
    }
}

#[test]
fn random_plans_are_centred() {
    let n = 10_000;
    let plan = rand_points::<f64>(n, 42);
    let mc = plan.points.iter().map(|p| p.log2_c).sum::<f64>() / n as f64;
    let mg = plan.points.iter().map(|p| p.log2_gamma).sum::<f64>() / n as f64;
    // standard error of a uniform mean: width / sqrt(12 n)
    assert!((mc - 5.0).abs() < 3.0 * 20.0 / (12.0 * n as f64).sqrt());
    assert!((mg + 6.0).abs() < 3.0 * 18.0 / (12.0 * n as f64).sqrt());

    let raw = normrand_raw(n, 42);
    let rc = raw.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let rg = raw.iter().map(|p| p.1).sum::<f64>() / n as f64;
    assert!((rc - 5.0).abs() < 3.0 * 5.0 / (n as f64).sqrt());
    assert!((rg + 5.0).abs() < 3.0 * 5.0 / (n as f64).sqrt());
}

#[test]
fn grid_of_four_is_the_corners() {
    let plan = grid_points::<f64>(4).unwrap();
    let pts: Vec<(f64, f64)> = plan.points.iter().map(|p| (p.log2_c, p.log2_gamma)).collect();
    assert_eq!(pts, vec![(-5.0, -15.0), (-5.0, 3.0), (15.0, -15.0), (15.0, 3.0)]);
}

#[test]
fn optimizers_with_400_evaluations_beat_25_random_probes() {
    let s = ConcaveSurrogate::default();
    let optimizers = ["nelder400", "bobyqa400", "sa400", "pso400", "cma400", "bogp400", "tpe400"];
    for id in optimizers {
        let alg: Algorithm = id.parse().unwrap();
        let (mut wins, mut near) = (0, 0);
        let t = std::time::Instant::now();
        for seed in 0..20 {
            let run = run_on_surface::<f64>(alg, &s, seed).unwrap();
            if run.best_value >= rand_best(25, seed) {
                wins += 1;
            }
            if run.tie_set.points()[0].distance(&ConcaveSurrogate::optimum()) <= 0.5 {
                near += 1;
            }
        }
        eprintln!("{id}: beats rand25 {wins}/20, within 0.5 {near}/20, {:?}", t.elapsed());
        assert!(wins >= 18, "{id}: {wins}/20");
    }
}
