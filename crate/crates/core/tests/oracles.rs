use ctp_core::residuals::min_stationarity_at;
use ctp_core::{
    augmented_lagrangian, build, g_minus, kkt_residual, lagrangian_gradient, make_uniform_grid, min_kkt_stationarity,
    BuiltinProblemId, CtpProblem, JacobianStack, MultiplierPath, Trajectory,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lagrangian_value(p: &CtpProblem, x: &[f64], u: &[f64], v: &[f64], t: f64) -> f64 {
    p.phi_at(x, t).unwrap() + dot(&p.h_at(x, t).unwrap(), u) + dot(&p.g_at(x, t).unwrap(), v)
}

fn al_value(p: &CtpProblem, x: &[f64], u: &[f64], v: &[f64], rho: f64, t: f64) -> f64 {
    let h = p.h_at(x, t).unwrap();
    let g = p.g_at(x, t).unwrap();
    let eq: f64 = h.iter().zip(u).map(|(h, u)| u * h + 0.5 * rho * h * h).sum();
    let ineq: f64 = g
        .iter()
        .zip(v)
        .map(|(g, v)| ((v + rho * g).max(0.0).powi(2) - v * v) / (2.0 * rho))
        .sum();
    p.phi_at(x, t).unwrap() + eq + ineq
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            (f(&xp) - f(&xm)) / (2.0 * FD_STEP)
        })
        .collect()
}

fn relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff = analytic.iter().zip(fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for id in BuiltinProblemId::ALL {
        let p = build(id);
        for _ in 0..100 {
            let t = rng.random_range(0.0..1.0);
            let x = random_vec(&mut rng, p.n(), -2.0, 2.0);
            let u = random_vec(&mut rng, p.p(), -5.0, 5.0);
            let v = random_vec(&mut rng, p.m(), 0.0, 5.0);
            let rho = rng.random_range(0.1..100.0);

            let grad = lagrangian_gradient(&p, &x, &u, &v, t).unwrap();
            let fd = central_difference(|y| lagrangian_value(&p, y, &u, &v, t), &x);
            assert!(relative_error(&grad, &fd) <= 1e-6, "{id} L at {x:?}");

            let (value, grad) = augmented_lagrangian(&p, &x, &u, &v, rho, t).unwrap();
            let direct = al_value(&p, &x, &u, &v, rho, t);
            assert!((value - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            let fd = central_difference(|y| al_value(&p, y, &u, &v, rho, t), &x);
            assert!(relative_error(&grad, &fd) <= 1e-6, "{id} AL at {x:?}");
        }
    }
}

/// Coarse grid followed by repeated zooming around the incumbent; the
/// residual is convex in the multipliers so this converges to the minimum.
fn brute_force_distance(p: &CtpProblem, x: &[f64], t: f64, comp_tol: f64) -> f64 {
    let gm = g_minus(p, x, t).unwrap();
    let slack: Vec<bool> = gm.iter().map(|&s| s > comp_tol).collect();
    let dims = p.p() + p.m();
    let eval = |w: &[f64]| -> f64 {
        let (u, v) = w.split_at(p.p());
        let grad = lagrangian_gradient(p, x, u, v, t).unwrap();
        grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    };
    let lower = |k: usize| if k < p.p() { -10.0 } else { 0.0 };
    let upper = |k: usize| if k >= p.p() && slack[k - p.p()] { 0.0 } else { 10.0 };

    let mut best = vec![0.0; dims];
    let mut best_val = eval(&best);
    let mut lo: Vec<f64> = (0..dims).map(lower).collect();
    let mut hi: Vec<f64> = (0..dims).map(upper).collect();
    let per_axis = 41usize;
    for _ in 0..40 {
        let steps: Vec<f64> = (0..dims).map(|k| (hi[k] - lo[k]) / (per_axis - 1) as f64).collect();
        let total = per_axis.pow(dims as u32);
        for idx in 0..total {
            let mut r = idx;
            let w: Vec<f64> = (0..dims)
                .map(|k| {
                    let j = r % per_axis;
                    r /= per_axis;
                    lo[k] + j as f64 * steps[k]
                })
                .collect();
            let val = eval(&w);
            if val < best_val {
                best_val = val;
                best = w;
            }
        }
        for k in 0..dims {
            lo[k] = (best[k] - 2.0 * steps[k]).max(lower(k));
            hi[k] = (best[k] + 2.0 * steps[k]).min(upper(k));
        }
    }
    best_val
}

#[test]
fn distance_to_cone_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = make_uniform_grid(1.0, 200).unwrap();
    for id in BuiltinProblemId::ALL {
        let p = build(id);
        let xbar = p.reference_trajectory(&grid).unwrap().unwrap();
        for _ in 0..5 {
            let i = rng.random_range(0..grid.n_nodes());
            let t = grid.nodes()[i];
            let (value, _, _) = min_stationarity_at(&p, xbar.at(i), t, 1e-8).unwrap();
            let brute = brute_force_distance(&p, xbar.at(i), t, 1e-8);
            assert!((value - brute).abs() <= 1e-6, "{id} node {i}: {value} vs {brute}");
        }
        // perturbed points where the minimizing multipliers stay inside the search box
        let mut checked = 0;
        while checked < 5 {
            let i = rng.random_range(0..grid.n_nodes());
            let t = grid.nodes()[i];
            let x: Vec<f64> = xbar.at(i).iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
            let (value, u, v) = min_stationarity_at(&p, &x, t, 1e-8).unwrap();
            if u.iter().chain(&v).any(|w| w.abs() > 9.0) {
                continue;
            }
            let brute = brute_force_distance(&p, &x, t, 1e-8);
            assert!((value - brute).abs() <= 1e-6, "{id} at {x:?}: {value} vs {brute}");
            checked += 1;
        }
    }
}

#[test]
fn singular_value_inequality_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for id in BuiltinProblemId::ALL {
        let p = build(id);
        for _ in 0..1000 {
            let t = rng.random_range(0.0..1.0);
            let x = random_vec(&mut rng, p.n(), -2.0, 2.0);
            let u = random_vec(&mut rng, p.p(), -10.0, 10.0);
            let v = random_vec(&mut rng, p.m(), 0.0, 10.0);
            let stack = JacobianStack::at(&p, &x, t).unwrap();
            let sigma = stack.sigma_min().unwrap();
            let eig = stack.gram().symmetric_eigen().eigenvalues.min().max(0.0);
            assert!((sigma * sigma - eig).abs() <= 1e-10 * eig.max(1.0));
            let w = u.iter().chain(&v).map(|a| a * a).sum::<f64>().sqrt();
            assert!(stack.psi(&u, &v).norm() >= sigma * w - 1e-10, "{id}");
        }
    }
}

fn problem_and_point() -> impl Strategy<Value = (BuiltinProblemId, Vec<f64>, f64)> {
    (
        prop::sample::select(BuiltinProblemId::ALL.to_vec()),
        prop::collection::vec(-3.0f64..3.0, 2),
        0.0f64..1.0,
    )
}

proptest! {
    #[test]
    fn g_minus_is_nonnegative_and_vanishes_on_violation((id, x, t) in problem_and_point()) {
        let p = build(id);
        let x = &x[..p.n()];
        let g = p.g_at(x, t).unwrap();
        for (gm, g) in g_minus(&p, x, t).unwrap().iter().zip(&g) {
            prop_assert!(*gm >= 0.0);
            if *g >= 0.0 {
                prop_assert_eq!(*gm, 0.0);
            } else {
                prop_assert_eq!(*gm, -g);
            }
        }
    }

    #[test]
    fn cone_distance_never_exceeds_any_admissible_choice(
        id in prop::sample::select(BuiltinProblemId::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let p = build(id);
        let grid = make_uniform_grid(1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..grid.n_nodes()).map(|_| random_vec(&mut rng, p.n(), -1.0, 1.0)).collect();
        let x = Trajectory::from_rows(&grid, p.n(), &rows).unwrap();
        // multipliers that vanish on slack constraints, so complementarity holds exactly
        let mut u_rows = Vec::new();
        let mut v_rows = Vec::new();
        for (i, &t) in grid.nodes().iter().enumerate() {
            let gm = g_minus(&p, x.at(i), t).unwrap();
            u_rows.push(random_vec(&mut rng, p.p(), -3.0, 3.0));
            v_rows.push(gm.iter().map(|&s| if s > 1e-8 { 0.0 } else { rng.random_range(0.0..3.0) }).collect::<Vec<_>>());
        }
        let mult = MultiplierPath::from_rows(&grid, p.p(), p.m(), &u_rows, &v_rows).unwrap();
        let report = kkt_residual(&p, &x, &mult).unwrap();
        let min = min_kkt_stationarity(&p, &x, 1e-8).unwrap();
        prop_assert!(min.value <= report.stationarity_l1 + 1e-12);
    }

    #[test]
    fn complementarity_vanishes_iff_multipliers_vanish_on_slack(
        id in prop::sample::select(BuiltinProblemId::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let p = build(id);
        let grid = make_uniform_grid(1.0, 8).unwrap();
        let xbar = p.reference_trajectory(&grid).unwrap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u_rows: Vec<Vec<f64>> = (0..8).map(|_| random_vec(&mut rng, p.p(), -1.0, 1.0)).collect();
        let v_rows: Vec<Vec<f64>> = (0..8).map(|_| random_vec(&mut rng, p.m(), 0.0, 1.0)).collect();
        let mult = MultiplierPath::from_rows(&grid, p.p(), p.m(), &u_rows, &v_rows).unwrap();
        let report = kkt_residual(&p, &xbar, &mult).unwrap();
        let vanishes_on_slack = (0..grid.n_nodes()).all(|i| {
            let gm = g_minus(&p, xbar.at(i), grid.nodes()[i]).unwrap();
            gm.iter().zip(mult.v_at(i)).all(|(s, v)| *s == 0.0 || *v == 0.0)
        });
        prop_assert_eq!(report.comp_sup == 0.0, vanishes_on_slack);
    }
}
