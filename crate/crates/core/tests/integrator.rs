use kinetic_em::brownian::{coarsen, covariance_estimate, integrate_path, sample_path, GridSpec};
use kinetic_em::drift::{mollify, DriftSpec};
use kinetic_em::integrator::{exact_linear_solve, integrate, InitialCondition, SchemeConfig};
use kinetic_em::state::PhaseState;

fn point(cfg: &mut SchemeConfig, x: f64, v: f64) {
    cfg.initial = InitialCondition::Point(PhaseState::scalar(x, v));
}

#[test]
fn doubling_quadrature_order_barely_moves_trajectories() {
    let drifts = [
        DriftSpec::SignVelocity,
        DriftSpec::LinearFriction { gamma: 1.0 },
        DriftSpec::OscillatorySingular { kappa: 3.0, beta: 0.2 },
        DriftSpec::Constant(vec![0.7]),
    ];
    for n in [16u64, 64] {
        let grid = GridSpec::unit(n, 1).unwrap();
        for drift in &drifts {
            let md = mollify(drift, n, 0.5).unwrap();
            for stream in 0..4 {
                let path = sample_path(grid, 21, stream).unwrap();
                let mut lo = SchemeConfig::new(grid, 0.5);
                point(&mut lo, 0.2, -0.3);
                let mut hi = lo.clone();
                hi.quad_order = 2 * lo.quad_order;
                let a = integrate(&lo, &md, &path).unwrap();
                let b = integrate(&hi, &md, &path).unwrap();
                let gap = a.sup_distance(&b).unwrap();
                assert!(gap < 1e-9, "{} n={n} stream {stream}: {gap:e}", drift.id());
            }
        }
    }
}

#[test]
fn constant_drift_on_a_longer_horizon() {
    let c = [0.8, -1.5];
    let grid = GridSpec::new(40, 2.5, 2).unwrap();
    let path = sample_path(grid, 5, 0).unwrap();
    let md = mollify(&DriftSpec::Constant(c.to_vec()), 40, 0.5).unwrap();
    let z0 = PhaseState::new(vec![1.0, 0.0], vec![-0.5, 0.25]).unwrap();
    let mut cfg = SchemeConfig::new(grid, 0.5);
    cfg.initial = InitialCondition::Point(z0.clone());
    let traj = integrate(&cfg, &md, &path).unwrap();
    let ip = integrate_path(&path);
    for k in [0, 1, 17, 40] {
        let t = grid.time(k);
        for j in 0..2 {
            let x = z0.x[j] + t * z0.v[j] + 0.5 * c[j] * t * t + ip.i_at(k)[j];
            let v = z0.v[j] + c[j] * t + ip.w_at(k)[j];
            assert!((traj.x_at(k)[j] - x).abs() < 1e-12, "k={k} j={j}");
            assert!((traj.v_at(k)[j] - v).abs() < 1e-12, "k={k} j={j}");
        }
    }
}

#[test]
fn zero_drift_levels_agree_on_the_coarse_grid() {
    let fine = GridSpec::unit(64, 1).unwrap();
    let coarse = GridSpec::unit(16, 1).unwrap();
    for stream in 0..5 {
        let path = sample_path(fine, 8, stream).unwrap();
        let cpath = coarsen(&path, 4).unwrap();
        let mut cf = SchemeConfig::new(fine, 0.5);
        point(&mut cf, -0.4, 1.1);
        let mut cc = SchemeConfig::new(coarse, 0.5);
        point(&mut cc, -0.4, 1.1);
        let a = integrate(&cf, &mollify(&DriftSpec::Zero, 64, 0.5).unwrap(), &path).unwrap();
        let b = integrate(&cc, &mollify(&DriftSpec::Zero, 16, 0.5).unwrap(), &cpath).unwrap();
        for k in 0..=16 {
            assert!((a.x_at(4 * k)[0] - b.x_at(k)[0]).abs() < 1e-12);
            assert!((a.v_at(4 * k)[0] - b.v_at(k)[0]).abs() < 1e-12);
        }
    }
}

#[test]
fn scheme_approaches_exact_friction_solution() {
    let gamma = 1.5;
    let drift = DriftSpec::LinearFriction { gamma };
    let fine = GridSpec::unit(1024, 1).unwrap();
    let z0 = PhaseState::scalar(0.3, 0.8);
    let levels = [8u64, 32, 128];
    let mut mean_err = [0.0; 3];
    let samples = 60;
    for stream in 0..samples {
        let path = sample_path(fine, 33, stream).unwrap();
        let exact = exact_linear_solve(gamma, &z0, &path).unwrap();
        for (e, &n) in mean_err.iter_mut().zip(&levels) {
            let grid = GridSpec::unit(n, 1).unwrap();
            let mut cfg = SchemeConfig::new(grid, 0.5);
            cfg.initial = InitialCondition::Point(z0.clone());
            let traj = integrate(&cfg, &mollify(&drift, n, 0.5).unwrap(), &coarsen(&path, (1024 / n) as usize).unwrap()).unwrap();
            let r = 1024 / n as usize;
            let worst = (0..=n as usize)
                .map(|k| traj.state(k).euclidean_distance(&exact.state(k * r)))
                .fold(0.0, f64::max);
            *e += worst / samples as f64;
        }
    }
    assert!(mean_err[0] > mean_err[1] && mean_err[1] > mean_err[2], "{mean_err:?}");
    // first order in h for smooth drift: quartering h should cut the error by well over 2
    assert!(mean_err[0] / mean_err[2] > 8.0, "{mean_err:?}");
}

#[test]
fn exact_friction_solution_has_ou_marginals() {
    let gamma = 0.7;
    let grid = GridSpec::unit(8, 1).unwrap();
    let z0 = PhaseState::scalar(0.0, 0.0);
    let m = 20_000;
    let mut vs = Vec::with_capacity(m);
    let mut xs = Vec::with_capacity(m);
    for stream in 0..m as u64 {
        let traj = exact_linear_solve(gamma, &z0, &sample_path(grid, 44, stream).unwrap()).unwrap();
        vs.push(traj.v_at(8)[0]);
        xs.push(traj.x_at(8)[0]);
    }
    // Var V_1 = (1 - e^{-2g}) / 2g ; Var X_1 = int_0^1 ((1 - e^{-g s}) / g)^2 ds
    let var_v = (1.0 - (-2.0 * gamma).exp()) / (2.0 * gamma);
    let g = gamma;
    let var_x = (1.0 - 2.0 * (1.0 - (-g).exp()) / g + (1.0 - (-2.0 * g).exp()) / (2.0 * g)) / (g * g);
    let cov_xv = ((1.0 - (-g).exp()) / g - (1.0 - (-2.0 * g).exp()) / (2.0 * g)) / g;
    assert!(covariance_estimate(&vs, &vs).z_score(var_v).abs() < 4.0);
    assert!(covariance_estimate(&xs, &xs).z_score(var_x).abs() < 4.0);
    assert!(covariance_estimate(&xs, &vs).z_score(cov_xv).abs() < 4.0);
}

#[test]
fn drift_displacement_is_tamed() {
    let md = mollify(&DriftSpec::SignVelocity, 64, 0.5).unwrap();
    let h = 1.0 / 64.0;
    for k in 0..200 {
        let v = -5.0 + 0.05 * k as f64;
        let s = kinetic_em::integrator::substep_integrals(&md, &PhaseState::scalar(0.1, v), h, 8).unwrap();
        assert!(s.b[0].abs() <= h * (1.0 + 1e-12));
        assert!(s.a[0].abs() <= 0.5 * h * h * (1.0 + 1e-12));
    }
}

#[test]
fn friction_error_is_monotone_up_to_noise() {
    use kinetic_em::lab::{strong_error, ReferenceKind, StrongErrorConfig};
    let levels: Vec<u64> = (4..=10).map(|k| 1u64 << k).collect();
    let mut cfg = StrongErrorConfig::new(DriftSpec::LinearFriction { gamma: 1.0 }, levels, 200, 17);
    cfg.n_ref = 1 << 10;
    cfg.reference = ReferenceKind::ExactLinear;
    let r = strong_error(&cfg).unwrap();
    for w in r.errors.windows(2) {
        assert!(w[1].value <= w[0].value + w[1].std_error.max(w[0].std_error), "{:?}", r.errors);
    }
}
