use kinetic_em::brownian::{coarsen, covariance_estimate, integrate_path, read_path, sample_path, write_path, Estimate, GridSpec};
use kinetic_em::kernel::KernelCovariance;
use kinetic_em::rng::CounterRng;
use proptest::prelude::*;

fn two_sample_z(a: Estimate, b: Estimate) -> f64 {
    (a.value - b.value).abs() / a.std_error.hypot(b.std_error)
}

#[test]
fn sampler_matches_fine_riemann_simulation() {
    let h = 1.0 / 64.0;
    let sub = 1usize << 14;
    let delta = h / sub as f64;
    let m = 10_000;
    let mut rng = CounterRng::new(123, 9);
    let (mut rw, mut ri) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for _ in 0..m {
        let (mut w, mut i) = (0.0f64, 0.0f64);
        for _ in 0..sub / 2 {
            let (a, b) = rng.normal_pair();
            for xi in [a, b] {
                let next = w + delta.sqrt() * xi;
                i += 0.5 * (w + next) * delta;
                w = next;
            }
        }
        rw.push(w);
        ri.push(i);
    }
    let grid = GridSpec::new(64, h, 1).unwrap();
    let (mut sw, mut si) = (Vec::new(), Vec::new());
    for s in 0..100_000u64 {
        let p = sample_path(grid, 4, s).unwrap();
        sw.push(p.dw[0]);
        si.push(p.di[0]);
    }
    let pairs = [
        (covariance_estimate(&sw, &sw), covariance_estimate(&rw, &rw), h),
        (covariance_estimate(&si, &si), covariance_estimate(&ri, &ri), h.powi(3) / 3.0),
        (covariance_estimate(&sw, &si), covariance_estimate(&rw, &ri), h * h / 2.0),
    ];
    for (sampler, riemann, closed) in pairs {
        assert!(two_sample_z(sampler, riemann) <= 3.0, "{sampler:?} vs {riemann:?}");
        assert!(sampler.z_score(closed) <= 3.0, "{sampler:?} vs {closed}");
    }
}

#[test]
fn terminal_law_is_the_kernel_covariance() {
    let grid = GridSpec::unit(16, 2).unwrap();
    let target = KernelCovariance::new(1.0).unwrap().matrix();
    for dim in 0..2 {
        let (mut w, mut i) = (Vec::new(), Vec::new());
        for s in 0..100_000u64 {
            let ip = integrate_path(&sample_path(grid, 8, s).unwrap());
            w.push(ip.w_at(16)[dim]);
            i.push(ip.i_at(16)[dim]);
        }
        let est = [
            [covariance_estimate(&w, &w), covariance_estimate(&w, &i)],
            [covariance_estimate(&i, &w), covariance_estimate(&i, &i)],
        ];
        for a in 0..2 {
            for b in 0..2 {
                assert!(est[a][b].z_score(target[a][b]) <= 3.0, "{a}{b}: {:?} vs {}", est[a][b], target[a][b]);
            }
        }
    }
}

#[test]
fn coarse_increments_have_coarse_covariance() {
    let grid = GridSpec::unit(64, 1).unwrap();
    let big_h = 1.0 / 8.0;
    let (mut w, mut i) = (Vec::new(), Vec::new());
    for s in 0..50_000u64 {
        let c = coarsen(&sample_path(grid, 21, s).unwrap(), 8).unwrap();
        w.push(c.dw[3]);
        i.push(c.di[3]);
    }
    assert!(covariance_estimate(&w, &w).z_score(big_h) <= 3.0);
    assert!(covariance_estimate(&w, &i).z_score(big_h * big_h / 2.0) <= 3.0);
    assert!(covariance_estimate(&i, &i).z_score(big_h.powi(3) / 3.0) <= 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coarsening_preserves_the_integrated_path(seed in any::<u64>(), stream in 0u64..1000, k in 0u32..4, e in 0u32..4, d in 1usize..3) {
        let n = 4u64 << (k + e);
        let factor = 1usize << e;
        let fine = sample_path(GridSpec::unit(n, d).unwrap(), seed, stream).unwrap();
        let coarse = coarsen(&fine, factor).unwrap();
        let (fi, ci) = (integrate_path(&fine), integrate_path(&coarse));
        for kc in 0..ci.len() {
            for j in 0..d {
                prop_assert!((ci.w_at(kc)[j] - fi.w_at(kc * factor)[j]).abs() < 1e-12);
                prop_assert!((ci.i_at(kc)[j] - fi.i_at(kc * factor)[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coarsening_chains(seed in any::<u64>(), a in 0u32..3, b in 0u32..3) {
        let fine = sample_path(GridSpec::unit(64, 1).unwrap(), seed, 0).unwrap();
        let two_steps = coarsen(&coarsen(&fine, 1 << a).unwrap(), 1 << b).unwrap();
        let one_step = coarsen(&fine, 1 << (a + b)).unwrap();
        for (x, y) in two_steps.dw.iter().zip(&one_step.dw).chain(two_steps.di.iter().zip(&one_step.di)) {
            prop_assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn dump_round_trips(seed in any::<u64>(), stream in any::<u64>(), n in 1u64..40, d in 1usize..4) {
        let p = sample_path(GridSpec::unit(n, d).unwrap(), seed, stream).unwrap();
        let mut buf = Vec::new();
        write_path(&p, &mut buf).unwrap();
        prop_assert_eq!(read_path(buf.as_slice()).unwrap(), p);
    }
}

#[test]
fn truncated_dump_is_rejected() {
    let p = sample_path(GridSpec::unit(8, 1).unwrap(), 1, 1).unwrap();
    let mut buf = Vec::new();
    write_path(&p, &mut buf).unwrap();
    buf.truncate(buf.len() - 3);
    assert!(read_path(buf.as_slice()).is_err());
    assert!(read_path(&b"NOPE"[..]).is_err());
}
