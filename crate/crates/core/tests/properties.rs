mod common;

use proptest::prelude::*;

use kfix::cli::parse_config;
use kfix::cli::snapshot::Snapshot;
use kfix::collision::CollisionOperator;
use kfix::grid::{dot, post_collision, DistributionField, SpatialGrid, SphereQuadrature, VelocityGrid};
use kfix::kernel::KernelSpec;
use kfix::mild_solver::{free_streaming_extension, SolverConfig};
use kfix::renorm::{renorm_f_map, verify_beta, BetaFunction};
use kfix::transport::{sharp, shift_slice};
use kfix::uniqueness_lab::{bilinear_difference_identity_check, f_map};

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn small_cfg(x_nodes: usize) -> SolverConfig {
    let sg = if x_nodes == 1 {
        SpatialGrid::homogeneous(2).unwrap()
    } else {
        SpatialGrid::new(2, 2.0, x_nodes).unwrap()
    };
    SolverConfig::new(
        0.4,
        2,
        10,
        1e-12,
        sg,
        VelocityGrid::new(2, 2.0, 5).unwrap(),
        SphereQuadrature::new(2, 6).unwrap(),
        KernelSpec::hard_sphere(1.0, 2),
    )
    .unwrap()
}

fn field_from(cfg: &SolverConfig, values: &[f64]) -> DistributionField {
    let len = (cfg.time_steps + 1) * cfg.space().len() * cfg.velocity().len();
    let vals: Vec<f64> = (0..len).map(|i| values[i % values.len()]).collect();
    DistributionField::new(*cfg.velocity(), *cfg.space(), cfg.times(), vals).unwrap()
}

fn vanishing_at_zero(cfg: &SolverConfig, values: &[f64]) -> DistributionField {
    let f = field_from(cfg, values);
    let sl = f.slice_len();
    let vals = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, x)| if i < sl { 0.0 } else { *x })
        .collect();
    f.with_values(vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collisions_conserve_momentum_and_energy(
        u in prop::array::uniform3(-5.0..5.0f64),
        v in prop::array::uniform3(-5.0..5.0f64),
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..std::f64::consts::TAU,
    ) {
        let w = unit(theta, phi);
        let (up, vp) = post_collision(&u, &v, &w).unwrap();
        for a in 0..3 {
            prop_assert!((up[a] + vp[a] - u[a] - v[a]).abs() < 1e-12);
        }
        let e0 = dot(&u, &u) + dot(&v, &v);
        let e1 = dot(&up, &up) + dot(&vp, &vp);
        prop_assert!((e0 - e1).abs() < 1e-11 * (1.0 + e0));
    }

    #[test]
    fn gain_and_loss_nonnegative_and_bilinear_consistent(
        f in prop::collection::vec(0.0..2.0f64, 25),
        g in prop::collection::vec(0.0..2.0f64, 25),
    ) {
        let vg = VelocityGrid::new(2, 2.0, 5).unwrap();
        let sq = SphereQuadrature::new(2, 6).unwrap();
        let op = CollisionOperator::new(&KernelSpec::variable_hard_sphere(1.0, 0.4), &vg, &sq).unwrap();
        let q = op.quadratic(&f).unwrap();
        prop_assert!(q.gain.iter().chain(&q.loss).all(|x| *x >= 0.0));
        let b = op.bilinear(&f, &f).unwrap();
        prop_assert!(common::rel_l1(&b.total, &q.total) < 1e-13);
        let fg = op.bilinear(&f, &g).unwrap();
        let gf = op.bilinear(&g, &f).unwrap();
        prop_assert!(common::rel_l1(&fg.total, &gf.total) < 1e-13);
    }

    #[test]
    fn characteristic_transform_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 100),
        b in prop::collection::vec(-1.0..1.0f64, 100),
        alpha in -3.0..3.0f64,
    ) {
        let cfg = small_cfg(4);
        let fa = field_from(&cfg, &a);
        let fb = field_from(&cfg, &b);
        let combo = fa.scale(alpha).unwrap().add(&fb).unwrap();
        for m in 0..combo.time_count() {
            let lhs = sharp(&combo, m).unwrap();
            let sa = sharp(&fa, m).unwrap();
            let sb = sharp(&fb, m).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (alpha * sa[i] + sb[i])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn periodic_shift_conserves_total(
        h in prop::collection::vec(-1.0..1.0f64, 400),
        tau in -3.0..3.0f64,
    ) {
        let sg = SpatialGrid::new(2, 2.0, 4).unwrap();
        let vg = VelocityGrid::new(2, 2.0, 5).unwrap();
        let out = shift_slice(&h, &sg, &vg, tau).unwrap();
        for iv in 0..vg.len() {
            let before: f64 = (0..sg.len()).map(|ix| h[ix * vg.len() + iv]).sum();
            let after: f64 = (0..sg.len()).map(|ix| out[ix * vg.len() + iv]).sum();
            prop_assert!((before - after).abs() < 1e-12);
        }
    }

    #[test]
    fn regrouping_identity_holds(
        f in prop::collection::vec(0.0..1.0f64, 100),
        a in prop::collection::vec(-0.5..0.5f64, 100),
        b in prop::collection::vec(-0.5..0.5f64, 100),
    ) {
        let cfg = small_cfg(4);
        let chk = bilinear_difference_identity_check(
            &field_from(&cfg, &a),
            &field_from(&cfg, &b),
            &field_from(&cfg, &f),
            &cfg,
        )
        .unwrap();
        prop_assert!(chk.relative() <= 1e-11, "{:?}", chk);
    }

    #[test]
    fn perturbation_map_shrinks_with_perturbation(
        f in prop::collection::vec(0.1..1.0f64, 25),
        g in prop::collection::vec(-0.5..0.5f64, 25),
    ) {
        let cfg = small_cfg(1);
        let f2 = free_streaming_extension(&f, &cfg).unwrap();
        let g = vanishing_at_zero(&cfg, &g);
        prop_assume!(g.values().iter().any(|x| *x != 0.0));
        let mut last = f64::INFINITY;
        for k in 0..4 {
            let gk = g.scale(0.5f64.powi(k)).unwrap();
            let n = kfix::grid::l1_norm(&f_map(&gk, &f2, &cfg).unwrap());
            prop_assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn renormalized_difference_has_sign_of_perturbation(
        f in prop::collection::vec(0.0..2.0f64, 100),
        g in prop::collection::vec(-1.0..1.0f64, 100),
    ) {
        let b = BetaFunction::log1p();
        let cfg = small_cfg(4);
        let f2 = field_from(&cfg, &f);
        let gf = field_from(&cfg, &g);
        // at t = 0 the map is beta(f2 + g) - beta(f2)
        let out = renorm_f_map(&gf, &f2, &b, &cfg).unwrap();
        for i in 0..f2.slice_len() {
            let (fi, gi) = (f2.slice(0)[i], gf.slice(0)[i]);
            if fi + gi >= 0.0 {
                let d = out.slice(0)[i];
                prop_assert!(d == 0.0 && gi == 0.0 || d.signum() == gi.signum(), "{fi} {gi} {d}");
            }
        }
    }

    #[test]
    fn rational_beta_bound_holds(k in 0.01..1e4f64) {
        let s = verify_beta(&BetaFunction::custom_rational(k).unwrap());
        prop_assert!(s.bound_ok && s.nondecreasing);
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(
        values in prop::collection::vec(any::<f64>(), 125),
        time in any::<f64>(),
        index in any::<u32>(),
    ) {
        let snap = Snapshot {
            velocity: VelocityGrid::new(3, 1.5, 5).unwrap(),
            space: SpatialGrid::homogeneous(3).unwrap(),
            time_index: index,
            time,
            values,
        };
        let bytes = snap.to_bytes();
        let back = Snapshot::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert!(back.values.iter().zip(&snap.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn config_parser_never_panics(text in "[a-z_\\[\\]=\"# .0-9\\n-]{0,120}") {
        let _ = parse_config(&text);
    }
}

#[test]
fn sphere_weights_sum_to_measure() {
    for order in 4..12 {
        let s2 = SphereQuadrature::new(2, order).unwrap();
        let s3 = SphereQuadrature::new(3, order).unwrap();
        let sum2: f64 = s2.weights().iter().sum();
        let sum3: f64 = s3.weights().iter().sum();
        assert!((sum2 - std::f64::consts::TAU).abs() < 1e-12);
        assert!((sum3 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
