use irsloc::channel::{assign_clusters, build_cir, irs_bs_channel, IrsBsModel, RcsDraws};
use irsloc::geometry::{aoa_from, point_at, steering, steering_far, steering_near, Point2, Range, Scene, SteeringModel, UlaGeometry};
use irsloc::harness::{classify_events, preset, TrialConfig};
use irsloc::localize::{near_jacobian, near_objective, near_residuals, localize_near, NearMeasurement, NearSolveConfig, TargetEstimate};
use irsloc::ofdm::{cp_remove_and_dft, delay_manifold, generate_pilots, simulate_freq_rx, simulate_time_rx, OfdmConfig};
use irsloc::subspace::{build_grids, design_irs_schedule, estimate_target_count, AicForm};
use irsloc::{geometry::FieldType, geometry::TargetTruth, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::PI;

fn desk() -> TrialConfig {
    preset("desk").unwrap().config
}

fn scene_with(targets: &[Point2]) -> Scene {
    let base = desk().scene.build().unwrap();
    base.with_targets(&targets.iter().map(|&p| (p, 1.0)).collect::<Vec<_>>()).unwrap()
}

/// A point at (d, θ) from the desk IRS.
fn polar() -> impl Strategy<Value = (f64, f64)> {
    (10.0f64..140.0, 0.55f64..2.6)
}

/// Polar points whose bistatic path falls inside the desk delay window.
fn in_window() -> impl Strategy<Value = (f64, f64)> {
    let cfg = desk();
    let base = cfg.scene.build().unwrap();
    let window = cfg.ofdm.num_taps as f64 * cfg.ofdm.tap_width();
    polar().prop_filter("outside the delay window", move |&(d, t)| {
        let p = point_at(base.irs_pos, d, t);
        base.user_pos.distance(&p) + d + base.irs_bs_distance() < window
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_entries_are_unit_modulus(
        m in 1usize..80,
        spacing in 0.01f64..0.2,
        d in 0.5f64..500.0,
        eta in 0.0f64..PI,
        model in prop_oneof![Just(SteeringModel::Fresnel), Just(SteeringModel::Exact)],
        far in any::<bool>(),
    ) {
        let geom = UlaGeometry::new(m, spacing).unwrap();
        let range = if far { Range::Infinite } else { Range::Finite(d) };
        let a = steering(&geom, 0.1, range, eta, model).unwrap();
        for x in a.iter() {
            prop_assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_steering_converges_to_far(eta in 0.0f64..PI, m in 2usize..64) {
        let lambda = 0.01;
        let geom = UlaGeometry::new(m, lambda / 2.0).unwrap();
        let far = steering_far(&geom, lambda, eta);
        // Multiples of the Fraunhofer distance of the array.
        let aperture = (m - 1) as f64 * lambda / 2.0;
        let fraunhofer = (2.0 * aperture * aperture / lambda).max(lambda);
        let errs: Vec<f64> = (0..7)
            .map(|k| {
                let near = steering_near(&geom, lambda, 10f64.powi(k) * fraunhofer, eta).unwrap();
                (near - &far).iter().map(|x| x.norm()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15, "{:?}", errs);
        }
    }

    #[test]
    fn aoa_lies_in_half_open_range(x in -200.0f64..200.0, y in -200.0f64..49.99) {
        let theta = aoa_from(Point2::new(50.0, 50.0), Point2::new(x, y)).unwrap();
        prop_assert!((0.0..PI).contains(&theta));
    }

    #[test]
    fn polar_round_trip((d, theta) in polar()) {
        let irs = Point2::new(50.0, 50.0);
        let p = point_at(irs, d, theta);
        prop_assert!((p.distance(&irs) - d).abs() < 1e-9);
        prop_assert!((aoa_from(irs, p).unwrap() - theta).abs() < 1e-9);
    }

    #[test]
    fn cluster_window_contains_true_range(pts in prop::collection::vec(in_window(), 1..6)) {
        let cfg = desk();
        let irs = Point2::new(50.0, 50.0);
        let scene = scene_with(&pts.iter().map(|&(d, t)| point_at(irs, d, t)).collect::<Vec<_>>());
        let map = assign_clusters(&scene, &cfg.ofdm).unwrap();
        let w = cfg.ofdm.tap_width();
        for (k, &l) in map.tap_of.iter().enumerate() {
            let r = irsloc::geometry::path_ranges(&scene, k).unwrap().total();
            prop_assert!((l - 1) as f64 * w <= r && r < l as f64 * w);
            prop_assert!(map.members[l - 1].contains(&k));
        }
    }

    #[test]
    fn far_field_irs_bs_channel_has_rank_one(bx in -100.0f64..200.0, by in -100.0f64..45.0, mb in 1usize..9) {
        let mut sc = desk().scene;
        sc.bs = Point2::new(bx, by);
        sc.bs_elements = mb;
        let scene = sc.build().unwrap();
        let g = irs_bs_channel(&scene, IrsBsModel::FarField, 1.0);
        let sv = g.g.clone().singular_values();
        let top = sv.max();
        let mut rest: Vec<f64> = sv.iter().copied().collect();
        rest.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(rest.get(1).map_or(true, |&s| s / top < 1e-12));
    }

    #[test]
    fn cir_support_equals_cluster_map(pts in prop::collection::vec(in_window(), 1..6), seed in any::<u64>()) {
        let cfg = desk();
        let irs = Point2::new(50.0, 50.0);
        let scene = scene_with(&pts.iter().map(|&(d, t)| point_at(irs, d, t)).collect::<Vec<_>>());
        let g = irs_bs_channel(&scene, cfg.scene.irs_bs_model, 1.0);
        let sched = design_irs_schedule(&g, 4, 0.37).unwrap();
        let map = assign_clusters(&scene, &cfg.ofdm).unwrap();
        let rcs = RcsDraws::swerling(scene.targets.len(), 2, seed);
        let cir = build_cir(&scene, &g, &sched, &rcs, &map, 1, 1, SteeringModel::Fresnel).unwrap();
        let support: Vec<usize> = (0..cir.taps.nrows())
            .filter(|&r| cir.taps.row(r).iter().any(|x| x.norm() > 0.0))
            .map(|r| r + 1)
            .collect();
        prop_assert_eq!(support, map.occupied());
    }

    #[test]
    fn time_and_frequency_models_agree(taps in 1usize..24, seed in any::<u64>()) {
        let cfg = OfdmConfig {
            num_subcarriers: 64,
            subcarrier_spacing: 1e8 / 64.0,
            cp_len: 24,
            num_taps: taps,
            symbols_per_block: 2,
            num_blocks: 2,
            power: 2.0,
            noise_var: 0.0,
        };
        let pilots = generate_pilots(&cfg, seed);
        let mut rng = irsloc::rng::stream(seed, irsloc::rng::Domain::Test, 0, 0);
        let mut cir = irsloc::channel::Cir::zeros(taps, 3);
        for x in cir.taps.iter_mut() {
            *x = irsloc::rng::complex_gaussian(&mut rng, 1.0);
        }
        let e = delay_manifold(cfg.num_subcarriers, taps);
        let freq = simulate_freq_rx(&cfg, &pilots, &e, &cir, 1, 0, seed).unwrap();
        let time = simulate_time_rx(&cfg, &pilots, &cir, 1, 0, seed).unwrap();
        let via_time = cp_remove_and_dft(&cfg, &time).unwrap();
        prop_assert!((via_time - &freq).norm() <= 1e-9 * freq.norm());
    }

    #[test]
    fn delay_manifold_has_full_column_rank(n in 8usize..128, frac in 0.05f64..1.0) {
        let l = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let e = delay_manifold(n, l).e;
        prop_assert_eq!(e.shape(), (n, l));
        let sv = e.singular_values();
        prop_assert!(sv.min() > 1e-8 * sv.max());
    }

    #[test]
    fn aic_is_scale_invariant(
        mut lam in prop::collection::vec(1e-3f64..1e3, 8),
        scale in 1e-6f64..1e6,
        v in 8usize..512,
    ) {
        lam.sort_by(|a, b| b.total_cmp(a));
        let scaled: Vec<f64> = lam.iter().map(|x| x * scale).collect();
        prop_assert_eq!(
            estimate_target_count(&lam, 2, 4, v, AicForm::WaxKailath),
            estimate_target_count(&scaled, 2, 4, v, AicForm::WaxKailath)
        );
        // The printed form normalizes by M_B − k, which matches the tail
        // length only for a single block.
        prop_assert_eq!(
            estimate_target_count(&lam, 1, 8, v, AicForm::Printed),
            estimate_target_count(&scaled, 1, 8, v, AicForm::Printed)
        );
    }

    #[test]
    fn cluster_grid_is_the_lattice_inside_the_window(pts in prop::collection::vec(in_window(), 1..4)) {
        let cfg = desk();
        let irs = Point2::new(50.0, 50.0);
        let scene = scene_with(&pts.iter().map(|&(d, t)| point_at(irs, d, t)).collect::<Vec<_>>());
        let map = assign_clusters(&scene, &cfg.ofdm).unwrap();
        let g = &cfg.subspace.grid;
        let w = cfg.ofdm.tap_width();
        let region = &cfg.subspace.region;
        for (k, &(d, theta)) in pts.iter().enumerate() {
            let l = map.tap_of[k];
            let grid = build_grids(&scene, cfg.ofdm.bandwidth(), region, g, l).unwrap();
            let inside = |r: f64| (l - 1) as f64 * w <= r && r < l as f64 * w;
            let mu0 = (theta / g.theta_step).floor() as u32;
            let mut hits = 0;
            for mu in [mu0, mu0 + 1] {
                let th = mu as f64 * g.theta_step;
                if th < region.theta_min || th > region.theta_max {
                    continue;
                }
                match scene.targets[k].field {
                    FieldType::Near => {
                        let z0 = (d / g.d_step).floor() as u32;
                        for zeta in [z0, z0 + 1] {
                            let dz = zeta as f64 * g.d_step;
                            if dz > scene.near_field_radius {
                                continue;
                            }
                            let want = inside(scene.total_range_at(dz, th));
                            prop_assert_eq!(grid.contains_near(zeta, mu), want, "ζ {} μ {}", zeta, mu);
                            hits += want as usize;
                        }
                    }
                    FieldType::Far => hits += grid.contains_far(mu) as usize,
                }
            }
            prop_assert!(hits > 0, "no lattice neighbour of d {d} θ {theta} in cluster {l}");
        }
    }

    #[test]
    fn near_jacobian_matches_finite_differences(
        (d, theta) in polar(),
        w_angle in 0.0f64..1.0,
        w_path_frac in 0.0f64..1.0,
    ) {
        let scene = desk().scene.build().unwrap();
        let cfg = NearSolveConfig { w_angle, w_path: (1.0 - w_angle) * w_path_frac, ..Default::default() };
        let m = NearMeasurement { d_utib_hat: 150.0, theta_hat: 1.0, d_hat: 40.0 };
        let p = point_at(scene.irs_pos, d, theta);
        let j = near_jacobian(&scene, &cfg, p);
        let h = 1e-6;
        for (axis, (dx, dy)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
            let plus = near_residuals(&scene, &m, &cfg, Point2::new(p.x + dx, p.y + dy));
            let minus = near_residuals(&scene, &m, &cfg, Point2::new(p.x - dx, p.y - dy));
            for i in 0..3 {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                prop_assert!((fd - j[i][axis]).abs() < 1e-5 * fd.abs().max(j[i][axis].abs()) + 1e-7, "r{i} axis {axis}: {fd} vs {}", j[i][axis]);
            }
        }
    }

    #[test]
    fn consistent_near_inputs_recover_truth_for_any_weights(
        d in 12.0f64..85.0,
        theta in 0.6f64..2.5,
        w_angle in 0.05f64..0.9,
        w_path_frac in 0.0f64..1.0,
    ) {
        let scene = desk().scene.build().unwrap();
        let p = point_at(scene.irs_pos, d, theta);
        let truth = scene.clone().with_targets(&[(p, 1.0)]).unwrap();
        let ranges = irsloc::geometry::path_ranges(&truth, 0).unwrap();
        let m = NearMeasurement { d_utib_hat: ranges.total(), theta_hat: theta, d_hat: d };
        let cfg = NearSolveConfig { w_angle, w_path: (1.0 - w_angle) * w_path_frac * 0.99, ..Default::default() };
        prop_assert!(near_objective(&scene, &m, &cfg, p) < 1e-20);
        let est = localize_near(&scene, 1, &m, &cfg).unwrap();
        prop_assert!(est.pos.distance(&p) < 1e-6, "{:?} vs {:?}", est.pos, p);
    }

    #[test]
    fn event_accounting(
        truth in prop::collection::vec((-60.0f64..60.0, -60.0f64..40.0, any::<bool>()), 0..10),
        est in prop::collection::vec((-60.0f64..60.0, -60.0f64..40.0, any::<bool>()), 0..10),
        r_small in 0.1f64..5.0,
        r_extra in 0.0f64..10.0,
    ) {
        let field = |near: bool| if near { FieldType::Near } else { FieldType::Far };
        let truth: Vec<TargetTruth> = truth
            .iter()
            .map(|&(x, y, n)| TargetTruth { pos: Point2::new(x, y), pathloss: 1.0, field: field(n) })
            .collect();
        let est: Vec<TargetEstimate> = est.iter().map(|&(x, y, n)| estimate(x, y, field(n))).collect();
        let a = classify_events(&truth, &est, r_small);
        let b = classify_events(&truth, &est, r_small + r_extra);
        for e in [&a, &b] {
            prop_assert!(e.near_md <= e.near_targets && e.far_md <= e.far_targets);
            prop_assert!(e.near_fa <= e.near_estimates && e.far_fa <= e.far_estimates);
        }
        // Detection regions are nested in R_e.
        prop_assert!(b.near_md <= a.near_md && b.far_md <= a.far_md);
        prop_assert!(b.near_fa <= a.near_fa && b.far_fa <= a.far_fa);
        let none = classify_events(&truth, &[], r_small);
        prop_assert_eq!(none.near_md, none.near_targets);
        prop_assert_eq!(none.far_md, none.far_targets);
        prop_assert_eq!(none.near_fa + none.far_fa, 0);
    }
}

fn estimate(x: f64, y: f64, field: FieldType) -> TargetEstimate {
    TargetEstimate {
        field,
        cluster: 1,
        theta_hat: 0.0,
        d_hat: None,
        d_utib_hat: 0.0,
        pos: Point2::new(x, y),
        objective: 0.0,
        iterations: 0,
        converged: true,
        fallback: false,
        value: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn group_lasso_zeros_whole_taps(
        support in prop::collection::btree_set(1usize..=16, 1..5),
        noise_var in prop_oneof![Just(0.0), 1e-3f64..0.1],
        seed in any::<u64>(),
    ) {
        use irsloc::estimation::{certificate, group_lasso, GroupLassoConfig, Observations};
        let cfg = OfdmConfig {
            num_subcarriers: 64,
            subcarrier_spacing: 1e8 / 64.0,
            cp_len: 16,
            num_taps: 16,
            symbols_per_block: 2,
            num_blocks: 2,
            power: 1.0,
            noise_var,
        };
        let pilots = generate_pilots(&cfg, seed);
        let e = delay_manifold(cfg.num_subcarriers, cfg.num_taps);
        let mut rng = irsloc::rng::stream(seed, irsloc::rng::Domain::Test, 0, 0);
        let mut y = Vec::new();
        for t in 0..cfg.num_blocks {
            for q in 0..cfg.symbols_per_block {
                let mut cir = irsloc::channel::Cir::zeros(cfg.num_taps, 2);
                for &l in &support {
                    for b in 0..2 {
                        cir.taps[(l - 1, b)] = irsloc::rng::complex_gaussian(&mut rng, 1.0);
                    }
                }
                y.push(simulate_freq_rx(&cfg, &pilots, &e, &cir, q, t, seed).unwrap());
            }
        }
        let obs = Observations::new(cfg.symbols_per_block, cfg.num_blocks, y).unwrap();
        let lasso = GroupLassoConfig::default();
        let est = group_lasso(&cfg, &obs, &pilots, &e, &lasso).unwrap();
        for (r, &g) in est.group_energy.iter().enumerate() {
            let entries = est.taps.iter().flat_map(|m| m.row(r).iter().copied().collect::<Vec<_>>());
            let nonzero = entries.filter(|x| x.norm() > 0.0).count();
            let expect: f64 = est.taps.iter().map(|m| m.row(r).norm_squared()).sum();
            prop_assert!((g - expect).abs() <= 1e-12 * expect.max(1e-300));
            prop_assert_eq!(g == 0.0, nonzero == 0);
        }
        if est.converged {
            let c = certificate(&obs, &pilots, &e, cfg.power, &est).unwrap();
            prop_assert!(c.zero_group_ratio <= 1.0 + 1e-3, "{:?}", c);
        }
    }
}

#[test]
fn stacking_reproduces_virtual_steering() {
    use irsloc::estimation::CirEstimate;
    use irsloc::subspace::{build_virtual, VirtualManifold};
    let cfg = desk();
    let scene = scene_with(&[point_at(Point2::new(50.0, 50.0), 40.0, 1.2)]);
    let g = irs_bs_channel(&scene, cfg.scene.irs_bs_model, 1.0);
    let q0 = 4;
    let sched = design_irs_schedule(&g, q0, 0.37).unwrap();
    let map = assign_clusters(&scene, &cfg.ofdm).unwrap();
    let l = map.tap_of[0];
    let v = 3;
    let rcs = RcsDraws::swerling(1, v, 9);
    let mut taps = Vec::new();
    for t in 0..v {
        for q in 0..q0 {
            taps.push(build_cir(&scene, &g, &sched, &rcs, &map, q, t, SteeringModel::Fresnel).unwrap().taps);
        }
    }
    let group_energy = (0..map.num_taps())
        .map(|r| taps.iter().map(|m: &DMatrix<C64>| m.row(r).norm_squared()).sum())
        .collect();
    let est = CirEstimate {
        symbols_per_block: q0,
        num_blocks: v,
        taps,
        group_energy,
        omega: 0.0,
        iterations: 0,
        converged: true,
        objective_history: vec![],
    };
    let batch = build_virtual(l, &est, q0).unwrap();
    let vm = VirtualManifold::new(&g, &sched, q0, scene.irs_array, scene.wavelength).unwrap();
    let (d, theta) = (40.0, 1.2);
    let psi = vm.steer(Range::Finite(d), theta);
    for t in 0..v {
        let expect = &psi * rcs.gamma[(0, t)];
        let got = batch.snapshots.column(t);
        assert!((got - &expect).norm() < 1e-10 * expect.norm(), "block {t}");
    }
}
