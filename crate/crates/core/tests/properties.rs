use pexp::embedding::sliding_window_embed;
use pexp::exponents::{fit_slope, kantz_lyapunov};
use pexp::ph0::{barcode0, betti_curve, distortion_identity, interleaving_distance};
use pexp::{BettiCurve, EmbeddingParams, FitWindow, NeighborhoodParams, PointCloud, Series, TimeGrid, Trajectory};
use proptest::prelude::*;

fn cloud(max_n: usize) -> impl Strategy<Value = PointCloud> {
    (1usize..=3).prop_flat_map(move |dim| {
        prop::collection::vec(-10.0f64..10.0, dim..=dim * max_n)
            .prop_map(move |mut c| {
                c.truncate(c.len() / dim * dim);
                PointCloud::new(dim, c).unwrap()
            })
    })
}

fn radii() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..15.0, 1..30).prop_map(|mut r| {
        r.push(0.0);
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    })
}

/// Rotation by `angle` in the first two coordinates plus a translation.
fn rigid(z: &PointCloud, angle: f64, shift: f64) -> PointCloud {
    let (s, c) = angle.sin_cos();
    z.map_points(|p, out| {
        out.copy_from_slice(p);
        if p.len() >= 2 {
            out[0] = c * p[0] - s * p[1];
            out[1] = s * p[0] + c * p[1];
        }
        for o in out.iter_mut() {
            *o += shift;
        }
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn betti_curves_are_non_increasing(z in cloud(40), r in radii()) {
        let curve = betti_curve(&z, &r).unwrap();
        let counts = curve.counts();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(counts[0] <= z.len());
        prop_assert!(*counts.last().unwrap() >= 1);
    }

    #[test]
    fn barcode_has_one_bar_per_point_and_one_infinite(z in cloud(40)) {
        let bc = barcode0(&z).unwrap();
        prop_assert_eq!(bc.n_points(), z.len());
        prop_assert_eq!(bc.finite_deaths().count(), z.len() - 1);
    }

    #[test]
    fn rigid_motions_preserve_betti_curves(z in cloud(30), angle in 0.0f64..6.3, shift in -5.0f64..5.0) {
        let moved = rigid(&z, angle, shift);
        let f = BettiCurve::exact(&barcode0(&z).unwrap());
        let g = BettiCurve::exact(&barcode0(&moved).unwrap());
        // Rounding can move a merge radius by a few ulps; the stability
        // bound absorbs exactly that.
        let d = interleaving_distance(&f, &g).unwrap();
        prop_assert!(d <= distortion_identity(&z, &moved).unwrap().distortion);
        prop_assert!(d < 1e-9);
    }

    #[test]
    fn scaling_scales_radii(z in cloud(30), r in radii(), s in 0.1f64..8.0) {
        // Powers of two keep the products exact.
        let s = 2f64.powi(s.log2().round() as i32);
        let scaled = z.map_points(|p, out| {
            for (o, x) in out.iter_mut().zip(p) {
                *o = s * x;
            }
        }).unwrap();
        let sr: Vec<f64> = r.iter().map(|x| s * x).collect();
        let (a, b) = (betti_curve(&z, &r).unwrap(), betti_curve(&scaled, &sr).unwrap());
        prop_assert_eq!(a.counts(), b.counts());
    }

    #[test]
    fn stability_under_perturbation(z in cloud(25), eta in 0.0f64..1.0, seed in 0u64..1000) {
        let mut k = seed;
        let moved = z.map_points(|p, out| {
            for (o, x) in out.iter_mut().zip(p) {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *o = x + eta * ((k >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
            }
        }).unwrap();
        let f = BettiCurve::exact(&barcode0(&z).unwrap());
        let g = BettiCurve::exact(&barcode0(&moved).unwrap());
        prop_assert!(interleaving_distance(&f, &g).unwrap() <= distortion_identity(&z, &moved).unwrap().distortion);
    }

    #[test]
    fn embedding_uses_literal_samples(
        values in prop::collection::vec(-100.0f64..100.0, 10..200),
        tau in 1usize..6,
        dim in 1usize..5,
    ) {
        let s = Series::new(values.clone()).unwrap();
        let p = EmbeddingParams::new(tau, dim).unwrap();
        match sliding_window_embed(&s, &p) {
            Ok(x) => {
                prop_assert_eq!(x.len(), values.len() - (dim - 1) * tau);
                for i in 0..x.len() {
                    for (j, &c) in x.point(i).iter().enumerate() {
                        prop_assert_eq!(c.to_bits(), values[i + j * tau].to_bits());
                    }
                }
            }
            Err(_) => prop_assert!(values.len() < (dim - 1) * tau + 2),
        }
    }

    #[test]
    fn kantz_is_scale_invariant(seed in 0u64..500, s in 0.25f64..4.0) {
        let s = 2f64.powi(s.log2().round() as i32);
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37 + seed as f64).sin() * (1.0 + 0.01 * i as f64)).collect();
        let grid = TimeGrid::unit(n).unwrap();
        let base = Trajectory::new(PointCloud::from_line(&xs).unwrap(), grid).unwrap();
        let scaled_xs: Vec<f64> = xs.iter().map(|x| s * x).collect();
        let scaled = Trajectory::new(PointCloud::from_line(&scaled_xs).unwrap(), grid).unwrap();
        let window = FitWindow::new(0.0, 10.0).unwrap();
        let a = kantz_lyapunov(&base, &NeighborhoodParams::new(0.2, 1).unwrap(), 10, window);
        let b = kantz_lyapunov(&scaled, &NeighborhoodParams::new(0.2 * s, 1).unwrap(), 10, window);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "only one failed: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn slope_of_a_line_is_exact(a in -5.0f64..5.0, b in -5.0f64..5.0, n in 2usize..40) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let fit = fit_slope(&xs, &ys, FitWindow::new(0.0, xs[n - 1]).unwrap()).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-9);
        prop_assert!((fit.intercept - b).abs() < 1e-9);
    }
}
