use proptest::prelude::*;
use stoplab_core::operators::YosidaMatrix;
use stoplab_core::problem::{GainSpec, OperatorSpec, Payoff, PolyField, ScalarField, TimeFactor};
use stoplab_core::sde::NoiseSource;
use stoplab_core::stats::{pairwise_sum, relative_trend};
use stoplab_core::vi::{bicgstab, CsrMatrix, DomainSpec};

fn put(direction: Vec<f64>, strike: f64, smoothing: f64) -> GainSpec {
    GainSpec::new(
        Payoff::Put {
            direction,
            strike,
            cap: 1.0,
            smoothing,
        },
        TimeFactor::Exponential { rate: 0.3 },
        1.0,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn yosida_diagonal_is_contractive_and_monotone(a in -20.0f64..-0.01, lo in 0.1f64..100.0, factor in 1.01f64..10.0) {
        let op = OperatorSpec::diagonal(vec![a]);
        let e1 = YosidaMatrix::new(&op, Some(lo), 1).unwrap().entry(0, 0);
        let e2 = YosidaMatrix::new(&op, Some(lo * factor), 1).unwrap().entry(0, 0);
        let closed = lo * a / (lo - a);
        prop_assert!((e1 - closed).abs() <= 1e-12 * closed.abs());
        prop_assert!(e1.abs() <= a.abs() && e2.abs() <= a.abs());
        prop_assert!(e2.abs() >= e1.abs());
    }

    #[test]
    fn gain_respects_declared_bounds(
        l1 in -1.0f64..1.0, l2 in -1.0f64..1.0, strike in -1.0f64..1.0, smoothing in 0.01f64..0.2,
        t in 0.0f64..1.0, x in prop::array::uniform2(-5.0f64..5.0), y in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let g = put(vec![l1, l2], strike, smoothing);
        let b = g.bounds();
        let vx = g.value(t, &x);
        let vy = g.value(t, &y);
        prop_assert!(vx >= 0.0 && vx <= b.theta_max);
        let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assert!((vx - vy).abs() <= b.lip_x * dist * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn grid_nodes_locate_themselves(radius in 0.5f64..5.0, k1 in 1usize..15, k2 in 1usize..15, pick in 0usize..10_000) {
        let dom = DomainSpec::new(radius, vec![2 * k1 + 1, 2 * k2 + 1]).unwrap();
        let flat = pick % dom.len();
        let mut x = [0.0; 2];
        dom.node(flat, &mut x);
        prop_assert_eq!(dom.locate_node(&x), Some(flat));
    }

    #[test]
    fn interpolation_reproduces_affine_functions(radius in 0.5f64..5.0, k in 1usize..20, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let dom = DomainSpec::new(radius, vec![2 * k + 1, 2 * k + 3]).unwrap();
        let x = [radius * (2.0 * u - 1.0), radius * (2.0 * v - 1.0)];
        let w = dom.interpolation(&x).unwrap();
        let total: f64 = w.iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mut node = [0.0; 2];
        let f = |p: &[f64]| 0.5 + 2.0 * p[0] - 3.0 * p[1];
        let interp: f64 = w.iter().map(|&(i, wi)| { dom.node(i, &mut node); wi * f(&node) }).sum();
        prop_assert!((interp - f(&x)).abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers(xs in prop::collection::vec(-1000i32..1000, 0..500)) {
        let fs: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        let exact: i64 = xs.iter().map(|&v| v as i64).sum();
        prop_assert_eq!(pairwise_sum(&fs), exact as f64);
    }

    #[test]
    fn relative_trend_ignores_scale(vals in prop::collection::vec(0.1f64..10.0, 3..8), c in 0.01f64..100.0) {
        let params: Vec<f64> = (0..vals.len()).map(|i| i as f64).collect();
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let a = relative_trend(&params, &vals);
        let b = relative_trend(&params, &scaled);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn csr_matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 0..30), x in prop::array::uniform6(-2.0f64..2.0)) {
        let mut dense = [[0.0; 6]; 6];
        let mut rows = vec![Vec::new(); 6];
        for &(i, j, v) in &entries {
            dense[i][j] += v;
            rows[i].push((j, v));
        }
        let m = CsrMatrix::from_rows(rows);
        let mut y = [0.0; 6];
        m.matvec(&x, &mut y);
        for i in 0..6 {
            let want: f64 = (0..6).map(|j| dense[i][j] * x[j]).sum();
            prop_assert!((y[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_dominant_systems(n in 2usize..60, off in prop::collection::vec(-1.0f64..1.0, 120), b in prop::collection::vec(-1.0f64..1.0, 60)) {
        // strictly diagonally dominant five-point band
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i, 5.0)];
                if i > 0 { r.push((i - 1, off[i])); }
                if i + 1 < n { r.push((i + 1, off[60 + i])); }
                if i + 3 < n { r.push((i + 3, 0.5 * off[(i * 7) % 120])); }
                r
            })
            .collect();
        let m = CsrMatrix::from_rows(rows);
        let rhs = &b[..n];
        let mut x = vec![0.0; n];
        bicgstab(&m, rhs, &mut x, 1e-12, 500).unwrap();
        let mut r = vec![0.0; n];
        m.matvec(&x, &mut r);
        let res = r.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(res < 1e-9, "residual {}", res);
    }

    #[test]
    fn noise_streams_do_not_depend_on_channel_count(seed in any::<u64>(), path in 0usize..1000, extra in 1usize..4) {
        let src = NoiseSource::new(seed);
        let a = src.increments(path, 2, 16, 0.01);
        let b = src.increments(path, 2 + extra, 16, 0.01);
        for k in 0..16 {
            for c in 0..2 {
                prop_assert_eq!(a[k * 2 + c], b[k * (2 + extra) + c]);
            }
        }
    }

    #[test]
    fn poly_gradient_matches_differences(seed in 0u64..1000, x in prop::array::uniform2(-1.5f64..1.5)) {
        let p = PolyField::random(2, 3, seed);
        let mut g = [0.0; 2];
        p.gradient(&x, &mut g);
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
    }
}
