use num_complex::Complex64;
use proptest::prelude::*;

use lwave::filter::{design_filter, FilterBand};
use lwave::grid::{decompose, recompose, GridField, GridShape};
use lwave::oracle::{qmul, Quaternion};
use lwave::scheme::{step, step_with, SchemeConfig};
use lwave::spectral::{dft, dft_complex, inverse_dft};
use lwave::Exec;

fn band() -> impl Strategy<Value = FilterBand> {
    prop_oneof![Just(FilterBand::ZeroMax), Just(FilterBand::Central)]
}

fn shape() -> impl Strategy<Value = GridShape> {
    prop_oneof![
        (2usize..=16).prop_map(|h| GridShape::new(1, 2 * h).unwrap()),
        (2usize..=6).prop_map(|h| GridShape::new(2, 2 * h).unwrap()),
        Just(GridShape::new(3, 4).unwrap()),
        Just(GridShape::new(4, 4).unwrap()),
    ]
}

fn field() -> impl Strategy<Value = GridField> {
    shape().prop_flat_map(|s| {
        proptest::collection::vec(-1.0f64..1.0, s.sites()).prop_map(move |v| GridField::new(s, v, 0).unwrap())
    })
}

fn shift2(f: &GridField, axis: usize) -> GridField {
    let s = f.shape();
    GridField::new(s, (0..s.sites()).map(|i| f.values()[s.neighbor(i, axis, -2)]).collect(), 0).unwrap()
}

fn quat() -> impl Strategy<Value = Quaternion> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn step_is_linear(f in field(), k in -3.0f64..3.0, b in band(), order in 1usize..=2) {
        let s = f.shape();
        let cfg = SchemeConfig::standard(s.dim(), b, order).unwrap();
        let g = GridField::from_fn(s, |c| c.iter().map(|&x| x as f64).sum::<f64>().sin()).unwrap();
        let mix = GridField::new(s, f.values().iter().zip(g.values()).map(|(x, y)| x + k * y).collect(), 0).unwrap();
        let lhs = step(&mix, &cfg).unwrap();
        let (a, c) = (step(&f, &cfg).unwrap(), step(&g, &cfg).unwrap());
        for i in 0..s.sites() {
            let want = a.values()[i] + k * c.values()[i];
            prop_assert!((lhs.values()[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn step_commutes_with_shift_by_two(f in field(), b in band()) {
        let s = f.shape();
        let cfg = SchemeConfig::standard(s.dim(), b, 1).unwrap();
        let stepped = step(&f, &cfg).unwrap();
        for axis in 0..s.dim() {
            let a = step(&shift2(&f, axis), &cfg).unwrap();
            let b = shift2(&stepped, axis);
            prop_assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn exec_modes_agree(f in field(), b in band()) {
        let cfg = SchemeConfig::standard(f.shape().dim(), b, 2).unwrap();
        let a = step_with(&f, &cfg, Exec::Sequential).unwrap();
        let c = step_with(&f, &cfg, Exec::Parallel).unwrap();
        prop_assert_eq!(a.values(), c.values());
    }

    #[test]
    fn decompose_round_trip(f in field(), b in band()) {
        let back = recompose(&decompose(&f, b));
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn dft_round_trip_parseval_hermitian(f in field()) {
        let s = dft(&f);
        let back = inverse_dft(&s);
        for (x, y) in back.iter().zip(f.values()) {
            prop_assert!((x.re - y).abs() < 1e-12 && x.im.abs() < 1e-12);
        }
        let ex = f.sum_squares();
        let ef = s.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / f.shape().sites() as f64;
        prop_assert!((ex - ef).abs() <= 1e-12 * ex.max(1.0));
        for i in 0..s.values().len() {
            let neg: Vec<i64> = s.freq(i).iter().map(|v| -v).collect();
            prop_assert!((s.values()[i] - s.at(&neg).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_non_power_of_two_matches_naive(v in proptest::collection::vec(-1.0f64..1.0, 6..=24)) {
        let n = v.len();
        let data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let s = dft_complex(&[n], data, Exec::Sequential).unwrap();
        for k in 0..n {
            let want: Complex64 = v.iter().enumerate()
                .map(|(x, &a)| Complex64::from_polar(a, -2.0 * std::f64::consts::PI * (k * x) as f64 / n as f64))
                .sum();
            prop_assert!((s.values()[k] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn quaternion_axioms(a in quat(), b in quat(), c in quat()) {
        let close = |x: Quaternion, y: Quaternion| (x - y).norm() <= 1e-12 * (1.0 + x.norm());
        prop_assert!(close(qmul(qmul(a, b), c), qmul(a, qmul(b, c))));
        prop_assert!(close(qmul(a, b + c), qmul(a, b) + qmul(a, c)));
        prop_assert!(close(qmul(a, b).conj(), qmul(b.conj(), a.conj())));
        prop_assert!(((qmul(a, b)).norm() - a.norm() * b.norm()).abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn filter_is_exact_on_polynomials(n in 1usize..=8, c in proptest::collection::vec(-1.0f64..1.0, 17)) {
        let f = design_filter(n, FilterBand::ZeroMax).unwrap();
        let deg = 2 * n;
        let s = deg as f64;
        let p = |x: f64| (0..=deg).rev().fold(0.0, |acc, j| acc * (x / s) + c[j]);
        let approx: f64 = f.taps().map(|(k, a)| a * (p(k as f64) - p(-(k as f64)))).sum();
        let scale = (1..=deg).map(|j| j as f64 * c[j].abs()).sum::<f64>() / s;
        prop_assert!((approx - c[1] / s).abs() <= 1e-10 * scale.max(1e-12));
    }
}
