use endcalc::geometry::laplacian::laplacian_symbols;
use endcalc::geometry::{hyperbolic_distance, verify_warp_conditions, MeasureTag, MetricModel, WarpFunction, Which};
use endcalc::symbol::coeff::AtomValues;
use endcalc::symbol::{apply_dw, sharp, Coeff, Mono, Polynomial, Rules, Symbol};
use num_complex::Complex64;
use proptest::prelude::*;

fn unit(a: f64, b: f64) -> [f64; 3] {
    [a.sin() * b.cos(), a.sin() * b.sin(), a.cos()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hyperbolic_triangle_inequality(
        r in prop::array::uniform3(0.0f64..8.0),
        a in prop::array::uniform3(0.0f64..std::f64::consts::PI),
        b in prop::array::uniform3(0.0f64..std::f64::consts::TAU),
    ) {
        let p: Vec<[f64; 3]> = (0..3).map(|i| unit(a[i], b[i])).collect();
        let d = |i: usize, j: usize| hyperbolic_distance(r[i], &p[i], r[j], &p[j]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-10);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 1) <= r[0] + r[1] + 1e-10);
    }

    #[test]
    fn density_ratio_is_warp_power(r in 0.5f64..30.0, th in 0.0f64..6.3) {
        for warp in [WarpFunction::hyperbolic(), WarpFunction::conical(), WarpFunction::cylindrical()] {
            let m = MetricModel::new(2, warp);
            let ratio = MeasureTag::DgTilde.density(&m, r, &[th]) / MeasureTag::Dg.density(&m, r, &[th]);
            let w = m.warp.eval(r);
            prop_assert!((ratio - w).abs() <= 1e-15 * w.max(1.0));
        }
    }

    #[test]
    fn principal_symbol_at_rescaled_momentum(r in 0.5f64..20.0, rho in -5.0f64..5.0, eta in -5.0f64..5.0) {
        for warp in [WarpFunction::hyperbolic(), WarpFunction::conical()] {
            let m = MetricModel::new(2, warp);
            let l = laplacian_symbols(&m, Which::Plain).unwrap();
            for (mono, _) in l.p2.terms() {
                prop_assert_eq!(mono.degree(), 2);
            }
            let mut atoms = Default::default();
            l.p2.atoms(&mut atoms);
            let w = m.warp.eval(r);
            let v = l.p2.at(&AtomValues::new(&m, &atoms, r, &[0.0]).unwrap()).eval_real(rho, &[w * eta]);
            prop_assert_eq!(v.re, rho * rho + (w * eta) * (w * eta));
        }
    }

    #[test]
    fn zeroth_composition_is_product(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, j in 0u8..3, a in 0u8..3) {
        let g = Rules::generic();
        let pa = Polynomial::term(Mono { j, alpha: [a, 0, 0] }, Coeff::constant(c1).mul(&Coeff::w_pow(2)));
        let pb = Polynomial::term(Mono { j: a, alpha: [j, 0, 0] }, Coeff::constant(c2));
        let sa = Symbol::polynomial(2, (j + a) as i32, pa.clone());
        let sb = Symbol::polynomial(2, (j + a) as i32, pb.clone());
        prop_assert_eq!(sharp(&sa, &sb, 0, &g).unwrap().poly, pa.mul(&pb));
    }

    #[test]
    fn twisted_derivative_reduces_to_d_r_on_flat_warp(c in -2.0f64..2.0, j in 0u8..3, a in 0u8..3) {
        let rules = Rules::for_model(&MetricModel::new(2, WarpFunction::cylindrical()));
        let b = Symbol::polynomial(2, 2, Polynomial::term(Mono { j, alpha: [a, 0, 0] }, Coeff::constant(c)));
        prop_assert!(apply_dw(&b, 2, &rules).is_zero());
    }
}

#[test]
fn builtin_warp_constants_do_not_drift() {
    for (warp, a) in [(WarpFunction::cylindrical(), 0.0), (WarpFunction::hyperbolic(), 0.0), (WarpFunction::conical(), 1.0)] {
        let mut consts = Vec::new();
        for b in [50.0, 100.0, 200.0] {
            let rep = verify_warp_conditions(&warp, (a, b), 2001, 1e-6, 3).unwrap();
            assert!(rep.pass, "{rep:?}");
            consts.push(rep.checks.iter().map(|c| c.constant).collect::<Vec<_>>());
        }
        for c in &consts[1..] {
            for (x, y) in c.iter().zip(&consts[0]) {
                // sampled sup: the grid spacing grows with the endpoint
                assert!((x - y).abs() <= 0.02 * y.abs().max(1.0), "{warp:?}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn twisted_derivative_of_eta_times_coefficient() {
    // D_w(η c(r)) = η D_r c + (w'/w) η c · (-i)
    let g = Rules::generic();
    let c = Coeff::atom(endcalc::symbol::Atom::Warp { k: 2 }).reduced(&g);
    let b = Symbol::polynomial(2, 1, Polynomial::term(Mono::eta(0, 1), c.clone()));
    let got = apply_dw(&b, 1, &g);
    let mi = Complex64::new(0.0, -1.0);
    let expect = c.d_r(&g).scale(mi).add(&Coeff::atom(endcalc::symbol::Atom::LOG).mul(&c).scale(mi));
    assert_eq!(got.poly, Polynomial::term(Mono::eta(0, 1), expect.reduced(&g)));
}
