mod common;

use ammq_core::grid::time_grid;
use ammq_core::hamiltonian::optimal_delta;
use ammq_core::pide::{solve_pide_mmpp, HamiltonianMode, PideDiagnostics, PideOptions, ThetaGrid, ThetaKind};
use ammq_core::quoting::*;
use ammq_core::riccati::{solve_constant_ab, solve_heston_bates_ab, solve_mmpp_ab, RiccatiOptions};
use ammq_core::surface::SolverDiagnostics;
use ammq_core::*;
use common::*;

/// Surface with constant `A`, `B` over a variance axis.
fn flat_surface(a: f64, b: f64) -> ValueSurface {
    let times = time_grid(1.0, 4);
    let nu = StateGrid1D::new(0.0, 0.1, 3).unwrap();
    let n = times.len() * 3;
    ValueSurface {
        kind: SurfaceKind::HestonBates,
        times,
        axes: vec![nu],
        a: vec![a; n],
        b: vec![b; n],
        diagnostics: SolverDiagnostics::default(),
    }
}

/// `theta = -A y^2 - B y - C` on every line.
fn quadratic_theta(a: f64, b: f64, c: f64) -> ThetaGrid {
    let times = time_grid(1.0, 4);
    let y = StateGrid1D::new(-10.0, 10.0, 41).unwrap();
    let nu = StateGrid1D::new(0.0, 0.1, 3).unwrap();
    let mut values = Vec::new();
    for _ in 0..times.len() * 3 {
        values.extend(y.nodes().iter().map(|v| -a * v * v - b * v - c));
    }
    ThetaGrid {
        kind: ThetaKind::HestonBates,
        times,
        y,
        aux: vec![nu],
        values,
        diagnostics: PideDiagnostics::default(),
    }
}

#[test]
fn zero_coefficients_give_myopic_quotes_for_any_inventory() {
    let curve = desk_curve();
    let s = solve_constant_ab(&risk(0.0, 1.0), &moments(&curve), 0.04, 0.0, &RiccatiOptions::default()).unwrap();
    assert!(s.a.iter().chain(&s.b).all(|v| *v == 0.0));
    let policy = QuotePolicy::from_surface(s, curve.clone());
    for y in [-5.0, 0.0, 3.0] {
        for (k, (d01, d10)) in policy.quotes(0.3, y, &[]).unwrap().into_iter().enumerate() {
            assert_eq!(d01, optimal_delta(curve.side01.a[k], curve.side01.b[k], 0.0).unwrap());
            assert_eq!(d10, optimal_delta(curve.side10.a[k], curve.side10.b[k], 0.0).unwrap());
        }
    }
}

#[test]
fn flat_book_on_a_symmetric_curve_is_symmetric() {
    let curve = DemandCurve::symmetric_single(1.5, 5.0, -0.2, 4.0);
    let (d01, d10) = quote_pair_from_surface(&flat_surface(0.3, 0.0), &curve, 0.5, 0.0, &[0.05], 0).unwrap();
    let expected = optimal_delta(-0.2, 4.0, 0.3 * 1.5).unwrap();
    assert_eq!(d01, d10);
    assert!((d01 - expected).abs() < 1e-14);
}

#[test]
fn inventory_skews_the_two_sides_in_opposite_directions() {
    let curve = desk_curve();
    let policy = QuotePolicy::from_surface(flat_surface(0.2, 0.0), curve);
    let q: Vec<Vec<(f64, f64)>> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&y| policy.quotes(0.0, y, &[0.04]).unwrap())
        .collect();
    for k in 0..3 {
        assert!(q[0][k].0 > q[1][k].0 && q[1][k].0 > q[2][k].0);
        assert!(q[0][k].1 < q[1][k].1 && q[1][k].1 < q[2][k].1);
    }
}

#[test]
fn quadratic_theta_quotes_equal_surface_quotes() {
    let curve = desk_curve();
    let (a, b) = (0.07, -0.3);
    let surf = QuotePolicy::from_surface(flat_surface(a, b), curve.clone());
    let theta = QuotePolicy::from_theta(quadratic_theta(a, b, 1.7), curve);
    for y in [-4.3, -1.0, 0.0, 0.25, 6.0] {
        for t in [0.0, 0.4, 1.0] {
            let x = surf.quotes(t, y, &[0.05]).unwrap();
            let z = theta.quotes(t, y, &[0.05]).unwrap();
            for (p, q) in x.iter().zip(&z) {
                assert!((p.0 - q.0).abs() < 1e-10 && (p.1 - q.1).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn constants_in_theta_do_not_move_quotes() {
    let curve = desk_curve();
    let p = QuotePolicy::from_theta(quadratic_theta(0.1, 0.2, 0.0), curve.clone());
    let q = QuotePolicy::from_theta(quadratic_theta(0.1, 0.2, 123.0), curve);
    let (x, y) = (p.quotes(0.2, 1.5, &[0.0]).unwrap(), q.quotes(0.2, 1.5, &[0.0]).unwrap());
    for (u, v) in x.iter().zip(&y) {
        assert!((u.0 - v.0).abs() < 1e-11 && (u.1 - v.1).abs() < 1e-11);
    }
}

#[test]
fn flat_theta_gives_myopic_quotes() {
    let curve = desk_curve();
    let p = QuotePolicy::from_theta(quadratic_theta(0.0, 0.0, 4.0), curve.clone());
    let m = QuotePolicy::myopic(curve, 1.0);
    assert_eq!(p.quotes(0.5, 2.0, &[0.02]).unwrap(), m.quotes(0.5, 2.0, &[]).unwrap());
}

#[test]
fn theta_quotes_never_extrapolate_in_inventory() {
    let p = QuotePolicy::from_theta(quadratic_theta(0.1, 0.0, 0.0), desk_curve());
    // Largest size is 2, grid ends at 10.
    assert!(p.quotes(0.0, 8.0, &[0.0]).is_ok());
    assert!(matches!(p.quotes(0.0, 8.5, &[0.0]), Err(Error::OutsideGrid { .. })));
}

#[test]
fn auxiliary_state_is_clamped_and_counted_unless_strict() {
    let s = flat_surface(0.1, 0.0);
    let p = QuotePolicy::from_surface(s.clone(), desk_curve());
    assert!(p.quotes(0.0, 0.0, &[0.5]).is_ok());
    assert!(p.quotes(0.0, 0.0, &[0.05]).is_ok());
    assert_eq!(p.clamped_lookups(), 1);
    let strict = QuotePolicy::from_surface(s, desk_curve()).strict();
    assert!(matches!(strict.quotes(0.0, 0.0, &[0.5]), Err(Error::OutsideGrid { .. })));
}

#[test]
fn markup_scale_and_clamp_apply_in_order() {
    let curve = desk_curve();
    let base = QuotePolicy::myopic(curve.clone(), 1.0).quotes(0.0, 0.0, &[]).unwrap();
    let scaled = QuotePolicy::myopic(curve.clone(), 1.0)
        .with_markup_scale(1.5)
        .quotes(0.0, 0.0, &[])
        .unwrap();
    for (b, s) in base.iter().zip(&scaled) {
        assert!((s.0 - 1.5 * b.0).abs() < 1e-15);
    }
    let clamped = QuotePolicy::myopic(curve, 1.0)
        .with_markup_scale(1.5)
        .with_clamp(0.0, 0.1)
        .quotes(0.0, 0.0, &[])
        .unwrap();
    assert!(clamped.iter().all(|q| q.0 <= 0.1 && q.1 <= 0.1));
}

#[test]
fn quote_table_cardinality_order_and_determinism() {
    let curve = desk_curve();
    let s = solve_heston_bates_ab(&heston_bates(), &risk(1.0, 1.0), &curve, None, &RiccatiOptions::default()).unwrap();
    let policy = QuotePolicy::from_surface(s, curve);
    assert!(build_quote_table(&policy, 0.0, &[], &[vec![0.04]]).unwrap().is_empty());
    let rows = build_quote_table(&policy, 0.0, &[-1.0, 1.0], &[vec![0.04]]).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!((rows[0].y, rows[0].side, rows[1].side), (-1.0, Side::ZeroOne, Side::OneZero));
    let render = || {
        let mut buf = Vec::new();
        write_quote_csv(&build_quote_table(&policy, 0.0, &[-1.0, 1.0], &[vec![0.04]]).unwrap(), &mut buf).unwrap();
        buf
    };
    let first = render();
    assert_eq!(first, render());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("t,Y,state1,state2,z,side,delta\n"));
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 7);
}

#[test]
fn theta_and_surface_quotes_agree_for_the_quadratic_equation() {
    let liq = two_level_mmpp(1.0);
    let curve = desk_curve();
    let r = risk(1.0, 1.0);
    let opts = PideOptions {
        mode: HamiltonianMode::Quadratic,
        stored_slices: 4,
        ..Default::default()
    };
    let th = QuotePolicy::from_theta(solve_pide_mmpp(&liq, &r, &curve, 0.2, 0.05, &opts).unwrap(), curve.clone());
    let ab = QuotePolicy::from_surface(
        solve_mmpp_ab(&liq, &r, &curve, 0.2, 0.05, &RiccatiOptions::default()).unwrap(),
        curve,
    );
    for regime in 0..4 {
        for y in [-3.0, 0.0, 2.0] {
            let x = th.quotes(0.0, y, &[regime as f64]).unwrap();
            let z = ab.quotes(0.0, y, &[regime as f64]).unwrap();
            for (p, q) in x.iter().zip(&z) {
                assert!((p.0 - q.0).abs() < 1e-3 && (p.1 - q.1).abs() < 1e-3, "{p:?} vs {q:?}");
            }
        }
    }
}
