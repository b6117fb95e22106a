use std::f64::consts::PI;

use sdlab::constants::{semidispersing_sigma2, ChannelTerm};
use sdlab::experiment::lorentz_case1_table;
use sdlab::geometry::{Curvature, PhaseVec};
use sdlab::induced::measure_m_closed_form;
use sdlab::observables::{integrate_on_ranges, ObservableSpec};

#[test]
fn case1_constant_for_unit_observable() {
    let t = lorentz_case1_table(0.5).unwrap();
    let f = ObservableSpec::Constant { value: 1.0 }.instantiate(&t).unwrap();
    let terms: Vec<ChannelTerm> = t
        .channels()
        .iter()
        .map(|c| ChannelTerm {
            integral: integrate_on_ranges(&f, &c.ranges, c.angle),
            a_len: c.measure(),
            flight: c.flight_length,
        })
        .collect();
    let d = semidispersing_sigma2(&terms, t.perimeter()).unwrap();
    // the corridor between the central disk and the top wall: |A| = 2 * 0.5, I = 2
    let perimeter = 6.0 + 1.5 * PI;
    let expected = 1.0 / (4.0 * 2.0 * perimeter);
    assert!((d.sigma2_induced - expected).abs() < 1e-12);
    assert!((measure_m_closed_form(&t).unwrap() - 1.5 * PI / perimeter).abs() < 1e-12);
}

// All scatterer centres of the unfolded layout satisfy x + y = x - y = 0 mod 2,
// so the lines y = 1 +- x stay 1/sqrt 2 > 0.5 away from every centre.
#[test]
fn case1_layout_has_diagonal_corridors() {
    let t = lorentz_case1_table(0.5).unwrap();
    let p = t.perimeter();
    let r0 = (0..200_000)
        .map(|k| p * k as f64 / 200_000.0)
        .min_by(|a, b| {
            let d = |r: f64| {
                let q = t.position(r);
                q.x.abs() + (q.y - 1.0).abs()
            };
            d(*a).total_cmp(&d(*b))
        })
        .unwrap();
    let q = t.position(r0);
    let (piece, s) = t.locate(r0);
    let r = t.piece_offset(piece) + s + (1.0 - q.y) * if t.position(r0 + 1e-6).y > q.y { 1.0 } else { -1.0 };
    assert!(t.position(r).x.abs() < 1e-9 && (t.position(r).y - 1.0).abs() < 1e-9);
    for phi in [PI / 4.0, -PI / 4.0] {
        let mut x = PhaseVec::new(r, phi);
        for _ in 0..200 {
            let c = t.step(x).unwrap();
            assert_ne!(t.pieces()[c.piece].curvature(), Curvature::Dispersing);
            assert!((c.state.phi.abs() - PI / 4.0).abs() < 1e-9);
            x = c.state;
        }
    }
}
