mod common;

use proptest::prelude::*;

use common::*;
use qmx_core::calculus::{compose_derivative, DerivativeJet, MultiIndex};
use qmx_core::grid::{BoundaryMode, FieldState, GridSpec};
use qmx_core::initial_data::{compute_jet, DataBundle};
use qmx_core::material::{KerrLaw, StateDomain};

fn random_poly(coeffs: &[f64]) -> Poly {
    let mut p = Poly::default();
    for (k, c) in monomials().into_iter().zip(coeffs) {
        p.0.insert(k, *c);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn composition_matches_taylor_arithmetic(
        coeffs in prop::collection::vec(-0.5f64..0.5, 6 * 35),
        x in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let n = monomials().len();
        let v: [Poly; 6] = std::array::from_fn(|c| random_poly(&coeffs[c * n..(c + 1) * n]));
        let weight = PolyKerr::default_weight();
        let law = PolyKerr::new(weight.clone());
        let jet = DerivativeJet::from_fn(vec![x], 3, |g, x| {
            std::array::from_fn(|c| v[c].derivative(g.0).eval([0.0, x[0], x[1], x[2]]))
        });
        let taylor = composed_taylor(&weight, &v, [0.0, x[0], x[1], x[2]]);
        for alpha in MultiIndex::all_up_to(3) {
            let got = compose_derivative(&law, &jet, alpha).unwrap();
            for c in 0..6 {
                let want = taylor[c].coeff(alpha.0) * multi_factorial(alpha.0);
                prop_assert!((got[0][c] - want).abs() <= 1e-10 * want.abs().max(1.0), "alpha {:?} c {}", alpha, c);
            }
        }
    }
}

#[test]
fn uniform_kerr_jet_matches_series_arithmetic() {
    let grid = GridSpec::cube(4, 1.0, [BoundaryMode::Periodic; 3]).unwrap();
    let law = KerrLaw::new(0.9, 0.6, StateDomain::All).unwrap();
    let u0 = FieldState::uniform(grid, 0.0, [0.7, -0.2, 0.4, 0.1, 0.0, -0.3]);
    let bundle = DataBundle::homogeneous(u0.clone());
    let jet = compute_jet(&law, &bundle, 4).unwrap();
    let series = kerr_series(&grid, 0.9, 0.6, &u0.values, &vec![vec![[0.0; 6]; grid.node_count()]; 3], 3);
    let mut fact = 1.0;
    for (p, s) in series.iter().enumerate() {
        if p > 0 {
            fact *= p as f64;
        }
        let got = &jet.entries[p].values;
        let want: Vec<_> = s.iter().map(|v| v.map(|c| c * fact)).collect();
        assert!(rel_error(got, &want, 1e-12) < 1e-10, "order {p}");
    }
}
