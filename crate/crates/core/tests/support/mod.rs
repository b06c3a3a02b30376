#![allow(dead_code)]
//! Randomized property suites shared by the `properties` and `acceptance`
//! targets. Each suite runs 200 cases from a fresh random seed.

use catsim::analytic::{
    branch_probability_closed_form, entangled_state, project_cavity, variance_terms_rederived,
    variances_numeric, Branch,
};
use catsim::fock::{auto_dim, displacement, expm, squeeze};
use catsim::measures::{axes_for_state, linspace, position_distribution, wigner};
use catsim::model::{
    coherent_amplitude, effective_params, factorized_propagator, SystemParams,
};
use catsim::{DensityOp, ModeSpec, Operator, PureState, C64};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

fn mode(d: usize) -> ModeSpec {
    ModeSpec::new(d).unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Array1<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn density(d: usize) -> impl Strategy<Value = DensityOp> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d * d).prop_map(move |v| {
        let a = Array2::from_shape_vec((d, d), v.into_iter().map(|(x, y)| C64::new(x, y)).collect())
            .unwrap();
        let mut rho = a.dot(&a.t().mapv(|z| z.conj()));
        let tr: C64 = rho.diag().sum();
        rho.mapv_inplace(|z| z / tr);
        // exact Hermitian symmetrization removes rounding asymmetry
        let herm = (&rho + &rho.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        DensityOp::new(herm, vec![mode(d)]).unwrap()
    })
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random squeezed cat: the `+` projection of the entangled state.
fn cat_params() -> impl Strategy<Value = (f64, SystemParams)> {
    cat_params_in(1.5, 4e5)
}

fn cat_params_in(max_ratio: f64, max_g: f64) -> impl Strategy<Value = (f64, SystemParams)> {
    (-max_ratio..max_ratio, 0.0..1.0f64, 1e5..max_g).prop_map(|(ratio, frac, g)| {
        let p = SystemParams {
            g,
            ..SystemParams::bec()
        }
        .with_omega_sw_ratio(ratio);
        let t = frac * effective_params(&p).unwrap().period();
        (t, p)
    })
}

fn cat_state(t: f64, p: &SystemParams) -> Option<PureState> {
    let (joint, _) = auto_dim(40, 400, |m| entangled_state(t, p, m)).ok()?;
    project_cavity(&joint, Branch::Plus).ok().map(|c| c.state)
}

pub const CASES: u32 = 200;

fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn normalizing_constructor_gives_unit_norm() -> Result<(), String> {
    check(complex_vec(24), |v| {
        let s = PureState::new(v, vec![mode(4), mode(6)]).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        Ok(())
    })
}

pub fn coherent_states_are_normalized() -> Result<(), String> {
    check((-3.0..3.0f64, -3.0..3.0f64), |(re, im)| {
        let s = PureState::coherent(C64::new(re, im), mode(60)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        let vac = s.amplitudes()[0].norm();
        prop_assert!((vac - (-(re * re + im * im) / 2.0).exp()).abs() < 1e-10);
        Ok(())
    })
}

pub fn projected_cats_are_normalized() -> Result<(), String> {
    check(cat_params(), |(t, p)| {
        if let Some(s) = cat_state(t, &p) {
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
        Ok(())
    })
}

pub fn branch_probabilities_sum_to_one() -> Result<(), String> {
    check(cat_params(), |(t, p)| {
        let plus = branch_probability_closed_form(t, &p, Branch::Plus).unwrap();
        let minus = branch_probability_closed_form(t, &p, Branch::Minus).unwrap();
        prop_assert!((plus + minus - 1.0).abs() < 1e-10);
        if let Ok((joint, _)) = auto_dim(40, 400, |m| entangled_state(t, &p, m)) {
            if let Ok(cat) = project_cavity(&joint, Branch::Plus) {
                prop_assert!((cat.probability - plus).abs() < 1e-9);
            }
        }
        Ok(())
    })
}

pub fn displacement_and_squeeze_are_unitary() -> Result<(), String> {
    check((-2.5..2.5f64, -2.5..2.5f64, -0.6..0.6f64, -0.6..0.6f64), |(re, im, zr, zi)| {
        let d = displacement(C64::new(re, im), mode(50)).unwrap();
        prop_assert!(d.unitarity_defect() < 1e-10);
        let back = displacement(C64::new(-re, -im), mode(50)).unwrap();
        let prod = d.matrix().dot(back.matrix());
        let id = Operator::identity(&[mode(50)]);
        let inner = 50 - 20;
        let sub = |m: &Array2<C64>| m.slice(ndarray::s![..inner, ..inner]).to_owned();
        prop_assert!(max_diff(&sub(&prod), &sub(id.matrix())) < 1e-10);
        let s = squeeze(C64::new(zr, zi), mode(80)).unwrap();
        prop_assert!(s.unitarity_defect() < 1e-10);
        Ok(())
    })
}

pub fn factorized_propagator_is_unitary() -> Result<(), String> {
    check((-1.0..1.0f64, 0.0..1.0f64, 1e4..2e5f64), |(ratio, frac, g)| {
        let p = SystemParams { g, ..SystemParams::bec() }.with_omega_sw_ratio(ratio);
        let t = frac * effective_params(&p).unwrap().period();
        let u = factorized_propagator(t, &p, &[mode(3), mode(80)]).unwrap();
        prop_assert!(u.to_operator().unitarity_defect() < 1e-9);
        Ok(())
    })
}

pub fn amplitude_is_periodic() -> Result<(), String> {
    check((-1.9..1.9f64, 0.0..1e-4f64), |(ratio, t)| {
        let p = SystemParams::bec().with_omega_sw_ratio(ratio);
        let e = effective_params(&p).unwrap();
        let a = coherent_amplitude(t, &e).norm();
        let b = coherent_amplitude(t + e.period(), &e).norm();
        prop_assert!((a - b).abs() < 1e-10);
        Ok(())
    })
}

pub fn expm_inverts_and_differentiates() -> Result<(), String> {
    check((complex_vec(36), 0.1..5.0f64), |(v, scale)| {
        let a = Array2::from_shape_vec((6, 6), v.to_vec()).unwrap();
        let h = (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let norm = h.iter().map(|z| z.norm()).fold(0.0, f64::max) * 6.0;
        let gen = h.mapv(|z| z * C64::new(0.0, scale / norm));
        let prod = expm(&gen).dot(&expm(&gen.mapv(|z| -z)));
        prop_assert!(max_diff(&prod, &Array2::eye(6)) < 1e-10);
        let unit = a.mapv(|z| z / norm);
        let eps = 1e-4;
        let fd = (expm(&unit.mapv(|z| z * eps)) - expm(&unit.mapv(|z| z * -eps)))
            .mapv(|z| z / (2.0 * eps));
        prop_assert!(max_diff(&fd, &unit) < 1e-6);
        Ok(())
    })
}

pub fn partial_trace_recovers_factors() -> Result<(), String> {
    check((density(3), density(4)), |(ra, rb)| {
        let joint = ra.tensor(&rb);
        let a = joint.partial_trace(0).unwrap();
        let b = joint.partial_trace(1).unwrap();
        prop_assert!(max_diff(a.matrix(), ra.matrix()) < 1e-12);
        prop_assert!(max_diff(b.matrix(), rb.matrix()) < 1e-12);
        prop_assert!((a.trace() - joint.trace()).abs() < 1e-12);
        Ok(())
    })
}

pub fn wigner_is_linear_in_the_state() -> Result<(), String> {
    check((density(8), density(8), 0.0..1.0f64), |(r1, r2, p)| {
        let ax = linspace(-3.0, 3.0, 15);
        let mix = r1.mix(&r2, p).unwrap();
        let w = wigner(&mix, &ax, &ax).unwrap();
        let w1 = wigner(&r1, &ax, &ax).unwrap();
        let w2 = wigner(&r2, &ax, &ax).unwrap();
        let expect = &w1.values * p + &w2.values * (1.0 - p);
        let err = (&w.values - &expect).iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
        Ok(())
    })
}

pub fn wigner_marginal_and_moments_match_the_state() -> Result<(), String> {
    check(cat_params_in(1.0, 3e5), |(t, p)| {
        let Some(s) = cat_state(t, &p) else { return Ok(()) };
        let ((x0, x1), (y0, y1)) = axes_for_state(&s, 6.0, ((-3.0, 6.0), (-4.0, 4.0))).unwrap();
        let ax = linspace(x0, x1, 71);
        let ay = linspace(y0, y1, 81);
        let w = wigner(&s.to_density(), &ax, &ay).unwrap();
        let marginal = w.marginal_x();
        let exact = position_distribution(&s, &ax).unwrap();
        let l1: f64 = marginal.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() * w.dx();
        prop_assert!(l1 < 0.02, "L1 distance {l1}");
        let m = w.moments();
        let v = variances_numeric(&s).unwrap();
        prop_assert!((m.var_x / v.var_x - 1.0).abs() < 0.01, "{} vs {}", m.var_x, v.var_x);
        prop_assert!((m.var_y / v.var_y - 1.0).abs() < 0.01, "{} vs {}", m.var_y, v.var_y);
        Ok(())
    })
}

pub fn heisenberg_bound_for_random_states() -> Result<(), String> {
    check(complex_vec(8), |v| {
        // support well below the truncation, so X and Y act exactly
        let mut amps = Array1::zeros(14);
        amps.slice_mut(ndarray::s![..8]).assign(&v);
        let s = PureState::new(amps, vec![mode(14)]).unwrap();
        let r = variances_numeric(&s).unwrap();
        prop_assert!(r.uncertainty_product() >= 1.0 / 16.0 - 1e-9);
        Ok(())
    })
}

pub fn heisenberg_bound_for_cats() -> Result<(), String> {
    check(cat_params(), |(t, p)| {
        let Some(s) = cat_state(t, &p) else { return Ok(()) };
        let r = variances_numeric(&s).unwrap();
        prop_assert!(r.var_x > 0.0 && r.var_y > 0.0);
        prop_assert!(r.uncertainty_product() >= 1.0 / 16.0 - 1e-9);
        let closed = variance_terms_rederived(t, &p).unwrap();
        prop_assert!((closed.var_x() - r.var_x).abs() < 1e-6);
        prop_assert!((closed.var_y() - r.var_y).abs() < 1e-6);
        Ok(())
    })
}

pub fn wigner_grid_is_bit_stable() -> Result<(), String> {
    check(density(10), |r| {
        let ax = linspace(-2.0, 2.0, 9);
        let a = wigner(&r, &ax, &ax).unwrap();
        let b = wigner(&r, &ax, &ax).unwrap();
        prop_assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        Ok(())
    })
}

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("normalizing_constructor_gives_unit_norm", normalizing_constructor_gives_unit_norm),
    ("coherent_states_are_normalized", coherent_states_are_normalized),
    ("projected_cats_are_normalized", projected_cats_are_normalized),
    ("branch_probabilities_sum_to_one", branch_probabilities_sum_to_one),
    ("displacement_and_squeeze_are_unitary", displacement_and_squeeze_are_unitary),
    ("factorized_propagator_is_unitary", factorized_propagator_is_unitary),
    ("amplitude_is_periodic", amplitude_is_periodic),
    ("expm_inverts_and_differentiates", expm_inverts_and_differentiates),
    ("partial_trace_recovers_factors", partial_trace_recovers_factors),
    ("wigner_is_linear_in_the_state", wigner_is_linear_in_the_state),
    ("wigner_marginal_and_moments_match_the_state", wigner_marginal_and_moments_match_the_state),
    ("heisenberg_bound_for_random_states", heisenberg_bound_for_random_states),
    ("heisenberg_bound_for_cats", heisenberg_bound_for_cats),
    ("wigner_grid_is_bit_stable", wigner_grid_is_bit_stable),
];
