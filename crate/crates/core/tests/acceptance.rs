//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that is not listed as a known truncation
//! limit.

mod support;

use catsim::analytic::{
    concurrence_analytic, entangled_state, ideal_cat, optical_state_at_tau, project_cavity,
    variance_discrepancy, variance_terms_rederived, variances_closed_form, variances_numeric,
    Branch, CatKind,
};
use catsim::dynamics::{
    conditional_mechanical_state, evolve_coherent_cavity, evolve_lindblad, EvolutionRequest, Method,
};
use catsim::fock::auto_dim;
use catsim::measures::{
    axes_for_density, concurrence_numeric, fidelity, linspace, profile_maxima,
    wigner, wigner_line, WignerGrid,
};
use catsim::model::{
    coherent_amplitude, direct_propagator, effective_params, evolve_block_direct,
    factorized_propagator_guarded, BlockGuard, SystemParams,
};
use catsim::{DensityOp, ModeSpec, PureState, Result, C64};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Value of `ω_sw/ω_b` at which `|α(π/ω_b)|` first reaches five times its
/// `ω_sw = 0` value on the way to `−2ω_b`.
const FIVEFOLD_RATIO: f64 = -1.968_68;

/// Negativity-volume ratio of the lossy (`κ_a = 10⁵`) to the lossless
/// conditional cat on the default widened grid.
const LOSSY_NEGATIVITY_RATIO: f64 = 0.1913;

const MECH_BASE: ((f64, f64), (f64, f64)) = ((-3.0, 6.0), (-4.0, 4.0));

struct Outcome {
    id: &'static str,
    pass: bool,
    known_limit: bool,
    detail: String,
}

impl Outcome {
    fn new(id: &'static str, pass: bool, detail: String) -> Self {
        Self {
            id,
            pass,
            known_limit: false,
            detail,
        }
    }
}

fn mode(d: usize) -> ModeSpec {
    ModeSpec::new(d).unwrap()
}

fn mech_grid(rho: &DensityOp) -> Result<WignerGrid> {
    let ((x0, x1), (y0, y1)) = axes_for_density(rho, 4.0, MECH_BASE)?;
    wigner(rho, &linspace(x0, x1, 121), &linspace(y0, y1, 121))
}

fn mech_cat(t: f64, p: &SystemParams) -> Result<PureState> {
    let (joint, _) = auto_dim(60, 4000, |m| entangled_state(t, p, m))?;
    Ok(project_cavity(&joint, Branch::Plus)?.state)
}

/// Evolves `psi` block by block with the exact generator restricted to each
/// photon-number subspace.
fn evolve_blockwise(p: &SystemParams, psi: &PureState, t: f64) -> Result<PureState> {
    let dims = psi.dims().to_vec();
    let db = dims[1].dim();
    let mut out = Array1::<C64>::zeros(psi.dim());
    for n in 0..dims[0].dim() {
        let block = psi.amplitudes().slice(ndarray::s![n * db..(n + 1) * db]).to_owned();
        if block.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let evolved = evolve_block_direct(p, n, &block, t)?;
        out.slice_mut(ndarray::s![n * db..(n + 1) * db]).assign(&evolved);
    }
    PureState::new(out, dims)
}

fn random_low_state(rng: &mut ChaCha8Rng, dims: &[ModeSpec]) -> PureState {
    let db = dims[1].dim();
    let mut amps = Array1::<C64>::zeros(dims[0].dim() * db);
    for n in 0..3 {
        for m in 0..5 {
            amps[n * db + m] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    PureState::new(amps, dims.to_vec()).unwrap()
}

fn criterion_1() -> Vec<Outcome> {
    let start = Instant::now();
    let dims = [mode(3), mode(60)];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states: Vec<PureState> = (0..3).map(|_| random_low_state(&mut rng, &dims)).collect();
    let mut out = Vec::new();
    let mut infeasible = Vec::new();
    for ratio in [-0.71, 0.0, 0.5, 1.0, 1.8] {
        let p = SystemParams::optical().with_omega_sw_ratio(ratio);
        let period = effective_params(&p).unwrap().period();
        let mut worst = 0.0f64;
        let mut guard_error = None;
        for t in linspace(0.0, period, 20) {
            let direct = direct_propagator(t, &p, &dims).unwrap();
            for psi in &states {
                let fac = factorized_propagator_guarded(t, &p, &dims, &BlockGuard::populated(psi))
                    .and_then(|u| u.apply(psi));
                let fac = match fac {
                    Ok(f) => f,
                    Err(e) => {
                        guard_error.get_or_insert(e.to_string());
                        factorized_propagator_guarded(t, &p, &dims, &BlockGuard::None)
                            .unwrap()
                            .apply_unchecked(psi)
                    }
                };
                let dir = direct.apply(psi).unwrap();
                worst = worst.max(1.0 - fidelity(&fac, &dir).unwrap());
            }
        }
        let pass = worst <= 1e-6 && guard_error.is_none();
        let mut detail = format!("ω_sw/ω_b = {ratio}, dims (3, 60): max infidelity {worst:.3e}");
        if let Some(e) = &guard_error {
            detail.push_str(&format!("; truncation guard: {e}"));
            infeasible.push(ratio);
        }
        out.push(Outcome {
            known_limit: guard_error.is_some(),
            ..Outcome::new("1", pass, detail)
        });
    }
    let elapsed = start.elapsed().as_secs_f64();
    out.push(Outcome::new(
        "1",
        elapsed < 60.0,
        format!("runtime at dims (3, 60): {elapsed:.1} s (limit 60 s)"),
    ));
    // Ratios whose squeezing does not fit in 60 levels are re-run in one
    // mechanical truncation that passes the guards at every sample time:
    // the direct evolution passes through the squeezing of every
    // intermediate time, so the endpoint alone does not size it.
    for ratio in infeasible {
        let p = SystemParams::optical().with_omega_sw_ratio(ratio);
        let times = linspace(0.0, effective_params(&p).unwrap().period(), 20);
        let mut seed = ChaCha8Rng::seed_from_u64(100);
        let dim = times
            .iter()
            .map(|&t| {
                auto_dim(60, 1000, |m| {
                    let dims = [mode(3), m];
                    let psi = random_low_state(&mut seed.clone(), &dims);
                    factorized_propagator_guarded(t, &p, &dims, &BlockGuard::populated(&psi))?.apply(&psi)
                })
                .unwrap()
                .1
                .dim()
            })
            .max()
            .unwrap();
        let dims = [mode(3), mode(dim)];
        let states: Vec<PureState> = (0..3).map(|_| random_low_state(&mut seed, &dims)).collect();
        let mut worst = 0.0f64;
        for &t in &times {
            let u = factorized_propagator_guarded(t, &p, &dims, &BlockGuard::All).unwrap();
            for psi in &states {
                let fac = u.apply(psi).unwrap();
                let dir = evolve_blockwise(&p, psi, t).unwrap();
                worst = worst.max(1.0 - fidelity(&fac, &dir).unwrap());
            }
        }
        out.push(Outcome::new(
            "1",
            worst <= 1e-6,
            format!(
                "ω_sw/ω_b = {ratio}, dims (3, {dim}) sized by the truncation guards over the whole period: max infidelity {worst:.3e}"
            ),
        ));
    }
    out
}

fn max_amplitude(p: &SystemParams) -> f64 {
    let e = effective_params(p).unwrap();
    linspace(0.0, e.period(), 4001)
        .into_iter()
        .map(|t| coherent_amplitude(t, &e).norm())
        .fold(0.0, f64::max)
}

fn criterion_2() -> Vec<Outcome> {
    let bec = max_amplitude(&SystemParams::bec());
    let expect = 2f64.sqrt() * 6e5 / 2e5;
    let solid = max_amplitude(&SystemParams::solid_state());
    vec![
        Outcome::new(
            "2",
            (bec - expect).abs() <= 1e-6,
            format!("BEC max |α| = {bec:.10} (expected {expect:.10})"),
        ),
        Outcome::new(
            "2",
            (solid / 1.414e-3 - 1.0).abs() < 1e-3,
            format!("solid-state max |α| = {solid:.6e} (expected 1.414e-3)"),
        ),
    ]
}

fn amplitude_at_half_period(ratio: f64) -> f64 {
    let p = SystemParams::bec().with_omega_sw_ratio(ratio);
    coherent_amplitude(PI / p.omega_b, &effective_params(&p).unwrap()).norm()
}

fn criterion_3() -> Vec<Outcome> {
    let base = amplitude_at_half_period(0.0);
    let ratios: Vec<f64> = (0..2000).map(|k| -(k as f64) * 1e-3).collect();
    let last = *ratios
        .iter()
        .filter(|r| SystemParams::bec().with_omega_sw_ratio(**r).validate().is_ok())
        .last()
        .unwrap();
    let edge = amplitude_at_half_period(last) / base;
    let rejected = SystemParams::bec().with_omega_sw_ratio(-2.0).validate().is_err();
    // bisection for the first fivefold point
    let (mut lo, mut hi) = (last, 0.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if amplitude_at_half_period(mid) / base >= 5.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = 0.5 * (lo + hi);
    vec![
        Outcome::new(
            "3",
            edge > 5.0 && rejected,
            format!(
                "|α(π/ω_b)| at ω_sw/ω_b = {last} is {edge:.3}× the ω_sw = 0 value; ω_sw = −2ω_b rejected: {rejected}"
            ),
        ),
        Outcome::new(
            "3",
            (crossing - FIVEFOLD_RATIO).abs() < 1e-5,
            format!("fivefold first reached at ω_sw/ω_b = {crossing:.6} (recorded {FIVEFOLD_RATIO})"),
        ),
    ]
}

fn criterion_4() -> Vec<Outcome> {
    let p = SystemParams::bec().with_omega_sw_ratio(1.0);
    let period = effective_params(&p).unwrap().period();
    let zeros: Vec<f64> = (1..=3)
        .map(|n| concurrence_analytic(n as f64 * period, &p).unwrap().abs())
        .collect();
    let zero_max = zeros.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for t in linspace(0.0, period, 50) {
        let (state, _) = auto_dim(60, 600, |m| entangled_state(t, &p, m)).unwrap();
        let c = concurrence_numeric(&state).unwrap();
        worst = worst.max((c - concurrence_analytic(t, &p).unwrap()).abs());
    }
    let mid = concurrence_analytic(period / 2.0, &p).unwrap();
    vec![
        Outcome::new(
            "4",
            zero_max < 1e-8,
            format!("|C(2nπ/ω_s)| for n = 1..3: max {zero_max:.3e}"),
        ),
        Outcome::new(
            "4",
            worst <= 1e-9,
            format!("analytic vs purity oracle over 50 times: max difference {worst:.3e}"),
        ),
        Outcome::new("4", mid > 0.999, format!("mid-period C = {mid:.12}")),
    ]
}

fn numeric_variances(ratio: f64) -> (f64, f64) {
    let p = SystemParams::bec().with_omega_sw_ratio(ratio);
    let v = variances_numeric(&mech_cat(PI / p.omega_b, &p).unwrap()).unwrap();
    (v.var_x, v.var_y)
}

fn crossing(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    if fa.signum() == f(b).signum() {
        return None;
    }
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn show(c: Option<f64>) -> String {
    c.map_or("none in bracket".into(), |c| format!("{c:.4}"))
}

fn criterion_5() -> Vec<Outcome> {
    let cy = crossing(0.2, 0.6, |r| numeric_variances(r).1 - 0.25);
    let cx = crossing(1.5, 1.9, |r| numeric_variances(r).0 - 0.25);
    let mut out = vec![
        Outcome::new(
            "5",
            cy.is_some_and(|c| (c - 0.37).abs() <= 0.02),
            format!("var_y crosses 1/4 at ω_sw/ω_b = {} (target 0.37 ± 0.02)", show(cy)),
        ),
        Outcome::new(
            "5",
            cx.is_some_and(|c| (c - 1.78).abs() <= 0.02),
            format!("var_x crosses 1/4 at ω_sw/ω_b = {} (target 1.78 ± 0.02)", show(cx)),
        ),
    ];
    let (mut worst_x, mut worst_y, mut worst_template) = (0.0f64, 0.0f64, 0.0f64);
    let mut report = None;
    for ratio in linspace(-1.9, 1.9, 39) {
        let p = SystemParams::bec().with_omega_sw_ratio(ratio);
        let t = PI / p.omega_b;
        let numeric = variances_numeric(&mech_cat(t, &p).unwrap()).unwrap();
        let printed = variances_closed_form(t, &p).unwrap();
        let template = variance_terms_rederived(t, &p).unwrap();
        worst_x = worst_x.max((printed.var_x - numeric.var_x).abs());
        worst_y = worst_y.max((printed.var_y - numeric.var_y).abs());
        worst_template = worst_template
            .max((template.var_x() - numeric.var_x).abs())
            .max((template.var_y() - numeric.var_y).abs());
        let d = variance_discrepancy(t, &p, Some(numeric), 1e-6).unwrap();
        if !d.is_clean() && report.is_none() {
            report = Some((ratio, d));
        }
    }
    out.push(Outcome::new(
        "5",
        worst_x <= 1e-6,
        format!("printed closed-form var_x vs numeric on [−1.9, 1.9]: max difference {worst_x:.3e}"),
    ));
    out.push(Outcome::new(
        "5",
        worst_template <= 1e-6,
        format!(
            "closed form with the corrected var_y term vs numeric: max difference {worst_template:.3e}; \
             printed var_y differs by up to {worst_y:.3e}"
        ),
    ));
    if let Some((ratio, d)) = report {
        println!("      per-term discrepancy report at ω_sw/ω_b = {ratio:.2}:");
        for line in d.to_string().lines() {
            println!("        {line}");
        }
    }
    out
}

fn criterion_6(lossy: &[(f64, WignerGrid)]) -> Vec<Outcome> {
    let mut out = Vec::new();
    let vac = PureState::vacuum(mode(20)).to_density();
    let w = wigner(&vac, &linspace(-3.0, 6.0, 121), &linspace(-4.0, 4.0, 121)).unwrap();
    let (ax, ay) = w.argmax();
    out.push(Outcome::new(
        "6",
        (w.max() - 2.0 / PI).abs() <= 1e-6 && ax.abs() < 1e-12 && ay.abs() < 1e-12,
        format!("vacuum max {:.12} at ({ax:.3}, {ay:.3}); 2/π = {:.12}", w.max(), 2.0 / PI),
    ));

    let mut integrals = Vec::new();
    let bec = SystemParams::bec();
    let t = PI / bec.omega_b;
    let cat = mech_cat(t, &bec).unwrap();
    let grid = mech_grid(&cat.to_density()).unwrap();
    integrals.push(("mechanical ω_sw = 0".to_string(), grid.integral()));

    let alpha = coherent_amplitude(t, &effective_params(&bec).unwrap());
    let u = alpha / alpha.norm();
    let a = (-2.0 * u.re, -2.0 * u.im);
    let b = (alpha.re + 2.0 * u.re, alpha.im + 2.0 * u.im);
    let profile = wigner_line(&cat.to_density(), a, b, 801).unwrap();
    let peaks = profile_maxima(&profile, 0.1);
    out.push(Outcome::new(
        "6",
        peaks.len() == 2 && grid.min() < -0.05,
        format!(
            "ω_sw = 0 cat: {} maxima above 0.1 along the line through the components (values {:?}); min W = {:.4}",
            peaks.len(),
            peaks.iter().map(|(_, w)| format!("{w:.3}")).collect::<Vec<_>>(),
            grid.min()
        ),
    ));

    let solid = SystemParams::solid_state();
    let cat = mech_cat(PI / solid.omega_b, &solid).unwrap();
    let grid = mech_grid(&cat.to_density()).unwrap();
    integrals.push(("mechanical solid-state".to_string(), grid.integral()));
    let maxima = grid.local_maxima(0.1);
    out.push(Outcome::new(
        "6",
        maxima.len() == 1,
        format!("solid-state cat: {} local maxima above 0.1", maxima.len()),
    ));

    let sq = SystemParams::bec().with_omega_sw_ratio(1.8);
    let cat = mech_cat(PI / sq.omega_b, &sq).unwrap();
    integrals.push((
        "mechanical ω_sw = 1.8ω_b".to_string(),
        mech_grid(&cat.to_density()).unwrap().integral(),
    ));

    for (kappa, grid) in lossy {
        integrals.push((format!("lossy κ_a = {kappa:e}"), grid.integral()));
    }
    let ax = linspace(-4.0, 4.0, 161);
    for kind in CatKind::ALL {
        let cat = ideal_cat(kind, C64::new(2.0, 0.0), mode(30)).unwrap();
        let g = wigner(&cat.to_density(), &ax, &ax).unwrap();
        integrals.push((format!("optical {kind}"), g.integral()));
        let p = SystemParams::optical().with_omega_sw_ratio(kind.omega_sw_ratio());
        let phi = optical_state_at_tau(&p, C64::new(2.0, 0.0), mode(30)).unwrap();
        let g = wigner(&phi.to_density(), &ax, &ax).unwrap();
        integrals.push((format!("optical at τ ({kind})"), g.integral()));
    }
    for (name, integral) in integrals {
        out.push(Outcome::new(
            "6",
            (integral - 1.0).abs() <= 0.02,
            format!("grid integral {name}: {integral:.6}"),
        ));
    }
    out
}

fn criterion_7() -> (Vec<Outcome>, Vec<(f64, WignerGrid)>) {
    let start = Instant::now();
    let dims = vec![mode(3), mode(60)];
    let mut amps = Array1::<C64>::zeros(180);
    amps[0] = C64::new(1.0, 0.0);
    amps[60] = C64::new(1.0, 0.0);
    let init = PureState::new(amps, dims).unwrap();
    let mut out = Vec::new();
    let mut grids = Vec::new();
    for kappa in [0.0, 1e5] {
        let p = SystemParams::bec().with_kappa(kappa);
        let t = PI / p.omega_b;
        let times = linspace(0.0, t, 11)[1..].to_vec();
        let traj = evolve_lindblad(&EvolutionRequest::new(init.clone(), p, times, Method::Lindblad))
            .map_err(|f| f.error)
            .unwrap();
        let drift = traj.max_trace_drift();
        let herm = traj.max_hermiticity_defect();
        out.push(Outcome::new(
            "7",
            drift < 1e-8 && herm < 1e-10,
            format!(
                "κ_a = {kappa:e}: trace drift {drift:.3e}, Hermiticity defect {herm:.3e} over {} samples ({} steps)",
                traj.samples.len(),
                traj.steps
            ),
        ));
        let cond = conditional_mechanical_state(traj.final_state().unwrap(), Branch::Plus).unwrap();
        grids.push((kappa, mech_grid(&cond.state).unwrap()));
    }
    // both grids on the lossless state's box, so volumes are comparable
    let lossless = &grids[0].1;
    let (xs, ys) = (lossless.x_axis.clone(), lossless.y_axis.clone());
    let lossy_state = {
        let p = SystemParams::bec().with_kappa(1e5);
        let t = PI / p.omega_b;
        let traj = evolve_lindblad(&EvolutionRequest::new(init, p, vec![t], Method::Lindblad))
            .map_err(|f| f.error)
            .unwrap();
        conditional_mechanical_state(traj.final_state().unwrap(), Branch::Plus)
            .unwrap()
            .state
    };
    let lossy = wigner(&lossy_state, &xs, &ys).unwrap();
    let v0 = lossless.negativity_volume();
    let v1 = lossy.negativity_volume();
    let ratio = v1 / v0;
    out.push(Outcome::new(
        "7",
        ratio <= 0.8,
        format!("negativity volume κ_a = 0: {v0:.6}, κ_a = 1e5: {v1:.6}, ratio {ratio:.4} (≤ 0.8)"),
    ));
    out.push(Outcome::new(
        "7",
        (ratio - LOSSY_NEGATIVITY_RATIO).abs() < 5e-3,
        format!("negativity ratio {ratio:.4} vs recorded {LOSSY_NEGATIVITY_RATIO}"),
    ));
    let elapsed = start.elapsed().as_secs_f64();
    out.push(Outcome::new(
        "7",
        elapsed < 600.0,
        format!("runtime {elapsed:.1} s (limit 600 s)"),
    ));
    grids[1] = (1e5, lossy);
    (out, grids)
}

fn criterion_8() -> Vec<Outcome> {
    let mut out = Vec::new();
    let alpha0 = C64::new(2.0, 0.0);
    let cavity = mode(30);
    for kind in CatKind::ALL {
        let p = SystemParams::optical().with_omega_sw_ratio(kind.omega_sw_ratio());
        let tau = effective_params(&p).unwrap().period();
        let ev = evolve_coherent_cavity(&p, alpha0, tau, cavity).unwrap();
        let closed = optical_state_at_tau(&p, alpha0, cavity).unwrap();
        let ideal = ideal_cat(kind, alpha0, cavity).unwrap();
        let f_closed = fidelity(&closed, &ev.cavity).unwrap();
        let f_ideal = fidelity(&ideal, &ev.cavity).unwrap();
        out.push(Outcome::new(
            "8",
            f_closed >= 1.0 - 1e-6 && f_ideal >= 0.95 && ev.entropy < 1e-4,
            format!(
                "{kind} (ω_sw/ω_b = {}): 1 − F(closed form) = {:.3e}, F(ideal) = {f_ideal:.6}, entropy {:.3e}",
                kind.omega_sw_ratio(),
                1.0 - f_closed,
                ev.entropy
            ),
        ));
    }
    out
}

fn criterion_9() -> Vec<Outcome> {
    let start = Instant::now();
    let mut out = Vec::new();
    for (name, suite) in support::SUITES {
        let result = suite();
        out.push(Outcome::new(
            "9",
            result.is_ok(),
            match result {
                Ok(()) => format!("{name}: {} cases", support::CASES),
                Err(e) => format!("{name}: {e}"),
            },
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    out.push(Outcome::new(
        "9",
        elapsed < 300.0,
        format!("runtime {elapsed:.1} s (limit 300 s)"),
    ));
    out
}

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut all = Vec::new();
    let mut run = |id: &str, f: &dyn Fn() -> Vec<Outcome>| {
        if wanted(id) {
            for o in f() {
                let tag = match (o.pass, o.known_limit) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL (truncation limit)",
                    (false, false) => "FAIL",
                };
                println!("{tag} criterion {}: {}", o.id, o.detail);
                all.push(o);
            }
        }
    };
    run("1", &criterion_1);
    run("2", &criterion_2);
    run("3", &criterion_3);
    run("4", &criterion_4);
    run("5", &criterion_5);
    let lossy = std::cell::RefCell::new(Vec::new());
    run("7", &|| {
        let (o, g) = criterion_7();
        *lossy.borrow_mut() = g;
        o
    });
    run("6", &|| criterion_6(&lossy.borrow()));
    run("8", &criterion_8);
    run("9", &criterion_9);
    let failed = all.iter().filter(|o| !o.pass && !o.known_limit).count();
    let limited = all.iter().filter(|o| !o.pass && o.known_limit).count();
    println!(
        "acceptance: {} checks, {} passed, {failed} failed, {limited} at a truncation limit",
        all.len(),
        all.iter().filter(|o| o.pass).count()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
