//! Scenario implementations. Each one resolves its defaults and validates
//! every override before computing anything.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use catsim::analytic::{
    branch_probability_closed_form, concurrence_analytic, entangled_state, ideal_cat,
    norm_const_closed_form, optical_state_at_tau, project_cavity, variance_terms_printed,
    variance_terms_rederived, variances_numeric, Branch, CatKind,
};
use catsim::dynamics::{
    conditional_mechanical_state, evolve_coherent_cavity, evolve_lindblad, EvolutionRequest,
    Method, Trajectory, LINDBLAD_TOL,
};
use catsim::fock::{auto_dim, displacement_guard, LEAK_TOL};
use catsim::measures::{
    axes_for_density, concurrence_numeric, fidelity, linspace, profile_maxima, wigner,
    wigner_line, wigner_pointwise, WignerGrid, WIGNER_MAX_EXPONENT,
};
use catsim::model::{
    coherent_amplitude, direct_propagator, effective_params, factorized_propagator_guarded,
    BlockGuard, SystemParams,
};
use catsim::{DensityOp, Error, ModeSpec, PureState, C64};
use log::{info, warn};
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::{explicit_params, resolve_params, Overrides, ParamsConfig, Preset, RunConfig, Scenario};
use crate::output::Table;
use crate::CliError;

/// Base phase-space box for mechanical Wigner grids, widened to hold the state.
const MECH_BASE: ((f64, f64), (f64, f64)) = ((-3.0, 6.0), (-4.0, 4.0));
/// Standard deviations of margin around the state when widening.
const AXES_MARGIN: f64 = 4.0;
const MAX_AUTO_DIM: usize = 4000;
/// Height above which a Wigner maximum counts as a peak.
const PEAK_THRESHOLD: f64 = 0.1;
const PROFILE_POINTS: usize = 801;

/// Everything a scenario produces.
#[derive(Debug)]
pub struct Outcome {
    pub params: ParamsConfig,
    pub overrides: Overrides,
    pub tables: Vec<Table>,
    pub tolerances: BTreeMap<String, f64>,
    pub dimensions: BTreeMap<String, usize>,
    pub results: BTreeMap<String, f64>,
    pub failed_checks: Vec<String>,
}

impl Outcome {
    fn new(params: ParamsConfig, overrides: Overrides) -> Self {
        Self {
            params,
            overrides,
            tables: Vec::new(),
            tolerances: BTreeMap::new(),
            dimensions: BTreeMap::new(),
            results: BTreeMap::new(),
            failed_checks: Vec::new(),
        }
    }

    fn result(&mut self, key: impl Into<String>, v: f64) {
        self.results.insert(key.into(), v);
    }

    fn dim(&mut self, key: impl Into<String>, d: usize) {
        self.dimensions.insert(key.into(), d);
    }

    fn tol(&mut self, key: impl Into<String>, v: f64) {
        self.tolerances.insert(key.into(), v);
    }
}

pub fn execute(scenario: Scenario, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let allowed: &[&str] = match scenario {
        Scenario::AmplitudeSweep => &["t_max", "t_points", "time", "sweep", "sweep_points"],
        Scenario::Concurrence => &["t_max", "t_points", "mech_dim"],
        Scenario::MechCat => &["time", "branch", "mech_dim", "grid_x", "grid_y", "grid_points"],
        Scenario::VarianceSweep => &["time", "sweep", "sweep_points", "mech_dim"],
        Scenario::LossyCat => &[
            "time",
            "branch",
            "cavity_dim",
            "mech_dim",
            "samples",
            "tolerance",
            "grid_x",
            "grid_y",
            "grid_points",
        ],
        Scenario::OpticalCat => &[
            "cats",
            "alpha0",
            "cavity_dim",
            "grid_x",
            "grid_y",
            "grid_points",
            "sweep",
            "sweep_points",
        ],
        Scenario::Selfcheck => &["check_scale"],
    };
    check_relevant(&cfg.overrides, scenario, allowed)?;
    match scenario {
        Scenario::AmplitudeSweep => amplitude_sweep(cfg),
        Scenario::Concurrence => concurrence(cfg),
        Scenario::MechCat => mech_cat(cfg),
        Scenario::VarianceSweep => variance_sweep(cfg),
        Scenario::LossyCat => lossy_cat(cfg),
        Scenario::OpticalCat => optical_cat(cfg),
        Scenario::Selfcheck => selfcheck(cfg),
    }
}

// ---------------------------------------------------------------- validation

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_relevant(ov: &Overrides, scenario: Scenario, allowed: &[&str]) -> Result<(), CliError> {
    let set = toml::Table::try_from(ov).map_err(|e| config_err(e.to_string()))?;
    for key in set.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(config_err(format!(
                "override `{key}` does not apply to {scenario} (accepted: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn count(name: &str, v: Option<usize>, default: usize, min: usize) -> Result<usize, CliError> {
    let n = v.unwrap_or(default);
    if n < min {
        return Err(config_err(format!("overrides.{name} must be at least {min}, got {n}")));
    }
    Ok(n)
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64, CliError> {
    let x = v.unwrap_or(default);
    if !(x.is_finite() && x > 0.0) {
        return Err(config_err(format!("overrides.{name} must be finite and positive, got {x}")));
    }
    Ok(x)
}

fn interval(name: &str, v: Option<[f64; 2]>, default: [f64; 2]) -> Result<[f64; 2], CliError> {
    let [a, b] = v.unwrap_or(default);
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(config_err(format!(
            "overrides.{name} must be an increasing pair of finite numbers, got [{a}, {b}]"
        )));
    }
    Ok([a, b])
}

/// A sweep of `ω_sw/ω_b` whose endpoints both pass the parameter guard.
fn sweep_interval(p: &SystemParams, v: Option<[f64; 2]>, default: [f64; 2]) -> Result<[f64; 2], CliError> {
    let s = interval("sweep", v, default)?;
    for r in s {
        p.with_omega_sw_ratio(r).validate()?;
    }
    Ok(s)
}

fn grid_points(ov: &Overrides, default: usize) -> Result<[usize; 2], CliError> {
    let [nx, ny] = ov.grid_points.unwrap_or([default, default]);
    if nx < 2 || ny < 2 {
        return Err(config_err(format!(
            "overrides.grid_points must be at least 2 in each direction, got [{nx}, {ny}]"
        )));
    }
    Ok([nx, ny])
}

/// The Wigner recurrence guard, checked before any state is built.
fn check_extent(x: [f64; 2], y: [f64; 2]) -> Result<(), CliError> {
    let ext = x
        .iter()
        .flat_map(|a| y.iter().map(move |b| a.hypot(*b)))
        .fold(0.0, f64::max);
    if 2.0 * ext * ext > WIGNER_MAX_EXPONENT {
        return Err(Error::Domain {
            param: "wigner grid extent",
            value: ext,
            reason: format!(
                "|xi| up to {ext:.3} exceeds the Wigner recurrence guard |2 xi|^2/2 <= {WIGNER_MAX_EXPONENT}"
            ),
        }
        .into());
    }
    Ok(())
}

fn check_grid_overrides(ov: &Overrides) -> Result<(), CliError> {
    let x = ov.grid_x.map(|g| interval("grid_x", Some(g), g)).transpose()?;
    let y = ov.grid_y.map(|g| interval("grid_y", Some(g), g)).transpose()?;
    check_extent(x.unwrap_or([0.0, 0.0]), y.unwrap_or([0.0, 0.0]))
}

fn branch(ov: &Overrides) -> Result<Branch, CliError> {
    Ok(ov.branch.as_deref().unwrap_or("+").parse::<Branch>()?)
}

fn fixed_mode(v: Option<usize>) -> Result<Option<ModeSpec>, CliError> {
    Ok(v.map(ModeSpec::new).transpose()?)
}

/// Checks the displacement guard for `|α(t)|` over `[0, t_max]` on a fine
/// grid, so an undersized mechanical space is rejected before evolving.
fn guard_amplitude_path(p: &SystemParams, t_max: f64, mech: ModeSpec) -> Result<(), CliError> {
    let e = effective_params(p)?;
    for t in linspace(0.0, t_max, 401) {
        displacement_guard(coherent_amplitude(t, &e), mech)?;
    }
    Ok(())
}

/// Axis ranges: overrides where given, otherwise the widened box for `rho`.
fn mech_axes(ov: &Overrides, rho: &DensityOp) -> Result<([f64; 2], [f64; 2]), CliError> {
    let ((x0, x1), (y0, y1)) = axes_for_density(rho, AXES_MARGIN, MECH_BASE)?;
    let x = ov.grid_x.unwrap_or([x0, x1]);
    let y = ov.grid_y.unwrap_or([y0, y1]);
    check_extent(x, y)?;
    Ok((x, y))
}

fn grid_on(rho: &DensityOp, x: [f64; 2], y: [f64; 2], n: [usize; 2]) -> Result<WignerGrid, CliError> {
    Ok(wigner(rho, &linspace(x[0], x[1], n[0]), &linspace(y[0], y[1], n[1]))?)
}

fn record_grid(out: &mut Outcome, prefix: &str, g: &WignerGrid) {
    out.result(format!("{prefix}wigner_integral"), g.integral());
    out.result(format!("{prefix}wigner_max"), g.max());
    out.result(format!("{prefix}wigner_min"), g.min());
    out.result(format!("{prefix}negativity_volume"), g.negativity_volume());
    out.result(format!("{prefix}imag_residue"), g.imag_residue);
    out.result(format!("{prefix}grid_x_min"), g.x_axis[0]);
    out.result(format!("{prefix}grid_x_max"), *g.x_axis.last().unwrap());
    out.result(format!("{prefix}grid_y_min"), g.y_axis[0]);
    out.result(format!("{prefix}grid_y_max"), *g.y_axis.last().unwrap());
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo) > 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------- amplitude

fn amplitude_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    let p = resolve_params(&cfg.params, Preset::Bec, 0.0)?;
    let t_max = positive("t_max", ov.t_max, 2.0 * PI)?;
    let t_points = count("t_points", ov.t_points, 400, 2)?;
    let time = positive("time", ov.time, PI)?;
    let sweep = sweep_interval(&p, ov.sweep, [-1.99, 1.99])?;
    let sweep_points = count("sweep_points", ov.sweep_points, 399, 2)?;

    let resolved = Overrides {
        t_max: Some(t_max),
        t_points: Some(t_points),
        time: Some(time),
        sweep: Some(sweep),
        sweep_points: Some(sweep_points),
        ..Default::default()
    };
    let mut out = Outcome::new(explicit_params(&p), resolved);

    let e = effective_params(&p)?;
    let mut fig1d = Table::new(
        "fig1d_amplitude_vs_time.csv",
        "1(d)",
        "coherent amplitude alpha(t) versus scaled time",
        &["omega_b_t [rad]", "t [s]", "abs_alpha [1]", "re_alpha [1]", "im_alpha [1]"],
    );
    let (mut peak, mut peak_at) = (0.0f64, 0.0);
    for wt in linspace(0.0, t_max, t_points) {
        let t = wt / p.omega_b;
        let a = coherent_amplitude(t, &e);
        if a.norm() > peak {
            peak = a.norm();
            peak_at = wt;
        }
        fig1d.push(&[wt, t, a.norm(), a.re, a.im]);
    }
    out.result("max_abs_alpha", peak);
    out.result("max_abs_alpha_omega_b_t", peak_at);

    let t = time / p.omega_b;
    let amp_at = |r: f64| -> Result<f64, CliError> {
        Ok(coherent_amplitude(t, &effective_params(&p.with_omega_sw_ratio(r))?).norm())
    };
    let base = amp_at(0.0)?;
    let mut fig1e = Table::new(
        "fig1e_amplitude_vs_scattering.csv",
        "1(e)",
        "|alpha| at the snapshot time versus omega_sw, and its ratio to the omega_sw = 0 value",
        &[
            "omega_sw_over_omega_b [1]",
            "omega_sw [rad/s]",
            "abs_alpha [1]",
            "enlargement [1]",
        ],
    );
    let mut max_enl = 0.0f64;
    for r in linspace(sweep[0], sweep[1], sweep_points) {
        let a = amp_at(r)?;
        let enl = a / base;
        max_enl = max_enl.max(enl);
        fig1e.push(&[r, r * p.omega_b, a, enl]);
    }
    out.result("abs_alpha_at_snapshot_omega_sw_0", base);
    out.result("max_enlargement", max_enl);
    if sweep[0] < 0.0 && amp_at(sweep[0])? / base >= 5.0 {
        let hi = sweep[1].min(0.0);
        let r5 = bisect(sweep[0], hi, |r| amp_at(r).unwrap_or(f64::NAN) / base - 5.0);
        out.result("fivefold_omega_sw_over_omega_b", r5);
    }
    out.tables = vec![fig1d, fig1e];
    Ok(out)
}

// ---------------------------------------------------------------- concurrence

fn concurrence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    let p = resolve_params(&cfg.params, Preset::Bec, 1.0)?;
    let t_max = positive("t_max", ov.t_max, 4.0 * PI)?;
    let t_points = count("t_points", ov.t_points, 400, 2)?;
    let fixed = fixed_mode(ov.mech_dim)?;
    if let Some(m) = fixed {
        guard_amplitude_path(&p, t_max / p.omega_b, m)?;
    }

    let resolved = Overrides {
        t_max: Some(t_max),
        t_points: Some(t_points),
        mech_dim: ov.mech_dim,
        ..Default::default()
    };
    let mut out = Outcome::new(explicit_params(&p), resolved);
    let e = effective_params(&p)?;
    let times = linspace(0.0, t_max, t_points);
    let rows: Vec<Result<[f64; 6], CliError>> = times
        .par_iter()
        .map(|&wt| {
            let t = wt / p.omega_b;
            let (state, mode) = match fixed {
                Some(m) => (entangled_state(t, &p, m)?, m),
                None => auto_dim(40, MAX_AUTO_DIM, |m| entangled_state(t, &p, m))?,
            };
            let a = coherent_amplitude(t, &e).norm();
            Ok([
                wt,
                t,
                concurrence_analytic(t, &p)?,
                concurrence_numeric(&state)?,
                a,
                mode.dim() as f64,
            ])
        })
        .collect();
    let mut table = Table::new(
        "fig1f_concurrence.csv",
        "1(f)",
        "cavity-mechanics concurrence, closed form and from the numeric state",
        &[
            "omega_b_t [rad]",
            "t [s]",
            "concurrence_analytic [1]",
            "concurrence_numeric [1]",
            "abs_alpha [1]",
        ],
    );
    let (mut diff, mut dmax) = (0.0f64, 0usize);
    for r in rows {
        let r = r?;
        diff = diff.max((r[2] - r[3]).abs());
        dmax = dmax.max(r[5] as usize);
        table.push(&r[..5]);
    }
    out.result("max_abs_difference", diff);
    out.result("mid_period_concurrence", concurrence_analytic(PI / e.omega_s, &p)?);
    out.result("period_omega_b_t", 2.0 * PI / e.omega_s * p.omega_b);
    out.dim("cavity", 2);
    out.dim("mechanics_max", dmax);
    out.tol("leakage", LEAK_TOL);
    out.tables = vec![table];
    Ok(out)
}

// ---------------------------------------------------------------- mechanical cat

fn mech_figure(p: &SystemParams) -> &'static str {
    if p.g / p.omega_b < 0.01 {
        "2(a)"
    } else if p.omega_sw == 0.0 {
        "2(b)"
    } else {
        "2(c)"
    }
}

fn mech_cat(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    let p = resolve_params(&cfg.params, Preset::Bec, 0.0)?;
    let time = positive("time", ov.time, PI)?;
    let branch = branch(ov)?;
    let npts = grid_points(ov, 121)?;
    check_grid_overrides(ov)?;
    let t = time / p.omega_b;
    let e = effective_params(&p)?;
    let alpha = coherent_amplitude(t, &e);
    let fixed = fixed_mode(ov.mech_dim)?;
    if let Some(m) = fixed {
        displacement_guard(alpha, m)?;
    }

    let resolved = Overrides {
        time: Some(time),
        branch: Some(branch.symbol().to_string()),
        mech_dim: ov.mech_dim,
        grid_x: ov.grid_x,
        grid_y: ov.grid_y,
        grid_points: Some(npts),
        ..Default::default()
    };
    let mut out = Outcome::new(explicit_params(&p), resolved);

    let (joint, mech) = match fixed {
        Some(m) => (entangled_state(t, &p, m)?, m),
        None => auto_dim(60, MAX_AUTO_DIM, |m| entangled_state(t, &p, m))?,
    };
    info!("mechanical truncation {}", mech.dim());
    let cat = project_cavity(&joint, branch)?;
    let rho = cat.state.to_density();
    let (x, y) = mech_axes(ov, &rho)?;
    let grid = grid_on(&rho, x, y, npts)?;

    let u = if alpha.norm() > 1e-12 { alpha / alpha.norm() } else { C64::new(1.0, 0.0) };
    let a = (-2.0 * u.re, -2.0 * u.im);
    let b = (alpha.re + 2.0 * u.re, alpha.im + 2.0 * u.im);
    let profile = wigner_line(&rho, a, b, PROFILE_POINTS)?;
    let figure = mech_figure(&p);
    let mut line = Table::new(
        "fig2_profile.csv",
        figure,
        "Wigner function along the line through 0 and alpha, extended by 2 on both sides",
        &["s [1]", "re_xi [1]", "im_xi [1]", "wigner [1]"],
    );
    for &(s, w) in &profile {
        line.push(&[s, a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1), w]);
    }

    let var = variances_numeric(&cat.state)?;
    out.result("abs_alpha", alpha.norm());
    out.result("re_alpha", alpha.re);
    out.result("im_alpha", alpha.im);
    out.result("branch_probability", cat.probability);
    out.result("branch_probability_closed_form", branch_probability_closed_form(t, &p, branch)?);
    out.result("norm_const", cat.norm_const);
    out.result("norm_const_closed_form", norm_const_closed_form(t, &p, branch)?);
    out.result("var_x", var.var_x);
    out.result("var_y", var.var_y);
    out.result("uncertainty_product", var.uncertainty_product());
    out.result("grid_local_maxima", grid.local_maxima(PEAK_THRESHOLD).len() as f64);
    out.result("profile_maxima", profile_maxima(&profile, PEAK_THRESHOLD).len() as f64);
    record_grid(&mut out, "", &grid);
    out.dim("cavity", 2);
    out.dim("mechanics", mech.dim());
    out.tol("leakage", LEAK_TOL);
    out.tol("peak_threshold", PEAK_THRESHOLD);
    out.tables = vec![
        Table::wigner(
            "fig2_wigner.csv",
            figure,
            "Wigner function of the projected mechanical cat",
            &grid,
        ),
        line,
    ];
    Ok(out)
}

// ---------------------------------------------------------------- variances

fn variance_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    let p = resolve_params(&cfg.params, Preset::Bec, 0.0)?;
    let time = positive("time", ov.time, PI)?;
    let sweep = sweep_interval(&p, ov.sweep, [-1.95, 1.95])?;
    let sweep_points = count("sweep_points", ov.sweep_points, 79, 2)?;
    let t = time / p.omega_b;
    let ratios = linspace(sweep[0], sweep[1], sweep_points);
    let fixed = fixed_mode(ov.mech_dim)?;
    if let Some(m) = fixed {
        for &r in &ratios {
            let pr = p.with_omega_sw_ratio(r);
            displacement_guard(coherent_amplitude(t, &effective_params(&pr)?), m)?;
        }
    }

    let resolved = Overrides {
        time: Some(time),
        sweep: Some(sweep),
        sweep_points: Some(sweep_points),
        mech_dim: ov.mech_dim,
        ..Default::default()
    };
    let mut out = Outcome::new(explicit_params(&p), resolved);

    type Row = ([f64; 9], [[f64; 5]; 4]);
    let rows: Vec<Result<Row, CliError>> = ratios
        .par_iter()
        .map(|&r| {
            let pr = p.with_omega_sw_ratio(r);
            let (joint, mode) = match fixed {
                Some(m) => (entangled_state(t, &pr, m)?, m),
                None => auto_dim(60, MAX_AUTO_DIM, |m| entangled_state(t, &pr, m))?,
            };
            let num = variances_numeric(&project_cavity(&joint, Branch::Plus)?.state)?;
            let printed = variance_terms_printed(t, &pr)?;
            let fixed_terms = variance_terms_rederived(t, &pr)?;
            Ok((
                [
                    r,
                    r * p.omega_b,
                    num.var_x,
                    num.var_y,
                    printed.var_x(),
                    printed.var_y(),
                    fixed_terms.var_x(),
                    fixed_terms.var_y(),
                    mode.dim() as f64,
                ],
                [printed.x, printed.y, fixed_terms.x, fixed_terms.y],
            ))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(
        "fig2d_variances.csv",
        "2(d)",
        "quadrature variances of the + cat: numeric, printed closed form, rederived closed form",
        &[
            "omega_sw_over_omega_b [1]",
            "omega_sw [rad/s]",
            "var_x_numeric [1]",
            "var_y_numeric [1]",
            "var_x_printed [1]",
            "var_y_printed [1]",
            "var_x_rederived [1]",
            "var_y_rederived [1]",
            "mech_dim [levels]",
        ],
    );
    let mut terms = Table::new(
        "fig2d_term_discrepancy.csv",
        "2(d)",
        "per-term comparison of the printed and rederived closed forms (quadrature 0 = x, 1 = y)",
        &[
            "omega_sw_over_omega_b [1]",
            "quadrature [0=x,1=y]",
            "term [index]",
            "printed [1]",
            "rederived [1]",
            "difference [1]",
        ],
    );
    let mut worst = [0.0f64; 4];
    let mut dmax = 0usize;
    for (row, t4) in &rows {
        table.push(row);
        dmax = dmax.max(row[8] as usize);
        worst[0] = worst[0].max((row[4] - row[2]).abs());
        worst[1] = worst[1].max((row[5] - row[3]).abs());
        worst[2] = worst[2].max((row[6] - row[2]).abs());
        worst[3] = worst[3].max((row[7] - row[3]).abs());
        for q in 0..2 {
            for k in 0..5 {
                let (a, b) = (t4[q][k], t4[q + 2][k]);
                terms.push(&[row[0], q as f64, (k + 1) as f64, a, b, a - b]);
            }
        }
    }
    out.result("max_abs_diff_var_x_printed", worst[0]);
    out.result("max_abs_diff_var_y_printed", worst[1]);
    out.result("max_abs_diff_var_x_rederived", worst[2]);
    out.result("max_abs_diff_var_y_rederived", worst[3]);

    // quarter-crossings of each quadrature, refined on the rederived form
    for (col, name) in [(2usize, "x"), (3, "y")] {
        let pairs = rows
            .windows(2)
            .filter(|w| (w[0].0[col] - 0.25).signum() != (w[1].0[col] - 0.25).signum());
        for (k, w) in pairs.enumerate() {
            let f = |r: f64| {
                variance_terms_rederived(t, &p.with_omega_sw_ratio(r))
                    .map(|v| if name == "x" { v.var_x() } else { v.var_y() } - 0.25)
                    .unwrap_or(f64::NAN)
            };
            out.result(
                format!("var_{name}_quarter_crossing_{}", k + 1),
                bisect(w[0].0[0], w[1].0[0], f),
            );
        }
    }
    out.dim("cavity", 2);
    out.dim("mechanics_max", dmax);
    out.tol("leakage", LEAK_TOL);
    out.tables = vec![table, terms];
    Ok(out)
}

// ---------------------------------------------------------------- lossy cat

fn lossy_cat(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    let mut p = resolve_params(&cfg.params, Preset::Bec, 0.0)?;
    if cfg.params.kappa_a.is_none() {
        p.kappa_a = 1e5;
    }
    let time = positive("time", ov.time, PI)?;
    let branch = branch(ov)?;
    let samples = count("samples", ov.samples, 10, 1)?;
    let tolerance = positive("tolerance", ov.tolerance, LINDBLAD_TOL)?;
    let npts = grid_points(ov, 121)?;
    check_grid_overrides(ov)?;
    let cavity = ModeSpec::new(ov.cavity_dim.unwrap_or(3))?;
    let mech = ModeSpec::new(ov.mech_dim.unwrap_or(60))?;
    let t = time / p.omega_b;
    guard_amplitude_path(&p, t, mech)?;

    let resolved = Overrides {
        time: Some(time),
        branch: Some(branch.symbol().to_string()),
        cavity_dim: Some(cavity.dim()),
        mech_dim: Some(mech.dim()),
        samples: Some(samples),
        tolerance: Some(tolerance),
        grid_x: ov.grid_x,
        grid_y: ov.grid_y,
        grid_points: Some(npts),
        ..Default::default()
    };
    let mut out = Outcome::new(explicit_params(&p), resolved);

    let db = mech.dim();
    let mut amps = Array1::<C64>::zeros(cavity.dim() * db);
    amps[0] = C64::new(1.0, 0.0);
    amps[db] = C64::new(1.0, 0.0);
    let init = PureState::new(amps, vec![cavity, mech])?;
    let times = linspace(0.0, t, samples + 1)[1..].to_vec();
    let run = |kappa: f64| -> Result<Trajectory, CliError> {
        let req = EvolutionRequest::new(init.clone(), p.with_kappa(kappa), times.clone(), Method::Lindblad)
            .with_tolerance(tolerance);
        evolve_lindblad(&req).map_err(|f| CliError::Core(f.error))
    };

    let mut diag = Table::new(
        "fig4_diagnostics.csv",
        "4",
        "master-equation invariants at each sample",
        &[
            "kappa_a [1/s]",
            "omega_b_t [rad]",
            "trace [1]",
            "hermiticity_defect [1]",
            "min_eigenvalue [1]",
        ],
    );
    let kappas: Vec<(&str, f64)> = if p.kappa_a == 0.0 {
        vec![("lossless", 0.0)]
    } else {
        vec![("lossless", 0.0), ("lossy", p.kappa_a)]
    };
    let mut grids = Vec::new();
    let mut axes = None;
    for (label, kappa) in kappas {
        let traj = run(kappa)?;
        for d in &traj.diagnostics {
            diag.push(&[kappa, d.time * p.omega_b, d.trace, d.hermiticity_defect, d.min_eigenvalue]);
        }
        out.result(format!("{label}_max_trace_drift"), traj.max_trace_drift());
        out.result(format!("{label}_max_hermiticity_defect"), traj.max_hermiticity_defect());
        out.result(format!("{label}_min_eigenvalue"), traj.min_eigenvalue());
        out.result(format!("{label}_steps"), traj.steps as f64);
        let final_state = traj
            .final_state()
            .ok_or_else(|| config_err("evolution produced no samples"))?;
        let cond = conditional_mechanical_state(final_state, branch)?;
        out.result(format!("{label}_branch_probability"), cond.probability);
        // both grids share the lossless box so volumes are comparable
        let (x, y) = match axes {
            Some(a) => a,
            None => *axes.insert(mech_axes(ov, &cond.state)?),
        };
        let grid = grid_on(&cond.state, x, y, npts)?;
        record_grid(&mut out, &format!("{label}_"), &grid);
        grids.push((label, kappa, grid));
    }
    if grids.len() == 2 {
        let ratio = grids[1].2.negativity_volume() / grids[0].2.negativity_volume();
        out.result("negativity_ratio", ratio);
    }
    for (label, kappa, grid) in &grids {
        out.tables.push(Table::wigner(
            &format!("fig4_wigner_{label}.csv"),
            "4",
            &format!("Wigner function of the conditional mechanical state, kappa_a = {kappa:e} 1/s"),
            grid,
        ));
    }
    out.tables.push(diag);
    out.dim("cavity", cavity.dim());
    out.dim("mechanics", mech.dim());
    out.tol("integrator_local_error", tolerance);
    out.tol("leakage", LEAK_TOL);
    Ok(out)
}

// ---------------------------------------------------------------- optical cats

fn optical_figure(kind: CatKind) -> &'static str {
    match kind {
        CatKind::Two => "3(b)",
        CatKind::Three => "3(c)",
        CatKind::Four => "3(d)",
    }
}

fn optical_cat(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ov = &cfg.overrides;
    if cfg.params.omega_sw.is_some() || cfg.params.omega_sw_ratio.is_some() {
        return Err(config_err(
            "optical_cat takes omega_sw from each cat kind; select kinds with overrides.cats",
        ));
    }
    let p = resolve_params(&cfg.params, Preset::Optical, 0.0)?;
    let names = ov
        .cats
        .clone()
        .unwrap_or_else(|| CatKind::ALL.iter().map(|k| k.to_string()).collect());
    if names.is_empty() {
        return Err(config_err("overrides.cats is empty"));
    }
    let kinds = names
        .iter()
        .map(|n| n.parse::<CatKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let alpha0 = ov.alpha0.unwrap_or(2.0);
    if !alpha0.is_finite() {
        return Err(config_err(format!("overrides.alpha0 must be finite, got {alpha0}")));
    }
    let cavity = ModeSpec::new(ov.cavity_dim.unwrap_or(30))?;
    displacement_guard(C64::new(alpha0, 0.0), cavity)?;
    let x = interval("grid_x", ov.grid_x, [-4.0, 4.0])?;
    let y = interval("grid_y", ov.grid_y, [-4.0, 4.0])?;
    let npts = grid_points(ov, 161)?;
    check_extent(x, y)?;
    let sweep = sweep_interval(&p, ov.sweep, [-1.99, 1.99])?;
    let sweep_points = count("sweep_points", ov.sweep_points, 399, 2)?;
    for k in &kinds {
        p.with_omega_sw_ratio(k.omega_sw_ratio()).validate()?;
    }

    let resolved = Overrides {
        cats: Some(kinds.iter().map(|k| k.to_string()).collect()),
        alpha0: Some(alpha0),
        cavity_dim: Some(cavity.dim()),
        grid_x: Some(x),
        grid_y: Some(y),
        grid_points: Some(npts),
        sweep: Some(sweep),
        sweep_points: Some(sweep_points),
        ..Default::default()
    };
    let mut params = explicit_params(&p);
    params.omega_sw = None;
    let mut out = Outcome::new(params, resolved);

    let mut fig3a = Table::new(
        "fig3a_effective_parameters.csv",
        "3(a)",
        "squeezed-frame parameters versus omega_sw",
        &[
            "omega_sw_over_omega_b [1]",
            "omega_sw [rad/s]",
            "r_s [1]",
            "omega_s [rad/s]",
            "g_s [rad/s]",
            "kerr_ratio [1]",
        ],
    );
    for r in linspace(sweep[0], sweep[1], sweep_points) {
        let e = effective_params(&p.with_omega_sw_ratio(r))?;
        fig3a.push(&[r, r * p.omega_b, e.r_s, e.omega_s, e.g_s, e.kerr_ratio()]);
    }
    out.tables.push(fig3a);

    let a0 = C64::new(alpha0, 0.0);
    let xs = linspace(x[0], x[1], npts[0]);
    let ys = linspace(y[0], y[1], npts[1]);
    out.dim("cavity", cavity.dim());
    for kind in kinds {
        let pk = p.with_omega_sw_ratio(kind.omega_sw_ratio());
        let e = effective_params(&pk)?;
        let tau = e.period();
        let ev = evolve_coherent_cavity(&pk, a0, tau, cavity)?;
        let closed = optical_state_at_tau(&pk, a0, cavity)?;
        let ideal = ideal_cat(kind, a0, cavity)?;
        let grid = wigner(&ev.cavity, &xs, &ys)?;
        out.result(format!("{kind}_fidelity_closed_form"), fidelity(&closed, &ev.cavity)?);
        out.result(format!("{kind}_fidelity_ideal"), fidelity(&ideal, &ev.cavity)?);
        out.result(format!("{kind}_entropy_nats"), ev.entropy);
        out.result(format!("{kind}_kerr_ratio"), e.kerr_ratio());
        out.result(format!("{kind}_tau"), tau);
        out.result(format!("{kind}_omega_sw_over_omega_b"), kind.omega_sw_ratio());
        out.result(format!("{kind}_wigner_integral"), grid.integral());
        out.result(format!("{kind}_wigner_min"), grid.min());
        out.dim(format!("{kind}_mechanics_max"), ev.block_dims.iter().copied().max().unwrap_or(0));
        out.tables.push(Table::wigner(
            &format!("fig3_wigner_{kind}.csv"),
            optical_figure(kind),
            &format!("Wigner function of the cavity at tau = 2 pi/omega_s, {kind}-component cat"),
            &grid,
        ));
    }
    out.tol("leakage", LEAK_TOL);
    Ok(out)
}

// ---------------------------------------------------------------- self-check

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> catsim::Result<f64>) -> Check {
    let value = f().unwrap_or_else(|e| {
        warn!("{name}: {e}");
        f64::NAN
    });
    Check {
        name,
        value,
        tolerance,
    }
}

fn mode(d: usize) -> catsim::Result<ModeSpec> {
    ModeSpec::new(d)
}

/// Fixed superposition over cavity levels 0..3 and mechanical levels 0..4.
fn low_state(dims: &[ModeSpec]) -> catsim::Result<PureState> {
    let db = dims[1].dim();
    let mut amps = Array1::<C64>::zeros(dims[0].dim() * db);
    for n in 0..3 {
        for m in 0..4 {
            let k = (n * 4 + m) as f64;
            amps[n * db + m] = C64::new((0.7 * k).cos(), (1.3 * k + 0.4).sin());
        }
    }
    PureState::new(amps, dims.to_vec())
}

fn selfcheck_suites() -> Vec<Check> {
    let bec = SystemParams::bec();
    let half = PI / bec.omega_b;
    vec![
        check("factorized_vs_direct_infidelity", 1e-8, || {
            let dims = [mode(3)?, mode(60)?];
            let psi = low_state(&dims)?;
            let mut worst = 0.0f64;
            for r in [-0.71, 0.0, 0.5, 1.0] {
                let p = SystemParams::optical().with_omega_sw_ratio(r);
                for k in 1..=3 {
                    let t = k as f64 * 2.0 * PI / (3.0 * p.omega_b);
                    let u = factorized_propagator_guarded(t, &p, &dims, &BlockGuard::populated(&psi))?;
                    let a = u.apply(&psi)?;
                    let b = direct_propagator(t, &p, &dims)?.apply(&psi)?;
                    worst = worst.max(1.0 - fidelity(&a, &b)?);
                }
            }
            Ok(worst)
        }),
        check("entangled_state_vs_propagator_infidelity", 1e-9, || {
            let mut worst = 0.0f64;
            for r in [0.0, 0.5] {
                let p = bec.with_omega_sw_ratio(r);
                let (closed, mech) = auto_dim(60, 1000, |m| entangled_state(half, &p, m))?;
                let dims = [mode(2)?, mech];
                let mut amps = Array1::<C64>::zeros(2 * mech.dim());
                amps[0] = C64::new(1.0, 0.0);
                amps[mech.dim()] = C64::new(1.0, 0.0);
                let psi = PureState::new(amps, dims.to_vec())?;
                let u = factorized_propagator_guarded(half, &p, &dims, &BlockGuard::populated(&psi))?;
                worst = worst.max(1.0 - fidelity(&closed, &u.apply(&psi)?)?);
            }
            Ok(worst)
        }),
        check("concurrence_closed_form_vs_numeric", 1e-9, || {
            let p = bec.with_omega_sw_ratio(1.0);
            let period = effective_params(&p)?.period();
            let mut worst = 0.0f64;
            for t in linspace(0.0, period, 21) {
                let (s, _) = auto_dim(40, 1000, |m| entangled_state(t, &p, m))?;
                worst = worst.max((concurrence_analytic(t, &p)? - concurrence_numeric(&s)?).abs());
            }
            Ok(worst)
        }),
        check("branch_probability_closed_form_vs_numeric", 1e-9, || {
            let mut worst = 0.0f64;
            for r in [0.0, 0.5] {
                let p = bec.with_omega_sw_ratio(r);
                let (s, _) = auto_dim(60, 1000, |m| entangled_state(half, &p, m))?;
                for b in [Branch::Plus, Branch::Minus] {
                    let num = project_cavity(&s, b)?.probability;
                    worst = worst.max((num - branch_probability_closed_form(half, &p, b)?).abs());
                }
            }
            Ok(worst)
        }),
        check("variance_closed_form_vs_numeric", 1e-6, || {
            let mut worst = 0.0f64;
            for r in [-1.0, 0.0, 0.5, 1.0, 1.8] {
                let p = bec.with_omega_sw_ratio(r);
                let (s, _) = auto_dim(60, MAX_AUTO_DIM, |m| entangled_state(half, &p, m))?;
                let num = variances_numeric(&project_cavity(&s, Branch::Plus)?.state)?;
                let cf = variance_terms_rederived(half, &p)?;
                worst = worst
                    .max((cf.var_x() - num.var_x).abs())
                    .max((cf.var_y() - num.var_y).abs());
            }
            Ok(worst)
        }),
        check("heisenberg_bound_deficit", 1e-12, || {
            let mut worst = 0.0f64;
            for r in [-1.0, 0.0, 0.5, 1.0, 1.8] {
                let p = bec.with_omega_sw_ratio(r);
                let (s, _) = auto_dim(60, MAX_AUTO_DIM, |m| entangled_state(half, &p, m))?;
                let v = variances_numeric(&project_cavity(&s, Branch::Plus)?.state)?;
                worst = worst.max(1.0 / 16.0 - v.uncertainty_product());
            }
            Ok(worst)
        }),
        check("wigner_recurrence_vs_pointwise", 1e-10, || {
            let cat = ideal_cat(CatKind::Two, C64::new(2.0, 0.0), mode(30)?)?.to_density();
            let ax = linspace(-3.0, 3.0, 7);
            let fast = wigner(&cat, &ax, &ax)?;
            let slow = wigner_pointwise(&cat, &ax, &ax)?;
            Ok((&fast.values - &slow.values).iter().fold(0.0, |m, v| m.max(v.abs())))
        }),
        check("wigner_vacuum_peak_error", 1e-12, || {
            let ax = linspace(-2.0, 2.0, 41);
            let w = wigner(&PureState::vacuum(mode(10)?).to_density(), &ax, &ax)?;
            Ok((w.max() - 2.0 / PI).abs())
        }),
        check("wigner_cat_integral_error", 0.02, || {
            let cat = ideal_cat(CatKind::Four, C64::new(2.0, 0.0), mode(30)?)?.to_density();
            let ax = linspace(-4.0, 4.0, 81);
            Ok((wigner(&cat, &ax, &ax)?.integral() - 1.0).abs())
        }),
        check("lindblad_lossless_vs_unitary_infidelity", 1e-8, || {
            let p = SystemParams::optical();
            let dims = [mode(2)?, mode(30)?];
            let mut amps = Array1::<C64>::zeros(60);
            amps[0] = C64::new(1.0, 0.0);
            amps[30] = C64::new(1.0, 0.0);
            let psi = PureState::new(amps, dims.to_vec())?;
            let req = EvolutionRequest::new(psi.clone(), p, vec![half], Method::Lindblad);
            let traj = evolve_lindblad(&req).map_err(|f| f.error)?;
            let u = factorized_propagator_guarded(half, &p, &dims, &BlockGuard::populated(&psi))?;
            let target = u.apply(&psi)?;
            let rho = traj
                .final_state()
                .ok_or_else(|| Error::InvalidRequest("no samples".into()))?;
            Ok(1.0 - fidelity(&target, rho)?)
        }),
        check("optical_closed_form_vs_blockwise_infidelity", 1e-6, || {
            let p = SystemParams::optical().with_omega_sw_ratio(CatKind::Four.omega_sw_ratio());
            let cavity = mode(20)?;
            let a0 = C64::new(1.0, 0.0);
            let tau = effective_params(&p)?.period();
            let ev = evolve_coherent_cavity(&p, a0, tau, cavity)?;
            Ok(1.0 - fidelity(&optical_state_at_tau(&p, a0, cavity)?, &ev.cavity)?)
        }),
    ]
}

fn selfcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.params != ParamsConfig::default() {
        return Err(config_err("selfcheck runs fixed reference cases and takes no [params]"));
    }
    let scale = cfg.overrides.check_scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(config_err(format!(
            "overrides.check_scale must be finite and non-negative, got {scale}"
        )));
    }
    let resolved = Overrides {
        check_scale: Some(scale),
        ..Default::default()
    };
    let mut out = Outcome::new(ParamsConfig::default(), resolved);
    let mut table = Table::new(
        "selfcheck.csv",
        "none",
        "oracle-equivalence checks: value must not exceed tolerance",
        &["check [name]", "value [1]", "tolerance [1]", "pass [1=yes]"],
    );
    for c in selfcheck_suites() {
        let tol = c.tolerance * scale;
        let pass = c.value <= tol;
        info!("{} {}: {:e} (tolerance {:e})", if pass { "PASS" } else { "FAIL" }, c.name, c.value, tol);
        table.push_cells(vec![
            c.name.to_string(),
            crate::output::fmt_num(c.value),
            crate::output::fmt_num(tol),
            if pass { "1" } else { "0" }.to_string(),
        ]);
        out.result(c.name, c.value);
        out.tol(c.name, tol);
        if !pass {
            out.failed_checks.push(format!("{} = {:e} > {:e}", c.name, c.value, tol));
        }
    }
    out.tables = vec![table];
    Ok(out)
}
