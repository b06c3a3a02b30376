//! Closed-form states and observables.
//!
//! Every function here has a brute-force counterpart elsewhere in the crate
//! (propagators in [`model`](crate::model), projections and expectations on
//! state vectors) and is meant to be compared against it.

use std::f64::consts::PI;
use std::fmt;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::fock::{
    annihilation, displace_factor, displacement_guard, squeeze_factor, ModeSpec, Operator,
    PureState, C64,
};
use crate::model::{
    coherent_amplitude, effective_params, kerr_phase, second_squeeze_arg, SystemParams,
};

/// Below this probability a measurement branch is treated as impossible.
pub const DEGENERATE_PROBABILITY: f64 = 1e-12;

/// Outcome of measuring the cavity in the basis `|φ±⟩ = (|0⟩ ± |1⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            other => Err(Error::InvalidRequest(format!(
                "branch must be `+` or `-`, got `{other}`"
            ))),
        }
    }
}

/// Mechanical state left behind by a cavity measurement.
#[derive(Clone, Debug)]
pub struct ProjectedCat {
    pub branch: Branch,
    pub state: PureState,
    pub probability: f64,
    /// `N±` with the state written as `(N±/2) S S {|0⟩ ± e^{iε} D(α)|0⟩}`,
    /// so `N± = 1/√p±`.
    pub norm_const: f64,
}

/// Squeeze factors `S(r_s) S(−r_s e^{−2iω_s t})` applied to a mechanical
/// state (the second factor acts first).
fn squeeze_pair(psi: &PureState, factor: usize, t: f64, p: &SystemParams) -> Result<PureState> {
    let e = effective_params(p)?;
    let inner = squeeze_factor(psi, factor, second_squeeze_arg(t, &e))?;
    squeeze_factor(&inner, factor, C64::new(e.r_s, 0.0))
}

/// The cavity–mechanics state evolved from `(|0⟩ + |1⟩)|0⟩/√2`:
///
/// ```text
/// (1/√2) S(r_s) S(−r_s e^{−2iω_s t}) { |0⟩_c|0⟩_b + e^{iε(t)} |1⟩_c D_b[α(t)]|0⟩_b }
/// ```
///
/// on dims `(2, mech.dim())`, interaction picture.
pub fn entangled_state(t: f64, p: &SystemParams, mech: ModeSpec) -> Result<PureState> {
    let e = effective_params(p)?;
    let alpha = coherent_amplitude(t, &e);
    displacement_guard(alpha, mech)?;
    let vac = PureState::vacuum(mech);
    let displaced = displace_factor(&vac, 0, alpha)?;
    let b0 = squeeze_pair(&vac, 0, t, p)?;
    let b1 = squeeze_pair(&displaced, 0, t, p)?;
    let phase = C64::from_polar(1.0 / 2f64.sqrt(), kerr_phase(t, &e));
    let d = mech.dim();
    let mut amps = Array1::<C64>::zeros(2 * d);
    for m in 0..d {
        amps[m] = b0.amplitudes()[m] / 2f64.sqrt();
        amps[d + m] = b1.amplitudes()[m] * phase;
    }
    PureState::new(amps, vec![ModeSpec::new(2)?, mech])
}

/// `C(t) = √(1 − e^{−|α(t)|²})`.
pub fn concurrence_analytic(t: f64, p: &SystemParams) -> Result<f64> {
    let e = effective_params(p)?;
    let a2 = coherent_amplitude(t, &e).norm_sqr();
    Ok((-(-a2).exp_m1()).max(0.0).sqrt())
}

/// Projects the cavity of a `(2, d)` state onto `|φ±⟩` and returns the
/// normalized mechanical remainder.
pub fn project_cavity(state: &PureState, branch: Branch) -> Result<ProjectedCat> {
    let dims = state.dims();
    if dims.len() != 2 || dims[0].dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "cavity projection needs dims (2, d), got {:?}",
            dims.iter().map(|m| m.dim()).collect::<Vec<_>>()
        )));
    }
    let d = dims[1].dim();
    let amps = state.amplitudes();
    let s = branch.sign();
    let v: Array1<C64> =
        Array1::from_shape_fn(d, |m| (amps[m] + amps[d + m] * s) / 2f64.sqrt());
    let probability: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if probability < DEGENERATE_PROBABILITY {
        return Err(Error::DegenerateBranch {
            branch: branch.symbol(),
            probability,
        });
    }
    let state = PureState::new(v, vec![dims[1]])?;
    Ok(ProjectedCat {
        branch,
        state,
        probability,
        norm_const: 1.0 / probability.sqrt(),
    })
}

/// `N± = 2{2 ± 2e^{−|α|²/2} Re[e^{iε}]}^{−1/2}`.
pub fn norm_const_closed_form(t: f64, p: &SystemParams, branch: Branch) -> Result<f64> {
    let e = effective_params(p)?;
    let a2 = coherent_amplitude(t, &e).norm_sqr();
    let x = 2.0 + branch.sign() * 2.0 * (-a2 / 2.0).exp() * kerr_phase(t, &e).cos();
    Ok(2.0 / x.sqrt())
}

/// `p± = {2 ± 2e^{−|α|²/2} Re[e^{iε}]}/4`.
pub fn branch_probability_closed_form(t: f64, p: &SystemParams, branch: Branch) -> Result<f64> {
    let n = norm_const_closed_form(t, p, branch)?;
    Ok(1.0 / (n * n))
}

/// Where a variance pair came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceSource {
    ClosedForm,
    Numeric,
}

/// Quadrature variances for `X = (b + b†)/2` and `Y = i(b† − b)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceReport {
    pub var_x: f64,
    pub var_y: f64,
    pub source: VarianceSource,
}

impl VarianceReport {
    /// `var_x · var_y`, bounded below by 1/16.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_y
    }
}

/// Helper functions of the closed-form variances at one time.
#[derive(Clone, Copy, Debug)]
struct Helpers {
    g: C64,
    g1: C64,
    h: C64,
    h1: C64,
    s: C64,
    s1: C64,
}

fn helpers(r: f64, omega_s: f64, t: f64) -> Helpers {
    let p = C64::from_polar(1.0, 2.0 * omega_s * t);
    let pinv = p.conj();
    let (ch, sh) = (r.cosh(), r.sinh());
    let one = C64::new(1.0, 0.0);
    Helpers {
        g: one * ch + p * sh,
        g1: one * ch - p * sh,
        h: one * ch * ch + p * (2.0 * r).sinh() + p * p * sh * sh,
        h1: one * ch * ch - p * (2.0 * r).sinh() + p * p * sh * sh,
        s: (pinv + p) * 0.5 * (2.0 * r).sinh() + (2.0 * r).cosh(),
        s1: -(pinv + p) * 0.5 * (2.0 * r).sinh() + (2.0 * r).cosh(),
    }
}

/// Closed-form variances split into the five printed brace groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceTerms {
    pub x: [f64; 5],
    pub y: [f64; 5],
}

impl VarianceTerms {
    pub fn var_x(&self) -> f64 {
        self.x.iter().sum()
    }

    pub fn var_y(&self) -> f64 {
        self.y.iter().sum()
    }
}

struct CatScalars {
    n2: f64,
    n4: f64,
    a2: C64,
    abs2: f64,
    e: C64,
    r: f64,
    helpers: Helpers,
}

fn cat_scalars(t: f64, p: &SystemParams) -> Result<CatScalars> {
    let ef = effective_params(p)?;
    let alpha = coherent_amplitude(t, &ef);
    let n = norm_const_closed_form(t, p, Branch::Plus)?;
    Ok(CatScalars {
        n2: n * n,
        n4: n.powi(4),
        a2: alpha * alpha,
        abs2: alpha.norm_sqr(),
        e: C64::from_polar(1.0, kerr_phase(t, &ef)),
        r: ef.r_s,
        helpers: helpers(ef.r_s, ef.omega_s, t),
    })
}

/// Term-by-term evaluation of the printed `(ΔX)²`, `(ΔY)²` for the `+`
/// branch, exactly as written (including the `s(t)` that opens the first
/// `(ΔY)²` brace).
pub fn variance_terms_printed(t: f64, p: &SystemParams) -> Result<VarianceTerms> {
    let c = cat_scalars(t, p)?;
    let Helpers { g, g1, h, h1, s, s1 } = c.helpers;
    let (n2, n4, a2, abs2, e) = (c.n2, c.n4, c.a2, c.abs2, c.e);
    let em = (-2.0 * c.r).exp();
    let ep = (2.0 * c.r).exp();
    let half = (-abs2 / 2.0).exp();
    let full = (-abs2).exp();
    let x = [
        n2 / 8.0 * em * (s.re + (h * a2).re + s.re * abs2),
        -n4 / 32.0 * em * ((g * g * a2).re + g.norm_sqr() * abs2),
        n2 / 8.0 * em * half * ((s * e).re + (h * a2 * e).re),
        -n4 / 32.0 * em * full * ((g * g * a2 * e * e).re + g.norm_sqr() * abs2),
        -n4 / 16.0 * em * half * ((e * g.norm_sqr() * abs2).re + (g * g * a2 * e).re),
    ];
    let y = [
        n2 / 8.0 * ep * (s.re - (h1 * a2).re + s1.re * abs2),
        n4 / 32.0 * ep * ((g1 * g1 * a2).re - g1.norm_sqr() * abs2),
        n2 / 8.0 * ep * half * ((s1 * e).re - (h1 * a2 * e).re),
        n4 / 32.0 * ep * full * ((g1 * g1 * a2 * e * e).re - g1.norm_sqr() * abs2),
        n4 / 16.0 * ep * half * ((g1 * g1 * a2 * e).re - (e * g1.norm_sqr() * abs2).re),
    ];
    Ok(VarianceTerms { x, y })
}

/// Five brace groups for a generic quadrature, parametrized by the
/// quadrature's squeeze scale `k`, mixing coefficient `u`, and helper pair
/// `(hq, sq)`. `X` is `(e^{−2r}, g, h, s)`; `Y` is `(e^{2r}, −i g₁, −h₁, s₁)`.
fn quadrature_terms(c: &CatScalars, k: f64, u: C64, hq: C64, sq: C64) -> [f64; 5] {
    let (n2, n4, a2, abs2, e) = (c.n2, c.n4, c.a2, c.abs2, c.e);
    let half = (-abs2 / 2.0).exp();
    let full = (-abs2).exp();
    [
        n2 / 8.0 * k * (sq.re + (hq * a2).re + sq.re * abs2),
        -n4 / 32.0 * k * ((u * u * a2).re + u.norm_sqr() * abs2),
        n2 / 8.0 * k * half * ((sq * e).re + (hq * a2 * e).re),
        -n4 / 32.0 * k * full * ((u * u * a2 * e * e).re + u.norm_sqr() * abs2),
        -n4 / 16.0 * k * half * ((e * u.norm_sqr() * abs2).re + (u * u * a2 * e).re),
    ]
}

/// The same five groups generated from one quadrature template, which
/// reproduces the `(ΔX)²` expression and fixes the `(ΔY)²` one.
pub fn variance_terms_rederived(t: f64, p: &SystemParams) -> Result<VarianceTerms> {
    let c = cat_scalars(t, p)?;
    let Helpers { g, g1, h, h1, s, s1 } = c.helpers;
    let x = quadrature_terms(&c, (-2.0 * c.r).exp(), g, h, s);
    let y = quadrature_terms(&c, (2.0 * c.r).exp(), C64::new(0.0, -1.0) * g1, -h1, s1);
    Ok(VarianceTerms { x, y })
}

/// Closed-form variances for the `+` branch, evaluated as printed.
pub fn variances_closed_form(t: f64, p: &SystemParams) -> Result<VarianceReport> {
    let terms = variance_terms_printed(t, p)?;
    Ok(VarianceReport {
        var_x: terms.var_x(),
        var_y: terms.var_y(),
        source: VarianceSource::ClosedForm,
    })
}

/// One brace group whose printed and template values differ.
#[derive(Clone, Debug, PartialEq)]
pub struct TermDiscrepancy {
    pub quadrature: char,
    /// 1-based index of the brace group.
    pub term: usize,
    pub printed: f64,
    pub rederived: f64,
}

/// Per-term comparison of the printed closed form, the template form, and
/// (optionally) a numeric reference.
#[derive(Clone, Debug)]
pub struct VarianceDiscrepancy {
    pub printed: VarianceTerms,
    pub rederived: VarianceTerms,
    pub numeric: Option<VarianceReport>,
    pub terms: Vec<TermDiscrepancy>,
}

impl VarianceDiscrepancy {
    pub fn is_clean(&self) -> bool {
        self.terms.is_empty()
    }
}

impl fmt::Display for VarianceDiscrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "printed   var_x = {:.12e}  var_y = {:.12e}",
            self.printed.var_x(),
            self.printed.var_y()
        )?;
        writeln!(
            f,
            "rederived var_x = {:.12e}  var_y = {:.12e}",
            self.rederived.var_x(),
            self.rederived.var_y()
        )?;
        if let Some(n) = &self.numeric {
            writeln!(f, "numeric   var_x = {:.12e}  var_y = {:.12e}", n.var_x, n.var_y)?;
        }
        for d in &self.terms {
            writeln!(
                f,
                "  term {}{}: printed {:.12e}, rederived {:.12e}, diff {:.3e}",
                d.quadrature,
                d.term,
                d.printed,
                d.rederived,
                d.printed - d.rederived
            )?;
        }
        Ok(())
    }
}

/// Compares the printed closed form against the template form term by term.
/// Differences above `tol` (absolute) are listed.
pub fn variance_discrepancy(
    t: f64,
    p: &SystemParams,
    numeric: Option<VarianceReport>,
    tol: f64,
) -> Result<VarianceDiscrepancy> {
    let printed = variance_terms_printed(t, p)?;
    let rederived = variance_terms_rederived(t, p)?;
    let mut terms = Vec::new();
    for (q, a, b) in [('x', &printed.x, &rederived.x), ('y', &printed.y, &rederived.y)] {
        for k in 0..5 {
            if (a[k] - b[k]).abs() > tol {
                terms.push(TermDiscrepancy {
                    quadrature: q,
                    term: k + 1,
                    printed: a[k],
                    rederived: b[k],
                });
            }
        }
    }
    Ok(VarianceDiscrepancy {
        printed,
        rederived,
        numeric,
        terms,
    })
}

/// `(X, Y)` quadrature operators on one mode.
pub fn quadratures(mode: ModeSpec) -> (Operator, Operator) {
    let b = annihilation(mode);
    let bd = b.adjoint();
    let x = (&b + &bd).scale(C64::new(0.5, 0.0));
    let y = (&bd - &b).scale(C64::new(0.0, 0.5));
    (x, y)
}

/// Variances by direct matrix expectation of the truncated `X` and `Y`.
pub fn variances_numeric(state: &PureState) -> Result<VarianceReport> {
    if state.dims().len() != 1 {
        return Err(Error::DimensionMismatch(
            "variances need a single-mode state".into(),
        ));
    }
    // the truncated X and Y applied through their two nonzero diagonals
    let psi = state.amplitudes();
    let d = psi.len();
    let sq: Vec<f64> = (0..=d).map(|k| (k as f64).sqrt()).collect();
    let (mut x2, mut y2, mut x1, mut y1) = (0.0, 0.0, 0.0, 0.0);
    for m in 0..d {
        let up = if m + 1 < d { psi[m + 1] * sq[m + 1] } else { C64::new(0.0, 0.0) };
        let down = if m > 0 { psi[m - 1] * sq[m] } else { C64::new(0.0, 0.0) };
        let xm = (up + down) * 0.5;
        let ym = (down - up) * C64::new(0.0, 0.5);
        x2 += xm.norm_sqr();
        y2 += ym.norm_sqr();
        x1 += (psi[m].conj() * xm).re;
        y1 += (psi[m].conj() * ym).re;
    }
    Ok(VarianceReport {
        var_x: x2 - x1 * x1,
        var_y: y2 - y1 * y1,
        source: VarianceSource::Numeric,
    })
}

/// Amplitudes `e^{−|α₀|²/2} α₀ⁿ/√n!` for `n < len`, by recurrence.
pub(crate) fn poisson_amplitudes(alpha0: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut c = C64::new((-alpha0.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            c = c * alpha0 / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Cavity state at `τ = 2π/ω_s` for an initial coherent state `α₀`:
/// `e^{−|α₀|²/2} Σ α₀ⁿ/√n! e^{i n² 2π g_s²/ω_s²} |n⟩`.
pub fn optical_state_at_tau(p: &SystemParams, alpha0: C64, cavity: ModeSpec) -> Result<PureState> {
    let e = effective_params(p)?;
    displacement_guard(alpha0, cavity)?;
    let theta = 2.0 * PI * e.g_s * e.g_s / (e.omega_s * e.omega_s);
    let amps: Array1<C64> = poisson_amplitudes(alpha0, cavity.dim())
        .into_iter()
        .enumerate()
        .map(|(n, c)| c * C64::from_polar(1.0, theta * (n * n) as f64))
        .collect();
    let state = PureState::new(amps, vec![cavity])?;
    state.check_leakage("optical state at tau")?;
    Ok(state)
}

/// Multicomponent optical cat families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CatKind {
    Two,
    Three,
    Four,
}

impl CatKind {
    pub const ALL: [CatKind; 3] = [CatKind::Two, CatKind::Three, CatKind::Four];

    /// `ω_sw/ω_b` at which the Kerr phase produces this cat for
    /// `g = 1.1×10⁵`, `ω_b = 2×10⁵`.
    pub fn omega_sw_ratio(self) -> f64 {
        match self {
            CatKind::Two => -0.71,
            CatKind::Three => -0.18,
            CatKind::Four => 0.5,
        }
    }

    /// Target `(g_s/ω_s)²`.
    pub fn kerr_ratio(self) -> f64 {
        match self {
            CatKind::Two => 0.25,
            CatKind::Three => 1.0 / 6.0,
            CatKind::Four => 0.125,
        }
    }

    pub fn components(self) -> usize {
        match self {
            CatKind::Two => 2,
            CatKind::Three => 3,
            CatKind::Four => 4,
        }
    }

    /// Coefficients and coherent amplitudes, before normalization.
    fn superposition(self, a: C64) -> Vec<(C64, C64)> {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let third = PI / 3.0;
        match self {
            CatKind::Two => {
                let pre = (-a.norm_sqr() / 2.0).exp();
                vec![((one + i) * 0.5 * pre, a), ((one - i) * 0.5 * pre, -a)]
            }
            CatKind::Three => {
                let denom = 1.0 + third.cos();
                let c1 = -i * third.sin() / denom;
                let c2 = (one + C64::from_polar(1.0, third)) / (2.0 * denom);
                vec![
                    (c1, -a),
                    (c2, a * C64::from_polar(1.0, third)),
                    (c2, a * C64::from_polar(1.0, -third)),
                ]
            }
            CatKind::Four => {
                let q = C64::from_polar(0.5, PI / 4.0);
                vec![(q, a), (-q, -a), (one * 0.5, i * a), (one * 0.5, -i * a)]
            }
        }
    }
}

impl fmt::Display for CatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CatKind::Two => "two",
            CatKind::Three => "three",
            CatKind::Four => "four",
        })
    }
}

impl std::str::FromStr for CatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "two" | "2" => Ok(CatKind::Two),
            "three" | "3" => Ok(CatKind::Three),
            "four" | "4" => Ok(CatKind::Four),
            other => Err(Error::InvalidRequest(format!(
                "cat kind must be two, three or four, got `{other}`"
            ))),
        }
    }
}

/// Normalized ideal multicomponent cat built from coherent components.
pub fn ideal_cat(kind: CatKind, alpha0: C64, mode: ModeSpec) -> Result<PureState> {
    if alpha0.norm() < 0.1 {
        return Err(Error::Degenerate(format!(
            "|alpha0| = {:.3e} < 0.1: the coherent components of a {kind}-component cat coincide",
            alpha0.norm()
        )));
    }
    let mut amps = Array1::<C64>::zeros(mode.dim());
    for (c, a) in kind.superposition(alpha0) {
        let comp = PureState::coherent(a, mode)?;
        amps.scaled_add(c, comp.amplitudes());
    }
    PureState::new(amps, vec![mode])
}
