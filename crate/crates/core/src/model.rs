//! Physical parameters, the effective squeezed-frame parameters, the
//! two-mode Hamiltonian and its propagators.
//!
//! The factorized propagator is
//!
//! ```text
//! U(t) = S(r_s) S(−r_s e^{−2iω_s t}) e^{−iω_c' n t} e^{i n² ε(t)} D_b(n α(t)) e^{−iω_s b†b t}
//! ```
//!
//! with `n = c†c`. Since `n` is conserved, `U` is block diagonal in the
//! cavity Fock index and is stored as one mechanical block per level. It
//! agrees with `exp(−iHt)` up to the global phase `e^{−i(ω_s−ω_b)t/2}` that
//! comes from normal-ordering the squeezed oscillator.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fock::ops::{displacement_unchecked, squeeze_unchecked};
use crate::fock::sparse::{expm_multiply, SparseMatrix};
use crate::fock::{
    displacement_guard, expm, ModeSpec, Operator, PureState, C64, MAX_SQUEEZE,
};

/// Physical inputs. All frequencies are angular (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_b: f64,
    pub omega_sw: f64,
    pub g: f64,
    pub kappa_a: f64,
    /// The `ω_c'` term. Zero puts the cavity in the interaction picture.
    pub omega_c_eff: f64,
}

impl SystemParams {
    /// Checked constructor with `κ_a = 0` and `ω_c' = 0`.
    pub fn new(omega_b: f64, omega_sw: f64, g: f64) -> Result<Self> {
        let p = Self {
            omega_b,
            omega_sw,
            g,
            kappa_a: 0.0,
            omega_c_eff: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// BEC cavity with `ω_b = 2×10⁵`, `g = 6×10⁵`, `ω_sw = 0`.
    pub fn bec() -> Self {
        Self {
            omega_b: 2e5,
            omega_sw: 0.0,
            g: 6e5,
            kappa_a: 0.0,
            omega_c_eff: 0.0,
        }
    }

    /// Solid-state comparison: `ω_b = 10⁷`, `g = 10⁴`.
    pub fn solid_state() -> Self {
        Self {
            omega_b: 1e7,
            g: 1e4,
            ..Self::bec()
        }
    }

    /// Weaker coupling `g = 1.1×10⁵` used for optical cats.
    pub fn optical() -> Self {
        Self {
            g: 1.1e5,
            ..Self::bec()
        }
    }

    pub fn with_omega_sw_ratio(self, ratio: f64) -> Self {
        Self {
            omega_sw: ratio * self.omega_b,
            ..self
        }
    }

    pub fn with_kappa(self, kappa_a: f64) -> Self {
        Self { kappa_a, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |param: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain {
                    param,
                    value: v,
                    reason: "must be finite".into(),
                })
            }
        };
        finite("omega_b", self.omega_b)?;
        finite("omega_sw", self.omega_sw)?;
        finite("g", self.g)?;
        finite("kappa_a", self.kappa_a)?;
        finite("omega_c_eff", self.omega_c_eff)?;
        if self.omega_b <= 0.0 {
            return Err(Error::Domain {
                param: "omega_b",
                value: self.omega_b,
                reason: "must be positive".into(),
            });
        }
        if self.omega_sw.abs() >= 2.0 * self.omega_b {
            return Err(Error::Domain {
                param: "omega_sw",
                value: self.omega_sw,
                reason: format!(
                    "|omega_sw| must be below 2*omega_b = {} (squeeze parameter diverges)",
                    2.0 * self.omega_b
                ),
            });
        }
        if self.g < 0.0 {
            return Err(Error::Domain {
                param: "g",
                value: self.g,
                reason: "must be non-negative".into(),
            });
        }
        if self.kappa_a < 0.0 {
            return Err(Error::Domain {
                param: "kappa_a",
                value: self.kappa_a,
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Parameters of the squeezed-frame oscillator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    pub r_s: f64,
    pub omega_s: f64,
    pub g_s: f64,
    pub eta: f64,
    pub delta: f64,
}

impl EffectiveParams {
    /// Oscillation period `2π/ω_s`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_s
    }

    /// `(g_s/ω_s)²`, the Kerr strength per period in units of `2π`.
    pub fn kerr_ratio(&self) -> f64 {
        (self.g_s / self.omega_s).powi(2)
    }
}

pub fn effective_params(p: &SystemParams) -> Result<EffectiveParams> {
    p.validate()?;
    let (wb, wsw) = (p.omega_b, p.omega_sw);
    let r_s = 0.25 * ((2.0 * wb + wsw) / (2.0 * wb - wsw)).ln();
    let omega_s = (wb - 0.5 * wsw) * (2.0 * r_s).exp();
    let g_s = p.g * (-r_s).exp() / 2f64.sqrt();
    let eta = -g_s / omega_s;
    let delta = g_s * g_s / omega_s;
    debug_assert!(omega_s > 0.0);
    debug_assert!((omega_s - (wb * wb - 0.25 * wsw * wsw).sqrt()).abs() <= 1e-9 * omega_s);
    Ok(EffectiveParams {
        r_s,
        omega_s,
        g_s,
        eta,
        delta,
    })
}

/// `f(t) = η(1 − e^{−iω_s t})`.
pub fn drive_amplitude(t: f64, e: &EffectiveParams) -> C64 {
    e.eta * (C64::new(1.0, 0.0) - C64::from_polar(1.0, -e.omega_s * t))
}

/// `α(t) = f cosh r_s − f* e^{−2iω_s t} sinh r_s`.
pub fn coherent_amplitude(t: f64, e: &EffectiveParams) -> C64 {
    let f = drive_amplitude(t, e);
    f * e.r_s.cosh() - f.conj() * C64::from_polar(1.0, -2.0 * e.omega_s * t) * e.r_s.sinh()
}

/// `ε(t) = δt − η² sin(ω_s t)`, unreduced.
pub fn kerr_phase(t: f64, e: &EffectiveParams) -> f64 {
    e.delta * t - e.eta * e.eta * (e.omega_s * t).sin()
}

/// Argument of the time-dependent squeeze factor, `−r_s e^{−2iω_s t}`.
pub fn second_squeeze_arg(t: f64, e: &EffectiveParams) -> C64 {
    C64::from_polar(-e.r_s, -2.0 * e.omega_s * t)
}

fn two_mode(dims: &[ModeSpec]) -> Result<(ModeSpec, ModeSpec)> {
    match dims {
        [c, b] => Ok((*c, *b)),
        _ => Err(Error::DimensionMismatch(format!(
            "expected (cavity, mechanics) dims, got {} factors",
            dims.len()
        ))),
    }
}

/// Triplets of the mechanical Hamiltonian conditioned on `n` photons:
/// `ω_c' n + ω_b b†b + ¼ω_sw(b² + b†²) + (g/√2) n (b + b†)`.
fn block_triplets(p: &SystemParams, n: usize, dim: usize) -> Vec<(usize, usize, C64)> {
    let nf = n as f64;
    let mut t = Vec::with_capacity(5 * dim);
    let coupling = p.g / 2f64.sqrt() * nf;
    for m in 0..dim {
        t.push((m, m, C64::new(p.omega_c_eff * nf + p.omega_b * m as f64, 0.0)));
        if m >= 1 && coupling != 0.0 {
            let s = (m as f64).sqrt() * coupling;
            t.push((m, m - 1, C64::new(s, 0.0)));
            t.push((m - 1, m, C64::new(s, 0.0)));
        }
        if m >= 2 && p.omega_sw != 0.0 {
            let s = ((m * (m - 1)) as f64).sqrt() * 0.25 * p.omega_sw;
            t.push((m, m - 2, C64::new(s, 0.0)));
            t.push((m - 2, m, C64::new(s, 0.0)));
        }
    }
    t
}

/// Mechanical block of `H` for cavity Fock level `n`, sparse.
pub fn mechanical_block(p: &SystemParams, n: usize, mech: ModeSpec) -> SparseMatrix {
    SparseMatrix::from_triplets(mech.dim(), block_triplets(p, n, mech.dim()))
}

/// Full two-mode Hamiltonian as a sparse matrix on `(cavity, mechanics)`.
pub fn hamiltonian_sparse(p: &SystemParams, dims: &[ModeSpec]) -> Result<SparseMatrix> {
    p.validate()?;
    let (cav, mech) = two_mode(dims)?;
    let db = mech.dim();
    let mut all = Vec::new();
    for n in 0..cav.dim() {
        let off = n * db;
        all.extend(
            block_triplets(p, n, db)
                .into_iter()
                .map(|(i, j, v)| (off + i, off + j, v)),
        );
    }
    Ok(SparseMatrix::from_triplets(cav.dim() * db, all))
}

/// `H = ω_c' c†c + ω_b b†b + ¼ω_sw(b² + b†²) + (g/√2) c†c(b + b†)` as a
/// dense operator on `(cavity, mechanics)`.
pub fn build_hamiltonian(p: &SystemParams, dims: &[ModeSpec]) -> Result<Operator> {
    let h = hamiltonian_sparse(p, dims)?;
    Operator::new(h.to_dense(), dims.to_vec())
}

/// `exp(−iHt)` by dense exponentiation.
pub fn direct_propagator(t: f64, p: &SystemParams, dims: &[ModeSpec]) -> Result<Operator> {
    let h = build_hamiltonian(p, dims)?;
    let gen = h.matrix().mapv(|z| z * C64::new(0.0, -t));
    Operator::new(expm(&gen), dims.to_vec())
}

/// Applies `exp(−iH_n t)` to one mechanical vector conditioned on `n`
/// photons, by Taylor action of the sparse block.
pub fn evolve_block_direct(
    p: &SystemParams,
    n: usize,
    psi: &Array1<C64>,
    t: f64,
) -> Result<Array1<C64>> {
    p.validate()?;
    let mech = ModeSpec::new(psi.len())?;
    let gen = mechanical_block(p, n, mech).scale(C64::new(0.0, -t));
    Ok(expm_multiply(&gen, psi))
}

/// Which cavity blocks of a factorized propagator must pass the truncation
/// guard.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockGuard {
    /// Every block (the operator is meant to act on arbitrary states).
    All,
    /// Only the listed cavity levels.
    Levels(Vec<usize>),
    /// No block guard. Outputs of [`FactorizedPropagator::apply`] are still
    /// checked for leakage.
    None,
}

impl BlockGuard {
    /// Guards exactly the cavity levels `state` populates.
    pub fn populated(state: &PureState) -> Self {
        let dims = state.dims();
        if dims.len() != 2 {
            return BlockGuard::All;
        }
        let db = dims[1].dim();
        let amps = state.amplitudes();
        let levels = (0..dims[0].dim())
            .filter(|&n| (0..db).any(|m| amps[n * db + m].norm_sqr() > 0.0))
            .collect();
        BlockGuard::Levels(levels)
    }

    fn covers(&self, n: usize) -> bool {
        match self {
            BlockGuard::All => true,
            BlockGuard::Levels(l) => l.contains(&n),
            BlockGuard::None => false,
        }
    }
}

/// Block-diagonal factorized propagator at a fixed time.
#[derive(Clone, Debug)]
pub struct FactorizedPropagator {
    t: f64,
    dims: Vec<ModeSpec>,
    blocks: Vec<Array2<C64>>,
}

impl FactorizedPropagator {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dims(&self) -> &[ModeSpec] {
        &self.dims
    }

    /// Mechanical block for cavity level `n`, including its photon phases.
    pub fn block(&self, n: usize) -> &Array2<C64> {
        &self.blocks[n]
    }

    pub fn to_operator(&self) -> Operator {
        let db = self.dims[1].dim();
        let n = self.dims[0].dim() * db;
        let mut m = Array2::<C64>::zeros((n, n));
        for (k, b) in self.blocks.iter().enumerate() {
            m.slice_mut(ndarray::s![k * db..(k + 1) * db, k * db..(k + 1) * db])
                .assign(b);
        }
        Operator::from_parts(m, self.dims.clone())
    }

    /// Applies the propagator blockwise; fails if the result leaks.
    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        if psi.dims() != self.dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "propagator on {:?}, state on {:?}",
                self.dims,
                psi.dims()
            )));
        }
        let out = self.apply_unchecked(psi);
        out.check_leakage(&format!("factorized evolution to t = {:e} s", self.t))?;
        Ok(out)
    }

    /// Blockwise application without the output leakage check.
    pub fn apply_unchecked(&self, psi: &PureState) -> PureState {
        let db = self.dims[1].dim();
        let amps = psi.amplitudes();
        let mut out = Array1::<C64>::zeros(amps.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let seg = amps.slice(ndarray::s![k * db..(k + 1) * db]);
            out.slice_mut(ndarray::s![k * db..(k + 1) * db])
                .assign(&b.dot(&seg));
        }
        PureState::from_parts(out, self.dims.clone())
    }
}

/// Builds the factorized propagator with every block guarded.
pub fn factorized_propagator(
    t: f64,
    p: &SystemParams,
    dims: &[ModeSpec],
) -> Result<FactorizedPropagator> {
    factorized_propagator_guarded(t, p, dims, &BlockGuard::All)
}

/// Builds the factorized propagator, guarding the blocks selected by
/// `guard`. A guarded block must satisfy the displacement guard for `nα(t)`
/// and keep the mechanical vacuum inside the truncation.
pub fn factorized_propagator_guarded(
    t: f64,
    p: &SystemParams,
    dims: &[ModeSpec],
    guard: &BlockGuard,
) -> Result<FactorizedPropagator> {
    let e = effective_params(p)?;
    let (cav, mech) = two_mode(dims)?;
    if e.r_s.abs() > MAX_SQUEEZE {
        return Err(Error::leakage(
            "factorized propagator",
            format!("squeeze parameter r_s = {:.4} exceeds {MAX_SQUEEZE}", e.r_s),
        ));
    }
    let db = mech.dim();
    let alpha = coherent_amplitude(t, &e);
    let eps = kerr_phase(t, &e);
    let squeeze = squeeze_unchecked(C64::new(e.r_s, 0.0), db)
        .dot(&squeeze_unchecked(second_squeeze_arg(t, &e), db));
    let rotation: Vec<C64> = (0..db)
        .map(|m| C64::from_polar(1.0, -e.omega_s * t * m as f64))
        .collect();

    let mut blocks = Vec::with_capacity(cav.dim());
    for n in 0..cav.dim() {
        let nf = n as f64;
        let xi = alpha * nf;
        if guard.covers(n) {
            displacement_guard(xi, mech).map_err(|err| annotate(err, n, t))?;
        }
        let d = if n == 0 {
            Array2::eye(db)
        } else {
            displacement_unchecked(xi, db)
        };
        let phase = C64::from_polar(1.0, nf * nf * eps - p.omega_c_eff * nf * t);
        let mut block = squeeze.dot(&d) * phase;
        for (m, r) in rotation.iter().enumerate() {
            block.column_mut(m).mapv_inplace(|z| z * *r);
        }
        if guard.covers(n) {
            let col = block.column(0).to_owned();
            PureState::from_parts(col, vec![mech])
                .check_leakage(&format!(
                    "factorized propagator block n = {n} at t = {t:e} s"
                ))?;
        }
        blocks.push(block);
    }
    Ok(FactorizedPropagator {
        t,
        dims: vec![cav, mech],
        blocks,
    })
}

fn annotate(err: Error, n: usize, t: f64) -> Error {
    match err {
        Error::Leakage { what, detail } => Error::Leakage {
            what: format!("{what} in cavity block n = {n} at t = {t:e} s"),
            detail,
        },
        other => other,
    }
}

/// Removes the free cavity rotation `exp(−iω_c' c†c t)` from a state on
/// `(cavity, mechanics)`, mapping it to the interaction picture.
pub fn rotate_out_cavity(psi: &PureState, t: f64, p: &SystemParams) -> Result<PureState> {
    let (cav, mech) = two_mode(psi.dims())?;
    let db = mech.dim();
    let mut amps = psi.amplitudes().clone();
    for n in 0..cav.dim() {
        let ph = C64::from_polar(1.0, p.omega_c_eff * n as f64 * t);
        amps.slice_mut(ndarray::s![n * db..(n + 1) * db])
            .mapv_inplace(|z| z * ph);
    }
    Ok(PureState::from_parts(amps, psi.dims().to_vec()))
}
