//! Time evolution: exact unitary propagation and the cavity-loss master
//! equation
//!
//! ```text
//! dρ/dt = −i[H, ρ] + κ_a (2cρc† − c†cρ − ρc†c)
//! ```
//!
//! Note the factor-2 convention: a single photon decays as `e^{−2κ_a t}`.

use std::fmt;

use ndarray::{Array1, Array2, Zip};
use rayon::prelude::*;

use crate::analytic::{poisson_amplitudes, Branch, DEGENERATE_PROBABILITY};
use crate::error::{Error, Result};
use crate::fock::sparse::SparseMatrix;
use crate::fock::{displacement_guard, DensityOp, ModeSpec, PureState, C64};
use crate::model::{
    direct_propagator, effective_params, evolve_block_direct, factorized_propagator_guarded,
    hamiltonian_sparse, BlockGuard, SystemParams,
};

/// Propagation engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Factorized,
    DirectExpm,
    Lindblad,
}

/// Initial condition of an evolution.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(PureState),
    Mixed(DensityOp),
}

impl From<PureState> for InitialState {
    fn from(s: PureState) -> Self {
        InitialState::Pure(s)
    }
}

impl From<DensityOp> for InitialState {
    fn from(s: DensityOp) -> Self {
        InitialState::Mixed(s)
    }
}

impl InitialState {
    pub fn dims(&self) -> &[ModeSpec] {
        match self {
            InitialState::Pure(s) => s.dims(),
            InitialState::Mixed(r) => r.dims(),
        }
    }

    pub fn to_density(&self) -> DensityOp {
        match self {
            InitialState::Pure(s) => s.to_density(),
            InitialState::Mixed(r) => r.clone(),
        }
    }
}

/// Default local error target of the master-equation integrator, per unit
/// of `ω_b t`.
pub const LINDBLAD_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EvolutionRequest {
    pub initial: InitialState,
    pub params: SystemParams,
    pub t_final: f64,
    pub sample_times: Vec<f64>,
    pub method: Method,
    /// Local error target of the adaptive integrator (Lindblad only).
    pub tolerance: f64,
}

impl EvolutionRequest {
    /// Request ending at the last sample time.
    pub fn new(
        initial: impl Into<InitialState>,
        params: SystemParams,
        sample_times: Vec<f64>,
        method: Method,
    ) -> Self {
        let t_final = sample_times.last().copied().unwrap_or(0.0);
        Self {
            initial: initial.into(),
            params,
            t_final,
            sample_times,
            method,
            tolerance: LINDBLAD_TOL,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidRequest(format!(
                "t_final must be finite and non-negative, got {}",
                self.t_final
            )));
        }
        if self.sample_times.is_empty() {
            return Err(Error::InvalidRequest("no sample times".into()));
        }
        let mut prev = 0.0;
        for &t in &self.sample_times {
            if !(t >= prev && t <= self.t_final) {
                return Err(Error::InvalidRequest(format!(
                    "sample times must ascend within [0, {}], found {t}",
                    self.t_final
                )));
            }
            prev = t;
        }
        if self.initial.dims().len() != 2 {
            return Err(Error::DimensionMismatch(
                "evolution needs a (cavity, mechanics) state".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidRequest("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Invariant checks recorded for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleDiagnostics {
    pub time: f64,
    pub trace: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<(f64, DensityOp)>,
    pub diagnostics: Vec<SampleDiagnostics>,
    /// Pure samples, when the evolution was unitary from a pure state.
    pub pure_samples: Vec<(f64, PureState)>,
    /// Accepted integrator steps (Lindblad only).
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&DensityOp> {
        self.samples.last().map(|(_, r)| r)
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| (d.trace - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.hermiticity_defect)
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// An evolution that stopped early, with everything recorded up to the
/// failure.
#[derive(Debug)]
pub struct EvolutionFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for EvolutionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} samples)",
            self.error,
            self.partial.samples.len()
        )
    }
}

impl std::error::Error for EvolutionFailure {}

impl From<EvolutionFailure> for Error {
    fn from(f: EvolutionFailure) -> Self {
        f.error
    }
}

impl From<Error> for EvolutionFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: Trajectory::default(),
        }
    }
}

pub type EvolutionResult = std::result::Result<Trajectory, EvolutionFailure>;

/// Diagnostics of a density matrix. Eigenvalues are only computed up to
/// this joint dimension; larger pure samples record 0.
const EIGEN_DIAGNOSTIC_LIMIT: usize = 1024;

fn diagnose(t: f64, rho: &DensityOp, pure: bool) -> SampleDiagnostics {
    let min_eigenvalue = if pure && rho.dim() > EIGEN_DIAGNOSTIC_LIMIT {
        0.0
    } else {
        rho.min_eigenvalue()
    };
    SampleDiagnostics {
        time: t,
        trace: rho.trace(),
        hermiticity_defect: rho.hermiticity_defect(),
        min_eigenvalue,
    }
}

fn record(traj: &mut Trajectory, t: f64, rho: DensityOp, pure: bool) -> Result<()> {
    let diag = diagnose(t, &rho, pure);
    traj.diagnostics.push(diag);
    if diag.min_eigenvalue < -1e-6 {
        log::warn!(
            "density matrix at t = {t:e} s has eigenvalue {:.3e} (positivity violated)",
            diag.min_eigenvalue
        );
    }
    let checked = rho.validate().and_then(|_| rho.check_leakage(&format!("state at t = {t:e} s")));
    traj.samples.push((t, rho));
    checked
}

/// Exact unitary evolution by the factorized or the direct propagator.
pub fn evolve_unitary(req: &EvolutionRequest) -> EvolutionResult {
    req.validate()?;
    let method = req.method;
    if method == Method::Lindblad {
        return Err(Error::InvalidRequest("evolve_unitary needs a unitary method".into()).into());
    }
    let dims = req.initial.dims().to_vec();
    let guard = match &req.initial {
        InitialState::Pure(s) => BlockGuard::populated(s),
        InitialState::Mixed(r) => {
            let db = dims[1].dim();
            let pops = r.populations();
            BlockGuard::Levels(
                (0..dims[0].dim())
                    .filter(|&n| pops[n * db..(n + 1) * db].iter().any(|&p| p > 0.0))
                    .collect(),
            )
        }
    };
    let mut traj = Trajectory::default();
    for &t in &req.sample_times {
        let step = || -> Result<InitialState> {
            match method {
                Method::Factorized => {
                    let u = factorized_propagator_guarded(t, &req.params, &dims, &guard)?;
                    Ok(match &req.initial {
                        InitialState::Pure(s) => InitialState::Pure(u.apply(s)?),
                        InitialState::Mixed(r) => {
                            InitialState::Mixed(r.conjugate_by(&u.to_operator())?)
                        }
                    })
                }
                _ => {
                    let u = direct_propagator(t, &req.params, &dims)?;
                    Ok(match &req.initial {
                        InitialState::Pure(s) => InitialState::Pure(u.apply(s)?),
                        InitialState::Mixed(r) => InitialState::Mixed(r.conjugate_by(&u)?),
                    })
                }
            }
        };
        let out = match step() {
            Ok(o) => o,
            Err(error) => return Err(EvolutionFailure { error, partial: traj }),
        };
        let (rho, pure) = match out {
            InitialState::Pure(s) => {
                let rho = s.to_density();
                traj.pure_samples.push((t, s));
                (rho, true)
            }
            InitialState::Mixed(r) => (r, false),
        };
        if let Err(error) = record(&mut traj, t, rho, pure) {
            return Err(EvolutionFailure { error, partial: traj });
        }
    }
    Ok(traj)
}

/// Right-hand side of the master equation with its sparse pieces.
struct Liouvillian {
    h: SparseMatrix,
    c: SparseMatrix,
    /// Photon number of each joint basis index.
    n: Vec<f64>,
    kappa: f64,
}

impl Liouvillian {
    fn new(p: &SystemParams, dims: &[ModeSpec]) -> Result<Self> {
        let h = hamiltonian_sparse(p, dims)?;
        let (dc, db) = (dims[0].dim(), dims[1].dim());
        let mut t = Vec::new();
        for nc in 1..dc {
            let s = (nc as f64).sqrt();
            for m in 0..db {
                t.push(((nc - 1) * db + m, nc * db + m, C64::new(s, 0.0)));
            }
        }
        let c = SparseMatrix::from_triplets(dc * db, t);
        let n = (0..dc * db).map(|k| (k / db) as f64).collect();
        Ok(Self {
            h,
            c,
            n,
            kappa: p.kappa_a,
        })
    }

    fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let a = self.h.mul_dense(rho);
        let mi = C64::new(0.0, -1.0);
        // −i(Hρ − ρH) with ρH = (Hρ)†
        let mut out = Array2::<C64>::zeros(rho.dim());
        Zip::indexed(&mut out).for_each(|(i, j), o| {
            *o = mi * (a[[i, j]] - a[[j, i]].conj());
        });
        if self.kappa > 0.0 {
            let b = self.c.mul_dense(rho);
            let bh = b.t().mapv(|z| z.conj());
            let jump = self.c.mul_dense(&bh);
            let k = self.kappa;
            Zip::indexed(&mut out).for_each(|(i, j), o| {
                let sandwich = (jump[[i, j]] + jump[[j, i]].conj()) * 0.5;
                *o += (sandwich * 2.0 - rho[[i, j]] * (self.n[i] + self.n[j])) * k;
            });
        }
        out
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combo(base: &Array2<C64>, h: f64, coeffs: &[f64], ks: &[Array2<C64>]) -> Array2<C64> {
    let mut out = base.clone();
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            out.scaled_add(C64::new(h * c, 0.0), k);
        }
    }
    out
}

/// Master-equation evolution by adaptive Dormand–Prince 5(4) stepping on
/// the density matrix. The local error of each step is held below
/// `tolerance × ω_b h`.
pub fn evolve_lindblad(req: &EvolutionRequest) -> EvolutionResult {
    req.validate()?;
    if req.method != Method::Lindblad {
        return Err(Error::InvalidRequest("evolve_lindblad needs method lindblad".into()).into());
    }
    let dims = req.initial.dims().to_vec();
    let l = Liouvillian::new(&req.params, &dims)?;
    let wb = req.params.omega_b;
    let tol = req.tolerance;
    let h_min = 1e-12 / wb;

    let mut traj = Trajectory::default();
    let mut rho = req.initial.to_density().matrix().clone();
    let mut t = 0.0f64;
    let mut h = 1e-3 / wb;
    let mut k1 = l.apply(&rho);
    for &ts in &req.sample_times {
        while t < ts {
            let last = ts - t <= h * (1.0 + 1e-12);
            let hs = if last { ts - t } else { h };
            let mut ks = vec![k1.clone()];
            for s in 0..6 {
                let y = combo(&rho, hs, &A[s][..=s], &ks);
                ks.push(l.apply(&y));
            }
            let y5 = combo(&rho, hs, &A[5], &ks[..6]);
            let mut err = 0.0f64;
            let mut e_acc = Array2::<C64>::zeros(rho.dim());
            for (c, k) in E.iter().zip(&ks) {
                if *c != 0.0 {
                    e_acc.scaled_add(C64::new(hs * c, 0.0), k);
                }
            }
            for z in e_acc.iter() {
                err = err.max(z.norm());
            }
            let allowed = tol * wb * hs;
            let ratio = err / allowed;
            if ratio <= 1.0 {
                t = if last { ts } else { t + hs };
                rho = y5;
                k1 = ks.pop().expect("seven stages");
                traj.steps += 1;
            }
            // error per unit step: local order 4 relative to the allowance
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.25)).clamp(0.2, 5.0)
            };
            if !(last && ratio <= 1.0) {
                h = hs * factor;
            }
            if h < h_min {
                let error = Error::StepUnderflow { t, h };
                return Err(EvolutionFailure { error, partial: traj });
            }
        }
        let sample = DensityOp::from_parts(rho.clone(), dims.clone());
        if let Err(error) = record(&mut traj, ts, sample, false) {
            return Err(EvolutionFailure { error, partial: traj });
        }
    }
    Ok(traj)
}

/// Dispatches on `req.method`.
pub fn evolve(req: &EvolutionRequest) -> EvolutionResult {
    match req.method {
        Method::Lindblad => evolve_lindblad(req),
        _ => evolve_unitary(req),
    }
}

/// Mechanical state conditioned on a cavity outcome `|φ±⟩`.
#[derive(Clone, Debug)]
pub struct ConditionalState {
    pub branch: Branch,
    pub state: DensityOp,
    pub probability: f64,
}

/// `ρ_b ∝ ⟨φ±|ρ|φ±⟩` with `|φ±⟩ = (|0⟩ ± |1⟩)/√2` on the cavity.
pub fn conditional_mechanical_state(rho: &DensityOp, branch: Branch) -> Result<ConditionalState> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0].dim() < 2 {
        return Err(Error::DimensionMismatch(
            "conditional state needs a (cavity >= 2, mechanics) density matrix".into(),
        ));
    }
    let db = dims[1].dim();
    let m = rho.matrix();
    let s = branch.sign();
    let block = |a: usize, b: usize| m.slice(ndarray::s![a * db..(a + 1) * db, b * db..(b + 1) * db]);
    let mut out = block(0, 0).to_owned();
    out += &block(1, 1);
    out.scaled_add(C64::new(s, 0.0), &block(0, 1));
    out.scaled_add(C64::new(s, 0.0), &block(1, 0));
    out.mapv_inplace(|z| z * 0.5);
    let probability: f64 = out.diag().iter().map(|z| z.re).sum();
    if probability < DEGENERATE_PROBABILITY {
        return Err(Error::DegenerateBranch {
            branch: branch.symbol(),
            probability,
        });
    }
    out.mapv_inplace(|z| z / probability);
    let state = DensityOp::new(out, vec![dims[1]])?;
    Ok(ConditionalState {
        branch,
        state,
        probability,
    })
}

/// Brute-force evolution of `|α₀⟩_c|0⟩_b` with each photon-number block
/// propagated separately in its own mechanical truncation.
#[derive(Clone, Debug)]
pub struct CavityEvolution {
    /// Reduced cavity state.
    pub cavity: DensityOp,
    /// Entanglement entropy (nats) between cavity and mechanics.
    pub entropy: f64,
    /// Mechanical truncation used for each photon number (0 for skipped
    /// blocks of weight below [`NEGLIGIBLE_WEIGHT`]).
    pub block_dims: Vec<usize>,
}

/// Photon-number weight below which a block is not propagated and its rows of
/// the cavity state are left at zero.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-14;

/// Mechanical truncation for the `n`-photon block: the displacement guard
/// for `n` times the largest coherent amplitude, enlarged by the squeeze.
pub fn block_dim(n: usize, p: &SystemParams) -> Result<usize> {
    let e = effective_params(p)?;
    let r = e.r_s.abs();
    let amp = n as f64 * 2.0 * e.eta.abs() * (2.0 * r).exp();
    let base = (amp * amp + 6.0 * amp + 10.0).ceil() as usize;
    // squeezed-vacuum tail of the composite squeeze (up to 2r)
    Ok(base + (40.0 * (2.0 * r).sinh()).ceil() as usize + 20)
}

/// Evolves `|α₀⟩_c|0⟩_b` under `H` to time `t` by direct exponential action
/// on every photon-number block, then traces out the mechanics.
pub fn evolve_coherent_cavity(
    p: &SystemParams,
    alpha0: C64,
    t: f64,
    cavity: ModeSpec,
) -> Result<CavityEvolution> {
    p.validate()?;
    displacement_guard(alpha0, cavity)?;
    let coeffs = poisson_amplitudes(alpha0, cavity.dim());
    let blocks: Vec<Result<Array1<C64>>> = (0..cavity.dim())
        .into_par_iter()
        .map(|n| {
            if coeffs[n].norm_sqr() < NEGLIGIBLE_WEIGHT {
                return Ok(Array1::zeros(0));
            }
            let d = block_dim(n, p)?;
            let mut v = Array1::<C64>::zeros(d);
            v[0] = C64::new(1.0, 0.0);
            let out = evolve_block_direct(p, n, &v, t)?;
            let mech = ModeSpec::new(d)?;
            PureState::from_parts(out.clone(), vec![mech])
                .check_leakage(&format!("mechanical block for n = {n} photons"))?;
            Ok(out)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let dc = cavity.dim();
    let mut rho = Array2::<C64>::zeros((dc, dc));
    for a in 0..dc {
        for b in 0..=a {
            let k = blocks[a].len().min(blocks[b].len());
            let ov: C64 = (0..k).map(|m| blocks[b][m].conj() * blocks[a][m]).sum();
            let v = coeffs[a] * coeffs[b].conj() * ov;
            rho[[a, b]] = v;
            rho[[b, a]] = v.conj();
        }
    }
    let cav = DensityOp::from_parts(rho, vec![cavity]);
    cav.check_leakage("cavity state")?;
    let entropy = cav.entropy();
    Ok(CavityEvolution {
        cavity: cav,
        entropy,
        block_dims: blocks.iter().map(|b| b.len()).collect(),
    })
}
