//! State diagnostics: Wigner functions, fidelities, entanglement.
//!
//! The Wigner function is `W(ξ) = (2/π) Tr[D†(ξ) ρ D(ξ) (−1)^{b†b}]` with
//! `ξ = x + iy`, so the marginal in `x` is the distribution of the quadrature
//! `X = (b + b†)/2` and the vacuum is `(2/π) e^{−2|ξ|²}`.
//!
//! [`wigner`] uses `D(ξ)(−1)^{n}D†(ξ) = D(2ξ)(−1)^{n}` and evaluates
//! `(2/π) Σ ρ_{nm} ⟨m|D(2ξ)|n⟩ (−1)^n` with displacement matrix elements from
//! a three-term recurrence; it only touches matrix elements inside the
//! support of `ρ`, so it needs no extra truncation. [`wigner_pointwise`]
//! displaces the eigenvectors of `ρ` in an enlarged working space and sums the
//! parity-weighted populations directly.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::ops::displacement_triplets;
use crate::fock::sparse::{expm_multiply, SparseMatrix};
use crate::fock::{displacement_guard, DensityOp, ModeSpec, PureState, C64};

/// Largest `|2ξ|²/2` accepted by the recurrence path; beyond this the
/// `e^{−|2ξ|²/2}` seed underflows.
pub const WIGNER_MAX_EXPONENT: f64 = 700.0;

/// Real Wigner values on a rectangular grid. `values[[i, j]]` is `W` at
/// `x_axis[i] + i·y_axis[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub values: Array2<f64>,
    /// Largest `|Im W|` seen while evaluating.
    pub imag_residue: f64,
}

/// Mean and variance of `Re ξ` and `Im ξ` under `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        spacing(&self.x_axis)
    }

    pub fn dy(&self) -> f64 {
        spacing(&self.y_axis)
    }

    /// Riemann sum `Σ W Δx Δy`.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.dx() * self.dy()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid coordinates of the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = (0, 0);
        for ((i, j), v) in self.values.indexed_iter() {
            if *v > self.values[best] {
                best = (i, j);
            }
        }
        (self.x_axis[best.0], self.y_axis[best.1])
    }

    pub fn value_at(&self, x: f64, y: f64) -> Option<f64> {
        let near = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(k, _)| k)
        };
        Some(self.values[[near(&self.x_axis, x)?, near(&self.y_axis, y)?]])
    }

    /// Moments of `Re ξ` and `Im ξ`, normalized by the grid integral.
    pub fn moments(&self) -> GridMoments {
        let (mut s0, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((i, j), w) in self.values.indexed_iter() {
            let (x, y) = (self.x_axis[i], self.y_axis[j]);
            s0 += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            syy += w * y * y;
        }
        let (mx, my) = (sx / s0, sy / s0);
        GridMoments {
            mean_x: mx,
            mean_y: my,
            var_x: sxx / s0 - mx * mx,
            var_y: syy / s0 - my * my,
        }
    }

    /// `∫ W dy` on the x axis.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dy = self.dy();
        self.values.rows().into_iter().map(|r| r.sum() * dy).collect()
    }

    /// Strict 2D local maxima (8-neighbourhood, interior points) above
    /// `threshold`, as grid coordinates.
    pub fn local_maxima(&self, threshold: f64) -> Vec<(f64, f64, f64)> {
        let (nx, ny) = self.values.dim();
        let mut out = Vec::new();
        for i in 1..nx.saturating_sub(1) {
            for j in 1..ny.saturating_sub(1) {
                let v = self.values[[i, j]];
                if v <= threshold {
                    continue;
                }
                let mut is_max = true;
                for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let w = self.values[[(i as i64 + di) as usize, (j as i64 + dj) as usize]];
                        if w >= v {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    out.push((self.x_axis[i], self.y_axis[j], v));
                }
            }
        }
        out
    }

    /// `Σ |min(W, 0)| Δx Δy`.
    pub fn negativity_volume(&self) -> f64 {
        negativity_volume(self)
    }
}

/// `Σ |min(W, 0)| Δx Δy`.
pub fn negativity_volume(w: &WignerGrid) -> f64 {
    w.values.iter().map(|v| (-v).max(0.0)).sum::<f64>() * w.dx() * w.dy()
}

fn single_mode(rho: &DensityOp) -> Result<ModeSpec> {
    match rho.dims() {
        [m] => Ok(*m),
        d => Err(Error::DimensionMismatch(format!(
            "Wigner function needs a single-mode state, got {} factors",
            d.len()
        ))),
    }
}

/// `⟨m|D(β)|n⟩` for `m, n < d` from the Laguerre form
/// `⟨n+k|D(β)|n⟩ = √(n!/(n+k)!) βᵏ e^{−|β|²/2} L_n^k(|β|²)`
/// (and its mirror `(−β*)ᵏ` above the diagonal).
///
/// For each offset `k` the normalized functions
/// `T_n = √(n!/(n+k)!) |β|ᵏ e^{−|β|²/2} L_n^k(|β|²)` obey
/// `√(n(n+k)) T_n = (2n−1+k−x) T_{n−1} − √((n−1)(n−1+k)) T_{n−2}`, which is
/// run upward from a log-space seed, so no intermediate grows beyond the
/// final magnitudes.
pub(crate) fn displacement_elements(beta: C64, d: usize, out: &mut Array2<C64>) {
    let x = beta.norm_sqr();
    let ln_x = x.ln();
    let (below, above) = if x > 0.0 {
        let u = beta / x.sqrt();
        (u, -u.conj())
    } else {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    };
    let mut ln_fact = 0.0;
    let mut below_k = C64::new(1.0, 0.0);
    let mut above_k = C64::new(1.0, 0.0);
    for k in 0..d {
        if k > 0 {
            ln_fact += (k as f64).ln();
            below_k *= below;
            above_k *= above;
        }
        let kf = k as f64;
        let seed = if k == 0 {
            (-x / 2.0).exp()
        } else if x > 0.0 {
            (kf / 2.0 * ln_x - x / 2.0 - ln_fact / 2.0).exp()
        } else {
            0.0
        };
        let (mut prev, mut cur) = (0.0, seed);
        for n in 0..d - k {
            if n > 0 {
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0 + kf - x) * cur
                    - ((nf - 1.0) * (nf - 1.0 + kf)).sqrt() * prev)
                    / (nf * (nf + kf)).sqrt();
                prev = cur;
                cur = next;
            }
            out[[n + k, n]] = below_k * cur;
            if k > 0 {
                out[[n, n + k]] = above_k * cur;
            }
        }
    }
}

/// Highest level carrying weight in `ρ`, plus one.
fn support(rho: &DensityOp) -> usize {
    let m = rho.matrix();
    let d = m.nrows();
    (0..d)
        .rev()
        .find(|&k| (0..d).any(|j| m[[k, j]].norm() > 0.0))
        .map_or(1, |k| k + 1)
}

fn check_rho(rho: &DensityOp, x_axis: &[f64], y_axis: &[f64]) -> Result<ModeSpec> {
    let mode = single_mode(rho)?;
    rho.check_leakage("Wigner function input")?;
    if x_axis.is_empty() || y_axis.is_empty() {
        return Err(Error::InvalidRequest("Wigner grid axes must be non-empty".into()));
    }
    if x_axis.iter().chain(y_axis).any(|v| !v.is_finite()) {
        return Err(Error::InvalidRequest("Wigner grid axes must be finite".into()));
    }
    Ok(mode)
}

fn max_extent(x_axis: &[f64], y_axis: &[f64]) -> f64 {
    let mx = x_axis.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let my = y_axis.iter().map(|v| v.abs()).fold(0.0, f64::max);
    mx.hypot(my)
}

/// `W` at a single point by the recurrence path, returning the complex sum
/// so callers can monitor the imaginary residue.
fn wigner_point(rho: &Array2<C64>, d: usize, xi: C64, work: &mut Array2<C64>) -> C64 {
    displacement_elements(xi * 2.0, d, work);
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..d {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut row = C64::new(0.0, 0.0);
        for m in 0..d {
            row += rho[[n, m]] * work[[m, n]];
        }
        acc += row * sign;
    }
    acc * (2.0 / PI)
}

/// Wigner function on a grid by the displacement-recurrence path.
///
/// Points are evaluated independently in parallel; each value depends only
/// on its own coordinates, so the result is bit-identical for any thread
/// count.
pub fn wigner(rho: &DensityOp, x_axis: &[f64], y_axis: &[f64]) -> Result<WignerGrid> {
    check_rho(rho, x_axis, y_axis)?;
    let ext = 2.0 * max_extent(x_axis, y_axis);
    if ext * ext / 2.0 > WIGNER_MAX_EXPONENT {
        return Err(Error::Domain {
            param: "wigner grid extent",
            value: ext / 2.0,
            reason: format!(
                "|xi| up to {:.3} underflows the displacement seed (limit |2 xi|^2/2 <= {WIGNER_MAX_EXPONENT})",
                ext / 2.0
            ),
        });
    }
    let d = support(rho);
    let m = rho.matrix().slice(ndarray::s![..d, ..d]).to_owned();
    let (nx, ny) = (x_axis.len(), y_axis.len());
    let rows: Vec<(Vec<f64>, f64)> = (0..nx)
        .into_par_iter()
        .map_init(
            || Array2::<C64>::zeros((d, d)),
            |work, i| {
                let mut row = Vec::with_capacity(ny);
                let mut resid = 0.0f64;
                for &y in y_axis {
                    let w = wigner_point(&m, d, C64::new(x_axis[i], y), work);
                    resid = resid.max(w.im.abs());
                    row.push(w.re);
                }
                (row, resid)
            },
        )
        .collect();
    let mut values = Array2::<f64>::zeros((nx, ny));
    let mut imag_residue = 0.0f64;
    for (i, (row, r)) in rows.into_iter().enumerate() {
        imag_residue = imag_residue.max(r);
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(WignerGrid {
        x_axis: x_axis.to_vec(),
        y_axis: y_axis.to_vec(),
        values,
        imag_residue,
    })
}

/// `W` along the segment from `a` to `b` (as `(x, y)` pairs), `n` points.
/// Returns `(s, W)` with `s ∈ [0, 1]` the fraction along the segment.
pub fn wigner_line(rho: &DensityOp, a: (f64, f64), b: (f64, f64), n: usize) -> Result<Vec<(f64, f64)>> {
    let xs = [a.0, b.0];
    let ys = [a.1, b.1];
    check_rho(rho, &xs, &ys)?;
    let d = support(rho);
    let m = rho.matrix().slice(ndarray::s![..d, ..d]).to_owned();
    let mut work = Array2::<C64>::zeros((d, d));
    Ok(linspace(0.0, 1.0, n)
        .into_iter()
        .map(|s| {
            let xi = C64::new(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
            (s, wigner_point(&m, d, xi, &mut work).re)
        })
        .collect())
}

/// Strict local maxima of a sampled profile above `threshold`, as
/// `(position, value)`.
pub fn profile_maxima(profile: &[(f64, f64)], threshold: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..profile.len() {
        let v = profile[k].1;
        let left = k == 0 || profile[k - 1].1 < v;
        let right = k + 1 == profile.len() || profile[k + 1].1 < v;
        if v > threshold && left && right {
            out.push(profile[k]);
        }
    }
    out
}

/// Reference Wigner function: for each eigenpair `(λ, v)` of `ρ` and each
/// grid point, computes `D†(ξ)v` by exponential action in a working space
/// enlarged to hold the displaced support, then sums `λ Σ_k (−1)^k |·|²`.
/// Slow; intended for validating [`wigner`].
pub fn wigner_pointwise(rho: &DensityOp, x_axis: &[f64], y_axis: &[f64]) -> Result<WignerGrid> {
    let mode = check_rho(rho, x_axis, y_axis)?;
    let d = mode.dim();
    let ext = max_extent(x_axis, y_axis);
    let reach = (d as f64).sqrt() + ext;
    let work_dim = (reach * reach + 6.0 * reach + 10.0).ceil() as usize;
    let work = ModeSpec::new(work_dim.max(d))?;
    displacement_guard(C64::new(ext, 0.0), work)?;

    let (lam, vecs) = rho.eigen();
    let pairs: Vec<(f64, Array1<C64>)> = lam
        .iter()
        .enumerate()
        .filter(|(_, l)| l.abs() > 1e-15)
        .map(|(k, &l)| {
            let mut v = Array1::<C64>::zeros(work.dim());
            v.slice_mut(ndarray::s![..d]).assign(&vecs.column(k));
            (l, v)
        })
        .collect();

    let (nx, ny) = (x_axis.len(), y_axis.len());
    let cells: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let xi = C64::new(x_axis[idx / ny], y_axis[idx % ny]);
            let gen = displacement_generator(-xi, work);
            let mut acc = 0.0;
            for (l, v) in &pairs {
                let u = expm_multiply(&gen, v);
                let par: f64 = u
                    .iter()
                    .enumerate()
                    .map(|(k, z)| if k % 2 == 0 { z.norm_sqr() } else { -z.norm_sqr() })
                    .sum();
                acc += l * par;
            }
            acc * 2.0 / PI
        })
        .collect();
    let values = Array2::from_shape_vec((nx, ny), cells)
        .map_err(|e| Error::InvalidRequest(e.to_string()))?;
    Ok(WignerGrid {
        x_axis: x_axis.to_vec(),
        y_axis: y_axis.to_vec(),
        values,
        imag_residue: 0.0,
    })
}

fn displacement_generator(xi: C64, mode: ModeSpec) -> SparseMatrix {
    SparseMatrix::from_triplets(mode.dim(), displacement_triplets(xi, mode.dim()))
}

/// Position distribution of `X = (b + b†)/2` at the points `xs`, from the
/// Hermite-function expansion of the Fock amplitudes.
pub fn position_distribution(state: &PureState, xs: &[f64]) -> Result<Vec<f64>> {
    if state.dims().len() != 1 {
        return Err(Error::DimensionMismatch(
            "position distribution needs a single-mode state".into(),
        ));
    }
    let c = state.amplitudes();
    let d = c.len();
    Ok(xs
        .iter()
        .map(|&x| {
            // X = q/√2 with q the dimensionless oscillator coordinate
            let q = 2f64.sqrt() * x;
            let mut prev = 0.0;
            let mut cur = PI.powf(-0.25) * (-q * q / 2.0).exp();
            let mut psi = c[0] * cur;
            for n in 1..d {
                let next = (2.0 / n as f64).sqrt() * q * cur - ((n - 1) as f64 / n as f64).sqrt() * prev;
                prev = cur;
                cur = next;
                psi += c[n] * cur;
            }
            2f64.sqrt() * psi.norm_sqr()
        })
        .collect())
}

/// `|⟨a|b⟩|²`.
pub fn fidelity_pure(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure_mixed(psi: &PureState, rho: &DensityOp) -> Result<f64> {
    if psi.dims() != rho.dims() {
        return Err(Error::DimensionMismatch("fidelity operands differ in shape".into()));
    }
    let v = psi.amplitudes();
    let rv = rho.matrix().dot(v);
    let f: C64 = v.iter().zip(rv.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(f.re.clamp(0.0, 1.0))
}

fn sqrt_psd(m: &Array2<C64>) -> Array2<C64> {
    let (lam, v) = crate::fock::hermitian_eigen(m);
    let n = lam.len();
    let mut scaled = v.clone();
    for k in 0..n {
        let s = lam[k].max(0.0).sqrt();
        scaled.column_mut(k).mapv_inplace(|z| z * s);
    }
    scaled.dot(&v.t().mapv(|z| z.conj()))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity_mixed(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch("fidelity operands differ in shape".into()));
    }
    let s = sqrt_psd(rho.matrix());
    let inner = s.dot(sigma.matrix()).dot(&s);
    let tr: f64 = crate::fock::hermitian_eigenvalues(&inner)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((tr * tr).min(1.0))
}

/// Either kind of state, for [`fidelity`].
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityOp),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOp> for StateRef<'a> {
    fn from(s: &'a DensityOp) -> Self {
        StateRef::Mixed(s)
    }
}

/// Fidelity between any two states: `|⟨a|b⟩|²` for pure pairs, `⟨ψ|ρ|ψ⟩`
/// for a pure and a mixed state, Uhlmann otherwise.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    match (a.into(), b.into()) {
        (StateRef::Pure(a), StateRef::Pure(b)) => fidelity_pure(a, b),
        (StateRef::Pure(a), StateRef::Mixed(b)) | (StateRef::Mixed(b), StateRef::Pure(a)) => {
            fidelity_pure_mixed(a, b)
        }
        (StateRef::Mixed(a), StateRef::Mixed(b)) => fidelity_mixed(a, b),
    }
}

pub fn purity(rho: &DensityOp) -> f64 {
    rho.purity()
}

/// Reduced state of a pure two-factor state on factor `keep`, computed from
/// the amplitude matrix without forming the joint density matrix.
pub fn reduced_state(state: &PureState, keep: usize) -> Result<DensityOp> {
    let dims = state.dims();
    if dims.len() != 2 || keep > 1 {
        return Err(Error::DimensionMismatch(
            "reduced_state needs a two-factor state and keep in {0, 1}".into(),
        ));
    }
    let (dc, db) = (dims[0].dim(), dims[1].dim());
    let a = state
        .amplitudes()
        .clone()
        .into_shape_with_order((dc, db))
        .map_err(|e| Error::InvalidRequest(e.to_string()))?;
    let m = if keep == 0 {
        a.dot(&a.t().mapv(|z| z.conj()))
    } else {
        a.t().dot(&a.mapv(|z| z.conj()))
    };
    Ok(DensityOp::from_parts(m, vec![dims[keep]]))
}

/// Von Neumann entropy (nats) of the reduced state of factor `keep`.
pub fn entanglement_entropy(state: &PureState, keep: usize) -> Result<f64> {
    Ok(reduced_state(state, keep)?.entropy())
}

/// `√(2(1 − Tr ρ_c²))` of the reduced cavity state of a `(2, d)` state.
///
/// With `|ψ⟩ = |0⟩|a⟩ + |1⟩|b⟩`, `1 − Tr ρ_c² = 2 det ρ_c` and the
/// determinant is evaluated through Lagrange's identity
/// `‖a‖²‖b‖² − |⟨a|b⟩|² = Σ_{i<j} |a_i b_j − a_j b_i|²`, a sum of squares
/// that keeps full relative accuracy near product states.
pub fn concurrence_numeric(state: &PureState) -> Result<f64> {
    if state.dims().len() != 2 || state.dims()[0].dim() != 2 {
        return Err(Error::DimensionMismatch(
            "concurrence needs a (2, d) pure state".into(),
        ));
    }
    let d = state.dims()[1].dim();
    let amps = state.amplitudes();
    let (a, b) = (amps.slice(ndarray::s![..d]), amps.slice(ndarray::s![d..]));
    let mut det = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            det += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    Ok(2.0 * det.sqrt())
}

/// Axis ranges for a single-mode pure state: the union of `base` and
/// `mean ± k·σ` of both quadratures (with `σ` at least the vacuum value).
pub fn axes_for_state(
    state: &PureState,
    k: f64,
    base: ((f64, f64), (f64, f64)),
) -> Result<((f64, f64), (f64, f64))> {
    axes_for_density(&state.to_density(), k, base)
}

/// [`axes_for_state`] for a density operator.
pub fn axes_for_density(
    rho: &DensityOp,
    k: f64,
    base: ((f64, f64), (f64, f64)),
) -> Result<((f64, f64), (f64, f64))> {
    let mode = single_mode(rho)?;
    let (x, y) = crate::analytic::quadratures(mode);
    let moments = |q: &crate::Operator| -> Result<(f64, f64)> {
        let mean = rho.expectation(q)?.re;
        let sq = rho.expectation(&(q * q))?.re;
        Ok((mean, (sq - mean * mean).max(0.25).sqrt()))
    };
    let (mx, sx) = moments(&x)?;
    let (my, sy) = moments(&y)?;
    let ((x0, x1), (y0, y1)) = base;
    Ok((
        (x0.min(mx - k * sx), x1.max(mx + k * sx)),
        (y0.min(my - k * sy), y1.max(my + k * sy)),
    ))
}
