use ndarray::{Array1, Array2};

use super::operator::kron;
use super::{
    check_tail, hermitian_eigen, hermitian_eigenvalues, tail_population, total_dim, ModeSpec,
    Operator, C64,
};
use crate::error::{Error, Result};

/// Normalized state vector with its factor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Array1<C64>,
    dims: Vec<ModeSpec>,
}

impl PureState {
    /// Normalizing constructor.
    pub fn new(amplitudes: Array1<C64>, dims: Vec<ModeSpec>) -> Result<Self> {
        let n = total_dim(&dims);
        if amplitudes.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a space of dimension {n}",
                amplitudes.len()
            )));
        }
        let norm = l2_norm(&amplitudes);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Ok(Self {
            amplitudes: amplitudes.mapv(|z| z / norm),
            dims,
        })
    }

    pub(crate) fn from_parts(amplitudes: Array1<C64>, dims: Vec<ModeSpec>) -> Self {
        Self { amplitudes, dims }
    }

    /// Product basis state with the given Fock index in each factor.
    pub fn basis(dims: &[ModeSpec], levels: &[usize]) -> Result<Self> {
        if levels.len() != dims.len() || levels.iter().zip(dims).any(|(n, m)| *n >= m.dim()) {
            return Err(Error::InvalidRequest(format!(
                "basis levels {levels:?} do not fit dims {:?}",
                dims.iter().map(|m| m.dim()).collect::<Vec<_>>()
            )));
        }
        let idx = levels
            .iter()
            .zip(dims)
            .fold(0usize, |acc, (n, m)| acc * m.dim() + n);
        let mut amps = Array1::zeros(total_dim(dims));
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self::from_parts(amps, dims.to_vec()))
    }

    pub fn fock(mode: ModeSpec, n: usize) -> Result<Self> {
        Self::basis(&[mode], &[n])
    }

    pub fn vacuum(mode: ModeSpec) -> Self {
        Self::basis(&[mode], &[0]).expect("vacuum always fits")
    }

    /// Coherent state `D(alpha)|0>`, with the displacement generated by
    /// exponentiation in the truncated space. Subject to
    /// [`displacement_guard`](super::displacement_guard).
    pub fn coherent(alpha: C64, mode: ModeSpec) -> Result<Self> {
        super::displacement_guard(alpha, mode)?;
        super::displace_factor(&Self::vacuum(mode), 0, alpha)
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[ModeSpec] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "inner product of states on {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn tensor(&self, other: &PureState) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amps = Array1::from_iter(
            self.amplitudes
                .iter()
                .flat_map(|a| other.amplitudes.iter().map(move |b| a * b)),
        );
        Self::from_parts(amps, dims)
    }

    /// `<self|op|self>`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        op.check_dims(&self.dims, "expectation")?;
        let v = op.matrix().dot(&self.amplitudes);
        Ok(self
            .amplitudes
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Population in the top levels of `factor` (0 for exempt small factors).
    pub fn tail_population(&self, factor: usize) -> f64 {
        tail_population(&self.dims, factor, &self.populations())
    }

    /// Applies the leakage policy to every factor.
    pub fn check_leakage(&self, what: &str) -> Result<()> {
        check_tail(&self.dims, &self.populations(), || what.to_string())
    }

    pub fn to_density(&self) -> DensityOp {
        let a = &self.amplitudes;
        let n = a.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j].conj());
        DensityOp::from_parts(m, self.dims.clone())
    }

    /// Multiplies by a global phase `exp(i·phi)`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let p = C64::from_polar(1.0, phi);
        Self::from_parts(self.amplitudes.mapv(|z| z * p), self.dims.clone())
    }
}

/// Density operator with its factor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    matrix: Array2<C64>,
    dims: Vec<ModeSpec>,
}

/// Tolerances of the density-operator invariants.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityOp {
    /// Validating constructor: Hermitian within 1e-10, unit trace within 1e-8,
    /// eigenvalues ≥ −1e-8.
    pub fn new(matrix: Array2<C64>, dims: Vec<ModeSpec>) -> Result<Self> {
        let n = total_dim(&dims);
        if matrix.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {:?}, dims need {n}x{n}",
                matrix.dim()
            )));
        }
        let rho = Self { matrix, dims };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(matrix: Array2<C64>, dims: Vec<ModeSpec>) -> Self {
        Self { matrix, dims }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("Hermiticity defect {h:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dims(&self) -> &[ModeSpec] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ_ij |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Eigenvalues (ascending) with eigenvectors as columns.
    pub fn eigen(&self) -> (Array1<f64>, Array2<C64>) {
        hermitian_eigen(&self.matrix)
    }

    /// Von Neumann entropy in nats; eigenvalues below 1e-300 are dropped.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        op.check_dims(&self.dims, "expectation")?;
        // Tr(ρ A) = Σ_ij ρ_ij A_ji
        let a = op.matrix();
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[[i, j]] * a[[j, i]];
            }
        }
        Ok(acc)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }

    pub fn tail_population(&self, factor: usize) -> f64 {
        tail_population(&self.dims, factor, &self.populations())
    }

    pub fn check_leakage(&self, what: &str) -> Result<()> {
        check_tail(&self.dims, &self.populations(), || what.to_string())
    }

    pub fn tensor(&self, other: &DensityOp) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_parts(kron(&self.matrix, &other.matrix), dims)
    }

    /// Reduced state on factor `keep`, tracing out every other factor.
    pub fn partial_trace(&self, keep: usize) -> Result<DensityOp> {
        if keep >= self.dims.len() {
            return Err(Error::InvalidRequest(format!(
                "factor {keep} out of range for {} factors",
                self.dims.len()
            )));
        }
        let d_keep = self.dims[keep].dim();
        let inner: usize = self.dims[keep + 1..].iter().map(|m| m.dim()).product();
        let outer: usize = self.dims[..keep].iter().map(|m| m.dim()).product();
        let mut out = Array2::<C64>::zeros((d_keep, d_keep));
        for o in 0..outer {
            for i in 0..inner {
                let base = o * d_keep * inner + i;
                for a in 0..d_keep {
                    for b in 0..d_keep {
                        out[[a, b]] += self.matrix[[base + a * inner, base + b * inner]];
                    }
                }
            }
        }
        Ok(Self::from_parts(out, vec![self.dims[keep]]))
    }

    /// Mixture `p·self + (1−p)·other`.
    pub fn mix(&self, other: &DensityOp, p: f64) -> Result<DensityOp> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("mixture of differently shaped states".into()));
        }
        Ok(Self::from_parts(
            &self.matrix * C64::new(p, 0.0) + &other.matrix * C64::new(1.0 - p, 0.0),
            self.dims.clone(),
        ))
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<DensityOp> {
        u.check_dims(&self.dims, "conjugate_by")?;
        let m = u.matrix();
        let out = m.dot(&self.matrix).dot(&m.t().mapv(|z| z.conj()));
        Ok(Self::from_parts(out, self.dims.clone()))
    }
}

fn l2_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
