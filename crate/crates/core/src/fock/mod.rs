//! Dense complex linear algebra on truncated bosonic Fock spaces.
//!
//! Basis index `n` corresponds to the Fock state `|n>`. Composite spaces are
//! ordered Kronecker products with the first factor most significant, so for
//! dims `(d_c, d_b)` the joint index is `n_c * d_b + n_b`. Every two-mode
//! object in this crate uses the order (cavity, mechanics).
//!
//! Truncation is checked, not assumed: builds that could push population into
//! the top [`LEAK_MARGIN`] levels of a factor measure that population and fail
//! with [`Error::Leakage`](crate::Error::Leakage) when it exceeds
//! [`LEAK_TOL`] of the norm.

mod action;
mod expm;
mod linalg;
mod operator;
pub(crate) mod ops;
pub mod sparse;
mod state;

pub use action::{displace_factor, squeeze_factor};
pub use expm::expm;
pub use operator::Operator;
pub use ops::{
    annihilation, creation, displacement, displacement_guard, identity, number, parity, squeeze,
    MAX_SQUEEZE,
};
pub use state::{DensityOp, PureState};

pub(crate) use linalg::{hermitian_eigen, hermitian_eigenvalues};

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Number of top Fock levels inspected by the leakage policy.
pub const LEAK_MARGIN: usize = 5;
/// Largest tolerated population (relative to the norm) in the top levels.
pub const LEAK_TOL: f64 = 1e-8;
/// Factors at or below this dimension hold exactly conserved few-level
/// sectors (e.g. a cavity restricted to `{|0>, |1>, |2>}`) and have no tail
/// window to check.
pub const LEAK_EXEMPT_DIM: usize = 2 * LEAK_MARGIN;

/// Truncation of a single bosonic mode to the levels `|0> .. |dim-1>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeSpec {
    dim: usize,
}

impl ModeSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidRequest(format!(
                "mode dimension must be at least 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(self) -> usize {
        self.dim
    }
}

/// Product of the factor dimensions.
pub fn total_dim(dims: &[ModeSpec]) -> usize {
    dims.iter().map(|m| m.dim()).product()
}

/// Row-major strides of a factor in the joint index.
pub(crate) fn factor_stride(dims: &[ModeSpec], factor: usize) -> usize {
    dims[factor + 1..].iter().map(|m| m.dim()).product()
}

/// Factor-local Fock index of joint basis index `idx`.
#[inline]
pub(crate) fn factor_index(dims: &[ModeSpec], factor: usize, idx: usize) -> usize {
    (idx / factor_stride(dims, factor)) % dims[factor].dim()
}

/// Population in the top [`LEAK_MARGIN`] levels of `factor`, given the
/// diagonal populations of a state on `dims`. Returns 0 for exempt factors.
pub(crate) fn tail_population(dims: &[ModeSpec], factor: usize, populations: &[f64]) -> f64 {
    let d = dims[factor].dim();
    if d <= LEAK_EXEMPT_DIM {
        return 0.0;
    }
    let stride = factor_stride(dims, factor);
    populations
        .iter()
        .enumerate()
        .filter(|(idx, _)| (idx / stride) % d >= d - LEAK_MARGIN)
        .map(|(_, p)| p)
        .sum()
}

pub(crate) fn check_tail(
    dims: &[ModeSpec],
    populations: &[f64],
    what: impl FnOnce() -> String,
) -> Result<()> {
    let norm: f64 = populations.iter().sum();
    for factor in 0..dims.len() {
        let tail = tail_population(dims, factor, populations);
        if tail > LEAK_TOL * norm {
            return Err(Error::leakage(
                what(),
                format!(
                    "population {tail:.3e} in the top {LEAK_MARGIN} levels of factor {factor} \
                     (dimension {}) exceeds {LEAK_TOL:e}; increase that truncation",
                    dims[factor].dim()
                ),
            ));
        }
    }
    Ok(())
}

/// Runs `build` with mode dimensions growing from `floor` by half each
/// time until it stops failing with a leakage error, or `cap` is passed.
/// Returns the result together with the dimension that succeeded.
pub fn auto_dim<T>(
    floor: usize,
    cap: usize,
    mut build: impl FnMut(ModeSpec) -> Result<T>,
) -> Result<(T, ModeSpec)> {
    let mut dim = floor.max(2);
    loop {
        let mode = ModeSpec::new(dim)?;
        match build(mode) {
            Ok(v) => return Ok((v, mode)),
            Err(Error::Leakage { .. }) if dim < cap => {
                dim = (dim + dim / 2).min(cap);
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_dim_grows_until_the_guard_passes() {
        let (_, mode) = auto_dim(10, 200, |m| {
            displacement(C64::new(3.0, 0.0), m)
        })
        .unwrap();
        assert!(mode.dim() >= 37);
        assert!(auto_dim(10, 20, |m| displacement(C64::new(3.0, 0.0), m)).is_err());
    }

    #[test]
    fn mode_spec_rejects_tiny_dimensions() {
        assert!(ModeSpec::new(1).is_err());
        assert!(ModeSpec::new(0).is_err());
        assert_eq!(ModeSpec::new(2).unwrap().dim(), 2);
    }

    #[test]
    fn factor_indexing_is_cavity_major() {
        let dims = [ModeSpec::new(3).unwrap(), ModeSpec::new(4).unwrap()];
        assert_eq!(factor_index(&dims, 0, 7), 1);
        assert_eq!(factor_index(&dims, 1, 7), 3);
        assert_eq!(total_dim(&dims), 12);
    }

    #[test]
    fn small_factors_are_exempt_from_tail_checks() {
        let dims = [ModeSpec::new(3).unwrap(), ModeSpec::new(12).unwrap()];
        let mut pops = vec![0.0; 36];
        pops[2 * 12] = 1.0; // cavity |2>, mechanics |0>
        assert_eq!(tail_population(&dims, 0, &pops), 0.0);
        pops[2 * 12] = 0.5;
        pops[11] = 0.5; // mechanics |11>
        assert!((tail_population(&dims, 1, &pops) - 0.5).abs() < 1e-15);
        assert!(check_tail(&dims, &pops, || "test".into()).is_err());
    }
}
