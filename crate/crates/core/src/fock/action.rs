//! Displacement and squeezing applied directly to state vectors.
//!
//! Same generators as [`displacement`](super::displacement) and
//! [`squeeze`](super::squeeze), exponentiated by their action on one vector
//! so large truncations never need a dense exponential.

use super::ops::{displacement_triplets, squeeze_triplets, MAX_SQUEEZE};
use super::sparse::{expm_multiply, SparseMatrix};
use super::{factor_stride, total_dim, ModeSpec, PureState, C64};
use crate::error::{Error, Result};

/// Lifts single-mode triplets to factor `factor` of `dims`.
pub(crate) fn embed_triplets(
    single: &[(usize, usize, C64)],
    factor: usize,
    dims: &[ModeSpec],
) -> SparseMatrix {
    let n = total_dim(dims);
    let d = dims[factor].dim();
    let stride = factor_stride(dims, factor);
    let outer = n / (d * stride);
    let mut triplets = Vec::with_capacity(single.len() * outer * stride);
    for o in 0..outer {
        for i in 0..stride {
            let base = o * d * stride + i;
            for &(r, c, v) in single {
                triplets.push((base + r * stride, base + c * stride, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, triplets)
}

fn check_factor(state: &PureState, factor: usize) -> Result<ModeSpec> {
    state.dims().get(factor).copied().ok_or_else(|| {
        Error::InvalidRequest(format!(
            "factor {factor} out of range for a state with {} factors",
            state.dims().len()
        ))
    })
}

/// `D(xi)` on factor `factor` of `state`. Fails if the result leaks.
pub fn displace_factor(state: &PureState, factor: usize, xi: C64) -> Result<PureState> {
    let mode = check_factor(state, factor)?;
    let gen = embed_triplets(&displacement_triplets(xi, mode.dim()), factor, state.dims());
    let out = PureState::from_parts(
        expm_multiply(&gen, state.amplitudes()),
        state.dims().to_vec(),
    );
    out.check_leakage(&format!("displacement D({xi}) on factor {factor}"))?;
    Ok(out)
}

/// `S(z) = exp[(z* b² − z b†²)/2]` on factor `factor` of `state`. Fails if
/// `|z|` exceeds the squeeze guard or the result leaks.
pub fn squeeze_factor(state: &PureState, factor: usize, z: C64) -> Result<PureState> {
    let mode = check_factor(state, factor)?;
    if z.norm() > MAX_SQUEEZE {
        return Err(Error::leakage(
            format!("squeeze S({z})"),
            format!("|z| = {:.4} exceeds the supported maximum {MAX_SQUEEZE}", z.norm()),
        ));
    }
    let gen = embed_triplets(&squeeze_triplets(z, mode.dim()), factor, state.dims());
    let out = PureState::from_parts(
        expm_multiply(&gen, state.amplitudes()),
        state.dims().to_vec(),
    );
    out.check_leakage(&format!("squeeze S({z}) on factor {factor}"))?;
    Ok(out)
}
