//! Single-mode operator constructors.

use ndarray::Array2;

use super::sparse::SparseMatrix;
use super::{Operator, PureState, C64};
use super::ModeSpec;
use crate::error::{Error, Result};

/// Largest squeeze magnitude accepted by [`squeeze`].
pub const MAX_SQUEEZE: f64 = 2.0;

pub fn identity(mode: ModeSpec) -> Operator {
    Operator::identity(&[mode])
}

/// `b` with `<n−1|b|n> = √n`.
pub fn annihilation(mode: ModeSpec) -> Operator {
    let d = mode.dim();
    let m = Array2::from_shape_fn((d, d), |(i, j)| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Operator::from_parts(m, vec![mode])
}

pub fn creation(mode: ModeSpec) -> Operator {
    annihilation(mode).adjoint()
}

/// `b†b`, diagonal.
pub fn number(mode: ModeSpec) -> Operator {
    diagonal(mode, |n| n as f64)
}

/// `(−1)^{b†b}`.
pub fn parity(mode: ModeSpec) -> Operator {
    diagonal(mode, |n| if n % 2 == 0 { 1.0 } else { -1.0 })
}

fn diagonal(mode: ModeSpec, f: impl Fn(usize) -> f64) -> Operator {
    let d = mode.dim();
    let mut m = Array2::zeros((d, d));
    for n in 0..d {
        m[[n, n]] = C64::new(f(n), 0.0);
    }
    Operator::from_parts(m, vec![mode])
}

/// Pre-construction guard for a displacement of magnitude `|xi|` from the
/// vacuum: `ceil(|xi|² + 6|xi| + 10) <= dim`.
pub fn displacement_guard(xi: C64, mode: ModeSpec) -> Result<()> {
    let a = xi.norm();
    let need = (a * a + 6.0 * a + 10.0).ceil();
    if need > mode.dim() as f64 {
        return Err(Error::leakage(
            format!("displacement D({xi})"),
            format!(
                "|xi| = {a:.4} needs at least {need} Fock levels, truncation has {}",
                mode.dim()
            ),
        ));
    }
    Ok(())
}

/// Displacement `D(xi) = exp(xi b† − xi* b)`, built by exponentiating the
/// truncated generator.
pub fn displacement(xi: C64, mode: ModeSpec) -> Result<Operator> {
    displacement_guard(xi, mode)?;
    let op = Operator::from_parts(super::expm(&displacement_generator(xi, mode.dim())), vec![mode]);
    check_vacuum_column(&op, || format!("displacement D({xi})"))?;
    Ok(op)
}

/// Squeeze `S(z) = exp[(z* b² − z b†²)/2]`. With this sign convention a real
/// `z = r > 0` reduces the variance of `X = (b + b†)/2` to `e^{−2r}/4`.
pub fn squeeze(z: C64, mode: ModeSpec) -> Result<Operator> {
    if z.norm() > MAX_SQUEEZE {
        return Err(Error::leakage(
            format!("squeeze S({z})"),
            format!("|z| = {:.4} exceeds the supported maximum {MAX_SQUEEZE}", z.norm()),
        ));
    }
    let op = Operator::from_parts(super::expm(&squeeze_generator(z, mode.dim())), vec![mode]);
    check_vacuum_column(&op, || format!("squeeze S({z})"))?;
    Ok(op)
}

/// Unguarded exponentials for callers that apply their own leakage test.
pub(crate) fn displacement_unchecked(xi: C64, dim: usize) -> Array2<C64> {
    super::expm(&displacement_generator(xi, dim))
}

pub(crate) fn squeeze_unchecked(z: C64, dim: usize) -> Array2<C64> {
    super::expm(&squeeze_generator(z, dim))
}

fn check_vacuum_column(op: &Operator, what: impl FnOnce() -> String) -> Result<()> {
    let col = op.matrix().column(0).to_owned();
    PureState::from_parts(col, op.dims().to_vec()).check_leakage(&what())
}

/// Triplets of `xi b† − xi* b`.
pub(crate) fn displacement_triplets(xi: C64, dim: usize) -> Vec<(usize, usize, C64)> {
    let mut t = Vec::with_capacity(2 * dim);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        // <n|b†|n−1> = √n ; <n−1|b|n> = √n
        t.push((n, n - 1, xi * s));
        t.push((n - 1, n, -xi.conj() * s));
    }
    t
}

/// Triplets of `(z* b² − z b†²)/2`.
pub(crate) fn squeeze_triplets(z: C64, dim: usize) -> Vec<(usize, usize, C64)> {
    let mut t = Vec::with_capacity(2 * dim);
    for n in 2..dim {
        let s = ((n * (n - 1)) as f64).sqrt();
        // <n−2|b²|n> = √(n(n−1)) ; <n|b†²|n−2> = √(n(n−1))
        t.push((n - 2, n, z.conj() * s * 0.5));
        t.push((n, n - 2, -z * s * 0.5));
    }
    t
}

fn displacement_generator(xi: C64, dim: usize) -> Array2<C64> {
    SparseMatrix::from_triplets(dim, displacement_triplets(xi, dim)).to_dense()
}

fn squeeze_generator(z: C64, dim: usize) -> Array2<C64> {
    SparseMatrix::from_triplets(dim, squeeze_triplets(z, dim)).to_dense()
}
