use std::ops::{Add, Mul, Sub};

use ndarray::Array2;

use super::{expm, factor_index, total_dim, ModeSpec, PureState, C64, LEAK_MARGIN};
use crate::error::{Error, Result};

/// Dense operator on a truncated Fock space or a tensor product of them.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: Array2<C64>,
    dims: Vec<ModeSpec>,
}

impl Operator {
    pub fn new(matrix: Array2<C64>, dims: Vec<ModeSpec>) -> Result<Self> {
        let n = total_dim(&dims);
        if matrix.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {:?} but factor dimensions {:?} need {n}x{n}",
                matrix.dim(),
                dims.iter().map(|m| m.dim()).collect::<Vec<_>>()
            )));
        }
        Ok(Self { matrix, dims })
    }

    pub(crate) fn from_parts(matrix: Array2<C64>, dims: Vec<ModeSpec>) -> Self {
        debug_assert_eq!(matrix.nrows(), total_dim(&dims));
        Self { matrix, dims }
    }

    pub fn identity(dims: &[ModeSpec]) -> Self {
        Self::from_parts(Array2::eye(total_dim(dims)), dims.to_vec())
    }

    pub fn zeros(dims: &[ModeSpec]) -> Self {
        let n = total_dim(dims);
        Self::from_parts(Array2::zeros((n, n)), dims.to_vec())
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn dims(&self) -> &[ModeSpec] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.matrix.t().mapv(|z| z.conj()), self.dims.clone())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(&self.matrix * s, self.dims.clone())
    }

    /// Kronecker product `self ⊗ other`; factor lists are concatenated.
    pub fn tensor(&self, other: &Operator) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_parts(kron(&self.matrix, &other.matrix), dims)
    }

    /// Lifts a single-factor operator to `dims`, acting on factor `index`.
    pub fn embed(&self, index: usize, dims: &[ModeSpec]) -> Result<Self> {
        if self.dims.len() != 1 || dims.get(index) != Some(&self.dims[0]) {
            return Err(Error::DimensionMismatch(format!(
                "cannot embed an operator on {:?} as factor {index} of {:?}",
                self.dims, dims
            )));
        }
        let mut out: Option<Operator> = None;
        for (k, m) in dims.iter().enumerate() {
            let piece = if k == index {
                self.clone()
            } else {
                Operator::identity(&[*m])
            };
            out = Some(match out {
                None => piece,
                Some(acc) => acc.tensor(&piece),
            });
        }
        Ok(out.expect("dims is non-empty"))
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        self.check_dims(state.dims(), "apply")?;
        Ok(PureState::from_parts(
            self.matrix.dot(state.amplitudes()),
            self.dims.clone(),
        ))
    }

    /// `exp(self)`.
    pub fn exp(&self) -> Self {
        Self::from_parts(expm(&self.matrix), self.dims.clone())
    }

    /// Largest entry of `|A − A†|`.
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

    /// Largest entry of `|U†U − I|` restricted to basis states whose factor
    /// indices all lie below `dim − LEAK_MARGIN` (the non-leaking subspace).
    /// Factors no larger than `LEAK_MARGIN` are not restricted.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.matrix.t().mapv(|z| z.conj()).dot(&self.matrix);
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&idx| {
                self.dims.iter().enumerate().all(|(f, m)| {
                    m.dim() <= LEAK_MARGIN || factor_index(&self.dims, f, idx) < m.dim() - LEAK_MARGIN
                })
            })
            .collect();
        let mut worst = 0.0f64;
        for &i in &keep {
            for &j in &keep {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).norm());
            }
        }
        worst
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_dims(&self, dims: &[ModeSpec], op: &str) -> Result<()> {
        if self.dims.as_slice() != dims {
            return Err(Error::DimensionMismatch(format!(
                "{op}: operator on {:?}, operand on {:?}",
                self.dims, dims
            )));
        }
        Ok(())
    }
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, &x| *o = aij * x);
        }
    }
    out
}

impl Mul for &Operator {
    type Output = Operator;

    /// Operator product. Panics on mismatched factor structure.
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator product with mismatched dims");
        Operator::from_parts(self.matrix.dot(&rhs.matrix), self.dims.clone())
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator sum with mismatched dims");
        Operator::from_parts(&self.matrix + &rhs.matrix, self.dims.clone())
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator difference with mismatched dims");
        Operator::from_parts(&self.matrix - &rhs.matrix, self.dims.clone())
    }
}
