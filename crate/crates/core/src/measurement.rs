//! Informationally complete measurement families.
//!
//! Two schemes are provided: the `d + 1` mutually unbiased bases (prime `d`
//! only) and the eigenbases of the `d² − 1` generalized Pauli operators
//! (any `d ≥ 2`).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, CVector, HermitianMatrix};
use crate::states::PureState;

const BASIS_TOL: f64 = 1e-10;
const DEGENERACY_TOL: f64 = 1e-9;
const PHASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Mub,
    #[serde(alias = "pauli")]
    GeneralizedPauli,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Mub => f.write_str("mub"),
            Scheme::GeneralizedPauli => f.write_str("generalized_pauli"),
        }
    }
}

/// An ordered orthonormal basis; its rank-1 projectors are one measurement setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    label: String,
    states: Vec<PureState>,
}

impl MeasurementBasis {
    pub fn new(label: impl Into<String>, states: Vec<PureState>) -> Result<Self> {
        let d = states.first().map(PureState::dim).unwrap_or(0);
        if d < 2 || states.len() != d || states.iter().any(|s| s.dim() != d) {
            return Err(Error::InvalidInput(format!(
                "a basis needs exactly d ≥ 2 states of dimension d (got {} states)",
                states.len()
            )));
        }
        for (i, a) in states.iter().enumerate() {
            for b in &states[i + 1..] {
                let ov = a.inner(b).norm();
                if ov > BASIS_TOL {
                    return Err(Error::InvalidInput(format!("basis states overlap by {ov:e}")));
                }
            }
        }
        let basis = Self { label: label.into(), states };
        let defect = (basis.projector_sum() - CMatrix::identity(d, d)).norm();
        if defect > BASIS_TOL {
            return Err(Error::InvalidInput(format!(
                "projectors do not resolve the identity (defect {defect:e})"
            )));
        }
        Ok(basis)
    }

    /// The computational basis `{|0⟩, …, |d−1⟩}`.
    pub fn computational(dim: usize, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            states: (0..dim).map(|i| PureState::basis(dim, i)).collect(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn projector(&self, i: usize) -> CMatrix {
        let v = self.states[i].amplitudes();
        v * v.adjoint()
    }

    fn projector_sum(&self) -> CMatrix {
        let d = self.dim();
        (0..d).fold(CMatrix::zeros(d, d), |acc, i| acc + self.projector(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFamily {
    scheme: Scheme,
    bases: Vec<MeasurementBasis>,
}

impl MeasurementFamily {
    pub fn new(scheme: Scheme, bases: Vec<MeasurementBasis>) -> Result<Self> {
        let d = bases.first().map(MeasurementBasis::dim).ok_or_else(|| {
            Error::InvalidInput("a measurement family needs at least one basis".into())
        })?;
        if bases.iter().any(|b| b.dim() != d) {
            return Err(Error::InvalidInput("bases of a family must share a dimension".into()));
        }
        Ok(Self { scheme, bases })
    }

    /// Builds the family for `scheme` in dimension `d`.
    pub fn build(scheme: Scheme, d: usize) -> Result<Self> {
        match scheme {
            Scheme::Mub => mub_family(d),
            Scheme::GeneralizedPauli => pauli_family(d),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.bases[0].dim()
    }

    pub fn bases(&self) -> &[MeasurementBasis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn to_record(&self) -> FamilyRecord {
        FamilyRecord {
            scheme: self.scheme,
            dim: self.dim(),
            bases: self
                .bases
                .iter()
                .map(|b| BasisRecord {
                    label: b.label.clone(),
                    states: b
                        .states
                        .iter()
                        .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &FamilyRecord) -> Result<Self> {
        let bases = record
            .bases
            .iter()
            .map(|b| {
                let states = b
                    .states
                    .iter()
                    .map(|amps| {
                        PureState::new(CVector::from_iterator(
                            amps.len(),
                            amps.iter().map(|[re, im]| Complex64::new(*re, *im)),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MeasurementBasis::new(b.label.clone(), states)
            })
            .collect::<Result<Vec<_>>>()?;
        let fam = Self::new(record.scheme, bases)?;
        if fam.dim() != record.dim {
            return Err(Error::InvalidInput(format!(
                "record declares dimension {} but its states have dimension {}",
                record.dim,
                fam.dim()
            )));
        }
        Ok(fam)
    }
}

/// Serializable form of a family: complex amplitudes as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub scheme: Scheme,
    pub dim: usize,
    pub bases: Vec<BasisRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRecord {
    pub label: String,
    pub states: Vec<Vec<[f64; 2]>>,
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// Computational basis plus `d` Fourier-type bases for prime `d`.
///
/// For odd prime `d`, vector `j` of basis `b` has amplitude `ω^{b k² + j k}/√d`
/// at row `k`, with `ω = e^{2πi/d}`. For `d = 2` the X and Y eigenbases are used.
pub fn mub_family(d: usize) -> Result<MeasurementFamily> {
    if !is_prime(d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut bases = vec![MeasurementBasis::computational(d, "mub0")];
    if d == 2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let make = |a: Complex64, b: Complex64| {
            PureState::from_raw(CVector::from_vec(vec![a * h, b * h]))
        };
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        bases.push(MeasurementBasis::new("mub1", vec![make(one, one), make(one, -one)])?);
        bases.push(MeasurementBasis::new("mub2", vec![make(one, i), make(one, -i)])?);
    } else {
        let norm = 1.0 / (d as f64).sqrt();
        for b in 0..d {
            let states = (0..d)
                .map(|j| {
                    PureState::from_raw(CVector::from_fn(d, |k, _| {
                        let exponent = (b * k * k + j * k) % d;
                        Complex64::from_polar(norm, 2.0 * PI * exponent as f64 / d as f64)
                    }))
                })
                .collect();
            bases.push(MeasurementBasis::new(format!("mub{}", b + 1), states)?);
        }
    }
    MeasurementFamily::new(Scheme::Mub, bases)
}

/// One generalized Pauli (Gell-Mann) operator with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    pub label: String,
    pub matrix: HermitianMatrix,
}

/// The `d² − 1` generalized Gell-Mann operators in the standard order
/// (`λ_1 … λ_8` for `d = 3`, `σ_x, σ_y, σ_z` for `d = 2`).
///
/// `u_jk = |j⟩⟨k| + |k⟩⟨j|`, `v_jk = −i|j⟩⟨k| + i|k⟩⟨j|` for `j < k`, and
/// `w_l = √(2/(l(l+1)))·(Σ_{j<l} |j⟩⟨j| − l|l⟩⟨l|)` for `1 ≤ l ≤ d−1`.
pub fn generalized_pauli_operators(d: usize) -> Result<Vec<PauliOperator>> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {d}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut ops = Vec::with_capacity(d * d - 1);
    for k in 1..d {
        for j in 0..k {
            let mut u = CMatrix::zeros(d, d);
            u[(j, k)] = one;
            u[(k, j)] = one;
            ops.push(PauliOperator { label: format!("u{j}{k}"), matrix: HermitianMatrix::new(u)? });

            let mut v = CMatrix::zeros(d, d);
            v[(j, k)] = -i;
            v[(k, j)] = i;
            ops.push(PauliOperator { label: format!("v{j}{k}"), matrix: HermitianMatrix::new(v)? });
        }
        let l = k as f64;
        let scale = (2.0 / (l * (l + 1.0))).sqrt();
        let mut diag = vec![0.0; d];
        diag[..k].iter_mut().for_each(|x| *x = scale);
        diag[k] = -l * scale;
        ops.push(PauliOperator {
            label: format!("w{k}"),
            matrix: HermitianMatrix::from_real_diagonal(&diag),
        });
    }
    Ok(ops)
}

fn canonical_phase(v: &mut CVector) {
    if let Some(lead) = v.iter().copied().find(|z| z.norm() > PHASE_TOL) {
        let rot = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Orthonormal eigenbasis of `op` with the matching eigenvalues.
///
/// Eigenvectors come in ascending eigenvalue order. Inside an eigenspace that
/// is spanned by computational basis vectors those vectors are used verbatim,
/// in ascending index order; every other vector has its first nonzero
/// amplitude rotated to be real positive.
pub fn eigenbasis_with_values(
    op: &HermitianMatrix,
    label: impl Into<String>,
) -> Result<(MeasurementBasis, Vec<f64>)> {
    let d = op.dim();
    let eig = eig_hermitian(op)?;
    let mut states = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d);

    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && eig.values[end] - eig.values[end - 1] < DEGENERACY_TOL {
            end += 1;
        }
        let cluster = start..end;
        let members: Vec<usize> = (0..d)
            .filter(|&i| {
                let weight: f64 = cluster.clone().map(|k| eig.vectors[(i, k)].norm_sqr()).sum();
                weight > 1.0 - DEGENERACY_TOL
            })
            .collect();
        if members.len() == cluster.len() {
            for i in members {
                states.push(PureState::basis(d, i));
                values.push(op.matrix()[(i, i)].re);
            }
        } else {
            for k in cluster {
                let mut v = eig.vector(k);
                canonical_phase(&mut v);
                states.push(PureState::from_raw(v));
                values.push(eig.values[k]);
            }
        }
        start = end;
    }
    Ok((MeasurementBasis::new(label, states)?, values))
}

pub fn eigenbasis_of(op: &HermitianMatrix, label: impl Into<String>) -> Result<MeasurementBasis> {
    eigenbasis_with_values(op, label).map(|(b, _)| b)
}

/// Eigenbases of all generalized Pauli operators, labelled by operator.
pub fn pauli_family(d: usize) -> Result<MeasurementFamily> {
    let bases = generalized_pauli_operators(d)?
        .iter()
        .map(|op| eigenbasis_of(&op.matrix, op.label.clone()))
        .collect::<Result<Vec<_>>>()?;
    MeasurementFamily::new(Scheme::GeneralizedPauli, bases)
}

/// Real coordinates of a Hermitian matrix: diagonal, then real and imaginary
/// parts of the strict upper triangle.
fn hermitian_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut out: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
    for i in 0..d {
        for j in i + 1..d {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

/// True when the family's projectors span all `d × d` Hermitian matrices.
pub fn is_informationally_complete(fam: &MeasurementFamily) -> bool {
    let d = fam.dim();
    let rows: Vec<Vec<f64>> = fam
        .bases
        .iter()
        .flat_map(|b| (0..b.dim()).map(move |i| hermitian_coordinates(&b.projector(i))))
        .collect();
    let stack = DMatrix::from_fn(rows.len(), d * d, |r, c| rows[r][c]);
    stack.rank(1e-9) == d * d
}
