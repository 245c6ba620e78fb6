//! Bipartite structure of pure states.
//!
//! A state of `C^d` is read as an element of `C^{d1} ⊗ C^{d2}` through the
//! row-major identification `|s⟩|t⟩ ↔ e_{s·d2 + t}`. Entanglement is measured
//! by the product defect `1 − σ₁²`, which is zero exactly on product states.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd_small, CMatrix, CVector, Unitary};

/// States with a product defect below this count as product states.
pub const PRODUCT_THRESHOLD: f64 = 1e-8;

/// Default relative tolerance for [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Normalization tolerance enforced on every [`StateSet`] member.
pub const NORM_TOL: f64 = 1e-12;

/// The split `d = d1 · d2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    d1: usize,
    d2: usize,
}

impl Bipartition {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 < 2 || d2 < 2 {
            return Err(Error::InvalidArgument(format!(
                "bipartition factors must both be at least 2, got {d1}x{d2}"
            )));
        }
        Ok(Self { d1, d2 })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    /// The larger factor, i.e. the widest product subspace `|1⟩ ⊗ C^{d2}`
    /// (or its transpose) available for embedding.
    pub fn wide(&self) -> usize {
        self.d1.max(self.d2)
    }

    /// `|a⟩ ⊗ |b⟩` as a vector of `C^d`.
    pub fn product(&self, a: &CVector, b: &CVector) -> CVector {
        debug_assert_eq!((a.dim(), b.dim()), (self.d1, self.d2));
        a.kron(b)
    }

    fn check(&self, state: &CVector) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.d1, self.d2)
    }
}

impl FromStr for Bipartition {
    type Err = Error;

    /// Parses `D1xD2`, e.g. `2x3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bipartition must look like 2x3, got {s:?}"));
        let (a, b) = s.split_once('x').ok_or_else(bad)?;
        let d1 = a.trim().parse().map_err(|_| bad())?;
        let d2 = b.trim().parse().map_err(|_| bad())?;
        Self::new(d1, d2)
    }
}

/// `ψ = Σ_k c_k · left_k ⊗ right_k`.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<CVector>,
    pub right_vectors: Vec<CVector>,
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> CVector {
        let d = self.left_vectors[0].dim() * self.right_vectors[0].dim();
        let mut out = CVector::zeros(d);
        for ((c, l), r) in self.coefficients.iter().zip(&self.left_vectors).zip(&self.right_vectors) {
            out.axpy(C64::new(*c, 0.0), &l.kron(r));
        }
        out
    }
}

/// A list of normalized states of common dimension, with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet {
    states: Vec<CVector>,
    labels: Vec<String>,
}

impl StateSet {
    /// Normalizes every state. Zero vectors and mixed dimensions are rejected.
    pub fn new(states: Vec<CVector>, labels: Vec<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("a state set needs at least one state".into()));
        }
        if labels.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} states",
                labels.len(),
                states.len()
            )));
        }
        let d = states[0].dim();
        if d == 0 {
            return Err(Error::InvalidArgument("states must have positive dimension".into()));
        }
        let mut normalized = Vec::with_capacity(states.len());
        for s in &states {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                });
            }
            if s.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidArgument("non-finite amplitude".into()));
            }
            // unit vectors pass through untouched so files round-trip exactly
            if (s.norm_sqr() - 1.0).abs() <= 4.0 * f64::EPSILON {
                normalized.push(s.clone());
            } else {
                normalized.push(s.normalized()?);
            }
        }
        Ok(Self {
            states: normalized,
            labels,
        })
    }

    /// Labels the states `psi1, psi2, …`.
    pub fn from_states(states: Vec<CVector>) -> Result<Self> {
        let labels = (1..=states.len()).map(|k| format!("psi{k}")).collect();
        Self::new(states, labels)
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// All states except the one at `index`.
    pub fn without(&self, index: usize) -> Vec<CVector> {
        self.states
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != index)
            .map(|(_, s)| s.clone())
            .collect()
    }

    pub fn images(&self, u: &Unitary) -> Vec<CVector> {
        self.states.iter().map(|s| u.apply(s)).collect()
    }
}

/// Amplitude matrix `M[s][t] = ⟨s,t|ψ⟩` of shape `d1 × d2`.
pub fn reshape(state: &CVector, bip: Bipartition) -> Result<CMatrix> {
    bip.check(state)?;
    CMatrix::from_row_major(bip.d1, bip.d2, state.entries().to_vec())
}

pub fn schmidt(state: &CVector, bip: Bipartition) -> Result<SchmidtDecomposition> {
    let m = reshape(state, bip)?;
    let svd = svd_small(&m);
    // M = U Σ V†, so M[s][t] = Σ_k σ_k U[s][k] conj(V[t][k])
    Ok(SchmidtDecomposition {
        coefficients: svd.singulars,
        left_vectors: svd.left.columns(),
        right_vectors: svd.right.columns().iter().map(CVector::conj).collect(),
    })
}

/// `1 − σ₁²`, evaluated on the normalized state.
pub fn product_defect(state: &CVector, bip: Bipartition) -> Result<f64> {
    bip.check(state)?;
    Ok(defect_of_amplitudes(state.entries(), bip.d1, bip.d2))
}

/// Product defect of an amplitude array read as a `d1 × d2` matrix, relative
/// to its own squared norm. Uses closed forms when the smaller factor is 2 or
/// 3 and the Jacobi SVD otherwise.
pub fn defect_of_amplitudes(amps: &[C64], d1: usize, d2: usize) -> f64 {
    let (m, n) = (d1.min(d2), d1.max(d2));
    // element (i, j) of the m × n orientation
    let at = |i: usize, j: usize| -> C64 {
        if d1 <= d2 {
            amps[i * d2 + j]
        } else {
            amps[j * d2 + i]
        }
    };
    let total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let defect = match m {
        1 => 0.0,
        2 => {
            // det(MM†) = Σ_{s<t} |2×2 minor|² (Cauchy–Binet)
            let mut det = 0.0;
            for s in 0..n {
                for t in s + 1..n {
                    det += (at(0, s) * at(1, t) - at(0, t) * at(1, s)).norm_sqr();
                }
            }
            let disc = (total * total - 4.0 * det).max(0.0);
            let smallest = 2.0 * det / (total + disc.sqrt());
            smallest / total
        }
        3 => {
            let mut e2 = 0.0;
            let mut e3 = 0.0;
            let rows = [(0, 1), (0, 2), (1, 2)];
            for s in 0..n {
                for t in s + 1..n {
                    for &(a, b) in &rows {
                        e2 += (at(a, s) * at(b, t) - at(a, t) * at(b, s)).norm_sqr();
                    }
                    for u in t + 1..n {
                        let det = at(0, s) * (at(1, t) * at(2, u) - at(1, u) * at(2, t))
                            - at(0, t) * (at(1, s) * at(2, u) - at(1, u) * at(2, s))
                            + at(0, u) * (at(1, s) * at(2, t) - at(1, t) * at(2, s));
                        e3 += det.norm_sqr();
                    }
                }
            }
            residual_weight_3(total, e2, e3) / total
        }
        _ => {
            let mat = CMatrix::from_row_major(d1, d2, amps.to_vec()).expect("shape");
            let s1 = svd_small(&mat).singulars[0];
            1.0 - s1 * s1 / total
        }
    };
    defect.clamp(0.0, 1.0)
}

/// `λ₂ + λ₃` for a 3×3 positive semidefinite matrix with elementary symmetric
/// functions `e1, e2, e3` of its eigenvalues.
fn residual_weight_3(e1: f64, e2: f64, e3: f64) -> f64 {
    let q = e1 / 3.0;
    let p = e2 - e1 * e1 / 3.0;
    let r = -2.0 * e1 * e1 * e1 / 27.0 + e1 * e2 / 3.0 - e3;
    let largest = if -p <= 1e-300 {
        q
    } else {
        let arg = (1.5 * r / p * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        q + 2.0 * (-p / 3.0).sqrt() * (arg.acos() / 3.0).cos()
    };
    let mut s = (e1 - largest).clamp(0.0, e1);
    // Newton polish on h(s) = det(λ₁ I − ρ)/… with λ₁ = e1 − s, for relative accuracy when s is small
    for _ in 0..3 {
        let l = e1 - s;
        let h = e2 * l - e3 - s * l * l;
        let dh = -l * l + 2.0 * s * l - e2;
        if dh == 0.0 {
            break;
        }
        let next = s - h / dh;
        if !(0.0..=e1).contains(&next) {
            break;
        }
        s = next;
    }
    s
}

/// Right-singular directions of the stacked state matrix with singular value
/// above `tol · σ_max`: an orthonormal basis of the numerical span.
pub fn span_basis(states: &[CVector], tol: f64) -> Result<Vec<CVector>> {
    let stacked = stack(states)?;
    let svd = svd_small(&stacked);
    let smax = svd.singulars[0];
    // row ψ_i^T = Σ_k U_ik σ_k V_k†, so ψ_i ∈ span{conj(V_k)}
    Ok(svd
        .singulars
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * smax && s > 0.0)
        .map(|(k, _)| svd.right.column(k).conj())
        .collect())
}

fn stack(states: &[CVector]) -> Result<CMatrix> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty list of states".into()))?;
    let d = first.dim();
    let rows: Vec<Vec<C64>> = states
        .iter()
        .map(|s| {
            if s.dim() != d {
                Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                })
            } else {
                Ok(s.entries().to_vec())
            }
        })
        .collect::<Result<_>>()?;
    CMatrix::from_rows(&rows)
}

/// Number of singular values of the stacked states above `tol · σ_max`.
pub fn numeric_rank(states: &[CVector], tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let stacked = stack(states)?;
    let svd = svd_small(&stacked);
    let smax = svd.singulars[0];
    Ok(svd.singulars.iter().filter(|&&s| s > tol * smax && s > 0.0).count())
}

/// Per-index outcome of [`prop1_check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop1Entry {
    /// 0-based index of the removed state.
    pub index: usize,
    /// Numerical dimension of the span of the remaining states.
    pub dim: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop1Report {
    /// The bound every `dim` must reach: the larger factor plus one.
    pub required: usize,
    pub entries: Vec<Prop1Entry>,
    pub pass: bool,
}

impl Prop1Report {
    /// Indices whose removal leaves a span small enough for a witness unitary.
    pub fn failing(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.index)
    }
}

/// Necessary condition for absolute entanglement: removing any single state
/// must leave a span of dimension exceeding the larger factor.
pub fn prop1_check(set: &StateSet, bip: Bipartition, tol: f64) -> Result<Prop1Report> {
    if set.len() < 2 {
        return Err(Error::InvalidArgument("the check needs at least two states".into()));
    }
    if set.dim() != bip.dim() {
        return Err(Error::DimensionMismatch {
            expected: bip.dim(),
            found: set.dim(),
        });
    }
    let required = bip.wide() + 1;
    let entries = (0..set.len())
        .map(|i| {
            let dim = numeric_rank(&set.without(i), tol)?;
            Ok(Prop1Entry {
                index: i,
                dim,
                pass: dim >= required,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|e| e.pass);
    Ok(Prop1Report {
        required,
        entries,
        pass,
    })
}
