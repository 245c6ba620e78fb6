//! Candidate absolutely entangled sets and the explicit unitaries that map
//! embeddable sets to product form.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::entanglement::{numeric_rank, span_basis, Bipartition, StateSet, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{
    basis_transport_unitary, complete_basis, gram_schmidt_extend, orthonormality_defect, CVector, Unitary,
    UNITARITY_TOL,
};
use crate::polynomials::excluded_values;

/// Cross-part overlaps tolerated by [`PartitionedSet`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Distance to an excluded value below which a warning is issued.
pub const EXCLUDED_WARN_TOL: f64 = 1e-9;

/// Strict margin for `λ* < 1`.
const PREMISE_MARGIN: f64 = 1e-12;

/// A constructed set plus any non-fatal diagnostics.
#[derive(Clone, Debug)]
pub struct Construction {
    pub set: StateSet,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Premise {
    pub holds: bool,
    pub lambda_star: f64,
}

/// `λ* = max_i |b_i|² / (2|a_i|²)`; the premise holds iff `λ* < 1`.
pub fn theorem1_premise(a: &[C64], b: &[C64]) -> Result<Premise> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "a and b have different lengths ({} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("a and b must be nonempty".into()));
    }
    let mut lambda_star = 0.0f64;
    for (k, (ai, bi)) in a.iter().zip(b).enumerate() {
        if ai.norm_sqr() == 0.0 {
            return Err(Error::PremiseViolated(format!(
                "a_{} = 0 makes the premise unsatisfiable",
                k + 2
            )));
        }
        lambda_star = lambda_star.max(bi.norm_sqr() / (2.0 * ai.norm_sqr()));
    }
    Ok(Premise {
        holds: lambda_star < 1.0 - PREMISE_MARGIN,
        lambda_star,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Params {
    pub d: usize,
    /// Coefficients of `ξ_1` in `φ_2 … φ_d`.
    pub a: Vec<C64>,
    /// Coefficients of `ξ_i` in `φ_i`.
    pub b: Vec<C64>,
    /// Orthonormal basis `ξ_1 … ξ_d`; computational if absent.
    pub basis: Option<Vec<CVector>>,
}

impl Theorem1Params {
    /// Uniform coefficients `a_i = a`, `b_i = b`.
    pub fn uniform(d: usize, a: f64, b: f64) -> Self {
        let n = d.saturating_sub(1);
        Self {
            d,
            a: vec![C64::new(a, 0.0); n],
            b: vec![C64::new(b, 0.0); n],
            basis: None,
        }
    }
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

fn resolve_basis(basis: Option<&[CVector]>, d: usize) -> Result<Vec<CVector>> {
    match basis {
        None => Ok((0..d).map(|k| CVector::basis(d, k)).collect()),
        Some(b) => {
            if b.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.len(),
                });
            }
            if let Some(v) = b.iter().find(|v| v.dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.dim(),
                });
            }
            let deviation = orthonormality_defect(b);
            if deviation > UNITARITY_TOL {
                return Err(Error::NotOrthonormal { deviation });
            }
            Ok(b.to_vec())
        }
    }
}

/// `φ_1 = ξ_1`, `φ_i = a_i ξ_1 + b_i ξ_i` for `i = 2..d`.
pub fn theorem1_set(params: &Theorem1Params) -> Result<Construction> {
    let d = params.d;
    if d < 4 || is_prime(d) {
        return Err(Error::InvalidArgument(format!("d must be a composite integer >= 4, got {d}")));
    }
    if params.a.len() != d - 1 || params.b.len() != d - 1 {
        return Err(Error::InvalidArgument(format!(
            "expected {} coefficients in a and b, got {} and {}",
            d - 1,
            params.a.len(),
            params.b.len()
        )));
    }
    if let Some(k) = params.b.iter().position(|b| b.norm_sqr() == 0.0) {
        return Err(Error::InvalidArgument(format!("b_{} must be nonzero", k + 2)));
    }
    let premise = theorem1_premise(&params.a, &params.b)?;
    if !premise.holds {
        return Err(Error::PremiseViolated(format!(
            "lambda* = {} is not below 1",
            premise.lambda_star
        )));
    }
    let xi = resolve_basis(params.basis.as_deref(), d)?;
    let mut states = vec![xi[0].clone()];
    for (k, (a, b)) in params.a.iter().zip(&params.b).enumerate() {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let mut phi = xi[0].scale(a / norm);
        phi.axpy(b / norm, &xi[k + 1]);
        states.push(phi);
    }
    let labels = (1..=d).map(|k| format!("phi{k}")).collect();
    Ok(Construction {
        set: StateSet::new(states, labels)?,
        warnings: Vec::new(),
    })
}

/// `Σ_j x^{m·p^j} ξ_j` for `j = 1..d`, rescaled by `x^{−m·p}` so the leading
/// amplitude is 1. Returns the state and whether any amplitude underflowed.
fn power_state(x: f64, p: u32, m: f64, xi: &[CVector]) -> (CVector, bool) {
    let ln_x = x.ln();
    let p = p as f64;
    let mut out = CVector::zeros(xi[0].dim());
    let mut underflow = false;
    for (j, basis_vec) in xi.iter().enumerate() {
        let e = p.powi(j as i32 + 1) - p;
        let amp = (m * e * ln_x).exp();
        if amp == 0.0 || !amp.is_normal() {
            underflow = true;
        }
        out.axpy(C64::new(amp, 0.0), basis_vec);
    }
    (out, underflow)
}

fn excluded_p2() -> &'static [f64] {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    CACHE.get_or_init(|| excluded_values(2).expect("pair polynomials are nonzero"))
}

fn check_unit_interval(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("x must lie in (0, 1), got {x}")))
    }
}

/// Five states in `C⁴`: `ξ_1, ξ_2, ξ_3`, `N(Σ x^{2^j} ξ_j)`, `N(Σ x^{2·2^j} ξ_j)`.
pub fn example1_set(x: f64, basis: Option<&[CVector]>) -> Result<Construction> {
    check_unit_interval(x)?;
    let xi = resolve_basis(basis, 4)?;
    let mut warnings = Vec::new();
    if let Some(v) = excluded_p2().iter().find(|v| (*v - x).abs() < EXCLUDED_WARN_TOL) {
        warnings.push(format!(
            "x = {x} coincides with the excluded value {v}; the non-vanishing argument does not apply here"
        ));
    }
    let (psi4, u4) = power_state(x, 2, 1.0, &xi);
    let (psi5, u5) = power_state(x, 2, 2.0, &xi);
    if u4 || u5 {
        warnings.push(format!("amplitudes underflow double precision at x = {x}"));
    }
    let states = vec![xi[0].clone(), xi[1].clone(), xi[2].clone(), psi4, psi5];
    Ok(Construction {
        set: StateSet::from_states(states)?,
        warnings,
    })
}

/// `d + 1` states in `C^d`, `d = 2n`: `ξ_1 … ξ_{d−1}`, `N(Σ x^{p^j} ξ_j)`,
/// `N(Σ x^{2p^j} ξ_j)`.
pub fn theorem2_set(n: usize, p: u32, x: f64, basis: Option<&[CVector]>) -> Result<Construction> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    if p < 7 {
        return Err(Error::InvalidArgument(format!("p must be at least 7, got {p}")));
    }
    check_unit_interval(x)?;
    let d = 2 * n;
    let xi = resolve_basis(basis, d)?;
    let mut warnings = Vec::new();
    if p == 7 {
        warnings.push("p = 7 is on the boundary: the construction is only guaranteed for p > 7".into());
    }
    let (psi_d, u1) = power_state(x, p, 1.0, &xi);
    let (psi_d1, u2) = power_state(x, p, 2.0, &xi);
    if u1 || u2 {
        warnings.push(format!(
            "amplitudes underflow double precision at x = {x}, p = {p}; trailing components are zero"
        ));
    }
    let mut states: Vec<CVector> = xi[..d - 1].to_vec();
    states.push(psi_d);
    states.push(psi_d1);
    Ok(Construction {
        set: StateSet::from_states(states)?,
        warnings,
    })
}

/// States grouped into mutually orthogonal parts, each of small span.
#[derive(Clone, Debug)]
pub struct PartitionedSet {
    parts: Vec<StateSet>,
    bip: Bipartition,
}

impl PartitionedSet {
    /// Checks `k ≤ d1`, `rank(part) ≤ d2` and cross-part orthogonality.
    pub fn new(parts: Vec<StateSet>, bip: Bipartition) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("no parts given".into()));
        }
        if parts.len() > bip.d1() {
            return Err(Error::Precondition(format!(
                "{} parts exceed d1 = {}",
                parts.len(),
                bip.d1()
            )));
        }
        for part in &parts {
            if part.dim() != bip.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bip.dim(),
                    found: part.dim(),
                });
            }
        }
        for (i, part) in parts.iter().enumerate() {
            let rank = numeric_rank(part.states(), DEFAULT_RANK_TOL)?;
            if rank > bip.d2() {
                return Err(Error::Precondition(format!(
                    "part {} has rank {rank} > d2 = {}",
                    i + 1,
                    bip.d2()
                )));
            }
            for (j, other) in parts.iter().enumerate().skip(i + 1) {
                for a in part.states() {
                    for b in other.states() {
                        let overlap = a.inner(b).norm();
                        if overlap > ORTHOGONALITY_TOL {
                            return Err(Error::Precondition(format!(
                                "parts {} and {} overlap by {overlap:.3e}",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { parts, bip })
    }

    pub fn parts(&self) -> &[StateSet] {
        &self.parts
    }

    pub fn bipartition(&self) -> Bipartition {
        self.bip
    }

    /// All states, part by part.
    pub fn flatten(&self) -> StateSet {
        let mut states = Vec::new();
        let mut labels = Vec::new();
        for part in &self.parts {
            states.extend_from_slice(part.states());
            labels.extend_from_slice(part.labels());
        }
        StateSet::new(states, labels).expect("parts share one dimension")
    }
}

/// Unitary sending the `j`-th span vector of part `i` to `|i⟩|j⟩`.
pub fn prop2_embed_unitary(pset: &PartitionedSet) -> Result<Unitary> {
    let bip = pset.bipartition();
    let d = bip.dim();
    let mut from = Vec::new();
    let mut targets = Vec::new();
    for (i, part) in pset.parts().iter().enumerate() {
        let span = span_basis(part.states(), DEFAULT_RANK_TOL)?;
        for (j, v) in span.into_iter().enumerate() {
            from.push(v);
            targets.push(CVector::basis(d, i * bip.d2() + j));
        }
    }
    transport_completed(&from, &targets, d)
}

/// Orthonormalizes `from` exactly, completes both families and transports.
fn transport_completed(from: &[CVector], targets: &[CVector], d: usize) -> Result<Unitary> {
    let gs = gram_schmidt_extend(from, d, DEFAULT_RANK_TOL)?;
    if gs.rank != from.len() {
        return Err(Error::Structural(format!(
            "span vectors are dependent (rank {} of {})",
            gs.rank,
            from.len()
        )));
    }
    let mut src = gs.span;
    src.extend(gs.completion);
    let mut dst = targets.to_vec();
    dst.extend(complete_basis(targets, d));
    basis_transport_unitary(&src, &dst)
}

/// Which branch of the witness construction was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessCase {
    /// The whole set spans at most `wide` dimensions.
    Embedded,
    /// `ψ_i` is orthogonal to the span of the others.
    Orthogonal,
    /// `ψ_i` has components both inside and outside that span.
    Overlapping,
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub unitary: Unitary,
    pub case: WitnessCase,
}

/// Maps a logical index `(s, t)` of `C^{narrow} ⊗ C^{wide}` to the actual
/// computational index under `bip`.
fn oriented_index(bip: Bipartition, s: usize, t: usize) -> usize {
    if bip.d1() <= bip.d2() {
        s * bip.d2() + t
    } else {
        t * bip.d2() + s
    }
}

/// Explicit unitary sending every state of `set` to product form, valid
/// when the span of `set` without the state at `index` (0-based) has
/// dimension at most the larger factor.
pub fn prop1_witness_unitary(set: &StateSet, index: usize, bip: Bipartition) -> Result<Witness> {
    if set.dim() != bip.dim() {
        return Err(Error::DimensionMismatch {
            expected: bip.dim(),
            found: set.dim(),
        });
    }
    if index >= set.len() {
        return Err(Error::InvalidArgument(format!(
            "index {index} out of range for {} states",
            set.len()
        )));
    }
    let d = bip.dim();
    let wide = bip.wide();
    let rest = set.without(index);
    let rest_basis = if rest.is_empty() {
        Vec::new()
    } else {
        span_basis(&rest, DEFAULT_RANK_TOL)?
    };
    if rest_basis.len() > wide {
        return Err(Error::Precondition(format!(
            "the remaining states span {} dimensions, more than {wide}",
            rest_basis.len()
        )));
    }
    let psi = &set.states()[index];
    let coeffs: Vec<C64> = rest_basis.iter().map(|xi| xi.inner(psi)).collect();
    let mut eta = psi.clone();
    for (xi, c) in rest_basis.iter().zip(&coeffs) {
        eta.axpy(-c, xi);
    }
    let beta = eta.norm();
    let c_norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    if rest_basis.len() < wide || beta < DEFAULT_RANK_TOL {
        let all = span_basis(set.states(), DEFAULT_RANK_TOL)?;
        let targets: Vec<CVector> = (0..all.len())
            .map(|k| CVector::basis(d, oriented_index(bip, 0, k)))
            .collect();
        return Ok(Witness {
            unitary: transport_completed(&all, &targets, d)?,
            case: WitnessCase::Embedded,
        });
    }

    let eta = eta.scale(C64::new(1.0 / beta, 0.0));
    let mut targets: Vec<CVector> = (0..wide)
        .map(|k| CVector::basis(d, oriented_index(bip, 0, k)))
        .collect();
    let case = if c_norm < DEFAULT_RANK_TOL {
        targets.push(CVector::basis(d, oriented_index(bip, 1, 0)));
        WitnessCase::Orthogonal
    } else {
        let mut image = CVector::zeros(d);
        for (k, c) in coeffs.iter().enumerate() {
            image[oriented_index(bip, 1, k)] = c / c_norm;
        }
        targets.push(image);
        WitnessCase::Overlapping
    };
    let mut from = rest_basis;
    from.push(eta);
    Ok(Witness {
        unitary: transport_completed(&from, &targets, d)?,
        case,
    })
}
