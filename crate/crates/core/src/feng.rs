//! Canonical block form of orthonormal product bases of `C² ⊗ Cⁿ`:
//!
//! ```text
//! S = { a_k ⊗ A_k,  a_k⊥ ⊗ A_k′ : 1 ≤ k ≤ t }
//! ```
//!
//! with `A_k`, `A_k′` orthonormal families spanning a common subspace and the
//! subspaces forming an orthogonal decomposition of `Cⁿ`.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entanglement::{product_defect, Bipartition};
use crate::error::{Error, Result};
use crate::linalg::{haar_unitary_from, orthonormality_defect, random_unit_vector, CMatrix, CVector};

/// `|⟨a, a′⟩|` above `1 − GROUPING_TOL` means the same direction; below
/// `GROUPING_TOL` means the orthogonal direction.
pub const GROUPING_TOL: f64 = 1e-8;

/// Minimum separation of generated `a_k` directions from coinciding pairs.
const GENERATE_SEPARATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FengBlock {
    pub a: CVector,
    #[serde(rename = "A")]
    pub big_a: Vec<CVector>,
    #[serde(rename = "Aprime")]
    pub big_a_prime: Vec<CVector>,
}

impl FengBlock {
    /// `a⊥ = (−conj(a_2), conj(a_1))`
    pub fn a_perp(&self) -> CVector {
        let a = self.a.entries();
        CVector::new(vec![-a[1].conj(), a[0].conj()])
    }

    pub fn size(&self) -> usize {
        self.big_a.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FengBasis {
    pub blocks: Vec<FengBlock>,
}

impl FengBasis {
    /// Block sizes `n_k` in block order.
    pub fn partition(&self) -> Vec<usize> {
        self.blocks.iter().map(FengBlock::size).collect()
    }

    /// Dimension `n` of the second factor.
    pub fn n(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| b.big_a.iter().chain(&b.big_a_prime))
            .map(CVector::dim)
            .next()
            .unwrap_or(0)
    }

    /// The `2n` product states, block by block: `a ⊗ A_k` then `a⊥ ⊗ A_k′`.
    pub fn flatten(&self) -> Vec<CVector> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let ap = b.a_perp();
            out.extend(b.big_a.iter().map(|u| b.a.kron(u)));
            out.extend(b.big_a_prime.iter().map(|v| ap.kron(v)));
        }
        out
    }
}

fn columns_times(basis: &[CVector], mix: &CMatrix) -> Vec<CVector> {
    (0..mix.cols())
        .map(|j| {
            let mut v = CVector::zeros(basis[0].dim());
            for (i, b) in basis.iter().enumerate() {
                v.axpy(mix[(i, j)], b);
            }
            v
        })
        .collect()
}

fn pair_overlap(a: &CVector, b: &CVector) -> f64 {
    a.inner(b).norm()
}

fn same_pair(a: &CVector, b: &CVector, margin: f64) -> bool {
    let o = pair_overlap(a, b);
    o > 1.0 - margin || o < margin
}

/// Random canonical basis with block sizes `partition`.
pub fn feng_generate(n: usize, partition: &[usize], seed: u64) -> Result<FengBasis> {
    if partition.is_empty() || partition.contains(&0) {
        return Err(Error::InvalidArgument("partition parts must be positive".into()));
    }
    let total: usize = partition.iter().sum();
    if total != n {
        return Err(Error::InvalidArgument(format!("partition sums to {total}, expected {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = haar_unitary_from(n, &mut rng).into_matrix().columns();
    let mut blocks = Vec::with_capacity(partition.len());
    let mut directions: Vec<CVector> = Vec::new();
    let mut offset = 0;
    for &nk in partition {
        let sub = &frame[offset..offset + nk];
        offset += nk;
        let q1 = haar_unitary_from(nk, &mut rng).into_matrix();
        let q2 = haar_unitary_from(nk, &mut rng).into_matrix();
        let a = loop {
            let cand = random_unit_vector(2, &mut rng).phase_normalized();
            if directions.iter().all(|d| !same_pair(d, &cand, GENERATE_SEPARATION)) {
                break cand;
            }
        };
        directions.push(a.clone());
        blocks.push(FengBlock {
            a,
            big_a: columns_times(sub, &q1),
            big_a_prime: columns_times(sub, &q2),
        });
    }
    Ok(FengBasis { blocks })
}

/// Outcome of one validation check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub description: &'static str,
    pub pass: bool,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FengReport {
    pub n: usize,
    pub partition: Vec<usize>,
    pub checks: Vec<ConditionCheck>,
    pub pass: bool,
}

impl FengReport {
    pub fn check(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

fn projector(family: &[CVector], n: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n, n);
    for v in family {
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    p
}

/// Checks conditions (1)–(4), distinctness of the `a`-pairs and global
/// orthonormality of the flattened states, each within `tol`.
pub fn feng_validate(fb: &FengBasis, tol: f64) -> FengReport {
    let n = fb.n();
    let partition = fb.partition();
    let mut checks = Vec::new();

    let shape_ok = n > 0
        && fb.blocks.iter().all(|b| {
            b.a.dim() == 2 && b.big_a.iter().chain(&b.big_a_prime).all(|v| v.dim() == n)
        });
    checks.push(ConditionCheck {
        condition: "shape",
        description: "a_k in C^2 and all A_k, A_k' vectors in C^n",
        pass: shape_ok,
        deviation: if shape_ok { 0.0 } else { f64::INFINITY },
    });
    if !shape_ok {
        return FengReport {
            n,
            partition,
            checks,
            pass: false,
        };
    }

    let mut push = |condition, description, deviation: f64| {
        checks.push(ConditionCheck {
            condition,
            description,
            pass: deviation <= tol,
            deviation,
        });
    };

    let dev1 = fb.blocks.iter().map(|b| orthonormality_defect(&b.big_a)).fold(0.0, f64::max);
    push("1", "each A_k is orthonormal", dev1);
    let dev2 = fb
        .blocks
        .iter()
        .map(|b| orthonormality_defect(&b.big_a_prime))
        .fold(0.0, f64::max);
    push("2", "each A_k' is orthonormal", dev2);

    let dev3 = fb
        .blocks
        .iter()
        .map(|b| {
            if b.big_a.len() != b.big_a_prime.len() {
                f64::INFINITY
            } else {
                projector(&b.big_a, n).max_abs_diff(&projector(&b.big_a_prime, n))
            }
        })
        .fold(0.0, f64::max);
    push("3", "span(A_k) = span(A_k') with n_k = n_k'", dev3);

    let mut dev4 = if partition.iter().sum::<usize>() == n { 0.0 } else { f64::INFINITY };
    for (k, bk) in fb.blocks.iter().enumerate() {
        for bj in &fb.blocks[k + 1..] {
            for u in &bk.big_a {
                for w in &bj.big_a {
                    dev4 = f64::max(dev4, u.inner(w).norm());
                }
            }
        }
    }
    push("4", "C^n is the orthogonal direct sum of the span(A_k)", dev4);

    let mut dev_a = fb.blocks.iter().map(|b| (b.a.norm() - 1.0).abs()).fold(0.0, f64::max);
    for (k, bk) in fb.blocks.iter().enumerate() {
        for bj in &fb.blocks[k + 1..] {
            if same_pair(&bk.a, &bj.a, GROUPING_TOL) {
                dev_a = f64::INFINITY;
            }
        }
    }
    push("distinct", "a_k are unit vectors and the pairs {a_k, a_k'} differ across blocks", dev_a);

    let flat = fb.flatten();
    let dev_o = if flat.len() == 2 * n {
        orthonormality_defect(&flat)
    } else {
        f64::INFINITY
    };
    push("orthonormal", "the 2n flattened product states are orthonormal", dev_o);

    let pass = checks.iter().all(|c| c.pass);
    FengReport {
        n,
        partition,
        checks,
        pass,
    }
}

/// Recovers the canonical form of an orthonormal product basis of `C² ⊗ Cⁿ`.
///
/// Blocks are sorted by descending size, ties by first occurrence; each `a`
/// is the first member's first factor with its largest entry real positive.
pub fn feng_decompose(states: &[CVector], tol: f64) -> Result<FengBasis> {
    let d = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("no states given".into()))?
        .dim();
    if d < 4 || d % 2 != 0 {
        return Err(Error::InvalidArgument(format!("dimension {d} is not 2n with n >= 2")));
    }
    let n = d / 2;
    if states.len() != d {
        return Err(Error::InvalidArgument(format!(
            "expected {d} states for a basis of C^2 (x) C^{n}, got {}",
            states.len()
        )));
    }
    if let Some(s) = states.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: s.dim(),
        });
    }
    let deviation = orthonormality_defect(states);
    if deviation > tol {
        return Err(Error::NotOrthonormal { deviation });
    }
    let bip = Bipartition::new(2, n)?;
    let mut firsts = Vec::with_capacity(d);
    for (index, s) in states.iter().enumerate() {
        let defect = product_defect(s, bip)?;
        if defect >= tol {
            return Err(Error::NotProduct { index, defect });
        }
        // first factor: dominant left singular vector of the 2 × n reshape
        let schmidt = crate::entanglement::schmidt(s, bip)?;
        firsts.push(schmidt.left_vectors[0].clone());
    }

    struct Group {
        a: CVector,
        same: Vec<usize>,
        perp: Vec<usize>,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (i, alpha) in firsts.iter().enumerate() {
        let mut placed = false;
        for g in &mut groups {
            let o = pair_overlap(&g.a, alpha);
            if o > 1.0 - GROUPING_TOL {
                g.same.push(i);
                placed = true;
                break;
            }
            if o < GROUPING_TOL {
                g.perp.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            groups.push(Group {
                a: alpha.phase_normalized(),
                same: vec![i],
                perp: Vec::new(),
            });
        }
    }

    let contract = |a: &CVector, s: &CVector| -> CVector {
        CVector::new(
            (0..n)
                .map(|t| a[0].conj() * s[t] + a[1].conj() * s[n + t])
                .collect::<Vec<C64>>(),
        )
    };
    let mut blocks = Vec::with_capacity(groups.len());
    for g in groups {
        if g.same.len() != g.perp.len() {
            return Err(Error::Structural(format!(
                "a-direction group has {} states on one side and {} on the other",
                g.same.len(),
                g.perp.len()
            )));
        }
        let block = FengBlock {
            a: g.a.clone(),
            big_a: Vec::new(),
            big_a_prime: Vec::new(),
        };
        let ap = block.a_perp();
        blocks.push(FengBlock {
            big_a: g.same.iter().map(|&i| contract(&g.a, &states[i])).collect(),
            big_a_prime: g.perp.iter().map(|&i| contract(&ap, &states[i])).collect(),
            ..block
        });
    }
    blocks.sort_by_key(|b| std::cmp::Reverse(b.size()));
    let fb = FengBasis { blocks };
    let report = feng_validate(&fb, tol.max(1e-10));
    if !report.pass {
        return Err(Error::Structural(format!(
            "recovered blocks fail validation: {:?}",
            report.checks.iter().filter(|c| !c.pass).map(|c| c.condition).collect::<Vec<_>>()
        )));
    }
    Ok(fb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;

    fn comp_block() -> FengBasis {
        FengBasis {
            blocks: vec![FengBlock {
                a: CVector::basis(2, 0),
                big_a: vec![CVector::basis(2, 0), CVector::basis(2, 1)],
                big_a_prime: vec![CVector::basis(2, 0), CVector::basis(2, 1)],
            }],
        }
    }

    #[test]
    fn generate_counts() {
        let fb = feng_generate(2, &[2], 1).unwrap();
        assert_eq!(fb.flatten().len(), 4);
        let fb = feng_generate(3, &[1, 2], 4).unwrap();
        assert_eq!(fb.blocks.len(), 2);
        assert_eq!(fb.flatten().len(), 6);
        assert!(feng_validate(&fb, 1e-10).pass);
        assert!(feng_generate(3, &[1, 1], 0).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(feng_validate(&comp_block(), 1e-10).pass);

        let mut bad = comp_block();
        bad.blocks[0].big_a_prime[1] = CVector::from_reals(&[1.0, 1.0]);
        let report = feng_validate(&bad, 1e-10);
        assert!(!report.pass);
        assert!(!report.check("2").unwrap().pass);
        assert!(report.check("1").unwrap().pass);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let overlapping = FengBasis {
            blocks: vec![
                FengBlock {
                    a: CVector::basis(2, 0),
                    big_a: vec![CVector::basis(2, 0)],
                    big_a_prime: vec![CVector::basis(2, 0)],
                },
                FengBlock {
                    a: CVector::from_reals(&[h, h]),
                    big_a: vec![CVector::from_reals(&[h, h])],
                    big_a_prime: vec![CVector::from_reals(&[h, h])],
                },
            ],
        };
        let report = feng_validate(&overlapping, 1e-10);
        assert!(!report.check("4").unwrap().pass);
    }

    #[test]
    fn decompose_round_trip() {
        let fb = feng_generate(4, &[2, 2], 7).unwrap();
        let back = feng_decompose(&fb.flatten(), 1e-10).unwrap();
        assert_eq!(back.partition(), vec![2, 2]);
        assert!(feng_validate(&back, 1e-10).pass);
    }

    #[test]
    fn decompose_computational_basis() {
        let states: Vec<CVector> = (0..6).map(|k| CVector::basis(6, k)).collect();
        let fb = feng_decompose(&states, 1e-10).unwrap();
        assert_eq!(fb.partition(), vec![3]);
    }

    #[test]
    fn decompose_rejects_entangled_basis() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![
            CVector::from_reals(&[h, 0.0, 0.0, h]),
            CVector::from_reals(&[h, 0.0, 0.0, -h]),
            CVector::from_reals(&[0.0, h, h, 0.0]),
            CVector::from_reals(&[0.0, h, -h, 0.0]),
        ];
        assert!(matches!(feng_decompose(&bell, 1e-10), Err(Error::NotProduct { .. })));
    }

    #[test]
    fn local_unitary_covariance() {
        let fb = feng_generate(5, &[1, 3, 1], 2).unwrap();
        let local = haar_unitary(2, 8).unwrap().matrix().kron(haar_unitary(5, 9).unwrap().matrix());
        let moved: Vec<CVector> = fb.flatten().iter().map(|s| local.apply(s)).collect();
        let back = feng_decompose(&moved, 1e-10).unwrap();
        assert_eq!(back.partition(), vec![3, 1, 1]);
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(comp_block()).unwrap();
        assert!(json["blocks"][0]["A"].is_array());
        assert!(json["blocks"][0]["Aprime"].is_array());
        assert_eq!(json["blocks"][0]["a"][0], serde_json::json!([1.0, 0.0]));
        let back: FengBasis = serde_json::from_value(json).unwrap();
        assert_eq!(back, comp_block());
    }
}
