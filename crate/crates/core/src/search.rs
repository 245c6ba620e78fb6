//! Multi-start local minimization of the total product defect over `U(d)`.
//!
//! Each restart starts from a seeded Haar unitary and follows a
//! finite-difference gradient in the right-trivialized tangent space,
//! `U ← U · exp(A)` with `A` skew-Hermitian, using Barzilai–Borwein steps
//! with Armijo backtracking. A successful search yields a witness unitary
//! that can be replayed; an unsuccessful one is evidence only.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::entanglement::{defect_of_amplitudes, Bipartition, StateSet};
use crate::error::{Error, Result};
use crate::linalg::{expm, haar_unitary_from, reorthonormalize, CMatrix, CVector, Unitary};

/// Restarts evaluated together before checking for an early stop.
const BATCH: usize = 8;
const FD_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const MAX_STALLS: usize = 4;
const PERTURBATION: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub objective_tol: f64,
    pub seed: u64,
    /// Stop after the first batch of restarts that reaches `objective_tol`.
    pub stop_on_success: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iters: 200,
            step_tol: 1e-12,
            objective_tol: 1e-6,
            seed: 0,
            stop_on_success: true,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.step_tol > 0.0 && self.objective_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ProductMappingFound,
    NoMappingFound,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ProductMappingFound => "ProductMappingFound",
            Verdict::NoMappingFound => "NoMappingFound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartTrace {
    pub seed: u64,
    pub objective: f64,
    pub iters: usize,
    #[serde(skip)]
    pub initial_objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub best_objective: f64,
    pub best_unitary: Unitary,
    pub restarts: Vec<RestartTrace>,
    pub verdict: Verdict,
}

/// `{"best_objective", "verdict", "unitary", "restarts", "note"}`
impl Serialize for SearchReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SearchReport", 5)?;
        st.serialize_field("best_objective", &self.best_objective)?;
        st.serialize_field("verdict", self.verdict.as_str())?;
        st.serialize_field("unitary", self.best_unitary.matrix())?;
        st.serialize_field("restarts", &self.restarts)?;
        let note = match self.verdict {
            Verdict::ProductMappingFound => "witness unitary maps every state to product form",
            Verdict::NoMappingFound => "evidence, not proof: no product mapping found within the search budget",
        };
        st.serialize_field("note", note)?;
        st.end()
    }
}

/// `Σ_i product_defect(U ψ_i)`.
pub fn objective(u: &Unitary, set: &StateSet, bip: Bipartition) -> Result<f64> {
    if u.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            found: u.dim(),
        });
    }
    if bip.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: bip.dim(),
            found: set.dim(),
        });
    }
    Ok(set
        .states()
        .iter()
        .map(|s| defect_of_amplitudes(u.apply(s).entries(), bip.d1(), bip.d2()))
        .sum())
}

pub fn verdict_of(report: &SearchReport, tol: f64) -> Verdict {
    if report.best_objective < tol {
        Verdict::ProductMappingFound
    } else {
        Verdict::NoMappingFound
    }
}

/// splitmix64 of `seed` combined with the restart index.
pub fn mix(seed: u64, restart: u64) -> u64 {
    let mut z = seed ^ restart.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn minimize_over_unitaries(set: &StateSet, bip: Bipartition, cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate()?;
    if bip.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: bip.dim(),
            found: set.dim(),
        });
    }
    let problem = Problem::new(set, bip);
    let mut results: Vec<(RestartTrace, Unitary)> = Vec::with_capacity(cfg.restarts);
    let mut start = 0;
    while start < cfg.restarts {
        let end = if cfg.stop_on_success {
            (start + BATCH).min(cfg.restarts)
        } else {
            cfg.restarts
        };
        let batch: Vec<(RestartTrace, Unitary)> = (start..end)
            .into_par_iter()
            .map(|r| problem.restart(mix(cfg.seed, r as u64), cfg))
            .collect();
        results.extend(batch);
        start = end;
        if cfg.stop_on_success && results.iter().any(|(t, _)| t.objective < cfg.objective_tol) {
            break;
        }
    }
    let (best_idx, _) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.objective.total_cmp(&b.1 .0.objective))
        .expect("at least one restart");
    let best_objective = results[best_idx].0.objective;
    let best_unitary = results[best_idx].1.clone();
    let mut report = SearchReport {
        best_objective,
        best_unitary,
        restarts: results.into_iter().map(|(t, _)| t).collect(),
        verdict: Verdict::NoMappingFound,
    };
    report.verdict = verdict_of(&report, cfg.objective_tol);
    Ok(report)
}

/// One generator of the `d²`-dimensional tangent basis of `u(d)`.
#[derive(Clone, Copy, Debug)]
enum Generator {
    /// `i E_jj`
    Phase(usize),
    /// `E_jk − E_kj`
    Rotation(usize, usize),
    /// `i (E_jk + E_kj)`
    Symmetric(usize, usize),
}

impl Generator {
    fn basis(d: usize) -> Vec<Self> {
        let mut out: Vec<Self> = (0..d).map(Generator::Phase).collect();
        for j in 0..d {
            for k in j + 1..d {
                out.push(Generator::Rotation(j, k));
                out.push(Generator::Symmetric(j, k));
            }
        }
        out
    }

    /// Adds `θ · G` to `a`.
    fn accumulate(self, theta: f64, a: &mut CMatrix) {
        match self {
            Generator::Phase(j) => a[(j, j)] += C64::new(0.0, theta),
            Generator::Rotation(j, k) => {
                a[(j, k)] += C64::new(theta, 0.0);
                a[(k, j)] -= C64::new(theta, 0.0);
            }
            Generator::Symmetric(j, k) => {
                a[(j, k)] += C64::new(0.0, theta);
                a[(k, j)] += C64::new(0.0, theta);
            }
        }
    }

    /// Changes of the touched coordinates of `exp(θG) ψ`.
    fn delta(self, theta: f64, psi: &CVector) -> [(usize, C64); 2] {
        let (c, s) = (theta.cos(), theta.sin());
        match self {
            Generator::Phase(j) => {
                let z = psi[j] * (C64::from_polar(1.0, theta) - 1.0);
                [(j, z), (j, C64::new(0.0, 0.0))]
            }
            Generator::Rotation(j, k) => {
                let (pj, pk) = (psi[j], psi[k]);
                [(j, pj * (c - 1.0) + pk * s), (k, pk * (c - 1.0) - pj * s)]
            }
            Generator::Symmetric(j, k) => {
                let (pj, pk) = (psi[j], psi[k]);
                let is = C64::new(0.0, s);
                [(j, pj * (c - 1.0) + pk * is), (k, pk * (c - 1.0) + pj * is)]
            }
        }
    }
}

struct Problem<'a> {
    states: &'a [CVector],
    bip: Bipartition,
    generators: Vec<Generator>,
}

impl<'a> Problem<'a> {
    fn new(set: &'a StateSet, bip: Bipartition) -> Self {
        Self {
            states: set.states(),
            bip,
            generators: Generator::basis(set.dim()),
        }
    }

    fn defect(&self, amps: &[C64]) -> f64 {
        defect_of_amplitudes(amps, self.bip.d1(), self.bip.d2())
    }

    fn images(&self, u: &CMatrix) -> Vec<CVector> {
        self.states.iter().map(|s| u.apply(s)).collect()
    }

    fn value(&self, u: &CMatrix) -> f64 {
        self.images(u).iter().map(|v| self.defect(v.entries())).sum()
    }

    /// Objective at `U exp(θG)` from the cached images `U ψ_i`.
    fn value_along(&self, u: &CMatrix, images: &[CVector], g: Generator, theta: f64, buf: &mut Vec<C64>) -> f64 {
        let d = u.rows();
        let mut total = 0.0;
        for (psi, img) in self.states.iter().zip(images) {
            buf.clear();
            buf.extend_from_slice(img.entries());
            for (col, dz) in g.delta(theta, psi) {
                if dz == C64::new(0.0, 0.0) {
                    continue;
                }
                for (r, b) in buf.iter_mut().enumerate().take(d) {
                    *b += u[(r, col)] * dz;
                }
            }
            total += self.defect(buf);
        }
        total
    }

    fn gradient(&self, u: &CMatrix) -> Vec<f64> {
        let images = self.images(u);
        let mut buf = Vec::with_capacity(u.rows());
        self.generators
            .iter()
            .map(|&g| {
                let plus = self.value_along(u, &images, g, FD_STEP, &mut buf);
                let minus = self.value_along(u, &images, g, -FD_STEP, &mut buf);
                (plus - minus) / (2.0 * FD_STEP)
            })
            .collect()
    }

    fn step(&self, u: &CMatrix, direction: &[f64], alpha: f64) -> CMatrix {
        let d = u.rows();
        let mut a = CMatrix::zeros(d, d);
        for (g, &t) in self.generators.iter().zip(direction) {
            g.accumulate(alpha * t, &mut a);
        }
        reorthonormalize(&u.matmul(&expm(&a))).into_matrix()
    }

    fn restart(&self, seed: u64, cfg: &SearchConfig) -> (RestartTrace, Unitary) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.bip.dim();
        let mut u = haar_unitary_from(d, &mut rng).into_matrix();
        let mut f = self.value(&u);
        let initial = f;
        let target = cfg.objective_tol * 1e-3;
        let mut grad = self.gradient(&u);
        let mut alpha = 0.1;
        let mut stalls = 0;
        let mut iters = 0;
        while iters < cfg.max_iters && f > target {
            iters += 1;
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < cfg.step_tol {
                break;
            }
            let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut trial_alpha = alpha;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACK {
                let cand = self.step(&u, &direction, trial_alpha);
                let fc = self.value(&cand);
                if fc <= f - ARMIJO * trial_alpha * gnorm2 {
                    accepted = Some((cand, fc));
                    break;
                }
                trial_alpha *= 0.5;
            }
            match accepted {
                Some((cand, fc)) => {
                    stalls = 0;
                    let new_grad = self.gradient(&cand);
                    let s: Vec<f64> = direction.iter().map(|x| x * trial_alpha).collect();
                    let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let ss: f64 = s.iter().map(|a| a * a).sum();
                    alpha = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e3) } else { trial_alpha * 2.0 };
                    let step_norm = ss.sqrt();
                    u = cand;
                    f = fc;
                    grad = new_grad;
                    if step_norm < cfg.step_tol {
                        break;
                    }
                }
                None => {
                    // non-smooth point: try a random tangent kick and keep it only if it helps
                    stalls += 1;
                    if stalls > MAX_STALLS {
                        break;
                    }
                    let kick: Vec<f64> = (0..self.generators.len())
                        .map(|_| rng.sample::<f64, _>(StandardNormal) * PERTURBATION)
                        .collect();
                    let cand = self.step(&u, &kick, 1.0);
                    let fc = self.value(&cand);
                    if fc < f {
                        u = cand;
                        f = fc;
                        grad = self.gradient(&u);
                    }
                    alpha = 0.1;
                }
            }
        }
        let unitary = Unitary::with_tolerance(u, 1e-8).expect("iterates stay unitary");
        let objective = self.value(unitary.matrix());
        (
            RestartTrace {
                seed,
                objective,
                iters,
                initial_objective: initial,
            },
            unitary,
        )
    }
}
