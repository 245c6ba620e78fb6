//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use abset::constructions::{
    example1_set, prop1_witness_unitary, prop2_embed_unitary, theorem1_set, PartitionedSet, Theorem1Params,
    WitnessCase,
};
use abset::entanglement::{product_defect, schmidt, Bipartition, StateSet};
use abset::feng::{feng_decompose, feng_generate, feng_validate};
use abset::linalg::{haar_unitary_from, random_unit_vector, CVector, Unitary};
use abset::polynomials::{
    cancellation_report, condition_gap, eval_sign, family_poly, poly_f_general, poly_f_pair, IndexLists,
};
use abset::search::{minimize_over_unitaries, objective, SearchConfig, Verdict};
use abset::table1::{sign_relation, printed_expansion, table1, ROW_INDICES, TABULATED_ROOTS};
use abset_cli::dispatch;
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const BIPARTITIONS: [(usize, usize); 4] = [(2, 2), (2, 3), (2, 4), (3, 3)];

fn bip(d1: usize, d2: usize) -> Bipartition {
    Bipartition::new(d1, d2).unwrap()
}

fn random_combination(vectors: &[CVector], rng: &mut ChaCha8Rng) -> CVector {
    let mut out = CVector::zeros(vectors[0].dim());
    for v in vectors {
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        out.axpy(c, v);
    }
    out
}

fn table_roots() -> Outcome {
    let start = Instant::now();
    let r = dispatch(["table1"]);
    let elapsed = start.elapsed();
    let v: Value = match serde_json::from_str(&r.stdout) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("unparseable output: {e}")),
    };
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for (row, want) in v["rows"].as_array().unwrap().iter().zip(TABULATED_ROOTS) {
        let roots: Vec<f64> = row["roots"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["value"].as_f64().unwrap())
            .collect();
        counts.push(roots.len());
        if roots.len() != 7 {
            worst = f64::INFINITY;
            continue;
        }
        for (a, b) in roots.iter().zip(want) {
            worst = worst.max((a - b).abs());
        }
    }
    let pass = counts.iter().all(|&c| c == 7) && worst < 1e-5 && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!("root counts {counts:?}, max deviation {worst:.2e}, runtime {:.2?}", elapsed),
    )
}

fn printed_expansions() -> Outcome {
    let mut signs = Vec::new();
    for (row, &(i, j, k, l)) in ROW_INDICES.iter().enumerate() {
        let poly = poly_f_pair(2, i, j, k, l).unwrap();
        signs.push(sign_relation(&printed_expansion(row), &poly));
    }
    let pass = signs.iter().all(Option::is_some);
    let shown: Vec<String> = signs
        .iter()
        .map(|s| s.map_or("mismatch".to_string(), |s| format!("{s:+}")))
        .collect();
    outcome(pass, format!("printed = sign x definition with signs [{}]", shown.join(", ")))
}

fn excluded_cardinality() -> Outcome {
    let report = table1(1e-9).unwrap();
    outcome(
        report.excluded_count == 15,
        format!("{} distinct values (expected 15)", report.excluded_count),
    )
}

fn universal_roots() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let one = BigRational::from_integer(BigInt::from(1));
    let minus_one = -one.clone();
    let mut failures = 0;
    for _ in 0..20 {
        let p = rng.gen_range(2..=9u32);
        let mut idx: Vec<u32> = (1..=6).collect();
        idx.shuffle(&mut rng);
        let poly = poly_f_pair(p, idx[0], idx[1], idx[2], idx[3]).unwrap();
        if eval_sign(&poly, &one) != 0 {
            failures += 1;
        }
        if p % 2 == 0 && eval_sign(&poly, &minus_one) != 0 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("20 instances, {failures} failures"))
}

fn diagonal_cancellation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for _ in 0..20 {
        let s = rng.gen_range(2..=3usize);
        let mut idx: Vec<u32> = (1..=6).collect();
        idx.shuffle(&mut rng);
        let lists = IndexLists::new(idx[..s].to_vec(), idx[s..2 * s].to_vec(), 7).unwrap();
        let poly = poly_f_general(&lists).unwrap();
        let report = cancellation_report(&lists);
        if poly.is_zero() || !report.diagonal_cancelled || report.shared_exponents != s * s {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!("20 instances, {failures} failures, runtime {elapsed:.2?}"),
    )
}

fn schmidt_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rec = 0.0f64;
    let mut worst_norm = 0.0f64;
    for k in 0..1000 {
        let (d1, d2) = BIPARTITIONS[k % 4];
        let b = bip(d1, d2);
        let psi = random_unit_vector(d1 * d2, &mut rng);
        let s = schmidt(&psi, b).unwrap();
        worst_rec = worst_rec.max(s.reconstruct().max_abs_diff(&psi));
        worst_norm = worst_norm.max((s.coefficients.iter().map(|c| c * c).sum::<f64>() - 1.0).abs());
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = product_defect(&CVector::from_reals(&[h, 0.0, 0.0, h]), bip(2, 2)).unwrap();
    let pass = worst_rec < 1e-10 && worst_norm < 1e-12 && (bell - 0.5).abs() < 1e-12;
    outcome(
        pass,
        format!("max reconstruction {worst_rec:.1e}, max |sum c^2 - 1| {worst_norm:.1e}, Bell defect {bell}"),
    )
}

/// Random orthogonal parts of small span, rotated by a Haar unitary.
fn random_partitioned(rng: &mut ChaCha8Rng, b: Bipartition) -> PartitionedSet {
    let d = b.dim();
    let g = haar_unitary_from(d, rng);
    let mut frame: Vec<CVector> = (0..d).map(|k| g.apply(&CVector::basis(d, k))).collect();
    frame.shuffle(rng);
    let k = rng.gen_range(1..=b.d1());
    let mut offset = 0;
    let mut parts = Vec::with_capacity(k);
    for _ in 0..k {
        let rank = rng.gen_range(1..=b.d2());
        let span = &frame[offset..offset + rank];
        offset += rank;
        let count = rng.gen_range(1..=rank + 2);
        let states = (0..count).map(|_| random_combination(span, rng)).collect();
        parts.push(StateSet::from_states(states).unwrap());
    }
    PartitionedSet::new(parts, b).unwrap()
}

fn criterion7_sets() -> Vec<PartitionedSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..100)
        .map(|k| {
            let (d1, d2) = BIPARTITIONS[k % 4];
            random_partitioned(&mut rng, bip(d1, d2))
        })
        .collect()
}

fn embedding_check(sets: &[PartitionedSet]) -> Outcome {
    let mut worst_u = 0.0f64;
    let mut worst_defect = 0.0f64;
    for pset in sets {
        let u = prop2_embed_unitary(pset).unwrap();
        worst_u = worst_u.max(u.matrix().unitarity_defect());
        for s in pset.flatten().states() {
            worst_defect = worst_defect.max(product_defect(&u.apply(s), pset.bipartition()).unwrap());
        }
    }
    outcome(
        worst_u < 1e-10 && worst_defect < 1e-10,
        format!("100 sets, max unitarity deviation {worst_u:.1e}, max image defect {worst_defect:.1e}"),
    )
}

fn witness_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut cases = [0usize; 3];
    let mut mismatched = 0;
    for k in 0..50 {
        let (d1, d2) = BIPARTITIONS[k % 4];
        let b = bip(d1, d2);
        let d = b.dim();
        let wide = b.wide();
        let g = haar_unitary_from(d, &mut rng);
        let frame: Vec<CVector> = (0..d).map(|k| g.apply(&CVector::basis(d, k))).collect();
        let (inside, outside) = frame.split_at(wide);
        let mut states: Vec<CVector> = (0..wide + 1).map(|_| random_combination(inside, &mut rng)).collect();
        let expected = match k % 5 {
            0 | 1 => WitnessCase::Orthogonal,
            2 | 3 => WitnessCase::Overlapping,
            _ => WitnessCase::Embedded,
        };
        let psi = match expected {
            WitnessCase::Orthogonal => random_combination(outside, &mut rng),
            WitnessCase::Overlapping => random_combination(inside, &mut rng).add(&random_combination(outside, &mut rng)),
            WitnessCase::Embedded => random_combination(inside, &mut rng),
        };
        let i = rng.gen_range(0..=states.len());
        states.insert(i, psi);
        let set = StateSet::from_states(states).unwrap();
        let w = prop1_witness_unitary(&set, i, b).unwrap();
        if w.case != expected {
            mismatched += 1;
        }
        cases[w.case as usize] += 1;
        for s in set.states() {
            worst = worst.max(product_defect(&w.unitary.apply(s), b).unwrap());
        }
    }
    outcome(
        worst < 1e-10 && mismatched == 0 && cases[1] > 0 && cases[2] > 0,
        format!(
            "50 sets (embedded {}, orthogonal {}, overlapping {}), max image defect {worst:.1e}",
            cases[0], cases[1], cases[2]
        ),
    )
}

fn falsifier_soundness(sets: &[PartitionedSet]) -> Outcome {
    let start = Instant::now();
    let cfg = SearchConfig {
        restarts: 100,
        ..SearchConfig::default()
    };
    let mut worst = 0.0f64;
    let mut worst_replay = 0.0f64;
    let mut not_found = 0;
    for (k, pset) in sets.iter().enumerate() {
        let set = pset.flatten();
        let b = pset.bipartition();
        let report = minimize_over_unitaries(&set, b, &SearchConfig { seed: k as u64, ..cfg.clone() }).unwrap();
        worst = worst.max(report.best_objective);
        if report.verdict != Verdict::ProductMappingFound {
            not_found += 1;
        }
        let replay = objective(&report.best_unitary, &set, b).unwrap();
        worst_replay = worst_replay.max((replay - report.best_objective).abs());
    }
    outcome(
        worst < 1e-6 && not_found == 0 && worst_replay < 1e-9,
        format!(
            "100 sets, worst best_objective {worst:.1e}, {not_found} without a mapping, replay drift {worst_replay:.1e}, runtime {:.2?}",
            start.elapsed()
        ),
    )
}

fn falsifier_evidence() -> Outcome {
    let b = bip(2, 2);
    let cfg = SearchConfig {
        restarts: 50,
        stop_on_success: false,
        ..SearchConfig::default()
    };
    let ex1 = example1_set(0.5, None).unwrap().set;
    let thm1 = theorem1_set(&Theorem1Params::uniform(4, 0.8, 0.6)).unwrap().set;
    let r_ex1 = minimize_over_unitaries(&ex1, b, &cfg).unwrap();
    let r_thm1 = minimize_over_unitaries(&thm1, b, &cfg).unwrap();
    // the identity already pairs ξ_1..ξ_4 with |11⟩, |12⟩, |21⟩, |22⟩
    let at_identity = objective(&Unitary::identity(4), &ex1, b).unwrap();
    let pass = r_ex1.best_objective >= 1e-3 && r_thm1.best_objective >= 1e-3;
    outcome(
        pass,
        format!(
            "example set best {:.3e} (objective at the identity alignment {:.3e}), d = 4 two-coefficient set best {:.3e}",
            r_ex1.best_objective, at_identity, r_thm1.best_objective
        ),
    )
}

fn feng_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for k in 0..100 {
        let n = rng.gen_range(2..=5usize);
        let mut partition = Vec::new();
        let mut left = n;
        while left > 0 {
            let part = rng.gen_range(1..=left);
            partition.push(part);
            left -= part;
        }
        let fb = feng_generate(n, &partition, k).unwrap();
        let ok = match feng_decompose(&fb.flatten(), 1e-10) {
            Ok(back) => {
                let mut want = partition.clone();
                want.sort_unstable_by(|a, b| b.cmp(a));
                let mut got = back.partition();
                got.sort_unstable_by(|a, b| b.cmp(a));
                got == want && feng_validate(&back, 1e-10).pass
            }
            Err(_) => false,
        };
        if !ok {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("100 instances, {failures} failures"))
}

fn gap_sign_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut disagreements = 0;
    let mut checked = 0;
    for _ in 0..10 {
        let p = *[2u32, 3, 5, 7].choose(&mut rng).unwrap();
        let s = rng.gen_range(1..=2usize);
        let max_index = if p == 7 { 4 } else { 5 };
        let mut idx: Vec<u32> = (1..=max_index).collect();
        idx.shuffle(&mut rng);
        let lists = IndexLists::new(idx[..s].to_vec(), idx[s..2 * s].to_vec(), p).unwrap();
        let poly = family_poly(&lists);
        for _ in 0..20 {
            let num = rng.gen_range(1..1024i64);
            let x = BigRational::new(BigInt::from(num), BigInt::from(1024));
            let gap = condition_gap(num as f64 / 1024.0, &lists).unwrap();
            checked += 1;
            if gap.sign != eval_sign(&poly, &x) {
                disagreements += 1;
            }
        }
    }
    outcome(disagreements == 0, format!("{checked} evaluations, {disagreements} disagreements"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ex1 = dir.path().join("ex1.json");
    std::fs::write(&ex1, dispatch(["construct", "ex1", "--x", "0.5"]).stdout).unwrap();
    let ex1 = ex1.to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["construct", "thm1", "--d", "6", "--a", "0.8", "--b", "0.6", "--seed", "3"],
        vec!["construct", "thm2", "--n", "3", "--p", "8", "--x", "0.9"],
        vec!["feng", "gen", "--n", "5", "--partition", "2,1,2", "--seed", "9"],
        vec!["search", "--input", &ex1, "--bipartition", "2x2", "--restarts", "4", "--seed", "2"],
        vec!["poly", "pair", "--p", "3", "--indices", "1,2,3,4", "--roots"],
        vec!["excluded", "--p", "2"],
        vec!["table1"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut differing = Vec::new();
    for argv in &runs {
        let a = dispatch(argv.clone());
        let b = dispatch(argv.clone());
        if a != b || a.exit_code == 2 {
            differing.push(argv[0].clone());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} invocations repeated, differing: {differing:?}", runs.len()),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let sets = criterion7_sets();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("table roots", Box::new(table_roots)),
        ("printed expansions", Box::new(printed_expansions)),
        ("excluded set cardinality", Box::new(excluded_cardinality)),
        ("universal roots", Box::new(universal_roots)),
        ("diagonal cancellation", Box::new(diagonal_cancellation)),
        ("schmidt suite", Box::new(schmidt_suite)),
        ("embedding unitary", Box::new(|| embedding_check(&sets))),
        ("witness unitary", Box::new(witness_check)),
        ("falsifier soundness", Box::new(|| falsifier_soundness(&sets))),
        ("falsifier evidence", Box::new(falsifier_evidence)),
        ("feng round trip", Box::new(feng_round_trip)),
        ("gap sign agreement", Box::new(gap_sign_agreement)),
        ("cli determinism", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {:>2} {name}: {} ({:.2?})",
            k + 1,
            result.detail,
            start.elapsed()
        );
        if !result.pass {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
