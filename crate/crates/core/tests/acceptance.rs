//! Acceptance suite. Every criterion runs to completion and prints one
//! PASS/FAIL line; the test fails at the end if any criterion failed.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use lie_spectrum::harness::{
    exactness_sample, random_character, random_commuting_family, random_ideal_containing_derived,
    random_solvable_algebra, random_unitary, random_upper_triangular, rng_from_seed, HarnessRng,
};
use lie_spectrum::koszul::{graded_tensor, nilpotency_residuals, product_regroup_psi, sign_operator_xi};
use lie_spectrum::lie::canonical_dedup;
use lie_spectrum::numeric::max_abs;
use lie_spectrum::spectrum::match_sets;
use lie_spectrum::{
    build_algebra, build_complex, check_product_theorem, check_projection_property, check_tensor_factor_spectra,
    compute_spectrum, contains, direct_product, join_character, spectral_candidates, t_operator, triangularize,
    Character, Error, Matrix, OperatorLieAlgebra, TolerancePolicy, C64,
};
use rand::Rng;
use rayon::prelude::*;

const CORPUS_SEED: u64 = 0x5eed_0001;

fn pol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn seeded(criterion: u64, instance: usize) -> HarnessRng {
    rng_from_seed(CORPUS_SEED ^ (criterion << 32) ^ instance as u64)
}

/// Spectra computed anywhere in criteria 1-7, and how many came back empty.
#[derive(Default)]
struct Tally {
    spectra: AtomicUsize,
    empty: AtomicUsize,
}

impl Tally {
    fn record<T>(&self, r: &lie_spectrum::Result<T>) {
        self.spectra.fetch_add(1, Ordering::Relaxed);
        if matches!(r, Err(Error::EmptySpectrum { .. })) {
            self.empty.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn add(&self, spectra: usize) {
        self.spectra.fetch_add(spectra, Ordering::Relaxed);
    }
}

#[derive(Default)]
struct Exactness {
    samples: AtomicUsize,
    members: AtomicUsize,
    disagreements: AtomicUsize,
    errors: AtomicUsize,
}

impl Exactness {
    fn sample(&self, alg: &OperatorLieAlgebra, f: &Character) {
        match exactness_sample(alg, f, &pol()) {
            Ok(s) => {
                self.samples.fetch_add(1, Ordering::Relaxed);
                if s.homology_dims.iter().any(|&h| h > 0) {
                    self.members.fetch_add(1, Ordering::Relaxed);
                }
                if !s.agrees {
                    self.disagreements.fetch_add(1, Ordering::Relaxed);
                }
            }
            Err(_) => {
                self.errors.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(number: usize, name: &str, start: Instant, o: &Outcome) {
    println!(
        "criterion {number:>2} {:<34} {}  ({:.1}s) {}",
        name,
        if o.passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
}

fn c1_corpus() -> Vec<OperatorLieAlgebra> {
    (0..200)
        .into_par_iter()
        .map(|i| random_solvable_algebra(&mut seeded(1, i), 5, 4, &pol()).expect("generator never fails"))
        .collect()
}

fn criterion_1(corpus: &[OperatorLieAlgebra], exact: &Exactness, tally: &Tally) -> Outcome {
    let results: Vec<Result<(f64, usize), String>> = corpus
        .par_iter()
        .map(|alg| {
            let weights = triangularize(alg, &pol()).map_err(|e| e.to_string())?.weights;
            let mut worst: f64 = 0.0;
            for f in &weights {
                let complex = build_complex(alg, f, &pol()).map_err(|e| e.to_string())?;
                for (_, residual, bound) in nilpotency_residuals(complex.boundaries()) {
                    worst = worst.max(residual / bound);
                }
                exact.sample(alg, f);
            }
            let spectrum = compute_spectrum(alg, &pol());
            tally.record(&spectrum);
            Ok((worst, weights.len()))
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let worst = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| r.0)
        .fold(0.0, f64::max);
    let complexes: usize = results.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.1).sum();
    Outcome {
        passed: errors.is_empty() && worst <= 1.0,
        detail: format!(
            "{complexes} complexes, worst ‖D_p D_(p+1)‖/bound = {worst:.2e}, errors = {}{}",
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    }
}

fn criterion_2(exact: &Exactness, tally: &Tally) -> Outcome {
    let results: Vec<Result<f64, String>> = (0..50)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(2, i);
            let t = random_upper_triangular(&mut rng, 4, 1.0, false);
            let u = random_unitary(&mut rng, 4);
            let a = &u * &t * u.adjoint();
            let oracle = canonical_dedup((0..4).map(|j| Character::new(vec![t[(j, j)]])).collect(), 1e-9);
            let alg = build_algebra(&[a], &pol()).map_err(|e| e.to_string())?;
            let spectrum = compute_spectrum(&alg, &pol());
            tally.record(&spectrum);
            let spectrum = spectrum.map_err(|e| e.to_string())?;
            for f in &spectrum.candidates_tested {
                exact.sample(&alg, f);
            }
            let m = match_sets(&spectrum.characters(), &oracle, 1e-6);
            if m.equal {
                Ok(m.max_distance)
            } else {
                Err(format!("instance {i}: {m:?}"))
            }
        })
        .collect();
    summarize_distances(&results, 1e-6)
}

fn criterion_3(exact: &Exactness, tally: &Tally) -> Outcome {
    let results: Vec<Result<f64, String>> = (0..30)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(3, i);
            let d = rng.random_range(1..=5);
            let n = rng.random_range(1..=d.min(3));
            let (mats, tuples) = random_commuting_family(&mut rng, d, n, true);
            let oracle = canonical_dedup(tuples, 1e-9);
            let alg = build_algebra(&mats, &pol()).map_err(|e| e.to_string())?;
            if alg.dimension() != n {
                return Err(format!(
                    "instance {i}: family collapsed to dimension {}",
                    alg.dimension()
                ));
            }
            let spectrum = compute_spectrum(&alg, &pol());
            tally.record(&spectrum);
            let spectrum = spectrum.map_err(|e| e.to_string())?;
            for f in &spectrum.candidates_tested {
                exact.sample(&alg, f);
            }
            let m = match_sets(&spectrum.characters(), &oracle, 1e-6);
            if m.equal {
                Ok(m.max_distance)
            } else {
                Err(format!("instance {i}: {m:?}"))
            }
        })
        .collect();
    summarize_distances(&results, 1e-6)
}

/// 100 extra (algebra, character) pairs: weights, weights nudged along the
/// character space, and unrelated random characters.
fn criterion_4_extra(exact: &Exactness) {
    (0..100).into_par_iter().for_each(|i| {
        let mut rng = seeded(4, i);
        let Ok(alg) = random_solvable_algebra(&mut rng, 5, 4, &pol()) else {
            exact.errors.fetch_add(1, Ordering::Relaxed);
            return;
        };
        let Ok(tri) = triangularize(&alg, &pol()) else {
            exact.errors.fetch_add(1, Ordering::Relaxed);
            return;
        };
        let w = &tri.weights[rng.random_range(0..tri.weights.len())];
        let g = random_character(&mut rng, &alg, &pol());
        let eps = [0.0, 1e-3, 1.0][i % 3];
        let f = Character::new(w.values.iter().zip(&g.values).map(|(a, b)| a + b * eps).collect());
        exact.sample(&alg, &f);
    });
}

fn criterion_4(exact: &Exactness) -> Outcome {
    let samples = exact.samples.load(Ordering::Relaxed);
    let disagreements = exact.disagreements.load(Ordering::Relaxed);
    let errors = exact.errors.load(Ordering::Relaxed);
    Outcome {
        passed: disagreements == 0 && errors == 0 && samples > 0,
        detail: format!(
            "{samples} complexes ({} with homology), disagreements = {disagreements}, errors = {errors}",
            exact.members.load(Ordering::Relaxed)
        ),
    }
}

fn criterion_5(tally: &Tally) -> Outcome {
    let results: Vec<Result<f64, String>> = (0..100)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(5, i);
            let alg = random_solvable_algebra(&mut rng, 5, 4, &pol()).map_err(|e| e.to_string())?;
            let ideal = random_ideal_containing_derived(&mut rng, &alg, &pol()).map_err(|e| e.to_string())?;
            let r = check_projection_property(&ideal, &pol());
            tally.record(&r);
            tally.add(1);
            let r = r.map_err(|e| format!("instance {i}: {e}"))?;
            if r.passed {
                Ok(r.matching.max_distance)
            } else {
                Err(format!("instance {i}: {:?}", r.matching))
            }
        })
        .collect();
    summarize_distances(&results, 1e-6)
}

fn criterion_6(tally: &Tally) -> Outcome {
    let results: Vec<Result<(f64, f64, bool), String>> = (0..150)
        .into_par_iter()
        .map(|job| {
            let (i, d2) = (job / 3, job % 3 + 1);
            let alg = random_solvable_algebra(&mut seeded(6, i), 5, 4, &pol()).map_err(|e| e.to_string())?;
            let r = check_tensor_factor_spectra(&alg, d2, &pol());
            tally.record(&r);
            tally.add(2);
            let r = r.map_err(|e| format!("instance {i}, d2 = {d2}: {e}"))?;
            let inclusion = r.first_inclusion.max_distance.max(r.second_inclusion.max_distance);
            if r.flip.equal
                && r.flip.max_distance <= 1e-8
                && r.first_inclusion.holds
                && r.second_inclusion.holds
                && inclusion <= 1e-6
            {
                Ok((r.flip.max_distance, inclusion, r.first_is_equality))
            } else {
                Err(format!(
                    "instance {i}, d2 = {d2}: flip {:?}, inclusion {inclusion:.2e}",
                    r.flip
                ))
            }
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let ok: Vec<&(f64, f64, bool)> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let flip = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let incl = ok.iter().map(|r| r.1).fold(0.0, f64::max);
    let equal = ok.iter().filter(|r| r.2).count();
    Outcome {
        passed: errors.is_empty(),
        detail: format!(
            "{} checks, worst flip distance {flip:.2e}, worst inclusion distance {incl:.2e}, first inclusion an equality in {equal}/{}, failures = {}{}",
            results.len(),
            ok.len(),
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    }
}

fn diag(vals: &[f64]) -> Matrix {
    Matrix::from_fn(vals.len(), vals.len(), |i, j| {
        if i == j {
            C64::new(vals[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn criterion_7(tally: &Tally) -> Outcome {
    let mut results: Vec<Result<f64, String>> = (0..50)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(7, i);
            let a1 = random_solvable_algebra(&mut rng, 4, 3, &pol()).map_err(|e| e.to_string())?;
            let a2 = random_solvable_algebra(&mut rng, 4, 3, &pol()).map_err(|e| e.to_string())?;
            let r = check_product_theorem(&a1, &a2, &pol());
            tally.record(&r);
            tally.add(2);
            let r = r.map_err(|e| format!("pair {i}: {e}"))?;
            if r.passed && r.matching.max_distance <= 1e-6 {
                Ok(r.matching.max_distance)
            } else {
                Err(format!("pair {i}: {:?}", r.matching))
            }
        })
        .collect();
    let exact = (|| -> Result<f64, String> {
        let a1 = build_algebra(&[diag(&[1.0, 2.0])], &pol()).map_err(|e| e.to_string())?;
        let a2 = build_algebra(&[diag(&[3.0, 4.0])], &pol()).map_err(|e| e.to_string())?;
        let r = check_product_theorem(&a1, &a2, &pol());
        tally.record(&r);
        tally.add(2);
        let r = r.map_err(|e| e.to_string())?;
        let expected: Vec<Character> = [[1.0, 3.0], [1.0, 4.0], [2.0, 3.0], [2.0, 4.0]]
            .iter()
            .map(|v| Character::from_real(v))
            .collect();
        let m = match_sets(&r.product, &expected, 1e-10);
        if r.passed && m.equal && r.matching.max_distance <= 1e-10 {
            Ok(m.max_distance)
        } else {
            Err(format!("diagonal case: {m:?}"))
        }
    })();
    let exact_line = match &exact {
        Ok(d) => format!("diagonal {{1,2}}x{{3,4}} distance {d:.1e}"),
        Err(e) => e.clone(),
    };
    results.push(exact);
    let mut o = summarize_distances(&results, 1e-6);
    o.detail = format!("{}; {exact_line}", o.detail);
    o
}

fn criterion_8() -> Outcome {
    let results: Vec<Result<f64, String>> = (0..20)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(8, i);
            let a1 = random_solvable_algebra(&mut rng, 3, 3, &pol()).map_err(|e| e.to_string())?;
            let a2 = random_solvable_algebra(&mut rng, 3, 3, &pol()).map_err(|e| e.to_string())?;
            let f1 = random_character(&mut rng, &a1, &pol());
            let f2 = random_character(&mut rng, &a2, &pol());
            let prod = direct_product(&a1, &a2).map_err(|e| e.to_string())?;
            let k = build_complex(&prod, &join_character(&f1, &f2), &pol()).map_err(|e| e.to_string())?;
            let k1 = build_complex(&a1, &f1, &pol()).map_err(|e| e.to_string())?;
            let k2 = build_complex(&a2, &f2, &pol()).map_err(|e| e.to_string())?;
            let psi = product_regroup_psi(&a1, &a2).map_err(|e| e.to_string())?.total;
            let xi = sign_operator_xi(a1.ambient_dim(), a1.dimension());
            let rhs_d = graded_tensor(&k1.total_boundary(), &xi, &k2.total_boundary()).map_err(|e| e.to_string())?;
            let rhs_t = graded_tensor(&t_operator(&k1), &xi, &t_operator(&k2)).map_err(|e| e.to_string())?;
            let err_d = max_abs(&(&psi * k.total_boundary() - rhs_d * &psi));
            let err_t = max_abs(&(&psi * t_operator(&k) - rhs_t * &psi));
            Ok(err_d.max(err_t))
        })
        .collect();
    summarize_distances(&results, 1e-12)
}

fn criterion_9(tally: &Tally) -> Outcome {
    let spectra = tally.spectra.load(Ordering::Relaxed);
    let empty = tally.empty.load(Ordering::Relaxed);
    Outcome {
        passed: empty == 0 && spectra > 0,
        detail: format!("{spectra} spectra computed, {empty} empty"),
    }
}

fn criterion_10(corpus: &[OperatorLieAlgebra]) -> Outcome {
    let results: Vec<Result<f64, String>> = (0..500)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(10, i);
            let alg = &corpus[i % corpus.len()];
            let weights = triangularize(alg, &pol()).map_err(|e| e.to_string())?.weights;
            let nearest = |f: &Character| weights.iter().map(|w| w.distance(f)).fold(f64::INFINITY, f64::min);
            // Half broad samples, half within a decade-scaled shell around a weight.
            let f = loop {
                let g = random_character(&mut rng, alg, &pol());
                let f = if i % 2 == 0 {
                    g
                } else {
                    let w = &weights[rng.random_range(0..weights.len())];
                    let norm: f64 = g.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    let radius = 10f64.powf(rng.random_range(-4.0..0.0)) / norm.max(f64::MIN_POSITIVE);
                    Character::new(w.values.iter().zip(&g.values).map(|(a, b)| a + b * radius).collect())
                };
                if nearest(&f) > 1e-5 {
                    break f;
                }
            };
            let (member, diag) = contains(alg, &f, &pol()).map_err(|e| format!("sample {i}: {e}"))?;
            if member {
                Err(format!(
                    "sample {i}: {:?} at distance {:.2e} from the weights is a member (t_min_sv {:.2e})",
                    f.values,
                    nearest(&f),
                    diag.t_min_sv
                ))
            } else {
                Ok(diag.t_min_sv)
            }
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let smallest = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let probe = structured_probe(corpus);
    Outcome {
        passed: errors.is_empty() && probe.members.is_empty() && probe.errors == 0,
        detail: format!(
            "{} samples, smallest normalized sigma_min(T) {smallest:.2e}, members found = {}{}; \
             structured probe: {} characters weight + adjoint-weight sums off the weights, {} members{}, errors = {}",
            results.len(),
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default(),
            probe.tested,
            probe.members.len(),
            probe
                .members
                .first()
                .map(|e| format!(" (first: {e})"))
                .unwrap_or_default(),
            probe.errors
        ),
    }
}

struct Probe {
    tested: usize,
    members: Vec<String>,
    errors: usize,
}

/// Random characters almost never land on a shifted weight, so this also
/// tests every candidate of the form weight + sum of adjoint weights that
/// sits more than 1e-5 from the weights.
fn structured_probe(corpus: &[OperatorLieAlgebra]) -> Probe {
    let per: Vec<Result<(usize, Vec<String>), String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, alg)| {
            let weights = triangularize(alg, &pol()).map_err(|e| e.to_string())?.weights;
            let nearest = |f: &Character| weights.iter().map(|w| w.distance(f)).fold(f64::INFINITY, f64::min);
            let mut tested = 0;
            let mut members = Vec::new();
            for f in spectral_candidates(alg, &pol()).map_err(|e| e.to_string())? {
                let dist = nearest(&f);
                if dist <= 1e-5 {
                    continue;
                }
                tested += 1;
                let (member, diag) = contains(alg, &f, &pol()).map_err(|e| e.to_string())?;
                if member {
                    members.push(format!(
                        "algebra {i}: distance {dist:.2e} from the weights, homology {:?}",
                        diag.homology_dims
                    ));
                }
            }
            Ok((tested, members))
        })
        .collect();
    let mut probe = Probe {
        tested: 0,
        members: Vec::new(),
        errors: 0,
    };
    for r in per {
        match r {
            Ok((t, m)) => {
                probe.tested += t;
                probe.members.extend(m);
            }
            Err(_) => probe.errors += 1,
        }
    }
    probe
}

fn summarize_distances(results: &[Result<f64, String>], tol: f64) -> Outcome {
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let worst = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .copied()
        .fold(0.0, f64::max);
    Outcome {
        passed: errors.is_empty() && worst <= tol,
        detail: format!(
            "{} instances, worst distance {worst:.2e} (tol {tol:.0e}), failures = {}{}",
            results.len(),
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    }
}

#[test]
fn acceptance() {
    let tally = Tally::default();
    let exact = Exactness::default();
    let mut passed = Vec::new();

    let start = Instant::now();
    let corpus = c1_corpus();
    let o = criterion_1(&corpus, &exact, &tally);
    report(1, "boundary nilpotency", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_2(&exact, &tally);
    report(2, "single-operator reduction", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_3(&exact, &tally);
    report(3, "commutative joint spectrum", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    criterion_4_extra(&exact);
    let o = criterion_4(&exact);
    report(4, "exactness vs T-invertibility", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_5(&tally);
    report(5, "projection property", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_6(&tally);
    report(6, "tensoring with a second space", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_7(&tally);
    report(7, "product theorem", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_8();
    report(8, "intertwining identities", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_9(&tally);
    report(9, "nonemptiness", start, &o);
    passed.push(o.passed);

    let start = Instant::now();
    let o = criterion_10(&corpus);
    report(10, "negative sampling", start, &o);
    passed.push(o.passed);

    let failed: Vec<usize> = passed
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    println!(
        "acceptance: {}/{} criteria passed",
        passed.len() - failed.len(),
        passed.len()
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
