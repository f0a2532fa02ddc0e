//! End-to-end acceptance checks. Runs without the libtest harness so every
//! line of the summary is printed; exits nonzero if any check fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use moment_atlas::bridge::{beta_to_gamma, build_l, gamma_to_beta};
use moment_atlas::cubature::{ball_cubature, feasible_interval, unit_ball};
use moment_atlas::extension::{
    extension_bound, flat_extend_from_b, localizing_flat_check, successive_flat_extensions, verify_flat_extension,
};
use moment_atlas::linalg::{numerical_rank, psd_report};
use moment_atlas::localizing::{localize_by_compression, localize_direct};
use moment_atlas::measure::{hausdorff, nearest_pairing};
use moment_atlas::moments::{build_moment_matrix, from_measure};
use moment_atlas::monomials::{basis, binomial};
use moment_atlas::solve::{minimal_measure_pipeline, variety_points};
use moment_atlas::{AtomicMeasure, Kind, MomentSequence, MultiIndex, Polynomial, Scalar, Tolerances, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn fragment<T: Scalar>(seq: &MomentSequence<T>, degree: u32) -> MomentSequence<T> {
    MomentSequence::from_entries(
        seq.num_vars(),
        degree,
        seq.entries().filter(|(m, _)| m.degree() == degree).map(|(m, v)| (m.clone(), *v)),
    )
    .unwrap()
}

fn random_atoms(rng: &mut ChaCha8Rng, num_vars: usize, count: usize, min_sep: f64, keep: impl Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
    loop {
        let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut tries = 0;
        while atoms.len() < count && tries < 10_000 {
            tries += 1;
            let p: Vec<f64> = (0..num_vars).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if keep(&p) && atoms.iter().all(|a| moment_atlas::measure::distance(a, &p) >= min_sep) {
                atoms.push(p);
            }
        }
        if atoms.len() == count {
            return atoms;
        }
    }
}

fn random_weights(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.gen_range(0.1..2.0)).collect()
}

fn ball_golden() -> Verdict {
    let start = Instant::now();
    let b = 4.0 / 15.0 * 0.4f64.sqrt() * PI;
    let ex = ball_cubature(b);
    let out = match minimal_measure_pipeline(&ex.moments, &ex.fragment, &ex.constraints, &Tolerances::default(), 0) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("pipeline failed: {e}")),
    };
    let elapsed = start.elapsed();
    let expected = [
        (vec![0.4f64.sqrt(), 0.6f64.sqrt(), 0.0], 2.0 * PI / 9.0),
        (vec![0.4f64.sqrt(), -(0.6f64.sqrt()), 0.0], 2.0 * PI / 9.0),
        (vec![-(0.1f64.sqrt()), 0.0, 0.3f64.sqrt()], 4.0 * PI / 9.0),
        (vec![-(0.1f64.sqrt()), 0.0, -(0.3f64.sqrt())], 4.0 * PI / 9.0),
    ];
    let exp_atoms: Vec<Vec<f64>> = expected.iter().map(|e| e.0.clone()).collect();
    let mu = &out.measure;
    let mut atom_err = 0.0f64;
    let mut weight_err = 0.0f64;
    if mu.num_atoms() == 4 {
        let pair = nearest_pairing(&mu.atoms, &exp_atoms);
        for (i, &j) in pair.iter().enumerate() {
            for (x, y) in mu.atoms[i].iter().zip(&exp_atoms[j]) {
                atom_err = atom_err.max((x - y).abs());
            }
            weight_err = weight_err.max((mu.weights[i] - expected[j].1).abs() / expected[j].1);
        }
    }
    let cert = &out.certificate;
    let rank_m1 = cert.stage("psd").and_then(|s| s.ranks.get("M(1)").copied());
    let rank_mp2 = cert.stage("localize").and_then(|s| s.ranks.get("M_q1(2)").copied());
    let on_sphere = cert.atom_counts.first().map(|c| c.found_on_boundary);
    let ok = mu.num_atoms() == 4
        && atom_err <= 1e-9
        && weight_err <= 1e-9
        && rank_m1 == Some(4)
        && rank_mp2 == Some(2)
        && on_sphere == Some(2)
        && elapsed < Duration::from_secs(1);
    verdict(
        ok,
        format!(
            "{} atoms, max atom error {atom_err:.2e}, max weight rel error {weight_err:.2e}, rank M(1) {rank_m1:?}, rank M_p(2) {rank_mp2:?}, on sphere {on_sphere:?}, {elapsed:.2?}",
            mu.num_atoms()
        ),
    )
}

fn random_polynomial(rng: &mut ChaCha8Rng, num_vars: usize, max_degree: u32) -> Polynomial<f64> {
    let b = basis(num_vars, max_degree, Kind::Real).unwrap();
    loop {
        let mut p = Polynomial::zero(num_vars);
        let terms = rng.gen_range(1..=6);
        for _ in 0..terms {
            let m = b.index(rng.gen_range(0..b.len())).clone();
            p.add_term(m, rng.gen_range(-2.0..2.0));
        }
        if !p.is_zero() {
            return p;
        }
    }
}

fn localizing_equivalence() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..200 {
        let num_vars = rng.gen_range(1..=3);
        let degree = rng.gen_range(0..=4);
        let p = random_polynomial(&mut rng, num_vars, degree);
        let n = rng.gen_range(p.half_degree().max(1)..=3);
        let r = rng.gen_range(1..=6);
        let atoms = random_atoms(&mut rng, num_vars, r, 1e-3, |_| true);
        let w = random_weights(&mut rng, r);
        let seq = from_measure(&AtomicMeasure::new(atoms, w).unwrap(), 2 * n).unwrap();
        match (localize_direct(&seq, &p, n), localize_by_compression(&seq, &p, n)) {
            (Ok(a), Ok(b)) => {
                let rel = (&a.data - &b.data).norm() / (1.0 + a.data.norm());
                worst = worst.max(rel);
            }
            _ => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    let ok = failures == 0 && worst <= 1e-12 && elapsed < Duration::from_secs(30);
    verdict(ok, format!("200 instances, worst scaled difference {worst:.2e}, {failures} errors, {elapsed:.2?}"))
}

fn round_trip_recovery() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = Tolerances::default();
    let mut worst_atoms = 0.0f64;
    let mut worst_weights = 0.0f64;
    let mut worst_case = String::new();
    let mut problems = Vec::new();
    for case in 0..100 {
        let num_vars = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=2u32);
        let cap = binomial(num_vars as u64 + n as u64, num_vars as u64) as usize;
        let r = rng.gen_range(1..=cap);
        let atoms = random_atoms(&mut rng, num_vars, r, 1e-3, |_| true);
        let w = random_weights(&mut rng, r);
        let mu = AtomicMeasure::new(atoms, w).unwrap();
        let seq = from_measure(&mu, 2 * n + 2).unwrap();
        let flat = verify_flat_extension(
            &build_moment_matrix(&seq, n).unwrap(),
            &build_moment_matrix(&seq, n + 1).unwrap(),
            &tol,
        )
        .unwrap();
        if !flat.is_flat {
            problems.push(format!("case {case}: M(n+1) not flat (ranks {} vs {})", flat.rank_base, flat.rank_ext));
            continue;
        }
        let out = match minimal_measure_pipeline(&seq.truncated(2 * n), &fragment(&seq, 2 * n + 1), &[], &tol, case) {
            Ok(o) => o,
            Err(e) => {
                problems.push(format!("case {case} (N={num_vars}, n={n}, r={r}): {e}"));
                continue;
            }
        };
        if out.measure.num_atoms() != r {
            problems.push(format!("case {case}: {} atoms, expected {r}", out.measure.num_atoms()));
            continue;
        }
        let h = hausdorff(&out.measure.atoms, &mu.atoms);
        if h > worst_atoms {
            worst_case = format!("case {case} (N={num_vars}, n={n}, r={r})");
        }
        worst_atoms = worst_atoms.max(h);
        let pair = nearest_pairing(&out.measure.atoms, &mu.atoms);
        for (i, &j) in pair.iter().enumerate() {
            worst_weights = worst_weights.max((out.measure.weights[i] - mu.weights[j]).abs());
        }
    }
    let ok = problems.is_empty() && worst_atoms <= 1e-6 && worst_weights <= 1e-6;
    let mut detail = format!("100 measures, Hausdorff {worst_atoms:.2e} (worst {worst_case}), weights {worst_weights:.2e}");
    if !problems.is_empty() {
        detail.push_str(&format!(", {} failed: {}", problems.len(), problems.join("; ")));
    }
    verdict(ok, detail)
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, degree: u32) -> MomentSequence<C64> {
    let mut seq = MomentSequence::new(d, degree);
    for m in basis(d, degree, Kind::Complex).unwrap().indices() {
        if seq.get(m).is_some() {
            continue;
        }
        let c = m.conj(Kind::Complex);
        if *m == c {
            let v = if m.degree() == 0 { 1.0 + rng.gen_range(0.0..1.0) } else { rng.gen_range(-1.0..1.0) };
            seq.insert(m.clone(), C64::new(v, 0.0)).unwrap();
        } else {
            let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            seq.insert(m.clone(), v).unwrap();
            seq.insert(c, v.conj()).unwrap();
        }
    }
    seq
}

fn rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn bridge_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    for case in 0..50 {
        let d = rng.gen_range(1..=2);
        let n = rng.gen_range(0..=2u32);
        let gamma = if case % 2 == 0 {
            let r = rng.gen_range(1..=5);
            let atoms = (0..r)
                .map(|_| (0..d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect();
            from_measure(&AtomicMeasure::new(atoms, random_weights(&mut rng, r)).unwrap(), 2 * n).unwrap()
        } else {
            random_hermitian(&mut rng, d, 2 * n)
        };
        let beta = gamma_to_beta(&gamma).unwrap();
        let maps = build_l(d, n).unwrap();
        let linv = maps.inverse();
        let mg = build_moment_matrix(&gamma, n).unwrap();
        let mb = build_moment_matrix(&beta, n).unwrap();
        let mb_c = mb.data().map(|x| C64::new(x, 0.0));
        let via_r = rel(&mb_c, &(linv.adjoint() * mg.data() * &linv));
        let gamma_back = beta_to_gamma(&beta).unwrap();
        let mgb = build_moment_matrix(&gamma_back, n).unwrap();
        let via_s = rel(mgb.data(), &(maps.l.adjoint() * &mb_c * &maps.l));
        let rs = gamma_to_beta(&gamma_back).unwrap().relative_difference(&beta, 2 * n);
        let sr = gamma_back.relative_difference(&gamma, 2 * n);
        worst = worst.max(via_r).max(via_s).max(rs).max(sr);
        let same_rank = numerical_rank(mb.data(), 1e-9) == numerical_rank(mg.data(), 1e-9);
        let same_psd = psd_report(mb.data(), 1e-10).is_psd == psd_report(mg.data(), 1e-10).is_psd;
        if !same_rank || !same_psd {
            mismatches += 1;
        }
    }
    verdict(
        worst <= 1e-12 && mismatches == 0,
        format!("50 instances, worst identity/round-trip residual {worst:.2e}, {mismatches} rank/PSD mismatches"),
    )
}

/// A constraint and a way to push a point onto its zero set.
struct Region {
    poly: Polynomial<f64>,
    to_boundary: fn(&mut Vec<f64>),
}

fn regions(num_vars: usize) -> Vec<Region> {
    let mut slab = Polynomial::constant(num_vars, 1.0);
    let mut e = vec![0; num_vars];
    e[0] = 2;
    slab.add_term(MultiIndex::new(e.clone()), -1.0);
    let mut half = Polynomial::constant(num_vars, 0.5);
    e[0] = 1;
    half.add_term(MultiIndex::new(e), 1.0);
    let mut quartic = Polynomial::constant(num_vars, 1.0);
    for l in 0..num_vars {
        let mut e = vec![0; num_vars];
        e[l] = 4;
        quartic.add_term(MultiIndex::new(e), -1.0);
    }
    vec![
        Region {
            poly: unit_ball(num_vars),
            to_boundary: |p| {
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                p.iter_mut().for_each(|x| *x /= r);
            },
        },
        Region {
            poly: slab,
            to_boundary: |p| p[0] = p[0].signum(),
        },
        Region {
            poly: half,
            to_boundary: |p| p[0] = -0.5,
        },
        Region {
            poly: quartic,
            to_boundary: |p| {
                let r = p.iter().map(|x| x.powi(4)).sum::<f64>().powf(0.25);
                p.iter_mut().for_each(|x| *x /= r);
            },
        },
    ]
}

struct Instance {
    seq: MomentSequence<f64>,
    n: u32,
    poly: Polynomial<f64>,
    label: String,
}

fn constrained_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::with_capacity(100);
    for case in 0..100 {
        let num_vars = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=2u32);
        let mut regs = regions(num_vars);
        let region = regs.swap_remove(case % 4);
        let cap = binomial(num_vars as u64 + n as u64, num_vars as u64) as usize;
        let r = rng.gen_range(1..=cap);
        // one variable leaves a single boundary point for the half-line
        let on_boundary = rng.gen_range(0..=r.min(if num_vars == 1 { 1 } else { 2 }));
        let poly = region.poly;
        let atoms = loop {
            let mut atoms = random_atoms(&mut rng, num_vars, r, 1e-2, |p| poly.eval(p) >= 0.0);
            for a in atoms.iter_mut().take(on_boundary) {
                (region.to_boundary)(a);
            }
            let sep_ok = (0..r).all(|i| (i + 1..r).all(|j| moment_atlas::measure::distance(&atoms[i], &atoms[j]) >= 1e-2));
            if sep_ok {
                break atoms;
            }
        };
        let mu = AtomicMeasure::new(atoms, random_weights(&mut rng, r)).unwrap();
        let extra = 2 * poly.half_degree() + 2;
        out.push(Instance {
            seq: from_measure(&mu, 2 * n + extra).unwrap(),
            n,
            poly,
            label: format!("case {case} (N={num_vars}, n={n}, r={r})"),
        });
    }
    out
}

fn block_identity(instances: &[Instance]) -> Verdict {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for inst in instances {
        let n = inst.n;
        let base = build_moment_matrix(&inst.seq.truncated(2 * n), n).unwrap();
        let res = flat_extend_from_b(&base, &fragment(&inst.seq, 2 * n + 1), &tol)
            .and_then(|cand| localizing_flat_check(&cand, &inst.poly, &tol));
        match res {
            Ok(r) => {
                worst = worst.max(r.block_identity_residual);
                if r.rank_base != r.rank_ext || r.block_identity_residual > 1e-9 {
                    problems.push(format!("{}: ranks {} vs {}", inst.label, r.rank_base, r.rank_ext));
                }
            }
            Err(e) => problems.push(format!("{}: {e}", inst.label)),
        }
    }
    let mut detail = format!("{} instances, worst residual {worst:.2e}", instances.len());
    if !problems.is_empty() {
        detail.push_str(&format!(", {} failed: {}", problems.len(), problems.join("; ")));
    }
    verdict(problems.is_empty(), detail)
}

fn variety_preservation(instances: &[Instance]) -> Verdict {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let n = inst.n;
        let base = build_moment_matrix(&inst.seq.truncated(2 * n), n).unwrap();
        let res = flat_extend_from_b(&base, &fragment(&inst.seq, 2 * n + 1), &tol).and_then(|cand| {
            let next = successive_flat_extensions(&cand, 1, &tol)?;
            let a = variety_points(&cand.extension, &tol, k as u64)?;
            let b = variety_points(&next.matrices[0], &tol, k as u64)?;
            Ok((a.points, b.points))
        });
        match res {
            Ok((a, b)) if a.len() == b.len() => {
                let h = hausdorff(&a, &b);
                worst = worst.max(h);
                if h > 1e-8 {
                    problems.push(format!("{}: Hausdorff {h:.2e}", inst.label));
                }
            }
            Ok((a, b)) => problems.push(format!("{}: {} vs {} points", inst.label, a.len(), b.len())),
            Err(e) => problems.push(format!("{}: {e}", inst.label)),
        }
    }
    let mut detail = format!("{} instances, worst Hausdorff {worst:.2e}", instances.len());
    if !problems.is_empty() {
        detail.push_str(&format!(", {} failed: {}", problems.len(), problems.join("; ")));
    }
    verdict(problems.is_empty(), detail)
}

fn exact_binomial(n: u64, k: u64) -> u128 {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k as u128 {
        num *= n as u128 - i;
        den *= i + 1;
    }
    num / den
}

fn bound_formula() -> Verdict {
    let mut bad = Vec::new();
    for n in 1..=10u32 {
        let want = 4 * (n as u64).pow(2) + 5 * n as u64 + 2;
        if extension_bound(2, n).ok() != Some(want) {
            bad.push(format!("N=2 n={n}"));
        }
    }
    for num_vars in 1..=5usize {
        for n in 1..=5u32 {
            let want = 2 * exact_binomial(2 * n as u64 + num_vars as u64, num_vars as u64) - n as u128;
            if extension_bound(num_vars, n).ok().map(u128::from) != Some(want) {
                bad.push(format!("N={num_vars} n={n}"));
            }
        }
    }
    verdict(bad.is_empty(), format!("35 values checked, mismatches: {:?}", bad))
}

fn scan_reproduction() -> Verdict {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/ball");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("feasible.json");
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_moment-atlas"))
        .args(["scan", &format!("{data}/moments.json"), &format!("{data}/scan.json"), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    let elapsed = start.elapsed();
    if !status.success() {
        return verdict(false, format!("scan exited with {status}"));
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let intervals = doc["intervals"].as_array().cloned().unwrap_or_default();
    let (lo, hi) = feasible_interval();
    let found = intervals
        .first()
        .map(|iv| (iv["lo"].as_f64().unwrap(), iv["hi"].as_f64().unwrap()));
    let ok = intervals.len() == 1
        && found.is_some_and(|(a, b)| (a - lo).abs() <= 1e-4 && (b - hi).abs() <= 1e-4)
        && elapsed < Duration::from_secs(10);
    verdict(
        ok,
        format!("feasible interval {found:?} vs [{lo:.6}, {hi:.6}], {elapsed:.2?}"),
    )
}

fn main() {
    let instances = constrained_instances();
    let checks: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("ball cubature golden", Box::new(ball_golden)),
        ("localizing compression matches direct", Box::new(localizing_equivalence)),
        ("atomic measure round trip", Box::new(round_trip_recovery)),
        ("real/complex bridge identities", Box::new(bridge_identities)),
        ("localizing block identity", Box::new(|| block_identity(&instances))),
        ("variety preserved by flat extension", Box::new(|| variety_preservation(&instances))),
        ("extension bound formula", Box::new(bound_formula)),
        ("ball scan interval", Box::new(scan_reproduction)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let v = check();
        let tag = if v.ok { "PASS" } else { "FAIL" };
        println!("acceptance {}: {tag} {name}: {}", k + 1, v.detail);
        if !v.ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
