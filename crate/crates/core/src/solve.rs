//! Variety polynomials, support points, densities and the end-to-end
//! minimal-measure pipeline.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{MomentError, Result};
use crate::extension::{
    column_relations, flat_extend_from_b, localizing_flat_check_with, successive_flat_extensions,
    FlatExtensionCandidate,
};
use crate::io::points_json;
use crate::linalg::{self, Scalar, Tolerances};
use crate::localizing::localize_direct;
use crate::measure::{distance, AtomicMeasure};
use crate::moments::{build_moment_matrix, from_measure, psd_check, rank, MomentMatrix, MomentSequence};
use crate::monomials::{monomial_label, MultiIndex};
use crate::polynomial::Polynomial;

const MAX_ATTEMPTS: usize = 5;
const EIGEN_GAP: f64 = 1e-6;
const COMMUTATOR_TOL: f64 = 1e-6;
const DENSITY_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct VarietyReport<T: Scalar> {
    /// The maximal independent set `B` of columns, first in basis order.
    pub basis_columns: Vec<MultiIndex>,
    pub labels: Vec<String>,
    /// `r_j = t^j − q_j` for each column `j` outside `B`.
    pub relation_polys: Vec<Polynomial<T>>,
    /// Largest `‖T^j − q_j(T)‖` over the relations, relative to `max(1, ‖M‖)`.
    pub relation_residual: f64,
    /// Condition number of the `B` columns.
    pub condition: f64,
    pub points: Vec<Vec<T>>,
    /// Per point: `max_j |r_j(v)| / (1 + Σ |terms of r_j at v|)`.
    pub residuals: Vec<f64>,
}

/// Column relations of `m` as polynomials vanishing on the variety.
pub fn variety_polynomials<T: Scalar>(m: &MomentMatrix<T>, tol: &Tolerances) -> Result<VarietyReport<T>> {
    let r = rank(m, tol.rank);
    let b = m.basis();
    let (cols, coef) = column_relations(m, r, tol)?;
    let bcols = linalg::select_columns(m.data(), &cols);
    let scale = linalg::spectral_norm(m.data()).max(1.0);
    let mut relation_polys = Vec::new();
    let mut relation_residual = 0.0f64;
    for j in (0..b.len()).filter(|j| !cols.contains(j)) {
        let q = coef.column(j);
        let res = (m.data().column(j) - &bcols * q).norm() / scale;
        relation_residual = relation_residual.max(res);
        let mut p = Polynomial::monomial(m.num_vars(), b.index(j).clone(), T::one());
        for (slot, &c) in cols.iter().enumerate() {
            p.add_term(b.index(c).clone(), -q[slot]);
        }
        relation_polys.push(p);
    }
    Ok(VarietyReport {
        basis_columns: cols.iter().map(|&c| b.index(c).clone()).collect(),
        labels: cols.iter().map(|&c| b.label(c)).collect(),
        relation_polys,
        relation_residual,
        condition: if cols.is_empty() { 1.0 } else { linalg::condition_number(&bcols) },
        points: Vec::new(),
        residuals: Vec::new(),
    })
}

/// Support of the unique representing measure of a flat `M(n+1)`.
///
/// On the span of `B` the Gram matrix `G = M[B, B]` and the shifted blocks
/// `H_ℓ[a, b] = Λ(t_ℓ b ā)` define commuting normal operators
/// `A_ℓ = L⁻¹ H_ℓ L⁻*` (`G = L L*`) whose joint eigenvalues are the atoms.
pub fn variety_points<T: Scalar>(
    flat: &MomentMatrix<T>,
    tol: &Tolerances,
    seed: u64,
) -> Result<VarietyReport<T>> {
    let mut report = variety_polynomials(flat, tol)?;
    let r = report.basis_columns.len();
    if r == 0 {
        return Err(MomentError::NotRepresenting("moment matrix is zero".into()));
    }
    if flat.n() == 0 || report.basis_columns.iter().any(|c| c.degree() >= flat.n()) {
        let rank_base = match flat.n() {
            0 => 0,
            n => rank(&flat.leading(n - 1)?, tol.rank),
        };
        return Err(MomentError::NotFlat { rank_base, rank_ext: r });
    }
    let letters = flat.basis().letters();
    let d = flat.num_vars();
    let bc = &report.basis_columns;
    let conj_b: Vec<MultiIndex> = bc.iter().map(|x| x.conj(T::KIND)).collect();
    let entry = |key: MultiIndex| -> Result<T> {
        flat.moment(&key).ok_or_else(|| MomentError::MissingMoments(vec![key]))
    };
    let mut g = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            g[(a, b)] = entry(&conj_b[a] + &bc[b])?;
        }
    }
    let chol = nalgebra::Cholesky::new(linalg::hermitian_part(&g)).ok_or_else(|| MomentError::IllConditioned {
        condition: linalg::condition_number(&g),
        context: "Gram matrix of the basis columns is not positive definite".into(),
    })?;
    let l = chol.l();
    let mut ops: Vec<DMatrix<T>> = Vec::with_capacity(d);
    for ell in 0..d {
        let mut unit = vec![0; letters];
        unit[ell] = 1;
        let unit = MultiIndex::new(unit);
        let mut h = DMatrix::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                h[(a, b)] = entry(&(&conj_b[a] + &bc[b]) + &unit)?;
            }
        }
        let y = l.solve_lower_triangular(&h).expect("Cholesky factor is invertible");
        let a_op = l
            .solve_lower_triangular(&y.adjoint())
            .expect("Cholesky factor is invertible")
            .adjoint();
        ops.push(a_op);
    }
    // Hermitian generators: real and imaginary parts of each A_ℓ
    let mut herm: Vec<DMatrix<T>> = Vec::new();
    for a in &ops {
        herm.push(linalg::hermitian_part(a));
        if let Some(i) = imaginary_unit::<T>() {
            herm.push((a - a.adjoint()) * (T::one() / (i + i)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eig = None;
    let mut last_gap = 0.0;
    for _ in 0..MAX_ATTEMPTS {
        let coeffs: Vec<f64> = (0..herm.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut k = DMatrix::zeros(r, r);
        for (h, &c) in herm.iter().zip(&coeffs) {
            k += h * T::from_real(c);
        }
        let e = SymmetricEigen::new(linalg::hermitian_part(&k));
        let mut vals: Vec<f64> = e.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let spread = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let gap = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        last_gap = gap;
        if gap >= EIGEN_GAP * spread {
            eig = Some(e);
            break;
        }
    }
    let eig = eig.ok_or_else(|| {
        MomentError::Ambiguous(format!(
            "joint eigenvalues not separated after {MAX_ATTEMPTS} random combinations (smallest gap {last_gap:.3e})"
        ))
    })?;
    let u = eig.eigenvectors;
    let mut points = vec![vec![T::zero(); d]; r];
    for (ell, a) in ops.iter().enumerate() {
        let diag = u.adjoint() * a * &u;
        let scale = linalg::spectral_norm(a).max(1.0);
        for i in 0..r {
            for j in 0..r {
                if i != j && diag[(i, j)].abs_val() > COMMUTATOR_TOL * scale {
                    return Err(MomentError::Ambiguous(format!(
                        "multiplication operators do not commute (off-diagonal {:.3e})",
                        diag[(i, j)].abs_val()
                    )));
                }
            }
            points[i][ell] = diag[(i, i)];
        }
    }
    if T::KIND == crate::Kind::Real {
        for p in &mut points {
            for x in p.iter_mut() {
                *x = T::from_real(x.re());
            }
        }
    }
    let grads: Vec<Vec<Polynomial<T>>> = report
        .relation_polys
        .iter()
        .map(|p| (0..letters).map(|l| p.derivative(l)).collect())
        .collect();
    let polished: Vec<Vec<T>> = points
        .iter()
        .map(|p| polish(p, &report.relation_polys, &grads, tol))
        .collect();
    // The top degree of a flat extension is generated by the relations
    // themselves, so it cannot arbitrate between the two point sets.
    let target = flat.sequence()?.truncated(2 * flat.n() - 1);
    if fit_residual(&target, &polished) < fit_residual(&target, &points) {
        points = polished;
    }
    points.sort_by(|a, b| compare_points(a, b, tol.merge));
    for i in 0..r {
        for j in i + 1..r {
            let dist = distance(&points[i], &points[j]);
            if dist < tol.merge {
                return Err(MomentError::Ambiguous(format!(
                    "extracted atoms {i} and {j} coincide (distance {dist:.3e})"
                )));
            }
        }
    }
    let residuals: Vec<f64> = points
        .iter()
        .map(|v| {
            report
                .relation_polys
                .iter()
                .map(|p| p.eval(v).abs_val() / (1.0 + p.eval_abs(v)))
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > tol.boundary {
        return Err(MomentError::Ambiguous(format!(
            "relation polynomials do not vanish at the extracted points (residual {worst:.3e})"
        )));
    }
    report.points = points;
    report.residuals = residuals;
    Ok(report)
}

fn stacked_residual<T: Scalar>(v: &[T], relations: &[Polynomial<T>]) -> DVector<f64> {
    let vals: Vec<T> = relations.iter().map(|p| p.eval(v)).collect();
    match T::KIND {
        crate::Kind::Real => DVector::from_iterator(vals.len(), vals.iter().map(|x| x.re())),
        crate::Kind::Complex => DVector::from_iterator(
            2 * vals.len(),
            vals.iter().map(|x| x.re()).chain(vals.iter().map(|x| x.im())),
        ),
    }
}

/// Gauss–Newton on the relation polynomials. The eigenvalue route loses a
/// factor of `cond(G)`, but the relation coefficients can be just as
/// inaccurate when atoms crowd together, so the caller keeps whichever point
/// set fits the moments better. Steps that do not reduce the residual are
/// discarded.
fn polish<T: Scalar>(
    start: &[T],
    relations: &[Polynomial<T>],
    grads: &[Vec<Polynomial<T>>],
    tol: &Tolerances,
) -> Vec<T> {
    const STEPS: usize = 4;
    if relations.is_empty() {
        return start.to_vec();
    }
    let d = start.len();
    let complex = T::KIND == crate::Kind::Complex;
    let mut v = start.to_vec();
    let mut f = stacked_residual(&v, relations);
    for _ in 0..STEPS {
        let m = relations.len();
        let params = if complex { 2 * d } else { d };
        let mut jac = DMatrix::<f64>::zeros(f.len(), params);
        for (j, g) in grads.iter().enumerate() {
            for ell in 0..d {
                if complex {
                    let dz = g[ell].eval(&v);
                    let dzb = g[d + ell].eval(&v);
                    let dx = dz + dzb;
                    let dy = (dz - dzb) * T::from_parts(0.0, 1.0);
                    jac[(j, ell)] = dx.re();
                    jac[(m + j, ell)] = dx.im();
                    jac[(j, d + ell)] = dy.re();
                    jac[(m + j, d + ell)] = dy.im();
                } else {
                    jac[(j, ell)] = g[ell].eval(&v).re();
                }
            }
        }
        let rhs = DMatrix::from_column_slice(f.len(), 1, (-&f).as_slice());
        let step = linalg::lstsq(&jac, &rhs, 1e-12);
        if step.norm() > tol.merge.sqrt() {
            break;
        }
        let trial: Vec<T> = (0..d)
            .map(|ell| match complex {
                true => v[ell] + T::from_parts(step[ell], step[d + ell]),
                false => v[ell] + T::from_real(step[ell]),
            })
            .collect();
        let g = stacked_residual(&trial, relations);
        if g.norm() >= f.norm() {
            break;
        }
        v = trial;
        f = g;
    }
    v
}

/// Relative residual of the best least-squares weights for `points` against
/// every moment of `seq`.
fn fit_residual<T: Scalar>(seq: &MomentSequence<T>, points: &[Vec<T>]) -> f64 {
    let letters: Vec<Vec<T>> = points.iter().map(|p| T::letters(p)).collect();
    let rows: Vec<(&MultiIndex, &T)> = seq.entries().collect();
    let v = DMatrix::from_fn(rows.len(), points.len(), |i, j| rows[i].0.monomial_value(&letters[j]));
    let rhs = DMatrix::from_fn(rows.len(), 1, |i, _| *rows[i].1);
    let rho = linalg::lstsq(&v, &rhs, 1e-15);
    (&v * rho - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
}

fn imaginary_unit<T: Scalar>() -> Option<T> {
    match T::KIND {
        crate::Kind::Real => None,
        crate::Kind::Complex => Some(T::from_parts(0.0, 1.0)),
    }
}

/// Lexicographic on `(re, im)` after snapping to a grid of width `quantum`,
/// so roundoff-level noise does not reorder atoms.
fn compare_points<T: Scalar>(a: &[T], b: &[T], quantum: f64) -> std::cmp::Ordering {
    let snap = |x: f64| (x / quantum).round();
    for (x, y) in a.iter().zip(b) {
        let o = snap(x.re())
            .total_cmp(&snap(y.re()))
            .then(snap(x.im()).total_cmp(&snap(y.im())));
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Solves `W_{B,V} ρ = (β_{i_1}, ..., β_{i_r})` for the densities.
pub fn densities<T: Scalar>(
    m_base: &MomentMatrix<T>,
    report: &VarietyReport<T>,
    tol: &Tolerances,
) -> Result<AtomicMeasure<T>> {
    let r = report.basis_columns.len();
    if report.points.len() != r {
        return Err(MomentError::DimensionMismatch(format!(
            "{} points for {} basis columns",
            report.points.len(),
            r
        )));
    }
    let letters: Vec<Vec<T>> = report.points.iter().map(|p| T::letters(p)).collect();
    let w = DMatrix::from_fn(r, r, |k, j| report.basis_columns[k].monomial_value(&letters[j]));
    let condition = linalg::condition_number(&w);
    if condition > DENSITY_CONDITION_LIMIT {
        return Err(MomentError::IllConditioned {
            condition,
            context: "evaluation matrix of the basis monomials at the points is not invertible".into(),
        });
    }
    let mut rhs = DVector::zeros(r);
    for (k, mono) in report.basis_columns.iter().enumerate() {
        rhs[k] = m_base
            .moment(mono)
            .ok_or_else(|| MomentError::MissingMoments(vec![mono.clone()]))?;
    }
    let rho = w
        .lu()
        .solve(&rhs)
        .ok_or_else(|| MomentError::IllConditioned {
            condition,
            context: "evaluation matrix is singular".into(),
        })?;
    let scale = rho.iter().fold(1.0f64, |a, x| a.max(x.abs_val()));
    let mut weights = Vec::with_capacity(r);
    for (j, x) in rho.iter().enumerate() {
        if x.im().abs() > tol.residual * scale || x.re() <= 0.0 {
            return Err(MomentError::NotRepresenting(format!(
                "density {j} is {x:?}, not positive"
            )));
        }
        weights.push(x.re());
    }
    let measure = AtomicMeasure::new(report.points.clone(), weights)?;
    let target = m_base.sequence()?;
    let got = from_measure(&measure, target.degree())?;
    let diff = target.relative_difference(&got, target.degree());
    if diff > tol.residual {
        return Err(MomentError::NotRepresenting(format!(
            "extracted measure misses the moments by {diff:.3e}"
        )));
    }
    Ok(measure)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck<T: Scalar> {
    pub values: Vec<f64>,
    pub num_on_boundary: usize,
    pub on_boundary: Vec<usize>,
    pub violating_atoms: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicReport<T: Scalar> {
    pub inside: bool,
    pub per_constraint: Vec<ConstraintCheck<T>>,
}

/// Evaluates every `q_i` at every atom. An atom is on `Z(q_i)` when
/// `|q_i| <= tol (1 + ‖atom‖^deg q_i)` and violates it when `q_i` is below
/// minus that threshold.
pub fn verify_in_semialgebraic<T: Scalar>(
    measure: &AtomicMeasure<T>,
    constraints: &[Polynomial<T>],
    tol_boundary: f64,
) -> SemialgebraicReport<T> {
    let mut per_constraint = Vec::with_capacity(constraints.len());
    for q in constraints {
        let mut check = ConstraintCheck {
            values: Vec::new(),
            num_on_boundary: 0,
            on_boundary: Vec::new(),
            violating_atoms: Vec::new(),
        };
        for (i, atom) in measure.atoms.iter().enumerate() {
            let v = q.eval(atom).re();
            let norm = atom.iter().map(|x| x.abs_val().powi(2)).sum::<f64>().sqrt();
            let thr = tol_boundary * (1.0 + norm.powi(q.degree() as i32));
            if v.abs() <= thr {
                check.num_on_boundary += 1;
                check.on_boundary.push(i);
            } else if v < 0.0 {
                check.violating_atoms.push(atom.clone());
            }
            check.values.push(v);
        }
        per_constraint.push(check);
    }
    SemialgebraicReport {
        inside: per_constraint.iter().all(|c| c.violating_atoms.is_empty()),
        per_constraint,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub ok: bool,
    pub ranks: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl StageRecord {
    fn new(name: &str) -> Self {
        StageRecord {
            name: name.to_string(),
            ok: true,
            ranks: BTreeMap::new(),
            min_eigenvalue: None,
            residuals: BTreeMap::new(),
            atoms: None,
            weights: None,
            message: None,
        }
    }
}

/// `rank M(n) − rank M_q(n+k)` against the atoms found on `Z(q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomCount {
    pub constraint: usize,
    pub rank_moment: usize,
    pub rank_localizing: usize,
    pub predicted_on_boundary: usize,
    pub found_on_boundary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Certificate {
    pub kind: String,
    pub num_vars: usize,
    pub n: u32,
    pub stages: Vec<StageRecord>,
    pub atom_counts: Vec<AtomCount>,
}

impl Certificate {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Scalar> {
    pub measure: AtomicMeasure<T>,
    pub certificate: Certificate,
    pub candidate: FlatExtensionCandidate<T>,
    pub variety: VarietyReport<T>,
}

/// A pipeline failure tagged with the stage it happened in.
#[derive(Debug, Clone)]
pub struct PipelineError {
    pub stage: String,
    pub source: MomentError,
    pub certificate: Certificate,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

struct Run {
    cert: Certificate,
}

impl Run {
    fn fail(mut self, mut rec: StageRecord, e: MomentError) -> PipelineError {
        rec.ok = false;
        rec.message = Some(e.to_string());
        let stage = rec.name.clone();
        self.cert.stages.push(rec);
        PipelineError {
            stage,
            source: e,
            certificate: self.cert,
        }
    }
}

macro_rules! stage_try {
    ($run:ident, $rec:ident, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Err($run.fail($rec, err)),
        }
    };
}

/// psd → flat_extend → successive_extend → localize → variety → densities →
/// verify_support. `seq` has degree `2n`; `fragment` holds the moments of
/// degree `2n+1`.
pub fn minimal_measure_pipeline<T: Scalar>(
    seq: &MomentSequence<T>,
    fragment: &MomentSequence<T>,
    constraints: &[Polynomial<T>],
    tol: &Tolerances,
    seed: u64,
) -> std::result::Result<PipelineOutput<T>, PipelineError> {
    let n = seq.degree() / 2;
    let mut run = Run {
        cert: Certificate {
            kind: T::KIND.to_string(),
            num_vars: seq.num_vars(),
            n,
            ..Certificate::default()
        },
    };

    let mut rec = StageRecord::new("psd");
    stage_try!(run, rec, tol.validate());
    if seq.degree() % 2 == 1 {
        let e = MomentError::invalid(format!("moment data of odd degree {}", seq.degree()));
        return Err(run.fail(rec, e));
    }
    if let Some(q) = constraints.iter().find(|q| q.num_vars() != seq.num_vars()) {
        let e = MomentError::DimensionMismatch(format!(
            "constraint in {} variables, moments in {}",
            q.num_vars(),
            seq.num_vars()
        ));
        return Err(run.fail(rec, e));
    }
    stage_try!(run, rec, seq.check_hermitian(1e-12));
    let base = stage_try!(run, rec, build_moment_matrix(seq, n));
    let psd = psd_check(&base, tol.psd);
    let r = rank(&base, tol.rank);
    rec.ranks.insert(format!("M({n})"), r);
    rec.min_eigenvalue = Some(psd.min_eigenvalue);
    if !psd.is_psd {
        let e = MomentError::NotPsd {
            min_eigenvalue: psd.min_eigenvalue,
        };
        return Err(run.fail(rec, e));
    }
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("flat_extend");
    let cand = stage_try!(run, rec, flat_extend_from_b(&base, fragment, tol));
    rec.ranks.insert(format!("M({})", n + 1), cand.rank);
    rec.residuals.insert("range".into(), cand.range_residual);
    rec.residuals.insert("structure".into(), cand.structure_deviation);
    rec.min_eigenvalue = Some(psd_check(&cand.extension, tol.psd).min_eigenvalue);
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("successive_extend");
    let steps = constraints.iter().map(|q| q.half_degree() as usize).max().unwrap_or(0);
    let ext = stage_try!(run, rec, successive_flat_extensions(&cand, steps, tol));
    for m in &ext.matrices {
        rec.ranks.insert(format!("M({})", m.n()), rank(m, tol.rank));
    }
    rec.residuals.insert("recursion_discrepancy".into(), ext.max_discrepancy);
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("localize");
    let mut loc_ranks = Vec::with_capacity(constraints.len());
    let mut floor = f64::INFINITY;
    for (i, q) in constraints.iter().enumerate() {
        let k = q.half_degree();
        let lm = stage_try!(run, rec, localize_direct(&ext.moments, q, n + k));
        let lpsd = linalg::psd_report(&lm.data, tol.psd);
        floor = floor.min(lpsd.min_eigenvalue);
        if !lpsd.is_psd {
            rec.min_eigenvalue = Some(floor);
            let e = MomentError::LocalizingNotPsd {
                constraint: i + 1,
                min_eigenvalue: lpsd.min_eigenvalue,
            };
            return Err(run.fail(rec, e));
        }
        let check = stage_try!(run, rec, localizing_flat_check_with(&cand, &ext.moments, q, tol));
        rec.residuals
            .insert(format!("block_identity_q{}", i + 1), check.block_identity_residual);
        rec.ranks.insert(format!("M_q{}({})", i + 1, n + k), check.rank_base);
        rec.ranks.insert(format!("M_q{}({})", i + 1, n + k + 1), check.rank_ext);
        loc_ranks.push(check.rank_base);
    }
    if floor.is_finite() {
        rec.min_eigenvalue = Some(floor);
    }
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("variety");
    let variety = stage_try!(run, rec, variety_points(&cand.extension, tol, seed));
    rec.ranks.insert("points".into(), variety.points.len());
    rec.residuals.insert("relation".into(), variety.relation_residual);
    rec.residuals.insert(
        "points".into(),
        variety.residuals.iter().copied().fold(0.0, f64::max),
    );
    rec.residuals.insert("basis_condition".into(), variety.condition);
    rec.atoms = Some(points_json(&variety.points));
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("densities");
    let measure = stage_try!(run, rec, densities(&base, &variety, tol));
    rec.weights = Some(measure.weights.clone());
    run.cert.stages.push(rec);

    let mut rec = StageRecord::new("verify_support");
    let through = 2 * n + 2;
    let reproduced = stage_try!(run, rec, from_measure(&measure, through));
    let diff = cand.moments.relative_difference(&reproduced, through);
    rec.residuals.insert("moments".into(), diff);
    if diff > tol.residual {
        let e = MomentError::NotRepresenting(format!(
            "extracted measure misses the degree {through} moments by {diff:.3e}"
        ));
        return Err(run.fail(rec, e));
    }
    let semi = verify_in_semialgebraic(&measure, constraints, tol.boundary);
    for (i, c) in semi.per_constraint.iter().enumerate() {
        let predicted = r.saturating_sub(loc_ranks[i]);
        run.cert.atom_counts.push(AtomCount {
            constraint: i + 1,
            rank_moment: r,
            rank_localizing: loc_ranks[i],
            predicted_on_boundary: predicted,
            found_on_boundary: c.num_on_boundary,
        });
        rec.ranks.insert(format!("on_boundary_q{}", i + 1), c.num_on_boundary);
    }
    rec.atoms = Some(points_json(&measure.atoms));
    rec.weights = Some(measure.weights.clone());
    if !semi.inside {
        let bad: Vec<String> = semi
            .per_constraint
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.violating_atoms.is_empty())
            .map(|(i, c)| format!("q{}: {} atoms", i + 1, c.violating_atoms.len()))
            .collect();
        return Err(run.fail(rec, MomentError::OutsideSet(bad.join(", "))));
    }
    if let Some(c) = run
        .cert
        .atom_counts
        .iter()
        .find(|c| c.predicted_on_boundary != c.found_on_boundary)
    {
        let e = MomentError::Ambiguous(format!(
            "constraint q{}: rank gap predicts {} atoms on the zero set, found {}",
            c.constraint, c.predicted_on_boundary, c.found_on_boundary
        ));
        return Err(run.fail(rec, e));
    }
    run.cert.stages.push(rec);

    Ok(PipelineOutput {
        measure,
        certificate: run.cert,
        candidate: cand,
        variety,
    })
}

/// Labels of a report's basis columns, e.g. `["1", "X", "Y", "Z"]`.
pub fn basis_labels<T: Scalar>(report: &VarietyReport<T>) -> Vec<String> {
    report
        .basis_columns
        .iter()
        .map(|m| monomial_label(m, T::KIND))
        .collect()
}
