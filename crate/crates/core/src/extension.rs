//! Flat extensions: the block criterion `B = M W`, `C = W* M W`, verification
//! of rank-preserving extensions, and the unique successive extensions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{MomentError, Result};
use crate::linalg::{self, Scalar, Tolerances};
use crate::localizing::{localize_direct, localizing_scale};
use crate::moments::{build_moment_matrix, psd_check, rank, MomentMatrix, MomentSequence};
use crate::monomials::{basis, binomial, MultiIndex};
use crate::polynomial::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct FlatExtensionCandidate<T: Scalar> {
    /// `M(n)`.
    pub base: MomentMatrix<T>,
    /// New-moment block of `M(n+1)`: rows of degree `<= n`, columns of degree `n+1`.
    pub b_block: DMatrix<T>,
    /// Minimum-norm solution of `M(n) W = B`.
    pub w: DMatrix<T>,
    /// `W* M(n) W`.
    pub c_block: DMatrix<T>,
    /// The assembled `M(n+1)`.
    pub extension: MomentMatrix<T>,
    /// Moments through degree `2n+2`.
    pub moments: MomentSequence<T>,
    pub rank: usize,
    /// `‖B − M W‖_F / ‖B‖_F`.
    pub range_residual: f64,
    /// Largest spread among `C` entries that must be the same moment,
    /// relative to `1 + max |C|`.
    pub structure_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatReport {
    pub is_extension: bool,
    pub is_flat: bool,
    pub rank_base: usize,
    pub rank_ext: usize,
    pub min_eigenvalue: f64,
}

/// Compares `M(n)` with the leading block of `M(n+1)` and their ranks.
pub fn verify_flat_extension<T: Scalar>(
    base: &MomentMatrix<T>,
    ext: &MomentMatrix<T>,
    tol: &Tolerances,
) -> Result<FlatReport> {
    if ext.n() != base.n() + 1 || ext.num_vars() != base.num_vars() {
        return Err(MomentError::DimensionMismatch(format!(
            "M({}) in {} variables cannot extend M({}) in {} variables",
            ext.n(),
            ext.num_vars(),
            base.n(),
            base.num_vars()
        )));
    }
    let k = base.size();
    let lead = ext.data().view((0, 0), (k, k));
    let scale = linalg::max_abs(base.data()).max(1.0);
    let is_extension = (lead - base.data()).iter().all(|d| d.abs_val() <= 1e-12 * scale);
    let rank_base = rank(base, tol.rank);
    let rank_ext = rank(ext, tol.rank);
    let psd = psd_check(ext, tol.psd);
    Ok(FlatReport {
        is_extension,
        is_flat: is_extension && rank_base == rank_ext && psd.is_psd,
        rank_base,
        rank_ext,
        min_eigenvalue: psd.min_eigenvalue,
    })
}

/// Builds `M(n+1)` from `M(n)` and user-supplied moments of degree `2n+1`,
/// reading the degree-`2n+2` moments off `C = W* M W`.
pub fn flat_extend_from_b<T: Scalar>(
    base: &MomentMatrix<T>,
    fragment: &MomentSequence<T>,
    tol: &Tolerances,
) -> Result<FlatExtensionCandidate<T>> {
    let n = base.n();
    if fragment.num_vars() != base.num_vars() {
        return Err(MomentError::DimensionMismatch(format!(
            "fragment in {} variables, base in {}",
            fragment.num_vars(),
            base.num_vars()
        )));
    }
    if let Some((m, _)) = fragment.entries().find(|(m, _)| m.degree() != 2 * n + 1) {
        return Err(MomentError::invalid(format!(
            "fragment moment {m} has degree {}, expected {}",
            m.degree(),
            2 * n + 1
        )));
    }
    let psd = psd_check(base, tol.psd);
    if !psd.is_psd {
        return Err(MomentError::NotPsd {
            min_eigenvalue: psd.min_eigenvalue,
        });
    }
    let mut seq = base.sequence()?.merged(fragment)?;
    seq.set_degree(2 * n + 1);
    seq.check_hermitian(1e-12)?;

    let full = basis(base.num_vars(), n + 1, T::KIND)?;
    let k = base.size();
    let new_cols: Vec<&MultiIndex> = full.indices()[k..].iter().collect();
    let rows: Vec<MultiIndex> = base.basis().indices().iter().map(|g| g.conj(T::KIND)).collect();
    let mut keys: Vec<MultiIndex> = rows
        .iter()
        .flat_map(|g| new_cols.iter().map(move |f| g + f))
        .collect();
    keys.sort();
    keys.dedup();
    seq.lookup(&keys)?;
    let b_block = DMatrix::from_fn(k, new_cols.len(), |r, c| {
        seq.get(&(&rows[r] + new_cols[c])).expect("looked up")
    });

    let m = base.data();
    let w = linalg::lstsq(m, &b_block, tol.rank);
    let b_norm = b_block.norm();
    let residual = (&b_block - m * &w).norm();
    let range_residual = if b_norm > 0.0 { residual / b_norm } else { residual };
    if residual > tol.residual * b_norm.max(f64::MIN_POSITIVE) && residual > 0.0 {
        return Err(MomentError::RangeFailure {
            residual: range_residual,
            threshold: tol.residual,
        });
    }
    let c_block = w.adjoint() * m * &w;

    // every entry of C is a moment of degree 2n+2 keyed by conj(row) + col
    let mut groups: BTreeMap<MultiIndex, Vec<T>> = BTreeMap::new();
    for r in 0..new_cols.len() {
        let g = new_cols[r].conj(T::KIND);
        for c in 0..new_cols.len() {
            groups.entry(&g + new_cols[c]).or_default().push(c_block[(r, c)]);
        }
    }
    let c_scale = 1.0 + linalg::max_abs(&c_block);
    let mut means: BTreeMap<MultiIndex, T> = BTreeMap::new();
    let mut worst: Option<(MultiIndex, f64)> = None;
    for (key, vals) in &groups {
        let mean = vals.iter().fold(T::zero(), |a, &v| a + v) * T::from_real(1.0 / vals.len() as f64);
        let dev = vals.iter().fold(0.0f64, |a, &v| a.max((v - mean).abs_val())) / c_scale;
        if worst.as_ref().is_none_or(|(_, d)| dev > *d) {
            worst = Some((key.clone(), dev));
        }
        means.insert(key.clone(), mean);
    }
    let (worst_key, structure_deviation) = worst.unwrap_or((MultiIndex::zeros(0), 0.0));
    if structure_deviation > tol.residual {
        return Err(MomentError::StructureFailure {
            index: worst_key,
            deviation: structure_deviation,
            threshold: tol.residual,
        });
    }
    let mut moments = seq;
    moments.set_degree(2 * n + 2);
    for (key, v) in hermitian_fill(&means) {
        moments.insert(key, v)?;
    }

    let extension = build_moment_matrix(&moments, n + 1)?;
    let rank_base = rank(base, tol.rank);
    let rank_ext = rank(&extension, tol.rank);
    if rank_base != rank_ext {
        return Err(MomentError::NotFlat { rank_base, rank_ext });
    }
    Ok(FlatExtensionCandidate {
        base: base.clone(),
        b_block,
        w,
        c_block,
        extension,
        moments,
        rank: rank_base,
        range_residual,
        structure_deviation,
    })
}

/// Forces `v(conj m) = conj(v(m))` and real self-conjugate values (a no-op
/// for real data).
fn hermitian_fill<T: Scalar>(values: &BTreeMap<MultiIndex, T>) -> Vec<(MultiIndex, T)> {
    let mut out = Vec::with_capacity(values.len());
    for (m, &v) in values {
        let c = m.conj(T::KIND);
        if c == *m {
            out.push((m.clone(), T::from_real(v.re())));
        } else if *m < c {
            out.push((m.clone(), v));
            out.push((c, v.conjugate()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessiveExtensions<T: Scalar> {
    /// `M(n+2), ..., M(n+1+steps)`.
    pub matrices: Vec<MomentMatrix<T>>,
    /// Moments through degree `2(n+1+steps)`.
    pub moments: MomentSequence<T>,
    /// Largest disagreement between two admissible choices of the recursion
    /// letter, relative to `1 + |value|`.
    pub max_discrepancy: f64,
}

/// The unique rank-preserving extensions of a flat `M(n+1)`, one degree at a time.
pub fn successive_flat_extensions<T: Scalar>(
    cand: &FlatExtensionCandidate<T>,
    steps: usize,
    tol: &Tolerances,
) -> Result<SuccessiveExtensions<T>> {
    let mut current = cand.extension.clone();
    let mut moments = cand.moments.clone();
    let mut matrices = Vec::with_capacity(steps);
    let mut max_discrepancy = 0.0f64;
    for step in 1..=steps {
        let (next_moments, disc) = extend_once(&current, &moments, cand.rank, tol)?;
        max_discrepancy = max_discrepancy.max(disc);
        let next = build_moment_matrix(&next_moments, current.n() + 1)?;
        let found = rank(&next, tol.rank);
        if found != cand.rank {
            return Err(MomentError::RankDrift {
                step,
                expected: cand.rank,
                found,
            });
        }
        let psd = psd_check(&next, tol.psd);
        if !psd.is_psd {
            return Err(MomentError::NotPsd {
                min_eigenvalue: psd.min_eigenvalue,
            });
        }
        matrices.push(next.clone());
        current = next;
        moments = next_moments;
    }
    Ok(SuccessiveExtensions {
        matrices,
        moments,
        max_discrepancy,
    })
}

/// Column relations of a flat `M(m)`: the independent columns `B` (all of
/// degree `< m`) and, for every basis monomial, its coefficients on `B`.
pub fn column_relations<T: Scalar>(
    mat: &MomentMatrix<T>,
    expected_rank: usize,
    tol: &Tolerances,
) -> Result<(Vec<usize>, DMatrix<T>)> {
    let cols = linalg::independent_columns(mat.data(), tol.rank);
    if cols.len() != expected_rank {
        return Err(MomentError::Ambiguous(format!(
            "greedy column selection found {} independent columns, rank is {expected_rank}",
            cols.len()
        )));
    }
    let b = linalg::select_columns(mat.data(), &cols);
    let coef = linalg::lstsq(&b, mat.data(), tol.rank);
    Ok((cols, coef))
}

fn extend_once<T: Scalar>(
    mat: &MomentMatrix<T>,
    moments: &MomentSequence<T>,
    expected_rank: usize,
    tol: &Tolerances,
) -> Result<(MomentSequence<T>, f64)> {
    let big_m = mat.n();
    let (cols, coef) = column_relations(mat, expected_rank, tol)?;
    let b = mat.basis();
    if let Some(&c) = cols.iter().find(|&&c| b.index(c).degree() >= big_m) {
        return Err(MomentError::NotFlat {
            rank_base: expected_rank,
            rank_ext: c + 1,
        });
    }
    let letters = b.letters();
    let units: Vec<MultiIndex> = (0..letters)
        .map(|l| {
            let mut e = vec![0; letters];
            e[l] = 1;
            MultiIndex::new(e)
        })
        .collect();
    let target = basis(mat.num_vars(), 2 * big_m + 2, T::KIND)?;
    let mut out = moments.clone();
    out.set_degree(2 * big_m + 2);
    let mut disc = 0.0f64;

    for degree in [2 * big_m + 1, 2 * big_m + 2] {
        let mut fresh: BTreeMap<MultiIndex, T> = BTreeMap::new();
        for m in target.indices().iter().filter(|m| m.degree() == degree) {
            if m.conj(T::KIND) < *m {
                continue;
            }
            let (i, e) = m.greedy_prefix(big_m + 1);
            let eval = |l: usize| -> Result<T> {
                let lower = i.checked_sub(&units[l]).expect("letter present");
                let pos = b.position(&lower).expect("degree M monomial");
                let mut v = T::zero();
                for (slot, &c) in cols.iter().enumerate() {
                    let a = coef[(slot, pos)];
                    if a == T::zero() {
                        continue;
                    }
                    let key = &(&e + b.index(c)) + &units[l];
                    let val = out.get(&key).ok_or_else(|| MomentError::MissingMoments(vec![key.clone()]))?;
                    v += a * val;
                }
                Ok(v)
            };
            let present: Vec<usize> = (0..letters).filter(|&l| i.exponents()[l] > 0).collect();
            let v = eval(present[0])?;
            if present.len() > 1 {
                let alt = eval(*present.last().expect("nonempty"))?;
                disc = disc.max((v - alt).abs_val() / (1.0 + v.abs_val()));
            }
            fresh.insert(m.clone(), v);
        }
        for (key, v) in hermitian_fill(&fresh) {
            out.insert(key, v)?;
        }
    }
    Ok((out, disc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizingFlatReport {
    pub base_loc_psd: bool,
    pub min_eigenvalue: f64,
    /// `‖M_p(n+k+1) − [A, AW; W*A, W*AW]‖_F / max(1, ‖M_p(n+k+1)‖_F)` with `A = M_p(n+k)`.
    pub block_identity_residual: f64,
    /// Ranks are measured against [`localizing_scale`], so a localizing
    /// matrix that vanishes up to roundoff has rank zero.
    pub rank_base: usize,
    pub rank_ext: usize,
}

/// Checks that `M_p(n+k+1)` is the flat extension of `M_p(n+k)` given by the
/// same `W` as the moment extension.
pub fn localizing_flat_check<T: Scalar>(
    cand: &FlatExtensionCandidate<T>,
    p: &Polynomial<T>,
    tol: &Tolerances,
) -> Result<LocalizingFlatReport> {
    let k = p.half_degree() as usize;
    let moments = if k == 0 {
        cand.moments.clone()
    } else {
        successive_flat_extensions(cand, k, tol)?.moments
    };
    localizing_flat_check_with(cand, &moments, p, tol)
}

/// As [`localizing_flat_check`] with moments already extended to degree
/// at least `2(n + k + 1)`.
pub fn localizing_flat_check_with<T: Scalar>(
    cand: &FlatExtensionCandidate<T>,
    moments: &MomentSequence<T>,
    p: &Polynomial<T>,
    tol: &Tolerances,
) -> Result<LocalizingFlatReport> {
    let n = cand.base.n();
    let k = p.half_degree();
    if moments.degree() < 2 * (n + k + 1) {
        return Err(MomentError::invalid(format!(
            "localizing check needs moments of degree {}, have {}",
            2 * (n + k + 1),
            moments.degree()
        )));
    }
    let a = localize_direct(moments, p, n + k)?.data;
    let full = localize_direct(moments, p, n + k + 1)?.data;
    let w = &cand.w;
    let aw = &a * w;
    let (s, t) = (a.nrows(), w.ncols());
    let mut assembled = DMatrix::zeros(s + t, s + t);
    assembled.view_mut((0, 0), (s, s)).copy_from(&a);
    assembled.view_mut((0, s), (s, t)).copy_from(&aw);
    assembled.view_mut((s, 0), (t, s)).copy_from(&aw.adjoint());
    assembled.view_mut((s, s), (t, t)).copy_from(&(w.adjoint() * &aw));
    let psd = linalg::psd_report(&a, tol.psd);
    let scale = localizing_scale(moments, p, n + k + 1)?;
    Ok(LocalizingFlatReport {
        base_loc_psd: psd.is_psd,
        min_eigenvalue: psd.min_eigenvalue,
        block_identity_residual: (&full - &assembled).norm() / full.norm().max(1.0),
        rank_base: linalg::numerical_rank_scaled(&a, tol.rank, scale),
        rank_ext: linalg::numerical_rank_scaled(&full, tol.rank, scale),
    })
}

/// Upper bound `2 C(2n+N, N) − n` on the number of extension steps needed
/// before flatness must appear.
pub fn extension_bound(num_vars: usize, n: u32) -> Result<u64> {
    if num_vars == 0 || n == 0 {
        return Err(MomentError::invalid("extension bound needs N >= 1 and n >= 1"));
    }
    Ok(2 * binomial(2 * n as u64 + num_vars as u64, num_vars as u64) - n as u64)
}
