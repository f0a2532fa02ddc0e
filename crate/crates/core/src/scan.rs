//! Grid search with bisection over a few free moments.
//!
//! A parameter point is feasible when the pipeline clears every stage
//! through `localize`: the base matrix is PSD, the odd moments give a flat
//! extension with moment structure, and each localizing matrix is PSD.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{ErrorClass, MomentError, Result};
use crate::io::{self, Eval, SCHEMA};
use crate::linalg::{Scalar, Tolerances};
use crate::moments::MomentSequence;
use crate::monomials::{Kind, MultiIndex};
use crate::polynomial::Polynomial;
use crate::solve::minimal_measure_pipeline;

pub const MAX_FREE: usize = 3;
const MAX_GRID: usize = 1_000_000;
const MAX_BISECTIONS: usize = 200;
const FEASIBLE_THROUGH: [&str; 4] = ["psd", "flat_extend", "successive_extend", "localize"];

#[derive(Debug, Clone, PartialEq)]
pub struct FreeMoment {
    pub name: String,
    pub index: MultiIndex,
    pub lo: f64,
    pub hi: f64,
    /// Number of grid points, ends included.
    pub steps: usize,
}

impl FreeMoment {
    fn grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / last)
            .collect()
    }
}

/// Free moments plus templates whose string values may mention them.
#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub kind: Kind,
    pub num_vars: usize,
    pub free: Vec<FreeMoment>,
    pub refine_tol: f64,
    fragment: Value,
    constraints: Vec<Value>,
}

impl ScanSpec {
    pub fn parse<T: Scalar>(doc: &Value) -> Result<Self> {
        let kind = io::doc_kind(doc)?;
        if kind != T::KIND {
            return Err(MomentError::invalid(format!("scan spec is {kind}, moments are {}", T::KIND)));
        }
        let num_vars = io::doc_num_vars(doc)?;
        let plain = Eval::default();
        let free = doc
            .get("free")
            .and_then(Value::as_array)
            .ok_or_else(|| MomentError::invalid("scan spec needs a \"free\" array"))?
            .iter()
            .map(|f| {
                let name = f
                    .get("name")
                    .and_then(Value::as_str)
                    .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                    .ok_or_else(|| MomentError::invalid("free moment needs an identifier \"name\""))?
                    .to_string();
                let get = |k: &str| {
                    f.get(k)
                        .ok_or_else(|| MomentError::invalid(format!("free moment {name}: missing \"{k}\"")))
                        .and_then(|v| plain.number(v, &format!("free moment {name}")))
                };
                let steps = f
                    .get("steps")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| MomentError::invalid(format!("free moment {name}: \"steps\" must be an integer")))?
                    as usize;
                Ok(FreeMoment {
                    index: io::entry_index::<T>(f, num_vars)?,
                    lo: get("lo")?,
                    hi: get("hi")?,
                    steps,
                    name,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let refine_tol = match doc.get("refine_tol") {
            Some(v) => plain.number(v, "refine_tol")?,
            None => 1e-7,
        };
        let fragment = doc
            .get("fragment")
            .cloned()
            .ok_or_else(|| MomentError::invalid("scan spec needs a \"fragment\""))?;
        let constraints = match doc.get("constraints") {
            None => Vec::new(),
            Some(Value::Array(a)) => a.clone(),
            Some(_) => return Err(MomentError::invalid("\"constraints\" must be an array")),
        };
        let spec = ScanSpec {
            kind,
            num_vars,
            free,
            refine_tol,
            fragment,
            constraints,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.free.is_empty() || self.free.len() > MAX_FREE {
            return Err(MomentError::invalid(format!(
                "a scan takes 1 to {MAX_FREE} free moments, got {}",
                self.free.len()
            )));
        }
        for (k, f) in self.free.iter().enumerate() {
            if f.steps == 0 {
                return Err(MomentError::invalid(format!("free moment {}: empty grid (steps = 0)", f.name)));
            }
            if f.lo > f.hi {
                return Err(MomentError::invalid(format!("free moment {}: lo > hi", f.name)));
            }
            if self.free[..k].iter().any(|g| g.name == f.name || g.index == f.index) {
                return Err(MomentError::invalid(format!("free moment {} repeats a name or index", f.name)));
            }
        }
        if !(self.refine_tol > 0.0) {
            return Err(MomentError::invalid("refine_tol must be positive"));
        }
        let total = self
            .free
            .iter()
            .try_fold(1usize, |acc, f| acc.checked_mul(f.steps))
            .filter(|&t| t <= MAX_GRID);
        if total.is_none() {
            return Err(MomentError::invalid(format!("grid larger than {MAX_GRID} points")));
        }
        Ok(())
    }

    fn eval(&self, params: &[f64]) -> Eval {
        Eval {
            enabled: true,
            vars: self.free.iter().map(|f| f.name.clone()).zip(params.iter().copied()).collect(),
        }
    }

    /// Moments, odd fragment and constraints at one parameter point.
    pub fn instantiate<T: Scalar>(
        &self,
        seq: &MomentSequence<T>,
        params: &[f64],
    ) -> Result<(MomentSequence<T>, MomentSequence<T>, Vec<Polynomial<T>>)> {
        let eval = self.eval(params);
        let mut doc = self.fragment.clone();
        if let Value::Object(o) = &mut doc {
            o.entry("kind").or_insert(serde_json::json!(self.kind));
            o.entry("num_vars").or_insert(serde_json::json!(self.num_vars));
        }
        let mut fragment = io::parse_sequence::<T>(&doc, &eval)?;
        let mut seq = seq.clone();
        for (f, &v) in self.free.iter().zip(params) {
            let target = if f.index.degree() == fragment.degree() { &mut fragment } else { &mut seq };
            target.insert(f.index.clone(), T::from_real(v))?;
            if T::KIND == Kind::Complex {
                target.insert(f.index.conj(T::KIND), T::from_real(v))?;
            }
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| io::parse_polynomial::<T>(c, self.num_vars, &eval))
            .collect::<Result<Vec<_>>>()?;
        Ok((seq, fragment, constraints))
    }

    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.free.iter().map(FreeMoment::grid).collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub params: Vec<f64>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_localizing_eigenvalue: Option<f64>,
}

/// A maximal run of feasible grid points along a single free moment.
#[derive(Debug, Clone, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_refined: bool,
    pub hi_refined: bool,
}

/// Bisected crossing between neighbouring grid points along `axis`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPoint {
    pub axis: usize,
    pub params: Vec<f64>,
    pub bracket: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub schema: &'static str,
    pub kind: Kind,
    pub free: Vec<String>,
    pub feasible_count: usize,
    pub grid: Vec<ScanPoint>,
    pub boundary: Vec<BoundaryPoint>,
    /// Feasible runs along the axis; empty unless exactly one moment is free.
    pub intervals: Vec<Interval>,
}

impl ScanResult {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or_else(|_| Value::Object(Map::new()))
    }
}

pub fn evaluate_point<T: Scalar>(
    seq: &MomentSequence<T>,
    spec: &ScanSpec,
    params: &[f64],
    tol: &Tolerances,
    seed: u64,
) -> Result<ScanPoint> {
    let (seq, fragment, constraints) = spec.instantiate(seq, params)?;
    let (failed_stage, cert) = match minimal_measure_pipeline(&seq, &fragment, &constraints, tol, seed) {
        Ok(out) => (None, out.certificate),
        Err(e) if e.source.class() == ErrorClass::Input => return Err(e.source),
        Err(e) => (Some(e.stage), e.certificate),
    };
    let feasible = failed_stage
        .as_deref()
        .is_none_or(|s| !FEASIBLE_THROUGH.contains(&s));
    let min_localizing_eigenvalue = cert.stage("localize").and_then(|s| s.min_eigenvalue);
    Ok(ScanPoint {
        params: params.to_vec(),
        feasible,
        failed_stage,
        min_localizing_eigenvalue,
    })
}

pub fn scan<T: Scalar>(
    seq: &MomentSequence<T>,
    spec: &ScanSpec,
    tol: &Tolerances,
    seed: u64,
) -> Result<ScanResult> {
    spec.validate()?;
    let grid = spec
        .grid_points()
        .iter()
        .map(|p| evaluate_point(seq, spec, p, tol, seed))
        .collect::<Result<Vec<_>>>()?;

    let feasible_at = |p: &[f64]| evaluate_point(seq, spec, p, tol, seed).map(|s| s.feasible);
    let bisect = |mut inside: Vec<f64>, mut outside: Vec<f64>, axis: usize| -> Result<(f64, f64)> {
        let mut iter = 0;
        while (inside[axis] - outside[axis]).abs() > spec.refine_tol && iter < MAX_BISECTIONS {
            let mut mid = inside.clone();
            mid[axis] = 0.5 * (inside[axis] + outside[axis]);
            if feasible_at(&mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
            iter += 1;
        }
        Ok((0.5 * (inside[axis] + outside[axis]), (inside[axis] - outside[axis]).abs()))
    };

    // row-major strides with the last free moment fastest
    let dims: Vec<usize> = spec.free.iter().map(|f| f.steps).collect();
    let mut strides = vec![1usize; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let mut boundary = Vec::new();
    for (idx, pt) in grid.iter().enumerate() {
        for axis in 0..dims.len() {
            let pos = (idx / strides[axis]) % dims[axis];
            if pos + 1 == dims[axis] {
                continue;
            }
            let next = &grid[idx + strides[axis]];
            if pt.feasible == next.feasible {
                continue;
            }
            let (inside, outside) = if pt.feasible { (pt, next) } else { (next, pt) };
            let (x, bracket) = bisect(inside.params.clone(), outside.params.clone(), axis)?;
            let mut params = pt.params.clone();
            params[axis] = x;
            boundary.push(BoundaryPoint { axis, params, bracket });
        }
    }

    let mut intervals = Vec::new();
    if dims.len() == 1 {
        let mut k = 0;
        while k < grid.len() {
            if !grid[k].feasible {
                k += 1;
                continue;
            }
            let start = k;
            while k + 1 < grid.len() && grid[k + 1].feasible {
                k += 1;
            }
            let crossing = |a: f64, b: f64| {
                boundary
                    .iter()
                    .find(|p| p.params[0] >= a.min(b) && p.params[0] <= a.max(b))
                    .map(|p| p.params[0])
            };
            let lo = match start {
                0 => None,
                s => crossing(grid[s - 1].params[0], grid[s].params[0]),
            };
            let hi = match k + 1 == grid.len() {
                true => None,
                false => crossing(grid[k].params[0], grid[k + 1].params[0]),
            };
            intervals.push(Interval {
                lo: lo.unwrap_or(grid[start].params[0]),
                hi: hi.unwrap_or(grid[k].params[0]),
                lo_refined: lo.is_some(),
                hi_refined: hi.is_some(),
            });
            k += 1;
        }
    }

    Ok(ScanResult {
        schema: SCHEMA,
        kind: spec.kind,
        free: spec.free.iter().map(|f| f.name.clone()).collect(),
        feasible_count: grid.iter().filter(|p| p.feasible).count(),
        grid,
        boundary,
        intervals,
    })
}
