//! JSON documents for sequences, polynomials, matrices and measures.
//!
//! Floats are written with 17 significant digits so repeated runs produce
//! byte-identical files.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::error::{MomentError, Result};
use crate::linalg::Scalar;
use crate::measure::AtomicMeasure;
use crate::moments::{MomentMatrix, MomentSequence};
use crate::monomials::{Kind, MultiIndex};
use crate::polynomial::Polynomial;

pub const SCHEMA: &str = "moment-atlas/1";

/// Pretty printer with `{:.16e}` floats.
struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<S: Serialize>(value: &S) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// How string-valued numbers are handled while reading.
#[derive(Debug, Clone, Default)]
pub struct Eval {
    /// Accept arithmetic expressions such as `"4*pi/3"`.
    pub enabled: bool,
    /// Extra variables visible to expressions.
    pub vars: Vec<(String, f64)>,
}

impl Eval {
    pub fn on() -> Self {
        Eval {
            enabled: true,
            vars: Vec::new(),
        }
    }

    pub fn number(&self, v: &Value, what: &str) -> Result<f64> {
        match v {
            Value::Number(x) => x
                .as_f64()
                .ok_or_else(|| MomentError::invalid(format!("{what}: number out of range"))),
            Value::String(s) if self.enabled => self.expression(s, what),
            Value::String(s) => Err(MomentError::invalid(format!(
                "{what}: expression \"{s}\" needs --eval"
            ))),
            other => Err(MomentError::invalid(format!("{what}: expected a number, found {other}"))),
        }
    }

    pub fn expression(&self, s: &str, what: &str) -> Result<f64> {
        let expr: meval::Expr = s
            .parse()
            .map_err(|e| MomentError::invalid(format!("{what}: cannot parse \"{s}\": {e}")))?;
        let mut ctx = meval::Context::new();
        for (name, v) in &self.vars {
            ctx.var(name.clone(), *v);
        }
        let x = expr
            .eval_with_context(ctx)
            .map_err(|e| MomentError::invalid(format!("{what}: cannot evaluate \"{s}\": {e}")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(MomentError::invalid(format!("{what}: \"{s}\" evaluates to {x}")))
        }
    }

    pub fn scalar<T: Scalar>(&self, v: &Value, what: &str) -> Result<T> {
        match v {
            Value::Object(o) => {
                let re = o.get("re").map_or(Ok(0.0), |x| self.number(x, what))?;
                let im = o.get("im").map_or(Ok(0.0), |x| self.number(x, what))?;
                if T::KIND == Kind::Real && im != 0.0 {
                    return Err(MomentError::invalid(format!("{what}: imaginary part in real data")));
                }
                Ok(T::from_parts(re, im))
            }
            other => Ok(T::from_real(self.number(other, what)?)),
        }
    }
}

pub fn scalar_json<T: Scalar>(x: T) -> Value {
    match T::KIND {
        Kind::Real => json!(x.re()),
        Kind::Complex => json!({"re": x.re(), "im": x.im()}),
    }
}

pub fn points_json<T: Scalar>(points: &[Vec<T>]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|p| Value::Array(p.iter().map(|&x| scalar_json(x)).collect()))
            .collect(),
    )
}

fn field<'a>(doc: &'a Value, key: &str) -> Result<&'a Value> {
    doc.get(key)
        .ok_or_else(|| MomentError::invalid(format!("missing field \"{key}\"")))
}

fn usize_field(doc: &Value, key: &str) -> Result<usize> {
    field(doc, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| MomentError::invalid(format!("field \"{key}\" must be a nonnegative integer")))
}

/// The `kind` of a document (defaults to real).
pub fn doc_kind(doc: &Value) -> Result<Kind> {
    match doc.get("kind").and_then(Value::as_str) {
        None | Some("real") => Ok(Kind::Real),
        Some("complex") => Ok(Kind::Complex),
        Some(other) => Err(MomentError::invalid(format!("unknown kind \"{other}\""))),
    }
}

pub fn doc_num_vars(doc: &Value) -> Result<usize> {
    let n = usize_field(doc, "num_vars")?;
    if n == 0 {
        return Err(MomentError::invalid("num_vars must be positive"));
    }
    Ok(n)
}

fn exponents(v: &Value, what: &str) -> Result<Vec<u32>> {
    v.as_array()
        .ok_or_else(|| MomentError::invalid(format!("{what} must be an array of exponents")))?
        .iter()
        .map(|e| {
            e.as_u64()
                .and_then(|x| u32::try_from(x).ok())
                .ok_or_else(|| MomentError::invalid(format!("{what}: exponents must be nonnegative integers")))
        })
        .collect()
}

/// Reads `"index": [...]` (real) or `"index_pair": [[i], [j]]` (complex,
/// meaning `z̄^i z^j`) into letters.
pub fn entry_index<T: Scalar>(entry: &Value, num_vars: usize) -> Result<MultiIndex> {
    let m = match T::KIND {
        Kind::Real => MultiIndex::new(exponents(field(entry, "index")?, "index")?),
        Kind::Complex => {
            let pair = field(entry, "index_pair")?
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| MomentError::invalid("index_pair must be [[i...], [j...]]"))?;
            let i = MultiIndex::new(exponents(&pair[0], "index_pair")?);
            let j = MultiIndex::new(exponents(&pair[1], "index_pair")?);
            if i.len() != num_vars || j.len() != num_vars {
                return Err(MomentError::DimensionMismatch(format!(
                    "index_pair {i}/{j} for {num_vars} variables"
                )));
            }
            MultiIndex::from_pair(&i, &j)
        }
    };
    if m.len() != T::KIND.letters(num_vars) {
        return Err(MomentError::DimensionMismatch(format!(
            "index {m} for {num_vars} variables"
        )));
    }
    Ok(m)
}

fn index_json<T: Scalar>(m: &MultiIndex) -> (String, Value) {
    match T::KIND {
        Kind::Real => ("index".into(), json!(m.exponents())),
        Kind::Complex => {
            let (i, j) = m.as_pair();
            ("index_pair".into(), json!([i.exponents(), j.exponents()]))
        }
    }
}

fn check_kind<T: Scalar>(doc: &Value) -> Result<()> {
    let k = doc_kind(doc)?;
    if k != T::KIND {
        return Err(MomentError::invalid(format!("expected {} data, document is {k}", T::KIND)));
    }
    Ok(())
}

pub fn parse_sequence<T: Scalar>(doc: &Value, eval: &Eval) -> Result<MomentSequence<T>> {
    check_kind::<T>(doc)?;
    let num_vars = doc_num_vars(doc)?;
    let degree = u32::try_from(usize_field(doc, "degree")?)
        .map_err(|_| MomentError::invalid("degree too large"))?;
    let entries = field(doc, "entries")?
        .as_array()
        .ok_or_else(|| MomentError::invalid("entries must be an array"))?;
    let mut seq = MomentSequence::new(num_vars, degree);
    for e in entries {
        let m = entry_index::<T>(e, num_vars)?;
        let v = eval.scalar::<T>(field(e, "value")?, &format!("moment {m}"))?;
        seq.insert(m, v)?;
    }
    Ok(seq)
}

pub fn sequence_json<T: Scalar>(seq: &MomentSequence<T>) -> Value {
    let entries: Vec<Value> = seq
        .entries()
        .map(|(m, &v)| {
            let (k, idx) = index_json::<T>(m);
            let mut o = Map::new();
            o.insert(k, idx);
            o.insert("value".into(), scalar_json(v));
            Value::Object(o)
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "num_vars": seq.num_vars(),
        "degree": seq.degree(),
        "entries": entries,
    })
}

/// `{"terms": [{"index": [...], "coef": c}, ...]}`.
pub fn parse_polynomial<T: Scalar>(doc: &Value, num_vars: usize, eval: &Eval) -> Result<Polynomial<T>> {
    let terms = field(doc, "terms")?
        .as_array()
        .ok_or_else(|| MomentError::invalid("terms must be an array"))?;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let m = entry_index::<T>(t, num_vars)?;
        let c = eval.scalar::<T>(field(t, "coef")?, &format!("coefficient of {m}"))?;
        out.push((m, c));
    }
    Polynomial::from_terms(num_vars, out)
}

pub fn polynomial_json<T: Scalar>(p: &Polynomial<T>) -> Value {
    let terms: Vec<Value> = p
        .terms()
        .map(|(m, &c)| {
            let (k, idx) = index_json::<T>(m);
            let mut o = Map::new();
            o.insert(k, idx);
            o.insert("coef".into(), scalar_json(c));
            Value::Object(o)
        })
        .collect();
    json!({ "terms": terms })
}

/// A single polynomial document `{"kind", "num_vars", "terms"}`.
pub fn parse_polynomial_doc<T: Scalar>(doc: &Value, eval: &Eval) -> Result<Polynomial<T>> {
    check_kind::<T>(doc)?;
    parse_polynomial(doc, doc_num_vars(doc)?, eval)
}

/// `{"kind", "num_vars", "constraints": [{"terms": [...]}, ...]}`.
pub fn parse_constraints<T: Scalar>(doc: &Value, eval: &Eval) -> Result<Vec<Polynomial<T>>> {
    check_kind::<T>(doc)?;
    let num_vars = doc_num_vars(doc)?;
    field(doc, "constraints")?
        .as_array()
        .ok_or_else(|| MomentError::invalid("constraints must be an array"))?
        .iter()
        .map(|c| parse_polynomial(c, num_vars, eval))
        .collect()
}

pub fn constraints_json<T: Scalar>(num_vars: usize, qs: &[Polynomial<T>]) -> Value {
    json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "num_vars": num_vars,
        "constraints": qs.iter().map(polynomial_json).collect::<Vec<_>>(),
    })
}

pub fn matrix_rows<T: Scalar>(m: &nalgebra::DMatrix<T>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| scalar_json(m[(r, c)])).collect()))
            .collect(),
    )
}

pub fn matrix_json<T: Scalar>(m: &MomentMatrix<T>) -> Value {
    json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "num_vars": m.num_vars(),
        "n": m.n(),
        "labels": m.labels(),
        "data": matrix_rows(m.data()),
    })
}

pub fn parse_measure<T: Scalar>(doc: &Value, eval: &Eval) -> Result<AtomicMeasure<T>> {
    check_kind::<T>(doc)?;
    let num_vars = doc_num_vars(doc)?;
    let atoms = field(doc, "atoms")?
        .as_array()
        .ok_or_else(|| MomentError::invalid("atoms must be an array"))?
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let coords = a
                .as_array()
                .filter(|c| c.len() == num_vars)
                .ok_or_else(|| MomentError::DimensionMismatch(format!("atom {k} must have {num_vars} coordinates")))?;
            coords
                .iter()
                .map(|x| eval.scalar::<T>(x, &format!("atom {k}")))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = field(doc, "weights")?
        .as_array()
        .ok_or_else(|| MomentError::invalid("weights must be an array"))?
        .iter()
        .map(|w| eval.number(w, "weight"))
        .collect::<Result<Vec<f64>>>()?;
    AtomicMeasure::new(atoms, weights)
}

pub fn measure_json<T: Scalar>(mu: &AtomicMeasure<T>) -> Value {
    json!({
        "schema": SCHEMA,
        "kind": T::KIND,
        "num_vars": mu.num_vars(),
        "atoms": points_json(&mu.atoms),
        "weights": mu.weights,
    })
}
