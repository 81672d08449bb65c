//! Model files (JSON) and CSV output.
//!
//! A model file is a JSON object with keys `p`, `k`, `b`, `phi0_plus`,
//! `phi0_minus`, `phi0_x`, `lag_plus`, `lag_minus`, `lag_x`, `c` and
//! `sigma`. Vectors are arrays, matrices row-major nested arrays, and
//! `lag_*` hold one entry per lag. An optional `monetary` object
//! `{chi, theta, gamma, mu, psi, pi_bar, r_bar}` replaces the raw blocks.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{CanonicalModel, CksvarModel, MonetaryModelSpec};
use crate::simulate::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: CksvarModel,
    pub monetary: Option<MonetaryModelSpec>,
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("model file must be a JSON object".into()))?;

    if let Some(m) = obj.get("monetary") {
        let spec: MonetaryModelSpec = serde_json::from_value(m.clone())
            .map_err(|e| Error::Parse(format!("`monetary`: {e}")))?;
        let sigma = match obj.get("sigma") {
            Some(s) => matrix("sigma", s, 2, 2)?,
            None => DMatrix::identity(2, 2),
        };
        let model = spec.build_with_sigma(sigma)?;
        return Ok(ModelFile {
            model,
            monetary: Some(spec),
        });
    }

    let p = count(obj, "p")?;
    let k = count(obj, "k")?;
    if p == 0 {
        return Err(Error::Parse("`p`: must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::Parse("`k`: must be at least 1".into()));
    }
    let threshold = match obj.get("b") {
        None => 0.0,
        Some(b) => number("b", b)?,
    };
    let lags = |key: &str| -> Result<&Vec<Value>> {
        let a = field(obj, key)?
            .as_array()
            .ok_or_else(|| Error::Parse(format!("`{key}`: expected an array with one entry per lag")))?;
        if a.len() != k {
            return Err(Error::Parse(format!("`{key}`: expected {k} lags, found {}", a.len())));
        }
        Ok(a)
    };
    let lag_plus = lags("lag_plus")?
        .iter()
        .enumerate()
        .map(|(i, v)| vector(&format!("lag_plus[{i}]"), v, p))
        .collect::<Result<Vec<_>>>()?;
    let lag_minus = lags("lag_minus")?
        .iter()
        .enumerate()
        .map(|(i, v)| vector(&format!("lag_minus[{i}]"), v, p))
        .collect::<Result<Vec<_>>>()?;
    let lag_x = lags("lag_x")?
        .iter()
        .enumerate()
        .map(|(i, v)| matrix(&format!("lag_x[{i}]"), v, p, p - 1))
        .collect::<Result<Vec<_>>>()?;

    let model = CksvarModel {
        p,
        k,
        threshold,
        phi0_plus: vector("phi0_plus", field(obj, "phi0_plus")?, p)?,
        phi0_minus: vector("phi0_minus", field(obj, "phi0_minus")?, p)?,
        phi0_x: matrix("phi0_x", field(obj, "phi0_x")?, p, p - 1)?,
        lag_plus,
        lag_minus,
        lag_x,
        intercept: vector("c", field(obj, "c")?, p)?,
        sigma: matrix("sigma", field(obj, "sigma")?, p, p)?,
    };
    model.validate()?;
    Ok(ModelFile {
        model,
        monetary: None,
    })
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Parse(format!("`{key}`: missing")))
}

fn count(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    field(obj, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Parse(format!("`{key}`: expected a nonnegative integer")))
}

fn number(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse(format!("`{key}`: expected a number")))
}

fn vector(key: &str, v: &Value, n: usize) -> Result<DVector<f64>> {
    let a = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("`{key}`: expected an array of {n} numbers")))?;
    if a.len() != n {
        return Err(Error::Parse(format!("`{key}`: expected {n} entries, found {}", a.len())));
    }
    let vals = a
        .iter()
        .enumerate()
        .map(|(i, x)| number(&format!("{key}[{i}]"), x))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

fn matrix(key: &str, v: &Value, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let a = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("`{key}`: expected a {rows}x{cols} nested array")))?;
    // a p x 0 block may be written as [] as well as [[], ...]
    if cols == 0 && a.is_empty() {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if a.len() != rows {
        return Err(Error::Parse(format!("`{key}`: expected {rows} rows, found {}", a.len())));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, row) in a.iter().enumerate() {
        let row = vector(&format!("{key}[{r}]"), row, cols)?;
        m.set_row(r, &row.transpose());
    }
    Ok(m)
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| json!(x)).collect()))
            .collect(),
    )
}

fn vec_json(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| json!(x)).collect())
}

/// The model in file form.
pub fn model_to_json(m: &CksvarModel) -> Value {
    json!({
        "p": m.p,
        "k": m.k,
        "b": m.threshold,
        "phi0_plus": vec_json(&m.phi0_plus),
        "phi0_minus": vec_json(&m.phi0_minus),
        "phi0_x": rows(&m.phi0_x),
        "lag_plus": m.lag_plus.iter().map(vec_json).collect::<Vec<_>>(),
        "lag_minus": m.lag_minus.iter().map(vec_json).collect::<Vec<_>>(),
        "lag_x": m.lag_x.iter().map(rows).collect::<Vec<_>>(),
        "c": vec_json(&m.intercept),
        "sigma": rows(&m.sigma),
    })
}

/// Canonical model in file form, plus the transforms relating it to its source.
pub fn canonical_to_json(cm: &CanonicalModel) -> Value {
    let mut v = model_to_json(&cm.to_model());
    let obj = v.as_object_mut().expect("object");
    obj.insert("P".into(), rows(&cm.transform_p));
    obj.insert("Q".into(), rows(&cm.transform_q));
    obj.insert("T".into(), rows(&cm.equation_transform));
    obj.insert("source_b".into(), json!(cm.threshold));
    obj.insert("phibar_plus".into(), json!(cm.phibar_plus));
    obj.insert("phibar_minus".into(), json!(cm.phibar_minus));
    obj.insert("minus_scale".into(), json!(cm.minus_scale));
    obj.insert(
        "normalization".into(),
        serde_json::to_value(&cm.normalization).expect("serializes"),
    );
    v
}

/// Header `t,y,x1..x{p-1},regime`, then `u1..up` when shocks are recorded.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let p = tr.values.ncols();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend((1..p).map(|i| format!("x{i}")));
    header.push("regime".into());
    if tr.shocks.is_some() {
        header.extend((1..=p).map(|i| format!("u{i}")));
    }
    w.write_record(&header).expect("in-memory write");
    for t in 0..tr.horizon {
        let mut rec = vec![t.to_string()];
        rec.extend(tr.values.row(t).iter().map(|v| v.to_string()));
        rec.push(tr.regimes[t].to_string());
        if let Some(u) = &tr.shocks {
            rec.extend(u.row(t).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
