//! JSON model files.
//!
//! A model file holds `N`, `d`, the coefficient matrices `P` (complex entries as
//! `{"re": .., "im": ..}`), the energy density `H` (real coefficient lists in `ζ`),
//! a `boundary` condition and optionally an `io_split`, a `controller` and a
//! `preset` that replaces everything else.

use std::collections::BTreeMap;
use std::path::Path;

use faer::{c64, Mat};
use serde_json::{json, Map, Value};

use crate::error::{PhsError, Result};
use crate::hybrid::{Controller, IoSplit};
use crate::model::{BcForm, BoundaryCondition, HamiltonianDensity, PhsDefinition};
use crate::poly::Poly;
use crate::presets::{self, ParamValue, PresetId, PresetModel};

/// Controller section of a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerConfig {
    /// Port-Hamiltonian form `(J_c, R_c, Q_c, B_c, D_c, σ)`.
    Sip {
        /// `J_c`.
        jc: Mat<c64>,
        /// `R_c`.
        rc: Mat<c64>,
        /// `Q_c`.
        qc: Mat<c64>,
        /// `B_c`.
        bc: Mat<c64>,
        /// `D_c`.
        dc: Mat<c64>,
        /// Declared margin.
        sigma: f64,
    },
    /// State-space form `(A_c, B_c, C_c, D_c)`.
    General {
        /// `A_c`.
        ac: Mat<c64>,
        /// `B_c`.
        bc: Mat<c64>,
        /// `C_c`.
        cc: Mat<c64>,
        /// `D_c`.
        dc: Mat<c64>,
    },
}

/// Preset reference of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetConfig {
    /// Preset name.
    pub name: String,
    /// Parameters.
    pub params: BTreeMap<String, ParamValue>,
}

/// Parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Order `N`.
    pub n: usize,
    /// State dimension `d`.
    pub d: usize,
    /// Coefficients `P_0..P_N`.
    pub p: Vec<Mat<c64>>,
    /// Energy density entries as coefficient lists.
    pub h: Vec<Vec<Vec<f64>>>,
    /// Static boundary condition.
    pub boundary: BoundaryCondition,
    /// Port-form input/output split.
    pub io_split: Option<IoSplit>,
    /// Controller.
    pub controller: Option<ControllerConfig>,
    /// Preset the file was expanded from.
    pub preset: Option<PresetConfig>,
}

/// Model assembled from a configuration.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    /// Distributed model.
    pub def: PhsDefinition,
    /// Static boundary condition.
    pub bc: BoundaryCondition,
    /// Split and controller when both are present.
    pub hybrid: Option<(IoSplit, Controller)>,
    /// Remarks carried over from a preset.
    pub notes: Vec<String>,
}

fn schema(key: &str, message: impl Into<String>) -> PhsError {
    PhsError::Schema { key: key.to_string(), message: message.into() }
}

fn dimension(key: &str, message: impl Into<String>) -> PhsError {
    PhsError::Dimension { key: key.to_string(), message: message.into() }
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(&join(path, key), "missing key"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(path, "expected a nonnegative integer"))
}

fn parse_complex(v: &Value, path: &str) -> Result<c64> {
    match v {
        Value::Number(_) => Ok(c64::new(as_f64(v, path)?, 0.0)),
        Value::Object(o) => {
            let re = as_f64(get(o, "re", path)?, &join(path, "re"))?;
            let im = match o.get("im") {
                Some(x) => as_f64(x, &join(path, "im"))?,
                None => 0.0,
            };
            Ok(c64::new(re, im))
        }
        _ => Err(schema(path, "expected {\"re\": .., \"im\": ..} or a number")),
    }
}

/// Parses a complex matrix given as a list of rows; `cols` fixes the width of empty matrices.
fn parse_matrix(v: &Value, path: &str, cols: Option<usize>) -> Result<Mat<c64>> {
    let rows = as_array(v, path)?;
    if rows.is_empty() {
        return Ok(Mat::zeros(0, cols.unwrap_or(0)));
    }
    let mut out: Vec<Vec<c64>> = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let entries = as_array(r, &rp)?;
        let row = entries.iter().enumerate().map(|(j, e)| parse_complex(e, &format!("{rp}[{j}]"))).collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    let width = out[0].len();
    if let Some((i, r)) = out.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(dimension(&format!("{path}[{i}]"), format!("row has {} entries, expected {width}", r.len())));
    }
    if let Some(c) = cols {
        if width != c {
            return Err(dimension(path, format!("expected {c} columns, got {width}")));
        }
    }
    Ok(Mat::from_fn(out.len(), width, |i, j| out[i][j]))
}

fn expect_shape(m: &Mat<c64>, rows: usize, cols: usize, path: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(dimension(path, format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn matrix_value(m: &Mat<c64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!({"re": m[(i, j)].re, "im": m[(i, j)].im})).collect()))
            .collect(),
    )
}

fn parse_params(v: &Value, path: &str) -> Result<BTreeMap<String, ParamValue>> {
    let obj = as_object(v, path)?;
    let mut out = BTreeMap::new();
    for (k, val) in obj {
        let kp = join(path, k);
        let pv = match val {
            Value::Number(_) => ParamValue::Scalar(as_f64(val, &kp)?),
            Value::Array(a) => ParamValue::Poly(a.iter().enumerate().map(|(i, x)| as_f64(x, &format!("{kp}[{i}]"))).collect::<Result<_>>()?),
            _ => return Err(schema(&kp, "expected a number or a coefficient list")),
        };
        out.insert(k.clone(), pv);
    }
    Ok(out)
}

impl ModelConfig {
    /// Reads and parses a model file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PhsError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Parses a model document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| PhsError::Parse(e.to_string()))?;
        Self::from_value(&v)
    }

    /// Parses a model document held as a JSON value.
    pub fn from_value(v: &Value) -> Result<Self> {
        let root = as_object(v, "$")?;
        if let Some(p) = root.get("preset") {
            let po = as_object(p, "preset")?;
            let name = get(po, "name", "preset")?.as_str().ok_or_else(|| schema("preset.name", "expected a string"))?;
            let params = match po.get("params") {
                Some(x) => parse_params(x, "preset.params")?,
                None => BTreeMap::new(),
            };
            let id = PresetId::from_name(name, &params)?;
            let mut cfg = Self::from_preset(&presets::preset_model(&id)?);
            cfg.preset = Some(PresetConfig { name: name.to_string(), params });
            return Ok(cfg);
        }
        let n = as_usize(get(root, "N", "")?, "N")?;
        let d = as_usize(get(root, "d", "")?, "d")?;
        if n == 0 || d == 0 {
            return Err(schema(if n == 0 { "N" } else { "d" }, "must be positive"));
        }
        let plist = as_array(get(root, "P", "")?, "P")?;
        if plist.len() != n + 1 {
            return Err(schema("P", format!("expected N+1 = {} matrices, got {}", n + 1, plist.len())));
        }
        let p = plist
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let path = format!("P[{k}]");
                let mat = parse_matrix(m, &path, Some(d))?;
                expect_shape(&mat, d, d, &path)?;
                Ok(mat)
            })
            .collect::<Result<Vec<_>>>()?;
        let hrows = as_array(get(root, "H", "")?, "H")?;
        if hrows.len() != d {
            return Err(dimension("H", format!("expected {d} rows, got {}", hrows.len())));
        }
        let mut h = Vec::with_capacity(d);
        for (i, r) in hrows.iter().enumerate() {
            let rp = format!("H[{i}]");
            let entries = as_array(r, &rp)?;
            if entries.len() != d {
                return Err(dimension(&rp, format!("expected {d} entries, got {}", entries.len())));
            }
            let mut row = Vec::with_capacity(d);
            for (j, e) in entries.iter().enumerate() {
                let ep = format!("{rp}[{j}]");
                let coeffs = match e {
                    Value::Number(_) => vec![as_f64(e, &ep)?],
                    _ => as_array(e, &ep)?.iter().enumerate().map(|(c, x)| as_f64(x, &format!("{ep}[{c}]"))).collect::<Result<Vec<_>>>()?,
                };
                if coeffs.is_empty() {
                    return Err(schema(&ep, "empty coefficient list"));
                }
                row.push(coeffs);
            }
            h.push(row);
        }
        let nd2 = 2 * n * d;
        let bo = as_object(get(root, "boundary", "")?, "boundary")?;
        let form = match get(bo, "form", "boundary")?.as_str() {
            Some("trace") => BcForm::Trace,
            Some("port") => BcForm::Port,
            _ => return Err(schema("boundary.form", "expected \"trace\" or \"port\"")),
        };
        let matrix = parse_matrix(get(bo, "matrix", "boundary")?, "boundary.matrix", Some(nd2))?;
        let boundary = BoundaryCondition { form, matrix };
        let io_split = match root.get("io_split") {
            None => None,
            Some(x) => {
                let o = as_object(x, "io_split")?;
                let m = as_usize(get(o, "m", "io_split")?, "io_split.m")?;
                let mat = |k: &str| parse_matrix(get(o, k, "io_split")?, &format!("io_split.{k}"), Some(nd2));
                let io = IoSplit::new(mat("W1")?, mat("W2")?, mat("Wt1")?, mat("Wt2")?);
                if io.m() != m {
                    return Err(dimension("io_split.W1", format!("expected m = {m} rows, got {}", io.m())));
                }
                Some(io)
            }
        };
        let controller = match root.get("controller") {
            None => None,
            Some(x) => Some(parse_controller(x)?),
        };
        Ok(ModelConfig { n, d, p, h, boundary, io_split, controller, preset: None })
    }

    /// Full expansion of a preset (without the `preset` reference).
    pub fn from_preset(pm: &PresetModel) -> Self {
        let def = &pm.def;
        let h = def.h.entries().iter().map(|r| r.iter().map(|p| p.coeffs.clone()).collect()).collect();
        let (io_split, controller) = match &pm.hybrid {
            Some((io, c)) => (Some(io.clone()), Some(controller_config(c))),
            None => (None, None),
        };
        ModelConfig { n: def.n, d: def.d, p: def.p.clone(), h, boundary: pm.bc.clone(), io_split, controller, preset: None }
    }

    /// Canonical JSON value with sorted keys.
    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("N".into(), json!(self.n));
        root.insert("d".into(), json!(self.d));
        root.insert("P".into(), Value::Array(self.p.iter().map(matrix_value).collect()));
        root.insert("H".into(), json!(self.h));
        let form = match self.boundary.form {
            BcForm::Trace => "trace",
            BcForm::Port => "port",
        };
        root.insert("boundary".into(), json!({"form": form, "matrix": matrix_value(&self.boundary.matrix)}));
        if let Some(io) = &self.io_split {
            root.insert(
                "io_split".into(),
                json!({"m": io.m(), "W1": matrix_value(&io.w1), "W2": matrix_value(&io.w2), "Wt1": matrix_value(&io.wt1), "Wt2": matrix_value(&io.wt2)}),
            );
        }
        if let Some(c) = &self.controller {
            let v = match c {
                ControllerConfig::Sip { jc, rc, qc, bc, dc, sigma } => json!({
                    "Jc": matrix_value(jc), "Rc": matrix_value(rc), "Qc": matrix_value(qc),
                    "Bc": matrix_value(bc), "Dc": matrix_value(dc), "sigma": sigma
                }),
                ControllerConfig::General { ac, bc, cc, dc } => json!({
                    "Ac": matrix_value(ac), "Bc": matrix_value(bc), "Cc": matrix_value(cc), "Dc": matrix_value(dc)
                }),
            };
            root.insert("controller".into(), v);
        }
        if let Some(p) = &self.preset {
            root.insert("preset".into(), json!({"name": p.name, "params": p.params}));
        }
        Value::Object(root)
    }

    /// Pretty-printed canonical JSON.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).unwrap_or_default()
    }

    /// Assembles the model, validating dimensions and controller shapes.
    pub fn to_model(&self) -> Result<LoadedModel> {
        let entries = self.h.iter().map(|r| r.iter().map(|c| Poly::new(c.clone())).collect()).collect();
        let h = HamiltonianDensity::new(entries)?;
        let def = PhsDefinition::new(self.n, self.p.clone(), h)?;
        let hybrid = match (&self.io_split, &self.controller) {
            (Some(io), Some(c)) => Some((io.clone(), build_controller(c)?)),
            (None, None) => None,
            _ => return Err(schema(if self.io_split.is_none() { "io_split" } else { "controller" }, "io_split and controller must be given together")),
        };
        let notes = match &self.preset {
            Some(p) => presets::preset_model(&PresetId::from_name(&p.name, &p.params)?)?.notes,
            None => Vec::new(),
        };
        Ok(LoadedModel { def, bc: self.boundary.clone(), hybrid, notes })
    }
}

fn parse_controller(v: &Value) -> Result<ControllerConfig> {
    let o = as_object(v, "controller")?;
    let mat = |k: &str| parse_matrix(get(o, k, "controller")?, &format!("controller.{k}"), None);
    if o.contains_key("Ac") {
        return Ok(ControllerConfig::General { ac: mat("Ac")?, bc: mat("Bc")?, cc: mat("Cc")?, dc: mat("Dc")? });
    }
    let sigma = as_f64(get(o, "sigma", "controller")?, "controller.sigma")?;
    Ok(ControllerConfig::Sip { jc: mat("Jc")?, rc: mat("Rc")?, qc: mat("Qc")?, bc: mat("Bc")?, dc: mat("Dc")?, sigma })
}

fn controller_config(c: &Controller) -> ControllerConfig {
    match &c.sip {
        Some(s) => ControllerConfig::Sip {
            jc: s.j_c.clone(),
            rc: s.r_c.clone(),
            qc: c.q_c.clone(),
            bc: c.b_c.clone(),
            dc: c.d_c.clone(),
            sigma: c.sigma,
        },
        None => ControllerConfig::General { ac: c.a_c.clone(), bc: c.b_c.clone(), cc: c.c_c.clone(), dc: c.d_c.clone() },
    }
}

fn build_controller(c: &ControllerConfig) -> Result<Controller> {
    let wrap = |e: PhsError| match e {
        PhsError::DimensionMismatch { what, expected, got } => dimension("controller", format!("{what}: expected {expected}, got {got}")),
        other => other,
    };
    match c {
        ControllerConfig::Sip { jc, rc, qc, bc, dc, sigma } => {
            Controller::sip(jc.clone(), rc.clone(), qc.clone(), bc.clone(), dc.clone(), *sigma).map_err(wrap)
        }
        ControllerConfig::General { ac, bc, cc, dc } => Controller::general(ac.clone(), bc.clone(), cc.clone(), dc.clone()).map_err(wrap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRANSPORT: &str = r#"{
        "N": 1, "d": 1,
        "P": [[[{"re": 0, "im": 0}]], [[{"re": 1, "im": 0}]]],
        "H": [[[1.0]]],
        "boundary": {"form": "port", "matrix": [[{"re": 1, "im": 0}, {"re": 1, "im": 0}]]}
    }"#;

    #[test]
    fn minimal_transport_file() {
        let c = ModelConfig::from_json_str(TRANSPORT).unwrap();
        assert_eq!((c.n, c.d), (1, 1));
        let m = c.to_model().unwrap();
        assert_eq!(m.def.nd(), 1);
    }

    #[test]
    fn wrong_p_length_is_a_schema_error() {
        let bad = TRANSPORT.replace(r#"[[{"re": 0, "im": 0}]], "#, "");
        match ModelConfig::from_json_str(&bad) {
            Err(PhsError::Schema { key, .. }) => assert_eq!(key, "P"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(ModelConfig::from_json_str("{"), Err(PhsError::Parse(_))));
    }

    #[test]
    fn missing_key_is_named() {
        let bad = TRANSPORT.replace(r#""H": [[[1.0]]],"#, "");
        assert_eq!(ModelConfig::from_json_str(&bad), Err(PhsError::Schema { key: "H".into(), message: "missing key".into() }));
    }

    #[test]
    fn boundary_width_is_a_dimension_error() {
        let bad = TRANSPORT.replace(r#"[[{"re": 1, "im": 0}, {"re": 1, "im": 0}]]"#, r#"[[{"re": 1, "im": 0}]]"#);
        assert!(matches!(ModelConfig::from_json_str(&bad), Err(PhsError::Dimension { .. })));
    }

    #[test]
    fn tipmass_expansion_round_trips() {
        let id = PresetId::from_name("eb-free-free-tipmass", &BTreeMap::new()).unwrap();
        let cfg = ModelConfig::from_preset(&presets::preset_model(&id).unwrap());
        let text = cfg.to_json_string();
        let back = ModelConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json_string(), text);
    }

    #[test]
    fn preset_reference_expands() {
        let c = ModelConfig::from_json_str(r#"{"preset": {"name": "schrodinger", "params": {"k": 2, "alpha": 1}}}"#).unwrap();
        assert_eq!((c.n, c.d), (2, 1));
        let back = ModelConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
    }
}
