//! Network files: JSON (`n`, `alpha`, `beta`, `V_diag`, `L`, `F`, `H`, optional `D`)
//! and Matrix-Market coordinate files for Laplacians.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::network::{Laplacian, SecondOrderNetwork};

/// Row-major `[[..], ..]` serde adapter for `DMatrix<f64>`.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows, None).map_err(D::Error::custom)
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `cols` fixes the width for empty row lists.
pub fn from_rows(rows: &[Vec<f64>], cols: Option<usize>) -> std::result::Result<DMatrix<f64>, String> {
    let width = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(format!("row {bad} has {} entries, expected {width}", rows[bad].len()));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), width, rows.iter().flatten().copied()))
}

fn matrix_value(m: &DMatrix<f64>) -> Value {
    json!(to_rows(m))
}

pub fn network_to_json(net: &SecondOrderNetwork) -> Value {
    let mut obj = Map::new();
    obj.insert("n".into(), json!(net.n()));
    obj.insert("alpha".into(), json!(net.alpha()));
    obj.insert("beta".into(), json!(net.beta()));
    obj.insert("V_diag".into(), json!(net.v_diag().as_slice()));
    obj.insert("L".into(), matrix_value(net.laplacian()));
    obj.insert("F".into(), matrix_value(net.f()));
    obj.insert("H".into(), matrix_value(net.h()));
    if let Some(d) = net.damping_override() {
        obj.insert("D".into(), matrix_value(d));
    }
    Value::Object(obj)
}

fn schema(field: &str) -> Error {
    Error::Schema { field: field.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| schema(name))
}

fn number(obj: &Map<String, Value>, name: &str) -> Result<f64> {
    field(obj, name)?.as_f64().ok_or_else(|| schema(name))
}

fn vector(obj: &Map<String, Value>, name: &str) -> Result<Vec<f64>> {
    field(obj, name)?
        .as_array()
        .ok_or_else(|| schema(name))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| schema(name)))
        .collect()
}

fn matrix(v: &Value, name: &str, cols: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = v
        .as_array()
        .ok_or_else(|| schema(name))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| schema(name))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| schema(name)))
                .collect()
        })
        .collect::<Result<_>>()?;
    from_rows(&rows, Some(cols)).map_err(|_| schema(name))
}

pub fn network_from_json(v: &Value) -> Result<SecondOrderNetwork> {
    let obj = v.as_object().ok_or_else(|| schema("<root>"))?;
    let n = field(obj, "n")?.as_u64().ok_or_else(|| schema("n"))? as usize;
    let alpha = number(obj, "alpha")?;
    let beta = number(obj, "beta")?;
    let v_diag = vector(obj, "V_diag")?;
    if v_diag.len() != n {
        return Err(schema("V_diag"));
    }
    let l = matrix(field(obj, "L")?, "L", n)?;
    if l.shape() != (n, n) {
        return Err(schema("L"));
    }
    let f = matrix(field(obj, "F")?, "F", 0)?;
    if f.nrows() != n {
        return Err(schema("F"));
    }
    let h = matrix(field(obj, "H")?, "H", n)?;
    if h.ncols() != n {
        return Err(schema("H"));
    }
    let mut net = SecondOrderNetwork::new(DVector::from_vec(v_diag), l, alpha, beta, f, h)?;
    if let Some(d) = obj.get("D") {
        let d = matrix(d, "D", n)?;
        if d.shape() != (n, n) {
            return Err(schema("D"));
        }
        net = net.with_damping(d)?;
    }
    Ok(net)
}

/// Parses JSON text, mapping syntax errors to [`Error::Parse`].
pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn network_from_str(text: &str) -> Result<SecondOrderNetwork> {
    network_from_json(&parse_json(text)?)
}

pub fn network_to_string(net: &SecondOrderNetwork) -> String {
    let mut s = serde_json::to_string_pretty(&network_to_json(net)).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn load_network(path: impl AsRef<Path>) -> Result<SecondOrderNetwork> {
    network_from_str(&fs::read_to_string(path)?)
}

pub fn save_network(net: &SecondOrderNetwork, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_string(net))?;
    Ok(())
}

/// Reads a `matrix coordinate real|integer symmetric|general` file (1-based).
pub fn laplacian_from_matrix_market(text: &str) -> Result<Laplacian> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, &format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, &format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut m = DMatrix::zeros(0, 0);
    let mut seen = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                let nums = parse_usizes(&parts, line_no)?;
                if nums.len() != 3 {
                    return Err(parse_err(line_no, "size line needs `rows cols entries`"));
                }
                if nums[0] != nums[1] {
                    return Err(parse_err(line_no, "Laplacian must be square"));
                }
                m = DMatrix::zeros(nums[0], nums[1]);
                size = Some((nums[0], nums[1], nums[2]));
            }
            Some((rows, cols, _)) => {
                if parts.len() != 3 {
                    return Err(parse_err(line_no, "entry line needs `i j value`"));
                }
                let ij = parse_usizes(&parts[..2], line_no)?;
                let (i, j) = (ij[0], ij[1]);
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(line_no, &format!("index ({i}, {j}) out of range")));
                }
                let v: f64 = parts[2]
                    .parse()
                    .map_err(|_| parse_err(line_no, &format!("bad value `{}`", parts[2])))?;
                m[(i - 1, j - 1)] = v;
                if symmetric {
                    m[(j - 1, i - 1)] = v;
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if seen != nnz {
        return Err(Error::Parse {
            line: text.lines().count(),
            column: 1,
            message: format!("expected {nnz} entries, found {seen}"),
        });
    }
    Laplacian::new(m)
}

fn parse_usizes(parts: &[&str], line: usize) -> Result<Vec<usize>> {
    parts
        .iter()
        .map(|p| p.parse().map_err(|_| parse_err(line, &format!("bad integer `{p}`"))))
        .collect()
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        column: 1,
        message: message.into(),
    }
}

/// Lower triangle, symmetric coordinate format.
pub fn laplacian_to_matrix_market(l: &Laplacian) -> String {
    let m = l.matrix();
    let n = l.n();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            if m[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{n} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{i} {j} {v:?}");
    }
    out
}

pub fn load_laplacian(path: impl AsRef<Path>) -> Result<Laplacian> {
    laplacian_from_matrix_market(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_msd_example;

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let net = build_msd_example();
        let back = network_from_str(&network_to_string(&net)).unwrap();
        assert_eq!(net, back);

        let odd = SecondOrderNetwork::new(
            DVector::from_vec(vec![0.1 + 0.2, 1.0 / 3.0]),
            DMatrix::from_row_slice(2, 2, &[std::f64::consts::PI, -std::f64::consts::PI, -std::f64::consts::PI, std::f64::consts::PI]),
            0.97,
            0.15,
            DMatrix::from_row_slice(2, 1, &[1e-300, 2.5e17]),
            DMatrix::from_row_slice(1, 2, &[-0.0, 7.0]),
        )
        .unwrap();
        let back = network_from_str(&network_to_string(&odd)).unwrap();
        for (a, b) in odd.laplacian().iter().zip(back.laplacian().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(odd.v_diag(), back.v_diag());
        assert_eq!(odd.f(), back.f());
    }

    #[test]
    fn damping_override_roundtrip() {
        let net = build_msd_example().with_damping(DMatrix::identity(4, 4) * 2.0).unwrap();
        let back = network_from_str(&network_to_string(&net)).unwrap();
        assert_eq!(back.damping_override(), net.damping_override());
        assert_eq!(back.proportional(), None);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = network_from_str("{\n  \"n\": 2,\n  \"alpha\": ]\n}").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_named() {
        let mut v = network_to_json(&build_msd_example());
        v.as_object_mut().unwrap().remove("beta");
        match network_from_json(&v) {
            Err(Error::Schema { field }) => assert_eq!(field, "beta"),
            other => panic!("unexpected {other:?}"),
        }
        let mut v = network_to_json(&build_msd_example());
        v["L"] = json!([[1.0, 2.0], [3.0]]);
        assert!(matches!(network_from_json(&v), Err(Error::Schema { field }) if field == "L"));
    }

    #[test]
    fn matrix_market_three_nodes() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% path 1-2-3 with weights 2, 0.5\n3 3 5\n1 1 2\n2 1 -2\n2 2 2.5\n3 2 -0.5\n3 3 0.5\n";
        let l = laplacian_from_matrix_market(text).unwrap();
        assert_eq!(l.matrix()[(0, 1)], -2.0);
        assert_eq!(l.matrix()[(1, 0)], -2.0);
        assert_eq!(l.matrix()[(2, 1)], -0.5);
        assert_eq!(l.matrix()[(0, 2)], 0.0);
        let back = laplacian_from_matrix_market(&laplacian_to_matrix_market(&l)).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn matrix_market_errors() {
        assert!(matches!(laplacian_from_matrix_market("hello"), Err(Error::Parse { line: 1, .. })));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n";
        assert!(matches!(laplacian_from_matrix_market(short), Err(Error::Parse { .. })));
        let bad_index = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(matches!(laplacian_from_matrix_market(bad_index), Err(Error::Parse { line: 3, .. })));
    }
}
