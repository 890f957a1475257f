//! CSV and JSON writers. Floats are printed with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use homloop_core::loopmap::SessionParams;
use homloop_core::Point2;
use serde_json::{Map, Value};

use crate::error::CliError;

/// `{:.16e}`, or `NaN` / `inf` / `-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// JSON number carrying exactly the `fmt17` digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str(&fmt17(x)).unwrap_or(Value::Null)
}

pub fn point(p: Point2) -> Value {
    Value::Array(vec![num(p.x1), num(p.x2)])
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Key/value pairs of the parameter cascade, in a fixed order.
pub fn cascade_pairs(p: &SessionParams) -> Vec<(&'static str, f64)> {
    vec![
        ("eps", p.eps),
        ("mu", p.mu),
        ("mu0", p.mu0),
        ("c_mu", p.c_mu),
        ("mu2", p.mu2),
        ("mu1", p.mu1),
        ("c_s", p.c_s),
        ("ln_varpi_abs", p.big_l),
        ("varpi", p.varpi.varpi),
        ("sigma_fb", p.sigma_fb),
        ("beta", p.beta),
        ("delta", p.delta),
    ]
}

pub fn cascade_json(p: &SessionParams) -> Value {
    let mut m = Map::new();
    for (k, v) in cascade_pairs(p) {
        m.insert(k.into(), num(v));
    }
    m.insert("varpi_capped".into(), Value::Bool(p.varpi.capped));
    Value::Object(m)
}

/// Comma separated, header row, LF endings. Provenance goes into leading `# key=value` lines.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(meta: &[(&str, String)], header: &[&str]) -> Self {
        let mut buf = String::new();
        for (k, v) in meta {
            let _ = writeln!(buf, "# {k}={v}");
        }
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv { buf, cols: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.cols);
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

pub fn cascade_meta(p: &SessionParams) -> Vec<(&'static str, String)> {
    let mut v: Vec<(&'static str, String)> = cascade_pairs(p).into_iter().map(|(k, x)| (k, fmt17(x))).collect();
    v.push(("varpi_capped", p.varpi.capped.to_string()));
    v
}

/// Artifact sink rooted at one directory.
#[derive(Clone, Debug)]
pub struct OutDir {
    pub dir: PathBuf,
    pub prefix: String,
}

impl OutDir {
    pub fn new(dir: &Path, prefix: Option<&str>) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutDir { dir: dir.to_path_buf(), prefix: prefix.unwrap_or("").to_string() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }

    pub fn write_csv(&self, name: &str, csv: &Csv) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, csv.as_str())?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, v: &Value) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.into()))?;
        s.push('\n');
        fs::write(&p, s)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(f64::NAN), "NaN");
        let v = num(1.0 / 3.0);
        assert_eq!(v.to_string(), "3.3333333333333331e-1");
        assert_eq!(fmt17(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(num(f64::INFINITY), Value::Null);
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&[("beta", fmt17(0.05))], &["a", "b"]);
        c.row(&[fmt17(1.0), fmt17(2.0)]);
        assert_eq!(c.as_str(), "# beta=5.0000000000000003e-2\na,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
