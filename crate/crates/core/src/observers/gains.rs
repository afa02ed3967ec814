//! Plain-text gains files.
//!
//! ```text
//! kind lipschitz
//! scalar sigma 6.424
//! matrix l_mat 4 4
//! -6.023 15.9308 31.8673 12.0481
//! ...
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a save/load cycle is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{LipschitzGains, ObserverError, UioGains};
use crate::numerics::Matrix;
use crate::scenario::{EstimatorKind, LipschitzConstants};

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ObserverGains {
    Uio(UioGains),
    Lipschitz(LipschitzGains),
}

impl ObserverGains {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            ObserverGains::Uio(_) => EstimatorKind::Uio,
            ObserverGains::Lipschitz(_) => EstimatorKind::Lipschitz,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind {}", self.kind());
        let scalar = |out: &mut String, name: &str, v: f64| {
            let _ = writeln!(out, "scalar {name} {v:?}");
        };
        let matrix = |out: &mut String, name: &str, m: &Matrix| {
            let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        match self {
            ObserverGains::Uio(g) => {
                scalar(&mut out, "gamma", g.gamma);
                for (name, m) in uio_fields(g) {
                    matrix(&mut out, name, m);
                }
            }
            ObserverGains::Lipschitz(g) => {
                let k = &g.constants;
                for (name, v) in [
                    ("eps1", g.eps1),
                    ("eps2", g.eps2),
                    ("sigma", g.sigma),
                    ("rho", k.rho),
                    ("varphi", k.varphi),
                    ("mu", k.mu),
                    ("gamma", k.gamma),
                ] {
                    scalar(&mut out, name, v);
                }
                matrix(&mut out, "l_mat", &g.l_mat);
                matrix(&mut out, "p_mat", &g.p_mat);
            }
        }
        out
    }
}

fn uio_fields(g: &UioGains) -> [(&'static str, &Matrix); 14] {
    [
        ("n_mat", &g.n_mat),
        ("g_mat", &g.g_mat),
        ("l_mat", &g.l_mat),
        ("m_mat", &g.m_mat),
        ("e_mat", &g.e_mat),
        ("u_mat", &g.u_mat),
        ("v_mat", &g.v_mat),
        ("a_bar", &g.a_bar),
        ("b_bar", &g.b_bar),
        ("y_mat", &g.y_mat),
        ("k_mat", &g.k_mat),
        ("p_mat", &g.p_mat),
        ("y_bar", &g.y_bar),
        ("k_bar", &g.k_bar),
    ]
}

fn bad(line: usize, reason: impl Into<String>) -> ObserverError {
    ObserverError::GainsFormat { line, reason: reason.into() }
}

fn number(tok: &str, line: usize) -> Result<f64, ObserverError> {
    tok.parse::<f64>().map_err(|_| bad(line, format!("`{tok}` is not a number")))
}

pub fn parse_gains(text: &str) -> Result<ObserverGains, ObserverError> {
    let mut kind = None;
    let mut scalars = BTreeMap::new();
    let mut matrices: BTreeMap<String, Matrix> = BTreeMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    while let Some((no, line)) = lines.next() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["kind", k] => kind = Some(k.parse::<EstimatorKind>().map_err(|e| bad(no, e))?),
            ["scalar", name, v] => {
                scalars.insert(name.to_string(), number(v, no)?);
            }
            ["matrix", name, r, c] => {
                let r: usize = r.parse().map_err(|_| bad(no, "bad row count"))?;
                let c: usize = c.parse().map_err(|_| bad(no, "bad column count"))?;
                let mut m = Matrix::zeros(r, c);
                for i in 0..r {
                    let (rn, row) = lines.next().ok_or_else(|| bad(no, format!("matrix {name} ends early")))?;
                    let vals: Vec<&str> = row.split_whitespace().collect();
                    if vals.len() != c {
                        return Err(bad(rn, format!("expected {c} values, got {}", vals.len())));
                    }
                    for (j, v) in vals.iter().enumerate() {
                        m[(i, j)] = number(v, rn)?;
                    }
                }
                matrices.insert(name.to_string(), m);
            }
            _ => return Err(bad(no, format!("unrecognised line `{line}`"))),
        }
    }
    let scalar = |name: &str| scalars.get(name).copied().ok_or_else(|| bad(0, format!("missing scalar {name}")));
    let mut take = |name: &str| matrices.remove(name).ok_or_else(|| bad(0, format!("missing matrix {name}")));
    match kind {
        Some(EstimatorKind::Lipschitz) => Ok(ObserverGains::Lipschitz(LipschitzGains {
            l_mat: take("l_mat")?,
            p_mat: take("p_mat")?,
            eps1: scalar("eps1")?,
            eps2: scalar("eps2")?,
            sigma: scalar("sigma")?,
            constants: LipschitzConstants {
                rho: scalar("rho")?,
                varphi: scalar("varphi")?,
                mu: scalar("mu")?,
                gamma: scalar("gamma")?,
            },
        })),
        Some(EstimatorKind::Uio) => Ok(ObserverGains::Uio(UioGains {
            n_mat: take("n_mat")?,
            g_mat: take("g_mat")?,
            l_mat: take("l_mat")?,
            m_mat: take("m_mat")?,
            e_mat: take("e_mat")?,
            u_mat: take("u_mat")?,
            v_mat: take("v_mat")?,
            a_bar: take("a_bar")?,
            b_bar: take("b_bar")?,
            y_mat: take("y_mat")?,
            k_mat: take("k_mat")?,
            p_mat: take("p_mat")?,
            y_bar: take("y_bar")?,
            k_bar: take("k_bar")?,
            gamma: scalar("gamma")?,
        })),
        Some(other) => Err(bad(0, format!("{other} has no gains"))),
        None => Err(bad(0, "missing `kind` line")),
    }
}

pub fn save_gains(g: &ObserverGains, path: &Path) -> Result<(), ObserverError> {
    std::fs::write(path, g.to_text()).map_err(|source| ObserverError::Io { path: path.display().to_string(), source })
}

pub fn load_gains(path: &Path) -> Result<ObserverGains, ObserverError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ObserverError::Io { path: path.display().to_string(), source })?;
    parse_gains(&text)
}
