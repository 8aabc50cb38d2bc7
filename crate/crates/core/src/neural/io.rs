//! Plain-text parameter files.
//!
//! ```text
//! lstm-policy 1
//! d_in 3
//! widths 24 24
//! d_out 1
//! tensor cell1.w_i 24 27
//! <one row of values per line>
//! ...
//! tensor output.b_y 1 1
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so reading back a
//! written file reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array2};

use super::{Gate, LstmConfig, PolicyParams};
use crate::error::{HedgeError, Result};

const MAGIC: &str = "lstm-policy";
const VERSION: u32 = 1;

fn push_matrix(out: &mut String, name: &str, rows: usize, cols: usize, values: impl Iterator<Item = f64>) {
    let _ = writeln!(out, "tensor {name} {rows} {cols}");
    let values: Vec<f64> = values.collect();
    for row in values.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

impl PolicyParams {
    pub fn to_text(&self) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "d_in {}", cfg.d_in);
        let widths: Vec<String> = cfg.widths.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "widths {}", widths.join(" "));
        let _ = writeln!(out, "d_out {}", cfg.d_out);
        for j in 0..cfg.n_cells() {
            for gate in Gate::ALL {
                let w = self.gate_weights(j, gate);
                push_matrix(&mut out, &format!("cell{}.w_{}", j + 1, gate.tag()), w.nrows(), w.ncols(), w.iter().copied());
            }
            for gate in Gate::ALL {
                let b = self.gate_bias(j, gate);
                push_matrix(&mut out, &format!("cell{}.b_{}", j + 1, gate.tag()), b.len(), 1, b.iter().copied());
            }
        }
        push_matrix(&mut out, "output.w_y", cfg.d_out, cfg.top(), self.w_y.iter().copied());
        push_matrix(&mut out, "output.b_y", cfg.d_out, 1, self.b_y.iter().copied());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| HedgeError::Parse(format!("missing {what}")));

        let header = next("header")?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [MAGIC, v] if *v == VERSION.to_string() => {}
            _ => return Err(HedgeError::Parse(format!("unsupported header `{header}`"))),
        }
        let d_in = keyed_usizes(next("d_in")?, "d_in")?;
        let widths = keyed_usizes(next("widths")?, "widths")?;
        let d_out = keyed_usizes(next("d_out")?, "d_out")?;
        let (&[d_in], &[d_out]) = (d_in.as_slice(), d_out.as_slice()) else {
            return Err(HedgeError::Parse("d_in and d_out take one value".into()));
        };
        let config = LstmConfig::new(d_in, widths, d_out)?;
        let mut params = PolicyParams::zeros(&config);

        let mut read = |name: String, rows: usize, cols: usize| -> Result<Array2<f64>> {
            let head = next(&name)?;
            let expected = format!("tensor {name} {rows} {cols}");
            if head.split_whitespace().ne(expected.split_whitespace()) {
                return Err(HedgeError::Parse(format!("expected `{expected}`, found `{head}`")));
            }
            let mut m = Array2::zeros((rows, cols));
            for r in 0..rows {
                let line = next(&name)?;
                let vals = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| HedgeError::Parse(format!("{name}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != cols {
                    return Err(HedgeError::Parse(format!("{name}: row {r} has {} values", vals.len())));
                }
                m.row_mut(r).assign(&ndarray::ArrayView1::from(&vals));
            }
            Ok(m)
        };

        for j in 0..config.n_cells() {
            let d = config.widths[j];
            let k = d + config.below(j);
            for (g, gate) in Gate::ALL.iter().enumerate() {
                let m = read(format!("cell{}.w_{}", j + 1, gate.tag()), d, k)?;
                params.cells[j].w.slice_mut(s![g * d..(g + 1) * d, ..]).assign(&m);
            }
            for (g, gate) in Gate::ALL.iter().enumerate() {
                let m = read(format!("cell{}.b_{}", j + 1, gate.tag()), d, 1)?;
                params.cells[j].b.slice_mut(s![g * d..(g + 1) * d]).assign(&m.column(0));
            }
        }
        params.w_y = read("output.w_y".into(), d_out, config.top())?;
        params.b_y = read("output.b_y".into(), d_out, 1)?.column(0).to_owned();
        if !params.is_finite() {
            return Err(HedgeError::Parse("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn keyed_usizes(line: &str, key: &str) -> Result<Vec<usize>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(HedgeError::Parse(format!("expected `{key}`, found `{line}`")));
    }
    parts
        .map(|t| t.parse::<usize>().map_err(|e| HedgeError::Parse(format!("{key}: {e}"))))
        .collect()
}
