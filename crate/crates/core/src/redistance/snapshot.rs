//! Text snapshot of trained weights.
//!
//! ```text
//! frep-distance-model 1
//! activation softplus
//! head softplus
//! ansatz omega1
//! seed 0
//! domain -1.5 -1.5 -1.5 1.5 1.5 1.5
//! layers 5
//! layer 64 3
//! <64*3 weights, row-major (out x in), space separated>
//! <64 biases>
//! layer 64 64
//! ...
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same `f64`,
//! so a save/load cycle is exact. The wrapped field is not stored; loading
//! takes it as an argument.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Activation, Ansatz, DistanceModel, Head, Layer};
use crate::geom::{ParamSet, ScalarField};

pub const SNAPSHOT_MAGIC: &str = "frep-distance-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("snapshot line {line}: {message}")]
pub struct SnapshotError {
    pub line: usize,
    pub message: String,
}

fn join(out: &mut String, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

impl DistanceModel {
    pub fn to_snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{SNAPSHOT_MAGIC} {VERSION}");
        let _ = writeln!(s, "activation {}", self.activation.name());
        let _ = writeln!(s, "head {}", self.head.name());
        let _ = writeln!(s, "ansatz {}", self.ansatz.name());
        let _ = writeln!(s, "seed {}", self.seed);
        s.push_str("domain ");
        join(&mut s, &[self.domain[0], self.domain[1]].concat());
        let _ = writeln!(s, "layers {}", self.layers.len());
        for l in &self.layers {
            let _ = writeln!(s, "layer {} {}", l.out_dim, l.in_dim);
            join(&mut s, &l.weights);
            join(&mut s, &l.bias);
        }
        s
    }

    pub fn from_snapshot(text: &str, field: &ScalarField, params: &ParamSet) -> Result<Self, SnapshotError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| SnapshotError { line: text.lines().count() + 1, message: format!("missing {what}") })
        };
        let err = |line: usize, message: String| SnapshotError { line, message };
        let keyed = |(no, l): (usize, &str), key: &str| -> Result<(usize, String), SnapshotError> {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|r| (no, r.to_string()))
                .ok_or_else(|| err(no, format!("expected `{key} ...`")))
        };
        let nums = |no: usize, s: &str| -> Result<Vec<f64>, SnapshotError> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(no, format!("bad number `{t}`"))))
                .collect()
        };

        let (no, ver) = keyed(next("header")?, SNAPSHOT_MAGIC)?;
        if ver != VERSION.to_string() {
            return Err(err(no, format!("unsupported version {ver}")));
        }
        let (no, act) = keyed(next("activation")?, "activation")?;
        if act != "softplus" {
            return Err(err(no, format!("unknown activation `{act}`")));
        }
        let (no, hd) = keyed(next("head")?, "head")?;
        let head = Head::parse(&hd).ok_or_else(|| err(no, format!("unknown head `{hd}`")))?;
        let (no, ans) = keyed(next("ansatz")?, "ansatz")?;
        let ansatz = Ansatz::parse(&ans).ok_or_else(|| err(no, format!("unknown ansatz `{ans}`")))?;
        let (no, seed) = keyed(next("seed")?, "seed")?;
        let seed = seed.parse().map_err(|_| err(no, format!("bad seed `{seed}`")))?;
        let (no, dom) = keyed(next("domain")?, "domain")?;
        let d = nums(no, &dom)?;
        if d.len() != 6 {
            return Err(err(no, "domain needs 6 numbers".into()));
        }
        let (no, n) = keyed(next("layers")?, "layers")?;
        let n: usize = n.parse().map_err(|_| err(no, format!("bad layer count `{n}`")))?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let (no, dims) = keyed(next("layer")?, "layer")?;
            let dims: Vec<usize> = dims.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            let [out_dim, in_dim] = dims[..] else { return Err(err(no, "layer needs `out in`".into())) };
            if let Some(prev) = layers.last().map(|l: &Layer| l.out_dim) {
                if prev != in_dim {
                    return Err(err(no, format!("layer input {in_dim} does not match previous output {prev}")));
                }
            }
            let (no, w) = next("weights")?;
            let weights = nums(no, w)?;
            if weights.len() != out_dim * in_dim {
                return Err(err(no, format!("expected {} weights, found {}", out_dim * in_dim, weights.len())));
            }
            let (no, b) = next("biases")?;
            let bias = nums(no, b)?;
            if bias.len() != out_dim {
                return Err(err(no, format!("expected {out_dim} biases, found {}", bias.len())));
            }
            layers.push(Layer { out_dim, in_dim, weights, bias });
        }
        if layers.first().is_some_and(|l| l.in_dim != 3) || layers.last().is_some_and(|l| l.out_dim != 1) || layers.is_empty() {
            return Err(err(1, "network must map 3 inputs to 1 output".into()));
        }
        Ok(DistanceModel {
            layers,
            activation: Activation::Softplus,
            head,
            ansatz,
            domain: [[d[0], d[1], d[2]], [d[3], d[4], d[5]]],
            seed,
            field: field.clone(),
            params: params.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::geom::sphere;

    #[test]
    fn round_trip_is_exact() {
        let f = sphere([0.0; 3], 1.0).unwrap();
        let cfg = TrainConfig { hidden: vec![4, 5], seed: 7, ..Default::default() };
        let m = init_model(&cfg, &f, &ParamSet::new(), [[-1.5; 3], [1.5; 3]]).unwrap();
        let text = m.to_snapshot();
        let back = DistanceModel::from_snapshot(&text, &f, &ParamSet::new()).unwrap();
        assert_eq!(back.layers, m.layers);
        assert_eq!(back.domain, m.domain);
        assert_eq!(back.to_snapshot(), text);
        let broken = text.replacen("layer 4 3", "layer 4 2", 1);
        assert!(DistanceModel::from_snapshot(&broken, &f, &ParamSet::new()).is_err());
    }
}
