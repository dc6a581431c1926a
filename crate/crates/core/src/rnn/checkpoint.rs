//! Checkpoint files.
//!
//! ```text
//! format statemerge-checkpoint 1
//! language 2
//! epoch 3
//! seed 0
//! dev_accuracy 1.0
//! param_norm 41.23
//! alphabet a b
//! matrix embedding 3 10
//! <3 lines of 10 values>
//! matrix recurrence 100 100
//! ...
//! matrix input 100 10
//! matrix head_weight 2 100
//! vector head_bias 2
//! <1 line of 2 values>
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! checkpoint reads back bit-for-bit. `language none` marks a model not tied
//! to a Tomita language.

use std::fmt::Write as _;
use std::str::Lines;

use ndarray::{Array1, Array2};

use super::{Parameters, RnnModel};
use crate::automata::Alphabet;
use crate::error::{parse_err, Result};

const MAGIC: &str = "statemerge-checkpoint";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointMeta {
    pub language: Option<u8>,
    pub epoch: usize,
    pub seed: u64,
    pub dev_accuracy: f64,
    pub param_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: RnnModel,
    pub meta: CheckpointMeta,
}

fn write_rows<'a>(out: &mut String, rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>) {
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
}

pub fn write_checkpoint(ckpt: &Checkpoint) -> String {
    let m = &ckpt.meta;
    let p = &ckpt.model.params;
    let mut out = String::new();
    writeln!(out, "format {MAGIC} 1").unwrap();
    match m.language {
        Some(l) => writeln!(out, "language {l}").unwrap(),
        None => writeln!(out, "language none").unwrap(),
    }
    writeln!(out, "epoch {}", m.epoch).unwrap();
    writeln!(out, "seed {}", m.seed).unwrap();
    writeln!(out, "dev_accuracy {:?}", m.dev_accuracy).unwrap();
    writeln!(out, "param_norm {:?}", m.param_norm).unwrap();
    let tokens: Vec<String> = ckpt
        .model
        .alphabet()
        .tokens()
        .iter()
        .map(char::to_string)
        .collect();
    writeln!(out, "alphabet {}", tokens.join(" ")).unwrap();
    for (name, mat) in [
        ("embedding", &p.embedding),
        ("recurrence", &p.recurrence),
        ("input", &p.input),
        ("head_weight", &p.head_weight),
    ] {
        writeln!(out, "matrix {name} {} {}", mat.nrows(), mat.ncols()).unwrap();
        write_rows(&mut out, mat.rows().into_iter());
    }
    writeln!(out, "vector head_bias {}", p.head_bias.len()).unwrap();
    write_rows(&mut out, std::iter::once(p.head_bias.view()));
    out.push_str("end\n");
    out
}

struct Reader<'a> {
    lines: Lines<'a>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line += 1;
        self.lines
            .next()
            .ok_or_else(|| parse_err(self.line, "unexpected end of checkpoint"))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next()?;
        let mut fields = line.split_whitespace();
        if fields.next() != Some(key) {
            return Err(parse_err(self.line, format!("expected `{key}`")));
        }
        Ok(fields.collect())
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        match self.keyed(key)?.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| parse_err(self.line, format!("bad value for `{key}`"))),
            _ => Err(parse_err(self.line, format!("`{key}` takes one value"))),
        }
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let values = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(self.line, e.to_string()))?;
        if values.len() != expected {
            return Err(parse_err(
                self.line,
                format!("expected {expected} values, found {}", values.len()),
            ));
        }
        Ok(values)
    }

    fn matrix(&mut self, name: &str) -> Result<Array2<f64>> {
        let header = self.keyed("matrix")?;
        let (rows, cols) = match header.as_slice() {
            [n, r, c] if *n == name => (
                r.parse::<usize>()
                    .map_err(|_| parse_err(self.line, "bad row count"))?,
                c.parse::<usize>()
                    .map_err(|_| parse_err(self.line, "bad column count"))?,
            ),
            _ => {
                return Err(parse_err(
                    self.line,
                    format!("expected `matrix {name} <rows> <cols>`"),
                ))
            }
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("sized above"))
    }
}

pub fn read_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut r = Reader {
        lines: text.lines(),
        line: 0,
    };
    match r.keyed("format")?.as_slice() {
        [magic, "1"] if *magic == MAGIC => {}
        _ => return Err(parse_err(1, format!("expected `format {MAGIC} 1`"))),
    }
    let language = match r.keyed("language")?.as_slice() {
        ["none"] => None,
        [l] => Some(l.parse().map_err(|_| parse_err(r.line, "bad language"))?),
        _ => return Err(parse_err(r.line, "`language` takes one value")),
    };
    let epoch = r.single("epoch")?;
    let seed = r.single("seed")?;
    let dev_accuracy = r.single("dev_accuracy")?;
    let param_norm = r.single("param_norm")?;
    let tokens = r
        .keyed("alphabet")?
        .iter()
        .map(|t| {
            let mut cs = t.chars();
            match (cs.next(), cs.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(parse_err(r.line, "tokens are single characters")),
            }
        })
        .collect::<Result<Vec<char>>>()?;
    let alphabet = Alphabet::new(tokens)?;
    let embedding = r.matrix("embedding")?;
    let recurrence = r.matrix("recurrence")?;
    let input = r.matrix("input")?;
    let head_weight = r.matrix("head_weight")?;
    let bias_len: usize = match r.keyed("vector")?.as_slice() {
        ["head_bias", n] => n.parse().map_err(|_| parse_err(r.line, "bad length"))?,
        _ => return Err(parse_err(r.line, "expected `vector head_bias <len>`")),
    };
    let head_bias = Array1::from(r.values(bias_len)?);
    if r.next()?.trim() != "end" {
        return Err(parse_err(r.line, "expected `end`"));
    }
    let model = RnnModel::from_parameters(
        alphabet,
        Parameters {
            embedding,
            recurrence,
            input,
            head_weight,
            head_bias,
        },
    )?;
    Ok(Checkpoint {
        model,
        meta: CheckpointMeta {
            language,
            epoch,
            seed,
            dev_accuracy,
            param_norm,
        },
    })
}
