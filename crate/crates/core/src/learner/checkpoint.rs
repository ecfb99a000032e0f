use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Mlp};

const MAGIC: &str = "marlx-checkpoint 1";

/// Plain-text parameter dump.
///
/// ```text
/// marlx-checkpoint 1
/// config <line count>
/// <config lines>
/// net <name> <layer count> <hidden act> <output act>
/// w <rows> <cols>
/// <one row of weights per line>
/// b <len>
/// <biases>
/// ...
/// end
/// ```
///
/// Values use Rust's shortest round-trip formatting, so a save/load cycle is
/// bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub nets: Vec<(String, Mlp)>,
}

impl Checkpoint {
    pub fn net(&self, name: &str) -> Option<&Mlp> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let config_lines: Vec<&str> = self.config_text.lines().collect();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "config {}", config_lines.len());
        for l in config_lines {
            let _ = writeln!(s, "{l}");
        }
        for (name, mlp) in &self.nets {
            write_mlp(&mut s, name, mlp);
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let magic = lines.next()?;
        if magic != MAGIC {
            return Err(lines.err(format!("expected '{MAGIC}', found '{magic}'")));
        }
        let header = lines.next()?;
        let count: usize = match header.split_once(' ') {
            Some(("config", n)) => n.parse().map_err(|_| lines.err("bad config line count"))?,
            _ => return Err(lines.err("expected 'config <count>'")),
        };
        let mut config = Vec::with_capacity(count);
        for _ in 0..count {
            config.push(lines.next()?);
        }
        let mut nets = Vec::new();
        loop {
            let line = lines.peek()?;
            if line == "end" {
                break;
            }
            nets.push(read_mlp(&mut lines)?);
        }
        let mut config_text = config.join("\n");
        if !config_text.is_empty() {
            config_text.push('\n');
        }
        Ok(Self { config_text, nets })
    }
}

/// Line cursor with 1-based positions for error messages.
pub struct Lines<'a> {
    inner: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().collect(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint {
            line: self.pos,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Result<&'a str> {
        self.inner
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of checkpoint"))
    }

    fn next(&mut self) -> Result<&'a str> {
        let l = self.peek()?;
        self.pos += 1;
        Ok(l)
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let vals = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(format!("bad number: {e}")))?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(
        out,
        "net {name} {} {} {}",
        mlp.n_layers(),
        mlp.hidden_activation().name(),
        mlp.output_activation().name()
    );
    for l in 0..mlp.n_layers() {
        let w = mlp.weights(l);
        let _ = writeln!(out, "w {} {}", w.rows(), w.cols());
        for r in 0..w.rows() {
            let _ = writeln!(out, "{}", join(w.row(r)));
        }
        let b = mlp.biases(l);
        let _ = writeln!(out, "b {}", b.len());
        let _ = writeln!(out, "{}", join(b));
    }
}

pub fn read_mlp(lines: &mut Lines<'_>) -> Result<(String, Mlp)> {
    let header = lines.next()?;
    let parts: Vec<&str> = header.split_ascii_whitespace().collect();
    let [tag, name, n_layers, hidden, output] = parts[..] else {
        return Err(lines.err(format!("expected 'net <name> <layers> <act> <act>', found '{header}'")));
    };
    if tag != "net" {
        return Err(lines.err(format!("expected 'net', found '{tag}'")));
    }
    let n_layers: usize = n_layers.parse().map_err(|_| lines.err("bad layer count"))?;
    let act = |s: &str| Activation::from_name(s);
    let (Some(hidden), Some(output)) = (act(hidden), act(output)) else {
        return Err(lines.err("unknown activation"));
    };
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let wh = lines.next()?;
        let dims: Vec<usize> = match wh.split_ascii_whitespace().collect::<Vec<_>>()[..] {
            ["w", r, c] => [r, c]
                .iter()
                .map(|s| s.parse().map_err(|_| lines.err("bad weight shape")))
                .collect::<Result<_>>()?,
            _ => return Err(lines.err(format!("expected 'w <rows> <cols>', found '{wh}'"))),
        };
        let mut data = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[0] {
            data.extend(lines.values(dims[1])?);
        }
        weights.push(Matrix::from_vec(dims[0], dims[1], data).map_err(|e| lines.err(e.to_string()))?);
        let bh = lines.next()?;
        let len: usize = match bh.split_once(' ') {
            Some(("b", n)) => n.parse().map_err(|_| lines.err("bad bias length"))?,
            _ => return Err(lines.err(format!("expected 'b <len>', found '{bh}'"))),
        };
        biases.push(lines.values(len)?);
    }
    let mlp = Mlp::from_parts(weights, biases, hidden, output).map_err(|e| lines.err(e.to_string()))?;
    Ok((name.to_string(), mlp))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, checkpoint.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text)
}
