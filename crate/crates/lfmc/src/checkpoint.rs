//! Policy serialization in the `LFMC-POLICY v1` text format.
//!
//! Layout, one record per line: the header, `activation <name>`,
//! `dims <d0> <d1> ...`, `norm_mean` and `norm_var` vectors (length `d0`),
//! the `log_std` vector (length = output dimension), then for each layer a
//! `weight <layer> <out> <in>` block of `out` rows followed by a
//! `bias <layer> <out>` block of one row. Matrices are row-major. Every
//! number is decimal text with 17 significant digits, which recovers any
//! finite f64 exactly on parse.
//!
//! The constant action bias added outside the network has no field of its
//! own: the output layer is linear, so saving folds it into that layer's
//! bias vector and loading returns a policy with zero external bias and
//! identical action means.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::policy::{Mlp, Normalizer, PolicyNetwork};
use crate::sim::N_JOINTS;
use crate::{Error, Result};

pub const HEADER: &str = "LFMC-POLICY v1";

fn push_numbers(line: &mut String, xs: &[f64]) {
    for x in xs {
        line.push(' ');
        write!(line, "{x:.16e}").unwrap();
    }
    line.push('\n');
}

/// Checkpoint text for `policy`. Writing then parsing gives a policy with
/// bit-identical parameters, statistics and log-std.
pub fn policy_to_string(policy: &PolicyNetwork) -> String {
    let dims = policy.net.dims();
    let params = policy.net.params();
    let layers = dims.len() - 1;
    let mut s = String::new();
    s.push_str(HEADER);
    s.push('\n');
    s.push_str("activation tanh\n");
    s.push_str("dims");
    for d in dims {
        write!(s, " {d}").unwrap();
    }
    s.push('\n');
    s.push_str("norm_mean");
    push_numbers(&mut s, policy.normalizer.mean());
    s.push_str("norm_var");
    push_numbers(&mut s, &policy.normalizer.variance());
    s.push_str("log_std");
    push_numbers(&mut s, &policy.log_std);

    let mut off = 0;
    for l in 0..layers {
        let (nin, nout) = (dims[l], dims[l + 1]);
        writeln!(s, "weight {l} {nout} {nin}").unwrap();
        for i in 0..nout {
            let row = &params[off + i * nin..off + (i + 1) * nin];
            s.push_str("row");
            push_numbers(&mut s, row);
        }
        off += nin * nout;
        writeln!(s, "bias {l} {nout}").unwrap();
        let mut bias: Vec<f64> = params[off..off + nout].to_vec();
        if l == layers - 1 {
            for (b, a) in bias.iter_mut().zip(policy.action_bias) {
                *b += a;
            }
        }
        s.push_str("row");
        push_numbers(&mut s, &bias);
        off += nout;
    }
    s
}

pub fn save_policy(path: &Path, policy: &PolicyNetwork) -> Result<()> {
    fs::write(path, policy_to_string(policy))?;
    Ok(())
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, line)) => Ok((i + 1, line)),
            None => Err(Error::Checkpoint("unexpected end of file".into())),
        }
    }

    /// Line whose first token is `tag`; returns the remaining tokens.
    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next_line()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(t) if t == tag => Ok((n, tokens.collect())),
            Some(t) => Err(Error::Checkpoint(format!(
                "line {n}: expected `{tag}`, found `{t}`"
            ))),
            None => Err(Error::Checkpoint(format!(
                "line {n}: expected `{tag}`, found empty line"
            ))),
        }
    }

    fn floats(&mut self, tag: &str, want: usize) -> Result<Vec<f64>> {
        let (n, tokens) = self.tagged(tag)?;
        if tokens.len() != want {
            return Err(Error::Checkpoint(format!(
                "line {n}: `{tag}` has {} values, expected {want}",
                tokens.len()
            )));
        }
        tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Checkpoint(format!("line {n}: `{t}` is not a number")))
            })
            .collect()
    }
}

pub fn policy_from_str(text: &str) -> Result<PolicyNetwork> {
    let mut r = Reader::new(text);
    let (n, first) = r.next_line()?;
    if first.trim_end() != HEADER {
        return Err(Error::Checkpoint(format!(
            "line {n}: not a `{HEADER}` file (found `{first}`)"
        )));
    }
    let (n, act) = r.tagged("activation")?;
    if act != ["tanh"] {
        return Err(Error::Checkpoint(format!(
            "line {n}: unsupported activation {act:?}"
        )));
    }
    let (n, dim_tokens) = r.tagged("dims")?;
    let dims: Vec<usize> = dim_tokens
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .ok()
                .filter(|&d| d >= 1)
                .ok_or_else(|| Error::Checkpoint(format!("line {n}: bad dimension `{t}`")))
        })
        .collect::<Result<_>>()?;
    if dims.len() < 2 {
        return Err(Error::Checkpoint(format!(
            "line {n}: need at least input and output dimensions"
        )));
    }
    let out_dim = *dims.last().unwrap();
    if out_dim != N_JOINTS {
        return Err(Error::Checkpoint(format!(
            "line {n}: output dimension {out_dim} does not match the {N_JOINTS} actuated joints"
        )));
    }

    let mean = r.floats("norm_mean", dims[0])?;
    let var = r.floats("norm_var", dims[0])?;
    let log_std = r.floats("log_std", out_dim)?;

    let mut params = Vec::new();
    for l in 0..dims.len() - 1 {
        let (nin, nout) = (dims[l], dims[l + 1]);
        let (n, head) = r.tagged("weight")?;
        if head != [l.to_string(), nout.to_string(), nin.to_string()] {
            return Err(Error::Checkpoint(format!(
                "line {n}: expected `weight {l} {nout} {nin}`, found `weight {}`",
                head.join(" ")
            )));
        }
        for _ in 0..nout {
            params.extend(r.floats("row", nin)?);
        }
        let (n, head) = r.tagged("bias")?;
        if head != [l.to_string(), nout.to_string()] {
            return Err(Error::Checkpoint(format!(
                "line {n}: expected `bias {l} {nout}`, found `bias {}`",
                head.join(" ")
            )));
        }
        params.extend(r.floats("row", nout)?);
    }
    if let Ok((n, line)) = r.next_line() {
        return Err(Error::Checkpoint(format!(
            "line {n}: trailing content `{line}`"
        )));
    }

    let net = Mlp::from_params(&dims, params)
        .map_err(|e| Error::Checkpoint(format!("parameter assembly: {e}")))?;
    let clip = Normalizer::new(dims[0]).clip();
    let normalizer = Normalizer::from_stats(1.0, mean, var, clip)
        .map_err(|e| Error::Checkpoint(format!("normalizer statistics: {e}")))?;
    Ok(PolicyNetwork {
        net,
        action_bias: [0.0; N_JOINTS],
        log_std,
        normalizer,
    })
}

pub fn load_policy(path: &Path) -> Result<PolicyNetwork> {
    let text = fs::read_to_string(path)?;
    policy_from_str(&text).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
