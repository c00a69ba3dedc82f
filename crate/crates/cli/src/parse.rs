//! Parsers for `--state` and `--network` arguments.

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64 as C64;
use std::path::Path;
use wmode::families::{self, ClassTag};
use wmode::fock::{DensityMatrix, StateSnapshot};
use wmode::optics::NetworkSpec;
use wmode::witness::w_state;

fn at(spec: &str, col: usize, msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("bad state spec `{spec}` at column {}: {msg}", col + 1)
}

fn real(spec: &str, col: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| at(spec, col, format!("expected a number, found `{s}`")))
}

fn complex(spec: &str, col: usize, s: &str) -> Result<C64> {
    s.trim().parse::<C64>().map_err(|_| at(spec, col, format!("expected a complex number, found `{s}`")))
}

/// `kind:args[@q=VALUE]` with kinds `werner:p`, `w`, `mm`, `fs|bisep22|bisep13:e1,e2,e3,e4`
/// (complex amplitudes such as `0.1+0.2i`) and `file:path` (state snapshot JSON).
/// The optional suffix mixes in vacuum down to single-excitation weight `VALUE`.
pub fn parse_state(spec: &str) -> Result<DensityMatrix> {
    let (body, dilution) = match spec.rfind("@q=") {
        Some(i) => (&spec[..i], Some((i + 3, &spec[i + 3..]))),
        None => (spec, None),
    };
    let (kind, args, args_col) = match body.find(':') {
        Some(i) => (&body[..i], &body[i + 1..], i + 1),
        None => (body, "", body.len()),
    };
    let rho = match kind {
        "werner" => families::werner_like(real(spec, args_col, args)?).map_err(|e| at(spec, args_col, e))?,
        "w" => w_state(4)?.density(),
        "mm" => families::werner_like(0.0)?,
        "fs" | "bisep22" | "bisep13" => {
            let mut eps = [C64::default(); 4];
            let mut col = args_col;
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 4 {
                bail!(at(spec, args_col, format!("expected 4 amplitudes, found {}", parts.len())));
            }
            for (k, p) in parts.iter().enumerate() {
                eps[k] = complex(spec, col, p)?;
                col += p.len() + 1;
            }
            let tag = ClassTag::parse(kind)?;
            let pt = match tag {
                ClassTag::FullySeparable => families::fully_separable(eps)?,
                ClassTag::Biseparable2x2 => families::bisep_2x2(eps)?,
                ClassTag::Biseparable1x3 => families::bisep_1x3(eps)?,
            };
            pt.state.density()
        }
        "file" => {
            let text = std::fs::read_to_string(args).with_context(|| format!("reading state file {args}"))?;
            StateSnapshot::from_json(&text)?.to_density()?
        }
        _ => bail!(at(spec, 0, format!("unknown state kind `{kind}`"))),
    };
    match dilution {
        Some((col, v)) => Ok(families::dilute(&rho, real(spec, col, v)?).map_err(|e| at(spec, col, e))?),
        None => Ok(rho),
    }
}

/// `balanced`, `split:T`, `loss:T`, `lossy:T` joined with `+`, or a JSON file.
/// `split:T` sets the transmission probability of all beamsplitters, `loss:T`
/// puts transmission probability `T` on every path and `lossy:T` on input arm 1.
pub fn parse_network(spec: &str) -> Result<NetworkSpec> {
    if spec.ends_with(".json") || Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).with_context(|| format!("reading network file {spec}"))?;
        return Ok(NetworkSpec::from_json(&text)?);
    }
    let mut parts: Vec<(&str, Option<f64>)> = Vec::new();
    for item in spec.split('+') {
        let (k, v) = match item.split_once(':') {
            Some((k, v)) => (k, Some(v.parse::<f64>().map_err(|_| anyhow!("bad network value `{v}` in `{spec}`"))?)),
            None => (item, None),
        };
        parts.push((k, v));
    }
    let split = parts.iter().find(|p| p.0 == "split").and_then(|p| p.1).unwrap_or(0.5);
    let mut net = NetworkSpec::with_splitting(split);
    for (k, v) in parts {
        let prob = |v: Option<f64>| -> Result<f64> {
            let t = v.ok_or_else(|| anyhow!("`{k}` needs a value"))?;
            if !(0.0..=1.0).contains(&t) {
                bail!("probability {t} outside [0, 1]");
            }
            Ok(t)
        };
        match k {
            "balanced" | "ideal" => {}
            "split" => {
                prob(v)?;
            }
            "loss" => net = net.with_balanced_loss(prob(v)?),
            "lossy" => net = net.with_lossy_input(0, prob(v)?),
            _ => bail!("unknown network element `{k}` in `{spec}`"),
        }
    }
    net.validate()?;
    Ok(net)
}

/// Common `|T|^2` of all paths, if the losses are balanced.
pub fn uniform_transmission(net: &NetworkSpec) -> Option<f64> {
    let t: Vec<f64> = net.transmissions.iter().flatten().map(|t| t[0] * t[0] + t[1] * t[1]).collect();
    let first = t[0];
    t.iter().all(|x| (x - first).abs() < 1e-12).then_some(first)
}
