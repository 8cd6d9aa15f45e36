//! Standard compartment models.

use std::fmt;
use std::str::FromStr;

use super::{ModelError, ModelSchema};

fn checked(schema: ModelSchema) -> Result<ModelSchema, ModelError> {
    schema.validate().into_result()?;
    Ok(schema)
}

/// S→I induced by I over one layer at `beta`, I→S at `delta`.
pub fn sis(beta: f64, delta: f64) -> Result<ModelSchema, ModelError> {
    checked(
        ModelSchema::new(["S", "I"])
            .with_node_rate(1, 0, delta)
            .with_layer("contact", 1, &[(0, 1, beta)]),
    )
}

/// S→I induced by I at `beta`, I→R at `delta`.
pub fn sir(beta: f64, delta: f64) -> Result<ModelSchema, ModelError> {
    checked(
        ModelSchema::new(["S", "I", "R"])
            .with_node_rate(1, 2, delta)
            .with_layer("contact", 1, &[(0, 1, beta)]),
    )
}

/// S→E induced by I at `beta`, then E→I at `sigma` and I→R at `delta`.
pub fn seir(beta: f64, sigma: f64, delta: f64) -> Result<ModelSchema, ModelError> {
    checked(
        ModelSchema::new(["S", "E", "I", "R"])
            .with_node_rate(1, 2, sigma)
            .with_node_rate(2, 3, delta)
            .with_layer("contact", 2, &[(0, 1, beta)]),
    )
}

/// `L` competing infections: states `S, I1..IL`; layer `k` is induced by
/// `Ik` and moves S→Ik at `betas[k]`; every `Ik` recovers to S at `delta`.
pub fn competitive_sis(betas: &[f64], delta: f64) -> Result<ModelSchema, ModelError> {
    if betas.is_empty() {
        return Err(ModelError::Domain(
            "competitive SIS needs at least one layer".into(),
        ));
    }
    let names = std::iter::once("S".to_string()).chain((1..=betas.len()).map(|k| format!("I{k}")));
    let mut schema = ModelSchema::new(names);
    for (k, &beta) in betas.iter().enumerate() {
        schema = schema.with_node_rate(k + 1, 0, delta).with_layer(
            format!("layer{}", k + 1),
            k + 1,
            &[(0, k + 1, beta)],
        );
    }
    checked(schema)
}

/// A named preset with its parameters, parseable from strings like
/// `sir:beta=0.005,delta=0.01` or `competitive_sis:beta=1/0.8,delta=1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Sis { beta: f64, delta: f64 },
    Sir { beta: f64, delta: f64 },
    Seir { beta: f64, sigma: f64, delta: f64 },
    CompetitiveSis { betas: Vec<f64>, delta: f64 },
}

impl Preset {
    pub fn schema(&self) -> Result<ModelSchema, ModelError> {
        match self {
            Preset::Sis { beta, delta } => sis(*beta, *delta),
            Preset::Sir { beta, delta } => sir(*beta, *delta),
            Preset::Seir { beta, sigma, delta } => seir(*beta, *sigma, *delta),
            Preset::CompetitiveSis { betas, delta } => competitive_sis(betas, *delta),
        }
    }

    pub fn layer_count(&self) -> usize {
        match self {
            Preset::CompetitiveSis { betas, .. } => betas.len(),
            _ => 1,
        }
    }
}

impl FromStr for Preset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| ModelError::Config(format!("preset {s:?}: {msg}"));
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut beta: Option<Vec<f64>> = None;
        let mut sigma = None;
        let mut delta = None;
        let mut layers = None;
        for kv in args.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad number {v:?}")))
            };
            match k.trim() {
                "beta" => beta = Some(v.split('/').map(num).collect::<Result<_, _>>()?),
                "sigma" => sigma = Some(num(v)?),
                "delta" => delta = Some(num(v)?),
                "layers" => {
                    layers = Some(
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| bad(format!("bad layer count {v:?}")))?,
                    )
                }
                other => return Err(bad(format!("unknown parameter {other:?}"))),
            }
        }
        let delta = delta.ok_or_else(|| bad("missing delta".into()))?;
        let beta = beta.ok_or_else(|| bad("missing beta".into()))?;
        let single = || -> Result<f64, ModelError> {
            match beta.as_slice() {
                [b] => Ok(*b),
                _ => Err(bad("expected a single beta".into())),
            }
        };
        match name.trim() {
            "sis" => Ok(Preset::Sis {
                beta: single()?,
                delta,
            }),
            "sir" => Ok(Preset::Sir {
                beta: single()?,
                delta,
            }),
            "seir" => Ok(Preset::Seir {
                beta: single()?,
                sigma: sigma.ok_or_else(|| bad("missing sigma".into()))?,
                delta,
            }),
            "competitive_sis" => {
                let betas = match (layers, beta.len()) {
                    (Some(l), 1) => vec![beta[0]; l],
                    (Some(l), n) if l != n => {
                        return Err(bad(format!("{n} betas given for {l} layers")))
                    }
                    _ => beta,
                };
                Ok(Preset::CompetitiveSis { betas, delta })
            }
            other => Err(bad(format!("unknown model {other:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Sis { beta, delta } => write!(f, "sis:beta={beta},delta={delta}"),
            Preset::Sir { beta, delta } => write!(f, "sir:beta={beta},delta={delta}"),
            Preset::Seir { beta, sigma, delta } => {
                write!(f, "seir:beta={beta},sigma={sigma},delta={delta}")
            }
            Preset::CompetitiveSis { betas, delta } => {
                let b: Vec<String> = betas.iter().map(f64::to_string).collect();
                write!(f, "competitive_sis:beta={},delta={delta}", b.join("/"))
            }
        }
    }
}
