//! Network JSON documents.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tessera::nalgebra::{DMatrix, DVector};
use tessera::{Activation, BatchNormState, Layer, Network};

use crate::error::{CliError, Result};
use crate::{files, json};

pub const NETWORK_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    format_version: Option<u64>,
    input_dim: usize,
    layers: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: ActivationName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default)]
    residual: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch_norm: Option<BatchNormDoc>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActivationName {
    Relu,
    Abs,
    LeakyRelu,
    Identity,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchNormDoc {
    mu: Vec<f64>,
    nu: Vec<f64>,
    epsilon: f64,
}

fn layer_from_doc(i: usize, doc: LayerDoc) -> Result<Layer> {
    let rows = doc.weight.len();
    let cols = doc.weight.first().map_or(0, Vec::len);
    if let Some((r, row)) = doc.weight.iter().enumerate().find(|(_, row)| row.len() != cols) {
        return Err(CliError::Schema(format!(
            "layer {i}: weight row {r} has {} entries, expected {cols}",
            row.len()
        )));
    }
    let activation = match (doc.activation, doc.alpha) {
        (ActivationName::LeakyRelu, Some(alpha)) => Activation::LeakyRelu(alpha),
        (ActivationName::LeakyRelu, None) => {
            return Err(CliError::Schema(format!("layer {i}: leaky_relu requires field `alpha`")));
        }
        (_, Some(_)) => {
            return Err(CliError::Schema(format!("layer {i}: field `alpha` only applies to leaky_relu")));
        }
        (ActivationName::Relu, None) => Activation::Relu,
        (ActivationName::Abs, None) => Activation::Abs,
        (ActivationName::Identity, None) => Activation::Identity,
    };
    let weight = DMatrix::from_fn(rows, cols, |r, c| doc.weight[r][c]);
    let mut layer = Layer::new(weight, DVector::from_vec(doc.bias), activation).with_residual(doc.residual);
    if let Some(bn) = doc.batch_norm {
        layer = layer.with_batch_norm(BatchNormState {
            mu: DVector::from_vec(bn.mu),
            nu: DVector::from_vec(bn.nu),
            epsilon: bn.epsilon,
        });
    }
    Ok(layer)
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<Network> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| CliError::Schema(format!("network: {e}")))?;
    if let Some(v) = doc.format_version {
        if v != NETWORK_FORMAT_VERSION {
            return Err(CliError::Schema(format!("network: unsupported format_version {v}")));
        }
    }
    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let layer: LayerDoc = serde_json::from_value(v).map_err(|e| CliError::Schema(format!("layer {i}: {e}")))?;
            layer_from_doc(i, layer)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Network::new(doc.input_dim, layers)?)
}

pub fn network_value(net: &Network) -> Value {
    let layers: Vec<Value> = net
        .layers()
        .iter()
        .map(|l| {
            let mut obj = serde_json::Map::new();
            obj.insert("weight".into(), json::matrix(&l.weight));
            obj.insert("bias".into(), json::vector(&l.bias));
            obj.insert("activation".into(), Value::from(l.activation.name()));
            if let Activation::LeakyRelu(alpha) = l.activation {
                obj.insert("alpha".into(), json::num(alpha));
            }
            obj.insert("residual".into(), Value::Bool(l.residual));
            if let Some(bn) = &l.batch_norm {
                obj.insert(
                    "batch_norm".into(),
                    serde_json::json!({
                        "mu": json::vector(&bn.mu),
                        "nu": json::vector(&bn.nu),
                        "epsilon": json::num(bn.epsilon),
                    }),
                );
            }
            Value::Object(obj)
        })
        .collect();
    serde_json::json!({
        "format_version": NETWORK_FORMAT_VERSION,
        "input_dim": net.input_dim(),
        "layers": layers,
    })
}

pub fn network_to_bytes(net: &Network) -> Vec<u8> {
    json::to_bytes(&network_value(net))
}

pub fn load_network(path: &Path) -> Result<Network> {
    parse_network(&files::read_string(path)?).map_err(|e| match e {
        CliError::Schema(m) => CliError::format(path, m),
        CliError::Core(tessera::Error::InvalidNetwork(m)) => CliError::format(path, m),
        other => other,
    })
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    files::write_atomic(path, &network_to_bytes(net))
}
