//! JSON network documents.
//!
//! `W`/`b` hold the f64 view (shortest round-trip decimals). Networks built
//! at higher precision also carry an `exact` section with decimal strings.

use serde::{Deserialize, Serialize};

use super::{parse_error, Layer, NetMeta, Network};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub dims: Vec<usize>,
    pub layers: Vec<DocLayer>,
    #[serde(default)]
    pub meta: NetMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocLayer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSection {
    pub bits: u32,
    pub layers: Vec<ExactLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactLayer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<String>>,
    pub b: Vec<String>,
}

pub fn to_document<T: Real>(net: &Network<T>) -> String {
    let layers = net
        .layers()
        .iter()
        .map(|l| DocLayer {
            w: (0..l.rows).map(|i| l.row(i).iter().map(|v| v.to_f64()).collect()).collect(),
            b: l.b.iter().map(|v| v.to_f64()).collect(),
        })
        .collect();
    let exact = T::MULTIPRECISION.then(|| ExactSection {
        bits: net.bits(),
        layers: net
            .layers()
            .iter()
            .map(|l| ExactLayer {
                w: (0..l.rows)
                    .map(|i| l.row(i).iter().map(|v| v.to_exact_string()).collect())
                    .collect(),
                b: l.b.iter().map(|v| v.to_exact_string()).collect(),
            })
            .collect(),
    });
    let doc = NetworkDocument { dims: net.dims(), layers, meta: net.meta.clone(), exact };
    serde_json::to_string_pretty(&doc).expect("documents always serialize")
}

fn check_shape<U>(dims: &[usize], l: usize, w: &[Vec<U>], b: &[U], section: &str) -> Result<()> {
    let (rows, cols) = (dims[l + 1], dims[l]);
    if w.len() != rows {
        return Err(parse_error(
            format!("{section}layers[{l}].W"),
            format!("expected {rows} rows, found {}", w.len()),
        ));
    }
    for (i, r) in w.iter().enumerate() {
        if r.len() != cols {
            return Err(parse_error(
                format!("{section}layers[{l}].W[{i}]"),
                format!("expected {cols} columns, found {}", r.len()),
            ));
        }
    }
    if b.len() != rows {
        return Err(parse_error(
            format!("{section}layers[{l}].b"),
            format!("expected {rows} entries, found {}", b.len()),
        ));
    }
    Ok(())
}

/// Parses a document. With `T` multiprecision and an `exact` section
/// present, weights are read from the exact strings at the stored precision.
pub fn from_document<T: Real>(text: &str) -> Result<Network<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: NetworkDocument = serde_path_to_error::deserialize(de)
        .map_err(|e| parse_error(e.path().to_string(), e.inner().to_string()))?;
    if doc.dims.len() != doc.layers.len() + 1 {
        return Err(parse_error(
            "dims",
            format!("{} entries for {} layers", doc.dims.len(), doc.layers.len()),
        ));
    }
    if doc.layers.is_empty() {
        return Err(parse_error("layers", "at least one layer is required"));
    }
    for (l, layer) in doc.layers.iter().enumerate() {
        check_shape(&doc.dims, l, &layer.w, &layer.b, "")?;
    }
    let exact = doc.exact.as_ref().filter(|_| T::MULTIPRECISION);
    let mut layers = Vec::with_capacity(doc.layers.len());
    match exact {
        Some(ex) => {
            if ex.layers.len() != doc.layers.len() {
                return Err(parse_error("exact.layers", "layer count differs from layers"));
            }
            for (l, layer) in ex.layers.iter().enumerate() {
                check_shape(&doc.dims, l, &layer.w, &layer.b, "exact.")?;
                let parse = |s: &String, path: String| {
                    T::parse_exact(s, ex.bits)
                        .ok_or_else(|| parse_error(path, format!("not a number: {s:?}")))
                };
                let mut w = Vec::new();
                for (i, r) in layer.w.iter().enumerate() {
                    for (j, s) in r.iter().enumerate() {
                        w.push(parse(s, format!("exact.layers[{l}].W[{i}][{j}]"))?);
                    }
                }
                let b = layer
                    .b
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse(s, format!("exact.layers[{l}].b[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                layers.push(Layer { rows: doc.dims[l + 1], cols: doc.dims[l], w, b });
            }
        }
        None => {
            for (l, layer) in doc.layers.iter().enumerate() {
                let w = layer.w.iter().flatten().map(|&v| T::from_f64(v)).collect();
                let b = layer.b.iter().map(|&v| T::from_f64(v)).collect();
                layers.push(Layer { rows: doc.dims[l + 1], cols: doc.dims[l], w, b });
            }
        }
    }
    Network::new(layers, doc.meta).map_err(|e| parse_error("layers", e.to_string()))
}
