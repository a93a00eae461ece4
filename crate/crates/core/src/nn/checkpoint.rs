//! JSON checkpoint container. Floats are written in shortest round-trip form and parsed
//! exactly, so save → load reproduces every parameter bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Mlp, NetworkConfig, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "polysweep-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Row-major fan_in × fan_out.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Container {
    format: String,
    network: NetworkConfig,
    train: Option<TrainConfig>,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub mlp: Mlp,
    pub train: Option<TrainConfig>,
}

pub fn write_checkpoint<W: Write>(mlp: &Mlp, train: Option<&TrainConfig>, mut out: W) -> Result<()> {
    if !mlp.all_finite() {
        return Err(Error::invalid("checkpoint", "parameters contain NaN or Inf"));
    }
    let container = Container {
        format: CHECKPOINT_FORMAT.into(),
        network: mlp.config,
        train: train.copied(),
        layers: mlp
            .weights
            .iter()
            .zip(&mlp.biases)
            .map(|(w, b)| Layer {
                fan_in: w.nrows(),
                fan_out: w.ncols(),
                weights: w.iter().copied().collect(),
                bias: b.to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer(&mut out, &container)?;
    out.write_all(b"\n").map_err(|e| Error::io("<checkpoint>", e))?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Checkpoint> {
    let c: Container = serde_json::from_reader(reader)?;
    if c.format != CHECKPOINT_FORMAT {
        return Err(Error::invalid("checkpoint", format!("unsupported format {:?}", c.format)));
    }
    let mut weights = Vec::with_capacity(c.layers.len());
    let mut biases = Vec::with_capacity(c.layers.len());
    for layer in c.layers {
        weights.push(
            Array2::from_shape_vec((layer.fan_in, layer.fan_out), layer.weights)
                .map_err(|e| Error::invalid("checkpoint", e.to_string()))?,
        );
        biases.push(Array1::from(layer.bias));
    }
    Ok(Checkpoint {
        mlp: Mlp::from_parts(c.network, weights, biases)?,
        train: c.train,
    })
}

pub fn save_checkpoint(mlp: &Mlp, train: Option<&TrainConfig>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(mlp, train, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Mode};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), width in 1usize..12, depth in 1usize..4, scale in 1e-6f64..1e6) {
            let cfg = NetworkConfig {
                width,
                depth,
                ensemble_size: 3,
                activation: Activation::Sigmoid,
                dropout_rate: 0.2,
                init_seed: seed,
            };
            let mut mlp = Mlp::init(&cfg).unwrap();
            for w in mlp.weights.iter_mut() {
                w.mapv_inplace(|v| v * scale / 3.0);
            }
            let train = TrainConfig::default();
            let mut buf = Vec::new();
            write_checkpoint(&mlp, Some(&train), &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            let bits = |m: &Mlp| m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.mlp), bits(&mlp));
            prop_assert_eq!(back.train, Some(train));
            let xs = [-1.0, 0.0, 0.37];
            prop_assert_eq!(
                back.mlp.forward(&xs, Mode::McEval { mask_seed: 4 }).unwrap(),
                mlp.forward(&xs, Mode::McEval { mask_seed: 4 }).unwrap()
            );
        }
    }

    #[test]
    fn rejects_foreign_format() {
        let text = r#"{"format":"other/1","network":{"width":1,"depth":1,"ensemble_size":1,"activation":"relu","dropout_rate":0.0,"init_seed":0},"train":null,"layers":[]}"#;
        assert!(read_checkpoint(text.as_bytes()).is_err());
    }
}
