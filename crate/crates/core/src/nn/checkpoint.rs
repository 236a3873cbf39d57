//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "VTSCKPT\0" | u32 version | u32 entry count
//! entry: u32 name length | name bytes | u32 layer count
//!        layer: u32 in | u32 out | u8 activation | in*out f64 weights | out f64 bias
//!        u8 has-optimizer
//!        optimizer: f64 lr | f64 beta1 | f64 beta2 | f64 eps | u64 step
//!                   first-moment tensors | second-moment tensors (same order as layers)
//! ```
//!
//! All floats are written as raw IEEE-754 bits so a round trip is bit-exact.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::network::{Gradients, Layer, LayerGrad, Network};
use super::optim::{Adam, AdamConfig};
use super::{Activation, NnError};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"VTSCKPT\0";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub network: Network,
    pub optimizer: Option<Adam>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub entries: Vec<CheckpointEntry>,
}

impl Checkpoint {
    pub fn push(&mut self, name: &str, network: &Network, optimizer: Option<&Adam>) {
        self.entries.push(CheckpointEntry {
            name: name.to_string(),
            network: network.clone(),
            optimizer: optimizer.cloned(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&CheckpointEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn network(&self, name: &str) -> Result<&Network, NnError> {
        self.get(name)
            .map(|e| &e.network)
            .ok_or_else(|| NnError::Checkpoint(format!("missing entry '{name}'")))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(MAGIC)?;
        put_u32(w, FORMAT_VERSION)?;
        put_u32(w, self.entries.len() as u32)?;
        for e in &self.entries {
            put_u32(w, e.name.len() as u32)?;
            w.write_all(e.name.as_bytes())?;
            let layers = e.network.layers();
            put_u32(w, layers.len() as u32)?;
            for l in layers {
                put_u32(w, l.input_dim() as u32)?;
                put_u32(w, l.output_dim() as u32)?;
                w.write_all(&[l.activation.tag()])?;
                put_floats(w, l.weights.iter())?;
                put_floats(w, l.bias.iter())?;
            }
            match &e.optimizer {
                None => w.write_all(&[0])?,
                Some(opt) => {
                    w.write_all(&[1])?;
                    let c = opt.config;
                    put_floats(w, [c.learning_rate, c.beta1, c.beta2, c.epsilon].iter())?;
                    w.write_all(&opt.step.to_le_bytes())?;
                    for moments in [&opt.first_moment, &opt.second_moment] {
                        for g in &moments.layers {
                            put_floats(w, g.weights.iter())?;
                            put_floats(w, g.bias.iter())?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = get_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported format version {version}")));
        }
        let count = get_u32(r)?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = get_u32(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| NnError::Checkpoint(e.to_string()))?;
            let n_layers = get_u32(r)? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let input = get_u32(r)? as usize;
                let output = get_u32(r)? as usize;
                let tag = get_u8(r)?;
                let activation = Activation::from_tag(tag)
                    .ok_or_else(|| NnError::Checkpoint(format!("unknown activation tag {tag}")))?;
                let weights = get_matrix(r, input, output)?;
                let bias = Array1::from(get_floats(r, output)?);
                layers.push(Layer { weights, bias, activation });
            }
            let network = Network::from_layers(layers)?;
            let optimizer = match get_u8(r)? {
                0 => None,
                1 => {
                    let c = get_floats(r, 4)?;
                    let mut step = [0u8; 8];
                    r.read_exact(&mut step)?;
                    let read_moments = |r: &mut R| -> Result<Gradients, NnError> {
                        let mut out = Vec::new();
                        for l in network.layers() {
                            let weights = get_matrix(r, l.input_dim(), l.output_dim())?;
                            let bias = Array1::from(get_floats(r, l.output_dim())?);
                            out.push(LayerGrad { weights, bias });
                        }
                        Ok(Gradients { layers: out })
                    };
                    let first_moment = read_moments(r)?;
                    let second_moment = read_moments(r)?;
                    Some(Adam {
                        config: AdamConfig {
                            learning_rate: c[0],
                            beta1: c[1],
                            beta2: c[2],
                            epsilon: c[3],
                        },
                        step: u64::from_le_bytes(step),
                        first_moment,
                        second_moment,
                    })
                }
                t => return Err(NnError::Checkpoint(format!("bad optimizer flag {t}"))),
            };
            entries.push(CheckpointEntry { name, network, optimizer });
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NnError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NnError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_floats<'a, W: Write>(w: &mut W, vals: impl Iterator<Item = &'a f64>) -> std::io::Result<()> {
    for v in vals {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    Ok(())
}

fn get_u8<R: Read>(r: &mut R) -> std::io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_floats<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_bits(u64::from_le_bytes(b)));
    }
    Ok(out)
}

fn get_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>, NnError> {
    Array2::from_shape_vec((rows, cols), get_floats(r, rows * cols)?)
        .map_err(|e| NnError::Checkpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_unknown_version() {
        let mut bytes = Vec::new();
        Checkpoint::default().write_to(&mut bytes).unwrap();
        bytes[8] = 99;
        assert!(matches!(
            Checkpoint::read_from(&mut bytes.as_slice()),
            Err(NnError::Checkpoint(_))
        ));
    }

    #[test]
    fn round_trip_preserves_optimizer_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::mlp(&[3, 4, 2], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let mut opt = Adam::new(&net, AdamConfig::default());
        let mut g = Gradients::zeros_like(&net);
        g.layers[1].bias.fill(0.25);
        opt.step(&mut net, &g).unwrap();
        let mut ck = Checkpoint::default();
        ck.push("critic", &net, Some(&opt));
        ck.push("target", &net, None);
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ck);
    }
}
