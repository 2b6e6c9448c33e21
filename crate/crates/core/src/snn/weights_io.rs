//! `SNNW` weight files.
//!
//! ```text
//! "SNNW" | version u16 | variant u8 (0 float, 1 quantized) | layers u16
//! per layer:
//!   kind u8 (0 conv3x3, 1 fully connected)
//!   conv: in_ch u16, out_ch u16, in_h u16, in_w u16, stride u8
//!   fc:   inputs u32, outputs u32
//!   quantized: scale_exp i8, decay_q u16, threshold_q i32,
//!              bias i32 x channels, weights i8 x n
//!   float:     decay f32, threshold f32, has_bn u8,
//!              bias f32 x channels, weights f32 x n,
//!              [eps f32, gamma, beta, mean, var: f32 x channels]
//! ```
//! All multi-byte fields are little-endian; weights are row-major
//! (`[out][in][ky][kx]` for conv, `[out][in]` for fc).

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{
    BatchNorm, FloatLayer, FloatNetwork, LayerShape, Network, QuantizedLayer, QuantizedNetwork, Result, SnnError,
};

const MAGIC: &[u8; 4] = b"SNNW";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightFile {
    Float(FloatNetwork),
    Quantized(QuantizedNetwork),
}

fn format_err(e: io::Error) -> SnnError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        SnnError::Format("truncated file".into())
    } else {
        SnnError::Io(e)
    }
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| SnnError::Format(format!("{what} {v} does not fit the file field")))
}

fn write_shape<W: Write>(out: &mut W, shape: &LayerShape) -> Result<()> {
    match *shape {
        LayerShape::Conv3x3 {
            in_channels,
            out_channels,
            in_height,
            in_width,
            stride,
        } => {
            out.write_u8(0)?;
            out.write_u16::<LittleEndian>(narrow(in_channels, "in_channels")?)?;
            out.write_u16::<LittleEndian>(narrow(out_channels, "out_channels")?)?;
            out.write_u16::<LittleEndian>(narrow(in_height, "in_height")?)?;
            out.write_u16::<LittleEndian>(narrow(in_width, "in_width")?)?;
            out.write_u8(narrow(stride, "stride")?)?;
        }
        LayerShape::FullyConnected { inputs, outputs } => {
            out.write_u8(1)?;
            out.write_u32::<LittleEndian>(narrow(inputs, "inputs")?)?;
            out.write_u32::<LittleEndian>(narrow(outputs, "outputs")?)?;
        }
    }
    Ok(())
}

fn read_shape<R: Read>(input: &mut R) -> Result<LayerShape> {
    let shape = match input.read_u8().map_err(format_err)? {
        0 => LayerShape::Conv3x3 {
            in_channels: input.read_u16::<LittleEndian>().map_err(format_err)? as usize,
            out_channels: input.read_u16::<LittleEndian>().map_err(format_err)? as usize,
            in_height: input.read_u16::<LittleEndian>().map_err(format_err)? as usize,
            in_width: input.read_u16::<LittleEndian>().map_err(format_err)? as usize,
            stride: input.read_u8().map_err(format_err)? as usize,
        },
        1 => LayerShape::FullyConnected {
            inputs: input.read_u32::<LittleEndian>().map_err(format_err)? as usize,
            outputs: input.read_u32::<LittleEndian>().map_err(format_err)? as usize,
        },
        k => return Err(SnnError::Format(format!("unknown layer kind {k}"))),
    };
    shape.validate()?;
    Ok(shape)
}

fn write_f32s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        out.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

fn read_f32s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| input.read_f32::<LittleEndian>().map(f64::from).map_err(format_err))
        .collect()
}

pub fn write_weights<W: Write>(file: &WeightFile, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    match file {
        WeightFile::Float(net) => {
            out.write_u8(0)?;
            out.write_u16::<LittleEndian>(narrow(net.layers().len(), "layer count")?)?;
            for layer in net.layers() {
                write_shape(&mut out, &layer.shape)?;
                out.write_f32::<LittleEndian>(layer.decay as f32)?;
                out.write_f32::<LittleEndian>(layer.threshold as f32)?;
                out.write_u8(layer.batch_norm.is_some() as u8)?;
                write_f32s(&mut out, &layer.bias)?;
                write_f32s(&mut out, &layer.weights)?;
                if let Some(bn) = &layer.batch_norm {
                    out.write_f32::<LittleEndian>(bn.eps as f32)?;
                    for v in [&bn.gamma, &bn.beta, &bn.mean, &bn.var] {
                        write_f32s(&mut out, v)?;
                    }
                }
            }
        }
        WeightFile::Quantized(net) => {
            out.write_u8(1)?;
            out.write_u16::<LittleEndian>(narrow(net.layers().len(), "layer count")?)?;
            for layer in net.layers() {
                write_shape(&mut out, &layer.shape)?;
                let e = i8::try_from(layer.scale_exp)
                    .map_err(|_| SnnError::Format(format!("scale exponent {} out of i8 range", layer.scale_exp)))?;
                out.write_i8(e)?;
                out.write_u16::<LittleEndian>(layer.decay_q)?;
                out.write_i32::<LittleEndian>(layer.threshold_q)?;
                for &b in &layer.bias {
                    out.write_i32::<LittleEndian>(b)?;
                }
                let bytes: Vec<u8> = layer.weights.iter().map(|&w| w as u8).collect();
                out.write_all(&bytes)?;
            }
        }
    }
    Ok(())
}

pub fn read_weights<R: Read>(mut input: R) -> Result<WeightFile> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(format_err)?;
    if &magic != MAGIC {
        return Err(SnnError::Format("bad magic, expected SNNW".into()));
    }
    let version = input.read_u16::<LittleEndian>().map_err(format_err)?;
    if version != VERSION {
        return Err(SnnError::Format(format!("unsupported version {version}")));
    }
    let variant = input.read_u8().map_err(format_err)?;
    let count = input.read_u16::<LittleEndian>().map_err(format_err)? as usize;

    let file = match variant {
        0 => {
            let mut layers = Vec::with_capacity(count);
            for _ in 0..count {
                let shape = read_shape(&mut input)?;
                let decay = input.read_f32::<LittleEndian>().map_err(format_err)? as f64;
                let threshold = input.read_f32::<LittleEndian>().map_err(format_err)? as f64;
                let has_bn = input.read_u8().map_err(format_err)? != 0;
                let channels = shape.bias_len();
                let bias = read_f32s(&mut input, channels)?;
                let weights = read_f32s(&mut input, shape.weight_len())?;
                let batch_norm = if has_bn {
                    let eps = input.read_f32::<LittleEndian>().map_err(format_err)? as f64;
                    Some(BatchNorm {
                        gamma: read_f32s(&mut input, channels)?,
                        beta: read_f32s(&mut input, channels)?,
                        mean: read_f32s(&mut input, channels)?,
                        var: read_f32s(&mut input, channels)?,
                        eps,
                    })
                } else {
                    None
                };
                let layer = FloatLayer {
                    shape,
                    weights,
                    bias,
                    batch_norm,
                    decay,
                    threshold,
                };
                layer.validate()?;
                layers.push(layer);
            }
            WeightFile::Float(Network::new(layers)?)
        }
        1 => {
            let mut layers = Vec::with_capacity(count);
            for _ in 0..count {
                let shape = read_shape(&mut input)?;
                let scale_exp = input.read_i8().map_err(format_err)? as i32;
                let decay_q = input.read_u16::<LittleEndian>().map_err(format_err)?;
                let threshold_q = input.read_i32::<LittleEndian>().map_err(format_err)?;
                let bias = (0..shape.bias_len())
                    .map(|_| input.read_i32::<LittleEndian>().map_err(format_err))
                    .collect::<Result<Vec<_>>>()?;
                let mut raw = vec![0u8; shape.weight_len()];
                input.read_exact(&mut raw).map_err(format_err)?;
                let layer = QuantizedLayer {
                    shape,
                    weights: raw.into_iter().map(|b| b as i8).collect(),
                    bias,
                    decay_q,
                    threshold_q,
                    scale_exp,
                };
                layer.validate()?;
                layers.push(layer);
            }
            WeightFile::Quantized(Network::new(layers)?)
        }
        v => return Err(SnnError::Format(format!("unknown variant {v}"))),
    };
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(SnnError::Format("trailing bytes after last layer".into()));
    }
    Ok(file)
}
