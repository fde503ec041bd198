use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

use super::bits::BitStream;

/// How each parameter is written on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Representation {
    /// IEEE-754 single precision.
    #[default]
    Float32,
    /// Two's complement, values truncated toward zero.
    Int32,
    /// Per-class scaled integers of `B` bits plus one gain per class.
    QuantizedInt,
    /// One bit per parameter: 1 is `+1`, 0 is `-1`.
    Sign,
}

impl Representation {
    fn code(self) -> u8 {
        match self {
            Representation::Float32 => 0,
            Representation::Int32 => 1,
            Representation::QuantizedInt => 2,
            Representation::Sign => 3,
        }
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float32" => Ok(Representation::Float32),
            "int32" => Ok(Representation::Int32),
            "quantized_int" | "quantized" => Ok(Representation::QuantizedInt),
            "sign" => Ok(Representation::Sign),
            other => Err(Error::InvalidArgument(format!("unknown codec representation {other:?}"))),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Float32 => "float32",
            Representation::Int32 => "int32",
            Representation::QuantizedInt => "quantized_int",
            Representation::Sign => "sign",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    representation: Representation,
    bitwidth: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self::FLOAT32
    }
}

impl CodecConfig {
    pub const FLOAT32: Self = Self { representation: Representation::Float32, bitwidth: 32 };
    pub const INT32: Self = Self { representation: Representation::Int32, bitwidth: 32 };
    pub const SIGN: Self = Self { representation: Representation::Sign, bitwidth: 1 };

    pub fn quantized(bitwidth: u32) -> Result<Self> {
        if !(2..=32).contains(&bitwidth) {
            return Err(Error::InvalidArgument(format!("quantizer bitwidth {bitwidth} outside [2, 32]")));
        }
        Ok(Self { representation: Representation::QuantizedInt, bitwidth })
    }

    /// `bitwidth` is only consulted for `QuantizedInt`.
    pub fn new(representation: Representation, bitwidth: u32) -> Result<Self> {
        match representation {
            Representation::Float32 => Ok(Self::FLOAT32),
            Representation::Int32 => Ok(Self::INT32),
            Representation::Sign => Ok(Self::SIGN),
            Representation::QuantizedInt => Self::quantized(bitwidth),
        }
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// Bits per parameter.
    pub fn width(&self) -> u32 {
        self.bitwidth
    }

    pub fn has_gains(&self) -> bool {
        self.representation == Representation::QuantizedInt
    }

    /// Codec byte in the model file header: representation in the top two
    /// bits, width in the low six.
    pub fn tag(&self) -> u8 {
        self.representation.code() << 6 | self.bitwidth as u8 & 0x3F
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        let width = (tag & 0x3F) as u32;
        let c = match tag >> 6 {
            0 => Self::FLOAT32,
            1 => Self::INT32,
            2 => Self::quantized(width)?,
            _ => Self::SIGN,
        };
        if c.tag() != tag {
            return Err(Error::Format(format!("invalid codec tag {tag:#04x}")));
        }
        Ok(c)
    }

    fn encode_value(&self, v: f64) -> Result<u64> {
        let w = self.bitwidth;
        match self.representation {
            Representation::Float32 => Ok((v as f32).to_bits() as u64),
            Representation::Sign => Ok(u64::from(v >= 0.0)),
            Representation::Int32 | Representation::QuantizedInt => {
                let t = v.trunc();
                let hi = ((1i64 << (w - 1)) - 1) as f64;
                let lo = -(1i64 << (w - 1)) as f64;
                if !(lo..=hi).contains(&t) {
                    return Err(Error::Overflow { value: v, bits: w });
                }
                Ok((t as i64 as u64) & ((1u64 << w) - 1))
            }
        }
    }

    fn decode_value(&self, raw: u64) -> f64 {
        let w = self.bitwidth;
        match self.representation {
            Representation::Float32 => {
                let v = f32::from_bits(raw as u32);
                if v.is_finite() {
                    v as f64
                } else {
                    0.0
                }
            }
            Representation::Sign => {
                if raw & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Representation::Int32 | Representation::QuantizedInt => {
                let shift = 64 - w;
                ((raw << shift) as i64 >> shift) as f64
            }
        }
    }
}

/// Writes `values` back to back at the codec width. For `QuantizedInt` the
/// values must already be the integers produced by [`quantize_up`].
pub fn serialize_bits(values: &[f64], codec: &CodecConfig) -> Result<BitStream> {
    let w = codec.width();
    let mut bits = BitStream::with_capacity(values.len() * w as usize);
    for &v in values {
        bits.push(codec.encode_value(v)?, w);
    }
    Ok(bits)
}

/// Inverse of [`serialize_bits`]. Float patterns that decode to NaN or an
/// infinity become 0.
pub fn deserialize_bits(bits: &BitStream, count: usize, codec: &CodecConfig) -> Result<Vec<f64>> {
    let w = codec.width() as usize;
    if bits.len() != count * w {
        return Err(Error::Format(format!("expected {} bits for {count} values, got {}", count * w, bits.len())));
    }
    Ok((0..count).map(|i| codec.decode_value(bits.read(i * w, w as u32))).collect())
}

/// Largest magnitude a `B`-bit quantized value may take.
pub fn quant_max(bitwidth: u32) -> i64 {
    (1i64 << (bitwidth - 1)) - 1
}

/// Scales `c` so its largest magnitude maps to `2^(B-1) - 1`, then truncates
/// toward zero. Returns the integers and the gain.
pub fn quantize_up(c: &[f64], bitwidth: u32) -> Result<(Vec<i64>, f64)> {
    CodecConfig::quantized(bitwidth)?;
    let peak = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return Err(if peak == 0.0 { Error::ZeroGain } else { Error::InvalidArgument("non-finite value".into()) });
    }
    let q = quant_max(bitwidth);
    let gain = q as f64 / peak;
    let ints = c
        .iter()
        .map(|&v| {
            if v.abs() == peak {
                q * v.signum() as i64
            } else {
                ((v * gain).trunc() as i64).clamp(-q, q)
            }
        })
        .collect();
    Ok((ints, gain))
}

pub fn scale_down(ints: &[i64], gain: f64) -> Result<Vec<f64>> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::InvalidArgument(format!("gain must be positive and finite, got {gain}")));
    }
    Ok(ints.iter().map(|&v| v as f64 / gain).collect())
}

/// Per-class quantized model: `K x d` integers and `K` gains.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub num_classes: usize,
    pub hd_dim: usize,
    pub bitwidth: u32,
    pub ints: Vec<i64>,
    pub gains: Vec<f64>,
}

impl QuantizedModel {
    /// Fails with [`Error::ZeroGain`] if any class vector is all zeros.
    pub fn from_prototypes(model: &ClassPrototypes, bitwidth: u32) -> Result<Self> {
        let mut ints = Vec::with_capacity(model.as_slice().len());
        let mut gains = Vec::with_capacity(model.num_classes());
        for row in model.rows() {
            let (q, g) = quantize_up(row, bitwidth)?;
            ints.extend(q);
            gains.push(g);
        }
        Ok(Self { num_classes: model.num_classes(), hd_dim: model.hd_dim(), bitwidth, ints, gains })
    }

    pub fn to_prototypes(&self) -> Result<ClassPrototypes> {
        let mut w = Vec::with_capacity(self.ints.len());
        for (row, &g) in self.ints.chunks_exact(self.hd_dim).zip(&self.gains) {
            w.extend(scale_down(row, g)?);
        }
        ClassPrototypes::from_flat(self.num_classes, self.hd_dim, w, vec![0; self.num_classes])
    }
}

/// An encoded uplink payload: `rows` groups of `cols` values, with one gain
/// per row when the codec is quantized.
#[derive(Debug, Clone, PartialEq)]
pub struct WirePayload {
    pub codec: CodecConfig,
    pub rows: usize,
    pub cols: usize,
    pub gains: Vec<f64>,
    pub bits: BitStream,
}

/// Encodes consecutive rows of the given lengths, quantizing each row with
/// its own gain when the codec calls for it. An all-zero row is sent with the
/// gain it would have if its peak were 1, so it still decodes to zeros.
pub fn encode_rows(values: &[f64], row_lens: &[usize], codec: &CodecConfig) -> Result<(BitStream, Vec<f64>)> {
    let total: usize = row_lens.iter().sum();
    if total != values.len() {
        return Err(Error::mismatch(total, values.len()));
    }
    if !codec.has_gains() {
        return Ok((serialize_bits(values, codec)?, Vec::new()));
    }
    let unit = quant_max(codec.width()) as f64;
    let mut gains = Vec::with_capacity(row_lens.len());
    let mut ints = Vec::with_capacity(values.len());
    let mut start = 0;
    for &len in row_lens {
        let row = &values[start..start + len];
        start += len;
        match quantize_up(row, codec.width()) {
            Ok((q, g)) => {
                ints.extend(q.into_iter().map(|v| v as f64));
                gains.push(g);
            }
            Err(Error::ZeroGain) => {
                ints.extend(std::iter::repeat_n(0.0, len));
                gains.push(unit);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((serialize_bits(&ints, codec)?, gains))
}

/// Inverse of [`encode_rows`].
pub fn decode_rows(bits: &BitStream, row_lens: &[usize], gains: &[f64], codec: &CodecConfig) -> Result<Vec<f64>> {
    let total: usize = row_lens.iter().sum();
    let mut v = deserialize_bits(bits, total, codec)?;
    if codec.has_gains() {
        if gains.len() != row_lens.len() {
            return Err(Error::mismatch(row_lens.len(), gains.len()));
        }
        let mut start = 0;
        for (&len, &g) in row_lens.iter().zip(gains) {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Format(format!("invalid gain {g}")));
            }
            v[start..start + len].iter_mut().for_each(|x| *x /= g);
            start += len;
        }
    }
    Ok(v)
}

impl WirePayload {
    pub fn encode(values: &[f64], rows: usize, codec: &CodecConfig) -> Result<Self> {
        if rows == 0 || !values.len().is_multiple_of(rows) {
            return Err(Error::InvalidArgument(format!("{} values do not split into {rows} rows", values.len())));
        }
        let cols = values.len() / rows;
        let (bits, gains) = encode_rows(values, &vec![cols; rows], codec)?;
        Ok(Self { codec: *codec, rows, cols, gains, bits })
    }

    pub fn decode(&self) -> Result<Vec<f64>> {
        decode_rows(&self.bits, &vec![self.cols; self.rows], &self.gains, &self.codec)
    }

    pub fn value_bytes(&self) -> usize {
        self.bits.len().div_ceil(8)
    }
}

pub const HDFM_MAGIC: &[u8; 4] = b"HDFM";
pub const HDFM_VERSION: u8 = 1;
pub const HDFM_HEADER_BYTES: usize = 4 + 1 + 4 + 4 + 1;

/// Size of a model file holding `k x d` parameters.
pub fn hdfm_size(k: usize, d: usize, codec: &CodecConfig) -> usize {
    let gains = if codec.has_gains() { 8 * k } else { 0 };
    HDFM_HEADER_BYTES + gains + (k * d * codec.width() as usize).div_ceil(8)
}

pub fn write_hdfm(p: &WirePayload) -> Result<Vec<u8>> {
    let k = u32::try_from(p.rows).map_err(|_| Error::Format("K exceeds 32 bits".into()))?;
    let d = u32::try_from(p.cols).map_err(|_| Error::Format("d exceeds 32 bits".into()))?;
    let mut out = Vec::with_capacity(hdfm_size(p.rows, p.cols, &p.codec));
    out.extend_from_slice(HDFM_MAGIC);
    out.push(HDFM_VERSION);
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.push(p.codec.tag());
    if p.codec.has_gains() {
        for g in &p.gains {
            out.extend_from_slice(&g.to_le_bytes());
        }
    }
    out.extend_from_slice(p.bits.as_bytes());
    Ok(out)
}

pub fn read_hdfm(bytes: &[u8]) -> Result<WirePayload> {
    if bytes.len() < HDFM_HEADER_BYTES {
        return Err(Error::Format("model file header truncated".into()));
    }
    if &bytes[..4] != HDFM_MAGIC {
        return Err(Error::Format("bad magic, expected HDFM".into()));
    }
    if bytes[4] != HDFM_VERSION {
        return Err(Error::Format(format!("unsupported HDFM version {}", bytes[4])));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let codec = CodecConfig::from_tag(bytes[13])?;
    let expected = hdfm_size(rows, cols, &codec);
    if bytes.len() != expected {
        return Err(Error::Format(format!("model file is {} bytes, header implies {expected}", bytes.len())));
    }
    let mut pos = HDFM_HEADER_BYTES;
    let mut gains = Vec::new();
    if codec.has_gains() {
        for _ in 0..rows {
            gains.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
            pos += 8;
        }
    }
    let nbits = rows * cols * codec.width() as usize;
    let bits = BitStream::from_bytes(bytes[pos..].to_vec(), nbits)
        .ok_or_else(|| Error::Format("payload length mismatch".into()))?;
    Ok(WirePayload { codec, rows, cols, gains, bits })
}

/// Serializes a model to the HDFM byte format.
pub fn encode_model(model: &ClassPrototypes, codec: &CodecConfig) -> Result<Vec<u8>> {
    write_hdfm(&WirePayload::encode(model.as_slice(), model.num_classes(), codec)?)
}

pub fn decode_model(bytes: &[u8]) -> Result<ClassPrototypes> {
    let p = read_hdfm(bytes)?;
    let k = p.rows;
    ClassPrototypes::from_flat(k, p.cols, p.decode()?, vec![0; k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int32_seven_is_little_endian() {
        let b = serialize_bits(&[7.0], &CodecConfig::INT32).unwrap();
        assert_eq!(b.len(), 32);
        assert_eq!(b.as_bytes(), &[7, 0, 0, 0]);
        assert_eq!(deserialize_bits(&b, 1, &CodecConfig::INT32).unwrap(), vec![7.0]);
    }

    #[test]
    fn float32_round_trip() {
        let v = [1.5, -0.0, 0.375 * 2f64.powi(-30), -65504.0, f32::MAX as f64];
        let b = serialize_bits(&v, &CodecConfig::FLOAT32).unwrap();
        assert_eq!(b.len(), 32 * v.len());
        let back = deserialize_bits(&b, v.len(), &CodecConfig::FLOAT32).unwrap();
        assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn non_finite_floats_decode_to_zero() {
        let mut b = BitStream::new();
        b.push(f32::NAN.to_bits() as u64, 32);
        b.push(f32::INFINITY.to_bits() as u64, 32);
        assert_eq!(deserialize_bits(&b, 2, &CodecConfig::FLOAT32).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn int_overflow_is_an_error() {
        assert!(matches!(serialize_bits(&[3e9], &CodecConfig::INT32), Err(Error::Overflow { .. })));
        let q4 = CodecConfig::quantized(4).unwrap();
        assert!(serialize_bits(&[7.0, -8.0], &q4).is_ok());
        assert!(serialize_bits(&[8.0], &q4).is_err());
        assert_eq!(deserialize_bits(&serialize_bits(&[-8.0, 5.0], &q4).unwrap(), 2, &q4).unwrap(), vec![-8.0, 5.0]);
    }

    #[test]
    fn quantize_example() {
        let (q, g) = quantize_up(&[3.0, -5.0, 7.0], 8).unwrap();
        assert_eq!(q, vec![54, -90, 127]);
        assert!((g - 127.0 / 7.0).abs() < 1e-12);
        let back = scale_down(&q, g).unwrap();
        for (b, c) in back.iter().zip([3.0, -5.0, 7.0]) {
            assert!((b - c).abs() <= 7.0 / 127.0);
        }
    }

    #[test]
    fn quantize_edge_cases() {
        assert_eq!(quantize_up(&[0.0, -0.3, 0.0], 12).unwrap().0, vec![0, -2047, 0]);
        let (q, _) = quantize_up(&[0.2, -1.0, 0.6, 0.99], 2).unwrap();
        assert!(q.iter().all(|v| (-1..=1).contains(v)));
        assert!(matches!(quantize_up(&[0.0; 4], 8), Err(Error::ZeroGain)));
        assert!(quantize_up(&[1.0], 1).is_err());
        assert_eq!(scale_down(&[127], 127.0).unwrap(), vec![1.0]);
        assert!(scale_down(&[1], 0.0).is_err());
        assert!(scale_down(&[1], -2.0).is_err());
    }

    #[test]
    fn tags_round_trip() {
        for c in [CodecConfig::FLOAT32, CodecConfig::INT32, CodecConfig::SIGN, CodecConfig::quantized(16).unwrap(), CodecConfig::quantized(32).unwrap()] {
            assert_eq!(CodecConfig::from_tag(c.tag()).unwrap(), c);
        }
        assert_eq!(CodecConfig::FLOAT32.tag(), 0x20);
        assert_eq!(CodecConfig::quantized(16).unwrap().tag(), 0x90);
        assert!(CodecConfig::from_tag(0x21).is_err());
        assert!(CodecConfig::from_tag(0x81).is_err());
    }

    #[test]
    fn hdfm_round_trip() {
        let m = ClassPrototypes::from_rows(vec![vec![1.0, -2.0, 0.5], vec![0.0, 0.0, 0.0]]).unwrap();
        for c in [CodecConfig::FLOAT32, CodecConfig::INT32, CodecConfig::quantized(16).unwrap()] {
            let bytes = encode_model(&m, &c).unwrap();
            assert_eq!(bytes.len(), hdfm_size(2, 3, &c));
            let back = decode_model(&bytes).unwrap();
            if c == CodecConfig::FLOAT32 {
                assert_eq!(back, m);
            }
            assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        }
        let bytes = encode_model(&m, &CodecConfig::FLOAT32).unwrap();
        assert_eq!(&bytes[..4], b"HDFM");
        assert_eq!(bytes.len(), 14 + 2 * 3 * 4);
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode_model(&bad).is_err());
    }

    #[test]
    fn quantized_model_round_trip() {
        let m = ClassPrototypes::from_rows(vec![vec![3.0, -5.0, 7.0], vec![1.0, 0.5, -0.25]]).unwrap();
        let q = QuantizedModel::from_prototypes(&m, 8).unwrap();
        assert_eq!(&q.ints[..3], &[54, -90, 127]);
        assert_eq!(&q.ints[3..], &[127, 63, -31]);
        let back = q.to_prototypes().unwrap();
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() <= 7.0 / 127.0);
        }
    }
}
