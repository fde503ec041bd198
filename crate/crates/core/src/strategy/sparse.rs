use crate::channel::{decode_rows, encode_rows, BitStream, CodecConfig, HDFM_HEADER_BYTES, HDFM_VERSION};
use crate::error::{Error, Result};
use crate::hdc::ClassPrototypes;

pub const SPARSE_MAGIC: &[u8; 4] = b"HDSP";

/// The stored (non-zero) entries of one class vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

/// Compressed per-class storage: only non-zero entries and their positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseClassModel {
    num_classes: usize,
    hd_dim: usize,
    rows: Vec<SparseRow>,
}

impl SparseClassModel {
    /// Fails unless every row's indices are strictly increasing and `< d`.
    pub fn new(hd_dim: usize, rows: Vec<SparseRow>) -> Result<Self> {
        for r in &rows {
            if r.indices.len() != r.values.len() {
                return Err(Error::mismatch(r.indices.len(), r.values.len()));
            }
            if r.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format("sparse indices not strictly increasing".into()));
            }
            if r.indices.last().is_some_and(|&i| i as usize >= hd_dim) {
                return Err(Error::Format(format!("sparse index beyond dimension {hd_dim}")));
            }
        }
        Ok(Self { num_classes: rows.len(), hd_dim, rows })
    }

    pub fn from_dense(model: &ClassPrototypes) -> Self {
        let rows = model
            .rows()
            .map(|row| {
                let mut r = SparseRow::default();
                for (i, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        r.indices.push(i as u32);
                        r.values.push(v);
                    }
                }
                r
            })
            .collect();
        Self { num_classes: model.num_classes(), hd_dim: model.hd_dim(), rows }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hd_dim(&self) -> usize {
        self.hd_dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.values.len()).collect()
    }

    pub fn stored(&self) -> usize {
        self.rows.iter().map(|r| r.values.len()).sum()
    }

    /// All stored values, class by class.
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.values.iter().copied()).collect()
    }

    /// Replaces stored values in the order of [`values`](Self::values).
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.stored() {
            return Err(Error::mismatch(self.stored(), values.len()));
        }
        let mut it = values.iter();
        for r in &mut self.rows {
            r.values.iter_mut().for_each(|v| *v = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<ClassPrototypes> {
        let mut m = ClassPrototypes::zeros(self.num_classes, self.hd_dim)?;
        for (k, r) in self.rows.iter().enumerate() {
            let row = m.row_mut(k);
            for (&i, &v) in r.indices.iter().zip(&r.values) {
                row[i as usize] = v;
            }
        }
        Ok(m)
    }
}

/// Number of entries zeroed per class.
pub fn sparsify_zeroed(hd_dim: usize, sparsity: f64) -> usize {
    ((sparsity * hd_dim as f64).round() as usize).min(hd_dim)
}

/// Zeros the `round(S*d)` smallest-magnitude entries of each class (lowest
/// index first among ties) and keeps the rest.
pub fn sparsify(model: &ClassPrototypes, sparsity: f64) -> Result<SparseClassModel> {
    check_sparsity(sparsity)?;
    let d = model.hd_dim();
    let z = sparsify_zeroed(d, sparsity);
    let mut order: Vec<u32> = Vec::with_capacity(d);
    let rows = model
        .rows()
        .map(|row| {
            order.clear();
            order.extend(0..d as u32);
            if z > 0 && z < d {
                order.select_nth_unstable_by(z, |&a, &b| rank(row, a, b));
            }
            let mut kept: Vec<u32> = if z >= d { Vec::new() } else { order[z..].to_vec() };
            kept.sort_unstable();
            kept.retain(|&i| row[i as usize] != 0.0);
            let values = kept.iter().map(|&i| row[i as usize]).collect();
            SparseRow { indices: kept, values }
        })
        .collect();
    Ok(SparseClassModel { num_classes: model.num_classes(), hd_dim: d, rows })
}

fn rank(row: &[f64], a: u32, b: u32) -> std::cmp::Ordering {
    row[a as usize].abs().total_cmp(&row[b as usize].abs()).then(a.cmp(&b))
}

pub(crate) fn check_sparsity(s: f64) -> Result<()> {
    if (0.0..1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sparsity {s} outside [0, 1)")))
    }
}

/// Bits of the sparse body: a 32-bit count per class and a 32-bit gap plus a
/// value per stored entry. Returns `(metadata bits, value bits)`.
pub fn sparse_bits(counts: &[usize], codec: &CodecConfig) -> (usize, usize) {
    let stored: usize = counts.iter().sum();
    (32 * counts.len() + 32 * stored, codec.width() as usize * stored)
}

/// Serialized layout: `HDSP`, version, `K`, `d` (u32 LE), codec tag, optional
/// per-class gains (f64 LE), then per class a u32 count followed by
/// `(gap: u32, value)` pairs, where `gap` is the distance from the previous
/// stored index minus one.
pub fn encode_sparse(sparse: &SparseClassModel, codec: &CodecConfig) -> Result<Vec<u8>> {
    let counts = sparse.counts();
    let (bits, gains) = encode_rows(&sparse.values(), &counts, codec)?;
    let w = codec.width();
    let mut body = BitStream::new();
    let mut vpos = 0usize;
    for r in &sparse.rows {
        body.push(r.values.len() as u64, 32);
        let mut prev: i64 = -1;
        for &i in &r.indices {
            body.push((i as i64 - prev - 1) as u64, 32);
            body.push(bits.read(vpos, w), w);
            vpos += w as usize;
            prev = i as i64;
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(SPARSE_MAGIC);
    out.push(HDFM_VERSION);
    out.extend_from_slice(&(sparse.num_classes as u32).to_le_bytes());
    out.extend_from_slice(&(sparse.hd_dim as u32).to_le_bytes());
    out.push(codec.tag());
    if codec.has_gains() {
        for g in &gains {
            out.extend_from_slice(&g.to_le_bytes());
        }
    }
    out.extend_from_slice(body.as_bytes());
    Ok(out)
}

pub fn decode_sparse(bytes: &[u8]) -> Result<(SparseClassModel, CodecConfig)> {
    if bytes.len() < HDFM_HEADER_BYTES || &bytes[..4] != SPARSE_MAGIC {
        return Err(Error::Format("not a sparse payload".into()));
    }
    if bytes[4] != HDFM_VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let k = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let codec = CodecConfig::from_tag(bytes[13])?;
    let mut pos = HDFM_HEADER_BYTES;
    let mut gains = Vec::new();
    if codec.has_gains() {
        if bytes.len() < pos + 8 * k {
            return Err(Error::Format("truncated gains".into()));
        }
        for _ in 0..k {
            gains.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
            pos += 8;
        }
    }
    let body_bytes = bytes[pos..].to_vec();
    let body = BitStream::from_bytes(body_bytes.clone(), body_bytes.len() * 8).unwrap();
    let w = codec.width();
    let mut cur = 0usize;
    let mut take = |width: u32| -> Result<u64> {
        if cur + width as usize > body.len() {
            return Err(Error::Format("truncated sparse body".into()));
        }
        let v = body.read(cur, width);
        cur += width as usize;
        Ok(v)
    };
    let mut rows = Vec::with_capacity(k);
    let mut raw = BitStream::new();
    let mut counts = Vec::with_capacity(k);
    for _ in 0..k {
        let n = take(32)? as usize;
        if n > d {
            return Err(Error::Format(format!("class count {n} exceeds dimension {d}")));
        }
        let mut r = SparseRow { indices: Vec::with_capacity(n), values: Vec::new() };
        let mut prev: i64 = -1;
        for _ in 0..n {
            let idx = prev + 1 + take(32)? as i64;
            if idx >= d as i64 {
                return Err(Error::Format(format!("sparse index {idx} beyond dimension {d}")));
            }
            r.indices.push(idx as u32);
            r.values.push(0.0);
            raw.push(take(w)?, w);
            prev = idx;
        }
        counts.push(n);
        rows.push(r);
    }
    if body.len() - cur >= 8 {
        return Err(Error::Format("trailing bytes after sparse body".into()));
    }
    let values = decode_rows(&raw, &counts, &gains, &codec)?;
    let mut m = SparseClassModel::new(d, rows)?;
    m.set_values(&values)?;
    Ok((m, codec))
}

/// Compress, serialize, parse and decompress.
pub fn csc_roundtrip(sparse: &SparseClassModel, codec: &CodecConfig) -> Result<ClassPrototypes> {
    decode_sparse(&encode_sparse(sparse, codec)?)?.0.to_dense()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f64>>) -> ClassPrototypes {
        ClassPrototypes::from_rows(rows).unwrap()
    }

    #[test]
    fn half_sparsity_example() {
        let s = sparsify(&m(vec![vec![3.0, -1.0, 0.5, -4.0], vec![1.0; 4]]), 0.5).unwrap();
        let dense = s.to_dense().unwrap();
        assert_eq!(dense.row(0), &[3.0, 0.0, 0.0, -4.0]);
        assert_eq!(dense.row(1), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_sparsity_is_identity() {
        let x = m(vec![vec![1.0, -2.0, 3.0], vec![0.5, 0.25, -8.0]]);
        assert_eq!(sparsify(&x, 0.0).unwrap().to_dense().unwrap(), x);
        assert!(sparsify(&x, 1.0).is_err());
        assert!(sparsify(&x, -0.1).is_err());
    }

    #[test]
    fn count_rule() {
        let x = ClassPrototypes::from_flat(2, 10_000, (0..20_000).map(|i| (i as f64 * 0.731).sin() + 2.0).collect(), vec![0, 0]).unwrap();
        let s = sparsify(&x, 0.9).unwrap();
        assert_eq!(s.counts(), vec![1000, 1000]);
    }

    #[test]
    fn zero_class_is_empty() {
        let s = sparsify(&m(vec![vec![0.0; 3], vec![1.0, 2.0, 3.0]]), 0.0).unwrap();
        assert!(s.rows()[0].values.is_empty());
        let c = csc_roundtrip(&s, &CodecConfig::FLOAT32).unwrap();
        assert_eq!(c, s.to_dense().unwrap());
    }

    #[test]
    fn dense_storage_overhead() {
        let x = m(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let s = sparsify(&x, 0.0).unwrap();
        let bytes = encode_sparse(&s, &CodecConfig::FLOAT32).unwrap();
        assert!(bytes.len() >= crate::channel::hdfm_size(2, 3, &CodecConfig::FLOAT32));
        let (meta, vals) = sparse_bits(&s.counts(), &CodecConfig::FLOAT32);
        assert_eq!(bytes.len(), HDFM_HEADER_BYTES + (meta + vals).div_ceil(8));
    }

    #[test]
    fn round_trips() {
        let x = m(vec![vec![0.0, 1.5, 0.0, -2.25, 7.0], vec![3.0, 0.0, 0.0, 0.0, -1.0]]);
        let s = sparsify(&x, 0.2).unwrap();
        assert_eq!(csc_roundtrip(&s, &CodecConfig::FLOAT32).unwrap(), s.to_dense().unwrap());
        let q = csc_roundtrip(&s, &CodecConfig::quantized(16).unwrap()).unwrap();
        for (a, b) in q.as_slice().iter().zip(s.to_dense().unwrap().as_slice()) {
            assert!((a - b).abs() <= 7.0 / 32767.0);
        }
    }

    #[test]
    fn corrupt_ordering_rejected() {
        let bad = SparseRow { indices: vec![2, 1], values: vec![1.0, 1.0] };
        assert!(SparseClassModel::new(4, vec![bad]).is_err());
        let beyond = SparseRow { indices: vec![4], values: vec![1.0] };
        assert!(SparseClassModel::new(4, vec![beyond]).is_err());
        let s = sparsify(&m(vec![vec![1.0, 2.0], vec![3.0, 4.0]]), 0.0).unwrap();
        let mut bytes = encode_sparse(&s, &CodecConfig::FLOAT32).unwrap();
        // First gap of class 0 pushed past the end of the row.
        bytes[HDFM_HEADER_BYTES + 4] = 9;
        assert!(decode_sparse(&bytes).is_err());
        assert!(decode_sparse(&bytes[..HDFM_HEADER_BYTES + 3]).is_err());
    }
}
