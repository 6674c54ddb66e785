use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;

const CHECKPOINT_MAGIC: &[u8; 8] = b"GRBFLPV1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl Segment {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered weight matrices packed into one flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
}

impl ParamLayout {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    /// Offset range of segment `i` in the flat vector.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.segments[..i].iter().map(Segment::len).sum();
        start..start + self.segments[i].len()
    }
}

/// Flat parameter vector; the unit exchanged between clients and server.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: ParamLayout) -> Self {
        let values = vec![0.0; layout.total_len()];
        Self { layout, values }
    }

    pub fn from_values(layout: ParamLayout, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != layout.total_len() {
            return Err(ModelError::DimensionMismatch(format!(
                "layout needs {} values, got {}",
                layout.total_len(),
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    /// Uniform Glorot initialization `U(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(layout: ParamLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(layout.total_len());
        for seg in layout.segments() {
            let s = (6.0 / (seg.rows + seg.cols) as f64).sqrt();
            values.extend((0..seg.len()).map(|_| rng.gen_range(-s..s)));
        }
        Self { layout, values }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, i: usize) -> &[f64] {
        &self.values[self.layout.range(i)]
    }

    pub fn segment_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.range(i);
        &mut self.values[r]
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<(), ModelError> {
        if self.layout != other.layout {
            return Err(ModelError::LayoutMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Binary checkpoint, all integers and floats little-endian:
///
/// ```text
/// magic "GRBFLPV1" | u32 segment count
/// per segment: u32 name length | name (UTF-8) | u32 rows | u32 cols
/// u64 value count | f64 values
/// ```
pub fn write_checkpoint(params: &ParamVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + params.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend((params.layout.segments.len() as u32).to_le_bytes());
    for seg in &params.layout.segments {
        out.extend((seg.name.len() as u32).to_le_bytes());
        out.extend(seg.name.as_bytes());
        out.extend((seg.rows as u32).to_le_bytes());
        out.extend((seg.cols as u32).to_le_bytes());
    }
    out.extend((params.values.len() as u64).to_le_bytes());
    for v in &params.values {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ParamVector, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let count = r.u32()? as usize;
    let mut segments = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ModelError::Checkpoint("segment name is not UTF-8".into()))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        segments.push(Segment { name, rows, cols });
    }
    let n = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
    let layout = ParamLayout::new(segments);
    if n != layout.total_len() {
        return Err(ModelError::Checkpoint(format!(
            "value count {n} disagrees with layout total {}",
            layout.total_len()
        )));
    }
    let raw = r.take(
        n.checked_mul(8)
            .ok_or_else(|| ModelError::Checkpoint("value count overflow".into()))?,
    )?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if r.pos != bytes.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    ParamVector::from_values(layout, values)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Checkpoint("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> ParamLayout {
        ParamLayout::new(vec![Segment::new("w1", 3, 4), Segment::new("w2", 4, 2)])
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let a = ParamVector::glorot(layout(), 9);
        assert_eq!(a, ParamVector::glorot(layout(), 9));
        assert_ne!(a, ParamVector::glorot(layout(), 10));
        let s1 = (6.0f64 / 7.0).sqrt();
        assert!(a.segment(0).iter().all(|v| v.abs() < s1));
        let s2 = (6.0f64 / 6.0).sqrt();
        assert!(a.segment(1).iter().all(|v| v.abs() < s2));
        assert_eq!(layout().range(1), 12..20);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let bytes = write_checkpoint(&ParamVector::glorot(layout(), 1));
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(read_checkpoint(&extra).is_err());
    }

    #[test]
    fn axpy_checks_layout() {
        let mut a = ParamVector::zeros(layout());
        let b = ParamVector::zeros(ParamLayout::new(vec![Segment::new("w1", 20, 1)]));
        assert_eq!(a.axpy(1.0, &b), Err(ModelError::LayoutMismatch));
    }

    proptest! {
        #[test]
        fn checkpoint_round_trip(values in prop::collection::vec(prop::num::f64::ANY, 20)) {
            let p = ParamVector::from_values(layout(), values).unwrap();
            let back = read_checkpoint(&write_checkpoint(&p)).unwrap();
            prop_assert_eq!(back.layout(), p.layout());
            for (a, b) in back.values().iter().zip(p.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
