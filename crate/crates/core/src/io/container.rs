//! The `FWSV` tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "FWSV"
//! version      u32      1
//! entry count  u32
//! per entry:
//!   name length u16, name (UTF-8)
//!   dtype       u8      0 = f32, 1 = f64
//!   rank        u8
//!   dims        rank × u64
//!   payload     product(dims) × dtype width, row-major
//! ```

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FWSV";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("not a tensor container (bad magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("duplicate tensor name '{0}'")]
    DuplicateName(String),
    #[error("tensor name is not valid UTF-8 at offset {0}")]
    InvalidName(usize),
    #[error("tensor name '{0}' is too long")]
    NameTooLong(String),
    #[error("unknown dtype byte {0}")]
    UnknownDType(u8),
    #[error("tensor '{0}' is too large")]
    TooLarge(String),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest and container disagree: {0}")]
    Mismatch(String),
    #[error("missing tensor '{0}'")]
    MissingTensor(String),
    #[error("invalid value in '{name}': {reason}")]
    InvalidValue { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn byte(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Values are always held as `f64`; `dtype` is the on-disk precision.
/// Saving at `F32` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
    pub dtype: DType,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self {
            dims,
            data,
            dtype: DType::F64,
        }
    }

    pub fn with_dtype(mut self, dtype: DType) -> Self {
        self.dtype = dtype;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorContainer {
    entries: Vec<(String, Tensor)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), FormatError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(FormatError::DuplicateName(name));
        }
        if name.len() > u16::MAX as usize {
            return Err(FormatError::NameTooLong(name));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.dtype.byte());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match t.dtype {
                DType::F64 => t.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                DType::F32 => t
                    .data
                    .iter()
                    .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let count = r.u32()? as usize;
        let mut container = TensorContainer::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| FormatError::InvalidName(name_at))?
                .to_string();
            let dtype = match r.u8()? {
                0 => DType::F32,
                1 => DType::F64,
                other => return Err(FormatError::UnknownDType(other)),
            };
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u64()?);
            }
            let numel = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(dtype.width() as u64))
                .and_then(|n| usize::try_from(n).ok())
                .ok_or_else(|| FormatError::TooLarge(name.clone()))?;
            let payload = r.take(numel)?;
            let data: Vec<f64> = match dtype {
                DType::F64 => payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                DType::F32 => payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
            };
            let dims = dims.into_iter().map(|d| d as usize).collect();
            container.insert(name, Tensor { dims, data, dtype })?;
        }
        if r.pos != bytes.len() {
            return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(container)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> TensorContainer {
        let mut c = TensorContainer::new();
        c.insert("fc1.weight", Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, -0.0, 1e-300])).unwrap();
        c.insert("fc1.bias", Tensor::new(vec![3], vec![0.1, 0.2, 0.3])).unwrap();
        c
    }

    #[test]
    fn layout_of_a_64x64_f64_entry() {
        let mut c = TensorContainer::new();
        c.insert("w", Tensor::new(vec![64, 64], vec![0.5; 4096])).unwrap();
        let bytes = c.to_bytes();
        // header 12, name 2 + 1, dtype 1, rank 1, dims 16, payload.
        assert_eq!(bytes.len(), 12 + 3 + 2 + 16 + 32768);
        assert_eq!(&bytes[..4], b"FWSV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(bytes[15], 1);
        assert_eq!(bytes[16], 2);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let c = sample();
        let back = TensorContainer::from_bytes(&c.to_bytes()).unwrap();
        for name in c.names() {
            let (a, b) = (c.get(name).unwrap(), back.get(name).unwrap());
            assert_eq!(a.dims, b.dims);
            let bits = |t: &Tensor| t.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn f32_storage_rounds() {
        let mut c = TensorContainer::new();
        c.insert("x", Tensor::new(vec![2], vec![0.1, 2.0]).with_dtype(DType::F32)).unwrap();
        let back = TensorContainer::from_bytes(&c.to_bytes()).unwrap();
        let t = back.get("x").unwrap();
        assert_eq!(t.dtype, DType::F32);
        assert_eq!(t.data, vec![0.1f32 as f64, 2.0]);
    }

    #[test]
    fn distinct_diagnostics() {
        let bytes = sample().to_bytes();

        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(matches!(TensorContainer::from_bytes(&bad), Err(FormatError::BadMagic(_))));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(TensorContainer::from_bytes(&bad), Err(FormatError::UnsupportedVersion(9)));

        let mut bad = bytes.clone();
        bad.push(0);
        assert_eq!(TensorContainer::from_bytes(&bad), Err(FormatError::TrailingBytes(1)));

        let mut c = TensorContainer::new();
        c.insert("a", Tensor::new(vec![1], vec![1.0])).unwrap();
        assert_eq!(
            c.insert("a", Tensor::new(vec![1], vec![2.0])),
            Err(FormatError::DuplicateName("a".into()))
        );
        // Two entries named "a" written by hand.
        let mut dup = c.to_bytes();
        dup[8] = 2;
        dup.extend_from_within(12..);
        assert_eq!(TensorContainer::from_bytes(&dup), Err(FormatError::DuplicateName("a".into())));
    }

    proptest! {
        #[test]
        fn any_truncation_is_rejected(cut in 0usize..200) {
            let bytes = sample().to_bytes();
            let cut = cut % bytes.len();
            let err = TensorContainer::from_bytes(&bytes[..cut]);
            prop_assert!(err.is_err());
        }

        #[test]
        fn round_trip_arbitrary(values in proptest::collection::vec(any::<f64>(), 1..40), cols in 1usize..5) {
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let data = values[..rows * cols].to_vec();
            let mut c = TensorContainer::new();
            c.insert("t", Tensor::new(vec![rows, cols], data.clone())).unwrap();
            let back = TensorContainer::from_bytes(&c.to_bytes()).unwrap();
            let got: Vec<u64> = back.get("t").unwrap().data.iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = data.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, want);
        }
    }
}
