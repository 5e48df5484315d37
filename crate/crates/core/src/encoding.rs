//! Fixed-width big-endian helpers shared by the binary codecs.

use num_bigint::BigUint;

/// Returned when a field does not fit its fixed wire width or the input ends
/// early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("value needs {needed} bytes but the field is {width} bytes wide")]
    Overflow { needed: usize, width: usize },
    #[error("input truncated")]
    Truncated,
}

/// Encodes `n` big-endian, left-padded with zeros to exactly `width` bytes.
pub fn to_fixed_be(n: &BigUint, width: usize) -> Result<Vec<u8>, CodecError> {
    let raw = n.to_bytes_be();
    let raw: &[u8] = if raw == [0] { &[] } else { &raw };
    if raw.len() > width {
        return Err(CodecError::Overflow {
            needed: raw.len(),
            width,
        });
    }
    let mut out = vec![0u8; width];
    out[width - raw.len()..].copy_from_slice(raw);
    Ok(out)
}

pub fn put_fixed(buf: &mut Vec<u8>, n: &BigUint, width: usize) -> Result<(), CodecError> {
    buf.extend_from_slice(&to_fixed_be(n, width)?);
    Ok(())
}

/// Length-prefixed (u32) big-endian integer, used where widths vary.
pub fn put_var(buf: &mut Vec<u8>, n: &BigUint) {
    let raw = n.to_bytes_be();
    buf.extend_from_slice(&(raw.len() as u32).to_be_bytes());
    buf.extend_from_slice(&raw);
}

/// Forward-only cursor over a byte slice.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated);
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn fixed_uint(&mut self, width: usize) -> Result<BigUint, CodecError> {
        Ok(BigUint::from_bytes_be(self.take(width)?))
    }

    pub fn var_uint(&mut self) -> Result<BigUint, CodecError> {
        let len = self.u32()? as usize;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }
}
