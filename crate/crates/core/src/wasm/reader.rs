use super::LoadError;

/// Cursor over a byte slice. Every read is bounds-checked against the slice,
/// so a section reader can never run past its declared length.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Offset of `bytes[0]` in the whole module, for error messages.
    base: usize,
}

pub(crate) type Result<T> = std::result::Result<T, LoadError>;

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], base: usize) -> Self {
        Reader { bytes, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub fn malformed<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(LoadError::MalformedBinary {
            offset: self.offset(),
            reason: reason.into(),
        })
    }

    pub fn unsupported<T>(&self, feature: impl Into<String>) -> Result<T> {
        Err(LoadError::UnsupportedFeature {
            offset: self.offset(),
            feature: feature.into(),
        })
    }

    pub fn u8(&mut self) -> Result<u8> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => self.malformed("unexpected end of input"),
        }
    }

    pub fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => end,
            _ => return self.malformed(format!("length {n} exceeds remaining input")),
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    /// Splits off a sub-reader of `n` bytes and advances past them.
    pub fn sub(&mut self, n: usize) -> Result<Reader<'a>> {
        let base = self.offset();
        let bytes = self.bytes(n)?;
        Ok(Reader::new(bytes, base))
    }

    fn leb_unsigned(&mut self, bits: u32) -> Result<u64> {
        let max_bytes = bits.div_ceil(7);
        let mut result: u64 = 0;
        let mut shift = 0u32;
        for i in 0..max_bytes {
            let byte = self.u8()?;
            let payload = u64::from(byte & 0x7F);
            if i == max_bytes - 1 {
                // unused high bits of the final byte must be zero
                let used = bits - shift;
                if used < 7 && payload >> used != 0 {
                    return self.malformed("integer too large");
                }
            }
            result |= payload << shift;
            if byte & 0x80 == 0 {
                return Ok(result);
            }
            shift += 7;
        }
        self.malformed("integer representation too long")
    }

    fn leb_signed(&mut self, bits: u32) -> Result<i64> {
        let max_bytes = bits.div_ceil(7);
        let mut result: i64 = 0;
        let mut shift = 0u32;
        for i in 0..max_bytes {
            let byte = self.u8()?;
            let payload = i64::from(byte & 0x7F);
            if i == max_bytes - 1 {
                let used = bits - shift;
                if used < 7 {
                    // remaining bits must be a sign extension of bit `used - 1`
                    let high = (byte & 0x7F) >> (used - 1);
                    let all_ones = 0x7Fu8 >> (used - 1);
                    if high != 0 && high != all_ones {
                        return self.malformed("integer too large");
                    }
                }
            }
            if shift < 64 {
                result |= payload << shift;
            }
            shift += 7;
            if byte & 0x80 == 0 {
                if shift < 64 && byte & 0x40 != 0 {
                    result |= -1i64 << shift;
                }
                return Ok(result);
            }
        }
        self.malformed("integer representation too long")
    }

    pub fn var_u32(&mut self) -> Result<u32> {
        Ok(self.leb_unsigned(32)? as u32)
    }

    pub fn var_i32(&mut self) -> Result<i32> {
        Ok(self.leb_signed(32)? as i32)
    }

    pub fn var_i64(&mut self) -> Result<i64> {
        self.leb_signed(64)
    }

    pub fn var_s33(&mut self) -> Result<i64> {
        self.leb_signed(33)
    }

    pub fn fixed_u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn fixed_u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub fn name(&mut self) -> Result<String> {
        let len = self.var_u32()? as usize;
        let bytes = self.bytes(len)?;
        match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_owned()),
            Err(_) => self.malformed("name is not valid UTF-8"),
        }
    }

    /// Reads a vector length and rejects counts that cannot possibly fit in
    /// the remaining bytes (each element takes at least one byte).
    pub fn count(&mut self) -> Result<u32> {
        let n = self.var_u32()?;
        if n as usize > self.bytes.len() - self.pos {
            return self.malformed(format!("vector length {n} exceeds remaining input"));
        }
        Ok(n)
    }
}
