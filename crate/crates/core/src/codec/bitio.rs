//! MSB-first bit stream primitives and Exp-Golomb codes.

use super::CodecError;

#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    nbits: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.cur = (self.cur << 1) | bit as u8;
        self.nbits += 1;
        if self.nbits == 8 {
            self.bytes.push(self.cur);
            self.cur = 0;
            self.nbits = 0;
        }
    }

    /// Writes the `n` low bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u32, n: u8) {
        for k in (0..n).rev() {
            self.write_bit(value >> k & 1 == 1);
        }
    }

    /// Unsigned Exp-Golomb: `value + 1` in binary, preceded by one fewer
    /// zero bits than its width.
    pub fn ue(&mut self, value: u32) {
        let n = value + 1;
        let width = (32 - n.leading_zeros()) as u8;
        self.write_bits(0, width - 1);
        self.write_bits(n, width);
    }

    /// Signed Exp-Golomb: positive v maps to 2v-1, non-positive to -2v.
    pub fn se(&mut self, value: i32) {
        let mapped = if value > 0 {
            (2 * value as i64 - 1) as u32
        } else {
            (-2 * value as i64) as u32
        };
        self.ue(mapped);
    }

    /// Bits written so far.
    #[cfg(test)]
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + self.nbits as usize
    }

    /// Zero-pads to a byte boundary and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.cur <<= 8 - self.nbits;
            self.bytes.push(self.cur);
        }
        self.bytes
    }
}

/// Bit length of `ue(value)`.
pub fn ue_len(value: u32) -> usize {
    let width = 32 - (value + 1).leading_zeros() as usize;
    2 * width - 1
}

/// Bit length of `se(value)`.
pub fn se_len(value: i32) -> usize {
    let mapped = if value > 0 {
        (2 * value as i64 - 1) as u32
    } else {
        (-2 * value as i64) as u32
    };
    ue_len(mapped)
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    /// Byte offset of the next unread bit, for error reporting.
    pub fn byte_offset(&self) -> usize {
        self.pos / 8
    }

    pub fn read_bit(&mut self) -> Result<bool, CodecError> {
        let byte = self.pos / 8;
        if byte >= self.bytes.len() {
            return Err(CodecError::Corrupt {
                offset: byte,
                msg: "bitstream ended mid-symbol".into(),
            });
        }
        let bit = self.bytes[byte] >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn ue(&mut self) -> Result<u32, CodecError> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 31 {
                return Err(CodecError::Corrupt {
                    offset: self.byte_offset(),
                    msg: "exp-golomb prefix too long".into(),
                });
            }
        }
        let mut n = 1u32;
        for _ in 0..zeros {
            n = (n << 1) | self.read_bit()? as u32;
        }
        Ok(n - 1)
    }

    pub fn se(&mut self) -> Result<i32, CodecError> {
        let mapped = self.ue()? as i64;
        Ok(if mapped % 2 == 1 {
            ((mapped + 1) / 2) as i32
        } else {
            (-mapped / 2) as i32
        })
    }
}
