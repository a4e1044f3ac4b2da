//! Bit-level I/O and a binary arithmetic coder.
//!
//! Rounding at every split favours the less probable symbol, so the realized
//! code never exceeds the ideal length under the supplied probabilities by
//! more than the two termination bits plus a negligible `O(2⁻⁵⁰)` per symbol.

const PRECISION: u32 = 62;
const TOP: u64 = (1 << PRECISION) - 1;
const HALF: u64 = 1 << (PRECISION - 1);
const QUARTER: u64 = 1 << (PRECISION - 2);
const PROB_BITS: u32 = 52;
const PROB_ONE: u64 = 1 << PROB_BITS;

/// Growable MSB-first bit buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn bit(&self, i: usize) -> bool {
        i < self.len && self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bytes with the final partial byte zero-padded.
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Cursor over a bit string; reads past the end yield zeros.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: usize,
    pos: usize,
}

impl<'a> BitReader<'a> {
    /// `len_bits` is clamped to the bits actually present.
    pub fn new(bytes: &'a [u8], len_bits: usize) -> Self {
        BitReader {
            bytes,
            len: len_bits.min(bytes.len() * 8),
            pos: 0,
        }
    }

    pub fn bit(&self, i: usize) -> bool {
        i < self.len && self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn next_bit(&mut self) -> bool {
        let b = self.bit(self.pos);
        self.pos += 1;
        b
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn skip(&mut self, bits: usize) {
        self.pos += bits;
    }
}

/// Width of the sub-interval assigned to symbol 0.
fn split(range: u64, p0: f64, p1: f64) -> u64 {
    let zero_is_minor = p0 <= p1;
    let p_minor = if zero_is_minor { p0 } else { p1 } / (p0 + p1);
    let f_minor = ((p_minor * PROB_ONE as f64).ceil() as u64).clamp(1, PROB_ONE / 2);
    let r_minor = ((range as u128 * f_minor as u128 + (PROB_ONE - 1) as u128) >> PROB_BITS) as u64;
    if zero_is_minor {
        r_minor
    } else {
        range - r_minor
    }
}

pub struct BinaryEncoder<'w> {
    out: &'w mut BitWriter,
    low: u64,
    high: u64,
    pending: u64,
}

impl<'w> BinaryEncoder<'w> {
    pub fn new(out: &'w mut BitWriter) -> Self {
        BinaryEncoder {
            out,
            low: 0,
            high: TOP,
            pending: 0,
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    /// Codes `bit` given unnormalized masses `p0` (false) and `p1` (true).
    pub fn encode(&mut self, bit: bool, p0: f64, p1: f64) {
        let range = self.high - self.low + 1;
        let r0 = split(range, p0, p1);
        if bit {
            self.low += r0;
        } else {
            self.high = self.low + r0 - 1;
        }
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    pub fn finish(mut self) {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
    }
}

pub struct BinaryDecoder<'a> {
    input: BitReader<'a>,
    low: u64,
    high: u64,
    value: u64,
    shifts: usize,
}

impl<'a> BinaryDecoder<'a> {
    /// Starts decoding at the reader's current position.
    pub fn new(mut input: BitReader<'a>) -> Self {
        let mut value = 0u64;
        for _ in 0..PRECISION {
            value = (value << 1) | input.next_bit() as u64;
        }
        BinaryDecoder {
            input,
            low: 0,
            high: TOP,
            value,
            shifts: 0,
        }
    }

    pub fn decode(&mut self, p0: f64, p1: f64) -> bool {
        let range = self.high - self.low + 1;
        let r0 = split(range, p0, p1);
        let bit = self.value >= self.low + r0;
        if bit {
            self.low += r0;
        } else {
            self.high = self.low + r0 - 1;
        }
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.input.next_bit() as u64;
            self.shifts += 1;
        }
        bit
    }

    /// Length in bits of the codeword consumed so far, including termination.
    pub fn codeword_length(&self) -> usize {
        self.shifts + 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_buffer_round_trip() {
        let mut w = BitWriter::new();
        let pattern = [true, false, true, true, false, false, false, true, true];
        for &b in &pattern {
            w.push(b);
        }
        assert_eq!(w.len(), 9);
        assert_eq!(w.bytes(), &[0b1011_0001, 0b1000_0000]);
        let mut r = BitReader::new(w.bytes(), w.len());
        for &b in &pattern {
            assert_eq!(r.next_bit(), b);
        }
        assert!(!r.next_bit());
    }

    #[test]
    fn coder_round_trip_and_near_ideal_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut symbols = Vec::new();
        let mut ideal = 0.0;
        let mut w = BitWriter::new();
        let mut enc = BinaryEncoder::new(&mut w);
        for _ in 0..5000 {
            let p0: f64 = rng.random_range(1e-6..1.0);
            let bit = rng.random::<f64>() >= p0;
            ideal -= if bit { (1.0 - p0).log2() } else { p0.log2() };
            enc.encode(bit, p0, 1.0 - p0);
            symbols.push((bit, p0));
        }
        enc.finish();
        assert!(w.len() as f64 <= ideal + 2.0 + 1e-6);
        let mut dec = BinaryDecoder::new(BitReader::new(w.bytes(), w.len()));
        for &(bit, p0) in &symbols {
            assert_eq!(dec.decode(p0, 1.0 - p0), bit);
        }
        assert_eq!(dec.codeword_length(), w.len());
    }

    #[test]
    fn extreme_probabilities_stay_decodable() {
        let cases = [(true, 1.0, 1e-300), (false, 1e-300, 1.0), (true, 1.0, 0.0), (false, 0.5, 0.5)];
        let mut w = BitWriter::new();
        let mut enc = BinaryEncoder::new(&mut w);
        for &(bit, p0, p1) in &cases {
            enc.encode(bit, p0, p1);
        }
        enc.finish();
        let mut dec = BinaryDecoder::new(BitReader::new(w.bytes(), w.len()));
        for &(bit, p0, p1) in &cases {
            assert_eq!(dec.decode(p0, p1), bit);
        }
    }
}
