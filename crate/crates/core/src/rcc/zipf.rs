//! Zipf model for candidate indices and its exact binary-split coder.

use super::arith::{BinaryDecoder, BinaryEncoder, BitReader, BitWriter};
use crate::error::{domain, Error, Result};
use crate::special::LOG2_E;

/// Largest index the serializer accepts.
pub const MAX_INDEX: u64 = 1 << 62;

const DIRECT_TERMS: u64 = 64;
/// `B_{2k} / (2k)!` for k = 1..=6.
const EM_COEFFS: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
];

/// `λ = 1 + 1/(I + e⁻¹ log₂ e + 1)` for an information content `I` in bits.
pub fn zipf_exponent(info_bits: f64) -> Result<f64> {
    if !(info_bits >= 0.0) {
        return domain(format!("information content {info_bits} must be non-negative"));
    }
    Ok(1.0 + 1.0 / (info_bits + LOG2_E / std::f64::consts::E + 1.0))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 1.0 && lambda.is_finite() {
        Ok(())
    } else {
        domain(format!("Zipf exponent {lambda} must exceed 1"))
    }
}

fn power(n: f64, lambda: f64) -> f64 {
    (-lambda * n.ln()).exp()
}

/// Euler–Maclaurin terms `Σ B_2k/(2k)! (λ)_{2k−1} x^{−λ−2k+1}` at one endpoint.
fn em_tail_terms(x: f64, lambda: f64) -> f64 {
    let mut rising = lambda;
    let mut xp = power(x, lambda) / x;
    let inv_x2 = 1.0 / (x * x);
    let mut sum = 0.0;
    for (k, c) in EM_COEFFS.iter().enumerate() {
        sum += c * rising * xp;
        let m = (2 * k + 1) as f64;
        rising *= (lambda + m) * (lambda + m + 1.0);
        xp *= inv_x2;
    }
    sum
}

/// `Σ_{n=a}^{b} n^{−λ}` by Euler–Maclaurin with both endpoints ≥ 64.
fn em_range(a: u64, b: u64, lambda: f64) -> f64 {
    let (af, bf) = (a as f64, b as f64);
    let log_ratio = ((b - a) as f64 / af).ln_1p();
    let integral = power(af, lambda) * af * -((1.0 - lambda) * log_ratio).exp_m1() / (lambda - 1.0);
    integral + 0.5 * (power(af, lambda) + power(bf, lambda)) + em_tail_terms(af, lambda)
        - em_tail_terms(bf, lambda)
}

/// Truncated Zipf masses with the small-index prefix sums cached.
struct ZipfMasses {
    lambda: f64,
    prefix: [f64; DIRECT_TERMS as usize],
}

impl ZipfMasses {
    fn new(lambda: f64) -> Self {
        let mut prefix = [0.0; DIRECT_TERMS as usize];
        for n in 1..DIRECT_TERMS as usize {
            prefix[n] = prefix[n - 1] + power(n as f64, lambda);
        }
        ZipfMasses { lambda, prefix }
    }

    /// `Σ_{n=a}^{b} n^{−λ}` for `1 ≤ a ≤ b`.
    fn mass(&self, a: u64, b: u64) -> f64 {
        if a >= DIRECT_TERMS {
            return em_range(a, b, self.lambda);
        }
        let last = b.min(DIRECT_TERMS - 1) as usize;
        let mut sum = self.prefix[last] - self.prefix[a as usize - 1];
        if b >= DIRECT_TERMS {
            sum += em_range(DIRECT_TERMS, b, self.lambda);
        }
        sum
    }

    fn split_masses(&self, lo: u64, mid: u64, hi: u64) -> (f64, f64) {
        (self.mass(lo, mid), self.mass(mid + 1, hi))
    }
}

/// `Σ_{n=a}^{b} n^{−λ}` for `1 ≤ a ≤ b`.
pub fn range_mass(a: u64, b: u64, lambda: f64) -> f64 {
    ZipfMasses::new(lambda).mass(a, b)
}

/// Riemann zeta `ζ(λ)` for `λ > 1`.
pub fn zeta(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let head: f64 = (1..DIRECT_TERMS).map(|n| power(n as f64, lambda)).sum();
    let a = DIRECT_TERMS as f64;
    let tail = power(a, lambda) * a / (lambda - 1.0) + 0.5 * power(a, lambda) + em_tail_terms(a, lambda);
    Ok(head + tail)
}

/// Ideal codelength `−log₂(n^{−λ}/ζ(λ))` in bits.
pub fn zipf_codelength(n: u64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return domain("Zipf index must be at least 1");
    }
    Ok(lambda * (n as f64).log2() + zeta(lambda)?.log2())
}

/// Walks the binary-split tree over `[1, MAX_INDEX]`; `visit` receives the
/// masses of the two halves and says whether to descend right.
fn walk<F: FnMut(f64, f64) -> Result<bool>>(lambda: f64, mut visit: F) -> Result<u64> {
    let masses = ZipfMasses::new(lambda);
    let (mut lo, mut hi) = (1u64, MAX_INDEX);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let (left, right) = masses.split_masses(lo, mid, hi);
        if visit(left, right)? {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Appends the prefix-free code for `n` under the truncated Zipf(λ) model.
pub fn write_index(writer: &mut BitWriter, n: u64, lambda: f64) -> Result<()> {
    check_lambda(lambda)?;
    if n == 0 || n > MAX_INDEX {
        return Err(Error::Range(n));
    }
    let mut enc = BinaryEncoder::new(writer);
    let (mut lo, mut hi) = (1u64, MAX_INDEX);
    walk(lambda, |left_mass, right_mass| {
        let mid = lo + (hi - lo) / 2;
        let right = n > mid;
        enc.encode(right, left_mass, right_mass);
        if right {
            lo = mid + 1;
        } else {
            hi = mid;
        }
        Ok(right)
    })?;
    enc.finish();
    Ok(())
}

/// Reads one index written by [`write_index`].
///
/// Fails with a framing error if the code would extend past the end of the
/// input or the bits are not the canonical code of the decoded index.
pub fn read_index(reader: &mut BitReader<'_>, lambda: f64) -> Result<u64> {
    check_lambda(lambda)?;
    let start = reader.position();
    let mut dec = BinaryDecoder::new(reader.clone());
    let n = walk(lambda, |left, right| Ok(dec.decode(left, right)))?;
    let length = dec.codeword_length();
    if start + length > reader.len() {
        return Err(Error::Framing(format!(
            "index code needs {length} bits at offset {start}, only {} remain",
            reader.len() - start
        )));
    }
    let mut canonical = BitWriter::new();
    write_index(&mut canonical, n, lambda)?;
    let matches = canonical.len() == length
        && (0..length).all(|i| canonical.bit(i) == reader.bit(start + i));
    if !matches {
        return Err(Error::Framing(format!("non-canonical index code at offset {start}")));
    }
    reader.skip(length);
    Ok(n)
}

/// Standalone serialization of a single index.
pub fn serialize_index(n: u64, lambda: f64) -> Result<BitWriter> {
    let mut w = BitWriter::new();
    write_index(&mut w, n, lambda)?;
    Ok(w)
}

pub fn deserialize_index(bytes: &[u8], len_bits: usize, lambda: f64) -> Result<u64> {
    read_index(&mut BitReader::new(bytes, len_bits), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_values() {
        assert!((zipf_exponent(0.0).unwrap() - 1.653_279_7).abs() < 1e-7);
        assert!((zipf_exponent(10.0).unwrap() - 1.086_724_7).abs() < 1e-7);
        assert!(zipf_exponent(1e12).unwrap() > 1.0);
        assert!(zipf_exponent(-1.0).is_err());
    }

    #[test]
    fn zeta_closed_forms() {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        assert!((zeta(2.0).unwrap() - pi2 / 6.0).abs() < 1e-13);
        assert!((zeta(4.0).unwrap() - pi2 * pi2 / 90.0).abs() < 1e-13);
        // ζ(1+ε) = 1/ε + γ + O(ε)
        let lambda = 1.0 + 1e-6;
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((zeta(lambda).unwrap() - 1.0 / (lambda - 1.0) - euler_gamma).abs() < 1e-6);
        assert!(zeta(1.0).is_err());
        assert!((zipf_codelength(1, 2.0).unwrap() - (pi2 / 6.0).log2()).abs() < 1e-13);
        assert!((zipf_codelength(1, 2.0).unwrap() - 0.718_029_758_223).abs() < 1e-11);
    }

    #[test]
    fn range_mass_matches_direct_sum_and_tails() {
        for &lambda in &[1.05, 1.3, 2.0] {
            for &(a, b) in &[(1u64, 500u64), (70, 1000), (100, 5000), (3, 3)] {
                let direct: f64 = (a..=b).map(|n| (n as f64).powf(-lambda)).sum();
                let em = range_mass(a, b, lambda);
                assert!((em / direct - 1.0).abs() < 1e-13, "λ={lambda} [{a},{b}]");
            }
            if lambda < 1.5 {
                let whole = range_mass(1, MAX_INDEX, lambda);
                let tail = (MAX_INDEX as f64).powf(1.0 - lambda) / (lambda - 1.0);
                assert!(((zeta(lambda).unwrap() - whole) / tail - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn codelength_is_monotone() {
        let mut prev = 0.0;
        for n in 1..200 {
            let l = zipf_codelength(n, 1.2).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn round_trip_and_length_bound() {
        for &lambda in &[1.0001, 1.1, 1.653, 2.0, 6.0] {
            for &n in &[1u64, 2, 3, 17, 1000, 123_456_789, (1 << 40) + 7, MAX_INDEX - 1, MAX_INDEX] {
                let w = serialize_index(n, lambda).unwrap();
                assert_eq!(deserialize_index(w.bytes(), w.len(), lambda).unwrap(), n);
                let ideal = zipf_codelength(n, lambda).unwrap();
                assert!((w.len() as f64) <= ideal + 2.0 + 1e-6, "λ={lambda} n={n}: {} vs {ideal}", w.len());
            }
        }
    }

    #[test]
    fn rejects_out_of_range_and_truncation() {
        assert!(matches!(serialize_index(0, 1.5), Err(Error::Range(0))));
        assert!(matches!(serialize_index(MAX_INDEX + 1, 1.5), Err(Error::Range(_))));
        let w = serialize_index(987_654, 1.1).unwrap();
        for cut in 0..w.len() {
            let r = deserialize_index(w.bytes(), cut, 1.1);
            assert!(matches!(r, Err(Error::Framing(_))), "cut {cut}: {r:?}");
        }
    }

    #[test]
    fn concatenated_codes_are_self_delimiting() {
        let indices = [5u64, 1, 1, 99_999, 2, 7_777_777_777];
        let mut w = BitWriter::new();
        for &n in &indices {
            write_index(&mut w, n, 1.2).unwrap();
        }
        let mut r = BitReader::new(w.bytes(), w.len());
        for &n in &indices {
            assert_eq!(read_index(&mut r, 1.2).unwrap(), n);
        }
        assert_eq!(r.position(), w.len());
    }
}
