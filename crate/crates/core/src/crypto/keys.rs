//! RSA key generation and the plain-text key fixture format.
//!
//! A fixture is a sequence of blocks separated by blank lines. Each block
//! holds `label`, `n`, `e` and `d`, the numbers in hexadecimal:
//!
//! ```text
//! # comment
//! label = agent
//! n = c0ffee...
//! e = 10001
//! d = 1234...
//! ```

use super::rsa::{RsaKeyPair, MODULUS_BITS};
use super::CryptoError;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use std::sync::OnceLock;

const PUBLIC_EXPONENT: u32 = 65537;
const MILLER_RABIN_ROUNDS: usize = 24;

const SMALL_PRIMES: [u32; 53] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedKeyPair {
    pub label: String,
    pub pair: RsaKeyPair,
}

fn random_bits<R: RngCore>(rng: &mut R, bits: u64) -> BigUint {
    let mut buf = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut buf);
    let excess = buf.len() as u64 * 8 - bits;
    buf[0] &= 0xff >> excess;
    BigUint::from_bytes_be(&buf)
}

fn is_probable_prime<R: RngCore>(n: &BigUint, rng: &mut R) -> bool {
    for &p in &SMALL_PRIMES {
        if (n % p).is_zero() {
            return *n == BigUint::from(p);
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let span = n - 3u32;

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = random_bits(rng, n.bits()) % &span + 2u32;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&BigUint::from(2u32), n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn generate_prime<R: RngCore>(rng: &mut R, bits: u64, e: &BigUint) -> BigUint {
    loop {
        let mut candidate = random_bits(rng, bits);
        // Top two bits set so the product of two such primes has exactly
        // 2 * bits bits.
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if (&candidate - 1u32).gcd(e).is_one() && is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

/// Generates a 1024-bit key pair with `e = 65537`.
pub fn generate_key_pair<R: RngCore + CryptoRng>(rng: &mut R) -> RsaKeyPair {
    let e = BigUint::from(PUBLIC_EXPONENT);
    loop {
        let p = generate_prime(rng, MODULUS_BITS / 2, &e);
        let q = generate_prime(rng, MODULUS_BITS / 2, &e);
        if p == q {
            continue;
        }
        let n = &p * &q;
        let lambda = (&p - 1u32).lcm(&(&q - 1u32));
        let Some(d) = e.modinv(&lambda) else {
            continue;
        };
        if let Ok(pair) = RsaKeyPair::from_components(n, e.clone(), d) {
            return pair;
        }
    }
}

pub fn format_key_fixture(keys: &[NamedKeyPair]) -> String {
    let mut out = String::from("# RSA-1024 key fixture: label, then n, e, d in hexadecimal\n");
    for k in keys {
        out.push('\n');
        out.push_str(&format!("label = {}\n", k.label));
        out.push_str(&format!("n = {}\n", k.pair.modulus().to_str_radix(16)));
        out.push_str(&format!("e = {}\n", k.pair.public_exponent().to_str_radix(16)));
        out.push_str(&format!("d = {}\n", k.pair.private_exponent().to_str_radix(16)));
    }
    out
}

#[derive(Default)]
struct PartialBlock {
    start: usize,
    label: Option<String>,
    n: Option<BigUint>,
    e: Option<BigUint>,
    d: Option<BigUint>,
}

impl PartialBlock {
    fn is_empty(&self) -> bool {
        self.label.is_none() && self.n.is_none() && self.e.is_none() && self.d.is_none()
    }

    fn finish(self) -> Result<NamedKeyPair, CryptoError> {
        let missing =
            |field: &str| CryptoError::Fixture { line: self.start, reason: format!("block is missing `{field}`") };
        let label = self.label.clone().ok_or_else(|| missing("label"))?;
        let n = self.n.clone().ok_or_else(|| missing("n"))?;
        let e = self.e.clone().ok_or_else(|| missing("e"))?;
        let d = self.d.clone().ok_or_else(|| missing("d"))?;
        let pair = RsaKeyPair::from_components(n, e, d)
            .map_err(|err| CryptoError::Fixture { line: self.start, reason: err.to_string() })?;
        Ok(NamedKeyPair { label, pair })
    }
}

pub fn parse_key_fixture(text: &str) -> Result<Vec<NamedKeyPair>, CryptoError> {
    let mut keys = Vec::new();
    let mut block = PartialBlock::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !block.is_empty() {
                keys.push(std::mem::take(&mut block).finish()?);
            }
            continue;
        }
        if block.is_empty() {
            block.start = line_no;
        }
        let err = |reason: String| CryptoError::Fixture { line: line_no, reason };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err("expected `name = value`".into()))?;
        let hex_value =
            || BigUint::parse_bytes(value.as_bytes(), 16).ok_or_else(|| err(format!("`{key}` is not hexadecimal")));
        let slot_taken = match key {
            "label" => block.label.replace(value.to_string()).is_some(),
            "n" => block.n.replace(hex_value()?).is_some(),
            "e" => block.e.replace(hex_value()?).is_some(),
            "d" => block.d.replace(hex_value()?).is_some(),
            other => return Err(err(format!("unknown field `{other}`"))),
        };
        if slot_taken {
            return Err(err(format!("duplicate field `{key}`")));
        }
    }
    if !block.is_empty() {
        keys.push(block.finish()?);
    }
    Ok(keys)
}

static BUILTIN: OnceLock<Vec<NamedKeyPair>> = OnceLock::new();

/// Deterministic keys shipped with the crate: `ca`, `ri`, `agent`, `ri-b`,
/// `agent-b`.
pub fn builtin_keys() -> &'static [NamedKeyPair] {
    BUILTIN.get_or_init(|| {
        parse_key_fixture(include_str!("../../fixtures/keys.txt")).expect("built-in key fixture is valid")
    })
}

/// Panics on a label that is not in [`builtin_keys`].
pub fn builtin_key(label: &str) -> &'static RsaKeyPair {
    &builtin_keys()
        .iter()
        .find(|k| k.label == label)
        .unwrap_or_else(|| panic!("no built-in key labelled `{label}`"))
        .pair
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn primality_on_known_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        // 2^127 - 1 is a Mersenne prime; 2^128 + 1 is composite.
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127, &mut rng));
        let f7 = (BigUint::one() << 128u32) + 1u32;
        assert!(!is_probable_prime(&f7, &mut rng));
        // Carmichael number.
        assert!(!is_probable_prime(&BigUint::from(561u32 * 1_000_003), &mut rng));
        assert!(is_probable_prime(&BigUint::from(1_000_003u32), &mut rng));
    }

    #[test]
    fn generated_key_is_valid_and_deterministic() {
        let a = generate_key_pair(&mut ChaCha20Rng::seed_from_u64(42));
        let b = generate_key_pair(&mut ChaCha20Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert_eq!(a.modulus().bits(), 1024);
        assert_eq!(a.public_exponent(), &BigUint::from(65537u32));
    }

    #[test]
    fn fixture_round_trip() {
        let keys = builtin_keys().to_vec();
        assert_eq!(keys.len(), 5);
        let text = format_key_fixture(&keys);
        assert_eq!(parse_key_fixture(&text).unwrap(), keys);
    }

    #[test]
    fn fixture_errors_carry_line_numbers() {
        let bad = "label = x\nn = zz\n";
        match parse_key_fixture(bad) {
            Err(CryptoError::Fixture { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let incomplete = "\nlabel = x\ne = 3\n";
        match parse_key_fixture(incomplete) {
            Err(CryptoError::Fixture { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("`n`"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_key_fixture("label = a\nlabel = b\n").is_err());
    }
}
