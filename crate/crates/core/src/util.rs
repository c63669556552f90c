//! Small shared helpers: FNV-1a hashing for fingerprints and seed
//! derivation for per-component RNG streams.

/// Incremental FNV-1a (64-bit).
#[derive(Debug, Clone)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

impl Fnv1a {
    pub fn new() -> Fnv1a {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn write(&mut self, bytes: &[u8]) -> &mut Self {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
        self
    }

    pub fn write_u64(&mut self, v: u64) -> &mut Self {
        self.write(&v.to_le_bytes())
    }

    pub fn write_f64(&mut self, v: f64) -> &mut Self {
        self.write(&v.to_bits().to_le_bytes())
    }

    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write(s.as_bytes()).write(&[0xff])
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// All randomness flows from one root seed; per-component streams are
/// derived by hashing the root with a component tag and integer parts.
pub fn derive_seed(root: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(root).write_str(tag);
    for &p in parts {
        h.write_u64(p);
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_tags_and_parts_give_distinct_seeds() {
        let a = derive_seed(7, "synth", &[1, 2]);
        let b = derive_seed(7, "synth", &[2, 1]);
        let c = derive_seed(7, "svm", &[1, 2]);
        let d = derive_seed(8, "synth", &[1, 2]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(
            derive_seed(42, "fold", &[3]),
            derive_seed(42, "fold", &[3])
        );
    }
}
