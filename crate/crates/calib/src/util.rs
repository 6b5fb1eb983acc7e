//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) accumulator. Used wherever a sum feeds a reported
/// statistic, so aggregation error stays at one ulp independent of length and
/// results are bit-stable under refactoring of the surrounding loop.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Derive an independent stream seed from a master seed and a stream index
/// (splitmix64-style avalanche). Adjacent indices give statistically unrelated
/// seeds, so replicates can be enumerated in parallel while every stream stays
/// reproducible.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Format a float with 17 significant digits (lossless f64 round-trip) for
/// CSV output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        // 1 + 1e-16 repeated: naive summation loses the small terms entirely.
        let mut vals = vec![1.0];
        vals.extend(std::iter::repeat(1e-16).take(100));
        let total = compensated_sum(vals.iter().copied());
        assert!((total - (1.0 + 100.0 * 1e-16)).abs() < 1e-18);
    }

    #[test]
    fn mix_seed_spreads_indices() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // avalanche: low bit of index flips about half the output bits
        assert!((a ^ b).count_ones() > 16);
    }

    #[test]
    fn fmt_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.powi(-40), 12345.678910111213] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
