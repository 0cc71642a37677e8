//! 16-point Gauss–Legendre rule on `[-1, 1]`.

/// Positive abscissae; the rule is symmetric.
pub const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];

pub const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// Nodes mapped to `[lo, hi]` with matching weights (already scaled by the half-width).
pub fn gl16_on(lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    GL16_NODES
        .iter()
        .zip(GL16_WEIGHTS.iter())
        .flat_map(move |(&x, &w)| [(mid - half * x, half * w), (mid + half * x, half * w)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        let s: f64 = gl16_on(-1.0, 1.0).map(|(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_degree_31() {
        // odd powers vanish, even power 30 integrates to 2/31
        let s30: f64 = gl16_on(-1.0, 1.0).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s30 - 2.0 / 31.0).abs() < 1e-14, "{s30}");
        let s31: f64 = gl16_on(0.0, 1.0).map(|(x, w)| w * x.powi(31)).sum();
        assert!((s31 - 1.0 / 32.0).abs() < 1e-14, "{s31}");
    }
}
