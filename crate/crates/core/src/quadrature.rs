//! Gauss-Legendre rules on arbitrary intervals.
//!
//! An n-point rule integrates polynomials of degree 2n-1 exactly; every
//! integral in this crate picks a rule that is exact for its integrand.

/// (node, weight) pairs on the reference interval [-1, 1].
const GAUSS_1: [(f64, f64); 1] = [(0.0, 2.0)];

const GAUSS_2: [(f64, f64); 2] = [
    (-0.577_350_269_189_625_8, 1.0),
    (0.577_350_269_189_625_8, 1.0),
];

const GAUSS_3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    (0.0, 0.888_888_888_888_888_8),
    (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
];

const GAUSS_4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_86),
];

const GAUSS_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

const GAUSS_10: [(f64, f64); 10] = [
    (-0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
    (-0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (-0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (-0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (-0.148_874_338_981_631_21, 0.295_524_224_714_752_87),
    (0.148_874_338_981_631_21, 0.295_524_224_714_752_87),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
];

/// Reference rule with `points` nodes. Supported sizes: 1-5 and 10.
pub fn gauss_rule(points: usize) -> &'static [(f64, f64)] {
    match points {
        1 => &GAUSS_1,
        2 => &GAUSS_2,
        3 => &GAUSS_3,
        4 => &GAUSS_4,
        5 => &GAUSS_5,
        10 => &GAUSS_10,
        _ => panic!("no {points}-point Gauss rule tabulated"),
    }
}

/// Integrate `f` over [a, b] with an n-point Gauss rule.
pub fn integrate(a: f64, b: f64, points: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(xi, w) in gauss_rule(points) {
        acc += w * f(mid + half * xi);
    }
    acc * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_their_exact_degree() {
        // n points must integrate x^(2n-1) exactly.
        for &n in &[1usize, 2, 3, 4, 5, 10] {
            let degree = 2 * n - 1;
            let exact = 1.0 / (degree as f64 + 1.0); // int_0^1 x^d dx
            let got = integrate(0.0, 1.0, n, |x| x.powi(degree as i32));
            assert!(
                (got - exact).abs() < 1e-14,
                "rule {n} degree {degree}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for &n in &[1usize, 2, 3, 4, 5, 10] {
            let got = integrate(-2.0, 3.5, n, |_| 1.0);
            assert!((got - 5.5).abs() < 1e-13);
        }
    }
}
