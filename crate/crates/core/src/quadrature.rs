//! Quadrature on the reference triangle (barycentric points, weights summing
//! to one) and on edges (parameter in `[0, 1]`, weights summing to one).
//! Multiply weights by the element area or edge length.

/// Symmetric triangle rule in barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

/// Gauss rule on the unit interval.
#[derive(Debug, Clone, Copy)]
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
    pub degree: u32,
}

const D4_A: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
const D4_B: f64 = 0.091_576_213_509_770_743_459_571_463_402_202;
const D4_WA: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
const D4_WB: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;

/// Dunavant 6-point rule, exact to degree 4.
pub const TRI_DEGREE_4: TriangleRule = TriangleRule {
    points: &[
        [D4_A, D4_A, 1.0 - 2.0 * D4_A],
        [D4_A, 1.0 - 2.0 * D4_A, D4_A],
        [1.0 - 2.0 * D4_A, D4_A, D4_A],
        [D4_B, D4_B, 1.0 - 2.0 * D4_B],
        [D4_B, 1.0 - 2.0 * D4_B, D4_B],
        [1.0 - 2.0 * D4_B, D4_B, D4_B],
    ],
    weights: &[D4_WA, D4_WA, D4_WA, D4_WB, D4_WB, D4_WB],
    degree: 4,
};

const D6_A: f64 = 0.249_286_745_170_910_421_291_638_553_107_02;
const D6_B: f64 = 0.063_089_014_491_502_228_340_331_602_870_819;
const D6_C1: f64 = 0.053_145_049_844_816_947_353_249_671_631_398;
const D6_C2: f64 = 0.310_352_451_033_784_405_416_607_733_956_55;
const D6_C3: f64 = 0.636_502_499_121_398_647_230_142_594_412_05;
const D6_WA: f64 = 0.116_786_275_726_379_366_025_289_611_385_58;
const D6_WB: f64 = 0.050_844_906_370_206_816_920_936_809_106_869;
const D6_WC: f64 = 0.082_851_075_618_373_575_193_553_456_420_442;

/// Dunavant 12-point rule, exact to degree 6.
pub const TRI_DEGREE_6: TriangleRule = TriangleRule {
    points: &[
        [D6_A, D6_A, 1.0 - 2.0 * D6_A],
        [D6_A, 1.0 - 2.0 * D6_A, D6_A],
        [1.0 - 2.0 * D6_A, D6_A, D6_A],
        [D6_B, D6_B, 1.0 - 2.0 * D6_B],
        [D6_B, 1.0 - 2.0 * D6_B, D6_B],
        [1.0 - 2.0 * D6_B, D6_B, D6_B],
        [D6_C1, D6_C2, D6_C3],
        [D6_C1, D6_C3, D6_C2],
        [D6_C2, D6_C1, D6_C3],
        [D6_C2, D6_C3, D6_C1],
        [D6_C3, D6_C1, D6_C2],
        [D6_C3, D6_C2, D6_C1],
    ],
    weights: &[
        D6_WA, D6_WA, D6_WA, D6_WB, D6_WB, D6_WB, D6_WC, D6_WC, D6_WC, D6_WC, D6_WC, D6_WC,
    ],
    degree: 6,
};

// 0.5 * sqrt(3/5)
const G3_OFF: f64 = 0.387_298_334_620_741_688_517_926_539_978_24;

/// Three-point Gauss–Legendre, exact to degree 5.
pub const EDGE_GAUSS_3: EdgeRule = EdgeRule {
    points: &[0.5 - G3_OFF, 0.5, 0.5 + G3_OFF],
    weights: &[5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
    degree: 5,
};

impl TriangleRule {
    /// Physical points and area-scaled weights on the triangle `v`.
    pub fn map(&self, v: &[[f64; 2]; 3], area: f64) -> impl Iterator<Item = ([f64; 2], [f64; 3], f64)> + '_ {
        let v = *v;
        self.points.iter().zip(self.weights).map(move |(l, &w)| {
            let x = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let y = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            ([x, y], *l, w * area)
        })
    }
}

impl EdgeRule {
    /// Physical points, the two endpoint shape-function values and
    /// length-scaled weights on the segment `a → b`.
    pub fn map(&self, a: [f64; 2], b: [f64; 2]) -> impl Iterator<Item = ([f64; 2], [f64; 2], f64)> + '_ {
        let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
        self.points.iter().zip(self.weights).map(move |(&t, &w)| {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            (x, [1.0 - t, t], w * len)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫_T λ1^i λ2^j dA = i! j! / (i + j + 2)! on the unit right triangle
    fn exact_monomial(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    fn check_triangle(rule: &TriangleRule) {
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-14);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        for deg in 0..=rule.degree {
            for i in 0..=deg {
                let j = deg - i;
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(rule.weights)
                    .map(|(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32))
                    .sum();
                let exact = exact_monomial(i, j);
                assert!((q - exact).abs() < 1e-14, "x^{i} y^{j}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn degree_four_rule_is_exact() {
        check_triangle(&TRI_DEGREE_4);
    }

    #[test]
    fn degree_six_rule_is_exact() {
        check_triangle(&TRI_DEGREE_6);
    }

    #[test]
    fn degree_four_rule_misses_degree_five() {
        let q: f64 = TRI_DEGREE_4
            .points
            .iter()
            .zip(TRI_DEGREE_4.weights)
            .map(|(l, w)| 0.5 * w * l[1].powi(5))
            .sum();
        assert!((q - exact_monomial(5, 0)).abs() > 1e-8);
    }

    #[test]
    fn edge_gauss_is_exact_to_degree_five() {
        for k in 0..=5 {
            let q: f64 = EDGE_GAUSS_3
                .points
                .iter()
                .zip(EDGE_GAUSS_3.weights)
                .map(|(t, w)| w * t.powi(k))
                .sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
