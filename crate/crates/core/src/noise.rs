//! Sensor noise distributions with an invertible CDF.

use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Zero-mean noise with a continuous, strictly increasing CDF `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { std_dev: f64 },
    Logistic { scale: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { std_dev: 1.0 }
    }
}

impl NoiseModel {
    pub fn standard_gaussian() -> Self {
        Self::default()
    }

    /// Scale parameter (standard deviation or logistic scale).
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { std_dev } => std_dev,
            NoiseModel::Logistic { scale } => scale,
        }
    }

    /// Standard deviation of the noise.
    pub fn std_dev(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { std_dev } => std_dev,
            NoiseModel::Logistic { scale } => scale * PI / libm::sqrt(3.0),
        }
    }

    pub fn is_valid(&self) -> bool {
        let s = self.scale();
        s.is_finite() && s > 0.0
    }

    /// `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { std_dev } => 0.5 * libm::erfc(-x / std_dev * FRAC_1_SQRT_2),
            NoiseModel::Logistic { scale } => logistic_cdf(x / scale),
        }
    }

    /// `1 - F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { std_dev } => 0.5 * libm::erfc(x / std_dev * FRAC_1_SQRT_2),
            NoiseModel::Logistic { scale } => logistic_cdf(-x / scale),
        }
    }

    /// Density `F'(x)`.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { std_dev } => {
                let z = x / std_dev;
                libm::exp(-0.5 * z * z) / (std_dev * SQRT_2 * libm::sqrt(PI))
            }
            NoiseModel::Logistic { scale } => {
                let e = libm::exp(-libm::fabs(x) / scale);
                e / (scale * (1.0 + e) * (1.0 + e))
            }
        }
    }

    /// `F^{-1}(p)`; returns `-inf` at `p = 0`, `+inf` at `p = 1` and NaN
    /// outside `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            return f64::NAN;
        }
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p == 1.0 {
            return f64::INFINITY;
        }
        match *self {
            NoiseModel::Gaussian { std_dev } => std_dev * standard_normal_quantile(p),
            NoiseModel::Logistic { scale } => scale * (libm::log(p) - libm::log1p(-p)),
        }
    }
}

fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Standard normal quantile for `p` in `(0, 1)`.
///
/// Acklam's rational approximation (relative error about 1e-9) polished
/// by one Halley step against `erfc`.
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement; the residual is taken in whichever tail keeps it accurate.
    let e = if p < 0.5 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    };
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}
