//! Modified Bessel functions I₀, I₁, K₀, K₁ on the positive real axis.
//!
//! K₀ is the fundamental solution of the screened Poisson operator −Δ + 1 in
//! the plane, so these four functions carry all radially symmetric solutions
//! used by the field ansatz, the 1-D oracle, and the sub/supersolution bounds.
//!
//! Evaluation strategy:
//! * I₀, I₁: ascending power series for x ≤ 8 (all terms positive, no
//!   cancellation), Chebyshev expansion of the scaled asymptotic form
//!   `e^x/√x · P(32/x − 2)` for x > 8.
//! * K₀, K₁: ascending series for x ≤ 2. Beyond 2 the log-series cancellation
//!   exceeds the 1e−12 budget, so the exponentially scaled integral
//!   `K_ν(x)e^x = ∫₀^∞ e^{−x(cosh t − 1)} cosh(νt) dt` is evaluated by the
//!   trapezoidal rule, which converges geometrically for this integrand.

use thiserror::Error;

/// Values of the four modified Bessel functions at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub x: f64,
    pub i0: f64,
    pub i1: f64,
    pub k0: f64,
    pub k1: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BesselError {
    #[error("argument {0} outside domain (K functions require x > 0, I functions x >= 0)")]
    Domain(f64),
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Chebyshev coefficients for I₀(x)·e^{−x}·√x on x ∈ (8, ∞), argument 32/x − 2.
const I0_CHEB_LARGE: [f64; 25] = [
    -7.233_180_487_874_754E-18,
    -4.830_504_485_944_182E-18,
    4.465_621_420_296_76E-17,
    3.461_222_867_697_461E-17,
    -2.827_623_980_516_583_6E-16,
    -3.425_485_619_677_219E-16,
    1.772_560_133_056_526_3E-15,
    3.811_680_669_352_622_4E-15,
    -9.554_846_698_828_307E-15,
    -4.150_569_347_287_222E-14,
    1.540_086_217_521_41E-14,
    3.852_778_382_742_142_6E-13,
    7.180_124_451_383_666E-13,
    -1.794_178_531_506_806_2E-12,
    -1.321_581_184_044_771_3E-11,
    -3.149_916_527_963_241_6E-11,
    1.188_914_710_784_643_9E-11,
    4.940_602_388_224_97E-10,
    3.396_232_025_708_386_5E-9,
    2.266_668_990_498_178E-8,
    2.048_918_589_469_063_8E-7,
    2.891_370_520_834_756_7E-6,
    6.889_758_346_916_825E-5,
    3.369_116_478_255_694_3E-3,
    8.044_904_110_141_088E-1,
];

/// Chebyshev coefficients for I₁(x)·e^{−x}·√x on x ∈ (8, ∞), argument 32/x − 2.
const I1_CHEB_LARGE: [f64; 25] = [
    7.517_296_310_842_105E-18,
    4.414_348_323_071_708E-18,
    -4.650_305_368_489_358E-17,
    -3.209_525_921_993_424E-17,
    2.962_628_997_645_95E-16,
    3.308_202_310_920_928E-16,
    -1.880_354_775_510_782_4E-15,
    -3.814_403_072_437_008E-15,
    1.042_027_698_412_880_3E-14,
    4.272_440_016_711_951E-14,
    -2.101_541_842_772_664_3E-14,
    -4.083_551_111_092_197E-13,
    -7.198_551_776_245_909E-13,
    2.035_628_544_147_089_5E-12,
    1.412_580_743_661_378E-11,
    3.252_603_583_015_488_4E-11,
    -1.897_495_812_350_541_2E-11,
    -5.589_743_462_196_584E-10,
    -3.835_380_385_964_237E-9,
    -2.631_468_846_889_519_5E-8,
    -2.512_236_237_870_209E-7,
    -3.882_564_808_877_69E-6,
    -1.105_889_387_626_237_2E-4,
    -9.761_097_491_361_468E-3,
    7.785_762_350_182_801E-1,
];

fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x.mul_add(b1, *c) - b2;
    }
    0.5 * (b0 - b2)
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..=80u32 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn i1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut sum = 0.5;
    let mut term = 0.5;
    for k in 1..=80u32 {
        term *= q / ((k * (k + 1)) as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    x * sum
}

/// I₀(x) for x ≥ 0.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        i0_series(ax)
    } else {
        ax.exp() * chbevl(32.0 / ax - 2.0, &I0_CHEB_LARGE) / ax.sqrt()
    }
}

/// I₁(x) for x ≥ 0 (odd continuation for negative arguments).
pub fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let r = if ax <= 8.0 {
        i1_series(ax)
    } else {
        ax.exp() * chbevl(32.0 / ax - 2.0, &I1_CHEB_LARGE) / ax.sqrt()
    };
    if x < 0.0 {
        -r
    } else {
        r
    }
}

/// Ascending series for K₀, valid (and cancellation-free) for 0 < x ≤ 2:
/// K₀ = −(ln(x/2) + γ)I₀ + Σ_{k≥1} H_k (x²/4)^k / (k!)².
fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..=40u32 {
        harmonic += 1.0 / k as f64;
        term *= q / ((k * k) as f64);
        sum += term * harmonic;
        if term * harmonic < sum.abs() * 1e-18 + f64::MIN_POSITIVE {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0_series(x) + sum
}

/// Ascending series for K₁ on 0 < x ≤ 2:
/// K₁ = 1/x + ln(x/2)I₁ − (x/4)Σ_{k≥0} (H_k + H_{k+1} − 2γ)(x²/4)^k / (k!(k+1)!).
fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (x²/4)^k / (k!(k+1)!) at k = 0
    let mut hk = 0.0;
    let mut hk1 = 1.0;
    let mut sum = term * (hk + hk1 - 2.0 * EULER_GAMMA);
    for k in 1..=40u32 {
        term *= q / ((k * (k + 1)) as f64);
        hk += 1.0 / k as f64;
        hk1 += 1.0 / (k + 1) as f64;
        let t = term * (hk + hk1 - 2.0 * EULER_GAMMA);
        sum += t;
        if t.abs() < sum.abs() * 1e-18 + f64::MIN_POSITIVE {
            break;
        }
    }
    1.0 / x + (0.5 * x).ln() * i1_series(x) - 0.25 * x * sum
}

/// Exponentially scaled K_ν(x)·e^x via the trapezoidal rule on the cosh
/// integral. Geometric convergence; the step shrinks with √x because the
/// integrand narrows as the saddle sharpens.
fn k_scaled_trapezoid(x: f64, nu: u32) -> f64 {
    let step = 0.1 / (x / 8.0).max(1.0).sqrt();
    // truncate where e^{-x(cosh t - 1)} < 1e-20 relative
    let t_max = (1.0 + 46.0 / x).acosh();
    let n = (t_max / step).ceil() as usize;
    let mut sum = 0.5; // t = 0: integrand 1, half weight
    for i in 1..=n {
        let t = i as f64 * step;
        let w = (-x * (t.cosh() - 1.0)).exp();
        sum += if nu == 0 { w } else { w * t.cosh() };
    }
    sum * step
}

/// K₀(x) for x > 0. The branch point sits at 2: past it the log-series loses
/// more than the 1e−12 budget to cancellation.
pub fn bessel_k0(x: f64) -> Result<f64, BesselError> {
    if x <= 0.0 {
        return Err(BesselError::Domain(x));
    }
    Ok(if x <= 2.0 {
        k0_series(x)
    } else {
        k_scaled_trapezoid(x, 0) * (-x).exp()
    })
}

/// K₁(x) for x > 0.
pub fn bessel_k1(x: f64) -> Result<f64, BesselError> {
    if x <= 0.0 {
        return Err(BesselError::Domain(x));
    }
    Ok(if x <= 2.0 {
        k1_series(x)
    } else {
        k_scaled_trapezoid(x, 1) * (-x).exp()
    })
}

/// All four modified Bessel values at x > 0.
pub fn bessel(x: f64) -> Result<BesselEval, BesselError> {
    if x <= 0.0 {
        return Err(BesselError::Domain(x));
    }
    Ok(BesselEval {
        x,
        i0: bessel_i0(x),
        i1: bessel_i1(x),
        k0: bessel_k0(x)?,
        k1: bessel_k1(x)?,
    })
}

/// Scaled defect of the Wronskian identity I₀(x)K₁(x) + I₁(x)K₀(x) = 1/x,
/// i.e. |I₀K₁ + I₁K₀ − 1/x|·x. A built-in self test hook.
pub fn bessel_wronskian_residual(x: f64) -> Result<f64, BesselError> {
    let b = bessel(x)?;
    Ok(((b.i0 * b.k1 + b.i1 * b.k0) - 1.0 / x).abs() * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: plain power series for I0 plus the log-correction
    // series for K0, summed term by term with no shared code path.
    fn oracle_i0(x: f64) -> f64 {
        let mut s = 1.0;
        let mut t = 1.0;
        for k in 1..=60 {
            t *= (x * x / 4.0) / ((k * k) as f64);
            s += t;
        }
        s
    }

    fn oracle_k0(x: f64) -> f64 {
        let mut s = 0.0;
        let mut t = 1.0;
        let mut hk = 0.0;
        for k in 1..=60 {
            hk += 1.0 / k as f64;
            t *= (x * x / 4.0) / ((k * k) as f64);
            s += t * hk;
        }
        -((x / 2.0).ln() + EULER_GAMMA) * oracle_i0(x) + s
    }

    #[test]
    fn values_at_one_match_series_oracle() {
        let b = bessel(1.0).unwrap();
        assert!((b.k0 - oracle_k0(1.0)).abs() / oracle_k0(1.0) < 1e-14);
        assert!((b.i0 - oracle_i0(1.0)).abs() / oracle_i0(1.0) < 1e-14);
        // frozen oracle outputs
        assert!((b.k0 - 0.421_024_438_240_708_3).abs() < 1e-12);
        assert!((b.i0 - 1.266_065_877_752_008_3).abs() < 1e-12);
    }

    #[test]
    fn small_argument_log_asymptotics() {
        // K0(x) + ln(x/2) + gamma -> 0 as x -> 0+
        for &x in &[1e-3, 1e-5, 1e-8] {
            let k0 = bessel_k0(x).unwrap();
            let defect = k0 + (x / 2.0).ln() + EULER_GAMMA;
            assert!(defect.abs() < 1e-5 * k0, "x={x}: defect {defect}");
        }
        // K0 ~ -log x: ratio within 5% below 1e-3
        for &x in &[1e-3, 1e-4, 1e-6] {
            let r = bessel_k0(x).unwrap() / (-(x.ln()));
            assert!((r - 1.0).abs() <= 0.05, "x={x}: ratio {r}");
        }
    }

    #[test]
    fn value_near_hole_scale() {
        let k0 = bessel_k0(0.05).unwrap();
        assert!((k0 - oracle_k0(0.05)).abs() < 1e-12);
        assert!((k0 - 3.114).abs() < 1e-3);
    }

    #[test]
    fn wronskian_identity_across_range() {
        // log grid over the contract interval
        let (a, b) = (1e-6_f64, 30.0_f64);
        for i in 0..=200 {
            let x = a * (b / a).powf(i as f64 / 200.0);
            let r = bessel_wronskian_residual(x).unwrap();
            assert!(r <= 1e-12, "x={x}: residual {r}");
        }
        assert!(bessel_wronskian_residual(1e-4).unwrap() <= 1e-10);
        assert!(bessel_wronskian_residual(25.0).unwrap() <= 1e-12);
    }

    #[test]
    fn monotone_on_log_grid() {
        let (a, b) = (1e-6_f64, 30.0_f64);
        let mut prev_i0 = f64::NEG_INFINITY;
        let mut prev_k0 = f64::INFINITY;
        for i in 0..=200 {
            let x = a * (b / a).powf(i as f64 / 200.0);
            let e = bessel(x).unwrap();
            assert!(e.i0 > prev_i0, "I0 not increasing at x={x}");
            assert!(e.k0 < prev_k0, "K0 not decreasing at x={x}");
            assert!(e.i0 >= 1.0 && e.k0 > 0.0);
            prev_i0 = e.i0;
            prev_k0 = e.k0;
        }
    }

    #[test]
    fn branch_agreement_at_switch_points() {
        // K branch point 2: series vs scaled integral
        let series = k0_series(2.0);
        let integral = k_scaled_trapezoid(2.0, 0) * (-2.0_f64).exp();
        assert!((series - integral).abs() / series.abs() < 1e-11);
        let series1 = k1_series(2.0);
        let integral1 = k_scaled_trapezoid(2.0, 1) * (-2.0_f64).exp();
        assert!((series1 - integral1).abs() / series1.abs() < 1e-11);
        // I branch point 8: series vs scaled Chebyshev form
        let s = i0_series(8.0);
        let c = 8.0_f64.exp() * chbevl(32.0 / 8.0 - 2.0, &I0_CHEB_LARGE) / 8.0_f64.sqrt();
        assert!((s - c).abs() / s < 1e-11);
        let s1 = i1_series(8.0);
        let c1 = 8.0_f64.exp() * chbevl(32.0 / 8.0 - 2.0, &I1_CHEB_LARGE) / 8.0_f64.sqrt();
        assert!((s1 - c1).abs() / s1 < 1e-11);
    }

    #[test]
    fn rejects_nonpositive_argument() {
        assert!(matches!(bessel(0.0), Err(BesselError::Domain(_))));
        assert!(matches!(bessel(-1.0), Err(BesselError::Domain(_))));
        assert!(bessel_k0(-0.5).is_err());
    }

    #[test]
    fn i_functions_accept_zero() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_eq!(bessel_i1(0.0), 0.0);
    }

    #[test]
    fn k1_matches_derivative_of_k0() {
        // K0'(x) = -K1(x); central finite difference on K0
        for &x in &[0.3, 1.0, 1.9, 2.5, 5.0, 12.0] {
            let h = 1e-6 * x;
            let d = (bessel_k0(x + h).unwrap() - bessel_k0(x - h).unwrap()) / (2.0 * h);
            let k1 = bessel_k1(x).unwrap();
            assert!(
                (d + k1).abs() <= 1e-8 * k1.abs().max(1e-30),
                "x={x}: FD {d} vs -K1 {}",
                -k1
            );
        }
    }
}
