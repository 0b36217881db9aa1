//! Sample statistics with fixed-order summation, plus the standard normal
//! distribution helpers shared by several modules.

use statrs::function::erf::erfc;

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF: Acklam's rational approximation
/// (relative error ~1e-9) followed by one Halley step.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
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
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; the residual uses erfc in whichever tail is
    // smaller to avoid cancellation.
    let e = if x < 0.0 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    };
    let u = e / normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Mean and standard error (sample sd / √n) summed in slice order.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Column means of a row-major table.
pub fn column_means<const K: usize>(rows: &[[f64; K]]) -> [f64; K] {
    let mut acc = [0.0; K];
    for r in rows {
        for j in 0..K {
            acc[j] += r[j];
        }
    }
    let n = rows.len().max(1) as f64;
    acc.map(|a| a / n)
}

/// Delta-method standard error of `g(column means)` given `∇g` at the
/// means: the standard error of the per-row linearisation `Σ ∇g_j q_j`.
pub fn delta_se<const K: usize>(rows: &[[f64; K]], grad: &[f64; K]) -> f64 {
    let lin: Vec<f64> = rows.iter().map(|r| r.iter().zip(grad).map(|(q, g)| q * g).sum()).collect();
    mean_se(&lin).1
}

/// Two-sided Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

/// Least-squares line `y = a + b x`; returns `(a, b, max |residual|)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let resid = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).abs()).fold(0.0, f64::max);
    (a, b, resid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-12 * p.max(1e-3), "p={p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn mean_se_small_cases() {
        assert_eq!(mean_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.1, 0.2, 0.3, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let (a, b, r) = linear_fit(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-12 && (b + 3.0).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let mut s: Vec<f64> = (0..n).map(|i| normal_quantile((i as f64 + 0.5) / n as f64)).collect();
        assert!(ks_statistic(&mut s, normal_cdf) <= 0.5 / n as f64 + 1e-12);
    }
}
