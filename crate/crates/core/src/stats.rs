//! Performance statistics: Sharpe, Spearman IC, win rate, drawdown, t-test
//! p-values and significance stars.

use serde::{Deserialize, Serialize};

use crate::domain::EventLabel;
use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

fn moments(returns: &[f64]) -> Result<(f64, f64)> {
    if returns.len() < 2 {
        return Err(Error::TooFewSamples {
            n: returns.len(),
            required: 2,
        });
    }
    let first = returns[0];
    if returns.iter().all(|&r| r == first) {
        return Err(Error::ZeroVariance);
    }
    let sd = sample_std(returns);
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((mean(returns), sd))
}

/// Per-period (not annualized) Sharpe: mean over sample standard deviation.
pub fn sharpe(returns: &[f64]) -> Result<f64> {
    let (m, sd) = moments(returns)?;
    Ok(m / sd)
}

/// 1-based ranks with ties given the average of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share rank mean(i+1..=j).
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| (sxy / denom).clamp(-1.0, 1.0))
}

/// Spearman rank correlation of (exposure, forward return) pairs.
pub fn spearman_ic(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::TooFewSamples {
            n: pairs.len(),
            required: 3,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson(&average_ranks(&xs), &average_ranks(&ys)).ok_or(Error::ZeroRankVariance)
}

/// IC aggregation across event samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcMode {
    /// One Spearman over all samples of a label.
    #[default]
    Pooled,
    /// Mean of per-date Spearman values (dates with a defined IC only).
    DailyMean,
}

pub fn daily_mean_ic<'a>(groups: impl IntoIterator<Item = &'a [(f64, f64)]>) -> Option<f64> {
    let ics: Vec<f64> = groups
        .into_iter()
        .filter_map(|g| spearman_ic(g).ok())
        .collect();
    (!ics.is_empty()).then(|| mean(&ics))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Fraction of entries whose realized sign equals the predicted sign.
/// A zero return matches only a zero prediction.
pub fn win_rate(predicted: &[i8], realized: &[f64]) -> Result<f64> {
    if predicted.len() != realized.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: realized.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewSamples { n: 0, required: 1 });
    }
    let hits = predicted
        .iter()
        .zip(realized)
        .filter(|(&p, &r)| p.signum() == sign(r))
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Lanczos approximation (g = 7, 9 terms) of ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b). `y` must equal `1 - x`; passing
/// it separately keeps precision when x is close to 1.
pub fn reg_inc_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// Student's t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: u32) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let nu = f64::from(df);
    let t2 = t * t;
    let x = nu / (nu + t2);
    let y = t2 / (nu + t2);
    let tail = 0.5 * reg_inc_beta(nu / 2.0, 0.5, x, y);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided one-sample t-test of zero mean: t = mean / (std / sqrt n), df = n - 1.
pub fn t_test_pvalue(mean: f64, std: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewSamples { n, required: 2 });
    }
    if std.is_nan() || std <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (std / (n as f64).sqrt());
    Ok(pvalue_from_t(t, n))
}

fn pvalue_from_t(t: f64, n: usize) -> f64 {
    (2.0 * student_t_cdf(-t.abs(), (n - 1) as u32)).min(1.0)
}

/// Largest peak-to-trough decline, as a fraction in `[-1, 0]`.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.min(e / peak - 1.0);
    }
    worst
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// One row of a per-label metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub label: EventLabel,
    pub n: usize,
    pub mean_ret: f64,
    pub std_ret: f64,
    /// `None` when the IC is undefined (tied ranks, too few pairs).
    pub ic: Option<f64>,
    pub sharpe: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

pub fn metrics_row(label: EventLabel, samples: &[f64], ic_pairs: &[(f64, f64)]) -> Result<MetricsRow> {
    let (m, sd) = moments(samples)?;
    let ic = match spearman_ic(ic_pairs) {
        Ok(v) => Some(v),
        Err(Error::ZeroRankVariance | Error::TooFewSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    row_from_parts(label, samples.len(), m, sd, ic)
}

pub(crate) fn row_from_parts(label: EventLabel, n: usize, m: f64, sd: f64, ic: Option<f64>) -> Result<MetricsRow> {
    let s = m / sd;
    let p = pvalue_from_t(s * (n as f64).sqrt(), n);
    Ok(MetricsRow {
        label,
        n,
        mean_ret: m,
        std_ret: sd,
        ic,
        sharpe: s,
        p_value: p,
        stars: significance_stars(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Taxonomy;
    use proptest::prelude::*;

    /// n values with exactly the requested sample mean and standard deviation.
    fn with_moments(n: usize, m: f64, sd: f64) -> Vec<f64> {
        let z: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
        let zsd = sample_std(&z);
        z.iter().map(|v| m + sd * v / zsd).collect()
    }

    #[test]
    fn sharpe_fixture_matches_printed_row() {
        let r = with_moments(130, -0.0046, 0.0137);
        let s = sharpe(&r).unwrap();
        assert!((s - (-0.0046 / 0.0137)).abs() < 1e-12);
        assert!((s - (-0.3370)).abs() <= 0.02);
    }

    #[test]
    fn sharpe_degenerate_inputs() {
        assert!(matches!(sharpe(&[0.1, 0.1, 0.1]), Err(Error::ZeroVariance)));
        assert!(matches!(sharpe(&[0.1]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn sharpe_scale_and_sign() {
        let r = [0.01, -0.02, 0.03, 0.005];
        let s = sharpe(&r).unwrap();
        let doubled: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        assert!((sharpe(&doubled).unwrap() - s).abs() < 1e-15);
        assert_eq!(sharpe(&neg).unwrap(), -s);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_perfect_monotone() {
        let up: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i as f64).exp())).collect();
        let down: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -(i as f64).powi(3))).collect();
        assert_eq!(spearman_ic(&up).unwrap(), 1.0);
        assert_eq!(spearman_ic(&down).unwrap(), -1.0);
    }

    #[test]
    fn spearman_degenerate() {
        assert!(matches!(spearman_ic(&[(1.0, 2.0), (2.0, 3.0)]), Err(Error::TooFewSamples { .. })));
        assert!(matches!(
            spearman_ic(&[(1.0, 2.0), (1.0, 3.0), (1.0, 1.0)]),
            Err(Error::ZeroRankVariance)
        ));
    }

    #[test]
    fn daily_ic_skips_undefined_days() {
        let d1 = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        let d2 = [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)];
        let d3 = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (4.0, 0.0)];
        assert_eq!(daily_mean_ic([&d1[..], &d2[..], &d3[..]]), Some(0.0));
        assert_eq!(daily_mean_ic([&d2[..]]), None);
    }

    #[test]
    fn win_rate_cases() {
        assert_eq!(win_rate(&[1, 1, 1], &[0.01, 0.2, 1e-9]).unwrap(), 1.0);
        assert_eq!(win_rate(&[1, -1], &[-0.01, 0.01]).unwrap(), 0.0);
        assert_eq!(win_rate(&[0, 1], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(win_rate(&[1], &[0.1, 0.2]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn t_cdf_basics() {
        for df in [1, 2, 5, 30, 129] {
            assert_eq!(student_t_cdf(0.0, df), 0.5);
        }
        assert!(student_t_cdf(100.0, 10) > 1.0 - 1e-12);
        // Cauchy closed form for df = 1.
        for t in [-5.0, -1.0, 0.3, 2.0, 7.5] {
            let exact = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1) - exact).abs() < 1e-13);
        }
        // df = 2 closed form: 1/2 + t / (2 sqrt(2 + t^2)).
        for t in [-3.0f64, -0.5, 1.0, 4.0] {
            let exact = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert!((student_t_cdf(t, 2) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        // ln(10!) = ln 3628800
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pvalues_from_printed_rows() {
        for (s, n, p) in [(-0.3370, 130usize, 0.0002), (-0.3586, 92, 0.0009), (-0.6606, 25, 0.0030)] {
            let got = t_test_pvalue(s, 1.0, n).unwrap();
            assert!((got - p).abs() <= 0.0005, "{s} {n}: {got}");
        }
        assert!(matches!(t_test_pvalue(0.1, 0.0, 10), Err(Error::ZeroVariance)));
    }

    #[test]
    fn drawdown_cases() {
        assert_eq!(max_drawdown(&[1.0, 1.0, 1.5, 2.0]), 0.0);
        assert!((max_drawdown(&[1.0, 1.2, 0.9, 1.1]) - (0.9 / 1.2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(significance_stars(0.0002), "***");
        assert_eq!(significance_stars(0.0030), "**");
        assert_eq!(significance_stars(0.0125), "*");
        assert_eq!(significance_stars(0.0927), "");
        assert_eq!(significance_stars(0.05), "");
        assert_eq!(significance_stars(0.001), "**");
    }

    #[test]
    fn metrics_row_assembly() {
        let tax = Taxonomy::default_labels();
        let label = tax.label("Speculation/Rumor").unwrap();
        let r = with_moments(130, -0.0046, 0.0137);
        let pairs: Vec<(f64, f64)> = r.iter().enumerate().map(|(i, &x)| (i as f64, x)).collect();
        let row = metrics_row(label.clone(), &r, &pairs).unwrap();
        assert_eq!(row.n, 130);
        assert!((row.sharpe - row.mean_ret / row.std_ret).abs() < 1e-12);
        assert!((row.p_value - 0.0002).abs() <= 0.0005);
        assert_eq!(row.stars, "***");
        assert_eq!(row.ic, Some(1.0));

        assert!(matches!(metrics_row(label.clone(), &[0.1], &[]), Err(Error::TooFewSamples { .. })));
        let tied: Vec<(f64, f64)> = r.iter().map(|&x| (0.5, x)).collect();
        assert_eq!(metrics_row(label, &r, &tied).unwrap().ic, None);
    }

    proptest! {
        #[test]
        fn t_cdf_symmetry(t in -50.0f64..50.0, df in 1u32..300) {
            let s = student_t_cdf(t, df) + student_t_cdf(-t, df);
            prop_assert!((s - 1.0).abs() < 1e-10);
            let c = student_t_cdf(t, df);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn sharpe_invariances(r in prop::collection::vec(-0.1f64..0.1, 3..50), c in 0.01f64..100.0) {
            if let Ok(s) = sharpe(&r) {
                let scaled: Vec<f64> = r.iter().map(|x| c * x).collect();
                let neg: Vec<f64> = r.iter().map(|x| -x).collect();
                prop_assert!((sharpe(&scaled).unwrap() - s).abs() < 1e-9 * (1.0 + s.abs()));
                prop_assert_eq!(sharpe(&neg).unwrap(), -s);
            }
        }

        #[test]
        fn spearman_monotone_transform_invariant(
            pairs in prop::collection::vec((-5i32..5, -100.0f64..100.0), 3..60)
        ) {
            let p: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x as f64, y)).collect();
            let q: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (x.exp(), y * y * y + 3.0 * y)).collect();
            match (spearman_ic(&p), spearman_ic(&q)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&a));
                }
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn drawdown_bounds(steps in prop::collection::vec(-0.2f64..0.2, 1..100)) {
            let mut e = 1.0;
            let curve: Vec<f64> = steps.iter().map(|s| { e *= (*s).exp(); e }).collect();
            let dd = max_drawdown(&curve);
            prop_assert!((-1.0..=0.0).contains(&dd));
            let nondecreasing = curve.windows(2).all(|w| w[1] >= w[0]);
            prop_assert_eq!(dd == 0.0, nondecreasing);
        }
    }
}
