//! Deliberately naive reference implementations used to cross-check the
//! statistics module. Nothing here calls into `crate::stats`.

use crate::error::{Error, Result};

/// Spearman via explicit O(n²) rank counting and the textbook Pearson formula.
pub fn oracle_spearman(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::TooFewSamples { n, required: 3 });
    }
    // rank_i = 1 + #{j : v_j < v_i} + (#{j : v_j == v_i} - 1) / 2
    let rank = |vals: &[f64]| -> Vec<f64> {
        vals.iter()
            .map(|&v| {
                let below = vals.iter().filter(|&&w| w < v).count() as f64;
                let equal = vals.iter().filter(|&&w| w == v).count() as f64;
                1.0 + below + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (rx, ry) = (rank(&xs), rank(&ys));
    let nf = n as f64;
    let mx = rx.iter().sum::<f64>() / nf;
    let my = ry.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::ZeroRankVariance);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Max drawdown by scanning every (peak, later trough) pair.
pub fn oracle_maxdd(equity: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..equity.len() {
        for j in i..equity.len() {
            worst = worst.min(equity[j] / equity[i] - 1.0);
        }
    }
    worst
}

/// Γ((ν+1)/2) / Γ(ν/2) for integer ν via Γ(x+1) = xΓ(x), starting from
/// Γ(1)/Γ(1/2) = 1/√π and Γ(3/2)/Γ(1) = √π/2.
fn gamma_ratio(df: u32) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let (mut nu, mut r) = if df % 2 == 1 { (1u32, 1.0 / sqrt_pi) } else { (2u32, sqrt_pi / 2.0) };
    while nu < df {
        r *= f64::from(nu + 1) / f64::from(nu);
        nu += 2;
    }
    r
}

fn t_density(t: f64, df: u32, norm: f64) -> f64 {
    let nu = f64::from(df);
    norm * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// t CDF by adaptive Simpson quadrature of the density over [0, |t|].
pub fn oracle_t_cdf(t: f64, df: u32) -> f64 {
    assert!(df >= 1);
    let nu = f64::from(df);
    let norm = gamma_ratio(df) / (nu * std::f64::consts::PI).sqrt();
    let f = |x: f64| t_density(x, df, norm);
    let b = t.abs();
    if b == 0.0 {
        return 0.5;
    }
    // Integrate in unit panels so the tolerance stays meaningful for wide ranges.
    let panels = b.ceil() as usize;
    let mut area = 0.0;
    for k in 0..panels {
        let lo = b * k as f64 / panels as f64;
        let hi = b * (k + 1) as f64 / panels as f64;
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(lo, hi, fa, fm, fb);
        area += adaptive(&f, lo, hi, fa, fm, fb, whole, 1e-14, 40);
    }
    if t > 0.0 {
        0.5 + area
    } else {
        0.5 - area
    }
}
