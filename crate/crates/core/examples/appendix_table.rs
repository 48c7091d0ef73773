//! Recompute p-values and significance stars from printed Sharpe ratios and
//! sample counts, and render the metrics table layout.

use std::error::Error;

use eventalpha::domain::Taxonomy;
use eventalpha::report::{render_metrics_table, TableFormat};
use eventalpha::stats::{significance_stars, t_test_pvalue, MetricsRow};

/// (label, samples, mean, std, IC, Sharpe, printed p-value), 1-day horizon.
const ONE_DAY: [(&str, usize, f64, f64, f64, f64, f64); 7] = [
    ("Social Media Backlash", 46, 0.0001, 0.0136, 0.3672, 0.0081, 0.9564),
    ("Negative Press", 42, -0.0015, 0.0153, -0.0082, -0.0965, 0.5352),
    ("Viral Marketing Campaign", 17, -0.0011, 0.0105, -0.1124, -0.1036, 0.6748),
    ("Brand Boycott", 23, -0.0019, 0.0116, 0.6123, -0.1598, 0.4515),
    ("Speculation/Rumor", 130, -0.0046, 0.0137, -0.0389, -0.3370, 0.0002),
    ("Retail Investor Buzz", 92, -0.0037, 0.0103, 0.0955, -0.3586, 0.0009),
    ("Geopolitical Tension", 25, -0.0122, 0.0184, -0.1395, -0.6606, 0.0030),
];

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tax = Taxonomy::default_labels();
    let mut rows = Vec::new();
    for (label, n, mean, std, ic, sharpe, printed) in ONE_DAY {
        // A Sharpe ratio is a mean over a unit standard deviation.
        let p = t_test_pvalue(sharpe, 1.0, n)?;
        println!("{label:<25} N={n:<4} Sharpe {sharpe:+.4}  p {p:.4} (printed {printed:.4})");
        assert!((p - printed).abs() <= 5e-4);
        rows.push(MetricsRow {
            label: tax.label(label)?,
            n,
            mean_ret: mean,
            std_ret: std,
            ic: Some(ic),
            sharpe,
            p_value: p,
            stars: significance_stars(p),
        });
    }
    println!("\n{}", render_metrics_table(&rows, TableFormat::Markdown));
    println!("{}", render_metrics_table(&rows, TableFormat::Csv));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
