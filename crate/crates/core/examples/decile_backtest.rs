//! Cross-sectional decile sort on a random exposure panel with a planted
//! relationship between exposure and next-day return.

use std::error::Error;

use eventalpha::backtest::{equity_curve, formations, portfolio_sort, Compounding, SortSpec};
use eventalpha::domain::{validate_price_series, Horizon, PriceBar, Taxonomy, Ticker, TradingDate};
use eventalpha::factor::{ExposurePanel, PanelCell, PanelKey};
use eventalpha::ingestion::PriceMap;
use eventalpha::synth::SplitMix64;

const TICKERS: usize = 40;
const DAYS: usize = 60;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = SplitMix64::new(7);
    let label = Taxonomy::default_labels().label("Retail Investor Buzz")?;
    let start = TradingDate::from_ymd(2017, 1, 2).expect("valid date").naive();
    let dates: Vec<TradingDate> = (0..DAYS)
        .map(|d| (start + chrono::Duration::days(d as i64)).to_string().parse())
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::new();
    let mut prices = PriceMap::new();
    for i in 0..TICKERS {
        let ticker = Ticker::new(&format!("S{i:02}")).expect("valid ticker");
        let mut log_p = 4.0;
        let mut exposure_prev = 0.0;
        let mut bars = Vec::with_capacity(DAYS);
        for (d, &date) in dates.iter().enumerate() {
            // Tomorrow's return loads on today's exposure.
            if d > 0 {
                log_p += 0.002 * exposure_prev + 0.01 * rng.normal();
            }
            bars.push(PriceBar { date, close: f64::exp(log_p) });
            let exposure = rng.normal();
            exposure_prev = exposure;
            cells.push((
                PanelKey { ticker: ticker.clone(), date, label: label.clone() },
                PanelCell { exposure, tweet_count: 1 },
            ));
        }
        prices.insert(ticker.clone(), validate_price_series(ticker, bars)?);
    }
    let panel = ExposurePanel::from_cells(cells);

    let h = Horizon::new(1)?;
    let spec = SortSpec::long_short(h);
    let (forms, skipped) = formations(&panel, &prices, &spec);
    let first = &forms[0];
    println!(
        "{} formations ({} skipped); first holds on {} using exposures of {}",
        forms.len(),
        skipped,
        first.date,
        first.formation_date
    );
    println!("  top decile: {:?}", first.groups.last().map(|g| g.iter().map(|t| t.as_str()).collect::<Vec<_>>()));

    for spec in [SortSpec::long_short(h), SortSpec::long_only(h)] {
        let series = portfolio_sort(&panel, &prices, &spec);
        let curve = equity_curve(&series.points, Compounding::LogSum)?;
        let mean = series.points.iter().map(|p| p.1).sum::<f64>() / series.points.len() as f64;
        println!(
            "{}: mean daily {mean:+.5}, final equity {:.4}, max drawdown {:.4}",
            spec.descriptor(),
            curve.final_value(),
            curve.max_drawdown()
        );
    }
    let ls = portfolio_sort(&panel, &prices, &SortSpec::long_short(h));
    assert!(equity_curve(&ls.points, Compounding::LogSum)?.final_value() > 1.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
