use std::collections::BTreeMap;

use eventalpha::backtest::{formations, portfolio_sort, quantile_groups, SortSpec};
use eventalpha::domain::{validate_price_series, Horizon, PriceBar, Taxonomy, Ticker, TradingDate};
use eventalpha::factor::{ExposurePanel, PanelCell, PanelKey};
use eventalpha::ingestion::PriceMap;
use eventalpha::synth::SplitMix64;

struct Fixture {
    panel: ExposurePanel,
    prices: PriceMap,
    /// Raw closes by ticker, date ascending.
    closes: BTreeMap<Ticker, Vec<(TradingDate, f64)>>,
}

fn day(k: usize) -> TradingDate {
    let base = TradingDate::from_ymd(2017, 1, 2).unwrap().naive();
    (base + chrono::Duration::days(k as i64)).to_string().parse().unwrap()
}

/// Random panel over `n` tickers and `days` dates with two labels, gaps,
/// late listings and a few ties.
fn random_fixture(seed: u64, n: usize, days: usize) -> Fixture {
    let mut rng = SplitMix64::new(seed);
    let tax = Taxonomy::default_labels();
    let labels = [tax.label("Speculation/Rumor").unwrap(), tax.label("Brand Boycott").unwrap()];
    let mut cells = Vec::new();
    let mut prices = PriceMap::new();
    let mut closes = BTreeMap::new();
    for i in 0..n {
        let ticker = Ticker::new(&format!("X{i:03}")).unwrap();
        let first = if i % 9 == 0 { rng.below(20) as usize } else { 0 };
        let mut p = 20.0 + 10.0 * rng.uniform();
        let mut bars = Vec::new();
        for k in first..days {
            p *= (0.02 * rng.normal()).exp();
            bars.push(PriceBar { date: day(k), close: p });
            for label in &labels {
                if rng.uniform() < 0.6 {
                    let exposure = if rng.uniform() < 0.1 { 0.5 } else { rng.normal() };
                    cells.push((
                        PanelKey { ticker: ticker.clone(), date: day(k), label: label.clone() },
                        PanelCell { exposure, tweet_count: 1 },
                    ));
                }
            }
        }
        closes.insert(ticker.clone(), bars.iter().map(|b| (b.date, b.close)).collect());
        prices.insert(ticker.clone(), validate_price_series(ticker, bars).unwrap());
    }
    Fixture { panel: ExposurePanel::from_cells(cells), prices, closes }
}

/// Per-date sort written out longhand: (holding date, groups, group means).
fn oracle(f: &Fixture, h: usize, q: usize) -> Vec<(TradingDate, Vec<Vec<Ticker>>, Vec<f64>)> {
    let mut calendar: Vec<TradingDate> = f.closes.values().flatten().map(|(d, _)| *d).collect();
    calendar.sort();
    calendar.dedup();
    let mut out = Vec::new();
    for w in calendar.windows(2) {
        let (formed, held) = (w[0], w[1]);
        let mut sums: BTreeMap<Ticker, f64> = BTreeMap::new();
        let mut any = false;
        for (k, c) in f.panel.iter() {
            if k.date == formed {
                *sums.entry(k.ticker.clone()).or_insert(0.0) += c.exposure;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let mut rows = Vec::new();
        for (t, e) in &sums {
            let Some(series) = f.closes.get(t) else { continue };
            let Some(i) = series.iter().position(|(d, _)| *d == formed) else { continue };
            if i + h < series.len() {
                rows.push((t.clone(), *e, (series[i + h].1 / series[i].1).ln()));
            }
        }
        if rows.len() < q {
            continue;
        }
        rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let n = rows.len();
        let mut groups = vec![Vec::new(); q];
        let mut means = vec![0.0; q];
        for g in 0..q {
            let (lo, hi) = (g * n / q, (g + 1) * n / q);
            for row in &rows[lo..hi] {
                groups[g].push(row.0.clone());
                means[g] += row.2;
            }
            means[g] /= (hi - lo) as f64;
        }
        out.push((held, groups, means));
    }
    out
}

#[test]
fn matches_brute_force_sort() {
    for (seed, h, q) in [(1, 1, 10), (2, 3, 10), (3, 1, 5), (4, 7, 5)] {
        let f = random_fixture(seed, 50, 100);
        let spec = SortSpec { quantiles: q, ..SortSpec::long_short(Horizon::new(h as u32).unwrap()) };
        let (forms, _) = formations(&f.panel, &f.prices, &spec);
        let expected = oracle(&f, h, q);
        assert_eq!(forms.len(), expected.len());
        for (got, (date, groups, means)) in forms.iter().zip(&expected) {
            assert_eq!(got.date, *date);
            assert_eq!(&got.groups, groups);
            for (a, b) in got.group_returns.iter().zip(means) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
        let series = portfolio_sort(&f.panel, &f.prices, &spec);
        for (p, (_, _, means)) in series.points.iter().zip(&expected) {
            assert!((p.1 - (means[q - 1] - means[0])).abs() <= 1e-12);
        }
    }
}

#[test]
fn monotone_transform_keeps_membership() {
    let f = random_fixture(11, 50, 60);
    let label = Taxonomy::default_labels().label("Speculation/Rumor").unwrap();
    let spec = SortSpec { label: Some(label), ..SortSpec::long_short(Horizon::new(1).unwrap()) };
    let warped = Fixture {
        panel: f.panel.map_exposures(|_, e| e.powi(3) + 2.0 * e - 5.0),
        prices: f.prices.clone(),
        closes: f.closes.clone(),
    };
    let (a, _) = formations(&f.panel, &f.prices, &spec);
    let (b, _) = formations(&warped.panel, &warped.prices, &spec);
    assert!(!a.is_empty());
    assert_eq!(
        a.iter().map(|x| &x.groups).collect::<Vec<_>>(),
        b.iter().map(|x| &x.groups).collect::<Vec<_>>()
    );
}

#[test]
fn returns_increasing_in_exposure_give_nonnegative_spreads() {
    let mut rng = SplitMix64::new(5);
    let label = Taxonomy::default_labels().label("Geopolitical Tension").unwrap();
    let days = 40;
    let mut cells = Vec::new();
    let mut prices = PriceMap::new();
    for i in 0..30 {
        let ticker = Ticker::new(&format!("M{i:02}")).unwrap();
        let mut p = 10.0;
        let mut bars = vec![PriceBar { date: day(0), close: p }];
        for k in 0..days {
            let e = rng.normal();
            cells.push((
                PanelKey { ticker: ticker.clone(), date: day(k), label: label.clone() },
                PanelCell { exposure: e, tweet_count: 1 },
            ));
            // Next close depends only on today's exposure.
            p *= (0.01 * e.tanh()).exp();
            bars.push(PriceBar { date: day(k + 1), close: p });
        }
        prices.insert(ticker.clone(), validate_price_series(ticker, bars).unwrap());
    }
    let panel = ExposurePanel::from_cells(cells);
    let series = portfolio_sort(&panel, &prices, &SortSpec::long_short(Horizon::new(1).unwrap()));
    assert_eq!(series.points.len(), days);
    assert!(series.points.iter().all(|p| p.1 >= 0.0));
}

#[test]
fn quantile_groups_partition_the_ranking() {
    let ranked: Vec<(Ticker, f64)> = (0..23)
        .map(|i| (Ticker::new(&format!("Q{i:02}")).unwrap(), ((i * 7) % 23) as f64))
        .collect();
    let groups = quantile_groups(ranked, 10);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 23);
    assert!(sizes.iter().all(|&s| s == 2 || s == 3));
}
