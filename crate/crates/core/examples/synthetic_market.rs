// Generate a small synthetic market, write it as CSV, read it back and
// count the curb events it contains.

use hgnn::market::{
    curb_samples, generate_synthetic, index_minutes, read_daily, read_industry, read_minute,
    write_daily, write_industry, write_minute, SynthConfig,
};

pub fn run() -> hgnn::Result<()> {
    let cfg = SynthConfig {
        n_stocks: 40,
        n_industries: 4,
        n_days: 120,
        seed: 3,
        ..SynthConfig::default()
    };
    let market = generate_synthetic(&cfg)?;

    let (mut daily_csv, mut minute_csv, mut industry_csv) = (Vec::new(), Vec::new(), Vec::new());
    write_daily(&mut daily_csv, &market.daily)?;
    write_minute(&mut minute_csv, &market.minute)?;
    write_industry(&mut industry_csv, &market.industries)?;

    let daily = read_daily("daily.csv".as_ref(), daily_csv.as_slice())?;
    let minute = read_minute("minute.csv".as_ref(), minute_csv.as_slice())?;
    let industries = read_industry("industry.csv".as_ref(), industry_csv.as_slice())?;
    assert_eq!(daily, market.daily);
    assert_eq!(industries, market.industries);

    let events = curb_samples(&daily, &index_minutes(&minute), cfg.rule(), 5)?;
    let sealed = events.iter().filter(|(e, _)| e.label == 1).count();
    println!(
        "{} daily bars, {} minute bars, {} curb events, {:.1}% sealed",
        daily.len(),
        minute.len(),
        events.len(),
        100.0 * sealed as f64 / events.len() as f64
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
