// Detect a curb touch in hand-written minute bars and compute the five
// indicators at the touch.

use hgnn::market::{
    curb_samples, index_minutes, CurbRule, DailyBar, MinuteBar,
};

fn minute(m: u32, close: f64, high: f64) -> MinuteBar {
    MinuteBar {
        stock_id: "S1".into(),
        day: 1,
        minute: m,
        open: close,
        high,
        low: close - 0.05,
        close,
        volume: 1000.0 * f64::from(m + 1),
    }
}

pub fn run() -> hgnn::Result<()> {
    let bar = |day, close: f64, high: f64| DailyBar {
        stock_id: "S1".into(),
        day,
        open: 10.0,
        high,
        low: 9.9,
        close,
        volume: 50_000.0,
        float_shares: 1e6,
    };
    let daily = vec![bar(0, 10.0, 10.05), bar(1, 11.0, 11.0)];
    // Curb price is 11.00; minute 3 reaches it.
    let path = [10.2, 10.5, 10.8, 11.0, 11.0, 11.0];
    let minutes: Vec<MinuteBar> = path
        .iter()
        .enumerate()
        .map(|(m, &c)| minute(m as u32, c, c))
        .collect();

    let samples = curb_samples(&daily, &index_minutes(&minutes), CurbRule::default(), 3)?;
    let (event, ind) = &samples[0];
    println!(
        "{} day {}: touched at minute {}, label {}",
        event.stock_id, event.day, event.touched_minute, event.label
    );
    println!("{ind:#?}");
    assert_eq!(event.touched_minute, 3);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
