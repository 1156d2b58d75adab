//! CSV ingestion and emission for daily bars, minute bars and industry labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::types::{DailyBar, MinuteBar};
use crate::error::{Error, Result};

pub const DAILY_HEADER: &str = "stock_id,day,open,high,low,close,volume,float_shares";
pub const MINUTE_HEADER: &str = "stock_id,day,minute,open,high,low,close,volume";
pub const INDUSTRY_HEADER: &str = "stock_id,industry";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Iterates data records after verifying the header, yielding `(line, fields)`.
fn records<R: Read>(
    path: &Path,
    reader: R,
    header: &str,
) -> Result<impl Iterator<Item = Result<(u64, csv::StringRecord)>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: header.to_string(),
            found,
        });
    }
    let width = header.split(',').count();
    let path = path.to_path_buf();
    Ok(rdr.into_records().map(move |r| {
        let rec = r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(&path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(
                &path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        Ok((line, rec))
    }))
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("").trim();
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} from `{raw}`")))
}

pub fn load_daily_csv(path: impl AsRef<Path>) -> Result<Vec<DailyBar>> {
    let path = path.as_ref();
    read_daily(path, open(path)?)
}

pub fn read_daily<R: Read>(path: &Path, reader: R) -> Result<Vec<DailyBar>> {
    let mut bars = Vec::new();
    for item in records(path, reader, DAILY_HEADER)? {
        let (line, rec) = item?;
        let bar = DailyBar {
            stock_id: rec[0].trim().to_string(),
            day: field(path, line, &rec, 1, "day")?,
            open: field(path, line, &rec, 2, "open")?,
            high: field(path, line, &rec, 3, "high")?,
            low: field(path, line, &rec, 4, "low")?,
            close: field(path, line, &rec, 5, "close")?,
            volume: field(path, line, &rec, 6, "volume")?,
            float_shares: field(path, line, &rec, 7, "float_shares")?,
        };
        bar.validate()
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        bars.push(bar);
    }
    bars.sort_by(|a, b| (&a.stock_id, a.day).cmp(&(&b.stock_id, b.day)));
    if let Some(w) = bars
        .windows(2)
        .find(|w| w[0].stock_id == w[1].stock_id && w[0].day == w[1].day)
    {
        return Err(Error::Data(format!(
            "{}: duplicate daily bar for ({}, {})",
            path.display(),
            w[0].stock_id,
            w[0].day
        )));
    }
    Ok(bars)
}

pub fn load_minute_csv(path: impl AsRef<Path>) -> Result<Vec<MinuteBar>> {
    let path = path.as_ref();
    read_minute(path, open(path)?)
}

pub fn read_minute<R: Read>(path: &Path, reader: R) -> Result<Vec<MinuteBar>> {
    let mut bars = Vec::new();
    for item in records(path, reader, MINUTE_HEADER)? {
        let (line, rec) = item?;
        let bar = MinuteBar {
            stock_id: rec[0].trim().to_string(),
            day: field(path, line, &rec, 1, "day")?,
            minute: field(path, line, &rec, 2, "minute")?,
            open: field(path, line, &rec, 3, "open")?,
            high: field(path, line, &rec, 4, "high")?,
            low: field(path, line, &rec, 5, "low")?,
            close: field(path, line, &rec, 6, "close")?,
            volume: field(path, line, &rec, 7, "volume")?,
        };
        bar.validate()
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        bars.push(bar);
    }
    bars.sort_by(|a, b| (&a.stock_id, a.day, a.minute).cmp(&(&b.stock_id, b.day, b.minute)));
    Ok(bars)
}

pub fn load_industry_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    read_industry(path, open(path)?)
}

pub fn read_industry<R: Read>(path: &Path, reader: R) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for item in records(path, reader, INDUSTRY_HEADER)? {
        let (line, rec) = item?;
        let stock = rec[0].trim().to_string();
        let industry = rec[1].trim().to_string();
        if stock.is_empty() || industry.is_empty() {
            return Err(parse_err(path, line, "empty stock_id or industry".into()));
        }
        if let Some(prev) = map.get(&stock) {
            if prev != &industry {
                return Err(parse_err(
                    path,
                    line,
                    format!("{stock} listed under both {prev} and {industry}"),
                ));
            }
        }
        map.insert(stock, industry);
    }
    Ok(map)
}

/// Every stock with price data must have an industry label.
pub fn check_industry_coverage(
    daily: &[DailyBar],
    industries: &BTreeMap<String, String>,
) -> Result<()> {
    let missing: BTreeSet<&str> = daily
        .iter()
        .map(|b| b.stock_id.as_str())
        .filter(|s| !industries.contains_key(*s))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "stocks without industry labels: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )))
    }
}

pub fn write_daily<W: Write>(out: W, bars: &[DailyBar]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_row(&mut w, DAILY_HEADER.split(','))?;
    for b in bars {
        write_row(
            &mut w,
            [
                b.stock_id.clone(),
                b.day.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.volume.to_string(),
                b.float_shares.to_string(),
            ],
        )?;
    }
    flush(w)
}

pub fn write_minute<W: Write>(out: W, bars: &[MinuteBar]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_row(&mut w, MINUTE_HEADER.split(','))?;
    for b in bars {
        write_row(
            &mut w,
            [
                b.stock_id.clone(),
                b.day.to_string(),
                b.minute.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.volume.to_string(),
            ],
        )?;
    }
    flush(w)
}

pub fn write_industry<W: Write>(out: W, industries: &BTreeMap<String, String>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_row(&mut w, INDUSTRY_HEADER.split(','))?;
    for (s, i) in industries {
        write_row(&mut w, [s.as_str(), i.as_str()])?;
    }
    flush(w)
}

fn write_row<W: Write, I, T>(w: &mut csv::Writer<W>, fields: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(fields)
        .map_err(|e| Error::Data(format!("csv write: {e}")))
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Data(format!("csv flush: {e}")))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}
