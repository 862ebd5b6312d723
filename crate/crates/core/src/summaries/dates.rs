//! Truncation of ISO-8601 date and date-time literals into bins.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
    Day,
    Hour,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [Granularity::Year, Granularity::Month, Granularity::Day, Granularity::Hour];
}

/// Compacted datatypes whose values are binned as dates.
pub const DATE_DATATYPES: [&str; 4] = ["xsd:date", "xsd:dateTime", "xsd:gYear", "xsd:gYearMonth"];

pub fn is_date_datatype(datatype: &str) -> bool {
    DATE_DATATYPES.contains(&datatype)
}

struct Parsed<'a> {
    year: &'a str,
    month: Option<u32>,
    day: Option<u32>,
    hour: Option<u32>,
}

fn digits(s: &str, n: usize) -> Option<u32> {
    (s.len() == n && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse().ok()).flatten()
}

fn parse(value: &str) -> Option<Parsed<'_>> {
    let v = value.trim();
    let (date, time) = match v.find('T') {
        Some(i) => (&v[..i], Some(&v[i + 1..])),
        None => (v, None),
    };
    let unsigned = date.strip_prefix(['-', '+']).unwrap_or(date);
    let sign_len = date.len() - unsigned.len();
    let mut parts = unsigned.split('-');
    let year_digits = parts.next()?;
    if year_digits.len() < 4 || !year_digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year = &date[..sign_len + year_digits.len()];
    // A zero month or day marks a value known only to a coarser precision.
    let month = match parts.next() {
        Some(m) => Some(digits(m, 2).filter(|m| *m <= 12)?).filter(|m| *m > 0),
        None => None,
    };
    let day = match parts.next() {
        Some(d) => Some(digits(d, 2)?).filter(|d| *d > 0 && month.is_some()),
        None => None,
    };
    if parts.next().is_some() {
        return None;
    }
    if let (Some(m), Some(d)) = (month, day) {
        // Calendar validation needs a year chrono can represent; others only get a range check.
        match year.parse::<i32>() {
            Ok(y) if NaiveDate::from_ymd_opt(y, 1, 1).is_some() => {
                NaiveDate::from_ymd_opt(y, m, d)?;
            }
            _ if !(1..=31).contains(&d) => return None,
            _ => {}
        }
    }
    let hour = match time {
        Some(t) => {
            let h = digits(t.get(..2)?, 2).filter(|h| *h <= 24)?;
            if t.len() > 2 && !t[2..].starts_with(':') {
                return None;
            }
            day.map(|_| h)
        }
        None => None,
    };
    Some(Parsed { year, month, day, hour })
}

/// The bin of `value` at `granularity`, e.g. `"2019"`, `"2019-03"`, `"2019-03-05"`,
/// `"2019-03-05T14"`. `None` when the value does not parse or lacks the precision.
pub fn bin_key(value: &str, granularity: Granularity) -> Option<String> {
    let p = parse(value)?;
    match granularity {
        Granularity::Year => Some(p.year.to_string()),
        Granularity::Month => Some(format!("{}-{:02}", p.year, p.month?)),
        Granularity::Day => Some(format!("{}-{:02}-{:02}", p.year, p.month?, p.day?)),
        Granularity::Hour => Some(format!("{}-{:02}-{:02}T{:02}", p.year, p.month?, p.day?, p.hour?)),
    }
}
