//! UTC datestamps in the two granularities the harvesting protocol allows:
//! `YYYY-MM-DD` and `YYYY-MM-DDThh:mm:ssZ`. Date-only stamps normalize to
//! midnight UTC internally; the original granularity is kept for display.

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

const SECS_PER_DAY: i64 = 86_400;

/// Seconds since the Unix epoch, always UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtcInstant(pub i64);

impl UtcInstant {
    pub fn now() -> Self {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        UtcInstant(secs)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        if !valid_ymd(year, month, day) {
            return None;
        }
        Some(UtcInstant(days_from_civil(year, month, day) * SECS_PER_DAY))
    }

    pub fn from_ymd_hms(year: i32, month: u32, day: u32, h: u32, m: u32, s: u32) -> Option<Self> {
        if h > 23 || m > 59 || s > 59 {
            return None;
        }
        let date = Self::from_ymd(year, month, day)?;
        Some(UtcInstant(date.0 + (h * 3600 + m * 60 + s) as i64))
    }

    pub fn parse(s: &str) -> Option<Self> {
        Datestamp::parse(s).map(|d| d.instant)
    }

    fn civil(self) -> (i32, u32, u32, u32, u32, u32) {
        let days = self.0.div_euclid(SECS_PER_DAY);
        let rem = self.0.rem_euclid(SECS_PER_DAY) as u32;
        let (y, mo, d) = civil_from_days(days);
        (y, mo, d, rem / 3600, (rem / 60) % 60, rem % 60)
    }
}

impl fmt::Display for UtcInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, mo, d, h, mi, s) = self.civil();
        write!(f, "{y:04}-{mo:02}-{d:02}T{h:02}:{mi:02}:{s:02}Z")
    }
}

impl Serialize for UtcInstant {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UtcInstant {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        UtcInstant::parse(&s).ok_or_else(|| de::Error::custom(format!("invalid UTC instant: {s}")))
    }
}

/// Datestamp granularity per the protocol's `Identify` vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "YYYY-MM-DD")]
    Day,
    #[serde(rename = "YYYY-MM-DDThh:mm:ssZ")]
    Second,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Day => f.write_str("YYYY-MM-DD"),
            Granularity::Second => f.write_str("YYYY-MM-DDThh:mm:ssZ"),
        }
    }
}

impl Granularity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "YYYY-MM-DD" => Some(Granularity::Day),
            "YYYY-MM-DDThh:mm:ssZ" => Some(Granularity::Second),
            _ => None,
        }
    }
}

/// A datestamp as it appears on the wire: an instant plus the granularity it
/// was written in. Ordering compares instants first, so mixed-granularity
/// stamps sort chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Datestamp {
    pub instant: UtcInstant,
    pub granularity: Granularity,
}

impl Datestamp {
    pub fn day(year: i32, month: u32, day: u32) -> Option<Self> {
        Some(Datestamp {
            instant: UtcInstant::from_ymd(year, month, day)?,
            granularity: Granularity::Day,
        })
    }

    pub fn second(instant: UtcInstant) -> Self {
        Datestamp {
            instant,
            granularity: Granularity::Second,
        }
    }

    /// Accepts `YYYY-MM-DD` or `YYYY-MM-DDThh:mm:ssZ`; anything else is rejected.
    pub fn parse(s: &str) -> Option<Self> {
        let b = s.as_bytes();
        match b.len() {
            10 => {
                let (y, mo, d) = parse_date_part(b)?;
                Datestamp::day(y, mo, d)
            }
            20 => {
                let (y, mo, d) = parse_date_part(&b[..10])?;
                if b[10] != b'T' || b[13] != b':' || b[16] != b':' || b[19] != b'Z' {
                    return None;
                }
                let h = parse_num(&b[11..13])?;
                let mi = parse_num(&b[14..16])?;
                let se = parse_num(&b[17..19])?;
                Some(Datestamp {
                    instant: UtcInstant::from_ymd_hms(y, mo, d, h, mi, se)?,
                    granularity: Granularity::Second,
                })
            }
            _ => None,
        }
    }
}

impl fmt::Display for Datestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.granularity {
            Granularity::Second => self.instant.fmt(f),
            Granularity::Day => {
                let (y, mo, d, ..) = self.instant.civil();
                write!(f, "{y:04}-{mo:02}-{d:02}")
            }
        }
    }
}

impl FromStr for Datestamp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Datestamp::parse(s).ok_or_else(|| format!("invalid datestamp: {s}"))
    }
}

impl Serialize for Datestamp {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Datestamp {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Datestamp::parse(&s).ok_or_else(|| de::Error::custom(format!("invalid datestamp: {s}")))
    }
}

fn parse_date_part(b: &[u8]) -> Option<(i32, u32, u32)> {
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let y: u32 = parse_num(&b[..4])?;
    let mo = parse_num(&b[5..7])?;
    let d = parse_num(&b[8..10])?;
    Some((y as i32, mo, d))
}

fn parse_num(b: &[u8]) -> Option<u32> {
    let mut n = 0u32;
    for &c in b {
        if !c.is_ascii_digit() {
            return None;
        }
        n = n * 10 + (c - b'0') as u32;
    }
    Some(n)
}

fn is_leap(y: i32) -> bool {
    y % 4 == 0 && (y % 100 != 0 || y % 400 == 0)
}

fn valid_ymd(y: i32, m: u32, d: u32) -> bool {
    if !(1..=9999).contains(&y) || !(1..=12).contains(&m) || d == 0 {
        return false;
    }
    let max = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(y) {
                29
            } else {
                28
            }
        }
        _ => unreachable!(),
    };
    d <= max
}

// Days-from-civil and back, Gregorian calendar (proleptic).
fn days_from_civil(y: i32, m: u32, d: u32) -> i64 {
    let y = i64::from(y) - i64::from(m <= 2);
    let era = y.div_euclid(400);
    let yoe = y - era * 400; // [0, 399]
    let m = i64::from(m);
    let d = i64::from(d);
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i32, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097; // [0, 146096]
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = (if mp < 10 { mp + 3 } else { mp - 9 }) as u32;
    ((y + i64::from(m <= 2)) as i32, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_granularities() {
        let d = Datestamp::parse("2023-11-01").unwrap();
        assert_eq!(d.granularity, Granularity::Day);
        assert_eq!(d.to_string(), "2023-11-01");

        let t = Datestamp::parse("2023-11-01T12:30:45Z").unwrap();
        assert_eq!(t.granularity, Granularity::Second);
        assert_eq!(t.to_string(), "2023-11-01T12:30:45Z");
        assert_eq!(t.instant.0 - d.instant.0, 12 * 3600 + 30 * 60 + 45);
    }

    #[test]
    fn rejects_malformed_stamps() {
        for bad in [
            "2023-13-01",
            "2023-02-30",
            "2023-11-01T25:00:00Z",
            "2023-11-01T12:30:45",
            "2023-11-01 12:30:45Z",
            "23-11-01",
            "",
            "2024-02-30",
            "0000-01-01",
        ] {
            assert!(Datestamp::parse(bad).is_none(), "accepted {bad:?}");
        }
        // leap day only on leap years
        assert!(Datestamp::parse("2024-02-29").is_some());
        assert!(Datestamp::parse("2023-02-29").is_none());
    }

    #[test]
    fn calendar_round_trip() {
        // epoch and a spread of dates either side of it
        for (y, m, d) in [
            (1970, 1, 1),
            (2000, 2, 29),
            (2023, 11, 1),
            (2024, 10, 31),
            (1969, 12, 31),
        ] {
            let days = days_from_civil(y, m, d);
            assert_eq!(civil_from_days(days), (y, m, d));
        }
        assert_eq!(days_from_civil(1970, 1, 1), 0);
        assert_eq!(UtcInstant::from_ymd(2023, 11, 1).unwrap().0, 1_698_796_800);
    }

    #[test]
    fn ordering_is_chronological_across_granularities() {
        let a = Datestamp::parse("2023-11-01").unwrap();
        let b = Datestamp::parse("2023-11-01T00:00:01Z").unwrap();
        let c = Datestamp::parse("2023-11-02").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn instant_display_round_trips() {
        let i = UtcInstant::from_ymd_hms(2024, 10, 31, 23, 59, 59).unwrap();
        assert_eq!(UtcInstant::parse(&i.to_string()), Some(i));
    }
}
