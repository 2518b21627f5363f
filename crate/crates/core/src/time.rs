use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone};

/// How raw timestamps are written in a log source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimestampFormat {
    /// RFC 3339 / ISO-8601, with or without offset and fractional seconds.
    Iso8601,
    EpochSeconds,
    EpochMillis,
    /// A `strftime`-style pattern as understood by chrono.
    Pattern(String),
}

impl TimestampFormat {
    pub(crate) fn parse_name(raw: &str) -> TimestampFormat {
        match raw {
            "iso8601" | "iso-8601" | "rfc3339" => TimestampFormat::Iso8601,
            "epoch_seconds" | "epoch_s" => TimestampFormat::EpochSeconds,
            "epoch_millis" | "epoch_ms" => TimestampFormat::EpochMillis,
            pattern => TimestampFormat::Pattern(pattern.to_string()),
        }
    }
}

const NAIVE_ISO_PATTERNS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Parses `raw` into epoch milliseconds. Offset-less inputs are read in `zone`.
pub(crate) fn parse_timestamp(
    raw: &str,
    format: &TimestampFormat,
    zone: FixedOffset,
) -> Option<i64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    match format {
        TimestampFormat::EpochSeconds => raw.parse::<i64>().ok()?.checked_mul(1000),
        TimestampFormat::EpochMillis => raw.parse::<i64>().ok(),
        TimestampFormat::Iso8601 => {
            if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
                return Some(dt.timestamp_millis());
            }
            NAIVE_ISO_PATTERNS
                .iter()
                .find_map(|p| NaiveDateTime::parse_from_str(raw, p).ok())
                .and_then(|naive| localize(naive, zone))
        }
        TimestampFormat::Pattern(pattern) => {
            if let Ok(naive) = NaiveDateTime::parse_from_str(raw, pattern) {
                return localize(naive, zone);
            }
            DateTime::parse_from_str(raw, pattern)
                .ok()
                .map(|dt| dt.timestamp_millis())
        }
    }
}

fn localize(naive: NaiveDateTime, zone: FixedOffset) -> Option<i64> {
    zone.from_local_datetime(&naive)
        .single()
        .map(|dt| dt.timestamp_millis())
}

/// Accepts `UTC`, `Z`, or a fixed offset such as `+02:00` / `-0530`.
pub(crate) fn parse_zone(raw: &str) -> Option<FixedOffset> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("utc") || raw == "Z" {
        return FixedOffset::east_opt(0);
    }
    let (sign, rest) = match raw.as_bytes().first()? {
        b'+' => (1, &raw[1..]),
        b'-' => (-1, &raw[1..]),
        _ => return None,
    };
    let digits: String = rest.chars().filter(|c| *c != ':').collect();
    if digits.len() != 4 || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let hours: i32 = digits[..2].parse().ok()?;
    let minutes: i32 = digits[2..].parse().ok()?;
    if minutes >= 60 {
        return None;
    }
    FixedOffset::east_opt(sign * (hours * 3600 + minutes * 60))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utc() -> FixedOffset {
        FixedOffset::east_opt(0).unwrap()
    }

    #[test]
    fn iso_with_and_without_offset() {
        let z = parse_timestamp("2014-05-01T10:00:00Z", &TimestampFormat::Iso8601, utc());
        assert_eq!(z, Some(1_398_938_400_000));
        let naive = parse_timestamp("2014-05-01 10:00:00", &TimestampFormat::Iso8601, utc());
        assert_eq!(naive, z);
        let plus2 = parse_zone("+02:00").unwrap();
        let local = parse_timestamp("2014-05-01T12:00:00.000", &TimestampFormat::Iso8601, plus2);
        assert_eq!(local, z);
    }

    #[test]
    fn epoch_variants() {
        assert_eq!(
            parse_timestamp("1398938400", &TimestampFormat::EpochSeconds, utc()),
            Some(1_398_938_400_000)
        );
        assert_eq!(
            parse_timestamp("1398938400123", &TimestampFormat::EpochMillis, utc()),
            Some(1_398_938_400_123)
        );
        assert_eq!(
            parse_timestamp("12.5", &TimestampFormat::EpochSeconds, utc()),
            None
        );
    }

    #[test]
    fn custom_pattern() {
        let fmt = TimestampFormat::parse_name("%d.%m.%Y %H:%M:%S");
        assert_eq!(
            parse_timestamp("01.05.2014 10:00:00", &fmt, utc()),
            Some(1_398_938_400_000)
        );
        assert_eq!(parse_timestamp("not-a-date", &fmt, utc()), None);
    }

    #[test]
    fn zones() {
        assert_eq!(parse_zone("UTC"), FixedOffset::east_opt(0));
        assert_eq!(
            parse_zone("-0530"),
            FixedOffset::east_opt(-(5 * 3600 + 30 * 60))
        );
        assert_eq!(parse_zone("Europe/Berlin"), None);
        assert_eq!(parse_zone("+25:99"), None);
    }
}
