use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_math::OptionKind;

use super::MIN_TTM_DAYS;

/// Column order of the quote CSV format.
pub const QUOTE_HEADER: [&str; 16] = [
    "quote_date",
    "expiry_date",
    "cp_flag",
    "strike",
    "bid",
    "ask",
    "volume",
    "implied_vol",
    "delta",
    "gamma",
    "vega",
    "theta",
    "underlying",
    "vix",
    "rate",
    "div_yield",
];

const DATE_FORMAT: &str = "%Y-%m-%d";

/// One day's closing quote for one option contract.
///
/// Numeric fields are `None` when the source cell was blank or malformed.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub kind: OptionKind,
    pub strike: Option<f64>,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
    pub volume: Option<i64>,
    pub implied_vol: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub vega: Option<f64>,
    pub theta: Option<f64>,
    pub underlying: Option<f64>,
    pub vix: Option<f64>,
    pub rate: Option<f64>,
    pub div_yield: Option<f64>,
}

impl OptionQuote {
    /// Calendar days from quote date to expiry.
    pub fn ttm_days(&self) -> i64 {
        (self.expiry_date - self.quote_date).num_days()
    }

    /// Mid quote `(bid + ask)/2`.
    pub fn mid(&self) -> Option<f64> {
        Some(0.5 * (self.bid? + self.ask?))
    }

    fn delta_in_band(&self) -> bool {
        match (self.kind, self.delta) {
            (OptionKind::Call, Some(d)) => (0.05..=0.95).contains(&d),
            (OptionKind::Put, Some(d)) => (-0.95..=-0.05).contains(&d),
            (_, None) => false,
        }
    }

    fn has_required_fields(&self) -> bool {
        [
            self.bid,
            self.ask,
            self.implied_vol,
            self.delta,
            self.gamma,
            self.vega,
            self.theta,
        ]
        .iter()
        .all(|v| v.is_some_and(f64::is_finite))
    }
}

/// Removes untraded quotes, quotes missing any of bid, ask, implied vol,
/// delta, gamma, vega or theta, quotes with fewer than 14 days to expiry,
/// and quotes whose delta lies outside `[0.05, 0.95]` (calls) or
/// `[−0.95, −0.05]` (puts). Band edges are kept.
pub fn filter_quotes(quotes: &[OptionQuote]) -> Vec<OptionQuote> {
    quotes
        .iter()
        .filter(|q| {
            q.volume.is_some_and(|v| v > 0)
                && q.has_required_fields()
                && q.ttm_days() >= MIN_TTM_DAYS
                && q.delta_in_band()
        })
        .cloned()
        .collect()
}

/// Number of quotes failing each filter rule, in rule order. A quote
/// failing several rules is counted under each of them.
pub fn filter_rejections(quotes: &[OptionQuote]) -> Vec<(&'static str, usize)> {
    let mut counts = [
        ("volume", 0),
        ("missing fields", 0),
        ("time to maturity", 0),
        ("delta band", 0),
    ];
    for q in quotes {
        let fails = [
            !q.volume.is_some_and(|v| v > 0),
            !q.has_required_fields(),
            q.ttm_days() < MIN_TTM_DAYS,
            !q.delta_in_band(),
        ];
        for (c, f) in counts.iter_mut().zip(fails) {
            c.1 += usize::from(f);
        }
    }
    counts.to_vec()
}

pub fn load_quotes(path: impl AsRef<Path>) -> Result<Vec<OptionQuote>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_quotes(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses quote CSV from any reader. Row order is preserved.
pub fn read_quotes(reader: impl Read) -> Result<Vec<OptionQuote>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    for (i, expected) in QUOTE_HEADER.iter().enumerate() {
        let found = headers.get(i).unwrap_or("");
        if found != *expected {
            return Err(Error::Schema {
                expected: (*expected).to_string(),
                found: found.to_string(),
            });
        }
    }
    if headers.len() > QUOTE_HEADER.len() {
        return Err(Error::Schema {
            expected: "<end of header>".to_string(),
            found: headers[QUOTE_HEADER.len()].to_string(),
        });
    }

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let date = |i: usize| {
            NaiveDate::parse_from_str(&record[i], DATE_FORMAT).map_err(|e| Error::Parse {
                line,
                message: format!("{} `{}`: {e}", QUOTE_HEADER[i], &record[i]),
            })
        };
        let num = |i: usize| record[i].parse::<f64>().ok().filter(|v| v.is_finite());
        let kind = match &record[2] {
            "C" | "c" => OptionKind::Call,
            "P" | "p" => OptionKind::Put,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("cp_flag must be C or P, got `{other}`"),
                })
            }
        };
        out.push(OptionQuote {
            quote_date: date(0)?,
            expiry_date: date(1)?,
            kind,
            strike: num(3),
            bid: num(4),
            ask: num(5),
            volume: record[6].parse::<i64>().ok(),
            implied_vol: num(7),
            delta: num(8),
            gamma: num(9),
            vega: num(10),
            theta: num(11),
            underlying: num(12),
            vix: num(13),
            rate: num(14),
            div_yield: num(15),
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: Default::default(),
            source,
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes quotes in the CSV schema read by [`load_quotes`].
///
/// Floats use the shortest representation that parses back to the same
/// value, so a write/read cycle is lossless.
pub fn write_quotes(writer: impl Write, quotes: &[OptionQuote]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(QUOTE_HEADER).map_err(csv_error)?;
    for q in quotes {
        w.write_record([
            q.quote_date.format(DATE_FORMAT).to_string(),
            q.expiry_date.format(DATE_FORMAT).to_string(),
            q.kind.flag().to_string(),
            cell(q.strike),
            cell(q.bid),
            cell(q.ask),
            cell(q.volume),
            cell(q.implied_vol),
            cell(q.delta),
            cell(q.gamma),
            cell(q.vega),
            cell(q.theta),
            cell(q.underlying),
            cell(q.vix),
            cell(q.rate),
            cell(q.div_yield),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn quote(kind: OptionKind, delta: f64) -> OptionQuote {
        OptionQuote {
            quote_date: NaiveDate::from_ymd_opt(2015, 3, 2).unwrap(),
            expiry_date: NaiveDate::from_ymd_opt(2015, 4, 1).unwrap(),
            kind,
            strike: Some(2100.0),
            bid: Some(10.0),
            ask: Some(10.5),
            volume: Some(12),
            implied_vol: Some(0.18),
            delta: Some(delta),
            gamma: Some(0.002),
            vega: Some(150.0),
            theta: Some(-200.0),
            underlying: Some(2110.0),
            vix: Some(16.0),
            rate: Some(0.01),
            div_yield: Some(0.02),
        }
    }

    const HEADER: &str = "quote_date,expiry_date,cp_flag,strike,bid,ask,volume,implied_vol,delta,gamma,vega,theta,underlying,vix,rate,div_yield\n";

    #[test]
    fn empty_file_with_header() {
        assert!(read_quotes(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn one_full_row() {
        let text = format!(
            "{HEADER}2015-03-02,2015-04-01,C,2100,10,10.5,12,0.18,0.45,0.002,150,-200,2110,16,0.01,0.02\n"
        );
        let q = read_quotes(text.as_bytes()).unwrap();
        assert_eq!(q, vec![quote(OptionKind::Call, 0.45)]);
    }

    #[test]
    fn blank_and_malformed_cells_are_missing() {
        let text = format!(
            "{HEADER}2015-03-02,2015-04-01,P,2100,10,10.5,12,,-0.45,abc,150,-200,2110,16,0.01,0.02\n"
        );
        let q = read_quotes(text.as_bytes()).unwrap();
        assert_eq!(q[0].implied_vol, None);
        assert_eq!(q[0].gamma, None);
        assert!(filter_quotes(&q).is_empty());
    }

    #[test]
    fn wrong_header_names_column() {
        let text = "quote_date,expiry,cp_flag\n";
        match read_quotes(text.as_bytes()) {
            Err(Error::Schema { expected, found }) => {
                assert_eq!(expected, "expiry_date");
                assert_eq!(found, "expiry");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_date_is_parse_error() {
        let text = format!("{HEADER}2015-13-02,2015-04-01,C,1,1,1,1,1,0.5,1,1,1,1,1,1,1\n");
        assert!(matches!(read_quotes(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unreadable_file() {
        assert!(matches!(load_quotes("/nonexistent/panel.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn filter_rules() {
        let keep = quote(OptionKind::Call, 0.5);
        assert_eq!(filter_quotes(&[keep.clone()]).len(), 1);

        let high = quote(OptionKind::Call, 0.96);
        let edge_hi = quote(OptionKind::Call, 0.95);
        let edge_lo = quote(OptionKind::Call, 0.05);
        let low = quote(OptionKind::Call, 0.049);
        assert_eq!(filter_quotes(&[high, low]).len(), 0);
        assert_eq!(filter_quotes(&[edge_hi, edge_lo]).len(), 2);

        let put_edges = [quote(OptionKind::Put, -0.95), quote(OptionKind::Put, -0.05)];
        assert_eq!(filter_quotes(&put_edges).len(), 2);
        let put_out = [quote(OptionKind::Put, -0.96), quote(OptionKind::Put, -0.04)];
        assert!(filter_quotes(&put_out).is_empty());
        // a put-signed delta on a call is out of band
        assert!(filter_quotes(&[quote(OptionKind::Call, -0.5)]).is_empty());

        let mut short = keep.clone();
        short.expiry_date = short.quote_date + chrono::Days::new(13);
        assert!(filter_quotes(&[short.clone()]).is_empty());
        short.expiry_date = short.quote_date + chrono::Days::new(14);
        assert_eq!(filter_quotes(&[short]).len(), 1);

        let mut untraded = keep.clone();
        untraded.volume = Some(0);
        assert!(filter_quotes(&[untraded]).is_empty());

        let mut no_theta = keep;
        no_theta.theta = None;
        assert!(filter_quotes(&[no_theta]).is_empty());
    }

    #[test]
    fn write_read_roundtrip() {
        let mut q = quote(OptionKind::Put, -0.3);
        q.vix = None;
        q.strike = Some(2101.123456789012);
        let mut buf = Vec::new();
        write_quotes(&mut buf, &[q.clone()]).unwrap();
        assert_eq!(read_quotes(buf.as_slice()).unwrap(), vec![q]);
    }
}
