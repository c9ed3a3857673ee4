use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::fixedmath::FixedQ64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricePoint {
    pub t: i64,
    pub price: FixedQ64,
}

impl PricePoint {
    pub fn new(t: i64, price: FixedQ64) -> Self {
        Self { t, price }
    }
}

/// Positive prices at strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PricePoint>", into = "Vec<PricePoint>")]
pub struct PriceSeries {
    points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Validates ordering and positivity; row numbers in errors are 1-based
    /// indices into `points`.
    pub fn new(points: Vec<PricePoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.price.is_positive() {
                return Err(HarnessError::NonPositivePrice { row: i + 1 });
            }
            if i > 0 && p.t <= points[i - 1].t {
                return Err(HarnessError::NonMonotonicTimestamp { row: i + 1 });
            }
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, FixedQ64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(t, p)| PricePoint::new(t, p)).collect())
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<&PricePoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&PricePoint> {
        self.points.last()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.points.iter().map(|p| p.t)
    }

    pub fn prices(&self) -> impl Iterator<Item = FixedQ64> + '_ {
        self.points.iter().map(|p| p.price)
    }

    /// Price in effect at `t`: the latest point at or before it.
    pub fn value_at(&self, t: i64) -> Option<FixedQ64> {
        let idx = self.points.partition_point(|p| p.t <= t);
        idx.checked_sub(1).map(|i| self.points[i].price)
    }

    /// Mean spacing between consecutive points, in seconds.
    pub fn mean_interval(&self) -> Option<f64> {
        match (self.first(), self.last()) {
            (Some(a), Some(b)) if self.len() > 1 => Some((b.t - a.t) as f64 / (self.len() - 1) as f64),
            _ => None,
        }
    }

    pub fn into_points(self) -> Vec<PricePoint> {
        self.points
    }
}

impl TryFrom<Vec<PricePoint>> for PriceSeries {
    type Error = HarnessError;

    fn try_from(points: Vec<PricePoint>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PriceSeries> for Vec<PricePoint> {
    fn from(s: PriceSeries) -> Self {
        s.points
    }
}

pub fn load_feed(path: &Path) -> Result<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_feed(file)
}

/// Reads `timestamp,price` rows. A header line is accepted only as the first
/// row; blank lines are skipped. Row numbers in errors are 1-based line
/// numbers.
pub fn parse_feed(reader: impl Read) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut points: Vec<PricePoint> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| HarnessError::Parse {
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(HarnessError::Parse {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let t = match record[0].parse::<i64>() {
            Ok(t) => t,
            Err(_) if i == 0 && record[1].parse::<FixedQ64>().is_err() => continue,
            Err(e) => {
                return Err(HarnessError::Parse {
                    row,
                    message: format!("timestamp {:?}: {e}", &record[0]),
                })
            }
        };
        let price: FixedQ64 = record[1].parse().map_err(|e| HarnessError::Parse {
            row,
            message: format!("price: {e}"),
        })?;
        if !price.is_positive() {
            return Err(HarnessError::NonPositivePrice { row });
        }
        if points.last().is_some_and(|p| t <= p.t) {
            return Err(HarnessError::NonMonotonicTimestamp { row });
        }
        points.push(PricePoint::new(t, price));
    }
    PriceSeries::new(points)
}

pub fn write_feed(series: &PriceSeries, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| HarnessError::Io {
        path: String::new(),
        message: e.to_string(),
    };
    w.write_record(["timestamp", "price"]).map_err(io)?;
    for p in series.points() {
        w.write_record([p.t.to_string(), p.price.to_decimal_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: String::new(),
        message: e.to_string(),
    })
}

pub fn save_feed(series: &PriceSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_feed(series, std::io::BufWriter::new(file)).map_err(|e| e.with_path(path))
}
