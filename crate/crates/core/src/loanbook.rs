//! Loan-book CSV: one row per loan, integer kopecks and basis points so the
//! file format never rounds.
//!
//! ```text
//! loan_id,principal_kopecks,rate_bp,guarantee_bp,collateral_value_kopecks,collateral_coeff_milli,sector
//! L-001,50000000,1500,1000,52500000,1000,manufacturing
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deal::{CollateralBasis, CollateralCoefficient, LoanTerms};
use crate::money::{Fraction, Money, Rate};

pub const COLUMNS: [&str; 7] = [
    "loan_id",
    "principal_kopecks",
    "rate_bp",
    "guarantee_bp",
    "collateral_value_kopecks",
    "collateral_coeff_milli",
    "sector",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("missing or wrong header; expected {}", COLUMNS.join(","))]
    Header,
    #[error("row {row}, column {column}: {message}")]
    Field {
        row: u64,
        column: &'static str,
        message: String,
    },
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("loan book has no rows")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoanBookRow {
    pub loan_id: String,
    pub principal_kopecks: u64,
    pub rate_bp: u32,
    pub guarantee_bp: u32,
    pub collateral_value_kopecks: u64,
    pub collateral_coeff_milli: u32,
    pub sector: String,
}

impl LoanBookRow {
    pub fn terms(&self) -> LoanTerms {
        LoanTerms {
            principal: Money::from_minor(self.principal_kopecks as i64).expect("validated on parse"),
            annual_rate: Rate::from_bp(self.rate_bp as i64),
            guarantee_fraction: Fraction::from_bp(self.guarantee_bp).expect("validated on parse"),
            collateral_coefficient: CollateralCoefficient::from_milli(self.collateral_coeff_milli),
            collateral_basis: CollateralBasis::PrincipalNetPlusInterest,
            sector: self.sector.clone(),
        }
    }

    pub fn collateral_value(&self) -> Money {
        Money::from_minor(self.collateral_value_kopecks as i64).expect("validated on parse")
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, row: u64) -> Result<T, BookError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| BookError::Field {
        row,
        column: COLUMNS[idx],
        message: format!("expected a non-negative integer, got {raw:?}"),
    })
}

/// Parses and validates a loan book. Rows are numbered by file line, the
/// header being line 1.
pub fn parse_loan_book(text: &str) -> Result<Vec<LoanBookRow>, BookError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|_| BookError::Header)?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(BookError::Header);
    }
    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for result in reader.records() {
        let rec = result.map_err(|e| BookError::Row {
            row: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != COLUMNS.len() {
            return Err(BookError::Row {
                row,
                message: format!("expected {} fields, got {}", COLUMNS.len(), rec.len()),
            });
        }
        let loan_id = rec[0].to_string();
        if loan_id.is_empty() {
            return Err(BookError::Field { row, column: "loan_id", message: "empty".into() });
        }
        if !ids.insert(loan_id.clone()) {
            return Err(BookError::Field {
                row,
                column: "loan_id",
                message: format!("duplicate loan id {loan_id:?}"),
            });
        }
        let parsed = LoanBookRow {
            loan_id,
            principal_kopecks: field(&rec, 1, row)?,
            rate_bp: field(&rec, 2, row)?,
            guarantee_bp: field(&rec, 3, row)?,
            collateral_value_kopecks: field(&rec, 4, row)?,
            collateral_coeff_milli: field(&rec, 5, row)?,
            sector: rec[6].to_string(),
        };
        let range = |column, message: &str| BookError::Field {
            row,
            column,
            message: message.to_string(),
        };
        if parsed.principal_kopecks == 0 || Money::from_minor(parsed.principal_kopecks as i64).is_err() || parsed.principal_kopecks > i64::MAX as u64 {
            return Err(range("principal_kopecks", "must be positive and in range"));
        }
        if parsed.guarantee_bp >= 10_000 {
            return Err(range("guarantee_bp", "must be below 10000"));
        }
        if parsed.collateral_value_kopecks > i64::MAX as u64 || Money::from_minor(parsed.collateral_value_kopecks as i64).is_err() {
            return Err(range("collateral_value_kopecks", "out of range"));
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(BookError::Empty);
    }
    Ok(rows)
}

pub fn write_loan_book(rows: &[LoanBookRow]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        writer.serialize(r).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
