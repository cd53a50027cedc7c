//! Coding matrices that split an `L`-rating problem into bipartite columns.
//!
//! Row `l` is the codeword of rating `l`; column `j` is one dichotomizer. Entry `1`
//! puts the rating on the positive side, `0` on the negative side, `-1` leaves it out.
//!
//! ```text
//!  binary (L=4)   ternary-upper   ternary-lower   lpc (L=3)
//!   0  0  0        0  0  0         0 -1 -1         0  0 -1
//!   1  0  0        1  0  0         1  0 -1         1 -1  0
//!   1  1  0       -1  1  0         1  1  0        -1  1  1
//!   1  1  1       -1 -1  1         1  1  1
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Instance};

#[derive(Debug, Error, PartialEq)]
pub enum CodingError {
    #[error("need at least 2 ratings, got {0}")]
    TooFewRatings(usize),
    #[error("column {col} out of range for {columns} columns")]
    ColumnOutOfRange { col: usize, columns: usize },
    #[error("dataset has {data} ratings but the coding matrix has {coding}")]
    RatingMismatch { data: usize, coding: usize },
    #[error("column {col} has no {side} instances")]
    DegenerateColumn { col: usize, side: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodingScheme {
    /// Column `j` separates ratings `>= j` from ratings `< j`.
    Binary,
    /// Column `j` separates rating `j` from ratings `< j`; higher ratings excluded.
    TernaryUpper,
    /// Column `j` separates ratings `>= j` from rating `j - 1`; lower ratings excluded.
    TernaryLower,
    /// One column per rating pair `(a, b)`, `a < b`: `b` positive, `a` negative.
    Lpc,
}

impl CodingScheme {
    pub const ALL: [CodingScheme; 4] = [
        CodingScheme::Binary,
        CodingScheme::TernaryUpper,
        CodingScheme::TernaryLower,
        CodingScheme::Lpc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodingScheme::Binary => "binary",
            CodingScheme::TernaryUpper => "ternary-upper",
            CodingScheme::TernaryLower => "ternary-lower",
            CodingScheme::Lpc => "lpc",
        }
    }
}

impl fmt::Display for CodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodingScheme::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown coding scheme {s:?}"))
    }
}

/// Role of a rating in one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Positive,
    Negative,
    Excluded,
}

impl Role {
    fn from_code(code: i8) -> Role {
        match code {
            1 => Role::Positive,
            0 => Role::Negative,
            _ => Role::Excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingMatrix {
    scheme: CodingScheme,
    num_ratings: usize,
    /// Row-major `L x k`.
    entries: Vec<i8>,
    columns: usize,
    /// Rating pair of each column, for `lpc`.
    pairs: Vec<(usize, usize)>,
}

impl CodingMatrix {
    pub fn build(num_ratings: usize, scheme: CodingScheme) -> Result<Self, CodingError> {
        build_coding_matrix(num_ratings, scheme)
    }

    pub fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    pub fn num_ratings(&self) -> usize {
        self.num_ratings
    }

    pub fn num_columns(&self) -> usize {
        self.columns
    }

    /// Entry for `rating` in 0-based column `col`.
    pub fn entry(&self, rating: usize, col: usize) -> i8 {
        self.entries[rating * self.columns + col]
    }

    pub fn role(&self, rating: usize, col: usize) -> Role {
        Role::from_code(self.entry(rating, col))
    }

    pub fn row(&self, rating: usize) -> &[i8] {
        &self.entries[rating * self.columns..(rating + 1) * self.columns]
    }

    pub fn rows(&self) -> Vec<Vec<i8>> {
        (0..self.num_ratings).map(|l| self.row(l).to_vec()).collect()
    }

    pub fn column(&self, col: usize) -> Vec<i8> {
        (0..self.num_ratings).map(|l| self.entry(l, col)).collect()
    }

    /// `(negative rating, positive rating)` of each column; empty unless `lpc`.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// One row per rating, entries separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in 0..self.num_ratings {
            let row: Vec<String> = self.row(l).iter().map(|e| e.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for CodingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn build_coding_matrix(num_ratings: usize, scheme: CodingScheme) -> Result<CodingMatrix, CodingError> {
    let l_count = num_ratings;
    if l_count < 2 {
        return Err(CodingError::TooFewRatings(l_count));
    }
    let mut pairs = Vec::new();
    let (columns, code): (usize, Box<dyn Fn(usize, usize) -> i8>) = match scheme {
        // columns are numbered j = col + 1
        CodingScheme::Binary => (l_count - 1, Box::new(|l, col| i8::from(col < l))),
        CodingScheme::TernaryUpper => (
            l_count - 1,
            Box::new(|l, col| match l.cmp(&(col + 1)) {
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Greater => -1,
            }),
        ),
        CodingScheme::TernaryLower => (
            l_count - 1,
            Box::new(|l, col| match l.cmp(&col) {
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            }),
        ),
        CodingScheme::Lpc => {
            for a in 0..l_count {
                for b in a + 1..l_count {
                    pairs.push((a, b));
                }
            }
            let p = pairs.clone();
            (
                p.len(),
                Box::new(move |l, col| {
                    let (a, b) = p[col];
                    if l == b {
                        1
                    } else if l == a {
                        0
                    } else {
                        -1
                    }
                }),
            )
        }
    };
    let mut entries = Vec::with_capacity(l_count * columns);
    for l in 0..l_count {
        for col in 0..columns {
            entries.push(code(l, col));
        }
    }
    Ok(CodingMatrix {
        scheme,
        num_ratings: l_count,
        entries,
        columns,
        pairs,
    })
}

/// The instances one column trains on, as positions into the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSplit {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl ColumnSplit {
    pub fn positive_instances<'a>(&self, d: &'a Dataset) -> Vec<&'a Instance> {
        self.positives.iter().map(|&p| &d.instances()[p]).collect()
    }

    pub fn negative_instances<'a>(&self, d: &'a Dataset) -> Vec<&'a Instance> {
        self.negatives.iter().map(|&p| &d.instances()[p]).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.positives.is_empty() || self.negatives.is_empty()
    }
}

/// Splits the dataset by the roles column `col` assigns, without rejecting empty sides.
pub fn column_split(d: &Dataset, m: &CodingMatrix, col: usize) -> Result<ColumnSplit, CodingError> {
    if col >= m.num_columns() {
        return Err(CodingError::ColumnOutOfRange {
            col,
            columns: m.num_columns(),
        });
    }
    if d.num_ratings() > m.num_ratings() {
        return Err(CodingError::RatingMismatch {
            data: d.num_ratings(),
            coding: m.num_ratings(),
        });
    }
    let mut split = ColumnSplit {
        positives: Vec::new(),
        negatives: Vec::new(),
        excluded: Vec::new(),
    };
    for (p, x) in d.instances().iter().enumerate() {
        match m.role(x.rating(), col) {
            Role::Positive => split.positives.push(p),
            Role::Negative => split.negatives.push(p),
            Role::Excluded => split.excluded.push(p),
        }
    }
    Ok(split)
}

/// Positive and negative instances of column `col`; an empty side is an error.
pub fn column_dataset<'a>(
    d: &'a Dataset,
    m: &CodingMatrix,
    col: usize,
) -> Result<(Vec<&'a Instance>, Vec<&'a Instance>), CodingError> {
    let split = column_split(d, m, col)?;
    if split.positives.is_empty() {
        return Err(CodingError::DegenerateColumn { col, side: "positive" });
    }
    if split.negatives.is_empty() {
        return Err(CodingError::DegenerateColumn { col, side: "negative" });
    }
    Ok((split.positive_instances(d), split.negative_instances(d)))
}
