//! CSV ingestion: reading call-record exports, deciding column roles, and
//! turning text columns into numbers.
//!
//! Column roles are inferred from names and contents but can be pinned down
//! with a schema file (`column = kind` lines). The rules are deliberately
//! boring and order-independent:
//!
//! * a column is the label if its name is `label` or mentions `fraud`;
//! * a column is an identifier if its name mentions `phone`, `id`, `msisdn`,
//!   `imei`, or `imsi` — identifiers never become features;
//! * a column is numeric if every non-missing cell parses as a finite float,
//!   otherwise it is categorical.
//!
//! Missing cells are the empty string, `NA`, or `NaN` (case-insensitive).
//! Rows containing any missing cell are dropped before encoding; there is no
//! imputation.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CdrTable, ColumnKind, ColumnSpec, Dataset, RawValue};
use crate::error::{Error, Result};

/// Values that read as "looks affirmative" when deciding which side of a
/// two-valued column codes as 1.
const POSITIVE_TOKENS: &[&str] = &["1", "y", "t", "yes", "true", "fraud"];

/// How column roles are determined when loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schema {
    /// Infer every role from names and contents.
    Infer,
    /// Pin the listed columns to the given kinds; infer the rest.
    Overrides(Vec<(String, ColumnKind)>),
}

impl Schema {
    /// Parse a schema file: one `column = kind` per line, `#` comments and
    /// blank lines ignored. Kinds are `numeric`, `categorical`,
    /// `identifier`, and `label`.
    pub fn from_file(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
            path: path.to_path_buf(),
            source,
        })?;
        let mut overrides = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((name, kind)) = line.split_once('=') else {
                return Err(Error::SchemaSyntax {
                    line: i + 1,
                    text: raw_line.to_string(),
                });
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::SchemaSyntax {
                    line: i + 1,
                    text: raw_line.to_string(),
                });
            }
            let kind = match kind.trim().to_ascii_lowercase().as_str() {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                "identifier" => ColumnKind::Identifier,
                "label" => ColumnKind::Label,
                other => {
                    return Err(Error::SchemaKind {
                        line: i + 1,
                        kind: other.to_string(),
                    })
                }
            };
            overrides.push((name.to_string(), kind));
        }
        Ok(Schema::Overrides(overrides))
    }
}

/// True for the cell contents treated as missing.
pub fn is_missing_marker(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn name_words(name: &str) -> Vec<String> {
    name.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn looks_like_label(name: &str) -> bool {
    let words = name_words(name);
    name.trim().eq_ignore_ascii_case("label") || words.iter().any(|w| w == "fraud")
}

fn looks_like_identifier(name: &str) -> bool {
    let words = name_words(name);
    words
        .iter()
        .any(|w| matches!(w.as_str(), "phone" | "id" | "msisdn" | "imei" | "imsi"))
}

/// Read a CSV into trimmed string cells, checking the header and row arity.
pub fn read_raw_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                let source = std::io::Error::new(std::io::ErrorKind::Other, e.to_string());
                Error::FileRead {
                    path: path.to_path_buf(),
                    source,
                }
            }
            _ => Error::CsvParse(e),
        })?;

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::NoDataRows {
                path: path.to_path_buf(),
            })
        }
    };
    let headers: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();

    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::RowArity {
                row: i + 1,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok((headers, rows))
}

/// Load a CSV and resolve every column to a [`ColumnKind`].
///
/// Cells of numeric columns are parsed here, so a value that cannot be read
/// as a finite number in a column pinned `numeric` by the schema fails fast
/// with its row and column.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<CdrTable> {
    let (headers, rows) = read_raw_csv(path)?;
    if rows.is_empty() {
        return Err(Error::NoDataRows {
            path: path.to_path_buf(),
        });
    }

    let mut seen = std::collections::HashSet::new();
    for h in &headers {
        if h.is_empty() {
            return Err(Error::EmptyColumnName);
        }
        if !seen.insert(h.clone()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }

    let mut pinned: HashMap<&str, ColumnKind> = HashMap::new();
    if let Schema::Overrides(overrides) = schema {
        for (name, kind) in overrides {
            if !headers.iter().any(|h| h == name) {
                return Err(Error::UnknownSchemaColumn(name.clone()));
            }
            pinned.insert(name.as_str(), *kind);
        }
    }

    let mut columns = Vec::with_capacity(headers.len());
    for (j, name) in headers.iter().enumerate() {
        let kind = match pinned.get(name.as_str()) {
            Some(&k) => k,
            None if looks_like_label(name) => ColumnKind::Label,
            None if looks_like_identifier(name) => ColumnKind::Identifier,
            None => {
                let all_numeric = rows
                    .iter()
                    .map(|r| r[j].as_str())
                    .filter(|c| !is_missing_marker(c))
                    .all(|c| parse_finite(c).is_some());
                if all_numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            }
        };
        columns.push(ColumnSpec {
            name: name.clone(),
            kind,
        });
    }

    let mut typed_rows = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut typed = Vec::with_capacity(row.len());
        for (j, cell) in row.iter().enumerate() {
            let value = if is_missing_marker(cell) {
                RawValue::Missing
            } else if columns[j].kind == ColumnKind::Numeric {
                match parse_finite(cell) {
                    Some(v) => RawValue::Number(v),
                    None => {
                        return Err(Error::NumericParse {
                            column: columns[j].name.clone(),
                            row: i + 1,
                            value: cell.clone(),
                        })
                    }
                }
            } else {
                RawValue::Text(cell.clone())
            };
            typed.push(value);
        }
        typed_rows.push(typed);
    }

    CdrTable::new(columns, typed_rows)
}

/// Remove every row containing a missing cell.
///
/// Returns the cleaned table and how many rows were dropped. Refuses to
/// return an empty table.
pub fn drop_missing(table: &CdrTable) -> Result<(CdrTable, usize)> {
    let keep: Vec<usize> = (0..table.n_rows())
        .filter(|&i| !table.rows()[i].iter().any(RawValue::is_missing))
        .collect();
    if keep.is_empty() {
        return Err(Error::AllRowsMissing(table.n_rows()));
    }
    let dropped = table.n_rows() - keep.len();
    Ok((table.retain_rows(&keep), dropped))
}

/// How one feature column is turned into a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "treatment", rename_all = "lowercase")]
pub enum ColumnEncoding {
    /// Passed through as parsed.
    Numeric { name: String },
    /// Two-valued column coded 0/1.
    Binary {
        name: String,
        negative: String,
        positive: String,
    },
    /// Integer codes in order of first appearance.
    Ordinal {
        name: String,
        categories: Vec<String>,
    },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name } => name,
            ColumnEncoding::Binary { name, .. } => name,
            ColumnEncoding::Ordinal { name, .. } => name,
        }
    }
}

/// Which label value means fraud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub column: String,
    pub negative: String,
    pub positive: String,
}

/// The fitted mapping from raw table cells to feature vectors.
///
/// An encoder remembers everything needed to replay the training-time
/// encoding on new files: per-column treatments, the label convention, and
/// which identifier columns to skip. It rides inside the model file so
/// `predict` can take the same raw CSV format that `train` took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<ColumnEncoding>,
    pub label: LabelEncoding,
    pub identifiers: Vec<String>,
}

impl Encoder {
    /// Names of the encoded feature columns, in matrix order.
    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name().to_string()).collect()
    }

    /// Encode one feature cell. `row` is 1-based, for error messages.
    fn encode_cell(&self, enc: &ColumnEncoding, cell: &str, row: usize) -> Result<f64> {
        if is_missing_marker(cell) {
            return Err(Error::MissingValue {
                column: enc.name().to_string(),
                row,
            });
        }
        match enc {
            ColumnEncoding::Numeric { name } => {
                parse_finite(cell).ok_or_else(|| Error::NumericParse {
                    column: name.clone(),
                    row,
                    value: cell.to_string(),
                })
            }
            ColumnEncoding::Binary {
                name,
                negative,
                positive,
            } => {
                if cell == negative {
                    Ok(0.0)
                } else if cell == positive {
                    Ok(1.0)
                } else {
                    Err(Error::UnseenCategory {
                        column: name.clone(),
                        row,
                        value: cell.to_string(),
                    })
                }
            }
            ColumnEncoding::Ordinal { name, categories } => categories
                .iter()
                .position(|c| c == cell)
                .map(|p| p as f64)
                .ok_or_else(|| Error::UnseenCategory {
                    column: name.clone(),
                    row,
                    value: cell.to_string(),
                }),
        }
    }

    /// Encode one label cell to 0/1.
    pub fn encode_label(&self, cell: &str, row: usize) -> Result<u8> {
        let cell = cell.trim();
        if cell == self.label.negative {
            Ok(0)
        } else if cell == self.label.positive {
            Ok(1)
        } else {
            Err(Error::UnseenCategory {
                column: self.label.column.clone(),
                row,
                value: cell.to_string(),
            })
        }
    }

    /// Column indices this encoder needs, resolved against a raw CSV header.
    ///
    /// Returns `(feature cell indices, label index if present, identifier
    /// index if present)`. Extra columns in the input are ignored; absent
    /// feature columns are an error.
    pub fn resolve_header(&self, headers: &[String]) -> Result<ResolvedHeader> {
        let index_of = |name: &str| headers.iter().position(|h| h == name);
        let mut feature_cols = Vec::with_capacity(self.columns.len());
        for enc in &self.columns {
            match index_of(enc.name()) {
                Some(j) => feature_cols.push(j),
                None => return Err(Error::MissingColumn(enc.name().to_string())),
            }
        }
        Ok(ResolvedHeader {
            feature_cols,
            label_col: index_of(&self.label.column),
            id_col: self.identifiers.iter().find_map(|n| index_of(n)),
        })
    }

    /// Encode the feature cells of one raw record. `row` is 1-based.
    pub fn encode_record(
        &self,
        resolved: &ResolvedHeader,
        record: &[String],
        row: usize,
    ) -> Result<Vec<f64>> {
        self.columns
            .iter()
            .zip(&resolved.feature_cols)
            .map(|(enc, &j)| self.encode_cell(enc, &record[j], row))
            .collect()
    }

    /// Apply this encoder to a whole table (used at fit time and in tests).
    ///
    /// The table must have no missing values and must contain every column
    /// the encoder was fitted on.
    pub fn apply(&self, table: &CdrTable) -> Result<Dataset> {
        let mut feature_cols = Vec::with_capacity(self.columns.len());
        for enc in &self.columns {
            match table.column_index(enc.name()) {
                Some(j) => feature_cols.push(j),
                None => return Err(Error::MissingColumn(enc.name().to_string())),
            }
        }
        let label_col = table
            .column_index(&self.label.column)
            .ok_or_else(|| Error::MissingColumn(self.label.column.clone()))?;

        let as_text = |v: &RawValue| -> String {
            match v {
                RawValue::Text(t) => t.clone(),
                // Numeric cells print in shortest round-trip form, so a
                // categorical encoder fitted on numeric-looking text still
                // matches.
                RawValue::Number(x) => format!("{x}"),
                RawValue::Missing => String::new(),
            }
        };

        let mut rows = Vec::with_capacity(table.n_rows());
        let mut labels = Vec::with_capacity(table.n_rows());
        for (i, raw) in table.rows().iter().enumerate() {
            let mut row = Vec::with_capacity(self.columns.len());
            for (enc, &j) in self.columns.iter().zip(&feature_cols) {
                if raw[j].is_missing() {
                    return Err(Error::MissingValue {
                        column: enc.name().to_string(),
                        row: i + 1,
                    });
                }
                row.push(self.encode_cell(enc, &as_text(&raw[j]), i + 1)?);
            }
            rows.push(row);
            labels.push(self.encode_label(&as_text(&raw[label_col]), i + 1)?);
        }

        let mut data = Dataset::new(rows, labels, self.feature_names())?;
        data.set_encoder(self.clone());
        Ok(data)
    }
}

/// Header positions resolved for one input file. See [`Encoder::resolve_header`].
#[derive(Debug, Clone)]
pub struct ResolvedHeader {
    pub feature_cols: Vec<usize>,
    pub label_col: Option<usize>,
    pub id_col: Option<usize>,
}

fn normalized(s: &str) -> String {
    s.trim().to_ascii_lowercase()
}

fn is_positive_token(s: &str) -> bool {
    POSITIVE_TOKENS.contains(&normalized(s).as_str())
}

/// Fit an [`Encoder`] on a table with no missing values.
///
/// Categorical columns get first-appearance integer codes; two-valued
/// columns code the affirmative-looking value (`yes`, `true`, `1`, ...) as
/// 1 when there is exactly one such value, otherwise first appearance wins.
/// The label's fraud value is picked the same way, falling back to the rarer
/// value — fraud is the thing worth hunting precisely because it is rare.
pub fn fit_encoder(table: &CdrTable) -> Result<Encoder> {
    let label_idx = table.label_index();
    let mut columns = Vec::new();
    let mut identifiers = Vec::new();

    for (j, spec) in table.columns().iter().enumerate() {
        match spec.kind {
            ColumnKind::Label => {}
            ColumnKind::Identifier => identifiers.push(spec.name.clone()),
            ColumnKind::Numeric => columns.push(ColumnEncoding::Numeric {
                name: spec.name.clone(),
            }),
            ColumnKind::Categorical => {
                let mut categories: Vec<String> = Vec::new();
                for (i, row) in table.rows().iter().enumerate() {
                    let text = match &row[j] {
                        RawValue::Text(t) => t.clone(),
                        RawValue::Number(x) => format!("{x}"),
                        RawValue::Missing => {
                            return Err(Error::MissingValue {
                                column: spec.name.clone(),
                                row: i + 1,
                            })
                        }
                    };
                    if !categories.contains(&text) {
                        categories.push(text);
                    }
                }
                if categories.len() == 2 {
                    let pos_matches: Vec<usize> = (0..2)
                        .filter(|&i| is_positive_token(&categories[i]))
                        .collect();
                    let (negative, positive) = match pos_matches.as_slice() {
                        [1] => (categories[0].clone(), categories[1].clone()),
                        [0] => (categories[1].clone(), categories[0].clone()),
                        // Neither or both look affirmative: first appearance
                        // codes 0.
                        _ => (categories[0].clone(), categories[1].clone()),
                    };
                    columns.push(ColumnEncoding::Binary {
                        name: spec.name.clone(),
                        negative,
                        positive,
                    });
                } else {
                    columns.push(ColumnEncoding::Ordinal {
                        name: spec.name.clone(),
                        categories,
                    });
                }
            }
        }
    }

    // Label convention: exactly two distinct values, one of them fraud.
    let mut values: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (i, row) in table.rows().iter().enumerate() {
        let text = match &row[label_idx] {
            RawValue::Text(t) => t.clone(),
            RawValue::Number(x) => format!("{x}"),
            RawValue::Missing => {
                return Err(Error::MissingValue {
                    column: table.columns()[label_idx].name.clone(),
                    row: i + 1,
                })
            }
        };
        match values.iter().position(|v| *v == text) {
            Some(k) => counts[k] += 1,
            None => {
                values.push(text);
                counts.push(1);
            }
        }
    }
    let column = table.columns()[label_idx].name.clone();
    if values.len() != 2 {
        return Err(Error::LabelCardinality {
            column,
            found: values.len(),
        });
    }

    let pos_matches: Vec<usize> = (0..2).filter(|&i| is_positive_token(&values[i])).collect();
    let positive_idx = match pos_matches.as_slice() {
        [only] => *only,
        _ => {
            // No (or no unique) affirmative marker: the minority value is
            // the positive class.
            if counts[0] < counts[1] {
                0
            } else if counts[1] < counts[0] {
                1
            } else {
                return Err(Error::AmbiguousLabel {
                    column,
                    values: [values[0].clone(), values[1].clone()],
                });
            }
        }
    };
    let label = LabelEncoding {
        column,
        negative: values[1 - positive_idx].clone(),
        positive: values[positive_idx].clone(),
    };

    Ok(Encoder {
        columns,
        label,
        identifiers,
    })
}

/// Fit an encoder on `table` and apply it, yielding the numeric dataset.
pub fn encode(table: &CdrTable) -> Result<Dataset> {
    let encoder = fit_encoder(table)?;
    encoder.apply(table)
}
