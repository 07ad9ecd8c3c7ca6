//! Result tables written as CSV or as a JSON array of row objects.

use std::io::Write;

use serde_json::{Map, Number, Value as Json};

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Count(u64),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => format_f64(*v),
            Cell::Count(n) => n.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Text(s) => Json::String(s.clone()),
            Cell::Num(v) => Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Cell::Count(n) => Json::Number((*n).into()),
            Cell::Empty => Json::Null,
        }
    }
}

/// Shortest decimal that reads back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, w: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(&self.headers)?;
                for row in &self.rows {
                    out.write_record(row.iter().map(Cell::csv))?;
                }
                out.flush()
            }
            Format::Json => {
                let rows: Vec<Json> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Json> =
                            self.headers.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                        Json::Object(obj)
                    })
                    .collect();
                serde_json::to_writer_pretty(&mut *w, &rows)?;
                writeln!(w)
            }
        }
    }
}
