use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::schema::FeatureSchema;
use crate::error::{Error, Result};

/// One typed column. `None` is the missing-value marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            Column::Numeric(v) => v.iter().filter(|x| x.is_none()).count(),
            Column::Categorical(v) => v.iter().filter(|x| x.is_none()).count(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

/// Column-oriented table; every column has `row_count` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: IndexMap<String, Column>,
    row_count: usize,
}

pub(crate) fn is_missing_cell(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("n/a")
}

impl Dataset {
    pub fn new(columns: IndexMap<String, Column>) -> Result<Self> {
        let row_count = columns.values().next().map(Column::len).unwrap_or(0);
        for (name, col) in &columns {
            if col.len() != row_count {
                return Err(Error::Schema(format!(
                    "column `{name}` has {} rows, expected {row_count}",
                    col.len()
                )));
            }
        }
        Ok(Self { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[Option<f64>]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical(_) => Err(Error::ColumnType {
                column: name.to_string(),
                expected: "numeric",
            }),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&[Option<String>]> {
        match self.column(name)? {
            Column::Categorical(v) => Ok(v),
            Column::Numeric(_) => Err(Error::ColumnType {
                column: name.to_string(),
                expected: "categorical",
            }),
        }
    }

    pub fn set_column(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        if !self.columns.is_empty() && column.len() != self.row_count {
            return Err(Error::DimensionMismatch {
                expected: self.row_count,
                found: column.len(),
            });
        }
        if self.columns.is_empty() {
            self.row_count = column.len();
        }
        self.columns.insert(name.into(), column);
        Ok(())
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.select(rows)))
                .collect(),
            row_count: rows.len(),
        }
    }

    /// Read a CSV whose header must consist of the schema's features plus any
    /// description columns the schema references.
    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, schema)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, schema: &FeatureSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();

        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(Error::DuplicateColumn(h.clone()));
            }
        }
        let aux = schema.auxiliary_columns();
        for h in &header {
            if schema.get(h).is_none() && !aux.contains(&h.as_str()) {
                return Err(Error::UnknownColumn(h.clone()));
            }
        }
        let expected: Vec<&str> = schema
            .features
            .iter()
            .map(|f| f.name.as_str())
            .chain(aux.iter().copied())
            .collect();
        for name in &expected {
            if !seen.contains(name) {
                return Err(Error::MissingColumn(name.to_string()));
            }
        }

        let numeric: Vec<bool> = header
            .iter()
            .map(|h| schema.get(h).is_some_and(|f| f.kind.is_numeric_column()))
            .collect();
        let mut cells: Vec<Column> = numeric
            .iter()
            .map(|&n| {
                if n {
                    Column::Numeric(Vec::new())
                } else {
                    Column::Categorical(Vec::new())
                }
            })
            .collect();

        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::RowLength {
                    row: i + 1,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                match &mut cells[j] {
                    Column::Numeric(v) => {
                        if is_missing_cell(cell) {
                            v.push(None);
                        } else {
                            match cell.trim().parse::<f64>() {
                                Ok(x) if x.is_finite() => v.push(Some(x)),
                                _ => {
                                    log::warn!(
                                        "row {}: unparseable value {:?} in `{}`; treated as missing",
                                        i + 1,
                                        cell,
                                        header[j]
                                    );
                                    v.push(None);
                                }
                            }
                        }
                    }
                    Column::Categorical(v) => {
                        if is_missing_cell(cell) {
                            v.push(None);
                        } else {
                            v.push(Some(cell.trim().to_string()));
                        }
                    }
                }
            }
        }

        let mut by_name: IndexMap<String, Column> = header.into_iter().zip(cells).collect();
        let mut columns = IndexMap::new();
        for name in expected {
            let (k, c) = by_name.shift_remove_entry(name).expect("checked above");
            columns.insert(k, c);
        }
        Dataset::new(columns)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.keys())?;
        for r in 0..self.row_count {
            let row = self.columns.values().map(|c| match c {
                Column::Numeric(v) => v[r].map(|x| x.to_string()).unwrap_or_default(),
                Column::Categorical(v) => v[r].clone().unwrap_or_default(),
            });
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::schema::{FeatureKind, FeatureSpec};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::new("area", FeatureKind::Numeric),
            FeatureSpec::new("recipe", FeatureKind::CategoricalBinary),
            FeatureSpec::new("thickness", FeatureKind::Target),
        ])
        .unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let csv = "area,recipe,thickness\n1.5,A,3\n2,B,4\n2.5,A,5\n";
        let ds = Dataset::from_reader(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.row_count(), 3);
        assert_eq!(
            ds.numeric("area").unwrap(),
            &[Some(1.5), Some(2.0), Some(2.5)]
        );
        assert_eq!(ds.categorical("recipe").unwrap()[1].as_deref(), Some("B"));
    }

    #[test]
    fn header_order_follows_schema() {
        let csv = "thickness,recipe,area\n3,A,1\n";
        let ds = Dataset::from_reader(csv.as_bytes(), &schema()).unwrap();
        let names: Vec<&str> = ds.column_names().collect();
        assert_eq!(names, vec!["area", "recipe", "thickness"]);
    }

    #[test]
    fn unknown_column_is_rejected() {
        let csv = "area,recipe,thickness,extra\n1,A,3,9\n";
        let err = Dataset::from_reader(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "extra"));
        assert!(err_text("area,recipe,thickness,extra\n1,A,3,9\n").contains("unknown column"));
    }

    fn err_text(csv: &str) -> String {
        Dataset::from_reader(csv.as_bytes(), &schema())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn missing_and_duplicate_headers() {
        assert!(matches!(
            Dataset::from_reader("area,thickness\n1,2\n".as_bytes(), &schema()),
            Err(Error::MissingColumn(c)) if c == "recipe"
        ));
        assert!(matches!(
            Dataset::from_reader(
                "area,area,recipe,thickness\n1,1,A,2\n".as_bytes(),
                &schema()
            ),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn ragged_row_is_rejected() {
        let err =
            Dataset::from_reader("area,recipe,thickness\n1,A\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(
            err,
            Error::RowLength {
                row: 1,
                expected: 3,
                found: 2
            }
        ));
    }

    #[test]
    fn missing_markers() {
        let csv = "area,recipe,thickness\nn/a,,3\n,N/A,4\nabc,B,5\n";
        let ds = Dataset::from_reader(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(ds.numeric("area").unwrap(), &[None, None, None]);
        assert_eq!(
            ds.categorical("recipe").unwrap(),
            &[None, None, Some("B".into())]
        );
    }

    #[test]
    fn csv_round_trip() {
        let csv = "area,recipe,thickness\n0.1,A,3\n,B,4.25\n";
        let ds = Dataset::from_reader(csv.as_bytes(), &schema()).unwrap();
        let mut buf = Vec::new();
        ds.to_writer(&mut buf).unwrap();
        let back = Dataset::from_reader(buf.as_slice(), &schema()).unwrap();
        assert_eq!(ds, back);
    }
}
