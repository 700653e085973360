use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, FeatureSchema, Matrix, LABEL_COLUMN};
use crate::error::{Error, Result};

/// Reads a dataset from a CSV file whose header is the schema's feature
/// names followed by `position`.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let expected: Vec<&str> = schema
        .names()
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(LABEL_COLUMN))
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::Schema(format!(
            "expected columns [{}], found [{}]",
            expected.join(","),
            found.join(",")
        )));
    }

    let n_features = schema.n_features();
    let mut features = Matrix::new(n_features);
    let mut labels = Vec::new();
    let mut row_buf = vec![0.0; n_features];

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::Schema(format!(
                "row {row} has {len} fields, expected {}",
                expected.len()
            )),
            _ => Error::Schema(format!("row {row}: {e}")),
        })?;
        for (j, slot) in row_buf.iter_mut().enumerate() {
            let cell = &record[j];
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: schema.names()[j].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: schema.names()[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            *slot = value;
        }
        labels.push(parse_label(&record[n_features], row, schema)?);
        features.push_row(&row_buf)?;
    }

    Dataset::new(schema.clone(), features, labels)
}

fn parse_label(cell: &str, row: usize, schema: &FeatureSchema) -> Result<usize> {
    if let Some(k) = schema.class_index(cell) {
        return Ok(k);
    }
    match cell.parse::<usize>() {
        Ok(k) if k < schema.n_classes() => Ok(k),
        _ => Err(Error::Label {
            row,
            value: cell.to_string(),
        }),
    }
}

/// Writes the dataset with class names in the label column. Floats use the
/// shortest representation that reads back to the same value.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Schema(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.schema().names().iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    wtr.write_record(&header).map_err(to_err)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for (row, &label) in data.features().rows().zip(data.labels()) {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        fields.push(data.schema().class_names()[label].clone());
        wtr.write_record(&fields).map_err(to_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Schema(format!("csv flush failed: {e}")))?;
    Ok(())
}
