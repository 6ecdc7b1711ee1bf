//! Embedding and distance-matrix files.
//!
//! Embeddings are CSV with header `id,x[,y[,z]]` or JSON
//! `{"dims":2,"points":[{"id":...,"coords":[...]}]}`. Distance matrices are
//! CSV whose first row and first column hold the ids.

use std::io::{Read, Write};
use std::path::Path;

use super::{DistanceMatrix, EmbeddingError, Result};
use crate::cloud::{Point, PointCloud};

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

/// Reads a file, choosing the format from the extension (`.json` → JSON,
/// anything else → CSV).
pub fn import_embedding(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        import_embedding_json(&text)
    } else {
        import_embedding_csv(text.as_bytes())
    }
}

pub fn import_embedding_json(text: &str) -> Result<PointCloud> {
    serde_json::from_str(text).map_err(|e| EmbeddingError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn import_embedding_csv<R: Read>(reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EmbeddingError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let dims = names.len().saturating_sub(1);
    if names.first() != Some(&"id") || dims == 0 || dims > 3 || names[1..] != AXIS_NAMES[..dims] {
        return Err(EmbeddingError::Parse {
            line: 1,
            message: format!("expected header id,x[,y[,z]], got {}", names.join(",")),
        });
    }
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| EmbeddingError::Parse { line, message: e.to_string() })?;
        if record.len() != dims + 1 {
            return Err(EmbeddingError::Parse {
                line,
                message: format!("expected {} fields, got {}", dims + 1, record.len()),
            });
        }
        let id = record[0].to_string();
        let mut coords = Vec::with_capacity(dims);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| EmbeddingError::Parse {
                line,
                message: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::Parse {
                    line,
                    message: format!("non-finite coordinate {field:?} for {id:?}"),
                });
            }
            coords.push(v);
        }
        points.push(Point::new(id, coords));
    }
    Ok(PointCloud::new(dims, points)?)
}

pub fn export_embedding_csv<W: Write>(cloud: &PointCloud, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id"];
    header.extend_from_slice(&AXIS_NAMES[..cloud.dims()]);
    wtr.write_record(&header).map_err(csv_err)?;
    for p in cloud.points() {
        let mut rec = vec![p.id.clone()];
        rec.extend(p.coords.iter().map(|c| c.to_string()));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_distance_matrix_csv<R: Read>(reader: R) -> Result<DistanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EmbeddingError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| EmbeddingError::Parse { line, message: e.to_string() })?;
        if row >= n {
            return Err(EmbeddingError::Parse { line, message: "more rows than ids".into() });
        }
        if record.len() != n + 1 {
            return Err(EmbeddingError::Parse {
                line,
                message: format!("expected {} fields, got {}", n + 1, record.len()),
            });
        }
        if record[0] != ids[row] {
            return Err(EmbeddingError::Parse {
                line,
                message: format!("row id {:?} does not match column id {:?}", &record[0], ids[row]),
            });
        }
        for field in record.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(|_| EmbeddingError::Parse {
                line,
                message: format!("{field:?} is not a number"),
            })?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(EmbeddingError::Parse {
            line: rows + 2,
            message: format!("expected {n} rows, got {rows}"),
        });
    }
    DistanceMatrix::new(ids, data)
}

pub fn write_distance_matrix_csv<W: Write>(d: &DistanceMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(d.ids().iter().cloned());
    wtr.write_record(&header).map_err(csv_err)?;
    for (i, id) in d.ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend((0..d.n()).map(|j| d.get(i, j).to_string()));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> EmbeddingError {
    EmbeddingError::Format(e.to_string())
}
