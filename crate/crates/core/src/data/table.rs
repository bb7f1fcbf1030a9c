use std::path::Path;

use super::DataError;

/// A delimited text table: column names plus rows tagged with their
/// 1-based line numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn column(&self, name: &str, path: &Path) -> Result<usize, DataError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    }
}

fn unescape(delimiter: &str) -> String {
    match delimiter {
        "\\t" | "tab" => "\t".to_string(),
        other => other.to_string(),
    }
}

/// Reads a delimited file. With `columns` set the file has no header and
/// every line is data; otherwise the first record names the columns.
/// Single-byte delimiters honour CSV quoting; longer ones (ML-1M's `::`)
/// split verbatim.
pub fn read_table(path: &Path, delimiter: &str, columns: Option<&[String]>) -> Result<Table, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    // ML-1M ships Latin-1 titles; lossy decoding keeps ids and numbers intact.
    let text = String::from_utf8_lossy(&bytes);
    let delimiter = unescape(delimiter);
    let records = if delimiter.len() == 1 {
        split_csv(&text, delimiter.as_bytes()[0], path)?
    } else if delimiter.is_empty() {
        return Err(DataError::Config("empty delimiter".into()));
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split(delimiter.as_str()).map(str::to_string).collect()))
            .collect()
    };
    let mut records = records.into_iter();
    let columns: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => match records.next() {
            Some((_, header)) => header.into_iter().map(|h| h.trim().trim_start_matches('\u{feff}').to_string()).collect(),
            None => {
                return Err(DataError::Row {
                    path: path.display().to_string(),
                    line: 1,
                    message: "file is empty, expected a header".into(),
                })
            }
        },
    };
    let mut rows = Vec::new();
    for (line, fields) in records {
        if fields.len() != columns.len() {
            return Err(DataError::Row {
                path: path.display().to_string(),
                line,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        rows.push((line, fields));
    }
    Ok(Table { columns, rows })
}

fn split_csv(text: &str, delimiter: u8, path: &Path) -> Result<Vec<(usize, Vec<String>)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Row {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        out.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn double_colon_headerless() {
        let f = file("1::Toy Story (1995)::Animation|Comedy\n2::Jumanji (1995)::Adventure\n");
        let cols: Vec<String> = ["item_id", "title", "genre"].map(String::from).to_vec();
        let t = read_table(f.path(), "::", Some(&cols)).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].0, 2);
        assert_eq!(t.rows[0].1[2], "Animation|Comedy");
    }

    #[test]
    fn quoted_csv_with_header() {
        let f = file("video_id,tag\n7,\"a,b\"\n");
        let t = read_table(f.path(), ",", None).unwrap();
        assert_eq!(t.columns, ["video_id", "tag"]);
        assert_eq!(t.rows[0].1[1], "a,b");
        assert_eq!(t.rows[0].0, 2);
    }

    #[test]
    fn ragged_row_reports_line() {
        let f = file("a\tb\n1\t2\n3\n");
        let err = read_table(f.path(), "\\t", None).unwrap_err();
        assert!(matches!(err, DataError::Row { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn missing_column_is_named() {
        let f = file("a,b\n1,2\n");
        let t = read_table(f.path(), ",", None).unwrap();
        let err = t.column("timestamp", f.path()).unwrap_err();
        assert!(err.to_string().contains("timestamp"));
    }
}
