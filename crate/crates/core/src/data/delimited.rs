use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::Dataset;

/// Reads comma-separated rows of `m` numeric features followed by an integer
/// label. `K` is inferred as the largest label plus one.
pub fn load_delimited(path: &Path, has_header: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_delimited(&text, has_header, path)
}

pub fn parse_delimited(text: &str, has_header: bool, path: &Path) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if has_header && i == 0 {
            continue;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let m = fields.len() - 1;
        match width {
            None if m == 0 => return Err(err(line_no, "rows need at least one feature before the label".into())),
            None => width = Some(m),
            Some(w) if w != m => {
                return Err(err(line_no, format!("expected {} fields, found {}", w + 1, fields.len())))
            }
            _ => {}
        }
        for f in &fields[..m] {
            let v: f32 = f.parse().map_err(|_| err(line_no, format!("non-numeric field {f:?}")))?;
            features.push(v);
        }
        let label_field = fields[m];
        let label: i64 = label_field
            .parse()
            .map_err(|_| err(line_no, format!("label {label_field:?} is not an integer")))?;
        if label < 0 {
            return Err(err(line_no, format!("negative label {label}")));
        }
        if label > u16::MAX as i64 {
            return Err(err(line_no, format!("label {label} exceeds 65535")));
        }
        labels.push(label as usize);
    }
    let m = width.ok_or(Error::Empty("delimited file has no data rows"))?;
    let k = labels.iter().max().map_or(0, |&l| l + 1).max(2);
    Dataset::new(features, labels, m, k)
}
