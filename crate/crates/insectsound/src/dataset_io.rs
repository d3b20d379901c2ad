//! Feature matrix as CSV: feature columns, then `label` and `clip_id`.

use std::path::Path;

use insectsound_core::features::Dataset;

use crate::error::{csv_err, format, io, Result};

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.extend(["label", "clip_id"]);
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..data.n_rows() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(data.labels()[i].clone());
        rec.push(data.clip_ids()[i].clone());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let n = header.len();
    if n < 3 || header[n - 2] != "label" || header[n - 1] != "clip_id" {
        return Err(format(path, "header must end with label,clip_id after at least one feature"));
    }
    let (mut values, mut labels, mut clip_ids) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        for field in rec.iter().take(n - 2) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| format(path, format!("row {}: {field:?}: {e}", line + 1)))?,
            );
        }
        labels.push(rec[n - 2].to_string());
        clip_ids.push(rec[n - 1].to_string());
    }
    Ok(Dataset::new(header[..n - 2].to_vec(), values, labels, clip_ids)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = Dataset::new(
            vec!["mfcc0".into(), "mfcc1".into()],
            vec![0.1, -1e-300, 1.0 / 3.0, 12345.678],
            vec!["C1".into(), "C4".into()],
            vec!["a, b".into(), "c".into()],
        )
        .unwrap();
        write_dataset_csv(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("mfcc0,mfcc1,label,clip_id\n"));
        assert_eq!(read_dataset_csv(&path).unwrap(), data);
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_dataset_csv(&path).is_err());
    }
}
