//! Dataset manifests: CSV with a `video` column and optional `action`,
//! `scenario`, `labels` and `fold` columns. Relative paths resolve against
//! the manifest's directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub video: PathBuf,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub fold: Option<usize>,
}

pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let mut row = row.map_err(|e| CliError::data(format!("manifest {} row {}: {e}", path.display(), i + 1)))?;
        row.video = base.join(&row.video);
        row.labels = row.labels.map(|l| base.join(l));
        row.action = row.action.filter(|a| !a.is_empty());
        row.scenario = row.scenario.filter(|s| !s.is_empty());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("manifest {} lists no videos", path.display())));
    }
    Ok(rows)
}

/// Writes rows as given, with paths relative to wherever the caller chose.
pub fn write_manifest<W: Write>(rows: &[ManifestRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn optional_columns_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "video,action,scenario,labels,fold\na,walk,,,1\nb,run,indoor,b.csv,\n",
        )
        .unwrap();
        let rows = read_manifest(&path).unwrap();
        assert_eq!(rows[0].video, dir.path().join("a"));
        assert_eq!(rows[0].scenario, None);
        assert_eq!(rows[0].fold, Some(1));
        assert_eq!(rows[1].labels, Some(dir.path().join("b.csv")));
        assert_eq!(rows[1].scenario.as_deref(), Some("indoor"));

        fs::write(&path, "video\nclip\n").unwrap();
        assert_eq!(read_manifest(&path).unwrap()[0].action, None);
    }

    #[test]
    fn empty_or_missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        assert!(read_manifest(&path).is_err());
        fs::write(&path, "video,action\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn written_manifest_reads_back() {
        let rows = vec![ManifestRow {
            video: "v".into(),
            action: Some("a".into()),
            scenario: None,
            labels: Some("v.csv".into()),
            fold: Some(2),
        }];
        let mut out = Vec::new();
        write_manifest(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "video,action,scenario,labels,fold\nv,a,,v.csv,2\n");
    }
}
