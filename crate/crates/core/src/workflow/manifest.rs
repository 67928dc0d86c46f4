use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::types::DatasetManifest;

/// Reads and validates a dataset manifest from a JSON file.
pub fn load_dataset_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_manifest(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_owned(),
            message,
        },
        other => other,
    })
}

pub fn parse_dataset_manifest(text: &str) -> Result<DatasetManifest> {
    let mut manifest: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<manifest>".into(),
        message: e.to_string(),
    })?;
    validate_manifest(&mut manifest)?;
    Ok(manifest)
}

/// Checks every manifest invariant and sorts each subject's slices by index.
pub fn validate_manifest(manifest: &mut DatasetManifest) -> Result<()> {
    let mut seen = HashSet::new();
    for (si, subject) in manifest.subjects.iter_mut().enumerate() {
        if subject.id.is_empty() || subject.id.chars().any(char::is_whitespace) {
            return Err(Error::schema(
                format!("subjects[{si}].id"),
                "must be nonempty without whitespace",
            ));
        }
        if !seen.insert(subject.id.clone()) {
            return Err(Error::DuplicateSubject(subject.id.clone()));
        }
        if subject.slices.is_empty() {
            return Err(Error::schema(
                format!("subjects[{si}].slices"),
                "subject needs at least one slice",
            ));
        }
        for (k, slice) in subject.slices.iter().enumerate() {
            if !(slice.data_mb.is_finite() && slice.data_mb >= 0.0) {
                return Err(Error::schema(
                    format!("subjects[{si}].slices[{k}].data_mb"),
                    "must be a finite value >= 0",
                ));
            }
        }
        subject.slices.sort_by_key(|s| s.index);
        let contiguous = subject.slices.iter().enumerate().all(|(i, s)| s.index == i);
        if !contiguous {
            return Err(Error::NonContiguousSlices {
                subject: subject.id.clone(),
            });
        }
    }
    Ok(())
}
