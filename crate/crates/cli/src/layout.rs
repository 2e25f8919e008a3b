//! On-disk layout of subject directories and command outputs.
//!
//! A subject directory holds:
//!
//! ```text
//! <root>/<subject>/peaks.nii.gz
//! <root>/<subject>/masks.nii.gz          + masks.labels.json
//! <root>/<subject>/brain_mask.nii.gz     (optional)
//! <root>/<subject>/tractseg.nii.gz       + tractseg.labels.json (optional)
//! <root>/<subject>/streamlines/<bundle>.txt
//! ```
//!
//! The data root, `<output>/preprocessed` and `<output>/merged` share it.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const PEAKS_FILE: &str = "peaks.nii.gz";
pub const MASKS_FILE: &str = "masks.nii.gz";
pub const BRAIN_FILE: &str = "brain_mask.nii.gz";
pub const TRACTSEG_FILE: &str = "tractseg.nii.gz";
pub const STREAMLINE_DIR: &str = "streamlines";

#[derive(Debug, Clone)]
pub struct SubjectDir {
    pub id: String,
    pub dir: PathBuf,
}

impl SubjectDir {
    pub fn new(root: &Path, id: &str) -> SubjectDir {
        SubjectDir {
            id: id.to_string(),
            dir: root.join(id),
        }
    }

    pub fn peaks(&self) -> PathBuf {
        self.dir.join(PEAKS_FILE)
    }

    pub fn masks(&self) -> PathBuf {
        self.dir.join(MASKS_FILE)
    }

    pub fn brain(&self) -> PathBuf {
        self.dir.join(BRAIN_FILE)
    }

    pub fn tractseg(&self) -> PathBuf {
        self.dir.join(TRACTSEG_FILE)
    }

    pub fn streamlines(&self, bundle: &str) -> PathBuf {
        self.dir.join(STREAMLINE_DIR).join(format!("{bundle}.txt"))
    }
}

/// Sorted subdirectories of `root` that contain `marker`.
pub fn list_subjects(root: &Path, marker: &str) -> Result<Vec<SubjectDir>> {
    if !root.is_dir() {
        return Err(CliError::Usage(format!(
            "directory {} does not exist",
            root.display()
        )));
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| CliError::io(root, e))? {
        let entry = entry.map_err(|e| CliError::io(root, e))?;
        let path = entry.path();
        if path.join(marker).is_file() {
            let id = entry.file_name().to_string_lossy().into_owned();
            out.push(SubjectDir { id, dir: path });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    if out.is_empty() {
        return Err(CliError::Usage(format!(
            "no subject directories with {marker} under {}",
            root.display()
        )));
    }
    Ok(out)
}

/// Paths under the output root.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: &Path) -> OutputLayout {
        OutputLayout {
            root: root.to_path_buf(),
        }
    }

    pub fn preprocessed(&self) -> PathBuf {
        self.root.join("preprocessed")
    }

    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }

    pub fn folds(&self) -> PathBuf {
        self.train().join("folds.json")
    }

    pub fn channels(&self) -> PathBuf {
        self.train().join("channels.json")
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.train().join(format!("fold-{fold}"))
    }

    pub fn checkpoint(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("model.ckpt")
    }

    pub fn train_log(&self, fold: usize) -> PathBuf {
        self.fold_dir(fold).join("train_log.csv")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions")
    }

    pub fn inference(&self) -> PathBuf {
        self.root.join("inference")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn merged(&self) -> PathBuf {
        self.root.join("merged")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn open_file(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_only_marked_directories_in_order() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["sub-02", "sub-01", "notes"] {
            std::fs::create_dir(dir.path().join(id)).unwrap();
        }
        std::fs::write(dir.path().join("sub-02").join(PEAKS_FILE), b"").unwrap();
        std::fs::write(dir.path().join("sub-01").join(PEAKS_FILE), b"").unwrap();
        let ids: Vec<String> = list_subjects(dir.path(), PEAKS_FILE)
            .unwrap()
            .into_iter()
            .map(|s| s.id)
            .collect();
        assert_eq!(ids, ["sub-01", "sub-02"]);
        assert!(list_subjects(&dir.path().join("missing"), PEAKS_FILE).is_err());
        assert!(list_subjects(&dir.path().join("notes"), PEAKS_FILE).is_err());
    }
}
