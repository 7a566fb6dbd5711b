use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Collects a command's outputs in a sibling staging directory and moves
/// them into the output directory only on [`Staging::commit`]. Dropping an
/// uncommitted stage deletes everything written so far.
pub struct Staging {
    dir: PathBuf,
    out: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        let name = out.file_name().map_or_else(|| "out".into(), |n| n.to_string_lossy().to_string());
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        fs::write(path, contents)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Moves every staged file into place, replacing same-named files.
    pub fn commit(mut self) -> Result<Vec<String>> {
        for rel in &self.files {
            let target = self.out.join(rel);
            if let Some(p) = target.parent() {
                fs::create_dir_all(p)?;
            }
            fs::rename(self.dir.join(rel), target)?;
        }
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        Ok(std::mem::take(&mut self.files))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Left-aligned first column, right-aligned rest.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for row in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (j, cell) in row.iter().enumerate().take(cols) {
            width[j] = width[j].max(cell.chars().count());
        }
    }
    let line = |row: &[String]| {
        let mut s = String::new();
        for (j, cell) in row.iter().enumerate().take(cols) {
            if j == 0 {
                s.push_str(&format!("{cell:<w$}", w = width[0]));
            } else {
                s.push_str(&format!("  {cell:>w$}", w = width[j]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}
