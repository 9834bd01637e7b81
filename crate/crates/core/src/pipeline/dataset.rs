//! Dataset directories described by a `manifest.csv`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imagecore::{load_delineation, load_image, load_labelmap, Delineation, Image, LabelMap, MetaOverride};
use crate::phantom::MANIFEST_HEADER;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub id: usize,
    pub image: PathBuf,
    pub gs: PathBuf,
    pub labels: Option<PathBuf>,
    /// Phantom carries false tissue bands and a reverberation ghost.
    pub adversarial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dir: PathBuf,
    pub entries: Vec<Entry>,
}

/// One loaded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub image: Image,
    pub labels: Option<LabelMap>,
    pub gs: Delineation,
    pub adversarial: bool,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join("manifest.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        let cols: Vec<&str> = header.split(',').collect();
        let expected: Vec<&str> = MANIFEST_HEADER.split(',').collect();
        if cols.len() < 3 || cols[..3] != expected[..3] {
            return Err(Error::format("manifest", format!("unexpected header '{header}'")));
        }
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let (labels_col, adv_col) = (find("labels"), find("adversarial"));
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let err = || Error::format("manifest", format!("line {}: '{line}'", n + 2));
            if f.len() != cols.len() {
                return Err(err());
            }
            entries.push(Entry {
                id: f[0].parse().map_err(|_| err())?,
                image: dir.join(f[1]),
                gs: dir.join(f[2]),
                labels: labels_col.filter(|&i| !f[i].is_empty()).map(|i| dir.join(f[i])),
                adversarial: adv_col.is_some_and(|i| f[i] == "1"),
            });
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!("dataset {} is empty", dir.display())));
        }
        Ok(Dataset { dir: dir.to_path_buf(), entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample(&self, i: usize) -> Result<Sample> {
        let e = &self.entries[i];
        let image = load_image(&e.image, &MetaOverride::default())?;
        let labels = match &e.labels {
            Some(p) => Some(load_labelmap(p, None)?),
            None => None,
        };
        let gs = load_delineation(&e.gs, image.spacing_mm())?;
        gs.validate(image.width(), image.height())?;
        Ok(Sample { id: e.id, image, labels, gs, adversarial: e.adversarial })
    }

    pub fn samples(&self) -> Result<Vec<Sample>> {
        (0..self.len()).map(|i| self.sample(i)).collect()
    }
}
