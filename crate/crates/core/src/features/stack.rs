use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
struct FeatureMap {
    group: String,
    tag: String,
    map: Raster,
}

/// Ordered per-pixel feature maps, each belonging to exactly one named group.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    maps: Vec<FeatureMap>,
}

impl FeatureStack {
    pub fn new(width: usize, height: usize) -> Self {
        FeatureStack {
            width,
            height,
            maps: Vec::new(),
        }
    }

    pub fn push(&mut self, group: &str, tag: &str, map: Raster) -> Result<()> {
        if map.width() != self.width || map.height() != self.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{} for {group}/{tag}", map.width(), map.height()),
            ));
        }
        if let Some(v) = map.data().iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value {v} in {group}/{tag}")));
        }
        self.maps.push(FeatureMap {
            group: group.to_string(),
            tag: tag.to_string(),
            map,
        });
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of features.
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map(&self, i: usize) -> &Raster {
        &self.maps[i].map
    }

    /// `group/tag` identifiers in stack order.
    pub fn names(&self) -> Vec<String> {
        self.maps
            .iter()
            .map(|m| format!("{}/{}", m.group, m.tag))
            .collect()
    }

    pub fn group_of(&self, i: usize) -> &str {
        &self.maps[i].group
    }

    /// Group registry in order of first appearance: name → member feature indices.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, m) in self.maps.iter().enumerate() {
            match out.iter_mut().find(|(g, _)| *g == m.group) {
                Some((_, v)) => v.push(i),
                None => out.push((m.group.clone(), vec![i])),
            }
        }
        out
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups().into_iter().map(|(g, _)| g).collect()
    }

    /// Copy without the named group.
    pub fn without_group(&self, group: &str) -> FeatureStack {
        FeatureStack {
            width: self.width,
            height: self.height,
            maps: self.maps.iter().filter(|m| m.group != group).cloned().collect(),
        }
    }

    /// Copy keeping only the listed groups (in stack order).
    pub fn only_groups(&self, groups: &[String]) -> FeatureStack {
        FeatureStack {
            width: self.width,
            height: self.height,
            maps: self
                .maps
                .iter()
                .filter(|m| groups.contains(&m.group))
                .cloned()
                .collect(),
        }
    }

    /// Feature vector of one pixel.
    pub fn pixel(&self, r: usize, c: usize) -> Vec<f64> {
        self.maps.iter().map(|m| m.map.get(r, c)).collect()
    }

    /// Features of one pixel restricted to the given feature indices.
    pub fn pixel_selected(&self, r: usize, c: usize, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.maps[i].map.get(r, c)).collect()
    }

    /// Indices of the named features; errors if any is missing.
    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        let own = self.names();
        names
            .iter()
            .map(|n| {
                own.iter()
                    .position(|o| o == n)
                    .ok_or_else(|| Error::invalid(format!("feature '{n}' not in stack")))
            })
            .collect()
    }
}

const MAGIC: &str = "BONETRACE-FEATURES 1";

/// Text header (dimensions and `group\ttag` per feature) then little-endian f32 maps.
pub fn save_stack(stack: &FeatureStack, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{MAGIC}").expect("write to Vec");
    writeln!(out, "width {}", stack.width).expect("write to Vec");
    writeln!(out, "height {}", stack.height).expect("write to Vec");
    writeln!(out, "features {}", stack.len()).expect("write to Vec");
    for m in &stack.maps {
        writeln!(out, "{}\t{}", m.group, m.tag).expect("write to Vec");
    }
    writeln!(out, "end").expect("write to Vec");
    for m in &stack.maps {
        for &v in m.map.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_stack(path: &Path) -> Result<FeatureStack> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |d: String| Error::format("feature stack", d);
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<fs::File>| -> Result<String> {
        line.clear();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next_line(&mut reader)? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let mut field = |reader: &mut BufReader<fs::File>, key: &str| -> Result<usize> {
        let l = next_line(reader)?;
        l.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("expected '{key} <n>', got '{l}'")))
    };
    let width = field(&mut reader, "width")?;
    let height = field(&mut reader, "height")?;
    let count = field(&mut reader, "features")?;
    let mut names = Vec::with_capacity(count);
    let mut buf = String::new();
    for _ in 0..count {
        buf.clear();
        reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
        let l = buf.trim_end_matches('\n');
        let (g, t) = l
            .split_once('\t')
            .ok_or_else(|| bad(format!("bad feature line '{l}'")))?;
        names.push((g.to_string(), t.to_string()));
    }
    buf.clear();
    reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
    if buf.trim_end() != "end" {
        return Err(bad("missing end of header".into()));
    }
    let mut stack = FeatureStack::new(width, height);
    let mut bytes = vec![0u8; width * height * 4];
    for (g, t) in names {
        reader
            .read_exact(&mut bytes)
            .map_err(|_| bad(format!("truncated data for {g}/{t}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        stack.push(&g, &t, Raster::new(width, height, data))?;
    }
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_and_removal() {
        let mut s = FeatureStack::new(2, 1);
        s.push("a", "1", Raster::filled(2, 1, 0.0)).unwrap();
        s.push("b", "1", Raster::filled(2, 1, 1.0)).unwrap();
        s.push("a", "2", Raster::filled(2, 1, 2.0)).unwrap();
        assert_eq!(
            s.groups(),
            vec![("a".to_string(), vec![0, 2]), ("b".to_string(), vec![1])]
        );
        assert_eq!(s.without_group("a").len(), 1);
        assert!(s.push("c", "x", Raster::filled(3, 1, 0.0)).is_err());
        assert!(s.push("c", "x", Raster::filled(2, 1, f64::NAN)).is_err());
    }

    #[test]
    fn round_trip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        let mut s = FeatureStack::new(3, 2);
        s.push("patch mean", "3wl", Raster::from_fn(3, 2, |r, c| (r * 3 + c) as f64 * 0.25))
            .unwrap();
        s.push("log-/Shadowing", "log", Raster::filled(3, 2, -1.5)).unwrap();
        save_stack(&s, &p).unwrap();
        assert_eq!(load_stack(&p).unwrap(), s);
    }
}
