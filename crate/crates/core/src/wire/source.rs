use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::image::Image;
use crate::synth::{derive_seed, render, SweepSpec};

/// A frame that could not be produced; the daemon skips it.
#[derive(Debug, Error)]
#[error("{label}: {source}")]
pub struct FrameError {
    pub label: String,
    #[source]
    pub source: crate::Error,
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Image files of a directory in lexicographic file-name order.
#[derive(Debug)]
pub struct DirectorySource {
    files: VecDeque<PathBuf>,
}

impl DirectorySource {
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                files.push(path);
            }
        }
        files.sort();
        Ok(DirectorySource { files: files.into() })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl Iterator for DirectorySource {
    type Item = Result<Image, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.files.pop_front()?;
        Some(Image::open(&path).map_err(|source| FrameError {
            label: path.display().to_string(),
            source,
        }))
    }
}

/// Rendered scenes cycling through `distances`; frame `i` uses
/// `derive_seed(seed, i)`.
#[derive(Debug, Clone)]
pub struct SynthSource {
    sweep: SweepSpec,
    distances: Vec<f64>,
    seed: u64,
    count: usize,
    next: usize,
}

impl SynthSource {
    pub fn new(sweep: SweepSpec, distances: Vec<f64>, seed: u64, count: usize) -> Self {
        SynthSource {
            sweep,
            distances,
            seed,
            count,
            next: 0,
        }
    }
}

impl Iterator for SynthSource {
    type Item = Result<Image, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count || self.distances.is_empty() {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let d = self.distances[i % self.distances.len()];
        let s = derive_seed(self.seed, i as u64);
        Some(
            render(&self.sweep.scene(d, s), s)
                .map(|(img, _)| img)
                .map_err(|source| FrameError {
                    label: format!("synthetic frame {i}"),
                    source,
                }),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count.saturating_sub(self.next);
        (n, Some(n))
    }
}
