//! Files written under one output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spbp::apps::denoise::GrayImage;
use spbp::diagnostics::ChainTrace;
use spbp::io::{fmt_f64, write_pgm, write_row};

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        debug_assert!(!name.contains(['/', '\\']));
        self.root.join(name)
    }

    pub fn csv(&self, name: &str, header: &[&str]) -> Result<Csv> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut csv = Csv { out: BufWriter::new(file), path };
        csv.row(header)?;
        Ok(csv)
    }

    pub fn pgm(&self, name: &str, image: &GrayImage) -> Result<()> {
        let path = self.path(name);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_pgm(image, &mut out)?;
        out.flush()?;
        Ok(())
    }
}

pub struct Csv {
    out: BufWriter<File>,
    path: PathBuf,
}

impl Csv {
    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<()> {
        write_row(&mut self.out, cells).with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))
    }
}

pub const TRACE_HEADER: [&str; 8] = ["sampler", "instance", "iteration", "node", "particle", "step", "coord", "value"];

/// One row per recorded value of each chain.
pub fn write_traces(csv: &mut Csv, sampler: &str, instance: usize, traces: &[ChainTrace]) -> Result<()> {
    for t in traces {
        for (step, label) in t.samples.chunks_exact(t.dims).enumerate() {
            for (coord, v) in label.iter().enumerate() {
                csv.row(&[
                    sampler.to_string(),
                    instance.to_string(),
                    t.iteration.to_string(),
                    t.node.to_string(),
                    t.particle.to_string(),
                    step.to_string(),
                    coord.to_string(),
                    fmt_f64(*v),
                ])?;
            }
        }
    }
    Ok(())
}
