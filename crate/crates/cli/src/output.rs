//! The output directory of one run and its manifest.

use std::path::{Path, PathBuf};

use anodiff::ensemble::PathMatrix;
use anodiff::io::{write_paths_bin, write_paths_csv, OutputHeader};
use anodiff::manifest::RunManifest;
use anyhow::{bail, Context, Result};

use crate::Format;

pub struct OutputDir {
    root: PathBuf,
    manifest: RunManifest,
    pub header: OutputHeader,
}

impl OutputDir {
    pub fn create(root: &Path, argv: Vec<String>, header: OutputHeader, serial: bool) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        let manifest = RunManifest::start(argv, header.config_hash.clone(), header.seed, serial);
        Ok(Self { root: root.to_path_buf(), manifest, header })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of a new output file; plain file names only, so nothing escapes the directory.
    pub fn file(&mut self, name: &str) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name == ".." || name == "." {
            bail!("refusing output name {name:?}");
        }
        self.manifest.record(name);
        Ok(self.root.join(name))
    }

    pub fn write_paths(&mut self, stem: &str, format: Format, grid: &[f64], paths: &PathMatrix, notes: &[(String, String)]) -> Result<()> {
        let header = self.header.clone().with(notes.iter().cloned());
        match format {
            Format::Csv => {
                let path = self.file(&format!("{stem}.csv"))?;
                write_paths_csv(&path, grid, paths, &header)?;
            }
            Format::Bin => {
                let path = self.file(&format!("{stem}.bin"))?;
                write_paths_bin(&path, grid, paths, &header)?;
            }
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.file(name)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let root = self.root.clone();
        let manifest = self.manifest.finish(&root)?;
        log::info!("wrote {} file(s) and the manifest to {}", manifest.outputs.len(), root.display());
        Ok(())
    }
}
