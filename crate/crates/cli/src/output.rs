use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Files written by one command, recorded in `manifest.json` with their digests.
pub struct Outputs {
    dir: PathBuf,
    hash: String,
    command: String,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: &'a str,
    command: &'a str,
    files: &'a [FileEntry],
}

/// JSON payloads are wrapped so that every report carries the config hash.
#[derive(Serialize)]
pub struct Tagged<'a, T: Serialize> {
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub body: T,
}

impl Outputs {
    pub fn new(dir: &Path, hash: &str, command: &str) -> std::io::Result<Outputs> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), hash: hash.to_string(), command: command.to_string(), files: vec![] })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        let sha256 = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.to_string(), sha256 });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, body: T) -> std::io::Result<PathBuf> {
        let tagged = Tagged { config_hash: &self.hash.clone(), body };
        let mut text = serde_json::to_string_pretty(&tagged).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> std::io::Result<PathBuf> {
        let m = Manifest { config_hash: &self.hash, command: &self.command, files: &self.files };
        let mut text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
