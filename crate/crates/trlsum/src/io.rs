//! Reading and writing the on-disk formats, with errors that name the file.

use std::fs;
use std::path::{Path, PathBuf};

use trlsum_core::checkpoint::Checkpoint;
use trlsum_core::corpus::{parse_corpus, serialize_corpus, Dataset, Role};
use trlsum_core::train::TrainConfig;
use trlsum_core::vocab::Vocab;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        source: trlsum_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn data_err(path: &Path) -> impl FnOnce(trlsum_core::Error) -> IoError + '_ {
    move |source| IoError::Data {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Dataset named after the file stem.
pub fn read_corpus(path: &Path, role: Role) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&read_text(path)?, &name, role).map_err(data_err(path))
}

pub fn write_corpus(path: &Path, ds: &Dataset) -> Result<()> {
    write(path, serialize_corpus(ds))
}

pub fn read_vocab(path: &Path) -> Result<Vocab> {
    Vocab::parse(&read_text(path)?).map_err(data_err(path))
}

pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    write(path, vocab.serialize())
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    TrainConfig::parse(&read_text(path)?).map_err(data_err(path))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&read_bytes(path)?).map_err(data_err(path))
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write(path, ck.to_bytes())
}
