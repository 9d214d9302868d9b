//! Loading source documents for summarization tasks. Documents are
//! pre-extracted UTF-8 text; the only normalization applied is line-ending
//! unification. Binary files can still travel to providers as opaque
//! attachments via [`load_opaque`].

use std::path::{Path, PathBuf};

use lenfid_core::wordcount;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("document not found: {0}")]
    NotFound(PathBuf),
    #[error("document is not valid UTF-8: {0}")]
    InvalidEncoding(PathBuf),
    #[error("document is empty: {0}")]
    EmptyDocument(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDocument {
    pub path: PathBuf,
    pub text: String,
    pub char_count: usize,
    pub word_count: usize,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IngestError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::NotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

/// Load a UTF-8 document, normalize line endings, and compute counts.
pub fn load_document(path: impl AsRef<Path>) -> Result<SourceDocument, IngestError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let raw =
        String::from_utf8(bytes).map_err(|_| IngestError::InvalidEncoding(path.to_path_buf()))?;
    let text = raw.replace("\r\n", "\n").replace('\r', "\n");
    if text.trim().is_empty() {
        return Err(IngestError::EmptyDocument(path.to_path_buf()));
    }
    Ok(SourceDocument {
        path: path.to_path_buf(),
        char_count: text.chars().count(),
        word_count: wordcount::count_words(&text),
        text,
    })
}

/// Load a file verbatim for opaque passthrough (attachment_mode=file-part).
pub fn load_opaque(path: impl AsRef<Path>) -> Result<(String, Vec<u8>), IngestError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.is_empty() {
        return Err(IngestError::EmptyDocument(path.to_path_buf()));
    }
    let filename = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".to_string());
    Ok((filename, bytes))
}
