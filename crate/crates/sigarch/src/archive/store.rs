//! Archive persistence: a single versioned JSON document.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which is enough to reproduce every f64 bit for bit on load.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ArchiveError, BuildConfig, SignatureArchive, SignatureMeta};
use crate::data::NormalizationParams;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SignatureRecord {
    label: String,
    meta: SignatureMeta,
    /// One archive column, stored column-major (feature order).
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveFile {
    format_version: u32,
    n: usize,
    k: usize,
    class_set: Vec<String>,
    created_by: String,
    build_config: Option<BuildConfig>,
    normalization: Option<NormalizationParams>,
    signatures: Vec<SignatureRecord>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// JSON formatter that renders every float with 17 significant digits.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn save_archive(archive: &SignatureArchive, path: &Path) -> Result<(), ArchiveError> {
    let signatures = (0..archive.signature_count())
        .map(|j| SignatureRecord {
            label: archive.signature_labels()[j].clone(),
            meta: archive.signature_meta()[j].clone(),
            values: archive.matrix().column(j).to_vec(),
        })
        .collect();
    let file = ArchiveFile {
        format_version: FORMAT_VERSION,
        n: archive.feature_count(),
        k: archive.signature_count(),
        class_set: archive.class_set().to_vec(),
        created_by: format!("sigarch {}", env!("CARGO_PKG_VERSION")),
        build_config: archive.build_config().cloned(),
        normalization: archive.normalization().cloned(),
        signatures,
    };

    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloatFormatter);
    file.serialize(&mut ser)
        .map_err(|e| ArchiveError::Format(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_archive(path: &Path) -> Result<SignatureArchive, ArchiveError> {
    let text = fs::read_to_string(path)?;

    let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| {
        ArchiveError::Format(format!("not a readable archive file ({e})"))
    })?;
    if probe.format_version != FORMAT_VERSION {
        return Err(ArchiveError::Format(format!(
            "unsupported format version {} (this build reads version {FORMAT_VERSION})",
            probe.format_version
        )));
    }

    let file: ArchiveFile = serde_json::from_str(&text)
        .map_err(|e| ArchiveError::Format(format!("malformed archive: {e}")))?;
    if file.signatures.len() != file.k {
        return Err(ArchiveError::Format(format!(
            "header promises {} signatures, file holds {}",
            file.k,
            file.signatures.len()
        )));
    }
    let mut m_matrix = Array2::<f64>::zeros((file.n, file.k));
    let mut labels = Vec::with_capacity(file.k);
    let mut meta = Vec::with_capacity(file.k);
    for (j, record) in file.signatures.into_iter().enumerate() {
        if record.values.len() != file.n {
            return Err(ArchiveError::Format(format!(
                "signature {j} has {} values, expected {}",
                record.values.len(),
                file.n
            )));
        }
        for (i, v) in record.values.into_iter().enumerate() {
            m_matrix[(i, j)] = v;
        }
        labels.push(record.label);
        meta.push(record.meta);
    }
    SignatureArchive::new(
        m_matrix,
        labels,
        meta,
        file.class_set,
        file.normalization,
        file.build_config,
    )
}
