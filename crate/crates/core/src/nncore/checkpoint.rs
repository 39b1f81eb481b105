//! Checkpoint persistence.
//!
//! A checkpoint is a pair of files under one stem: `<stem>.manifest`, a
//! JSON description carrying a format version, an opaque architecture
//! object, and per-tensor `(name, shape, dtype, offset)` entries; and
//! `<stem>.blob`, the concatenated tensor values as little-endian `f64`.
//! Offsets are byte positions into the blob. Writes go to temporary
//! names and are renamed into place, so a crash never leaves a torn
//! checkpoint; loads verify the version, the dtype, and that the blob
//! length matches the manifest exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const FORMAT_VERSION: u64 = 1;

fn manifest_path(stem: &Path) -> PathBuf {
    stem.with_extension("manifest")
}

fn blob_path(stem: &Path) -> PathBuf {
    stem.with_extension("blob")
}

/// Saves every tensor in the store. `arch` is stored verbatim in the
/// manifest and checked by loaders that expect a specific architecture.
pub fn save_checkpoint<P: AsRef<Path>>(store: &ParamStore, stem: P, arch: &Value) -> Result<()> {
    let stem = stem.as_ref();
    if let Some(dir) = stem.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut entries = Vec::with_capacity(store.len());
    let mut offset = 0u64;
    for (name, t) in store.iter() {
        entries.push(json!({
            "name": name,
            "shape": [t.rows(), t.cols()],
            "dtype": "f64",
            "offset": offset,
        }));
        offset += (t.len() * 8) as u64;
    }
    let manifest = json!({
        "format_version": FORMAT_VERSION,
        "arch": arch,
        "blob_bytes": offset,
        "entries": entries,
    });

    let tmp_manifest = stem.with_extension("manifest.tmp");
    let tmp_blob = stem.with_extension("blob.tmp");
    fs::write(&tmp_manifest, serde_json::to_string_pretty(&manifest).expect("valid json"))?;
    {
        let mut w = BufWriter::new(fs::File::create(&tmp_blob)?);
        for (_, t) in store.iter() {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    fs::rename(&tmp_blob, blob_path(stem))?;
    fs::rename(&tmp_manifest, manifest_path(stem))?;
    Ok(())
}

/// Loads a checkpoint, returning the store and the manifest's
/// architecture object.
pub fn load_checkpoint<P: AsRef<Path>>(stem: P) -> Result<(ParamStore, Value)> {
    let stem = stem.as_ref();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(manifest_path(stem))?)
        .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    let version = manifest
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Checkpoint("manifest missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version} != supported {FORMAT_VERSION}"
        )));
    }
    let blob = fs::read(blob_path(stem))?;
    let expected = manifest.get("blob_bytes").and_then(Value::as_u64).unwrap_or(0);
    if blob.len() as u64 != expected {
        return Err(Error::Checkpoint(format!(
            "blob is {} bytes, manifest expects {expected}",
            blob.len()
        )));
    }
    let entries = manifest
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Checkpoint("manifest missing entries".into()))?;
    let mut store = ParamStore::new();
    for e in entries {
        let name = e
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Checkpoint("entry missing name".into()))?;
        let dtype = e.get("dtype").and_then(Value::as_str).unwrap_or("");
        if dtype != "f64" {
            return Err(Error::Checkpoint(format!("`{name}` has unsupported dtype `{dtype}`")));
        }
        let shape = e
            .get("shape")
            .and_then(Value::as_array)
            .filter(|s| s.len() == 2)
            .ok_or_else(|| Error::Checkpoint(format!("`{name}` has a malformed shape")))?;
        let rows = shape[0].as_u64().unwrap_or(0) as usize;
        let cols = shape[1].as_u64().unwrap_or(0) as usize;
        let offset = e
            .get("offset")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Checkpoint(format!("`{name}` missing offset")))? as usize;
        let bytes = rows * cols * 8;
        let end = offset
            .checked_add(bytes)
            .filter(|&e| e <= blob.len())
            .ok_or_else(|| Error::Checkpoint(format!("`{name}` extends past the blob")))?;
        let data: Vec<f64> = blob[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.insert(name, Tensor::from_vec(rows, cols, data)?)?;
    }
    let arch = manifest.get("arch").cloned().unwrap_or(Value::Null);
    Ok((store, arch))
}

/// Loads a checkpoint whose architecture object must equal `expected`.
pub fn load_checkpoint_expecting<P: AsRef<Path>>(
    stem: P,
    expected: &Value,
) -> Result<(ParamStore, Value)> {
    let (store, arch) = load_checkpoint(stem)?;
    if &arch != expected {
        return Err(Error::Checkpoint(format!(
            "architecture mismatch: checkpoint has {arch}, run expects {expected}"
        )));
    }
    Ok((store, arch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn sample_store() -> ParamStore {
        let mut rng = stream(4, Domain::Init, 0);
        let mut store = ParamStore::new();
        store.insert("b", crate::nncore::xavier_init(1, 5, &mut rng)).unwrap();
        store.insert("a", crate::nncore::xavier_init(3, 4, &mut rng)).unwrap();
        store.insert("scalar", Tensor::scalar(42.0)).unwrap();
        store
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&store, &stem, &json!({"d_model": 128})).unwrap();
        let (back, arch) = load_checkpoint(&stem).unwrap();
        assert_eq!(arch, json!({"d_model": 128}));
        assert_eq!(store.len(), back.len());
        for (name, t) in store.iter() {
            let b = back.get(name).unwrap();
            assert_eq!(t.shape(), b.shape());
            let bits_equal = t
                .data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(bits_equal, "`{name}` not bit-identical");
        }
    }

    #[test]
    fn truncated_blob_fails_without_partial_store() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&store, &stem, &Value::Null).unwrap();
        let blob = stem.with_extension("blob");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&stem), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&store, &stem, &json!({"d_model": 128})).unwrap();
        let err = load_checkpoint_expecting(&stem, &json!({"d_model": 64}));
        assert!(matches!(err, Err(Error::Checkpoint(_))));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("ckpt");
        save_checkpoint(&store, &stem, &Value::Null).unwrap();
        let manifest = stem.with_extension("manifest");
        let text = fs::read_to_string(&manifest)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 9");
        fs::write(&manifest, text).unwrap();
        assert!(matches!(load_checkpoint(&stem), Err(Error::Checkpoint(_))));
    }
}
