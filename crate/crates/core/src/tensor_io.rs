//! Weight-matrix storage: NPY v1.0 arrays plus a JSON manifest.
//!
//! Only 2-D, C-order, little-endian `<f4`/`<f8` arrays are accepted.
//! Single-precision data is widened to `f64` on load.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const HEADER_ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    #[default]
    Dense,
    Other,
}

/// A named, row-major real matrix. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    layer_kind: LayerKind,
}

impl WeightMatrix {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if rows < 2 || cols < 2 {
            return Err(Error::Shape(format!(
                "matrix `{name}` is {rows}x{cols}; both dimensions must be at least 2"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix `{name}` has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!(
                "matrix `{name}` has a non-finite entry at flat index {pos}"
            )));
        }
        Ok(Self {
            name,
            rows,
            cols,
            data,
            layer_kind: LayerKind::Dense,
        })
    }

    /// Builds a matrix from a row-major closure.
    pub fn from_fn(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(name, rows, cols, data)
    }

    pub fn with_layer_kind(mut self, kind: LayerKind) -> Self {
        self.layer_kind = kind;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn layer_kind(&self) -> LayerKind {
        self.layer_kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Larger over smaller dimension.
    pub fn aspect_ratio(&self) -> f64 {
        let (n, m) = self.oriented_dims();
        n as f64 / m as f64
    }

    /// `(N, M)` with `N >= M`.
    pub fn oriented_dims(&self) -> (usize, usize) {
        (self.rows.max(self.cols), self.rows.min(self.cols))
    }

    pub fn transpose(&self) -> WeightMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        WeightMatrix {
            name: self.name.clone(),
            rows: self.cols,
            cols: self.rows,
            data,
            layer_kind: self.layer_kind,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<WeightMatrix> {
        let data = self.data.iter().map(|x| c * x).collect();
        WeightMatrix::new(self.name.clone(), self.rows, self.cols, data)
            .map(|m| m.with_layer_kind(self.layer_kind))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

#[derive(Debug)]
struct NpyHeader {
    dtype: Dtype,
    shape: Vec<usize>,
}

/// Reads the header of an NPY file and returns its shape without decoding the payload.
pub fn read_array_shape(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, _) = parse_header(&bytes)?;
    Ok(header.shape)
}

/// Loads a 2-D NPY array. The matrix name defaults to the file stem.
pub fn load_array(path: impl AsRef<Path>) -> Result<WeightMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "array".to_owned());
    decode_array(&bytes, name)
}

/// Decodes an in-memory NPY buffer.
pub fn decode_array(bytes: &[u8], name: String) -> Result<WeightMatrix> {
    let (header, offset) = parse_header(bytes)?;
    if header.shape.len() != 2 {
        return Err(Error::Shape(format!(
            "expected a 2-D array, found shape {:?}",
            header.shape
        )));
    }
    let (rows, cols) = (header.shape[0], header.shape[1]);
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let payload = &bytes[offset..];
    let expected = count * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {expected} for shape ({rows}, {cols})",
            payload.len()
        )));
    }
    let data: Vec<f64> = match header.dtype {
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    WeightMatrix::new(name, rows, cols, data)
}

/// Writes `matrix` as NPY v1.0, `<f8`, C-order.
pub fn save_array(matrix: &WeightMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // Matrices built through the public constructors are already finite;
    // re-check so a file is never half-written for bad data.
    if matrix.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data(format!(
            "matrix `{}` contains non-finite entries",
            matrix.name
        )));
    }
    let bytes = encode_array(matrix.rows, matrix.cols, &matrix.data);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Encodes a row-major `f64` buffer as an NPY v1.0 byte stream.
pub fn encode_array(rows: usize, cols: usize, data: &[f64]) -> Vec<u8> {
    let mut dict =
        format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let pad = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE_LEN + dict.len() + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8]) -> Result<(NpyHeader, usize)> {
    if bytes.len() < PREAMBLE_LEN || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic string".into()));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::Format(format!(
            "unsupported NPY version {}.{} (only 1.0)",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let end = PREAMBLE_LEN + header_len;
    if bytes.len() < end {
        return Err(Error::Format("truncated NPY header".into()));
    }
    let text = std::str::from_utf8(&bytes[PREAMBLE_LEN..end])
        .map_err(|_| Error::Format("NPY header is not ASCII".into()))?;
    let dict = parse_dict(text)?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in dict {
        match (key.as_str(), value) {
            ("descr", PyValue::Str(s)) => descr = Some(s),
            ("fortran_order", PyValue::Bool(b)) => fortran = Some(b),
            ("shape", PyValue::Tuple(t)) => shape = Some(t),
            (k, v) => {
                return Err(Error::Format(format!(
                    "unexpected header entry {k:?}: {v:?}"
                )))
            }
        }
    }
    let descr = descr.ok_or_else(|| Error::Format("header lacks 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| Error::Format("header lacks 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("header lacks 'shape'".into()))?;
    let dtype = match descr.as_str() {
        "<f8" => Dtype::F8,
        "<f4" => Dtype::F4,
        other => {
            return Err(Error::Format(format!(
                "unsupported dtype {other:?} (expected '<f4' or '<f8')"
            )))
        }
    };
    if fortran {
        return Err(Error::Format(
            "Fortran-order arrays are not supported; re-save in C order".into(),
        ));
    }
    Ok((NpyHeader { dtype, shape }, end))
}

#[derive(Debug, Clone, PartialEq)]
enum PyValue {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parses the restricted Python dict literal used in NPY headers.
fn parse_dict(text: &str) -> Result<Vec<(String, PyValue)>> {
    let mut p = Cursor {
        chars: text.trim_end().chars().collect(),
        pos: 0,
    };
    p.expect('{')?;
    let mut entries = Vec::new();
    loop {
        p.skip_ws();
        if p.eat('}') {
            break;
        }
        let key = p.string()?;
        p.skip_ws();
        p.expect(':')?;
        p.skip_ws();
        let value = p.value()?;
        entries.push((key, value));
        p.skip_ws();
        if p.eat(',') {
            continue;
        }
        p.skip_ws();
        p.expect('}')?;
        break;
    }
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(Error::Format(
            "trailing characters after header dict".into(),
        ));
    }
    Ok(entries)
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "malformed NPY header: expected {c:?} at offset {}",
                self.pos
            )))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => {
                return Err(Error::Format(
                    "malformed NPY header: expected string".into(),
                ))
            }
        };
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == quote {
                let s: String = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                return Ok(s);
            }
            self.pos += 1;
        }
        Err(Error::Format(
            "malformed NPY header: unterminated string".into(),
        ))
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn value(&mut self) -> Result<PyValue> {
        match self.peek() {
            Some('\'' | '"') => Ok(PyValue::Str(self.string()?)),
            Some('(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    self.skip_ws();
                    if self.eat(')') {
                        break;
                    }
                    let w = self.word();
                    let n = w.trim_end_matches('L').parse::<usize>().map_err(|_| {
                        Error::Format(format!("malformed NPY header: bad dimension {w:?}"))
                    })?;
                    dims.push(n);
                    self.skip_ws();
                    if !self.eat(',') {
                        self.skip_ws();
                        self.expect(')')?;
                        break;
                    }
                }
                Ok(PyValue::Tuple(dims))
            }
            _ => match self.word().as_str() {
                "True" => Ok(PyValue::Bool(true)),
                "False" => Ok(PyValue::Bool(false)),
                w => Err(Error::Format(format!(
                    "malformed NPY header: unexpected {w:?}"
                ))),
            },
        }
    }
}

/// `manifest.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub layers: Vec<ManifestLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub file: String,
    pub shape: [usize; 2],
    #[serde(default)]
    pub layer_kind: LayerKind,
}

impl Manifest {
    /// Parses a manifest and checks name uniqueness. Files are not touched.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let mut seen = HashSet::new();
        for layer in &manifest.layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate layer name `{}`",
                    layer.name
                )));
            }
        }
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl ManifestLayer {
    /// Resolves the layer file relative to the manifest directory.
    pub fn resolve(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Loads this layer and checks the file shape against the manifest.
    pub fn load(&self, base: &Path) -> Result<WeightMatrix> {
        let path = self.resolve(base);
        if !path.exists() {
            return Err(Error::Manifest(format!(
                "layer `{}` references missing file {}",
                self.name,
                path.display()
            )));
        }
        let m = load_array(&path)?;
        if [m.rows(), m.cols()] != self.shape {
            return Err(Error::Shape(format!(
                "layer `{}`: manifest shape {:?} but file header ({}, {})",
                self.name,
                self.shape,
                m.rows(),
                m.cols()
            )));
        }
        Ok(m.with_name(self.name.clone())
            .with_layer_kind(self.layer_kind))
    }
}

/// Directory against which relative manifest paths resolve.
pub fn manifest_base(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Loads every layer of a manifest, in manifest order. Fails on the first bad layer.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<WeightMatrix>> {
    let path = path.as_ref();
    let manifest = Manifest::read(path)?;
    let base = manifest_base(path);
    manifest.layers.iter().map(|l| l.load(&base)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, name: &str, header: &str, payload: &[u8]) -> PathBuf {
        let mut dict = header.to_owned();
        let unpadded = PREAMBLE_LEN + dict.len() + 1;
        dict.extend(std::iter::repeat_n(' ', (64 - unpadded % 64) % 64));
        dict.push('\n');
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend_from_slice(payload);
        let path = dir.join(name);
        fs::write(&path, bytes).unwrap();
        path
    }

    fn f8_payload(xs: &[f64]) -> Vec<u8> {
        xs.iter().flat_map(|x| x.to_le_bytes()).collect()
    }

    #[test]
    fn hand_written_two_by_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "small.npy",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &f8_payload(&[1.0, 2.0, 3.0, 4.0]),
        );
        let m = load_array(&path).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.name(), "small");
    }

    #[test]
    fn float32_is_widened() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = [0.5f32, -1.25, 3.0, 7.75]
            .iter()
            .flat_map(|x| x.to_le_bytes())
            .collect();
        let path = write_raw(
            dir.path(),
            "f4.npy",
            "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2)}",
            &payload,
        );
        let m = load_array(&path).unwrap();
        assert_eq!(m.data(), &[0.5, -1.25, 3.0, 7.75]);
    }

    #[test]
    fn one_dimensional_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "vec.npy",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (5,), }",
            &f8_payload(&[1.0; 5]),
        );
        assert!(matches!(load_array(&path), Err(Error::Shape(_))));
    }

    #[test]
    fn fortran_order_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "f.npy",
            "{'descr': '<f8', 'fortran_order': True, 'shape': (2, 2), }",
            &f8_payload(&[1.0; 4]),
        );
        assert!(matches!(load_array(&path), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_and_dtype() {
        assert!(matches!(
            decode_array(b"not an npy file at all", "x".into()),
            Err(Error::Format(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "i.npy",
            "{'descr': '<i8', 'fortran_order': False, 'shape': (2, 2), }",
            &[0u8; 32],
        );
        assert!(matches!(load_array(&path), Err(Error::Format(_))));
        let path = write_raw(
            dir.path(),
            "be.npy",
            "{'descr': '>f8', 'fortran_order': False, 'shape': (2, 2), }",
            &[0u8; 32],
        );
        assert!(matches!(load_array(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "t.npy",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }",
            &f8_payload(&[1.0; 4]),
        );
        assert!(matches!(load_array(&path), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            "nan.npy",
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &f8_payload(&[1.0, f64::NAN, 0.0, 1.0]),
        );
        assert!(matches!(load_array(&path), Err(Error::Data(_))));
        assert!(matches!(
            WeightMatrix::new("inf", 2, 2, vec![1.0, f64::INFINITY, 0.0, 1.0]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn identity_payload_is_72_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let eye =
            WeightMatrix::from_fn("eye", 3, 3, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        let path = dir.path().join("eye.npy");
        save_array(&eye, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((PREAMBLE_LEN + header_len) % HEADER_ALIGN, 0);
        assert_eq!(bytes.len() - PREAMBLE_LEN - header_len, 72);
        assert_eq!(load_array(&path).unwrap().data(), eye.data());
    }

    #[test]
    fn too_small_matrix_rejected() {
        assert!(matches!(
            WeightMatrix::new("row", 1, 4, vec![0.0; 4]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn manifest_shape_mismatch_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let m = WeightMatrix::from_fn("a", 20, 10, |i, j| (i + j) as f64).unwrap();
        save_array(&m, dir.path().join("a.npy")).unwrap();

        let bad_shape = r#"{"version":"1","layers":[{"name":"a","file":"a.npy","shape":[10,20],"layer_kind":"dense"}]}"#;
        let mpath = dir.path().join("manifest.json");
        fs::write(&mpath, bad_shape).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Shape(_))));

        let dup = r#"{"version":"1","layers":[
            {"name":"a","file":"a.npy","shape":[20,10],"layer_kind":"dense"},
            {"name":"a","file":"a.npy","shape":[20,10],"layer_kind":"other"}]}"#;
        fs::write(&mpath, dup).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Manifest(_))));

        let missing = r#"{"version":"1","layers":[{"name":"b","file":"b.npy","shape":[20,10],"layer_kind":"dense"}]}"#;
        fs::write(&mpath, missing).unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Manifest(_))));

        fs::write(&mpath, r#"{"version":"1","layers":[]}"#).unwrap();
        assert!(load_manifest(&mpath).unwrap().is_empty());
    }
}
