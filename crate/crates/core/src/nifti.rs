//! Minimal single-file NIfTI-1 codec (`.nii` and `.nii.gz`).
//!
//! Only what the pipeline needs: 3-D and 4-D images, the common integer and float
//! datatypes, scaling, and the translation part of the sform/qform. Decoded data is
//! held as `f32` in file (Fortran) order, x fastest.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::{Error, Result};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

/// Decompressed payloads larger than this are rejected.
pub const MAX_DECODED_BYTES: u64 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I8,
    I16,
    U16,
    I32,
    F32,
    F64,
}

impl DataType {
    fn code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::I32 => 8,
            DataType::F32 => 16,
            DataType::F64 => 64,
            DataType::I8 => 256,
            DataType::U16 => 512,
        }
    }

    fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            256 => DataType::I8,
            512 => DataType::U16,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            DataType::U8 | DataType::I8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }
}

/// A decoded image. `dims` always has four entries; 3-D images have `dims[3] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiImage {
    pub dims: [usize; 4],
    pub pixdim: [f64; 3],
    pub origin: [f64; 3],
    pub datatype: DataType,
    pub data: Vec<f32>,
}

impl NiftiImage {
    pub fn n_voxels(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Fields<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Fields<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.bytes[at], self.bytes[at + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn i32(&self, at: usize) -> i32 {
        let b: [u8; 4] = self.bytes[at..at + 4].try_into().unwrap();
        match self.endian {
            Endian::Little => i32::from_le_bytes(b),
            Endian::Big => i32::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_bits(self.i32(at) as u32)
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Nifti(msg.into())
}

/// Decode an image held in memory, transparently gunzipping.
pub fn decode(bytes: &[u8]) -> Result<NiftiImage> {
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .take(MAX_DECODED_BYTES + 1)
            .read_to_end(&mut raw)
            .map_err(|e| bad(format!("gzip stream: {e}")))?;
        if raw.len() as u64 > MAX_DECODED_BYTES {
            return Err(bad("decompressed image exceeds size limit"));
        }
        decode_raw(&raw)
    } else {
        decode_raw(bytes)
    }
}

/// Decode an uncompressed single-file image.
pub fn decode_raw(bytes: &[u8]) -> Result<NiftiImage> {
    if bytes.len() < HEADER_SIZE {
        return Err(bad(format!(
            "{} bytes is shorter than a header",
            bytes.len()
        )));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let endian = if le == HEADER_SIZE as i32 {
        Endian::Little
    } else if be == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(bad(format!("sizeof_hdr is {le}, expected 348")));
    };
    let h = Fields { bytes, endian };

    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => return Err(bad("two-file (.hdr/.img) images are not supported")),
        m => return Err(bad(format!("bad magic {m:?}"))),
    }

    let ndim = h.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(bad(format!("dim[0] = {ndim} out of range")));
    }
    let mut dims = [1usize; 4];
    for i in 1..=ndim as usize {
        let d = h.i16(40 + 2 * i);
        if d < 1 {
            return Err(bad(format!("dim[{i}] = {d} must be positive")));
        }
        if i <= 4 {
            dims[i - 1] = d as usize;
        } else if d != 1 {
            return Err(bad(format!(
                "dim[{i}] = {d}; images above 4-D are not supported"
            )));
        }
    }

    let datatype = DataType::from_code(h.i16(70))
        .ok_or_else(|| bad(format!("unsupported datatype code {}", h.i16(70))))?;

    let mut pixdim = [0f64; 3];
    for (a, p) in pixdim.iter_mut().enumerate() {
        *p = h.f32(80 + 4 * a) as f64;
        if !(p.is_finite() && *p > 0.0) {
            return Err(bad(format!("pixdim[{}] = {p} must be positive", a + 1)));
        }
    }

    let vox_offset = h.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32) {
        return Err(bad(format!("vox_offset {vox_offset} is invalid")));
    }
    let offset = vox_offset as usize;

    let mut slope = h.f32(112) as f64;
    let inter = h.f32(116) as f64;
    if slope == 0.0 || !slope.is_finite() {
        slope = 1.0;
    }
    let inter = if inter.is_finite() { inter } else { 0.0 };

    let (qform, sform) = (h.i16(252), h.i16(254));
    let origin = if sform > 0 {
        [h.f32(292), h.f32(308), h.f32(324)]
    } else if qform > 0 {
        [h.f32(268), h.f32(272), h.f32(276)]
    } else {
        [0.0; 3]
    };
    let origin = origin.map(|o| if o.is_finite() { o as f64 } else { 0.0 });

    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("voxel count overflows"))?;
    let need = n
        .checked_mul(datatype.size())
        .and_then(|b| b.checked_add(offset))
        .ok_or_else(|| bad("data size overflows"))?;
    if bytes.len() < need {
        return Err(bad(format!(
            "file holds {} bytes but header needs {need}",
            bytes.len()
        )));
    }

    let raw = &bytes[offset..need];
    let scale = |v: f64| (v * slope + inter) as f32;
    let data: Vec<f32> = match datatype {
        DataType::U8 => raw.iter().map(|&b| scale(b as f64)).collect(),
        DataType::I8 => raw.iter().map(|&b| scale(b as i8 as f64)).collect(),
        _ => raw
            .chunks_exact(datatype.size())
            .map(|c| {
                let f = Fields { bytes: c, endian };
                let v = match datatype {
                    DataType::I16 => f.i16(0) as f64,
                    DataType::U16 => f.i16(0) as u16 as f64,
                    DataType::I32 => f.i32(0) as f64,
                    DataType::F32 => f.f32(0) as f64,
                    DataType::F64 => {
                        let b: [u8; 8] = c.try_into().unwrap();
                        match endian {
                            Endian::Little => f64::from_le_bytes(b),
                            Endian::Big => f64::from_be_bytes(b),
                        }
                    }
                    DataType::U8 | DataType::I8 => unreachable!(),
                };
                scale(v)
            })
            .collect(),
    };

    Ok(NiftiImage {
        dims,
        pixdim,
        origin,
        datatype,
        data,
    })
}

/// Encode as an uncompressed little-endian single-file image.
///
/// Only `U8` and `F32` are written; `U8` requires every value to be an integer in
/// `0..=255`.
pub fn encode(img: &NiftiImage) -> Result<Vec<u8>> {
    if img.dims.contains(&0) {
        return Err(Error::Invalid(format!(
            "cannot write empty image {:?}",
            img.dims
        )));
    }
    if img.dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Invalid(format!(
            "dimension too large for NIfTI-1: {:?}",
            img.dims
        )));
    }
    if img.data.len() != img.n_voxels() {
        return Err(Error::Invalid(format!(
            "{} values for dims {:?}",
            img.data.len(),
            img.dims
        )));
    }
    let dtype = img.datatype;
    if !matches!(dtype, DataType::U8 | DataType::F32) {
        return Err(Error::Invalid(format!(
            "writing {dtype:?} is not supported"
        )));
    }

    let mut out = vec![0u8; DATA_OFFSET];
    let put_i16 =
        |o: &mut Vec<u8>, at: usize, v: i16| o[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_i32 =
        |o: &mut Vec<u8>, at: usize, v: i32| o[at..at + 4].copy_from_slice(&v.to_le_bytes());
    let put_f32 =
        |o: &mut Vec<u8>, at: usize, v: f32| o[at..at + 4].copy_from_slice(&v.to_le_bytes());

    put_i32(&mut out, 0, HEADER_SIZE as i32);
    out[38] = b'r';
    let ndim = if img.dims[3] > 1 { 4 } else { 3 };
    put_i16(&mut out, 40, ndim);
    for (i, &d) in img.dims.iter().enumerate() {
        put_i16(&mut out, 42 + 2 * i, d as i16);
    }
    for i in 4..7 {
        put_i16(&mut out, 42 + 2 * i, 1);
    }
    put_i16(&mut out, 70, dtype.code());
    put_i16(&mut out, 72, (dtype.size() * 8) as i16);
    put_f32(&mut out, 76, 1.0);
    for a in 0..3 {
        put_f32(&mut out, 80 + 4 * a, img.pixdim[a] as f32);
    }
    put_f32(&mut out, 92, 1.0);
    put_f32(&mut out, 108, DATA_OFFSET as f32);
    put_f32(&mut out, 112, 1.0);
    out[123] = 2; // spatial units: mm
    put_i16(&mut out, 252, 1);
    put_i16(&mut out, 254, 1);
    for a in 0..3 {
        put_f32(&mut out, 268 + 4 * a, img.origin[a] as f32);
    }
    for row in 0..3 {
        let base = 280 + 16 * row;
        put_f32(&mut out, base + 4 * row, img.pixdim[row] as f32);
        put_f32(&mut out, base + 12, img.origin[row] as f32);
    }
    out[344..348].copy_from_slice(b"n+1\0");

    out.reserve(img.data.len() * dtype.size());
    match dtype {
        DataType::U8 => {
            for &v in &img.data {
                if !((0.0..=255.0).contains(&v) && v.fract() == 0.0) {
                    return Err(Error::Invalid(format!("value {v} does not fit uint8")));
                }
                out.push(v as u8);
            }
        }
        _ => {
            for &v in &img.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn is_gz(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn read_file(path: &Path) -> Result<NiftiImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Write an image, gzip-compressing when the path ends in `.gz`.
pub fn write_file(path: &Path, img: &NiftiImage) -> Result<()> {
    let raw = encode(img)?;
    let bytes = if is_gz(path) {
        let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(&raw).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        raw
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
