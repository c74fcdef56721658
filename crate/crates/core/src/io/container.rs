//! Binary raster container for multiband image time series.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size            field
//! 0       8               magic, ASCII "MSRASTER"
//! 8       4               version, u32 (currently 1)
//! 12      4               n_rows, u32, >= 1
//! 16      4               n_cols, u32, >= 1
//! 20      4               n_bands, u32, >= 1
//! 24      4               n_dates, u32, >= 1
//! 28      8               grid origin x, f64
//! 36      8               grid origin y, f64
//! 44      8               pixel size, f64, > 0
//! 52      8               nodata sentinel, f64 (compared by bit pattern)
//! 60      10 * n_dates    dates, ASCII "YYYY-MM-DD", strictly increasing
//! .       per band        u16 name length, UTF-8 name,
//!                         f64 wavelength in nm (NaN = unknown)
//! .       4 + len         metadata text: u32 byte length, UTF-8
//! .       8*R*C*B*D       payload, f64: date-major, then band-major,
//!                         then row-major; sentinel bits mark invalid pixels
//! ```

use crate::band::{Band, BandSet};
use crate::date::Date;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;
use crate::series::{ImageSeries, SeriesEntry};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MSRASTER";
const VERSION: u32 = 1;

/// Sidecar information carried by the container beyond the pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMeta {
    /// Sentinel written at invalid pixels; matched by bit pattern on read.
    pub nodata: f64,
    /// Free-form text block; the CLI stores the resolved run configuration
    /// here so outputs are self-describing.
    pub metadata: String,
}

impl Default for RasterMeta {
    fn default() -> Self {
        RasterMeta {
            nodata: -9999.0,
            metadata: String::new(),
        }
    }
}

pub fn write_series(series: &ImageSeries, path: impl AsRef<Path>, meta: &RasterMeta) -> Result<()> {
    let bytes = write_series_bytes(series, meta)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_series(path: impl AsRef<Path>) -> Result<(ImageSeries, RasterMeta)> {
    let bytes = std::fs::read(path)?;
    read_series_bytes(&bytes)
}

pub fn write_series_bytes(series: &ImageSeries, meta: &RasterMeta) -> Result<Vec<u8>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("cannot serialize an empty series".into()));
    }
    let grid = series.grid();
    let nodata_bits = meta.nodata.to_bits();

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n_rows() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_cols() as u32).to_le_bytes());
    out.extend_from_slice(&(series.band_set().len() as u32).to_le_bytes());
    out.extend_from_slice(&(series.len() as u32).to_le_bytes());
    let (ox, oy) = grid.origin();
    out.extend_from_slice(&ox.to_le_bytes());
    out.extend_from_slice(&oy.to_le_bytes());
    out.extend_from_slice(&grid.pixel_size().to_le_bytes());
    out.extend_from_slice(&meta.nodata.to_le_bytes());
    for entry in series.entries() {
        out.extend_from_slice(entry.date.to_string().as_bytes());
    }
    for band in series.band_set().bands() {
        let name = band.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "band name too long ({} bytes)",
                name.len()
            )));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&band.wavelength_nm.unwrap_or(f64::NAN).to_le_bytes());
    }
    let metadata = meta.metadata.as_bytes();
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata);

    for entry in series.entries() {
        for img in &entry.images {
            for (i, (&v, &m)) in img.values().iter().zip(img.mask()).enumerate() {
                if m {
                    if v.to_bits() == nodata_bits {
                        return Err(Error::InvalidConfig(format!(
                            "valid pixel {i} at {} equals the nodata sentinel {}",
                            entry.date, meta.nodata
                        )));
                    }
                    out.extend_from_slice(&v.to_le_bytes());
                } else {
                    out.extend_from_slice(&meta.nodata.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(n).ok_or_else(|| {
            Error::format(self.offset as u64, format!("{what}: length overflow"))
        })?;
        if end > self.bytes.len() {
            return Err(Error::format(
                self.offset as u64,
                format!(
                    "{what}: expected {n} more bytes, file holds {}",
                    self.bytes.len() - self.offset
                ),
            ));
        }
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_series_bytes(bytes: &[u8]) -> Result<(ImageSeries, RasterMeta)> {
    let mut r = Reader { bytes, offset: 0 };

    let magic = r.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}")));
    }
    let version_offset = r.offset as u64;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(
            version_offset,
            format!("unsupported version {version} (expected {VERSION})"),
        ));
    }
    let n_rows = r.u32("n_rows")? as usize;
    let n_cols = r.u32("n_cols")? as usize;
    let n_bands = r.u32("n_bands")? as usize;
    let n_dates = r.u32("n_dates")? as usize;
    if n_rows == 0 || n_cols == 0 || n_bands == 0 || n_dates == 0 {
        return Err(Error::format(
            12,
            format!("degenerate dimensions {n_rows}x{n_cols}, {n_bands} bands, {n_dates} dates"),
        ));
    }
    let origin_x = r.f64("origin x")?;
    let origin_y = r.f64("origin y")?;
    let pixel_size_offset = r.offset as u64;
    let pixel_size = r.f64("pixel size")?;
    if pixel_size <= 0.0 || !pixel_size.is_finite() {
        return Err(Error::format(
            pixel_size_offset,
            format!("pixel size must be positive and finite, got {pixel_size}"),
        ));
    }
    let nodata = r.f64("nodata sentinel")?;

    let mut dates = Vec::with_capacity(n_dates);
    for i in 0..n_dates {
        let offset = r.offset as u64;
        let raw = r.take(10, "date")?;
        let text = std::str::from_utf8(raw)
            .map_err(|_| Error::format(offset, "date is not ASCII".to_string()))?;
        let date: Date = text
            .parse()
            .map_err(|_| Error::format(offset, format!("bad date {text:?}")))?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::format(
                    offset,
                    format!("dates not strictly increasing: {prev} then {date} (entry {i})"),
                ));
            }
        }
        dates.push(date);
    }

    let mut bands = Vec::with_capacity(n_bands);
    for _ in 0..n_bands {
        let len = r.u16("band name length")? as usize;
        let offset = r.offset as u64;
        let raw = r.take(len, "band name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::format(offset, "band name is not UTF-8".to_string()))?
            .to_string();
        let wavelength = r.f64("band wavelength")?;
        bands.push(Band {
            name,
            wavelength_nm: (!wavelength.is_nan()).then_some(wavelength),
        });
    }
    let band_set = BandSet::new(bands)?;

    let meta_len = r.u32("metadata length")? as usize;
    let offset = r.offset as u64;
    let metadata = std::str::from_utf8(r.take(meta_len, "metadata")?)
        .map_err(|_| Error::format(offset, "metadata is not UTF-8".to_string()))?
        .to_string();

    let pixels = n_rows * n_cols;
    let expected = pixels * n_bands * n_dates * 8;
    let remaining = bytes.len() - r.offset;
    if remaining != expected {
        return Err(Error::format(
            r.offset as u64,
            format!("payload: expected {expected} bytes, found {remaining}"),
        ));
    }

    let grid = Grid::new(origin_x, origin_y, pixel_size, n_rows, n_cols)?;
    let nodata_bits = nodata.to_bits();
    let mut entries = Vec::with_capacity(n_dates);
    for date in dates {
        let mut images = Vec::with_capacity(n_bands);
        for _ in 0..n_bands {
            let raw = r.take(pixels * 8, "payload")?;
            let mut values = vec![0.0f64; pixels];
            let mut mask = vec![true; pixels];
            for (i, chunk) in raw.chunks_exact(8).enumerate() {
                let v = f64::from_le_bytes(chunk.try_into().unwrap());
                if v.to_bits() == nodata_bits {
                    mask[i] = false;
                } else {
                    values[i] = v;
                }
            }
            images.push(MaskedImage::new(grid.clone(), values, mask)?);
        }
        entries.push(SeriesEntry { date, images });
    }

    let series = ImageSeries::new(grid, band_set, entries)?;
    Ok((series, RasterMeta { nodata, metadata }))
}
