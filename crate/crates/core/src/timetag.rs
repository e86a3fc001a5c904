//! `TTG1` time-tag files and conversion of streams into binned counts.
//!
//! File layout, all little-endian:
//!
//! | bytes | field                              |
//! |-------|------------------------------------|
//! | 4     | magic `TTG1`                       |
//! | 2     | format version (`1`)               |
//! | 2     | channel id                         |
//! | 8     | window duration, ps                |
//! | 8     | tag count `n`                      |
//! | 8·n   | timestamps, ps, strictly increasing |

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{AnalysisError, Error, FormatError};
use crate::model::{check_tags, BinnedCounts, TimeTagStream};

pub const MAGIC: [u8; 4] = *b"TTG1";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

pub fn encode_stream(stream: &TimeTagStream) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * stream.len());
    write_to(stream, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn write_to<W: Write>(stream: &TimeTagStream, w: &mut W) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&stream.channel_id().to_le_bytes())?;
    w.write_all(&stream.duration_ps().to_le_bytes())?;
    w.write_all(&(stream.len() as u64).to_le_bytes())?;
    for tag in stream.tags() {
        w.write_all(&tag.to_le_bytes())?;
    }
    Ok(())
}

pub fn decode_stream(bytes: &[u8]) -> Result<TimeTagStream, FormatError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u16_at(4);
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let channel_id = u16_at(6);
    let duration_ps = u64_at(8);
    let count = u64_at(16);

    let found = bytes.len() as u64;
    let expected = count
        .checked_mul(8)
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .unwrap_or(u64::MAX);
    if found < expected {
        return Err(FormatError::Truncated { expected, found });
    }
    if found > expected {
        return Err(FormatError::TrailingData(found - expected));
    }
    let tags: Vec<u64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    check_tags(&tags, duration_ps)?;
    Ok(TimeTagStream::from_sorted_unchecked(channel_id, duration_ps, tags))
}

pub fn write_stream(stream: &TimeTagStream, path: impl AsRef<Path>) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(stream, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<TimeTagStream, Error> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    Ok(decode_stream(&bytes)?)
}

/// Counts tags per bin `[i·w, (i+1)·w)`; the trailing partial bin is dropped.
pub fn bin_counts(stream: &TimeTagStream, bin_width_ps: u64) -> Result<BinnedCounts, AnalysisError> {
    if bin_width_ps == 0 {
        return Err(AnalysisError::ZeroBinWidth);
    }
    if bin_width_ps > stream.duration_ps() {
        return Err(AnalysisError::BinWiderThanWindow {
            bin_width_ps,
            duration_ps: stream.duration_ps(),
        });
    }
    let n = (stream.duration_ps() / bin_width_ps) as usize;
    let mut counts = vec![0u32; n];
    for &tag in stream.tags() {
        let i = (tag / bin_width_ps) as usize;
        if i >= n {
            break;
        }
        counts[i] += 1;
    }
    Ok(BinnedCounts {
        channel_id: stream.channel_id(),
        bin_width_ps,
        counts,
    })
}

/// Multiple clicks in one bin count as a single event.
pub fn clamp_to_events(binned: &BinnedCounts) -> BinnedCounts {
    BinnedCounts {
        channel_id: binned.channel_id,
        bin_width_ps: binned.bin_width_ps,
        counts: binned.counts.iter().map(|&c| c.min(1)).collect(),
    }
}

/// The part of `binned` that stays inside the window after displacing the
/// series by `shift` bins (positive = later), in order.
///
/// Pairing `shift_bins(a, t)` with `shift_bins(b, -t)` element-wise yields
/// the pairs `(a[i], b[i + t])` over their overlap.
pub fn shift_bins(binned: &BinnedCounts, shift: i64) -> Result<BinnedCounts, AnalysisError> {
    let counts = shifted_slice(&binned.counts, shift)?;
    Ok(BinnedCounts {
        channel_id: binned.channel_id,
        bin_width_ps: binned.bin_width_ps,
        counts: counts.to_vec(),
    })
}

pub(crate) fn shifted_slice<T>(xs: &[T], shift: i64) -> Result<&[T], AnalysisError> {
    let len = xs.len();
    let s = shift.unsigned_abs() as usize;
    if s >= len {
        return Err(AnalysisError::ShiftOutOfRange { shift, len });
    }
    Ok(if shift >= 0 { &xs[..len - s] } else { &xs[s..] })
}

/// Writes the binned-count export `bin_index,count_a,count_b,diff`.
pub fn write_binned_csv<W: Write>(
    w: &mut W,
    a: &BinnedCounts,
    b: &BinnedCounts,
) -> Result<(), Error> {
    if a.bin_width_ps != b.bin_width_ps {
        return Err(AnalysisError::MismatchedBinWidth(a.bin_width_ps, b.bin_width_ps).into());
    }
    if a.len() != b.len() {
        return Err(AnalysisError::MismatchedLength(a.len(), b.len()).into());
    }
    writeln!(w, "bin_index,count_a,count_b,diff")?;
    for (i, (&x, &y)) in a.counts.iter().zip(&b.counts).enumerate() {
        writeln!(w, "{i},{x},{y},{}", x as i64 - y as i64)?;
    }
    Ok(())
}
