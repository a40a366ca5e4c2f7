//! On-disk formats: PPM frame directories, keypoint and feature CSVs, ROI
//! volumes and transcripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{SubSequenceSpec, Transcript};
use crate::image::{RgbImage, VideoSequence};
use crate::segmentation::{Channel, MouthKeypoints, RoiVolume};

pub const MANIFEST: &str = "manifest.txt";
const ROI_MAGIC: &[u8; 4] = b"VSR1";

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.ppm")
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.raw());
    out
}

/// Binary P6 with maxval 255; `#` comments in the header are skipped.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let bad = |d: &str| Error::format("PPM", d.to_string());
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    // exactly one whitespace byte before the raster
    pos += 1;
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(bad("raster is truncated"));
    }
    RgbImage::from_raw(w, h, bytes[pos..pos + need].to_vec())
}

pub fn write_video_dir(dir: &Path, video: &VideoSequence) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in video.frames().iter().enumerate() {
        write_bytes(&dir.join(frame_file_name(i)), &encode_ppm(frame))?;
    }
    let manifest = format!("fps={}\nframes={}\n", video.fps(), video.len());
    write_bytes(&dir.join(MANIFEST), manifest.as_bytes())
}

pub fn read_video_dir(dir: &Path) -> Result<VideoSequence> {
    let manifest_path = dir.join(MANIFEST);
    let text = read_text(&manifest_path)?;
    let mut fps = None;
    let mut frames = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let bad = || Error::format("manifest", format!("{}: bad line `{line}`", manifest_path.display()));
        let (key, value) = line.split_once('=').ok_or_else(bad)?;
        match key.trim() {
            "fps" => fps = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
            "frames" => frames = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let missing = |k: &str| Error::format("manifest", format!("{}: missing `{k}=`", manifest_path.display()));
    let fps = fps.ok_or_else(|| missing("fps"))?;
    let frames = frames.ok_or_else(|| missing("frames"))?;
    let images = (0..frames)
        .map(|i| {
            let path = dir.join(frame_file_name(i));
            decode_ppm(&read_bytes(&path)?).map_err(|e| Error::format("PPM", format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(images, fps)
}

pub fn keypoints_to_csv(keypoints: &[MouthKeypoints]) -> String {
    let mut out = String::from("frame,lipRow,leftRow,leftCol,rightRow,rightCol\n");
    for (i, k) in keypoints.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{:.4},{:.4},{:.4},{:.4},{:.4}",
            k.lip_row, k.left_corner.row, k.left_corner.col, k.right_corner.row, k.right_corner.col
        );
    }
    out
}

/// Numeric CSV rows after the header line.
pub fn parse_numeric_csv(text: &str, what: &str, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(what, format!("line {}: not numeric", n + 1)))?;
        if vals.len() != columns {
            return Err(Error::format(what, format!("line {}: expected {columns} columns", n + 1)));
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Dense VSR1 encoding; channels are written in canonical order.
pub fn encode_roi(roi: &RoiVolume) -> Result<Vec<u8>> {
    if roi.channels() != Channel::ALL {
        return Err(Error::invalid("ROI files hold all channels in canonical order"));
    }
    let mut out = Vec::with_capacity(20 + roi.data().len() * 4);
    out.extend_from_slice(ROI_MAGIC);
    for v in [roi.width(), roi.height(), roi.frames(), roi.channels().len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in roi.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_roi(bytes: &[u8]) -> Result<RoiVolume> {
    let bad = |d: String| Error::format("ROI volume", d);
    if bytes.len() < 20 || &bytes[..4] != ROI_MAGIC {
        return Err(bad("missing VSR1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (w, h, f, c) = (word(0), word(1), word(2), word(3));
    if c != Channel::ALL.len() {
        return Err(bad(format!("expected {} channels, found {c}", Channel::ALL.len())));
    }
    let count = w * h * f * c;
    if bytes.len() != 20 + count * 4 {
        return Err(bad(format!("expected {} data bytes, found {}", count * 4, bytes.len() - 20)));
    }
    let data = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    RoiVolume::new(w, h, f, Channel::ALL.to_vec(), 1.0, data)
}

pub fn write_roi(path: &Path, roi: &RoiVolume) -> Result<()> {
    write_bytes(path, &encode_roi(roi)?)
}

pub fn read_roi(path: &Path) -> Result<RoiVolume> {
    decode_roi(&read_bytes(path)?).map_err(|e| Error::format("ROI volume", format!("{}: {e}", path.display())))
}

pub fn read_transcript(path: &Path) -> Result<Transcript> {
    Transcript::parse(&read_text(path)?).map_err(|e| Error::format("transcript", format!("{}: {e}", path.display())))
}

/// Binary 8-bit greyscale PGM (P5).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            found: pixels.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// Feature rows with an optional label column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub spec: SubSequenceSpec,
    pub features: Vec<f64>,
    pub label: Option<String>,
}

pub fn features_to_csv(rows: &[FeatureRow]) -> String {
    let dim = rows.first().map_or(0, |r| r.features.len());
    let labelled = rows.iter().any(|r| r.label.is_some());
    let mut out = String::from("start,duration");
    for k in 0..dim {
        let _ = write!(out, ",f{k}");
    }
    if labelled {
        out.push_str(",label");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.spec.start, r.spec.duration);
        for v in &r.features {
            let _ = write!(out, ",{v:e}");
        }
        if labelled {
            let _ = write!(out, ",{}", r.label.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    out
}

pub fn features_from_csv(text: &str) -> Result<Vec<FeatureRow>> {
    let bad = |d: String| Error::format("feature CSV", d);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    if header.len() < 2 || header[0] != "start" || header[1] != "duration" {
        return Err(bad("header must start with start,duration".into()));
    }
    let labelled = header.last() == Some(&"label");
    let dim = header.len() - 2 - usize::from(labelled);
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(bad(format!("line {}: expected {} fields", n + 2, header.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("line {}: bad integer `{s}`", n + 2)));
        let features = f[2..2 + dim]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number `{s}`", n + 2))))
            .collect::<Result<_>>()?;
        rows.push(FeatureRow {
            spec: SubSequenceSpec::new(int(f[0])?, int(f[1])?),
            features,
            label: labelled.then(|| f[f.len() - 1].to_string()).filter(|l| !l.is_empty()),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = RgbImage::new(3, 2);
        img.put(1, 2, [10, 200, 30]);
        let bytes = encode_ppm(&img);
        assert_eq!(decode_ppm(&bytes).unwrap(), img);
        let commented = [b"P6\n# hi\n3 2\n255\n".as_slice(), img.raw()].concat();
        assert_eq!(decode_ppm(&commented).unwrap(), img);
        assert!(decode_ppm(b"P3\n1 1\n255\n").is_err());
        assert!(decode_ppm(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn roi_round_trip() {
        let n = 4 * 3 * 2 * Channel::ALL.len();
        let data: Vec<f32> = (0..n).map(|i| i as f32 * 0.25).collect();
        let roi = RoiVolume::new(4, 3, 2, Channel::ALL.to_vec(), 1.0, data).unwrap();
        let bytes = encode_roi(&roi).unwrap();
        assert_eq!(&bytes[..4], b"VSR1");
        assert_eq!(decode_roi(&bytes).unwrap(), roi);
        assert!(decode_roi(&bytes[..bytes.len() - 4]).is_err());
    }

    #[test]
    fn feature_csv_round_trip() {
        let rows = vec![
            FeatureRow {
                spec: SubSequenceSpec::new(0, 3),
                features: vec![0.1, -2.5e-7, 1.0 / 3.0],
                label: Some("AA".into()),
            },
            FeatureRow {
                spec: SubSequenceSpec::new(3, 4),
                features: vec![1.0, 2.0, 3.0],
                label: Some("T".into()),
            },
        ];
        let text = features_to_csv(&rows);
        assert!(text.starts_with("start,duration,f0,f1,f2,label\n"));
        assert_eq!(features_from_csv(&text).unwrap(), rows);
    }
}
