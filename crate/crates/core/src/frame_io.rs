//! Frame sequences and per-frame label tracks.
//!
//! Two on-disk video containers are understood: a directory of binary PGM
//! (`P5`) images, read in lexicographic filename order, and a YUV4MPEG2
//! stream, of which only the luma plane is kept. Pixels are held as `f64`
//! luminance on the native `[0, 255]` scale.
//!
//! Label tracks are stored as CSV with header `start_frame,end_frame,action`,
//! inclusive 0-based ranges that must tile the video exactly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: f64 = 25.0;

/// A single grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    index: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, index: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "frame must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::dims(width * height, pixels.len()));
        }
        if let Some(bad) = pixels
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 255.0)
        {
            return Err(Error::InvalidInput(format!(
                "pixel value {bad} outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            index,
            pixels,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel, clamping to `[0, 255]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) });
            }
        }
        Self::new(width, height, index, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// Pixels rounded to 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| p.round() as u8).collect()
    }
}

/// An ordered run of equally sized frames, indexed from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl FrameSequence {
    /// Validates shared dimensions and re-indexes frames consecutively from 0.
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            let (w, h) = (first.width, first.height);
            for f in &frames {
                if f.width != w || f.height != h {
                    return Err(Error::dims(
                        format!("{w}x{h}"),
                        format!("{}x{}", f.width, f.height),
                    ));
                }
            }
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.with_index(i))
            .collect();
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)`, or `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    /// Appends `other`, re-indexing its frames.
    pub fn concat(&self, other: &FrameSequence) -> Result<FrameSequence> {
        let mut frames = self.frames.clone();
        frames.extend(other.frames.iter().cloned());
        FrameSequence::new(frames, self.fps)
    }

    /// SHA-256 over dimensions, frame count and every pixel value.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let (w, h) = self.dims().unwrap_or((0, 0));
        hasher.update((w as u64).to_le_bytes());
        hasher.update((h as u64).to_le_bytes());
        hasher.update((self.frames.len() as u64).to_le_bytes());
        for f in &self.frames {
            for p in &f.pixels {
                hasher.update(p.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFormat {
    PgmDir,
    Y4m,
}

impl SequenceFormat {
    /// Directories are PGM sequences, `*.y4m` files are Y4M streams.
    pub fn infer(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Ok(SequenceFormat::PgmDir)
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("y4m"))
        {
            Ok(SequenceFormat::Y4m)
        } else if !path.exists() {
            Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ))
        } else {
            Err(Error::InvalidInput(format!(
                "cannot infer video format of {}",
                path.display()
            )))
        }
    }
}

pub fn load_sequence(path: &Path, format: SequenceFormat) -> Result<FrameSequence> {
    match format {
        SequenceFormat::PgmDir => load_pgm_dir(path),
        SequenceFormat::Y4m => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_y4m(BufReader::new(file))
        }
    }
}

fn load_pgm_dir(dir: &Path) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    files.sort();
    let mut frames = Vec::with_capacity(files.len());
    for (i, path) in files.iter().enumerate() {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        frames.push(parse_pgm(&bytes, i)?);
    }
    FrameSequence::new(frames, DEFAULT_FPS)
}

/// Parses a binary `P5` image with maxval at most 255.
pub fn parse_pgm(bytes: &[u8], index: usize) -> Result<Frame> {
    let mut pos = 0usize;
    let magic = pgm_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::malformed("PGM header", "expected magic P5"));
    }
    let width = pgm_number(bytes, &mut pos)?;
    let height = pgm_number(bytes, &mut pos)?;
    let maxval = pgm_number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::malformed(
            "PGM header",
            format!("maxval {maxval} unsupported, need 1..=255"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::malformed("PGM header", "missing raster separator"));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::malformed("PGM header", "dimensions overflow"))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::malformed("PGM raster", format!("expected {n} bytes")))?;
    let scale = 255.0 / maxval as f64;
    let pixels = raster
        .iter()
        .map(|&b| {
            if maxval == 255 {
                b as f64
            } else {
                (b as f64 * scale).min(255.0)
            }
        })
        .collect();
    Frame::new(width, height, index, pixels)
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::malformed("PGM header", "unexpected end of header"));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            Error::malformed(
                "PGM header",
                format!("bad number {:?}", String::from_utf8_lossy(tok)),
            )
        })
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.to_u8());
    out
}

/// Writes `frame_000000.pgm`, `frame_000001.pgm`, ... into `dir`, creating it if needed.
pub fn write_pgm_dir(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in seq.frames() {
        let path = dir.join(format!("frame_{:06}.pgm", f.index));
        fs::write(&path, encode_pgm(f)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads a YUV4MPEG2 stream, keeping the luma plane of every frame.
pub fn read_y4m<R: BufRead>(mut reader: R) -> Result<FrameSequence> {
    let header = read_line(&mut reader)?
        .ok_or_else(|| Error::malformed("Y4M header", "empty stream"))?;
    let mut parts = header.split(' ');
    if parts.next() != Some("YUV4MPEG2") {
        return Err(Error::malformed("Y4M header", "missing YUV4MPEG2 signature"));
    }
    let mut width = None;
    let mut height = None;
    let mut fps = DEFAULT_FPS;
    let mut colorspace = "420jpeg".to_string();
    for p in parts.filter(|p| !p.is_empty()) {
        let (tag, val) = p.split_at(1);
        match tag {
            "W" => width = val.parse::<usize>().ok(),
            "H" => height = val.parse::<usize>().ok(),
            "F" => {
                let (num, den) = val
                    .split_once(':')
                    .ok_or_else(|| Error::malformed("Y4M header", format!("bad rate {val}")))?;
                let num: f64 = num
                    .parse()
                    .map_err(|_| Error::malformed("Y4M header", format!("bad rate {val}")))?;
                let den: f64 = den
                    .parse()
                    .map_err(|_| Error::malformed("Y4M header", format!("bad rate {val}")))?;
                if num > 0.0 && den > 0.0 {
                    fps = num / den;
                }
            }
            "C" => colorspace = val.to_string(),
            _ => {}
        }
    }
    let width = width
        .filter(|w| *w > 0)
        .ok_or_else(|| Error::malformed("Y4M header", "missing or invalid W"))?;
    let height = height
        .filter(|h| *h > 0)
        .ok_or_else(|| Error::malformed("Y4M header", "missing or invalid H"))?;
    let luma = width * height;
    let cw = width.div_ceil(2);
    let ch = height.div_ceil(2);
    let chroma = match colorspace.as_str() {
        "420" | "420jpeg" | "420paldv" | "420mpeg2" => 2 * cw * ch,
        "422" => 2 * cw * height,
        "444" => 2 * luma,
        "411" => 2 * width.div_ceil(4) * height,
        "mono" => 0,
        other => {
            return Err(Error::malformed(
                "Y4M header",
                format!("unsupported colorspace C{other}"),
            ))
        }
    };

    let mut frames = Vec::new();
    let mut luma_buf = vec![0u8; luma];
    let mut chroma_buf = vec![0u8; chroma];
    while let Some(line) = read_line(&mut reader)? {
        if !line.starts_with("FRAME") {
            return Err(Error::malformed(
                "Y4M frame",
                format!("expected FRAME marker, got {line:?}"),
            ));
        }
        reader
            .read_exact(&mut luma_buf)
            .and_then(|_| reader.read_exact(&mut chroma_buf))
            .map_err(|_| Error::malformed("Y4M frame", "truncated frame data"))?;
        let pixels = luma_buf.iter().map(|&b| b as f64).collect();
        frames.push(Frame::new(width, height, frames.len(), pixels)?);
    }
    FrameSequence::new(frames, fps)
}

fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<String>> {
    let mut buf = Vec::new();
    let n = reader
        .read_until(b'\n', &mut buf)
        .map_err(|e| Error::io("<y4m stream>", e))?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(Error::malformed("Y4M", "unterminated header line"));
    }
    buf.pop();
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| Error::malformed("Y4M", "header is not ASCII"))
}

/// Writes a mono (`Cmono`) Y4M stream.
pub fn write_y4m<W: Write>(seq: &FrameSequence, mut out: W) -> Result<()> {
    let (w, h) = seq
        .dims()
        .ok_or_else(|| Error::InvalidInput("cannot write an empty sequence".into()))?;
    let io = |e| Error::io("<y4m stream>", e);
    let fps = seq.fps().round().max(1.0) as u64;
    writeln!(out, "YUV4MPEG2 W{w} H{h} F{fps}:1 Ip A1:1 Cmono").map_err(io)?;
    for f in seq.frames() {
        out.write_all(b"FRAME\n").map_err(io)?;
        out.write_all(&f.to_u8()).map_err(io)?;
    }
    Ok(())
}

/// One action label (1-based ordinal into `action_names`) per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTrack {
    labels: Vec<usize>,
    action_names: Vec<String>,
}

/// An inclusive frame range carrying one action ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub action: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_frame + 1 - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Run-length encodes per-frame labels into inclusive segments.
pub fn run_lengths(labels: &[usize]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (t, &a) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.action == a => s.end_frame = t,
            _ => out.push(Segment {
                start_frame: t,
                end_frame: t,
                action: a,
            }),
        }
    }
    out
}

impl LabelTrack {
    pub fn new(labels: Vec<usize>, action_names: Vec<String>) -> Result<Self> {
        for (i, n) in action_names.iter().enumerate() {
            if action_names[..i].contains(n) {
                return Err(Error::InvalidInput(format!("duplicate action name {n:?}")));
            }
        }
        let a = action_names.len();
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > a) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside 1..={a}"
            )));
        }
        Ok(Self {
            labels,
            action_names,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn segments(&self) -> Vec<Segment> {
        run_lengths(&self.labels)
    }

    pub fn action_name(&self, ordinal: usize) -> Option<&str> {
        ordinal
            .checked_sub(1)
            .and_then(|i| self.action_names.get(i))
            .map(String::as_str)
    }

    /// Re-expresses the labels against another ordering of action names.
    pub fn remap(&self, action_names: &[String]) -> Result<LabelTrack> {
        let map: Vec<usize> = self
            .action_names
            .iter()
            .map(|n| {
                action_names
                    .iter()
                    .position(|m| m == n)
                    .map(|i| i + 1)
                    .ok_or_else(|| Error::UnknownAction(n.clone()))
            })
            .collect::<Result<_>>()?;
        LabelTrack::new(
            self.labels.iter().map(|&l| map[l - 1]).collect(),
            action_names.to_vec(),
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_segments_csv(&self.segments(), &self.action_names, out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    start_frame: usize,
    end_frame: usize,
    action: String,
}

/// Writes segments in the label CSV schema.
pub fn write_segments_csv<W: Write>(
    segments: &[Segment],
    action_names: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    // the header must appear even with zero rows
    w.write_record(["start_frame", "end_frame", "action"])?;
    for s in segments {
        let name = action_names
            .get(s.action.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidInput(format!("segment action {} undeclared", s.action)))?;
        w.write_record([
            s.start_frame.to_string(),
            s.end_frame.to_string(),
            name.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Loads a label CSV; action ordinals follow order of first appearance.
pub fn load_labels(path: &Path) -> Result<LabelTrack> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, None)
}

/// Loads a label CSV against a fixed action ordering; unknown names are errors.
pub fn load_labels_with_actions(path: &Path, action_names: &[String]) -> Result<LabelTrack> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, Some(action_names))
}

pub fn read_labels<R: Read>(input: R, action_names: Option<&[String]>) -> Result<LabelTrack> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["start_frame", "end_frame", "action"] {
        return Err(Error::malformed(
            "label CSV",
            "header must be start_frame,end_frame,action",
        ));
    }
    let mut rows: Vec<LabelRow> = Vec::new();
    for row in reader.deserialize() {
        let row: LabelRow = row?;
        if row.end_frame < row.start_frame {
            return Err(Error::malformed(
                "label CSV",
                format!("row {}..{} ends before it starts", row.start_frame, row.end_frame),
            ));
        }
        rows.push(row);
    }

    let mut names: Vec<String> = action_names.map(<[String]>::to_vec).unwrap_or_default();
    let mut ordinals = Vec::with_capacity(rows.len());
    for row in &rows {
        let ord = match names.iter().position(|n| *n == row.action) {
            Some(i) => i + 1,
            None if action_names.is_some() => return Err(Error::UnknownAction(row.action.clone())),
            None => {
                names.push(row.action.clone());
                names.len()
            }
        };
        ordinals.push(ord);
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].start_frame, rows[i].end_frame));
    let mut labels = Vec::new();
    for i in order {
        let row = &rows[i];
        if row.start_frame < labels.len() {
            return Err(Error::OverlappingLabels(row.start_frame));
        }
        if row.start_frame > labels.len() {
            return Err(Error::LabelGap {
                start: labels.len(),
                end: row.start_frame - 1,
            });
        }
        labels.extend(std::iter::repeat_n(ordinals[i], row.end_frame - row.start_frame + 1));
    }
    LabelTrack::new(labels, names)
}
