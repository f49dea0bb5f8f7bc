//! Frame preprocessing: RGB -> grayscale -> 84x84 -> 1 bit per pixel.
//!
//! The game renders at 252x252, exactly three times the observation size,
//! so downscaling is a plain 3x3 block mean and every 21-pixel game cell
//! lands on a 7x7 block of the observation.

use std::io::{self, Write};

use crate::error::{Error, Result};

pub const OBS_SIZE: usize = 84;
pub const OBS_PIXELS: usize = OBS_SIZE * OBS_SIZE;
pub const PACKED_BYTES: usize = OBS_PIXELS / 8;
pub const STACK_LEN: usize = 4;
pub const DOWNSCALE: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 127.5;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn black(width: usize, height: usize) -> Self {
        RgbFrame {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Usage(format!(
                "RGB buffer of {} bytes does not match {width}x{height}x3",
                data.len()
            )));
        }
        Ok(RgbFrame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved RGB, row-major.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn fill_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize, rgb: [u8; 3]) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                let i = (y * self.width + x) * 3;
                self.data[i..i + 3].copy_from_slice(&rgb);
            }
        }
    }
}

/// Single-channel image with real-valued intensities in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Usage(format!(
                "gray buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

/// An 84x84 grayscale observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame(GrayImage);

impl GrayFrame {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        GrayImage::new(OBS_SIZE, OBS_SIZE, data).map(GrayFrame)
    }

    pub fn image(&self) -> &GrayImage {
        &self.0
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }
}

/// 84x84 pixels, one bit each, packed row-major MSB first (882 bytes).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryFrame {
    bits: [u8; PACKED_BYTES],
}

impl std::fmt::Debug for BinaryFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryFrame({} set)", self.count_ones())
    }
}

impl Default for BinaryFrame {
    fn default() -> Self {
        Self::zeros()
    }
}

impl BinaryFrame {
    pub fn zeros() -> Self {
        BinaryFrame {
            bits: [0; PACKED_BYTES],
        }
    }

    pub fn from_packed(bytes: &[u8]) -> Result<Self> {
        let bits = bytes.try_into().map_err(|_| {
            Error::Usage(format!(
                "packed frame must be {PACKED_BYTES} bytes, got {}",
                bytes.len()
            ))
        })?;
        Ok(BinaryFrame { bits })
    }

    /// From one byte per pixel; any non-zero byte is a set bit.
    pub fn from_bytes(pixels: &[u8]) -> Result<Self> {
        if pixels.len() != OBS_PIXELS {
            return Err(Error::Usage(format!(
                "binary frame needs {OBS_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        let mut frame = Self::zeros();
        for (i, &p) in pixels.iter().enumerate() {
            if p != 0 {
                frame.bits[i / 8] |= 0x80 >> (i % 8);
            }
        }
        Ok(frame)
    }

    pub fn packed(&self) -> &[u8; PACKED_BYTES] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * OBS_SIZE + x;
        self.bits[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        let i = y * OBS_SIZE + x;
        let mask = 0x80 >> (i % 8);
        if on {
            self.bits[i / 8] |= mask;
        } else {
            self.bits[i / 8] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|b| b.count_ones()).sum()
    }

    /// Byte-per-pixel form (the 7,056-byte accounting layout).
    pub fn to_bytes(&self) -> Vec<u8> {
        (0..OBS_PIXELS)
            .map(|i| (self.bits[i / 8] >> (7 - i % 8)) & 1)
            .collect()
    }

    /// Write 0.0/1.0 values row-major into `out` (length 7,056).
    pub fn write_values<T: num_traits::Float>(&self, out: &mut [T]) {
        debug_assert_eq!(out.len(), OBS_PIXELS);
        for (chunk, &byte) in out.chunks_mut(8).zip(self.bits.iter()) {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = if byte & (0x80 >> j) != 0 {
                    T::one()
                } else {
                    T::zero()
                };
            }
        }
    }
}

/// The four most recent binary frames, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStack {
    frames: [BinaryFrame; STACK_LEN],
}

impl FrameStack {
    /// Episode start: the first frame repeated four times.
    pub fn init(first: BinaryFrame) -> Self {
        FrameStack {
            frames: std::array::from_fn(|_| first.clone()),
        }
    }

    pub fn from_frames(frames: [BinaryFrame; STACK_LEN]) -> Self {
        FrameStack { frames }
    }

    pub fn push(&mut self, frame: BinaryFrame) {
        self.frames.rotate_left(1);
        self.frames[STACK_LEN - 1] = frame;
    }

    /// Functional form of [`FrameStack::push`].
    pub fn pushed(&self, frame: BinaryFrame) -> Self {
        let mut next = self.clone();
        next.push(frame);
        next
    }

    pub fn frames(&self) -> &[BinaryFrame; STACK_LEN] {
        &self.frames
    }

    pub fn newest(&self) -> &BinaryFrame {
        &self.frames[STACK_LEN - 1]
    }

    pub fn len(&self) -> usize {
        STACK_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Channels-first `[4, 84, 84]` values in `out`.
    pub fn write_tensor<T: num_traits::Float>(&self, out: &mut [T]) {
        debug_assert_eq!(out.len(), STACK_LEN * OBS_PIXELS);
        for (frame, chunk) in self.frames.iter().zip(out.chunks_mut(OBS_PIXELS)) {
            frame.write_values(chunk);
        }
    }
}

pub fn to_grayscale(frame: &RgbFrame) -> GrayImage {
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|p| {
            let g = LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64;
            g.clamp(0.0, 255.0)
        })
        .collect();
    GrayImage {
        width: frame.width(),
        height: frame.height(),
        data,
    }
}

/// 3x3 block mean from 252x252 to 84x84.
pub fn downscale(gray: &GrayImage) -> Result<GrayFrame> {
    let src = OBS_SIZE * DOWNSCALE;
    if gray.width() != src || gray.height() != src {
        return Err(Error::Usage(format!(
            "downscale expects {src}x{src}, got {}x{}",
            gray.width(),
            gray.height()
        )));
    }
    let mut out = vec![0.0; OBS_PIXELS];
    for (oy, row) in out.chunks_mut(OBS_SIZE).enumerate() {
        for (ox, v) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for dy in 0..DOWNSCALE {
                let base = (oy * DOWNSCALE + dy) * src + ox * DOWNSCALE;
                sum += gray.data()[base..base + DOWNSCALE].iter().sum::<f64>();
            }
            *v = sum / (DOWNSCALE * DOWNSCALE) as f64;
        }
    }
    GrayFrame::new(out)
}

/// Bit is set iff the gray value is strictly above `threshold`.
pub fn binarize(gray: &GrayFrame, threshold: f64) -> BinaryFrame {
    let mut frame = BinaryFrame::zeros();
    for (i, &v) in gray.data().iter().enumerate() {
        if v > threshold {
            frame.bits[i / 8] |= 0x80 >> (i % 8);
        }
    }
    frame
}

/// The full pipeline for one rendered game frame.
pub fn observe(frame: &RgbFrame) -> Result<BinaryFrame> {
    let small = downscale(&to_grayscale(frame))?;
    Ok(binarize(&small, DEFAULT_THRESHOLD))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PixelFormat {
    /// Three 64-bit float channels per pixel.
    RgbFloat64,
    /// One 64-bit float per pixel.
    GrayFloat64,
    /// One byte per binary pixel.
    BinaryByte,
    /// One bit per binary pixel.
    BinaryPacked,
}

impl PixelFormat {
    pub const ALL: [PixelFormat; 4] = [
        PixelFormat::RgbFloat64,
        PixelFormat::GrayFloat64,
        PixelFormat::BinaryByte,
        PixelFormat::BinaryPacked,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PixelFormat::RgbFloat64 => "RGB",
            PixelFormat::GrayFloat64 => "Grayscale",
            PixelFormat::BinaryByte => "Binary",
            PixelFormat::BinaryPacked => "Binary (packed)",
        }
    }

    pub fn data_type(self) -> &'static str {
        match self {
            PixelFormat::RgbFloat64 | PixelFormat::GrayFloat64 => "float",
            PixelFormat::BinaryByte => "int",
            PixelFormat::BinaryPacked => "bit",
        }
    }
}

/// Bytes needed to hold one 84x84 frame in `format`.
pub fn frame_bytes(format: PixelFormat) -> u64 {
    let px = OBS_PIXELS as u64;
    match format {
        PixelFormat::RgbFloat64 => px * 3 * 8,
        PixelFormat::GrayFloat64 => px * 8,
        PixelFormat::BinaryByte => px,
        PixelFormat::BinaryPacked => px / 8,
    }
}

/// `frame_bytes` in kB (1 kB = 1024 bytes).
pub fn frame_kb(format: PixelFormat) -> f64 {
    frame_bytes(format) as f64 / 1024.0
}

/// Fixed-point rendering that drops (not rounds) digits past `decimals`:
/// 6.890625 -> "6.890".
pub fn format_truncated(value: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    let t = (value * scale * (1.0 + 1e-12)).trunc() / scale;
    format!("{t:.decimals$}")
}

pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> io::Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)
}

impl GrayFrame {
    /// Binary PGM with values rounded to 8 bits.
    pub fn write_pgm<W: Write>(&self, w: W) -> io::Result<()> {
        let px: Vec<u8> = self
            .data()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        write_pgm(w, OBS_SIZE, OBS_SIZE, &px)
    }
}

impl BinaryFrame {
    /// Binary PBM (P4); set bits are black as the format prescribes.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P4\n{OBS_SIZE} {OBS_SIZE}\n")?;
        let row_bytes = OBS_SIZE.div_ceil(8);
        let mut row = vec![0u8; row_bytes];
        for y in 0..OBS_SIZE {
            row.fill(0);
            for x in 0..OBS_SIZE {
                if self.get(x, y) {
                    row[x / 8] |= 0x80 >> (x % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}
