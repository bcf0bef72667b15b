//! Bit-accurate functional model of output-stationary convolution on a
//! faulty array, DPPU recomputation, and masked output-buffer overwrite.
//!
//! Fixed-point semantics: inputs and weights are signed 8-bit, products are
//! signed 16-bit (exact), and accumulation wraps modulo 2^32 in two's
//! complement — the behavior of a plain hardware accumulator. A persistent
//! stuck bit corrupts every write of the register it lives in, so masks are
//! applied on each MAC, not once per output.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::PECoord;
use crate::fault::{self, streams, FaultMap};

/// 8-bit fixed-point tensor of shape `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    data: Vec<i8>,
}

impl Tensor {
    pub fn zeros(channels: u32, height: u32, width: u32) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0; (channels * height * width) as usize],
        }
    }

    pub fn from_vec(channels: u32, height: u32, width: u32, data: Vec<i8>) -> Result<Self, EmulatorError> {
        if data.len() != (channels * height * width) as usize {
            return Err(EmulatorError::Shape(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn random(rng: &mut ChaCha8Rng, channels: u32, height: u32, width: u32) -> Self {
        let data = (0..channels * height * width)
            .map(|_| rng.random::<i8>())
            .collect();
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn get(&self, c: u32, y: u32, x: u32) -> i8 {
        self.data[((c * self.height + y) * self.width + x) as usize]
    }

    pub fn set(&mut self, c: u32, y: u32, x: u32, v: i8) {
        self.data[((c * self.height + y) * self.width + x) as usize] = v;
    }

    /// Flat little-endian binary with a 3-integer shape header.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.data.len());
        for dim in [self.channels, self.height, self.width] {
            out.extend_from_slice(&dim.to_le_bytes());
        }
        out.extend(self.data.iter().map(|&v| v as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmulatorError> {
        if bytes.len() < 12 {
            return Err(EmulatorError::Shape("tensor header truncated".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
        let (c, h, w) = (dim(0), dim(1), dim(2));
        let expected = (c as usize) * (h as usize) * (w as usize);
        if bytes.len() - 12 != expected {
            return Err(EmulatorError::Shape(format!(
                "expected {expected} tensor bytes, got {}",
                bytes.len() - 12
            )));
        }
        Tensor::from_vec(c, h, w, bytes[12..].iter().map(|&b| b as i8).collect())
    }
}

/// 32-bit accumulator tensor of shape `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccTensor {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    data: Vec<i32>,
}

impl AccTensor {
    pub fn zeros(channels: u32, height: u32, width: u32) -> Self {
        AccTensor {
            channels,
            height,
            width,
            data: vec![0; (channels * height * width) as usize],
        }
    }

    #[inline]
    pub fn index(&self, m: u32, y: u32, x: u32) -> usize {
        ((m * self.height + y) * self.width + x) as usize
    }

    #[inline]
    pub fn get(&self, m: u32, y: u32, x: u32) -> i32 {
        self.data[self.index(m, y, x)]
    }

    pub fn set(&mut self, m: u32, y: u32, x: u32, v: i32) {
        let i = self.index(m, y, x);
        self.data[i] = v;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        for dim in [self.channels, self.height, self.width] {
            out.extend_from_slice(&dim.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Coordinates `(m, y, x)` where two tensors differ.
    pub fn diff_coords(&self, other: &AccTensor) -> Vec<(u32, u32, u32)> {
        let mut diffs = Vec::new();
        for m in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    if self.get(m, y, x) != other.get(m, y, x) {
                        diffs.push((m, y, x));
                    }
                }
            }
        }
        diffs
    }
}

/// Convolution weights of shape `(out_ch, in_ch, k, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights {
    pub out_ch: u32,
    pub in_ch: u32,
    pub k: u32,
    data: Vec<i8>,
}

impl Weights {
    pub fn zeros(out_ch: u32, in_ch: u32, k: u32) -> Self {
        Weights {
            out_ch,
            in_ch,
            k,
            data: vec![0; (out_ch * in_ch * k * k) as usize],
        }
    }

    pub fn random(rng: &mut ChaCha8Rng, out_ch: u32, in_ch: u32, k: u32) -> Self {
        let data = (0..out_ch * in_ch * k * k)
            .map(|_| rng.random::<i8>())
            .collect();
        Weights {
            out_ch,
            in_ch,
            k,
            data,
        }
    }

    #[inline]
    pub fn get(&self, m: u32, c: u32, ky: u32, kx: u32) -> i8 {
        self.data[(((m * self.in_ch + c) * self.k + ky) * self.k + kx) as usize]
    }

    pub fn set(&mut self, m: u32, c: u32, ky: u32, kx: u32, v: i8) {
        let i = (((m * self.in_ch + c) * self.k + ky) * self.k + kx) as usize;
        self.data[i] = v;
    }
}

/// PE register selector for single-bit fault construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Register {
    Input,
    Weight,
    Intermediate,
    Accumulator,
}

/// Per-register stuck-at masks of one faulty PE.
///
/// A register write lands as `(value & and_mask) | or_mask`: stuck-at-0 bits
/// clear the AND mask, stuck-at-1 bits set the OR mask. Register layout is
/// the default 8/8/16/32-bit organization, 64 bits total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StuckMask {
    pub in_and: u8,
    pub in_or: u8,
    pub w_and: u8,
    pub w_or: u8,
    pub int_and: u16,
    pub int_or: u16,
    pub acc_and: u32,
    pub acc_or: u32,
}

pub const PE_STATE_BITS: u32 = 64;

impl Default for StuckMask {
    fn default() -> Self {
        StuckMask {
            in_and: !0,
            in_or: 0,
            w_and: !0,
            w_or: 0,
            int_and: !0,
            int_or: 0,
            acc_and: !0,
            acc_or: 0,
        }
    }
}

impl StuckMask {
    /// Mask with one stuck bit: `value=false` sticks at 0, `true` at 1.
    pub fn stuck_bit(reg: Register, bit: u32, value: bool) -> Self {
        let mut m = StuckMask::default();
        m.add_stuck_bit(reg, bit, value);
        m
    }

    pub fn add_stuck_bit(&mut self, reg: Register, bit: u32, value: bool) {
        match reg {
            Register::Input => set_bit(&mut self.in_and, &mut self.in_or, bit, value),
            Register::Weight => set_bit(&mut self.w_and, &mut self.w_or, bit, value),
            Register::Intermediate => set_bit16(&mut self.int_and, &mut self.int_or, bit, value),
            Register::Accumulator => set_bit32(&mut self.acc_and, &mut self.acc_or, bit, value),
        }
    }

    /// Stuck-at draw over the PE's 64 state bits: the number of stuck bits
    /// follows the bit error rate conditioned on at least one, positions are
    /// uniform without replacement, polarity is a fair coin.
    pub fn sample(rng: &mut ChaCha8Rng, ber: f64) -> Self {
        let mut mask = StuckMask::default();
        let k = conditional_stuck_count(rng, ber);
        let mut positions: Vec<u32> = (0..PE_STATE_BITS).collect();
        for i in 0..k {
            let j = rng.random_range(i..PE_STATE_BITS as usize);
            positions.swap(i, j);
            let (reg, bit) = global_bit(positions[i]);
            mask.add_stuck_bit(reg, bit, rng.random::<bool>());
        }
        mask
    }

    pub fn is_clean(&self) -> bool {
        *self == StuckMask::default()
    }

    #[inline]
    pub fn apply_input(&self, v: i8) -> i8 {
        ((v as u8 & self.in_and) | self.in_or) as i8
    }

    #[inline]
    pub fn apply_weight(&self, v: i8) -> i8 {
        ((v as u8 & self.w_and) | self.w_or) as i8
    }

    #[inline]
    pub fn apply_intermediate(&self, v: i16) -> i16 {
        ((v as u16 & self.int_and) | self.int_or) as i16
    }

    #[inline]
    pub fn apply_accumulator(&self, v: i32) -> i32 {
        ((v as u32 & self.acc_and) | self.acc_or) as i32
    }
}

fn set_bit(and: &mut u8, or: &mut u8, bit: u32, value: bool) {
    assert!(bit < 8);
    if value {
        *or |= 1 << bit;
    } else {
        *and &= !(1 << bit);
    }
}

fn set_bit16(and: &mut u16, or: &mut u16, bit: u32, value: bool) {
    assert!(bit < 16);
    if value {
        *or |= 1 << bit;
    } else {
        *and &= !(1 << bit);
    }
}

fn set_bit32(and: &mut u32, or: &mut u32, bit: u32, value: bool) {
    assert!(bit < 32);
    if value {
        *or |= 1 << bit;
    } else {
        *and &= !(1 << bit);
    }
}

fn global_bit(i: u32) -> (Register, u32) {
    match i {
        0..=7 => (Register::Input, i),
        8..=15 => (Register::Weight, i - 8),
        16..=31 => (Register::Intermediate, i - 16),
        _ => (Register::Accumulator, i - 32),
    }
}

/// Draws `k ~ Binomial(64, ber) | k >= 1` by inverse CDF. The recurrence
/// uses only multiplications, so the draw is reproducible everywhere.
fn conditional_stuck_count(rng: &mut ChaCha8Rng, ber: f64) -> usize {
    if ber <= 0.0 {
        return 1;
    }
    if ber >= 1.0 {
        return PE_STATE_BITS as usize;
    }
    let n = PE_STATE_BITS as f64;
    let q = 1.0 - ber;
    let p0 = pow_int(q, PE_STATE_BITS);
    let u = p0 + rng.random::<f64>() * (1.0 - p0);
    let mut pk = p0;
    let mut cdf = p0;
    for k in 1..=PE_STATE_BITS as usize {
        pk *= (n - (k as f64 - 1.0)) / k as f64 * (ber / q);
        cdf += pk;
        if u <= cdf {
            return k;
        }
    }
    1
}

fn pow_int(base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

/// Draws a stuck mask for every faulty PE of a map, on the mask sub-stream
/// of the map's seed. The bit error rate is recovered from `per` so mask
/// density matches the injection rate.
pub fn stuck_masks_for(map: &FaultMap, per: f64) -> BTreeMap<PECoord, StuckMask> {
    let ber = ber_from_per(per);
    let mut rng = fault::stream_rng(map.seed, streams::STUCK_MASK);
    map.array_faults
        .iter()
        .map(|&pe| (pe, StuckMask::sample(&mut rng, ber)))
        .collect()
}

/// Inverse of the 64-bit PE error conversion: `1 - (1 - per)^(1/64)`,
/// computed with six correctly-rounded square roots.
pub fn ber_from_per(per: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&per));
    let mut x = 1.0 - per;
    for _ in 0..6 {
        x = x.sqrt();
    }
    1.0 - x
}

/// Maps each output element to its owning PE: output channels tile over
/// columns, output pixels over rows.
#[derive(Debug, Clone)]
pub struct Attribution {
    pub rows: u32,
    pub cols: u32,
    pub out_ch: u32,
    pub out_h: u32,
    pub out_w: u32,
}

impl Attribution {
    #[inline]
    pub fn owner(&self, m: u32, oy: u32, ox: u32) -> PECoord {
        let pixel = oy * self.out_w + ox;
        PECoord::new(pixel % self.rows, m % self.cols)
    }

    /// Output elements `(m, oy, ox)` computed by one PE.
    pub fn outputs_of(&self, pe: PECoord) -> Vec<(u32, u32, u32)> {
        let mut out = Vec::new();
        for m in 0..self.out_ch {
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    if self.owner(m, oy, ox) == pe {
                        out.push((m, oy, ox));
                    }
                }
            }
        }
        out
    }
}

fn output_shape(input: &Tensor, weights: &Weights, stride: u32) -> Result<(u32, u32), EmulatorError> {
    if weights.in_ch != input.channels {
        return Err(EmulatorError::Shape(format!(
            "weights expect {} input channels, tensor has {}",
            weights.in_ch, input.channels
        )));
    }
    if stride == 0 {
        return Err(EmulatorError::Shape("stride must be >= 1".into()));
    }
    if input.height < weights.k || input.width < weights.k {
        return Err(EmulatorError::Shape(format!(
            "kernel {} does not fit input {}x{}",
            weights.k, input.height, input.width
        )));
    }
    Ok((
        (input.height - weights.k) / stride + 1,
        (input.width - weights.k) / stride + 1,
    ))
}

/// Reference convolution: direct nested loops in the same fixed-point
/// semantics. The ground truth for all equivalence checks.
pub fn golden_conv(input: &Tensor, weights: &Weights, stride: u32) -> Result<AccTensor, EmulatorError> {
    let (oh, ow) = output_shape(input, weights, stride)?;
    let mut out = AccTensor::zeros(weights.out_ch, oh, ow);
    for m in 0..weights.out_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                out.set(m, oy, ox, clean_output(input, weights, stride, m, oy, ox));
            }
        }
    }
    Ok(out)
}

#[inline]
fn clean_output(input: &Tensor, weights: &Weights, stride: u32, m: u32, oy: u32, ox: u32) -> i32 {
    let mut acc: i32 = 0;
    for c in 0..input.channels {
        for ky in 0..weights.k {
            for kx in 0..weights.k {
                let x = input.get(c, oy * stride + ky, ox * stride + kx) as i16;
                let w = weights.get(m, c, ky, kx) as i16;
                acc = acc.wrapping_add((x * w) as i32);
            }
        }
    }
    acc
}

/// One output feature computed through its owning PE's register path, with
/// the PE's stuck masks applied on every register write.
fn pe_output(
    input: &Tensor,
    weights: &Weights,
    stride: u32,
    m: u32,
    oy: u32,
    ox: u32,
    mask: &StuckMask,
) -> i32 {
    let mut acc = mask.apply_accumulator(0); // accumulator reset is a write
    for c in 0..input.channels {
        for ky in 0..weights.k {
            for kx in 0..weights.k {
                let x = mask.apply_input(input.get(c, oy * stride + ky, ox * stride + kx));
                let w = mask.apply_weight(weights.get(m, c, ky, kx));
                let product = mask.apply_intermediate(x as i16 * w as i16);
                acc = mask.apply_accumulator(acc.wrapping_add(product as i32));
            }
        }
    }
    acc
}

/// Runs the convolution through the 2-D array, applying each faulty PE's
/// stuck masks, and reports which PE produced each output element.
pub fn array_conv(
    input: &Tensor,
    weights: &Weights,
    stride: u32,
    rows: u32,
    cols: u32,
    masks: &BTreeMap<PECoord, StuckMask>,
) -> Result<(AccTensor, Attribution), EmulatorError> {
    if rows == 0 || cols == 0 {
        return Err(EmulatorError::Shape("array must be at least 1x1".into()));
    }
    let (oh, ow) = output_shape(input, weights, stride)?;
    let attribution = Attribution {
        rows,
        cols,
        out_ch: weights.out_ch,
        out_h: oh,
        out_w: ow,
    };
    let mut out = AccTensor::zeros(weights.out_ch, oh, ow);
    for m in 0..weights.out_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let pe = attribution.owner(m, oy, ox);
                let v = match masks.get(&pe) {
                    Some(mask) => pe_output(input, weights, stride, m, oy, ox, mask),
                    None => clean_output(input, weights, stride, m, oy, ox),
                };
                out.set(m, oy, ox, v);
            }
        }
    }
    Ok((out, attribution))
}

/// DPPU recovery: recomputes every output attributed to a PE in the fault
/// table and overwrites only those elements, leaving the rest untouched.
pub fn hyca_recover(
    faulty_output: &AccTensor,
    attribution: &Attribution,
    fpt: &BTreeSet<PECoord>,
    input: &Tensor,
    weights: &Weights,
    stride: u32,
) -> Result<AccTensor, EmulatorError> {
    for pe in fpt {
        if pe.row >= attribution.rows || pe.col >= attribution.cols {
            return Err(EmulatorError::FptOutOfBounds {
                pe: *pe,
                rows: attribution.rows,
                cols: attribution.cols,
            });
        }
    }
    let mut out = faulty_output.clone();
    for m in 0..out.channels {
        for oy in 0..out.height {
            for ox in 0..out.width {
                if fpt.contains(&attribution.owner(m, oy, ox)) {
                    out.set(m, oy, ox, clean_output(input, weights, stride, m, oy, ox));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum EmulatorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("fault table entry {pe} outside the {rows}x{cols} array")]
    FptOutOfBounds { pe: PECoord, rows: u32, cols: u32 },
}
