//! Daubechies-4 (8-tap) discrete wavelet transform with half-sample symmetric
//! boundary extension. Coefficient layout matches the common "symmetric" mode:
//! a length-`n` input yields `floor((n + 7) / 2)` coefficients per band.

use crate::error::{Error, Result};

/// db4 reconstruction low-pass (scaling) filter.
const DB4_REC_LO: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

pub const FILTER_LEN: usize = DB4_REC_LO.len();

/// Decomposition level used for the approximation-band indicators.
pub const DEFAULT_LEVEL: usize = 4;

struct Filters {
    dec_lo: [f64; FILTER_LEN],
    dec_hi: [f64; FILTER_LEN],
    rec_lo: [f64; FILTER_LEN],
    rec_hi: [f64; FILTER_LEN],
}

fn filters() -> Filters {
    let rec_lo = DB4_REC_LO;
    let mut dec_lo = rec_lo;
    dec_lo.reverse();
    let mut rec_hi = [0.0; FILTER_LEN];
    for k in 0..FILTER_LEN {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        rec_hi[k] = sign * dec_lo[k];
    }
    let mut dec_hi = rec_hi;
    dec_hi.reverse();
    Filters {
        dec_lo,
        dec_hi,
        rec_lo,
        rec_hi,
    }
}

/// Index into `x` under half-sample symmetric extension (x[-1] = x[0], x[n] = x[n-1]).
fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Single-level analysis: returns (approximation, detail).
pub fn dwt_single(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let f = filters();
    let n = x.len();
    let out_len = (n + FILTER_LEN - 1) / 2;
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let center = 2 * k as isize + 1;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..FILTER_LEN {
            let xi = x[symmetric_index(center - j as isize, n)];
            a += f.dec_lo[j] * xi;
            d += f.dec_hi[j] * xi;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Single-level synthesis, producing `2 * len - FILTER_LEN + 2` samples.
pub fn idwt_single(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let f = filters();
    let m = approx.len();
    let out_len = (2 * m + 2).saturating_sub(FILTER_LEN);
    let mut out = vec![0.0; out_len];
    for (i, o) in out.iter_mut().enumerate() {
        // x[i] = sum_k rec[i + L - 2 - 2k] c[k]
        let shifted = i + FILTER_LEN - 2;
        let k_min = shifted.saturating_sub(FILTER_LEN - 1).div_ceil(2);
        let k_max = (shifted / 2).min(m - 1);
        let mut acc = 0.0;
        for k in k_min..=k_max {
            let tap = shifted - 2 * k;
            acc += f.rec_lo[tap] * approx[k] + f.rec_hi[tap] * detail[k];
        }
        *o = acc;
    }
    out
}

/// Multi-level decomposition: final approximation plus details ordered from the
/// finest (level 1) to the coarsest.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub approximation: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    lengths: Vec<usize>,
}

pub fn wavedec(x: &[f64], levels: usize) -> Result<Decomposition> {
    if levels == 0 {
        return Err(Error::InvalidArgument("decomposition level must be >= 1".into()));
    }
    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for level in 1..=levels {
        if current.len() < FILTER_LEN {
            return Err(Error::SignalTooShort {
                len: current.len(),
                level,
                required: FILTER_LEN,
            });
        }
        lengths.push(current.len());
        let (a, d) = dwt_single(&current);
        details.push(d);
        current = a;
    }
    Ok(Decomposition {
        approximation: current,
        details,
        lengths,
    })
}

pub fn waverec(dec: &Decomposition) -> Vec<f64> {
    let mut current = dec.approximation.clone();
    for (detail, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        current = idwt_single(&current, detail);
        current.truncate(len);
    }
    current
}
