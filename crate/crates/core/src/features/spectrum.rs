use rustfft::{num_complex::Complex, FftPlanner};

use crate::signal::Waveform;

/// One-sided amplitude spectrum of the mean-removed signal (rectangular window).
///
/// Magnitudes are amplitude-scaled: a unit sine on an exact bin shows up with
/// magnitude 1; DC and Nyquist bins are not doubled.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub resolution_hz: f64,
    len: usize,
}

impl Spectrum {
    /// Mean power of the mean-removed signal recovered from the spectrum.
    pub fn mean_power(&self) -> f64 {
        let n = self.len;
        let last = self.magnitudes.len() - 1;
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let edge = k == 0 || (n % 2 == 0 && k == last);
                if edge {
                    m * m
                } else {
                    m * m / 2.0
                }
            })
            .sum()
    }
}

pub fn spectrum(w: &Waveform) -> Spectrum {
    let n = w.len();
    let mean = w.samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = w.samples.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let resolution_hz = w.sample_rate_hz / n as f64;
    let scale = 1.0 / n as f64;
    let magnitudes = (0..bins)
        .map(|k| {
            let edge = k == 0 || (n % 2 == 0 && k == n / 2);
            let m = buf[k].norm() * scale;
            if edge {
                m
            } else {
                2.0 * m
            }
        })
        .collect();
    let frequencies_hz = (0..bins).map(|k| k as f64 * resolution_hz).collect();
    Spectrum {
        frequencies_hz,
        magnitudes,
        resolution_hz,
        len: n,
    }
}
