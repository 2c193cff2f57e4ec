use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub const NUM_MFCC: usize = 14;
pub const MEL_FILTERS: usize = 26;
pub const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// MFCC extractor for a fixed sample rate and window length.
///
/// Periodic Hann window, zero-padded FFT of size `next_pow2(window)`,
/// power spectrum, 26 triangular mel filters spanning 0..sr/2 (HTK mel
/// scale, edges at exact frequencies), natural log floored at 1e-10, and an
/// orthonormal DCT-II. Coefficient 0 is dropped; 1..=14 are returned.
pub struct MfccExtractor {
    window_len: usize,
    fft_size: usize,
    hann: Vec<f64>,
    // filters[m] = (first bin, weights from that bin)
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<[f64; MEL_FILTERS]>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(sample_rate: u32, window_len: usize) -> Self {
        let window_len = window_len.max(1);
        let fft_size = window_len.next_power_of_two();
        let hann = (0..window_len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / window_len as f64).cos())
            .collect();

        let sr = f64::from(sample_rate);
        let top = hz_to_mel(sr / 2.0);
        let edges: Vec<f64> = (0..MEL_FILTERS + 2)
            .map(|j| mel_to_hz(top * j as f64 / (MEL_FILTERS + 1) as f64))
            .collect();
        let bins = fft_size / 2 + 1;
        let filters = (0..MEL_FILTERS)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * sr / fft_size as f64;
                        let w = if f >= lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f <= hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => {
                        let end = weights.last().unwrap().0;
                        let mut dense = vec![0.0; end - start + 1];
                        for (k, w) in weights {
                            dense[k - start] = w;
                        }
                        (start, dense)
                    }
                    None => (0, Vec::new()),
                }
            })
            .collect();

        let n = MEL_FILTERS as f64;
        let dct = (1..=NUM_MFCC)
            .map(|k| {
                let mut row = [0.0; MEL_FILTERS];
                for (i, r) in row.iter_mut().enumerate() {
                    *r = (2.0 / n).sqrt() * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos();
                }
                row
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Self {
            window_len,
            fft_size,
            hann,
            filters,
            dct,
            fft,
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Computes the 14 cepstral coefficients of one window. Windows of a
    /// different length than the extractor was built for are truncated or
    /// zero-extended.
    pub fn compute(&self, window: &[f64]) -> [f64; NUM_MFCC] {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_size];
        for ((b, &x), &w) in buf.iter_mut().zip(window).zip(&self.hann) {
            b.re = x * w;
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.fft_size / 2 + 1].iter().map(|c| c.norm_sqr()).collect();

        let mut log_mel = [0.0; MEL_FILTERS];
        for (out, (start, weights)) in log_mel.iter_mut().zip(&self.filters) {
            let e: f64 = weights.iter().zip(&power[*start..]).map(|(w, p)| w * p).sum();
            *out = e.max(LOG_FLOOR).ln();
        }

        let mut coeffs = [0.0; NUM_MFCC];
        for (c, row) in coeffs.iter_mut().zip(&self.dct) {
            *c = row.iter().zip(&log_mel).map(|(a, b)| a * b).sum();
        }
        coeffs
    }
}

/// One-shot MFCC of a single window.
pub fn mfcc(window: &[f64], sample_rate: u32) -> [f64; NUM_MFCC] {
    MfccExtractor::new(sample_rate, window.len()).compute(window)
}
