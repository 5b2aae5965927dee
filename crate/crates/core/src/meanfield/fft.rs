use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2D FFT on row-major `M × M` buffers (rows, transpose, rows, transpose).
#[derive(Clone)]
pub struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("m", &self.m).finish()
    }
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            m,
            forward,
            inverse,
            scratch: vec![Complex64::default(); len],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    fn transpose(&self, buf: &mut [Complex64]) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                buf.swap(i * m + j, j * m + i);
            }
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.m * self.m);
        self.forward.process_with_scratch(buf, &mut self.scratch);
        self.transpose(buf);
        self.forward.process_with_scratch(buf, &mut self.scratch);
        self.transpose(buf);
    }

    /// Inverse transform including the `1/M²` normalization.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.m * self.m);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        self.transpose(buf);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        self.transpose(buf);
        let s = 1.0 / (self.m * self.m) as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }
}
