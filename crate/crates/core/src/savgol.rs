//! Savitzky-Golay smoothing on uniformly spaced samples.
//!
//! Interior samples use the symmetric least-squares kernel. The first and
//! last half-windows are taken from the polynomial fitted to the first and
//! last full window, so polynomials of degree `<= order` are reproduced
//! exactly everywhere.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    window: usize,
    /// Hat matrix of the local polynomial fit; row `j` evaluates the fitted
    /// polynomial at window position `j`.
    hat: DMatrix<f64>,
}

impl SavitzkyGolay {
    pub fn new(window: usize, order: usize) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(Error::Config(format!("smoothing window must be odd, got {window}")));
        }
        if window <= order + 1 {
            return Err(Error::Config(format!(
                "smoothing window {window} must exceed polynomial order {order} + 1"
            )));
        }
        let half = (window / 2) as f64;
        let design = DMatrix::from_fn(window, order + 1, |i, k| {
            ((i as f64 - half) / half).powi(k as i32)
        });
        let q = design.qr().q();
        let hat = &q * q.transpose();
        Ok(Self { window, hat })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn smooth(&self, data: &[f64]) -> Result<Vec<f64>> {
        let n = self.window;
        let m = n / 2;
        if data.len() < n {
            return Err(Error::TooFewSamples {
                required: n,
                got: data.len(),
            });
        }
        let apply = |row: usize, seg: &[f64]| -> f64 {
            self.hat.row(row).iter().zip(seg).map(|(h, x)| h * x).sum()
        };
        let mut out = Vec::with_capacity(data.len());
        let head = &data[..n];
        out.extend((0..m).map(|j| apply(j, head)));
        out.extend(data.windows(n).map(|seg| apply(m, seg)));
        let tail = &data[data.len() - n..];
        out.extend((m + 1..n).map(|j| apply(j, tail)));
        Ok(out)
    }
}

/// Central differences on a uniform grid, one-sided at the ends.
pub fn gradient(data: &[f64], step: f64) -> Vec<f64> {
    let n = data.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| match k {
                0 => (data[1] - data[0]) / step,
                k if k == n - 1 => (data[n - 1] - data[n - 2]) / step,
                k => (data[k + 1] - data[k - 1]) / (2.0 * step),
            })
            .collect(),
    }
}
