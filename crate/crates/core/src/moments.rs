use crate::error::{Error, Result};

/// Weighted mean, standard deviation and Fisher skewness of a discrete
/// distribution. Weights must be non-negative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
}

pub fn weighted_moments(x: &[f64], w: &[f64], min_std: f64) -> Result<Moments> {
    if x.len() != w.len() || x.is_empty() {
        return Err(Error::InvalidParams("moment inputs must be non-empty and of equal length".into()));
    }
    let mean: f64 = x.iter().zip(w).map(|(x, w)| w * x).sum();
    let (m2, m3) = x.iter().zip(w).fold((0.0, 0.0), |(m2, m3), (x, w)| {
        let d = x - mean;
        (m2 + w * d * d, m3 + w * d * d * d)
    });
    let std_dev = m2.sqrt();
    if !(std_dev >= min_std) {
        return Err(Error::Degenerate(format!("standard deviation {std_dev} below {min_std}")));
    }
    Ok(Moments {
        mean,
        std_dev,
        skewness: m3 / (std_dev * std_dev * std_dev),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_masses() {
        let m = weighted_moments(&[0.0, 1.0], &[0.75, 0.25], 1e-9).unwrap();
        assert!((m.mean - 0.25).abs() < 1e-15);
        assert!((m.std_dev * m.std_dev - 0.1875).abs() < 1e-15);
        assert!((m.skewness - 2.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spike() {
        assert!(matches!(weighted_moments(&[2.0, 2.0], &[0.5, 0.5], 1e-9), Err(Error::Degenerate(_))));
    }
}
