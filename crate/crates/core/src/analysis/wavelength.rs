use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;

/// Minimum rise of the normalised autocorrelation from its first trough to
/// the following crest for the crest to count as a period.
pub const MIN_PROMINENCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wavelength {
    /// Dominant spatial period in length units.
    pub length: f64,
    /// Normalised autocorrelation at the crest.
    pub peak: f64,
    /// Crest height above the preceding trough.
    pub prominence: f64,
}

/// Dominant period from the first autocorrelation crest after the first
/// trough. 1D uses the unbiased (circular on periodic grids) estimate; 2D
/// radially averages the FFT autocorrelation.
pub fn stripe_wavelength(field: &Field) -> Result<Wavelength> {
    let grid = field.grid();
    let mean = field.values().iter().sum::<f64>() / field.len() as f64;
    let v: Vec<f64> = field.values().iter().map(|x| x - mean).collect();
    let scale = field.norm_inf().max(1.0);
    if v.iter().all(|x| x.abs() <= 1e-9 * scale) {
        return Err(Error::NoPeak("field is constant".into()));
    }
    let rho = if grid.dimension() == 1 {
        autocorrelation_1d(&v, grid.is_periodic())
    } else {
        radial_autocorrelation_2d(&v, grid.points_per_axis(), grid.is_periodic())
    };
    let (lag, peak, prominence) = first_crest(&rho).ok_or_else(|| Error::NoPeak("no autocorrelation crest".into()))?;
    Ok(Wavelength {
        length: lag * grid.spacing(),
        peak,
        prominence,
    })
}

fn autocorrelation_1d(v: &[f64], periodic: bool) -> Vec<f64> {
    let n = v.len();
    let max_lag = n / 2;
    let c: Vec<f64> = (0..=max_lag)
        .map(|k| {
            if periodic {
                (0..n).map(|i| v[i] * v[(i + k) % n]).sum::<f64>() / n as f64
            } else {
                (0..n - k).map(|i| v[i] * v[i + k]).sum::<f64>() / (n - k) as f64
            }
        })
        .collect();
    c.iter().map(|x| x / c[0]).collect()
}

fn radial_autocorrelation_2d(v: &[f64], n: usize, periodic: bool) -> Vec<f64> {
    // zero padding to 2n turns the cyclic correlation into the linear one
    let m = if periodic { n } else { 2 * n };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut buf = vec![Complex::new(0.0, 0.0); m * m];
    for iy in 0..n {
        for ix in 0..n {
            buf[iy * m + ix].re = v[iy * n + ix];
        }
    }
    let transform = |buf: &mut Vec<Complex<f64>>, plan: &dyn rustfft::Fft<f64>| {
        for row in buf.chunks_mut(m) {
            plan.process(row);
        }
        let mut t = vec![Complex::new(0.0, 0.0); m * m];
        for r in 0..m {
            for c in 0..m {
                t[c * m + r] = buf[r * m + c];
            }
        }
        for row in t.chunks_mut(m) {
            plan.process(row);
        }
        *buf = t;
    };
    transform(&mut buf, fwd.as_ref());
    buf.iter_mut().for_each(|z| *z = Complex::new(z.norm_sqr(), 0.0));
    transform(&mut buf, inv.as_ref());
    // buf now holds the (transposed, symmetric) correlation; normalise per lag
    let max_r = n / 2;
    let mut sum = vec![0.0; max_r + 1];
    let mut count = vec![0usize; max_r + 1];
    let half = max_r as i64;
    for dy in -half..=half {
        for dx in -half..=half {
            let r = ((dx * dx + dy * dy) as f64).sqrt().round() as usize;
            if r > max_r {
                continue;
            }
            let ix = dx.rem_euclid(m as i64) as usize;
            let iy = dy.rem_euclid(m as i64) as usize;
            let raw = buf[iy * m + ix].re;
            let overlap = if periodic {
                (n * n) as f64
            } else {
                ((n - dx.unsigned_abs() as usize) * (n - dy.unsigned_abs() as usize)) as f64
            };
            sum[r] += raw / overlap;
            count[r] += 1;
        }
    }
    let c: Vec<f64> = sum.iter().zip(&count).map(|(s, &k)| s / k as f64).collect();
    c.iter().map(|x| x / c[0]).collect()
}

/// `(fractional lag, crest value, prominence)` of the first crest after the
/// first trough.
fn first_crest(rho: &[f64]) -> Option<(f64, f64, f64)> {
    let n = rho.len();
    let mut k = 1;
    while k + 1 < n && !(rho[k] <= rho[k - 1] && rho[k] <= rho[k + 1]) {
        k += 1;
    }
    let trough = *rho.get(k)?;
    let mut best: Option<usize> = None;
    for j in k + 1..n.saturating_sub(1) {
        if rho[j] >= rho[j - 1] && rho[j] > rho[j + 1]
            && rho[j] - trough >= MIN_PROMINENCE {
                best = Some(j);
                break;
            }
    }
    let j = best?;
    let (l, c, r) = (rho[j - 1], rho[j], rho[j + 1]);
    let denom = l - 2.0 * c + r;
    let offset = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    Some((j as f64 + offset.clamp(-0.5, 0.5), c, c - trough))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn pure_tone() {
        let grid = Grid::new(1, 50.0, 1001).unwrap();
        for l in [4.0, 6.0, 9.5] {
            let f = Field::from_fn(grid, |x, _| (2.0 * std::f64::consts::PI * x / l).sin());
            let w = stripe_wavelength(&f).unwrap();
            assert!((w.length - l).abs() <= grid.spacing(), "{l}: {w:?}");
        }
    }

    #[test]
    fn periodic_square_wave() {
        let grid = Grid::periodic(1, 48.0, 384).unwrap();
        let f = Field::from_fn(grid, |x, _| if (x / 3.0).floor() as i64 % 2 == 0 { 1.0 } else { -1.0 });
        let w = stripe_wavelength(&f).unwrap();
        assert!((w.length - 6.0).abs() <= grid.spacing(), "{w:?}");
    }

    #[test]
    fn stripes_in_2d() {
        let grid = Grid::new(2, 25.0, 128).unwrap();
        let f = Field::from_fn(grid, |x, y| (2.0 * std::f64::consts::PI * (0.6 * x + 0.8 * y) / 5.0).cos());
        let w = stripe_wavelength(&f).unwrap();
        assert!((w.length - 5.0).abs() <= 2.0 * grid.spacing(), "{w:?}");
    }

    #[test]
    fn constant_has_no_peak() {
        let grid = Grid::new(1, 5.0, 50).unwrap();
        let f = Field::from_values(grid, vec![0.7; 50]).unwrap();
        assert!(matches!(stripe_wavelength(&f), Err(Error::NoPeak(_))));
    }
}
