//! Compactly supported radial kernels sampled on the simulation lattice.
//!
//! Samples are cell averages: the tap at offset `k` stores the mean of the
//! continuum kernel over `[k - h/2, k + h/2]^d`. For piecewise-constant
//! profiles in 1D this is exact, so `sum(samples) * h` reproduces the
//! closed-form integral on any lattice. Taps whose cell touches the support
//! are stored, hence the tap window extends at most `h/2` past
//! `support_half_width`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape family tag carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    K1,
    K2,
    K3,
    K4,
    K5,
    #[serde(rename = "custom")]
    Custom,
}

/// A radial band: the kernel equals `value` for `inner < |x| <= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub inner: f64,
    pub outer: f64,
    pub value: f64,
}

impl Band {
    pub fn new(inner: f64, outer: f64, value: f64) -> Self {
        Self {
            inner,
            outer,
            value,
        }
    }
}

/// Amplitudes and band radii for the named families.
///
/// `activation` (A) and `inhibition` (B) are non-negative magnitudes;
/// `inner <= outer <= far` are radii. `far` is only used by K3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub activation: f64,
    pub inhibition: f64,
    pub inner: f64,
    pub outer: f64,
    #[serde(default)]
    pub far: f64,
}

impl KernelParams {
    /// Desk/paper defaults per family and dimension.
    pub fn defaults(family: KernelFamily, dimension: usize) -> Self {
        let p = |activation, inhibition, inner, outer, far| KernelParams {
            activation,
            inhibition,
            inner,
            outer,
            far,
        };
        match (family, dimension) {
            (KernelFamily::K1, 1) => p(1.0, 0.25, 2.0, 4.0, 0.0),
            (KernelFamily::K2, 1) => p(1.0, 0.1, 2.0, 4.0, 0.0),
            (KernelFamily::K3, 1) => p(12.0, 0.0, 1.0, 2.0, 2.0),
            (KernelFamily::K4, 1) | (KernelFamily::K5, 1) => p(0.0, 1.1, 2.0, 3.0, 0.0),
            (KernelFamily::K1, _) => p(1.0, 3.0, 2.0, 2.4, 0.0),
            (KernelFamily::K2, _) => p(1.0, 0.3, 2.0, 3.0, 0.0),
            (KernelFamily::K3, _) => p(1.0, 0.55, 1.0, 2.0, 3.0),
            (KernelFamily::K4, _) => p(0.1, 2.0, 1.0, 3.0, 0.0),
            (KernelFamily::K5, _) => p(0.0, 0.3, 2.0, 3.0, 0.0),
            (KernelFamily::Custom, _) => p(0.0, 0.0, 0.0, 0.0, 0.0),
        }
    }
}

/// Continuum radial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// Piecewise-constant radial bands.
    Bands { bands: Vec<Band> },
    /// Triangle `height * (1 - |x| / half_width)` on `|x| <= half_width`.
    Hat { height: f64, half_width: f64 },
}

impl Profile {
    /// `(K+, K-)` as non-negative profiles with `K = K+ - K-`.
    fn split(&self) -> (Profile, Profile) {
        match self {
            Profile::Bands { bands } => {
                let part = |sign: f64| Profile::Bands {
                    bands: bands
                        .iter()
                        .filter(|b| sign * b.value > 0.0)
                        .map(|b| Band::new(b.inner, b.outer, sign * b.value))
                        .collect(),
                };
                (part(1.0), part(-1.0))
            }
            Profile::Hat { height, half_width } => {
                let hat = |h: f64| Profile::Hat {
                    height: h.max(0.0),
                    half_width: *half_width,
                };
                (hat(*height), hat(-*height))
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Profile::Bands { bands } => bands.iter().all(|b| b.value == 0.0),
            Profile::Hat { height, .. } => *height == 0.0,
        }
    }

    fn support(&self) -> f64 {
        match self {
            Profile::Bands { bands } => bands
                .iter()
                .filter(|b| b.value != 0.0)
                .fold(0.0, |m, b| m.max(b.outer)),
            Profile::Hat { half_width, .. } => *half_width,
        }
    }

    fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Bands { bands } => bands
                .iter()
                .filter(|b| (r > b.inner || (b.inner == 0.0 && r == 0.0)) && r <= b.outer)
                .map(|b| b.value)
                .sum(),
            Profile::Hat { height, half_width } => {
                if r <= *half_width {
                    height * (1.0 - r / half_width)
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean over the 1D cell `[c - h/2, c + h/2]` with `c >= 0`.
    fn cell_average_1d(&self, c: f64, h: f64) -> f64 {
        let (lo, hi) = (c - 0.5 * h, c + 0.5 * h);
        match self {
            Profile::Bands { bands } => {
                // overlap of the cell with (inner, outer] and with [-outer, -inner)
                let overlap = |a: f64, b: f64| (hi.min(b) - lo.max(a)).max(0.0);
                bands
                    .iter()
                    .map(|band| {
                        band.value
                            * (overlap(band.inner, band.outer)
                                + overlap(-band.outer, -band.inner))
                    })
                    .sum::<f64>()
                    / h
            }
            Profile::Hat { .. } => {
                const SUB: usize = 64;
                (0..SUB)
                    .map(|j| self.eval((lo + (j as f64 + 0.5) * h / SUB as f64).abs()))
                    .sum::<f64>()
                    / SUB as f64
            }
        }
    }

    /// Mean over the 2D cell centred on `(cx, cy)`, by midpoint supersampling.
    fn cell_average_2d(&self, cx: f64, cy: f64, h: f64) -> f64 {
        const SUB: usize = 16;
        let step = h / SUB as f64;
        let mut acc = 0.0;
        for j in 0..SUB {
            let y = cy - 0.5 * h + (j as f64 + 0.5) * step;
            for i in 0..SUB {
                let x = cx - 0.5 * h + (i as f64 + 0.5) * step;
                acc += self.eval(x.hypot(y));
            }
        }
        acc / (SUB * SUB) as f64
    }
}

/// A kernel family together with its continuum profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(flatten)]
    pub profile: Profile,
}

impl KernelSpec {
    /// Builds the band layout of a named family.
    ///
    /// * K1, K2: `+A` on `|x| <= p`, `-B` on `p < |x| <= q`.
    /// * K3: `+A` on `p < |x| <= q`, `-B` on `q < |x| <= m`.
    /// * K4: `-B` on `|x| <= p`, `+A` on `p < |x| <= q` in 2D; a pure
    ///   negative band `-B` on `p < |x| <= q` in 1D.
    /// * K5: `-B` on `p < |x| <= q`.
    pub fn family(family: KernelFamily, params: KernelParams, dimension: usize) -> Result<Self> {
        let KernelParams {
            activation: a,
            inhibition: b,
            inner: p,
            outer: q,
            far: m,
        } = params;
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("kernel amplitudes must be finite and non-negative"));
        }
        if !(p >= 0.0 && q >= p && q > 0.0 && q.is_finite()) {
            return Err(Error::invalid(format!(
                "kernel bands must satisfy 0 <= inner <= outer, outer > 0 (got inner={p}, outer={q})"
            )));
        }
        let bands = match family {
            KernelFamily::K1 | KernelFamily::K2 => vec![Band::new(0.0, p, a), Band::new(p, q, -b)],
            KernelFamily::K3 => {
                if !(m >= q && m.is_finite()) {
                    return Err(Error::invalid(format!(
                        "K3 requires outer <= far (got outer={q}, far={m})"
                    )));
                }
                vec![Band::new(p, q, a), Band::new(q, m, -b)]
            }
            KernelFamily::K4 if dimension == 1 => vec![Band::new(p, q, -b)],
            KernelFamily::K4 => vec![Band::new(0.0, p, -b), Band::new(p, q, a)],
            KernelFamily::K5 => vec![Band::new(p, q, -b)],
            KernelFamily::Custom => {
                return Err(Error::invalid("custom kernels take explicit bands"))
            }
        };
        Ok(Self {
            family,
            profile: Profile::Bands { bands },
        })
    }

    pub fn bands(bands: Vec<Band>) -> Self {
        Self {
            family: KernelFamily::Custom,
            profile: Profile::Bands { bands },
        }
    }

    pub fn hat(height: f64, half_width: f64) -> Self {
        Self {
            family: KernelFamily::Custom,
            profile: Profile::Hat { height, half_width },
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.profile {
            Profile::Bands { bands } => {
                if bands.is_empty() {
                    return Err(Error::invalid("kernel needs at least one band"));
                }
                for b in bands {
                    if !(b.inner >= 0.0 && b.outer >= b.inner && b.value.is_finite()) {
                        return Err(Error::invalid(format!("inconsistent band {b:?}")));
                    }
                }
            }
            Profile::Hat { height, half_width } => {
                if !(*half_width > 0.0 && height.is_finite()) {
                    return Err(Error::invalid("hat needs positive half width"));
                }
            }
        }
        Ok(())
    }

    /// Analytic integral over `R^d`, or `None` when no closed form is implemented.
    pub fn analytic_integral(&self, dimension: usize) -> Option<f64> {
        match (&self.profile, dimension) {
            (Profile::Bands { bands }, 1) => Some(
                bands
                    .iter()
                    .map(|b| 2.0 * b.value * (b.outer - b.inner))
                    .sum(),
            ),
            (Profile::Bands { bands }, _) => Some(
                bands
                    .iter()
                    .map(|b| std::f64::consts::PI * b.value * (b.outer.powi(2) - b.inner.powi(2)))
                    .sum(),
            ),
            (Profile::Hat { height, half_width }, 1) => Some(height * half_width),
            _ => None,
        }
    }

    /// Samples the profile on a lattice with spacing `spacing`.
    pub fn sample(&self, dimension: usize, spacing: f64) -> Result<Kernel> {
        self.validate()?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dimension}")));
        }
        let support = self.profile.support();
        // last tap whose cell still intersects the support
        let radius = ((support / spacing + 0.5).ceil() as usize).saturating_sub(1);
        // activation and inhibition are averaged separately so each part is exact
        let (pos, neg) = self.profile.split();
        let positive = sample_profile(&pos, dimension, spacing, radius);
        let negative = sample_profile(&neg, dimension, spacing, radius);
        let samples = positive.iter().zip(&negative).map(|(p, n)| p - n).collect();
        let negative_band_width = match &self.profile {
            Profile::Bands { bands } => bands
                .iter()
                .filter(|b| b.value < 0.0 && b.inner > 0.0)
                .map(|b| b.outer - b.inner)
                .sum(),
            Profile::Hat { .. } => 0.0,
        };
        Ok(Kernel {
            family: self.family,
            dimension,
            spacing,
            radius,
            support_half_width: support,
            negative_band_width,
            samples,
            positive,
            negative,
        })
    }
}

fn sample_profile(profile: &Profile, dimension: usize, spacing: f64, radius: usize) -> Vec<f64> {
    let width = 2 * radius + 1;
    let mut samples = vec![0.0; width.pow(dimension as u32)];
    if profile.is_zero() {
        return samples;
    }
    if dimension == 1 {
        for k in 0..=radius {
            let v = profile.cell_average_1d(k as f64 * spacing, spacing);
            samples[radius + k] = v;
            samples[radius - k] = v;
        }
    } else {
        for ky in 0..=radius {
            for kx in ky..=radius {
                let v = profile.cell_average_2d(kx as f64 * spacing, ky as f64 * spacing, spacing);
                for (a, b) in [(kx, ky), (ky, kx)] {
                    for (sx, sy) in [(1i64, 1i64), (-1, 1), (1, -1), (-1, -1)] {
                        let ix = (radius as i64 + sx * a as i64) as usize;
                        let iy = (radius as i64 + sy * b as i64) as usize;
                        samples[iy * width + ix] = v;
                    }
                }
            }
        }
    }
    samples
}

/// Samples `K(k)` on the offsets `k = i * spacing`, `|i| <= radius`, per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    dimension: usize,
    spacing: f64,
    radius: usize,
    support_half_width: f64,
    negative_band_width: f64,
    samples: Vec<f64>,
    /// `K+` and `K-` samples; `samples = positive - negative` tap by tap.
    positive: Vec<f64>,
    negative: Vec<f64>,
}

impl Kernel {
    /// Wraps explicit samples (length `(2r+1)^d`), which must be symmetric.
    pub fn from_samples(dimension: usize, spacing: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dimension}")));
        }
        let width = if dimension == 1 {
            samples.len()
        } else {
            (samples.len() as f64).sqrt().round() as usize
        };
        if width % 2 == 0 || width.pow(dimension as u32) != samples.len() {
            return Err(Error::invalid(format!(
                "{} samples do not form an odd-width {dimension}D window",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel samples must be finite"));
        }
        let radius = width / 2;
        let kernel = Self {
            family: KernelFamily::Custom,
            dimension,
            spacing,
            radius,
            support_half_width: radius as f64 * spacing,
            negative_band_width: 0.0,
            positive: samples.iter().map(|v| v.max(0.0)).collect(),
            negative: samples.iter().map(|v| (-v).max(0.0)).collect(),
            samples,
        };
        if !kernel.is_symmetric() {
            return Err(Error::invalid("kernel samples are not symmetric"));
        }
        let negative_band_width = if dimension == 1 {
            kernel.samples[radius + 1..]
                .iter()
                .filter(|v| **v < 0.0)
                .count() as f64
                * spacing
        } else {
            0.0
        };
        Ok(Self {
            negative_band_width,
            ..kernel
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Taps per side of the centre.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Taps per axis, `2 * radius + 1`.
    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn support_half_width(&self) -> f64 {
        self.support_half_width
    }

    /// Total width `s` of the negative bands away from the origin.
    pub fn negative_band_width(&self) -> f64 {
        self.negative_band_width
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Sample at signed tap offset `i` (1D).
    pub fn tap(&self, i: i64) -> f64 {
        let r = self.radius as i64;
        if i.abs() > r {
            0.0
        } else {
            self.samples[(i + r) as usize]
        }
    }

    /// Sample at signed tap offsets `(ix, iy)` (2D).
    pub fn tap2(&self, ix: i64, iy: i64) -> f64 {
        let r = self.radius as i64;
        if ix.abs() > r || iy.abs() > r {
            0.0
        } else {
            self.samples[((iy + r) as usize) * self.width() + (ix + r) as usize]
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// `sum K * h^d`.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.cell_volume()
    }

    /// `sum |K| * h^d`.
    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.cell_volume()
    }

    /// `sqrt(sum K^2 * h^d)`.
    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn with_parts(&self, positive: Vec<f64>, negative: Vec<f64>) -> Kernel {
        Kernel {
            samples: positive.iter().zip(&negative).map(|(p, n)| p - n).collect(),
            positive,
            negative,
            ..self.clone()
        }
    }

    /// `K+`: cell averages of the activation bands (sample-wise `max(K, 0)`
    /// for kernels built from raw samples). `K = K+ - K-` at every tap.
    pub fn positive_part(&self) -> Kernel {
        self.with_parts(self.positive.clone(), vec![0.0; self.samples.len()])
    }

    /// `K-`: cell averages of the inhibition bands, as a non-negative kernel.
    pub fn negative_part(&self) -> Kernel {
        self.with_parts(self.negative.clone(), vec![0.0; self.samples.len()])
    }

    pub fn scaled(&self, factor: f64) -> Kernel {
        let scale = |v: &[f64]| v.iter().map(|x| factor.abs() * x).collect::<Vec<_>>();
        let (p, n) = (scale(&self.positive), scale(&self.negative));
        let mut k = if factor >= 0.0 {
            self.with_parts(p, n)
        } else {
            self.with_parts(n, p)
        };
        // keep the exact product so scaled kernels match hand-scaled samples
        k.samples = self.samples.iter().map(|x| factor * x).collect();
        k
    }

    /// Exact mirror symmetry of every stored tap.
    pub fn is_symmetric(&self) -> bool {
        let r = self.radius as i64;
        if self.dimension == 1 {
            (0..=r).all(|i| self.tap(i) == self.tap(-i))
        } else {
            (-r..=r).all(|iy| {
                (-r..=r).all(|ix| {
                    let v = self.tap2(ix, iy);
                    v == self.tap2(-ix, iy) && v == self.tap2(ix, -iy)
                })
            })
        }
    }
}

pub fn kernel_integral(kernel: &Kernel) -> f64 {
    kernel.integral()
}

pub fn kernel_positive_part(kernel: &Kernel) -> Kernel {
    kernel.positive_part()
}

pub fn kernel_negative_part(kernel: &Kernel) -> Kernel {
    kernel.negative_part()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1_style() -> KernelSpec {
        KernelSpec::family(
            KernelFamily::K1,
            KernelParams {
                activation: 1.0,
                inhibition: 0.25,
                inner: 1.0,
                outer: 4.0,
                far: 0.0,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn k1_style_integrals_match_closed_form() {
        for h in [1.0, 0.5, 100.0 / 599.0, 50.0 / 199.0, 0.0731] {
            let k = k1_style().sample(1, h).unwrap();
            assert!((k.integral() - 0.5).abs() < 1e-12, "h={h}: {}", k.integral());
            assert!(k.is_symmetric());
        }
        // on an aligned lattice the parts separate exactly
        let k = k1_style().sample(1, 0.5).unwrap();
        assert!((k.positive_part().integral() - 2.0).abs() < 1e-12);
        assert!((k.negative_part().integral() - 1.5).abs() < 1e-12);
        assert_eq!(k1_style().analytic_integral(1), Some(0.5));
    }

    #[test]
    fn uniform_and_negative_band() {
        let uniform = KernelSpec::bands(vec![Band::new(0.0, 2.0, 0.6)]);
        let k = uniform.sample(1, 0.1253).unwrap();
        assert!((k.integral() - 2.4).abs() < 1e-12);

        let neg = KernelSpec::family(
            KernelFamily::K5,
            KernelParams {
                activation: 0.0,
                inhibition: 1.1,
                inner: 2.0,
                outer: 3.0,
                far: 0.0,
            },
            1,
        )
        .unwrap()
        .sample(1, 0.24)
        .unwrap();
        assert!((neg.integral() + 2.2).abs() < 1e-12);
        assert_eq!(neg.positive_part().integral(), 0.0);
        assert!((neg.negative_part().integral() - 2.2).abs() < 1e-12);
        assert!((neg.negative_band_width() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_kernel_parts() {
        let k = Kernel::from_samples(1, 1.0, vec![0.0; 5]).unwrap();
        assert_eq!(k.integral(), 0.0);
        assert!(k.positive_part().samples().iter().all(|v| *v == 0.0));
        assert!(k.negative_part().samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reconstruction_is_exact() {
        let k = k1_style().sample(1, 0.37).unwrap();
        let (p, n) = (k.positive_part(), k.negative_part());
        for i in 0..k.samples().len() {
            assert_eq!(p.samples()[i] - n.samples()[i], k.samples()[i]);
            assert!(p.samples()[i] >= 0.0 && n.samples()[i] >= 0.0);
        }
    }

    #[test]
    fn taps_stop_half_a_cell_past_support() {
        let k = k1_style().sample(1, 0.3).unwrap();
        let r = k.radius() as f64 * 0.3;
        assert!(r < 4.0 + 0.15 + 1e-12);
        assert!(k.tap(k.radius() as i64) != 0.0);
    }

    #[test]
    fn two_dimensional_sampling_is_symmetric() {
        let spec = KernelSpec::family(
            KernelFamily::K1,
            KernelParams::defaults(KernelFamily::K1, 2),
            2,
        )
        .unwrap();
        let k = spec.sample(2, 50.0 / 127.0).unwrap();
        assert!(k.is_symmetric());
        let exact = spec.analytic_integral(2).unwrap();
        // supersampled cell averages: quadrature error well under a percent of the mass
        let mass = k.l1_norm();
        assert!((k.integral() - exact).abs() < 0.01 * mass, "{} vs {exact}", k.integral());
    }

    #[test]
    fn hat_integral() {
        let k = KernelSpec::hat(0.75, 2.0).sample(1, 50.0 / 399.0).unwrap();
        assert!((k.integral() - 1.5).abs() < 1e-4);
    }

    #[test]
    fn rejects_inconsistent_bands() {
        let bad = KernelParams {
            activation: 1.0,
            inhibition: 0.2,
            inner: 3.0,
            outer: 2.0,
            far: 0.0,
        };
        assert!(KernelSpec::family(KernelFamily::K1, bad, 1).is_err());
        assert!(Kernel::from_samples(1, 1.0, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Kernel::from_samples(1, 1.0, vec![1.0, 2.0]).is_err());
    }
}
