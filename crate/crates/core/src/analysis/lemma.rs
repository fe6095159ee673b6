use serde::Serialize;

use super::setb::SetBVariant;
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// The invariant-set lemmas for the saturation response with `b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma {
    /// `int K >= 2`, symmetric, non-negative, support in `[-2, 2]`.
    Positive1,
    /// As `Positive1`, plus non-increasing on `x > 0`.
    Positive2,
    /// `int_0^2 K+ >= 1 + int K-`, `K+` non-increasing.
    SmallInhibition1,
    /// `int_0^2 K+ >= 1 + int_2^{2+s} K-`, `K+` non-increasing, and the
    /// cumulative bound `int_0^t K+ >= int_2^{2+t} K-` for `t` in `[0, 2]`.
    SmallInhibition2,
    /// `int K <= -2`, `K <= 0` on the bands `2 <= |x| <= 2 + s`, `s < 2`.
    Negative,
}

impl Lemma {
    pub const ALL: [Lemma; 5] = [
        Lemma::Positive1,
        Lemma::Positive2,
        Lemma::SmallInhibition1,
        Lemma::SmallInhibition2,
        Lemma::Negative,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Lemma::Positive1 => "Positive1",
            Lemma::Positive2 => "Positive2",
            Lemma::SmallInhibition1 => "SmallInhibition1",
            Lemma::SmallInhibition2 => "SmallInhibition2",
            Lemma::Negative => "Negative",
        }
    }

    pub fn parse(name: &str) -> Option<Lemma> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.tag().eq_ignore_ascii_case(name))
    }

    /// The invariant set the lemma is stated for.
    pub fn set_b(&self, kernel: &Kernel) -> SetBVariant {
        match self {
            Lemma::Positive1 => SetBVariant::WideGap,
            Lemma::Positive2 | Lemma::SmallInhibition1 | Lemma::SmallInhibition2 => SetBVariant::NarrowGap,
            Lemma::Negative => SetBVariant::Periodic {
                s: kernel.negative_band_width(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub hypotheses: Vec<Hypothesis>,
    pub applicable: bool,
}

impl LemmaReport {
    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }
}

// relative slack for closed-form comparisons of quadrature sums
const ROUND: f64 = 1e-12;

fn at_least(name: &str, value: f64, threshold: f64) -> Hypothesis {
    let slack = ROUND * (1.0 + threshold.abs());
    Hypothesis {
        name: name.into(),
        value,
        threshold,
        satisfied: value >= threshold - slack,
    }
}

fn at_most(name: &str, value: f64, threshold: f64) -> Hypothesis {
    let slack = ROUND * (1.0 + threshold.abs());
    Hypothesis {
        name: name.into(),
        value,
        threshold,
        satisfied: value <= threshold + slack,
    }
}

/// Half-line view of a symmetric 1D kernel: a tap value `v[k]` holds on the
/// cell `(k - 1/2) h < |x| <= (k + 1/2) h`.
struct HalfLine {
    taps: Vec<f64>,
    pos: Vec<f64>,
    neg: Vec<f64>,
    h: f64,
}

impl HalfLine {
    fn new(kernel: &Kernel) -> HalfLine {
        let r = kernel.radius();
        let half = |k: &Kernel| k.samples()[r..].to_vec();
        HalfLine {
            taps: half(kernel),
            pos: half(&kernel.positive_part()),
            neg: half(&kernel.negative_part()),
            h: kernel.spacing(),
        }
    }

    fn x(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    fn value_at(&self, x: f64) -> f64 {
        let k = (x.abs() / self.h).round() as usize;
        self.taps.get(k).copied().unwrap_or(0.0)
    }

    /// `int_lo^hi v(y) dy` for `0 <= lo <= hi`, exact for the piecewise-constant reconstruction.
    fn integrate(&self, v: &[f64], lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &val) in v.iter().enumerate() {
            let a = (self.x(k) - 0.5 * self.h).max(0.0);
            let b = self.x(k) + 0.5 * self.h;
            acc += val * (b.min(hi) - a.max(lo)).max(0.0);
        }
        acc
    }

    /// Largest `|x_k|` with a non-zero tap in `v` (0 if none).
    fn reach(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(k, _)| self.x(k))
            .fold(0.0, f64::max)
    }

    /// Smallest `|x_k|` with a non-zero tap in `v` (infinity if none).
    fn start(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(k, _)| self.x(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest increase `v[k+1] - v[k]` along `x > 0`.
    fn worst_increase(v: &[f64]) -> f64 {
        v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..=self.taps.len()).map(|k| (k as f64 - 0.5) * self.h).collect()
    }
}

/// Evaluates the hypotheses of `lemma` for `kernel` (as the kernel of `T`
/// with `f(x) = clamp(x, -1, 1)`). Support shapes carry `h/2` slack because
/// a cell-averaged tap may straddle a band edge.
pub fn check_lemma_hypotheses(kernel: &Kernel, lemma: Lemma) -> Result<LemmaReport> {
    if kernel.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: kernel.dimension(),
        });
    }
    let half = HalfLine::new(kernel);
    let h = kernel.spacing();
    let slack = 0.5 * h;
    let s = kernel.negative_band_width();
    let total = kernel.integral();
    let pos_total = kernel.positive_part().integral();
    let neg_total = kernel.negative_part().integral();
    let symmetric = Hypothesis {
        name: "symmetric".into(),
        value: if kernel.is_symmetric() { 0.0 } else { 1.0 },
        threshold: 0.0,
        satisfied: kernel.is_symmetric(),
    };
    let positive_support = at_most("positive_support", half.reach(&half.pos), 2.0 + slack);
    let negative_support = || {
        let inner = half.start(&half.neg);
        let outer = half.reach(&half.neg);
        // distance by which the negative taps leave [2, 2 + s]
        let excursion = if inner.is_finite() {
            (2.0 - inner).max(outer - (2.0 + s)).max(0.0)
        } else {
            0.0
        };
        at_most("negative_support", excursion, slack)
    };
    let min_sample = kernel.samples().iter().copied().fold(f64::INFINITY, f64::min);
    let max_sample = kernel.samples().iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let hypotheses = match lemma {
        Lemma::Positive1 | Lemma::Positive2 => {
            let mut v = vec![
                at_least("integral", total, 2.0),
                symmetric,
                at_least("non_negative", min_sample, 0.0),
                positive_support,
            ];
            if lemma == Lemma::Positive2 {
                v.push(at_most("non_increasing", HalfLine::worst_increase(&half.taps), 0.0));
            }
            v
        }
        Lemma::SmallInhibition1 => vec![
            at_least("positive_mass", 0.5 * pos_total, 1.0 + neg_total),
            symmetric,
            at_most("positive_part_non_increasing", HalfLine::worst_increase(&half.pos), 0.0),
            positive_support,
            negative_support(),
        ],
        Lemma::SmallInhibition2 => {
            // G(t) = int_0^t K+ - int_2^{2+t} K-, piecewise linear in t
            let mut ts: Vec<f64> = half.breakpoints();
            ts.extend(half.breakpoints().into_iter().map(|b| b - 2.0));
            ts.push(0.0);
            ts.push(2.0);
            let worst = ts
                .into_iter()
                .filter(|t| (0.0..=2.0).contains(t))
                .map(|t| half.integrate(&half.pos, 0.0, t) - half.integrate(&half.neg, 2.0, 2.0 + t))
                .fold(f64::INFINITY, f64::min);
            vec![
                at_least("positive_mass", 0.5 * pos_total, 1.0 + 0.5 * neg_total),
                symmetric,
                at_most("positive_part_non_increasing", HalfLine::worst_increase(&half.pos), 0.0),
                positive_support,
                negative_support(),
                at_least("cumulative", worst, 0.0),
            ]
        }
        Lemma::Negative => {
            let centre = 2.0 + 0.5 * s;
            // L1 distance between K on the band and its mirror image about the band centre
            let mut cuts = half.breakpoints();
            cuts.extend(half.breakpoints().into_iter().map(|b| 2.0 * centre - b));
            cuts.retain(|c| (2.0 - h..=2.0 + s + h).contains(c));
            cuts.push(2.0 - h);
            cuts.push(2.0 + s + h);
            cuts.sort_by(f64::total_cmp);
            let asymmetry: f64 = cuts
                .windows(2)
                .map(|w| {
                    let m = 0.5 * (w[0] + w[1]);
                    (half.value_at(m) - half.value_at(2.0 * centre - m)).abs() * (w[1] - w[0])
                })
                .sum();
            vec![
                at_most("integral", total, -2.0),
                at_most("non_positive", max_sample, 0.0),
                symmetric,
                negative_support(),
                Hypothesis {
                    name: "band_width".into(),
                    value: s,
                    threshold: 2.0,
                    satisfied: s > 0.0 && s < 2.0,
                },
                at_most("band_symmetric", asymmetry, 2.0 * h * kernel.max_abs()),
            ]
        }
    };
    let applicable = hypotheses.iter().all(|h| h.satisfied);
    Ok(LemmaReport {
        lemma,
        hypotheses,
        applicable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Band, KernelSpec};

    fn bands(b: Vec<Band>, h: f64) -> Kernel {
        KernelSpec::bands(b).sample(1, h).unwrap()
    }

    #[test]
    fn uniform_kernel() {
        let k = bands(vec![Band::new(0.0, 2.0, 0.6)], 0.05);
        let r1 = check_lemma_hypotheses(&k, Lemma::Positive1).unwrap();
        assert!((r1.hypothesis("integral").unwrap().value - 2.4).abs() < 1e-12);
        assert!(r1.applicable);
        // constant samples count as non-increasing
        assert!(check_lemma_hypotheses(&k, Lemma::Positive2).unwrap().applicable);
    }

    #[test]
    fn hat_fails_integral() {
        let k = KernelSpec::hat(0.75, 2.0).sample(1, 0.05).unwrap();
        let r = check_lemma_hypotheses(&k, Lemma::Positive1).unwrap();
        assert!((r.hypothesis("integral").unwrap().value - 1.5).abs() < 1e-9);
        assert!(!r.applicable);
    }

    #[test]
    fn negative_band() {
        let k = bands(vec![Band::new(2.0, 3.0, -1.1)], 0.125);
        let r = check_lemma_hypotheses(&k, Lemma::Negative).unwrap();
        assert!((r.hypothesis("integral").unwrap().value + 2.2).abs() < 1e-12);
        assert!(r.applicable, "{r:?}");
        let weak = bands(vec![Band::new(2.0, 3.0, -0.9)], 0.125);
        assert!(!check_lemma_hypotheses(&weak, Lemma::Negative).unwrap().applicable);
        let lopsided = bands(vec![Band::new(2.0, 2.5, -3.0), Band::new(2.5, 3.0, -1.0)], 0.125);
        let r = check_lemma_hypotheses(&lopsided, Lemma::Negative).unwrap();
        assert!(!r.hypothesis("band_symmetric").unwrap().satisfied);
    }

    #[test]
    fn ring_is_not_decreasing() {
        let k = bands(vec![Band::new(1.0, 2.0, 1.2)], 0.05);
        assert!(check_lemma_hypotheses(&k, Lemma::Positive1).unwrap().applicable);
        let r = check_lemma_hypotheses(&k, Lemma::Positive2).unwrap();
        assert!(!r.hypothesis("non_increasing").unwrap().satisfied);
    }

    #[test]
    fn small_inhibition_variants() {
        let ok = bands(vec![Band::new(0.0, 2.0, 0.8), Band::new(2.0, 3.0, -0.1)], 0.05);
        assert!(check_lemma_hypotheses(&ok, Lemma::SmallInhibition1).unwrap().applicable);
        let only_second = bands(vec![Band::new(0.0, 2.0, 0.7), Band::new(2.0, 3.0, -0.3)], 0.05);
        assert!(!check_lemma_hypotheses(&only_second, Lemma::SmallInhibition1).unwrap().applicable);
        assert!(check_lemma_hypotheses(&only_second, Lemma::SmallInhibition2).unwrap().applicable);
        let steep = bands(vec![Band::new(0.0, 2.0, 0.6), Band::new(2.0, 2.2, -0.9)], 0.05);
        let r = check_lemma_hypotheses(&steep, Lemma::SmallInhibition2).unwrap();
        assert!(r.hypothesis("positive_mass").unwrap().satisfied);
        let c = r.hypothesis("cumulative").unwrap();
        assert!(!c.satisfied);
        // continuum minimum of 0.6 t - 0.9 min(t, 0.2) is -0.06 at t = 0.2
        assert!((c.value + 0.06).abs() < 0.05 * 0.9);
    }

    #[test]
    fn rejects_2d() {
        let k = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0)]).sample(2, 0.5).unwrap();
        assert!(check_lemma_hypotheses(&k, Lemma::Positive1).is_err());
    }
}
