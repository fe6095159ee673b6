use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Shape of the invariant set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SetBVariant {
    /// Odd, monotone, `u = 1` for `x > 2` and `u = -1` for `x < -2`.
    WideGap,
    /// Odd, monotone, `u = 1` for `x > 1` and `u = -1` for `x < -1`.
    NarrowGap,
    /// Period `4 + 2s`: `u = 1` on `[0, 2]`, `u = -1` on `[2 + s, 4 + s]`,
    /// even about `x = 1`, antisymmetric about the midpoint `2 + s/2` of the
    /// transition `[2, 2 + s]` and monotone on it.
    Periodic { s: f64 },
}

impl SetBVariant {
    /// Half-width of the transition gap of the open variants.
    fn gap(&self) -> f64 {
        match self {
            SetBVariant::WideGap => 2.0,
            SetBVariant::NarrowGap => 1.0,
            SetBVariant::Periodic { s } => 0.5 * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetBSpec {
    pub variant: SetBVariant,
    pub tolerance: f64,
}

impl SetBSpec {
    pub fn new(variant: SetBVariant, tolerance: f64) -> Self {
        Self { variant, tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Oddness,
    Monotonicity,
    Plateau,
    Period,
    Evenness,
}

/// Worst breach of one condition and the node where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub magnitude: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Largest breach over all conditions (0 for an exact member).
    pub worst: f64,
    /// Conditions breached beyond the tolerance.
    pub violations: Vec<Violation>,
}

#[derive(Default)]
struct Worst {
    by_kind: Vec<Violation>,
}

impl Worst {
    fn note(&mut self, kind: ViolationKind, magnitude: f64, x: f64) {
        match self.by_kind.iter_mut().find(|v| v.kind == kind) {
            Some(v) if magnitude > v.magnitude => {
                v.magnitude = magnitude;
                v.x = x;
            }
            Some(_) => {}
            None => self.by_kind.push(Violation { kind, magnitude, x }),
        }
    }

    fn finish(self, tol: f64) -> Membership {
        let worst = self.by_kind.iter().fold(0.0f64, |m, v| m.max(v.magnitude));
        let violations: Vec<Violation> = self.by_kind.into_iter().filter(|v| v.magnitude > tol).collect();
        Membership {
            member: violations.is_empty(),
            worst,
            violations,
        }
    }
}

/// Linear interpolation; wraps on periodic grids, clamps otherwise.
fn interpolate(field: &Field, x: f64) -> f64 {
    let grid = field.grid();
    let n = grid.points_per_axis();
    let v = field.values();
    let t = (x + grid.extent()) / grid.spacing();
    if grid.is_periodic() {
        let t = t.rem_euclid(n as f64);
        let i = t.floor();
        let w = t - i;
        let i = i as usize % n;
        // snap to the node when the offset is round-off
        if w < 1e-9 {
            return v[i];
        }
        if w > 1.0 - 1e-9 {
            return v[(i + 1) % n];
        }
        (1.0 - w) * v[i] + w * v[(i + 1) % n]
    } else {
        let t = t.clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        if w < 1e-9 {
            return v[i];
        }
        if w > 1.0 - 1e-9 {
            return v[i + 1];
        }
        (1.0 - w) * v[i] + w * v[i + 1]
    }
}

/// Checks `field` against the invariant set described by `spec`.
pub fn set_b_membership(field: &Field, spec: &SetBSpec) -> Result<Membership> {
    let grid = field.grid();
    if grid.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dimension(),
        });
    }
    let mut w = Worst::default();
    let v = field.values();
    let n = v.len();
    let eps = 1e-9 * grid.spacing();
    match spec.variant {
        SetBVariant::WideGap | SetBVariant::NarrowGap => {
            let g = spec.variant.gap();
            for i in 0..n {
                let x = grid.coordinate(i);
                w.note(ViolationKind::Oddness, (v[i] + v[n - 1 - i]).abs(), x);
                if i + 1 < n {
                    w.note(ViolationKind::Monotonicity, v[i] - v[i + 1], x);
                }
                if x > g + eps {
                    w.note(ViolationKind::Plateau, (v[i] - 1.0).abs(), x);
                } else if x < -g - eps {
                    w.note(ViolationKind::Plateau, (v[i] + 1.0).abs(), x);
                }
            }
        }
        SetBVariant::Periodic { s } => {
            if !grid.is_periodic() {
                return Err(Error::invalid("the periodic set needs a periodic grid"));
            }
            let period = 4.0 + 2.0 * s;
            let cycles = grid.period() / period;
            if (cycles - cycles.round()).abs() > 1e-9 || cycles.round() < 1.0 {
                return Err(Error::invalid(format!(
                    "grid period {} is not a multiple of 4 + 2s = {period}",
                    grid.period()
                )));
            }
            let centre = 2.0 + 0.5 * s;
            for (i, &u) in v.iter().enumerate().take(n) {
                let x = grid.coordinate(i);
                let y = x.rem_euclid(period);
                w.note(ViolationKind::Period, (interpolate(field, x + period) - u).abs(), x);
                w.note(ViolationKind::Evenness, (interpolate(field, 2.0 - x) - u).abs(), x);
                let on = |a: f64, b: f64| y >= a - eps && y <= b + eps;
                if on(0.0, 2.0) || y >= period - eps {
                    w.note(ViolationKind::Plateau, (u - 1.0).abs(), x);
                } else if on(2.0 + s, 4.0 + s) {
                    w.note(ViolationKind::Plateau, (u + 1.0).abs(), x);
                }
                if on(2.0, 2.0 + s) {
                    let mirror = interpolate(field, x + 2.0 * (centre - y));
                    w.note(ViolationKind::Oddness, (u + mirror).abs(), x);
                    let next = interpolate(field, x + grid.spacing());
                    if y + grid.spacing() <= 2.0 + s + eps {
                        w.note(ViolationKind::Monotonicity, next - u, x);
                    }
                } else if on(4.0 + s, period) {
                    let next = interpolate(field, x + grid.spacing());
                    if y + grid.spacing() <= period + eps {
                        w.note(ViolationKind::Monotonicity, u - next, x);
                    }
                }
            }
        }
    }
    Ok(w.finish(spec.tolerance))
}

/// Odd monotone profile `P(t)`, `t >= 0`: rises from `P(0+) = j0` to `1`
/// through jumps (or ramps) at sorted random knots in `[0, gap)`.
struct Profile {
    knots: Vec<f64>,
    /// `levels[i]` is the value just after `knots[i]`.
    levels: Vec<f64>,
    origin: f64,
    gap: f64,
    ramps: bool,
    /// Whether `P(gap) = 1` (closed plateau) rather than the last level.
    closed: bool,
}

impl Profile {
    fn draw(rng: &mut ChaCha8Rng, gap: f64, closed: bool) -> Self {
        let count = rng.random_range(0..=8usize);
        let mut knots: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * gap).collect();
        knots.sort_by(f64::total_cmp);
        // weights: origin jump, one per knot, final jump at the gap edge
        let sparse = rng.random_bool(0.4);
        let mut weights: Vec<f64> = if sparse {
            let mut w = vec![0.0; count + 2];
            let hot = rng.random_range(0..count + 2);
            w[hot] = 1.0;
            w
        } else {
            (0..count + 2).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()
        };
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let origin = weights[0];
        let mut levels = Vec::with_capacity(count);
        let mut acc = origin;
        for w in &weights[1..=count] {
            acc += w;
            levels.push(acc.min(1.0));
        }
        Self {
            knots,
            levels,
            origin,
            gap,
            ramps: !sparse && rng.random_bool(0.5),
            closed,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        if t > self.gap || (self.closed && t >= self.gap) {
            return 1.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        if self.ramps {
            // piecewise linear through (0, origin), (knot_i, level_i), (gap, 1)
            let mut x0 = 0.0;
            let mut y0 = self.origin;
            for (&k, &l) in self.knots.iter().zip(&self.levels) {
                if t <= k {
                    return y0 + (l - y0) * (t - x0) / (k - x0).max(f64::MIN_POSITIVE);
                }
                x0 = k;
                y0 = l;
            }
            let end = if self.closed { 1.0 } else { y0 };
            return y0 + (end - y0) * (t - x0) / (self.gap - x0).max(f64::MIN_POSITIVE);
        }
        let passed = self.knots.iter().take_while(|&&k| k < t).count();
        if passed == 0 {
            self.origin
        } else {
            self.levels[passed - 1]
        }
    }
}

/// A random member of the set on `grid`, deterministic in `seed`.
///
/// The transition is built from sorted knots with non-negative increments
/// normalised to a total rise of 2 (1 per side) and antisymmetrised. About
/// 40% of draws put all the rise into a single jump, which are the extremal
/// members of the set.
pub fn random_member(grid: &Grid, variant: SetBVariant, seed: u64) -> Result<Field> {
    if grid.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dimension(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match variant {
        SetBVariant::WideGap | SetBVariant::NarrowGap => {
            let p = Profile::draw(&mut rng, variant.gap(), false);
            Field::from_fn(*grid, |x, _| {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * p.eval(x.abs())
                }
            })
        }
        SetBVariant::Periodic { s } => {
            if !grid.is_periodic() {
                return Err(Error::invalid("the periodic set needs a periodic grid"));
            }
            let p = Profile::draw(&mut rng, 0.5 * s, true);
            let period = 4.0 + 2.0 * s;
            let centre = 2.0 + 0.5 * s;
            let descending = move |y: f64| {
                let t = y - centre;
                if t == 0.0 {
                    0.0
                } else {
                    -t.signum() * p.eval(t.abs())
                }
            };
            Field::from_fn(*grid, move |x, _| {
                let y = x.rem_euclid(period);
                if y <= 2.0 {
                    1.0
                } else if y < 2.0 + s {
                    descending(y)
                } else if y <= 4.0 + s {
                    -1.0
                } else {
                    // mirror about x = 1 into the descending transition
                    descending((2.0 - y).rem_euclid(period))
                }
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Grid {
        Grid::new(1, 9.975, 400).unwrap()
    }

    #[test]
    fn clamp_is_narrow_member() {
        let f = Field::from_fn(line(), |x, _| x.clamp(-1.0, 1.0));
        let m = set_b_membership(&f, &SetBSpec::new(SetBVariant::NarrowGap, 1e-12)).unwrap();
        assert!(m.member, "{m:?}");
        assert!(set_b_membership(&f, &SetBSpec::new(SetBVariant::WideGap, 1e-12)).unwrap().member);
        let wide = Field::from_fn(line(), |x, _| (x / 2.0).clamp(-1.0, 1.0));
        assert!(!set_b_membership(&wide, &SetBSpec::new(SetBVariant::NarrowGap, 1e-12)).unwrap().member);
    }

    #[test]
    fn square_is_not_member() {
        let f = Field::from_fn(line(), |x, _| x * x);
        let m = set_b_membership(&f, &SetBSpec::new(SetBVariant::NarrowGap, 1e-6)).unwrap();
        assert!(!m.member);
        assert!(m.violations.iter().any(|v| v.kind == ViolationKind::Oddness));
    }

    #[test]
    fn random_members_are_members() {
        for variant in [SetBVariant::WideGap, SetBVariant::NarrowGap] {
            for seed in 0..200 {
                let f = random_member(&line(), variant, seed).unwrap();
                let m = set_b_membership(&f, &SetBSpec::new(variant, 1e-12)).unwrap();
                assert!(m.member, "{variant:?} seed {seed}: {m:?}");
            }
        }
        let torus = Grid::periodic(1, 48.0, 384).unwrap();
        let variant = SetBVariant::Periodic { s: 1.0 };
        for seed in 0..200 {
            let f = random_member(&torus, variant, seed).unwrap();
            let m = set_b_membership(&f, &SetBSpec::new(variant, 1e-12)).unwrap();
            assert!(m.member, "seed {seed}: {m:?}");
        }
    }

    #[test]
    fn periodic_rejects_shifted_pattern() {
        let torus = Grid::periodic(1, 48.0, 384).unwrap();
        let variant = SetBVariant::Periodic { s: 1.0 };
        let f = random_member(&torus, variant, 3).unwrap();
        let shifted = Field::from_fn(torus, |x, _| interpolate(&f, x - 1.5));
        assert!(!set_b_membership(&shifted, &SetBSpec::new(variant, 1e-6)).unwrap().member);
        let wrong = Grid::periodic(1, 50.0, 400).unwrap();
        assert!(set_b_membership(&Field::zeros(wrong), &SetBSpec::new(variant, 1e-6)).is_err());
    }
}
