//! Rigorous upper bounds on the interpolation sampling error of rotation and
//! scaling.
//!
//! For anchors `α₁, …, α_N` covering `[a, b]`, the bound `M` satisfies
//! `max_{α∈[a,b]} min_i ‖φ(x,α) − φ(x,αᵢ)‖₂² ≤ M`. Each outer interval between
//! consecutive anchors is subdivided into `R` inner points; the squared distance
//! `gᵢ(α) = ‖φ(x,α) − φ(x,αᵢ)‖₂²` is evaluated exactly there and bounded in
//! between through a per-interval Lipschitz constant.
//!
//! Per-pixel Lipschitz constants follow from the bilinear interpolation lemma:
//! along a source curve `ρ`, `|d/dt Q_x(ρ(t))| ≤ √2‖ρ̇‖·m_Δ` where `m_Δ` is the
//! largest corner spread over the cells the curve visits. For
//! `gᵏʳˢ = (φ(θ) − φ(anchor))²` this gives `2·L_pix·A` with
//! `A = min(value range over the visited cells, L_pix·width)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::tensor::{l2_distance_sq, ImageTensor};
use crate::transforms::{in_rotation_disk, rotate, rotation_source, scale, scaling_source};

const SQRT_2: f64 = core::f64::consts::SQRT_2;
/// Distance to a grid line under which both adjacent cells are considered visited.
const GRID_EPS: f64 = 1e-9;
/// Relative offset used to step past a scaling discontinuity.
const DISC_EPS: f64 = 1e-9;

/// Which geometric transform a grid or trajectory refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AliasKind {
    Rotation,
    Scaling,
}

impl AliasKind {
    pub fn apply(self, x: &ImageTensor, t: f64) -> Result<ImageTensor> {
        match self {
            AliasKind::Rotation => Ok(rotate(x, t)),
            AliasKind::Scaling => scale(x, t),
        }
    }
}

/// Anchor grid `α₁..α_N` over `[a, b]` with `R` inner points per interval.
///
/// Rotation anchors are uniform and increasing. Scaling anchors are uniform in
/// `1/α` and decrease from `b` to `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalGrid {
    pub a: f64,
    pub b: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub kind: AliasKind,
}

impl IntervalGrid {
    pub fn new(a: f64, b: f64, n_outer: usize, n_inner: usize, kind: AliasKind) -> Result<Self> {
        let g = Self { a, b, n_outer, n_inner, kind };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            bail!(Argument, "grid needs finite a < b, got [{}, {}]", self.a, self.b);
        }
        if self.n_outer < 2 || self.n_inner < 2 {
            bail!(Argument, "grid needs N >= 2 and R >= 2, got N={}, R={}", self.n_outer, self.n_inner);
        }
        if self.kind == AliasKind::Scaling && self.a <= 0.0 {
            bail!(Argument, "scaling grid needs a > 0, got {}", self.a);
        }
        Ok(())
    }

    /// `α₁, …, α_N` with exact endpoints.
    pub fn anchors(&self) -> Vec<f64> {
        let n = self.n_outer;
        let (a, b) = (self.a, self.b);
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.kind {
                    AliasKind::Rotation => a + (b - a) * f,
                    AliasKind::Scaling => a * b / (a + (b - a) * f),
                }
            })
            .collect();
        match self.kind {
            AliasKind::Rotation => {
                v[0] = a;
                v[n - 1] = b;
            }
            AliasKind::Scaling => {
                v[0] = b;
                v[n - 1] = a;
            }
        }
        v
    }

    /// `R` inner points from `lo` to `hi` (increasing, exact endpoints).
    fn inner(&self, lo: f64, hi: f64) -> Vec<f64> {
        inner_points(self.kind, lo, hi, self.n_inner)
    }
}

fn inner_points(kind: AliasKind, lo: f64, hi: f64, r: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..r)
        .map(|j| {
            let f = j as f64 / (r - 1) as f64;
            match kind {
                AliasKind::Rotation => lo + (hi - lo) * f,
                // γ = α_i α_{i+1} / (α_i + (α_{i+1} − α_i) f) with α_i = hi, α_{i+1} = lo,
                // written so that f = 0 gives lo.
                AliasKind::Scaling => lo * hi / (lo + (hi - lo) * (1.0 - f)),
            }
        })
        .collect();
    v[0] = lo;
    v[r - 1] = hi;
    v
}

/// Per-interval detail of an [`AliasingBound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBound {
    pub lo: f64,
    pub hi: f64,
    /// Lipschitz constant used on this interval (maximum over its pieces).
    pub lipschitz: f64,
    /// Upper bound on `max_{α∈[lo,hi]} min{gᵢ(α), gᵢ₊₁(α)}`.
    pub bound: f64,
    /// Scaling discontinuity inside the interval, if any.
    pub discontinuity: Option<f64>,
}

/// Upper bound `M ≥ M_S²` on the squared maximum sampling error.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasingBound {
    pub m_value: f64,
    pub sqrt_m: f64,
    /// Largest per-interval Lipschitz constant.
    pub lipschitz_l: f64,
    pub per_interval: Vec<IntervalBound>,
}

/// Integer cell `(⌊i⌋, ⌊j⌋)`.
pub type Cell = (usize, usize);

fn push_periodic(out: &mut Vec<f64>, base: f64, t1: f64, t2: f64) {
    let tau = core::f64::consts::TAU;
    let k0 = libm::ceil((t1 - base) / tau) as i64;
    let k1 = libm::floor((t2 - base) / tau) as i64;
    for k in k0..=k1 {
        let t = base + tau * k as f64;
        if t > t1 && t < t2 {
            out.push(t);
        }
    }
}

/// Parameters in `(t1, t2)` where a source coordinate crosses an integer.
fn breakpoints(kind: AliasKind, w: usize, h: usize, r: usize, s: usize, t1: f64, t2: f64) -> Vec<f64> {
    let cw = (w as f64 - 1.0) / 2.0;
    let ch = (h as f64 - 1.0) / 2.0;
    let (u, v) = (r as f64 - cw, s as f64 - ch);
    let mut out = Vec::new();
    match kind {
        AliasKind::Rotation => {
            let d = libm::sqrt(u * u + v * v);
            if d == 0.0 {
                return out;
            }
            let g = libm::atan2(v, u);
            for n in libm::floor(cw - d) as i64..=libm::ceil(cw + d) as i64 {
                let c = (n as f64 - cw) / d;
                if (-1.0..=1.0).contains(&c) {
                    let ac = libm::acos(c);
                    push_periodic(&mut out, g - ac, t1, t2);
                    push_periodic(&mut out, g + ac, t1, t2);
                }
            }
            for n in libm::floor(ch - d) as i64..=libm::ceil(ch + d) as i64 {
                let c = (n as f64 - ch) / d;
                if (-1.0..=1.0).contains(&c) {
                    let asn = libm::asin(c);
                    push_periodic(&mut out, g - asn, t1, t2);
                    push_periodic(&mut out, g - core::f64::consts::PI + asn, t1, t2);
                }
            }
        }
        AliasKind::Scaling => {
            for (off, c) in [(u, cw), (v, ch)] {
                if off == 0.0 {
                    continue;
                }
                let f_a = c + off / t1;
                let f_b = c + off / t2;
                let (lo, hi) = if f_a < f_b { (f_a, f_b) } else { (f_b, f_a) };
                for n in libm::floor(lo) as i64..=libm::ceil(hi) as i64 {
                    let den = n as f64 - c;
                    if den != 0.0 {
                        let t = off / den;
                        if t > t1 && t < t2 {
                            out.push(t);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn floors_with_slack(v: f64, moving: bool, out: &mut [i64; 2]) -> usize {
    let f = libm::floor(v);
    out[0] = f as i64;
    if !moving {
        return 1;
    }
    let frac = v - f;
    if frac < GRID_EPS {
        out[1] = f as i64 - 1;
        2
    } else if frac > 1.0 - GRID_EPS {
        out[1] = f as i64 + 1;
        2
    } else {
        1
    }
}

/// Integer cells visited by the source-coordinate curve of output pixel `(r, s)`
/// for parameters in `[t1, t2]`, clipped to the grid and sorted.
///
/// The curve is evaluated at both endpoints, at every parameter where a source
/// coordinate crosses an integer, and between consecutive crossings. Points
/// within `1e-9` of a grid line also contribute the neighboring cell.
pub fn grid_pixel_trajectory(
    x: &ImageTensor,
    kind: AliasKind,
    r: usize,
    s: usize,
    interval: (f64, f64),
) -> Result<Vec<Cell>> {
    let (t1, t2) = interval;
    if !(t1 < t2) {
        bail!(Argument, "trajectory interval needs t1 < t2, got [{t1}, {t2}]");
    }
    if kind == AliasKind::Scaling && t1 <= 0.0 {
        bail!(Argument, "scaling interval must be positive, got [{t1}, {t2}]");
    }
    if r >= x.width() || s >= x.height() {
        bail!(Argument, "pixel ({r}, {s}) outside {}x{} grid", x.width(), x.height());
    }
    Ok(trajectory_cells(x.width(), x.height(), kind, r, s, t1, t2))
}

fn trajectory_cells(w: usize, h: usize, kind: AliasKind, r: usize, s: usize, t1: f64, t2: f64) -> Vec<Cell> {
    let cw = (w as f64 - 1.0) / 2.0;
    let ch = (h as f64 - 1.0) / 2.0;
    let moving = r as f64 != cw || s as f64 != ch;
    // A scaling source coordinate is fixed when the pixel lies on the center line.
    let (move_i, move_j) = match kind {
        AliasKind::Rotation => (moving, moving),
        AliasKind::Scaling => (r as f64 != cw, s as f64 != ch),
    };
    let eval = |t: f64| match kind {
        AliasKind::Rotation => rotation_source(cw, ch, r as f64, s as f64, t),
        AliasKind::Scaling => scaling_source(cw, ch, r as f64, s as f64, t),
    };
    let bps = breakpoints(kind, w, h, r, s, t1, t2);
    let mut params = Vec::with_capacity(2 * bps.len() + 3);
    params.push(t1);
    let mut prev = t1;
    for &b in bps.iter().chain(core::iter::once(&t2)) {
        params.push(0.5 * (prev + b));
        params.push(b);
        prev = b;
    }
    let mut cells: Vec<Cell> = Vec::new();
    let (mut fi, mut fj) = ([0i64; 2], [0i64; 2]);
    for t in params {
        let (si, sj) = eval(t);
        let ni = floors_with_slack(si, move_i, &mut fi);
        let nj = floors_with_slack(sj, move_j, &mut fj);
        for &ci in &fi[..ni] {
            for &cj in &fj[..nj] {
                if ci >= 0 && cj >= 0 && (ci as usize) < w && (cj as usize) < h {
                    cells.push((ci as usize, cj as usize));
                }
            }
        }
    }
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Corner statistics over a set of cells.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CornerStats {
    max: f64,
    min: f64,
    spread: f64,
}

fn corner_stats(x: &ImageTensor, k: usize, cells: &[Cell]) -> Option<CornerStats> {
    if cells.is_empty() {
        return None;
    }
    let mut st = CornerStats { max: f64::NEG_INFINITY, min: f64::INFINITY, spread: 0.0 };
    for &(i, j) in cells {
        let (i, j) = (i as i64, j as i64);
        let c = [
            x.get_or_zero(k, i, j),
            x.get_or_zero(k, i + 1, j),
            x.get_or_zero(k, i, j + 1),
            x.get_or_zero(k, i + 1, j + 1),
        ];
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        st.max = st.max.max(hi);
        st.min = st.min.min(lo);
        st.spread = st.spread.max(hi - lo);
    }
    Some(st)
}

/// `(m̄, m_Δ)`: the largest corner value and the largest per-cell corner spread
/// over `cells`, each cell contributing its corners `(i,j), (i+1,j), (i,j+1),
/// (i+1,j+1)`. Corners outside the grid count as 0.
pub fn max_color_stats(x: &ImageTensor, k: usize, cells: &[Cell]) -> Result<(f64, f64)> {
    if k >= x.channels() {
        bail!(Argument, "channel {k} out of range");
    }
    let st = corner_stats(x, k, cells).ok_or_else(|| Error::Argument("empty cell set".into()))?;
    Ok((st.max, st.spread))
}

/// Source-curve speed bound for rotation: `‖ρ̇(θ)‖₂ = d`, the pixel's distance to
/// the center.
pub fn rotation_speed(w: usize, h: usize, r: usize, s: usize) -> f64 {
    let (cw, ch) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    libm::hypot(r as f64 - cw, s as f64 - ch)
}

/// Source-curve speed bound for scaling on `[t1, ·]`: `dist/t1²`.
pub fn scaling_speed(w: usize, h: usize, r: usize, s: usize, t1: f64) -> f64 {
    let (cw, ch) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    libm::hypot(r as f64 - cw, s as f64 - ch) / (t1 * t1)
}

fn pixel_term(x: &ImageTensor, k: usize, cells: &[Cell], speed: f64, width: f64) -> f64 {
    match corner_stats(x, k, cells) {
        None => 0.0,
        Some(st) => {
            let lp = SQRT_2 * speed * st.spread;
            if lp == 0.0 {
                return 0.0;
            }
            let amp = (st.max - st.min).min(lp * width);
            2.0 * lp * amp
        }
    }
}

/// Lipschitz constant on `[t1, t2]` of `θ ↦ ‖rotate(x,θ) − rotate(x,a)‖₂²` for any
/// anchor `a ∈ [t1, t2]`.
pub fn rotation_interval_lipschitz(x: &ImageTensor, interval: (f64, f64)) -> Result<f64> {
    let (t1, t2) = interval;
    if !(t1 < t2) {
        bail!(Argument, "interval needs t1 < t2, got [{t1}, {t2}]");
    }
    let (kc, w, h) = x.shape();
    let (cw, ch) = x.center();
    let mut total = 0.0;
    for r in 0..w {
        for s in 0..h {
            if !in_rotation_disk(cw, ch, r, s) {
                continue;
            }
            let speed = rotation_speed(w, h, r, s);
            if speed == 0.0 {
                continue;
            }
            let cells = trajectory_cells(w, h, AliasKind::Rotation, r, s, t1, t2);
            for k in 0..kc {
                total += pixel_term(x, k, &cells, speed, t2 - t1);
            }
        }
    }
    Ok(total)
}

/// Lipschitz constant on `[t1, t2]` of `α ↦ ‖scale(x,α) − scale(x,a)‖₂²` for any
/// anchor `a ∈ [t1, t2]`, valid when no scaling discontinuity lies in `(t1, t2)`.
pub fn scaling_interval_lipschitz(x: &ImageTensor, interval: (f64, f64)) -> Result<f64> {
    let (t1, t2) = interval;
    if !(t1 > 0.0) {
        bail!(Argument, "scaling interval must be positive, got [{t1}, {t2}]");
    }
    if !(t1 < t2) {
        bail!(Argument, "interval needs t1 < t2, got [{t1}, {t2}]");
    }
    let (kc, w, h) = x.shape();
    let mut total = 0.0;
    for r in 0..w {
        for s in 0..h {
            let speed = scaling_speed(w, h, r, s, t1);
            if speed == 0.0 {
                continue;
            }
            let cells = trajectory_cells(w, h, AliasKind::Scaling, r, s, t1, t2);
            for k in 0..kc {
                total += pixel_term(x, k, &cells, speed, t2 - t1);
            }
        }
    }
    Ok(total)
}

fn interval_lipschitz(x: &ImageTensor, kind: AliasKind, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    match kind {
        AliasKind::Rotation => rotation_interval_lipschitz(x, (lo, hi)),
        AliasKind::Scaling => scaling_interval_lipschitz(x, (lo, hi)),
    }
}

/// Scaling factors in `[a, b]` at which some source row or column reaches the
/// image border, sorted ascending without duplicates.
pub fn scaling_discontinuities(w: usize, h: usize, a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (n, c) in [(w, (w as f64 - 1.0) / 2.0), (h, (h as f64 - 1.0) / 2.0)] {
        if c == 0.0 {
            continue;
        }
        for r in 0..n {
            let t = libm::fabs(r as f64 - c) / c;
            if t >= a && t <= b {
                out.push(t);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Bound on `max_{θ∈[lo,hi]} g(θ)` where `g(θ) = ‖φ(θ) − anchor_img‖²` is
/// `lip`-Lipschitz on `[lo, hi]`, from `g` sampled at `points`.
fn single_anchor_bound(
    x: &ImageTensor,
    kind: AliasKind,
    anchor_img: &ImageTensor,
    points: &[f64],
    lip: f64,
) -> Result<f64> {
    let g: Vec<f64> = points.iter().map(|&t| l2_distance_sq(&kind.apply(x, t)?, anchor_img)).collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for j in 0..points.len() - 1 {
        let w = points[j + 1] - points[j];
        best = best.max(0.5 * (g[j] + g[j + 1]) + 0.5 * lip * w);
    }
    Ok(best)
}

/// Computes `M ≥ M_S²` for rotation or scaling of `x` over `grid`.
///
/// Scaling intervals containing one discontinuity `t` are split: the part left
/// of `t` is bounded against the left anchor and the part from `t` on against
/// the right anchor. More than one discontinuity per interval is a
/// configuration error.
pub fn aliasing_bound(x: &ImageTensor, grid: &IntervalGrid) -> Result<AliasingBound> {
    grid.validate()?;
    let kind = grid.kind;
    let anchors = grid.anchors();
    let anchor_imgs: Vec<ImageTensor> = anchors.iter().map(|&a| kind.apply(x, a)).collect::<Result<_>>()?;
    let disc = match kind {
        AliasKind::Scaling => scaling_discontinuities(x.width(), x.height(), grid.a, grid.b),
        AliasKind::Rotation => Vec::new(),
    };
    let mut per_interval = Vec::with_capacity(anchors.len() - 1);
    for i in 0..anchors.len() - 1 {
        // (lo, lo_idx) is the smaller anchor.
        let (lo, lo_idx, hi, hi_idx) = match kind {
            AliasKind::Rotation => (anchors[i], i, anchors[i + 1], i + 1),
            AliasKind::Scaling => (anchors[i + 1], i + 1, anchors[i], i),
        };
        let inside: Vec<f64> = disc.iter().cloned().filter(|&t| t > lo && t <= hi).collect();
        let ib = match inside.as_slice() {
            [] => {
                let lip = interval_lipschitz(x, kind, lo, hi)?;
                let bound = two_anchor_bound(x, grid, lo, hi, &anchor_imgs[lo_idx], &anchor_imgs[hi_idx], lip)?;
                IntervalBound { lo, hi, lipschitz: lip, bound, discontinuity: None }
            }
            [t] => {
                let t = *t;
                let delta = DISC_EPS * t;
                // Left of t: continuous on [lo, t), bounded against the lo anchor.
                let lip_l = interval_lipschitz(x, kind, lo, t)?;
                let left = if t - delta > lo {
                    let pts = inner_points(kind, lo, t - delta, grid.n_inner);
                    single_anchor_bound(x, kind, &anchor_imgs[lo_idx], &pts, lip_l)? + lip_l * delta
                } else {
                    lip_l * (t - lo)
                };
                // From t on: continuous on [t, hi], bounded against the hi anchor.
                let lip_r = interval_lipschitz(x, kind, t, hi)?;
                let right = if t + delta < hi {
                    let pts = inner_points(kind, t + delta, hi, grid.n_inner);
                    single_anchor_bound(x, kind, &anchor_imgs[hi_idx], &pts, lip_r)? + lip_r * delta
                } else {
                    lip_r * (hi - t)
                };
                IntervalBound { lo, hi, lipschitz: lip_l.max(lip_r), bound: left.max(right), discontinuity: Some(t) }
            }
            _ => bail!(
                Config,
                "scaling interval [{lo}, {hi}] contains {} discontinuities; increase the number of anchors",
                inside.len()
            ),
        };
        per_interval.push(ib);
    }
    let m_value = per_interval.iter().map(|b| b.bound).fold(0.0, f64::max);
    let lipschitz_l = per_interval.iter().map(|b| b.lipschitz).fold(0.0, f64::max);
    Ok(AliasingBound { m_value, sqrt_m: libm::sqrt(m_value), lipschitz_l, per_interval })
}

fn two_anchor_bound(
    x: &ImageTensor,
    grid: &IntervalGrid,
    lo: f64,
    hi: f64,
    lo_img: &ImageTensor,
    hi_img: &ImageTensor,
    lip: f64,
) -> Result<f64> {
    let kind = grid.kind;
    let pts = grid.inner(lo, hi);
    let mut g_lo = vec![0.0; pts.len()];
    let mut g_hi = vec![0.0; pts.len()];
    for (j, &t) in pts.iter().enumerate() {
        let y = kind.apply(x, t)?;
        g_lo[j] = l2_distance_sq(&y, lo_img)?;
        g_hi[j] = l2_distance_sq(&y, hi_img)?;
    }
    let mut best = 0.0f64;
    for j in 0..pts.len() - 1 {
        let w = pts[j + 1] - pts[j];
        let grid_term = 0.5 * (g_lo[j] + g_lo[j + 1]).min(g_hi[j] + g_hi[j + 1]);
        let slack = match kind {
            AliasKind::Rotation => lip * w,
            AliasKind::Scaling => 0.5 * lip * w,
        };
        best = best.max(grid_term + slack);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(1, w, h, |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn grids() {
        let g = IntervalGrid::new(-0.1, 0.3, 5, 3, AliasKind::Rotation).unwrap();
        let a = g.anchors();
        assert_eq!(a.first(), Some(&-0.1));
        assert_eq!(a.last(), Some(&0.3));
        assert!(a.windows(2).all(|p| p[0] < p[1]));
        let g = IntervalGrid::new(0.5, 2.0, 7, 4, AliasKind::Scaling).unwrap();
        let a = g.anchors();
        assert_eq!(a.first(), Some(&2.0));
        assert_eq!(a.last(), Some(&0.5));
        assert!(a.windows(2).all(|p| p[0] > p[1]));
        // Uniform in 1/α.
        let inv: Vec<f64> = a.iter().map(|v| 1.0 / v).collect();
        let step = inv[1] - inv[0];
        assert!(inv.windows(2).all(|p| (p[1] - p[0] - step).abs() < 1e-12));
        let pts = g.inner(a[1], a[0]);
        assert_eq!(pts[0], a[1]);
        assert_eq!(pts[3], a[0]);
        assert!(pts.windows(2).all(|p| p[0] < p[1]));
        assert!(IntervalGrid::new(1.0, 1.0, 5, 3, AliasKind::Rotation).is_err());
        assert!(IntervalGrid::new(0.0, 1.0, 5, 3, AliasKind::Scaling).is_err());
        assert!(IntervalGrid::new(0.0, 1.0, 1, 3, AliasKind::Rotation).is_err());
    }

    #[test]
    fn center_pixel_trajectory_is_single_cell() {
        let x = ImageTensor::zeros(1, 9, 9).unwrap();
        let cells = grid_pixel_trajectory(&x, AliasKind::Rotation, 4, 4, (-0.5, 0.5)).unwrap();
        assert_eq!(cells, vec![(4, 4)]);
        let x = ImageTensor::zeros(1, 8, 6).unwrap();
        let cells = grid_pixel_trajectory(&x, AliasKind::Rotation, 3, 2, (0.0, 0.0)).err();
        assert!(cells.is_some());
    }

    /// Dense reference: floor cells of the curve sampled at 10⁵ points.
    fn dense_cells(w: usize, h: usize, kind: AliasKind, r: usize, s: usize, t1: f64, t2: f64) -> Vec<Cell> {
        let cw = (w as f64 - 1.0) / 2.0;
        let ch = (h as f64 - 1.0) / 2.0;
        let mut out = Vec::new();
        for q in 0..=100_000 {
            let t = t1 + (t2 - t1) * q as f64 / 100_000.0;
            let (si, sj) = match kind {
                AliasKind::Rotation => rotation_source(cw, ch, r as f64, s as f64, t),
                AliasKind::Scaling => scaling_source(cw, ch, r as f64, s as f64, t),
            };
            let (ci, cj) = (si.floor() as i64, sj.floor() as i64);
            if ci >= 0 && cj >= 0 && (ci as usize) < w && (cj as usize) < h {
                out.push((ci as usize, cj as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    #[test]
    fn rotation_trajectory_covers_dense_reference_and_respects_arc_bound() {
        let (w, h) = (9, 9);
        let x = ImageTensor::zeros(1, w, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r = rng.random_range(0..w);
            let s = rng.random_range(0..h);
            let t1 = rng.random_range(-3.0..3.0);
            let delta = rng.random_range(0.001..1.5);
            let cells = grid_pixel_trajectory(&x, AliasKind::Rotation, r, s, (t1, t1 + delta)).unwrap();
            for c in dense_cells(w, h, AliasKind::Rotation, r, s, t1, t1 + delta) {
                assert!(cells.binary_search(&c).is_ok(), "missing {c:?}");
            }
            let d = rotation_speed(w, h, r, s);
            if in_rotation_disk(4.0, 4.0, r, s) {
                assert!(cells.len() <= (SQRT_2 * d * delta).ceil() as usize + 4, "{} cells", cells.len());
            }
        }
    }

    #[test]
    fn scaling_trajectory_on_center_column() {
        let x = ImageTensor::zeros(1, 9, 9).unwrap();
        let cells = grid_pixel_trajectory(&x, AliasKind::Scaling, 4, 1, (0.9, 1.6)).unwrap();
        assert!(cells.iter().all(|&(i, _)| i == 4));
        assert!(cells.len() > 1);
        for c in dense_cells(9, 9, AliasKind::Scaling, 4, 1, 0.9, 1.6) {
            assert!(cells.contains(&c));
        }
    }

    #[test]
    fn scaling_trajectory_covers_dense_reference() {
        let (w, h) = (8, 7);
        let x = ImageTensor::zeros(1, w, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let r = rng.random_range(0..w);
            let s = rng.random_range(0..h);
            let t1 = rng.random_range(0.3..2.0);
            let t2 = t1 + rng.random_range(0.001..0.8);
            let cells = grid_pixel_trajectory(&x, AliasKind::Scaling, r, s, (t1, t2)).unwrap();
            for c in dense_cells(w, h, AliasKind::Scaling, r, s, t1, t2) {
                assert!(cells.binary_search(&c).is_ok());
            }
        }
    }

    #[test]
    fn color_stats() {
        let c = ImageTensor::constant(1, 4, 4, 0.6).unwrap();
        assert_eq!(max_color_stats(&c, 0, &[(0, 0), (1, 2)]).unwrap(), (0.6, 0.0));
        // (0,0)=0, (0,1)=1, (1,0)=0.2, (1,1)=0.8
        let x = ImageTensor::new(1, 2, 2, vec![0.0, 1.0, 0.2, 0.8]).unwrap();
        let y = ImageTensor::from_fn(1, 3, 3, |_, i, j| if i < 2 && j < 2 { x.get(0, i, j) } else { 0.5 }).unwrap();
        assert_eq!(max_color_stats(&y, 0, &[(0, 0)]).unwrap(), (1.0, 1.0));
        assert!(max_color_stats(&y, 0, &[]).is_err());
        // Corners outside the grid count as 0.
        let z = ImageTensor::constant(1, 2, 2, 0.7).unwrap();
        assert_eq!(max_color_stats(&z, 0, &[(1, 1)]).unwrap(), (0.7, 0.7));
    }

    #[test]
    fn color_stats_match_naive() {
        let x = random_image(3, 6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let cells: Vec<Cell> =
                (0..rng.random_range(1..8)).map(|_| (rng.random_range(0..6), rng.random_range(0..5))).collect();
            let (mut mb, mut md) = (f64::NEG_INFINITY, 0.0f64);
            for &(i, j) in &cells {
                let mut vals = vec![];
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (a, b) = (i + di, j + dj);
                    vals.push(if a < 6 && b < 5 { x.get(0, a, b) } else { 0.0 });
                }
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                mb = mb.max(hi);
                md = md.max(hi - lo);
            }
            assert_eq!(max_color_stats(&x, 0, &cells).unwrap(), (mb, md));
        }
    }

    #[test]
    fn rotation_speed_matches_finite_differences() {
        let (w, h) = (9, 7);
        let (cw, ch) = (4.0, 3.0);
        for r in 0..w {
            for s in 0..h {
                for &t in &[-1.0, 0.0, 0.4, 2.0] {
                    let e = 1e-6;
                    let (a1, a2) = rotation_source(cw, ch, r as f64, s as f64, t - e);
                    let (b1, b2) = rotation_source(cw, ch, r as f64, s as f64, t + e);
                    let fd = ((b1 - a1).powi(2) + (b2 - a2).powi(2)).sqrt() / (2.0 * e);
                    assert!((fd - rotation_speed(w, h, r, s)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn scaling_speed_quarters_when_t1_doubles() {
        for (r, s) in [(0, 0), (3, 1), (8, 8)] {
            let a = scaling_speed(9, 9, r, s, 0.6);
            let b = scaling_speed(9, 9, r, s, 1.2);
            assert!((a - 4.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_has_zero_lipschitz_and_bound() {
        let x = ImageTensor::constant(1, 9, 9, 0.5).unwrap();
        assert_eq!(rotation_interval_lipschitz(&x, (-0.1, 0.1)).unwrap(), 0.0);
        let g = IntervalGrid::new(-0.2, 0.2, 10, 5, AliasKind::Rotation).unwrap();
        assert!(aliasing_bound(&x, &g).unwrap().m_value < 1e-20);
        // Scaling a constant image is not constant (black padding), but upscaling is.
        assert_eq!(scaling_interval_lipschitz(&x, (1.1, 1.3)).unwrap(), 0.0);
        let g = IntervalGrid::new(1.05, 1.3, 10, 5, AliasKind::Scaling).unwrap();
        assert!(aliasing_bound(&x, &g).unwrap().m_value < 1e-20);
    }

    #[test]
    fn single_bright_pixel_lipschitz_is_positive() {
        let x = ImageTensor::from_fn(1, 9, 9, |_, i, j| if (i, j) == (5, 3) { 1.0 } else { 0.0 }).unwrap();
        assert!(rotation_interval_lipschitz(&x, (0.0, 0.2)).unwrap() > 0.0);
        // Far from that pixel's neighborhood the bound vanishes.
        let far = ImageTensor::from_fn(1, 9, 9, |_, i, j| if (i, j) == (0, 0) { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(rotation_interval_lipschitz(&far, (0.0, 0.2)).unwrap(), 0.0);
        assert!(scaling_interval_lipschitz(&x, (0.0, 1.0)).is_err());
    }

    fn fd_check(kind: AliasKind, seed: u64) {
        let x = random_image(seed, 9, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..5 {
            let (t1, t2) = match kind {
                AliasKind::Rotation => {
                    let t = rng.random_range(-1.0..1.0);
                    (t, t + rng.random_range(0.001..0.1))
                }
                AliasKind::Scaling => {
                    let t = rng.random_range(1.0001..1.5);
                    (t, t + rng.random_range(0.001..0.1))
                }
            };
            let lip = interval_lipschitz(&x, kind, t1, t2).unwrap();
            for anchor in [t1, t2] {
                let a_img = kind.apply(&x, anchor).unwrap();
                let g = |t: f64| l2_distance_sq(&kind.apply(&x, t).unwrap(), &a_img).unwrap();
                for _ in 0..200 {
                    let c = rng.random_range(t1..t2);
                    let d = rng.random_range(t1..t2);
                    if c == d {
                        continue;
                    }
                    let slope = (g(c) - g(d)).abs() / (c - d).abs();
                    assert!(slope <= lip * (1.0 + 1e-9) + 1e-12, "slope {slope} > {lip}");
                }
            }
        }
    }

    #[test]
    fn lipschitz_bounds_finite_differences() {
        for seed in 0..3 {
            fd_check(AliasKind::Rotation, seed);
            fd_check(AliasKind::Scaling, seed);
        }
    }

    #[test]
    fn discontinuities() {
        assert_eq!(scaling_discontinuities(3, 3, 0.4, 1.0), vec![1.0]);
        assert_eq!(scaling_discontinuities(9, 9, 0.9, 1.1), vec![1.0]);
        assert_eq!(scaling_discontinuities(9, 9, 0.3, 1.0), vec![0.5, 0.75, 1.0]);
        assert!(scaling_discontinuities(9, 9, 1.01, 1.2).is_empty());
        assert!(scaling_discontinuities(9, 9, 0.8, 0.8 + 1e-3).is_empty());
        // Solutions of (r − c)/α = ±c.
        let (w, h) = (10, 7);
        let d = scaling_discontinuities(w, h, 0.1, 1.0);
        let mut want = vec![];
        for (n, c) in [(w, 4.5f64), (h, 3.0f64)] {
            for r in 0..n {
                let t = (r as f64 - c).abs() / c;
                if (0.1..=1.0).contains(&t) {
                    want.push(t);
                }
            }
        }
        want.sort_by(f64::total_cmp);
        want.dedup();
        assert_eq!(d, want);
        assert!(d.len() <= w + h);
    }

    #[test]
    fn dense_discontinuities_are_rejected() {
        let x = random_image(5, 9, 9);
        let g = IntervalGrid::new(0.3, 1.0, 2, 3, AliasKind::Scaling).unwrap();
        assert!(matches!(aliasing_bound(&x, &g), Err(Error::Config(_))));
    }

    fn dense_max_min(x: &ImageTensor, grid: &IntervalGrid, points: usize) -> f64 {
        let anchors: Vec<ImageTensor> = grid.anchors().iter().map(|&a| grid.kind.apply(x, a).unwrap()).collect();
        let mut worst = 0.0f64;
        for q in 0..=points {
            let t = grid.a + (grid.b - grid.a) * q as f64 / points as f64;
            let y = grid.kind.apply(x, t).unwrap();
            let m = anchors.iter().map(|a| l2_distance_sq(&y, a).unwrap()).fold(f64::INFINITY, f64::min);
            worst = worst.max(m);
        }
        worst.sqrt()
    }

    #[test]
    fn bound_is_sound_on_small_grids() {
        for seed in 0..3 {
            let x = random_image(seed, 9, 9);
            let g = IntervalGrid::new(-0.05, 0.05, 20, 10, AliasKind::Rotation).unwrap();
            let b = aliasing_bound(&x, &g).unwrap();
            assert!(b.sqrt_m >= dense_max_min(&x, &g, 2000));
            let g = IntervalGrid::new(0.9, 1.1, 20, 10, AliasKind::Scaling).unwrap();
            let b = aliasing_bound(&x, &g).unwrap();
            assert!(b.per_interval.iter().any(|ib| ib.discontinuity == Some(1.0)));
            assert!(b.sqrt_m >= dense_max_min(&x, &g, 2000));
        }
    }

    #[test]
    fn rotation_bound_is_within_ten_times_brute_force() {
        let x = random_image(7, 9, 9);
        let g = IntervalGrid::new(-0.05, 0.05, 200, 50, AliasKind::Rotation).unwrap();
        let b = aliasing_bound(&x, &g).unwrap();
        let brute = dense_max_min(&x, &g, 10_000);
        assert!(b.sqrt_m >= brute);
        assert!(b.sqrt_m <= 10.0 * brute, "{} vs {}", b.sqrt_m, brute);
    }
}
