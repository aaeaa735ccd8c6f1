//! Slow, independent reference implementations used by the test suites to
//! cross-check the production code. Nothing here is tuned for speed.

use crate::geometry::{Point3, Ray3};
use crate::hand::PinchConfig;
use crate::selector::Candidate;
use crate::scene::ObjectId;

/// Distance from `p` to the line of `ray` by sampling `samples + 1` evenly
/// spaced parameters in `[-r, r]`, `r = |p - origin|`. Returns `(distance, t)`
/// of the best sample.
pub fn point_ray_distance_sampled(p: Point3, ray: &Ray3, samples: u32) -> (f64, f64) {
    let reach = p.distance(ray.origin).max(1e-12);
    let step = 2.0 * reach / f64::from(samples);
    (0..=samples)
        .map(|k| {
            let t = -reach + step * f64::from(k);
            (p.distance(ray.at(t)), t)
        })
        .fold((f64::INFINITY, 0.0), |best, cur| if cur.0 < best.0 { cur } else { best })
}

/// Filter-then-argmin over `(id, distance, t)` triples.
pub fn nearest_by_filter(objects: &[(ObjectId, f64, f64)], min_t: f64, max_ray_distance: f64) -> Option<Candidate> {
    let mut kept: Vec<&(ObjectId, f64, f64)> =
        objects.iter().filter(|o| o.2 > min_t && o.1 <= max_ray_distance).collect();
    kept.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    kept.first().map(|o| Candidate { id: o.0, distance: o.1, t: o.2 })
}

/// Click frames of a pinch metric trace, found by scanning for windows
/// rather than by stepping a state machine.
///
/// A click fires at frame `i` when the `dwell` frames ending at `i` are all
/// below `engage`, none of them precede the most recent release, and the
/// hand is not already pinched. A pinch that started at click frame `c` is
/// released at the first later frame above `release`, or at the last frame
/// of the first run of `dwell` missing frames after `c`.
pub fn pinch_clicks_reference(metrics: &[Option<f64>], cfg: &PinchConfig) -> Vec<usize> {
    let d = cfg.dwell_frames as usize;
    let below = |m: Option<f64>| matches!(m, Some(v) if v < cfg.engage);
    let mut clicks = Vec::new();
    // First frame that may open a new window.
    let mut window_start = 0usize;
    let mut i = 0usize;
    while i < metrics.len() {
        let ready = i + 1 >= d && i + 1 - d >= window_start && metrics[i + 1 - d..=i].iter().all(|&m| below(m));
        if !ready {
            i += 1;
            continue;
        }
        clicks.push(i);
        // Find the release.
        let mut j = i + 1;
        let mut release = None;
        while j < metrics.len() {
            if matches!(metrics[j], Some(v) if v > cfg.release) {
                release = Some(j);
                break;
            }
            if j + 1 >= d && j + 1 - d > i && metrics[j + 1 - d..=j].iter().all(Option::is_none) {
                release = Some(j);
                break;
            }
            j += 1;
        }
        match release {
            Some(r) => {
                window_start = r + 1;
                i = r + 1;
            }
            None => break,
        }
    }
    clicks
}

/// Sums of squares of a fully within-subject 2×2 design computed from
/// explicit marginal means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectAnova {
    pub ss_a: f64,
    pub ss_b: f64,
    pub ss_ab: f64,
    pub ss_s: f64,
    pub ss_as: f64,
    pub ss_bs: f64,
    pub ss_abs: f64,
    pub ss_total: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub f_ab: f64,
}

pub fn anova_direct(y: &[[[f64; 2]; 2]]) -> DirectAnova {
    let n = y.len();
    let nf = n as f64;
    let g = y.iter().flatten().flatten().sum::<f64>() / (4.0 * nf);
    let mut m_a = [0.0; 2];
    let mut m_b = [0.0; 2];
    let mut m_ab = [[0.0; 2]; 2];
    for s in y {
        for a in 0..2 {
            for b in 0..2 {
                m_a[a] += s[a][b] / (2.0 * nf);
                m_b[b] += s[a][b] / (2.0 * nf);
                m_ab[a][b] += s[a][b] / nf;
            }
        }
    }
    let m_s: Vec<f64> = y.iter().map(|s| (s[0][0] + s[0][1] + s[1][0] + s[1][1]) / 4.0).collect();
    let m_as: Vec<[f64; 2]> = y.iter().map(|s| [(s[0][0] + s[0][1]) / 2.0, (s[1][0] + s[1][1]) / 2.0]).collect();
    let m_bs: Vec<[f64; 2]> = y.iter().map(|s| [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0]).collect();

    let mut r = DirectAnova {
        ss_a: 0.0,
        ss_b: 0.0,
        ss_ab: 0.0,
        ss_s: 0.0,
        ss_as: 0.0,
        ss_bs: 0.0,
        ss_abs: 0.0,
        ss_total: 0.0,
        f_a: f64::NAN,
        f_b: f64::NAN,
        f_ab: f64::NAN,
    };
    for k in 0..2 {
        r.ss_a += 2.0 * nf * (m_a[k] - g).powi(2);
        r.ss_b += 2.0 * nf * (m_b[k] - g).powi(2);
    }
    for a in 0..2 {
        for b in 0..2 {
            r.ss_ab += nf * (m_ab[a][b] - m_a[a] - m_b[b] + g).powi(2);
        }
    }
    for (i, s) in y.iter().enumerate() {
        r.ss_s += 4.0 * (m_s[i] - g).powi(2);
        for k in 0..2 {
            r.ss_as += 2.0 * (m_as[i][k] - m_a[k] - m_s[i] + g).powi(2);
            r.ss_bs += 2.0 * (m_bs[i][k] - m_b[k] - m_s[i] + g).powi(2);
        }
        for a in 0..2 {
            for b in 0..2 {
                let v = s[a][b];
                r.ss_total += (v - g).powi(2);
                let resid = v - m_ab[a][b] - m_as[i][a] - m_bs[i][b] + m_a[a] + m_b[b] + m_s[i] - g;
                r.ss_abs += resid.powi(2);
            }
        }
    }
    let df_err = nf - 1.0;
    r.f_a = r.ss_a / (r.ss_as / df_err);
    r.f_b = r.ss_b / (r.ss_bs / df_err);
    r.f_ab = r.ss_ab / (r.ss_abs / df_err);
    r
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to a relative
/// tolerance `rtol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    fn go(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 || (b - a).abs() < 1e-15 {
            return v;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, 0.5 * tol, depth + 1) + go(f, m, b, 0.5 * tol, depth + 1)
    }
    let rough = gk15(&f, a, b).0.abs().max(f64::MIN_POSITIVE);
    go(&f, a, b, rtol * rough, 0)
}

/// `∫_0^x u^(a-1) (1-u)^(b-1) du`, with `u = r^(1/a)` removing the
/// singularity at zero.
fn beta_lower(a: f64, b: f64, x: f64) -> f64 {
    let end = x.powf(a);
    integrate(|r| (1.0 - r.powf(1.0 / a)).powf(b - 1.0) / a, 0.0, end, 1e-11)
}

/// `∫_x^1 u^(a-1) (1-u)^(b-1) du`, with `1 - u = s^(1/b)`.
fn beta_upper(a: f64, b: f64, x: f64) -> f64 {
    let end = (1.0 - x).powf(b);
    integrate(|s| (1.0 - s.powf(1.0 / b)).powf(a - 1.0) / b, 0.0, end, 1e-11)
}

/// Upper tail of the F distribution by numerical integration of the beta
/// density it maps to.
pub fn f_survival_quadrature(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let (a, b) = (df1 / 2.0, df2 / 2.0);
    // P(F > f) = P(X < x) with X ~ Beta(df2/2, df1/2), x = df2 / (df2 + df1 f).
    let x = df2 / (df2 + df1 * f);
    let total = beta_lower(b, a, 0.5) + beta_upper(b, a, 0.5);
    if x <= 0.5 {
        beta_lower(b, a, x) / total
    } else {
        1.0 - beta_upper(b, a, x) / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_polynomial() {
        let v = integrate(|x| x * x * x - x, 0.0, 2.0, 1e-14);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn f_with_two_denominator_df_is_closed_form() {
        // For df1 = df2 = 2, P(F > f) = 1 / (1 + f).
        for f in [0.1, 1.0, 3.0, 50.0] {
            assert!((f_survival_quadrature(f, 2.0, 2.0) - 1.0 / (1.0 + f)).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_pinch_simple() {
        let cfg = PinchConfig::default();
        let m = [0.5, 0.1, 0.1, 0.1, 0.1, 0.3, 0.5, 0.1, 0.1, 0.1].map(Some);
        assert_eq!(pinch_clicks_reference(&m, &cfg), vec![3, 9]);
    }
}
