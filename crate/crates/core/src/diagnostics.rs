//! Three-panel jackstraw diagnostic: density of the null F statistics on the
//! log10 scale with the observed statistics overlaid, the sorted p-value
//! curve, and a Kolmogorov–Smirnov test of p-value uniformity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jackstraw::JackstrawResult;

/// Number of grid points of a density curve.
pub const KDE_GRID_POINTS: usize = 512;

/// Terms of the Kolmogorov series.
const KS_SERIES_TERMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Finite samples that entered the estimate.
    pub n_samples: usize,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^(-1/5)`, falling back to
/// whichever spread measure is non-zero.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density estimate on a 512-point grid spanning
/// `[min − 3h, max + 3h]`. Non-finite samples are ignored.
pub fn kde(samples: &[f64], bandwidth: Bandwidth) -> Result<DensityCurve> {
    let finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.len() < 2 {
        return Err(Error::invalid(format!(
            "density estimate needs at least 2 finite samples, got {}",
            finite.len()
        )));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(&finite),
        Bandwidth::Fixed(h) => h,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive (got {h}); samples may all be equal"
        )));
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let norm = 1.0 / (finite.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * finite
                .iter()
                .map(|&s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
        n_samples: finite.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub pvalue: f64,
}

/// Upper tail `P(K > λ)` of the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        // Jacobi form of the CDF converges quickly for small λ
        let pi2 = std::f64::consts::PI.powi(2);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (1..=KS_SERIES_TERMS)
                .map(|k| {
                    let odd = (2 * k - 1) as f64;
                    (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp()
                })
                .sum::<f64>();
        1.0 - cdf
    } else {
        2.0 * (1..=KS_SERIES_TERMS)
            .map(|k| {
                let k = k as f64;
                let sign = if k as usize % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    q.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test of `p` against Uniform(0, 1), with the
/// asymptotic p-value at `λ = √n · D`.
pub fn ks_uniform_test(p: &[f64]) -> Result<KsTest> {
    if p.is_empty() {
        return Err(Error::invalid("K-S test needs at least one value"));
    }
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::invalid(format!("value {bad} lies outside [0, 1]")));
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(KsTest {
        statistic,
        pvalue: kolmogorov_survival(n.sqrt() * statistic),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPoint {
    pub feature: usize,
    pub log10_f: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    /// (log10 F grid point, density)
    pub null_density: Vec<(f64, f64)>,
    pub bandwidth: f64,
    pub observed_points: Vec<ObservedPoint>,
    /// (1-based rank, p), non-decreasing in p.
    pub sorted_pvalues: Vec<(usize, f64)>,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub n_significant: usize,
    /// Null statistics equal to zero (no log10 value).
    pub null_zero_count: usize,
    /// Null statistics at the perfect-fit sentinel.
    pub null_infinite_count: usize,
    pub observed_zero_count: usize,
    pub observed_infinite_count: usize,
}

/// Assembles all three panels from a jackstraw result.
pub fn build_report(result: &JackstrawResult) -> Result<DiagnosticReport> {
    if result.f_null.is_empty() {
        return Err(Error::invalid("jackstraw result has an empty null sample"));
    }
    let null_zero_count = result.f_null.iter().filter(|f| **f == 0.0).count();
    let null_infinite_count = result.f_null.iter().filter(|f| f.is_infinite()).count();
    let log_null: Vec<f64> = result
        .f_null
        .iter()
        .filter(|f| **f > 0.0 && f.is_finite())
        .map(|f| f.log10())
        .collect();
    let curve = kde(&log_null, Bandwidth::Auto)?;

    let mut observed_zero_count = 0;
    let mut observed_infinite_count = 0;
    let mut observed_points = Vec::with_capacity(result.f_observed.len());
    for (feature, (&f, &significant)) in result.f_observed.iter().zip(&result.significant).enumerate() {
        if f == 0.0 {
            observed_zero_count += 1;
        } else if f.is_infinite() {
            observed_infinite_count += 1;
        } else {
            observed_points.push(ObservedPoint {
                feature,
                log10_f: f.log10(),
                significant,
            });
        }
    }

    let mut sorted = result.p_raw.clone();
    sorted.sort_by(f64::total_cmp);
    let sorted_pvalues = sorted.into_iter().enumerate().map(|(i, p)| (i + 1, p)).collect();
    let ks = ks_uniform_test(&result.p_raw)?;

    Ok(DiagnosticReport {
        null_density: curve.grid.into_iter().zip(curve.density).collect(),
        bandwidth: curve.bandwidth,
        observed_points,
        sorted_pvalues,
        ks_statistic: ks.statistic,
        ks_pvalue: ks.pvalue,
        n_significant: result.n_significant(),
        null_zero_count,
        null_infinite_count,
        observed_zero_count,
        observed_infinite_count,
    })
}

const SVG_W: f64 = 420.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0).max(f64::MIN_POSITIVE) * (SVG_W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        SVG_H - MARGIN - (y - self.y0) / (self.y1 - self.y0).max(f64::MIN_POSITIVE) * (SVG_H - 2.0 * MARGIN)
    }

    fn polyline(&self, pts: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
        let coords: Vec<String> = pts
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    }
}

fn svg_open(title: &str, xlabel: &str, ylabel: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        SVG_W / 2.0
    );
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{xlabel}</text>",
        SVG_W / 2.0,
        SVG_H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 14 {})\">{ylabel}</text>",
        SVG_H / 2.0,
        SVG_H / 2.0
    );
    for (x, y, anchor, label) in [
        (MARGIN, SVG_H - MARGIN + 14.0, "start", frame.x0),
        (SVG_W - MARGIN, SVG_H - MARGIN + 14.0, "end", frame.x1),
    ] {
        let _ = writeln!(s, "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"10\">{label:.3}</text>");
    }
    for (y, label) in [(SVG_H - MARGIN, frame.y0), (MARGIN + 10.0, frame.y1)] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-size=\"10\">{label:.3}</text>",
            MARGIN - 4.0
        );
    }
    s
}

impl DiagnosticReport {
    /// Null density with observed statistics (red significant, blue not).
    pub fn density_svg(&self) -> String {
        let xs = self
            .null_density
            .iter()
            .map(|p| p.0)
            .chain(self.observed_points.iter().map(|p| p.log10_f));
        let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let y1 = self.null_density.iter().map(|p| p.1).fold(0.0, f64::max) * 1.1;
        let frame = Frame { x0, x1, y0: 0.0, y1: y1.max(1e-12) };
        let mut s = svg_open("Null density (log10 F)", "log10 F", "density", &frame);
        s.push_str(&frame.polyline(self.null_density.iter().copied(), "black"));
        for p in &self.observed_points {
            let color = if p.significant { "red" } else { "blue" };
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                frame.px(p.log10_f),
                frame.py(0.0) - 6.0
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn pvalues_svg(&self) -> String {
        let n = self.sorted_pvalues.len().max(1) as f64;
        let frame = Frame { x0: 1.0, x1: n.max(2.0), y0: 0.0, y1: 1.0 };
        let mut s = svg_open("Sorted p-values", "rank", "p-value", &frame);
        s.push_str(&frame.polyline(self.sorted_pvalues.iter().map(|(r, p)| (*r as f64, *p)), "black"));
        s.push_str("</svg>\n");
        s
    }

    /// Empirical CDF of the p-values against the uniform CDF.
    pub fn ks_svg(&self) -> String {
        let frame = Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        let title = format!(
            "K-S uniformity: D = {:.3}, p = {:.3e}",
            self.ks_statistic, self.ks_pvalue
        );
        let mut s = svg_open(&title, "p-value", "ECDF", &frame);
        s.push_str(&frame.polyline([(0.0, 0.0), (1.0, 1.0)].into_iter(), "gray"));
        let n = self.sorted_pvalues.len() as f64;
        let steps = self.sorted_pvalues.iter().flat_map(|(r, p)| {
            [(*p, (*r as f64 - 1.0) / n), (*p, *r as f64 / n)]
        });
        s.push_str(&frame.polyline(std::iter::once((0.0, 0.0)).chain(steps).chain([(1.0, 1.0)]), "red"));
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ajive::Components;
    use crate::jackstraw::{JackstrawConfig, TargetDescriptor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn standard_normal_density_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let curve = kde(&samples, Bandwidth::Auto).unwrap();
        let (i, _) = curve
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        // analytic N(0,1) density at zero is 1/sqrt(2π) = 0.3989
        assert!((curve.density[i] - 0.39).abs() < 0.03, "{}", curve.density[i]);
        assert!((curve.integral() - 1.0).abs() < 0.01);
        assert_eq!(curve.grid.len(), KDE_GRID_POINTS);
    }

    #[test]
    fn two_point_sample_is_symmetric() {
        let curve = kde(&[-1.0, 1.0], Bandwidth::Auto).unwrap();
        let n = curve.density.len();
        for i in 0..n {
            assert!((curve.density[i] - curve.density[n - 1 - i]).abs() < 1e-10);
        }
        assert!((curve.grid[0] + curve.grid[n - 1]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_samples_rejected() {
        assert!(kde(&[2.0, 2.0, 2.0], Bandwidth::Auto).is_err());
        assert!(kde(&[1.0], Bandwidth::Auto).is_err());
        assert!(kde(&[1.0, f64::INFINITY], Bandwidth::Auto).is_err());
        assert!(kde(&[1.0, 2.0], Bandwidth::Fixed(0.0)).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_uniform_test(&[0.5]).unwrap().statistic, 0.5);
        let grid: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        let t = ks_uniform_test(&grid).unwrap();
        assert!((t.statistic - 0.005).abs() < 1e-12);
        assert!(t.pvalue > 0.999);
        assert!(ks_uniform_test(&[]).is_err());
        assert!(ks_uniform_test(&[1.2]).is_err());
    }

    #[test]
    fn kolmogorov_series_values() {
        // reference values of the Kolmogorov survival function
        assert!((kolmogorov_survival(1.0) - 0.2699996).abs() < 1e-6);
        assert!((kolmogorov_survival(0.5) - 0.9639452).abs() < 1e-6);
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!(kolmogorov_survival(6.0) < 1e-30);
        // both series agree near the switch point
        let lam: f64 = 1.18;
        let jacobi = {
            let pi2 = std::f64::consts::PI.powi(2);
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / lam
                * (1..=20).map(|k| (-(((2 * k - 1) as f64).powi(2)) * pi2 / (8.0 * lam * lam)).exp()).sum::<f64>()
        };
        assert!((jacobi - kolmogorov_survival(lam)).abs() < 1e-12);
    }

    fn fake_result() -> JackstrawResult {
        let f_observed = vec![0.0, 0.5, 3.0, 40.0, f64::INFINITY];
        let f_null: Vec<f64> = (0..200).map(|i| 0.01 + i as f64 * 0.05).chain([0.0]).collect();
        let p_raw = crate::jackstraw::empirical_pvalues(&f_observed, &f_null, false).unwrap();
        let p_adjusted = crate::jackstraw::adjust_pvalues(&p_raw, crate::jackstraw::Adjustment::Bonferroni);
        let significant = p_adjusted.iter().map(|p| *p <= 0.05).collect();
        JackstrawResult {
            target: TargetDescriptor {
                method: "ajive".into(),
                space: None,
                block: 0,
                block_name: "b".into(),
                components: Components::One(0),
            },
            config: JackstrawConfig::default(),
            feature_names: (0..5).map(|i| format!("f{i}")).collect(),
            f_observed,
            f_null,
            p_raw,
            p_adjusted,
            significant,
            n_infinite_observed: 1,
            warnings: vec![],
        }
    }

    #[test]
    fn report_panels() {
        let result = fake_result();
        let report = build_report(&result).unwrap();
        assert_eq!(report.null_zero_count, 1);
        assert_eq!(report.observed_zero_count, 1);
        assert_eq!(report.observed_infinite_count, 1);
        assert_eq!(report.observed_points.len(), 3);
        assert!(report.sorted_pvalues.windows(2).all(|w| w[0].1 <= w[1].1));
        let mut sorted = result.p_raw.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(report.sorted_pvalues.iter().map(|x| x.1).collect::<Vec<_>>(), sorted);
        assert!(report.null_density.iter().all(|p| p.1 >= 0.0));
        assert!((0.0..=1.0).contains(&report.ks_statistic));
        assert!((0.0..=1.0).contains(&report.ks_pvalue));
        assert_eq!(build_report(&result).unwrap(), report);
        for svg in [report.density_svg(), report.pvalues_svg(), report.ks_svg()] {
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
    }

    #[test]
    fn empty_null_is_an_error() {
        let mut result = fake_result();
        result.f_null.clear();
        assert!(build_report(&result).is_err());
    }
}
