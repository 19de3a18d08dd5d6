//! Plot data for ESD overlays: histogram, fitted MP curve, power-law tail.
//!
//! Output is a wide CSV with the columns
//! `bin_lo,bin_hi,density,mp_x,mp_density,pl_x,pl_density`; shorter columns
//! are padded with empty cells. A bare-bones SVG of the same data is
//! available for quick inspection.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::esd::{histogram, Esd, Histogram};
use crate::mp::MpFit;
use crate::powerlaw::PlFit;

pub const MP_CURVE_POINTS: usize = 500;
pub const PL_CURVE_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub hist: Histogram<f64>,
    pub mp_curve: Vec<(f64, f64)>,
    pub pl_curve: Vec<(f64, f64)>,
    pub log10: bool,
}

/// MP density sampled at cosine-spaced points on `[λ-, λ+]`, which
/// concentrates samples near the square-root edges.
pub fn mp_curve(fit: &MpFit, points: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = fit.params.edges();
    (0..points)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (points - 1) as f64;
            let x = lo + 0.5 * (hi - lo) * (1.0 - theta.cos());
            (x, fit.params.density(x))
        })
        .collect()
}

/// Fitted tail density in ESD units: the Pareto density weighted by the
/// tail's share `n_tail / M`, on log-spaced points from `x_min` to `λ_max`.
pub fn pl_curve(fit: &PlFit, esd: &Esd, points: usize) -> Vec<(f64, f64)> {
    let weight = fit.n_tail as f64 / esd.len() as f64;
    let (lo, hi) = (fit.x_min.ln(), esd.lambda_max().max(fit.x_min).ln());
    (0..points)
        .map(|i| {
            let x = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
            let d = weight * (fit.alpha - 1.0) / fit.x_min * (x / fit.x_min).powf(-fit.alpha);
            (x, d)
        })
        .collect()
}

/// Linear-space histogram and curves, or their log10 counterparts. In log
/// mode the histogram uses equal-width bins in `log10 λ` over the positive
/// eigenvalues, densities are per unit `log10 λ`, and every density is
/// reported as its log10 (zero densities become empty cells).
pub fn plot_data(
    esd: &Esd,
    mp: Option<&MpFit>,
    pl: Option<&PlFit>,
    n_bins: usize,
    log10: bool,
) -> Result<PlotData> {
    let mp_curve = mp.map(|f| mp_curve(f, MP_CURVE_POINTS)).unwrap_or_default();
    let pl_curve = pl
        .map(|f| pl_curve(f, esd, PL_CURVE_POINTS))
        .unwrap_or_default();
    if !log10 {
        return Ok(PlotData {
            hist: histogram(esd.eigenvalues(), n_bins, None)?,
            mp_curve,
            pl_curve,
            log10,
        });
    }

    let floor = crate::phases::ZERO_REL_EPS * esd.lambda_max();
    let logs: Vec<f64> = esd
        .eigenvalues()
        .iter()
        .filter(|&&l| l > floor)
        .map(|l| l.log10())
        .collect();
    let mut hist = histogram(&logs, n_bins, None)?;
    // renormalize to the whole spectrum so dropped zeros show as missing mass
    let share = logs.len() as f64 / esd.len() as f64;
    hist.densities.iter_mut().for_each(|d| *d *= share);
    let to_log = |pts: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        pts.into_iter()
            .filter(|&(x, _)| x > 0.0)
            .map(|(x, d)| (x.log10(), if d > 0.0 { d.log10() } else { f64::NAN }))
            .collect()
    };
    hist.densities
        .iter_mut()
        .for_each(|d| *d = if *d > 0.0 { d.log10() } else { f64::NAN });
    Ok(PlotData {
        hist,
        mp_curve: to_log(mp_curve),
        pl_curve: to_log(pl_curve),
        log10,
    })
}

fn cell(out: &mut String, v: Option<f64>) {
    if let Some(v) = v.filter(|v| v.is_finite()) {
        let _ = write!(out, "{v}");
    }
}

impl PlotData {
    pub fn to_csv(&self) -> String {
        let bins = self.hist.n_bins();
        let rows = bins.max(self.mp_curve.len()).max(self.pl_curve.len());
        let mut out = String::from("bin_lo,bin_hi,density,mp_x,mp_density,pl_x,pl_density\n");
        for r in 0..rows {
            let b = (r < bins).then_some(r);
            cell(&mut out, b.map(|b| self.hist.bin_edges[b]));
            out.push(',');
            cell(&mut out, b.map(|b| self.hist.bin_edges[b + 1]));
            out.push(',');
            cell(&mut out, b.map(|b| self.hist.densities[b]));
            for curve in [&self.mp_curve, &self.pl_curve] {
                let p = curve.get(r);
                out.push(',');
                cell(&mut out, p.map(|p| p.0));
                out.push(',');
                cell(&mut out, p.map(|p| p.1));
            }
            out.push('\n');
        }
        out
    }

    /// Minimal SVG: grey histogram bars, MP curve in blue, tail in red.
    pub fn to_svg(&self, title: &str) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 40.0;
        let finite = |v: f64| v.is_finite().then_some(v);
        let xs = self
            .hist
            .bin_edges
            .iter()
            .copied()
            .chain(self.mp_curve.iter().map(|p| p.0))
            .chain(self.pl_curve.iter().map(|p| p.0))
            .filter_map(finite);
        let ys = self
            .hist
            .densities
            .iter()
            .copied()
            .chain(self.mp_curve.iter().map(|p| p.1))
            .chain(self.pl_curve.iter().map(|p| p.1))
            .filter_map(finite);
        let span = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            })
        };
        let (x0, x1) = span(&mut xs.into_iter());
        let (mut y0, y1) = span(&mut ys.into_iter());
        if !self.log10 {
            y0 = 0.0;
        }
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0).max(f64::MIN_POSITIVE) * (H - 2.0 * PAD);

        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{PAD}\" y=\"20\" font-size=\"14\">{}</text>",
            escape(title)
        );
        for (b, &d) in self.hist.densities.iter().enumerate() {
            if !d.is_finite() {
                continue;
            }
            let (xa, xb) = (sx(self.hist.bin_edges[b]), sx(self.hist.bin_edges[b + 1]));
            let (top, base) = (sy(d), sy(y0));
            let _ = writeln!(
                svg,
                "<rect x=\"{xa:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#bbb\"/>",
                (xb - xa).max(0.5),
                (base - top).max(0.0)
            );
        }
        for (curve, colour) in [(&self.mp_curve, "#1f4e9c"), (&self.pl_curve, "#b22222")] {
            let pts: Vec<String> = curve
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.min(y1))))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(
                    svg,
                    "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>",
                    pts.join(" ")
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_svg(&self, path: impl AsRef<Path>, title: &str) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_svg(title)).map_err(|e| Error::io(path, e))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
