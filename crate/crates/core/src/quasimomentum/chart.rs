//! Piecewise Chebyshev charts of `w(k)`, `E'`, `E''` and `E'''` per band.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::{inflection_point, point_in_band, w_of_k, BandPoint};
use crate::error::{HillError, Result};
use crate::quad::{cheb_points, ChebPanel};
use crate::spectrum::BandStructure;

#[derive(Debug, Clone, Copy)]
pub struct ChartOptions {
    /// Chebyshev nodes per panel.
    pub nodes: usize,
    /// Edge partition constant `c` in `a_n^+ + c |g_n|`.
    pub partition_c: f64,
    /// Longest panel in `k`.
    pub max_panel: f64,
    /// Ratio of the geometric grading toward open edges.
    pub grading_ratio: f64,
    /// Smallest panel width in `k` next to an edge.
    pub edge_floor: f64,
    /// Locate the inflection point of each band and use it as a breakpoint.
    pub inflection: bool,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            nodes: 24,
            partition_c: 8.0,
            max_panel: 0.25,
            grading_ratio: 4.0,
            edge_floor: 1e-10,
            inflection: true,
        }
    }
}

/// Interpolants on one panel `[k_lo, k_hi]` of a band.
#[derive(Debug, Clone)]
pub struct ChartPanel {
    pub k_lo: f64,
    pub k_hi: f64,
    pub w: ChebPanel<f64>,
    pub e_dot: ChebPanel<f64>,
    pub e_ddot: ChebPanel<f64>,
    pub e_dddot: ChebPanel<f64>,
}

/// Edge partition of a band mapped to `k`; entries are `None` when the
/// adjacent gap is empty or the point falls outside the band.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Partition {
    /// `k(a_n^+ + c |g_n|)`.
    pub left_near: Option<f64>,
    /// `k(a_n^+ + |g_n|^{1/4})`.
    pub left_far: Option<f64>,
    /// `k(a_{n+1}^- - |g_{n+1}|^{3/5})`.
    pub right_far: Option<f64>,
    /// `k(a_{n+1}^- - c |g_{n+1}|)`.
    pub right_near: Option<f64>,
}

/// One chart node with all stored quantities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChartSample {
    pub band: usize,
    pub k: f64,
    pub w: f64,
    pub dk_dw: f64,
    pub energy: f64,
    pub e_dot: f64,
    pub e_ddot: f64,
    pub e_dddot: f64,
}

#[derive(Debug, Clone)]
pub struct BandChart {
    pub band: usize,
    pub k_lo: f64,
    pub k_hi: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub panels: Vec<ChartPanel>,
    pub partition: Partition,
    /// Inflection point `k_n` when it was located and is unique.
    pub inflection: Option<f64>,
}

impl BandChart {
    fn panel(&self, k: f64) -> &ChartPanel {
        let i = self.panels.partition_point(|p| p.k_hi < k);
        &self.panels[i.min(self.panels.len() - 1)]
    }

    /// Panel boundaries, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.panels.iter().map(|p| p.k_lo).collect();
        b.push(self.k_hi);
        b
    }

    /// All nodes of the chart.
    pub fn samples(&self) -> Vec<ChartSample> {
        let mut out = Vec::new();
        for p in &self.panels {
            for j in 0..p.w.x.len() {
                let w = p.w.v[j];
                let e_dot = p.e_dot.v[j];
                out.push(ChartSample {
                    band: self.band,
                    k: p.w.x[j],
                    w,
                    dk_dw: 2.0 * w / e_dot,
                    energy: w * w,
                    e_dot,
                    e_ddot: p.e_ddot.v[j],
                    e_dddot: p.e_dddot.v[j],
                });
            }
        }
        out
    }
}

/// Band charts for bands `0 .. n_bands`.
#[derive(Debug, Clone)]
pub struct QuasimomentumChart {
    pub bands: Vec<BandChart>,
}

impl QuasimomentumChart {
    pub fn build(bs: &BandStructure<f64>, n_bands: usize, opts: ChartOptions) -> Result<Self> {
        if n_bands == 0 || n_bands > bs.n_bands() {
            return Err(HillError::InvalidArgument(format!(
                "chart needs 1..={} bands, got {n_bands}",
                bs.n_bands()
            )));
        }
        let bands = (0..n_bands)
            .into_par_iter()
            .map(|n| build_band(bs, n, &opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuasimomentumChart { bands })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, n: usize) -> &BandChart {
        &self.bands[n]
    }

    /// Largest quasimomentum covered.
    pub fn k_max(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.k_hi)
    }

    fn locate(&self, k: f64) -> Result<&ChartPanel> {
        let a = k.abs();
        if a > self.k_max() {
            return Err(HillError::InvalidArgument(format!(
                "k = {k} beyond chart range {}",
                self.k_max()
            )));
        }
        let n = ((a / PI).floor() as usize).min(self.bands.len() - 1);
        Ok(self.bands[n].panel(a))
    }

    pub fn w(&self, k: f64) -> Result<f64> {
        Ok(self.locate(k)?.w.eval(k.abs()))
    }

    pub fn energy(&self, k: f64) -> Result<f64> {
        let w = self.w(k)?;
        Ok(w * w)
    }

    /// `E'(k)`, odd in `k`.
    pub fn e_dot(&self, k: f64) -> Result<f64> {
        Ok(self.locate(k)?.e_dot.eval(k.abs()) * k.signum())
    }

    /// `E''(k)`, even in `k`.
    pub fn e_ddot(&self, k: f64) -> Result<f64> {
        Ok(self.locate(k)?.e_ddot.eval(k.abs()))
    }

    /// `E'''(k)`, odd in `k`.
    pub fn e_dddot(&self, k: f64) -> Result<f64> {
        Ok(self.locate(k)?.e_dddot.eval(k.abs()) * k.signum())
    }
}

fn build_band(bs: &BandStructure<f64>, n: usize, opts: &ChartOptions) -> Result<BandChart> {
    let (w_lo, w_hi) = bs.band(n)?;
    let (k_lo, k_hi) = (n as f64 * PI, (n + 1) as f64 * PI);
    let g_left = bs.gap_length(n);
    let g_right = bs.gap_length(n + 1);

    let k_at = |w: f64| -> Result<Option<f64>> {
        if w > w_lo && w < w_hi {
            Ok(Some(point_in_band(bs, n, &w, 0)?.k))
        } else {
            Ok(None)
        }
    };
    let mut partition = Partition::default();
    if g_left > 0.0 {
        partition.left_near = k_at(w_lo + opts.partition_c * g_left)?;
        partition.left_far = k_at(w_lo + g_left.powf(0.25))?;
    }
    if g_right > 0.0 {
        partition.right_far = k_at(w_hi - g_right.powf(0.6))?;
        partition.right_near = k_at(w_hi - opts.partition_c * g_right)?;
    }
    let inflection = if opts.inflection && g_left > 0.0 && g_right > 0.0 {
        inflection_point(bs, n)?.unique().map(|z| z.k)
    } else {
        None
    };

    let mut bps = vec![k_lo, k_hi];
    let mut graded = |g: f64, from_left: bool| {
        if g <= 0.0 {
            return;
        }
        let mut r = (1e-3 * g).max(opts.edge_floor);
        while r < PI / 3.0 {
            bps.push(if from_left { k_lo + r } else { k_hi - r });
            r *= opts.grading_ratio;
        }
    };
    graded(g_left, true);
    graded(g_right, false);
    bps.extend(
        [
            partition.left_near,
            partition.left_far,
            partition.right_far,
            partition.right_near,
            inflection,
        ]
        .into_iter()
        .flatten(),
    );
    let bps = refine_breakpoints(bps, opts.max_panel);

    let mut panels = Vec::with_capacity(bps.len() - 1);
    let mut hint: Option<(f64, f64, f64)> = None;
    for win in bps.windows(2) {
        let panel = build_panel(bs, n, win[0], win[1], opts.nodes, &mut hint)?;
        panels.push(panel);
    }
    Ok(BandChart {
        band: n,
        k_lo,
        k_hi,
        w_lo,
        w_hi,
        panels,
        partition,
        inflection,
    })
}

/// Sorts, removes near-duplicates and splits long intervals uniformly.
fn refine_breakpoints(mut bps: Vec<f64>, max_panel: f64) -> Vec<f64> {
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(bps.len());
    for b in bps {
        match merged.last() {
            Some(&last) if b - last <= 1e-14 * b.abs().max(1.0) => {}
            _ => merged.push(b),
        }
    }
    let mut out = vec![merged[0]];
    for win in merged.windows(2) {
        let pieces = ((win[1] - win[0]) / max_panel).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            out.push(win[0] + (win[1] - win[0]) * i as f64 / pieces as f64);
        }
    }
    *out.last_mut().unwrap() = merged[merged.len() - 1];
    out
}

fn build_panel(
    bs: &BandStructure<f64>,
    n: usize,
    a: f64,
    b: f64,
    nodes: usize,
    hint: &mut Option<(f64, f64, f64)>,
) -> Result<ChartPanel> {
    let ks = cheb_points(nodes, a, b);
    let mut pts: Vec<BandPoint<f64>> = Vec::with_capacity(nodes);
    for &k in &ks {
        // first-order extrapolation from the previous node: dw/dk = E' / 2w
        let guess = hint.map(|(k0, w0, e_dot)| w0 + (k - k0) * e_dot / (2.0 * w0).max(1e-300));
        let w = w_of_k(bs, &k, guess.filter(|g| g.is_finite()))?;
        let p = point_in_band(bs, n, &w, 3)?;
        *hint = Some((k, w, p.e_dot));
        pts.push(p);
    }
    let col = |f: fn(&BandPoint<f64>) -> f64| ChebPanel::new(a, b, ks.clone(), pts.iter().map(f).collect());
    Ok(ChartPanel {
        k_lo: a,
        k_hi: b,
        w: col(|p| p.w),
        e_dot: col(|p| p.e_dot),
        e_ddot: col(|p| p.e_ddot),
        e_dddot: col(|p| p.e_dddot),
    })
}
