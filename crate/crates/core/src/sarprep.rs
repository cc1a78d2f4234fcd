//! Despeckling and zonal aggregation of SAR damage rasters into [`SarBox`] observations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SarBox;
use crate::error::{Error, Result};
use crate::stats;

/// Regular grid of values, row-major. Pixel `(r, c)` has its center at
/// `(x0 + (c + 0.5) * pixel_size_m, y0 + (r + 0.5) * pixel_size_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub x0: f64,
    pub y0: f64,
    pub pixel_size_m: f64,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn new(rows: usize, cols: usize, x0: f64, y0: f64, pixel_size_m: f64, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() || rows == 0 || cols == 0 {
            return Err(Error::Raster(format!("{rows}x{cols} raster needs {} values, got {}", rows * cols, values.len())));
        }
        if !(pixel_size_m > 0.0) || !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Raster("pixel size must be positive and the origin finite".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Raster("raster values must be finite".into()));
        }
        Ok(Raster { rows, cols, x0, y0, pixel_size_m, values })
    }

    /// Raster of the same geometry filled by `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, x0: f64, y0: f64, pixel_size_m: f64, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Raster::new(rows, cols, x0, y0, pixel_size_m, values)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn same_grid(&self, other: &Raster) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn pixel_center(&self, r: f64, c: f64) -> (f64, f64) {
        (self.x0 + (c + 0.5) * self.pixel_size_m, self.y0 + (r + 0.5) * self.pixel_size_m)
    }

    /// Parse the text format: header `rows cols x0 y0 pixel_size`, then row-major values.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tok = text.split_whitespace();
        let mut next = |what: &str| tok.next().ok_or_else(|| Error::Raster(format!("missing {what}")));
        let rows: usize = next("rows")?.parse().map_err(|_| Error::Raster("rows is not an integer".into()))?;
        let cols: usize = next("cols")?.parse().map_err(|_| Error::Raster("cols is not an integer".into()))?;
        let mut header = [0.0; 3];
        for (h, name) in header.iter_mut().zip(["x0", "y0", "pixel_size"]) {
            *h = next(name)?.parse().map_err(|_| Error::Raster(format!("{name} is not a number")))?;
        }
        let values: Vec<f64> = tok
            .map(|t| t.parse::<f64>().map_err(|_| Error::Raster(format!("bad value {t:?}"))))
            .collect::<Result<_>>()?;
        Raster::new(rows, cols, header[0], header[1], header[2], values)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {} {} {}\n", self.rows, self.cols, self.x0, self.y0, self.pixel_size_m);
        for r in 0..self.rows {
            let row: Vec<String> = self.values[r * self.cols..(r + 1) * self.cols].iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    Raster::from_text(&std::fs::read_to_string(path)?)
}

pub fn write_raster(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, raster.to_text())?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeMode {
    /// `window x window` neighborhood inside each image.
    Spatial,
    /// The same pixel across the co-registered stack.
    Temporal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikeAdConfig {
    pub window: usize,
    pub mad_threshold: f64,
    pub iterations: usize,
    pub mode: SpikeMode,
}

impl Default for SpikeAdConfig {
    fn default() -> Self {
        SpikeAdConfig { window: 11, mad_threshold: 3.0, iterations: 4, mode: SpikeMode::Spatial }
    }
}

impl SpikeAdConfig {
    pub fn check(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!("window must be odd and at least 3, got {}", self.window)));
        }
        if self.iterations == 0 || !(self.mad_threshold >= 0.0) {
            return Err(Error::InvalidArgument("need iterations >= 1 and a nonnegative MAD threshold".into()));
        }
        Ok(())
    }
}

/// Median and median absolute deviation, reusing `buf`.
fn median_mad(buf: &mut Vec<f64>) -> (f64, f64) {
    buf.sort_by(|a, b| a.total_cmp(b));
    let m = stats::quantile_sorted(buf, 0.5);
    for v in buf.iter_mut() {
        *v = (*v - m).abs();
    }
    buf.sort_by(|a, b| a.total_cmp(b));
    (m, stats::quantile_sorted(buf, 0.5))
}

/// Replace `v` by the neighborhood median when it deviates by more than `k` MADs.
#[inline]
fn despike(v: f64, m: f64, mad: f64, k: f64) -> Option<f64> {
    ((v - m).abs() > k * mad).then_some(m)
}

fn spatial_pass(img: &Raster, cfg: &SpikeAdConfig) -> (Raster, usize) {
    let h = cfg.window / 2;
    let mut out = img.clone();
    let mut changed = 0;
    let mut buf = Vec::with_capacity(cfg.window * cfg.window);
    for r in 0..img.rows {
        for c in 0..img.cols {
            buf.clear();
            for rr in r.saturating_sub(h)..(r + h + 1).min(img.rows) {
                for cc in c.saturating_sub(h)..(c + h + 1).min(img.cols) {
                    buf.push(img.get(rr, cc));
                }
            }
            let (m, mad) = median_mad(&mut buf);
            if let Some(v) = despike(img.get(r, c), m, mad, cfg.mad_threshold) {
                out.values[r * img.cols + c] = v;
                changed += 1;
            }
        }
    }
    (out, changed)
}

fn temporal_pass(stack: &[Raster], cfg: &SpikeAdConfig) -> (Vec<Raster>, usize) {
    let mut out = stack.to_vec();
    let mut changed = 0;
    let mut buf = Vec::with_capacity(stack.len());
    for i in 0..stack[0].values.len() {
        buf.clear();
        buf.extend(stack.iter().map(|r| r.values[i]));
        let (m, mad) = median_mad(&mut buf);
        for (o, r) in out.iter_mut().zip(stack) {
            if let Some(v) = despike(r.values[i], m, mad, cfg.mad_threshold) {
                o.values[i] = v;
                changed += 1;
            }
        }
    }
    (out, changed)
}

/// Despeckled rasters and the number of replaced pixels per iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeAdOutput {
    pub rasters: Vec<Raster>,
    pub changed: Vec<usize>,
}

/// Iterative MAD despeckling. Each iteration reads the previous iteration's
/// values only; a pixel is replaced by its neighborhood median when
/// `|v - median| > mad_threshold * MAD`, so pixels at the median of a
/// zero-MAD neighborhood are left alone.
pub fn spikead(stack: &[Raster], cfg: &SpikeAdConfig) -> Result<SpikeAdOutput> {
    cfg.check()?;
    if stack.is_empty() {
        return Err(Error::Raster("empty raster stack".into()));
    }
    let mut cur = stack.to_vec();
    let mut changed = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let n = match cfg.mode {
            SpikeMode::Spatial => {
                let mut n = 0;
                for img in cur.iter_mut() {
                    let (next, k) = spatial_pass(img, cfg);
                    *img = next;
                    n += k;
                }
                n
            }
            SpikeMode::Temporal => {
                if cur.len() < 3 {
                    return Err(Error::Raster(format!("temporal mode needs at least 3 rasters, got {}", cur.len())));
                }
                if cur.iter().any(|r| !r.same_grid(&cur[0])) {
                    return Err(Error::Raster("temporal mode needs rasters of identical shape".into()));
                }
                let (next, k) = temporal_pass(&cur, cfg);
                cur = next;
                k
            }
        };
        changed.push(n);
    }
    Ok(SpikeAdOutput { rasters: cur, changed })
}

/// Pixel-wise mean of co-registered maps, rescaled so the maximum is 1.
pub fn composite(stack: &[Raster]) -> Result<Raster> {
    let first = stack.first().ok_or_else(|| Error::Raster("empty raster stack".into()))?;
    if stack.iter().any(|r| !r.same_grid(first)) {
        return Err(Error::Raster("composite needs rasters of identical shape".into()));
    }
    let n = stack.len() as f64;
    let mean: Vec<f64> = (0..first.values.len()).map(|i| stack.iter().map(|r| r.values[i]).sum::<f64>() / n).collect();
    let max = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
    Raster::new(first.rows, first.cols, first.x0, first.y0, first.pixel_size_m, mean.into_iter().map(|v| v * scale).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZonalConfig {
    /// Box edge in pixels.
    pub box_px: usize,
    pub n_annuli: usize,
    pub r_inner_m: f64,
    pub r_outer_m: f64,
    /// Per-annulus damage percentile at or above which boxes are kept.
    pub percentile: f64,
}

impl Default for ZonalConfig {
    fn default() -> Self {
        ZonalConfig { box_px: 10, n_annuli: 15, r_inner_m: 200.0, r_outer_m: 8000.0, percentile: 95.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZonalOutput {
    pub boxes: Vec<SarBox>,
    /// Annulus index of each retained box.
    pub annulus: Vec<usize>,
    pub skipped_annuli: usize,
}

/// Aggregate a damage-fraction raster (values in `[0, 1]`) into retained
/// boxes, binned into log-spaced annuli around `epicenter`.
pub fn zonal_aggregate(damage: &Raster, epicenter: (f64, f64), cfg: &ZonalConfig) -> Result<ZonalOutput> {
    if cfg.box_px == 0 || cfg.n_annuli == 0 || !(0.0..100.0).contains(&cfg.percentile) {
        return Err(Error::InvalidArgument("need box_px >= 1, n_annuli >= 1 and percentile in [0, 100)".into()));
    }
    if !(cfg.r_inner_m > 0.0 && cfg.r_inner_m < cfg.r_outer_m) {
        return Err(Error::InvalidArgument("need 0 < r_inner_m < r_outer_m".into()));
    }
    let b = cfg.box_px;
    let log_span = (cfg.r_outer_m / cfg.r_inner_m).ln();
    // (box row, box col, range, damage %) per annulus
    let mut bins: Vec<Vec<(usize, usize, f64, f64)>> = vec![Vec::new(); cfg.n_annuli];
    for br in 0..damage.rows / b {
        for bc in 0..damage.cols / b {
            let (cx, cy) = damage.pixel_center(br as f64 * b as f64 + 0.5 * b as f64 - 0.5, bc as f64 * b as f64 + 0.5 * b as f64 - 0.5);
            let d = (cx - epicenter.0).hypot(cy - epicenter.1);
            if !(cfg.r_inner_m..=cfg.r_outer_m).contains(&d) {
                continue;
            }
            let k = (((d / cfg.r_inner_m).ln() / log_span * cfg.n_annuli as f64) as usize).min(cfg.n_annuli - 1);
            let mut s = 0.0;
            for r in br * b..(br + 1) * b {
                for c in bc * b..(bc + 1) * b {
                    s += damage.get(r, c);
                }
            }
            bins[k].push((br, bc, d, 100.0 * s / (b * b) as f64));
        }
    }
    let mut out = ZonalOutput { boxes: Vec::new(), annulus: Vec::new(), skipped_annuli: 0 };
    for (k, bin) in bins.iter().enumerate() {
        if bin.is_empty() {
            out.skipped_annuli += 1;
            continue;
        }
        let dmg = stats::sorted(&bin.iter().map(|t| t.3).collect::<Vec<_>>());
        let cut = stats::quantile_sorted(&dmg, cfg.percentile / 100.0);
        for &(_, _, range_m, damage_pct) in bin.iter().filter(|t| t.3 >= cut) {
            out.boxes.push(SarBox { range_m, damage_pct });
            out.annulus.push(k);
        }
    }
    if out.skipped_annuli > 0 {
        log::warn!("{} annuli held no boxes and were skipped", out.skipped_annuli);
    }
    Ok(out)
}
