//! CSV tables and PNG figures for evaluation results.
//!
//! Files are named `<scenario>_<set>_<kind>` so reruns overwrite rather than
//! accumulate:
//!
//! * `_accuracy.csv`   `snr_db,acc_no_fusion,acc_fused,samples`
//! * `_confusion.csv`  `snr_db,truth,predicted,count` (`predicted` may be
//!   `undecided`)
//! * `_metrics.json`   the full [`EvalMetrics`]
//! * `_accuracy.png`   accuracy against SNR; red is the final decision, blue
//!   the mean single antenna
//! * `_confusion.png` and `_confusion_<snr>dB.png`  row-normalized heatmaps,
//!   all SNRs pooled and per SNR

use std::path::{Path, PathBuf};

use super::metrics::{Confusion, EvalMetrics};
use crate::error::{Error, Result};
use crate::tfa::{jet, write_rgb8_png};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub snr_db: f64,
    pub acc_no_fusion: f64,
    pub acc_fused: f64,
    pub samples: usize,
}

/// Reads back an `_accuracy.csv`.
pub fn read_accuracy_csv(path: impl AsRef<Path>) -> Result<Vec<AccuracyRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["snr_db", "acc_no_fusion", "acc_fused", "samples"] {
        return Err(Error::data(format!("{}: unexpected header {headers:?}", path.display())));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = || Error::data(format!("{}: bad value on data row {}", path.display(), line + 1));
        let f = |i: usize| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(bad);
        rows.push(AccuracyRow {
            snr_db: f(0)?,
            acc_no_fusion: f(1)?,
            acc_fused: f(2)?,
            samples: rec.get(3).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
        });
    }
    Ok(rows)
}

struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width * height * 3],
        }
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = (y as usize * self.width + x as usize) * 3;
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    fn fill(&mut self, x0: i64, y0: i64, w: i64, h: i64, rgb: [u8; 3]) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.put(x, y, rgb);
            }
        }
    }

    /// Bresenham line, `thick` pixels wide.
    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), thick: i64, rgb: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let mut err = dx + dy;
        loop {
            self.fill(x0 - thick / 2, y0 - thick / 2, thick, thick, rgb);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

const CELL: usize = 32;

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn heatmap(c: &Confusion) -> Result<Canvas> {
    let k = c.num_classes;
    let side = k * CELL + 1;
    let mut canvas = Canvas::new(side, side);
    let norm = c.row_normalized();
    for t in 0..k {
        for p in 0..k {
            let rgb = jet(norm[t * k + p])?.map(to_u8);
            canvas.fill((p * CELL + 1) as i64, (t * CELL + 1) as i64, CELL as i64 - 1, CELL as i64 - 1, rgb);
        }
    }
    let grid = [64, 64, 64];
    for i in 0..=k {
        let at = (i * CELL) as i64;
        canvas.line((at, 0), (at, side as i64 - 1), 1, grid);
        canvas.line((0, at), (side as i64 - 1, at), 1, grid);
    }
    Ok(canvas)
}

fn accuracy_plot(m: &EvalMetrics) -> Canvas {
    let (w, h, margin) = (480i64, 320i64, 30i64);
    let mut canvas = Canvas::new(w as usize, h as usize);
    let (lo, hi) = (m.per_snr[0].snr_db, m.per_snr.last().unwrap().snr_db);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |snr: f64| margin + ((snr - lo) / span * (w - 2 * margin) as f64).round() as i64;
    let py = |acc: f64| h - margin - (acc.clamp(0.0, 1.0) * (h - 2 * margin) as f64).round() as i64;
    let light = [220, 220, 220];
    for tenth in 0..=10 {
        let y = py(f64::from(tenth) / 10.0);
        canvas.line((margin, y), (w - margin, y), 1, light);
    }
    for s in &m.per_snr {
        canvas.line((px(s.snr_db), margin), (px(s.snr_db), h - margin), 1, light);
    }
    let axis = [0, 0, 0];
    canvas.line((margin, h - margin), (w - margin, h - margin), 2, axis);
    canvas.line((margin, margin), (margin, h - margin), 2, axis);

    let series: [(fn(&super::metrics::SnrMetrics) -> f64, [u8; 3]); 2] = [
        (|s| s.acc_no_fusion, [40, 80, 220]),
        (|s| s.acc_fused, [220, 40, 40]),
    ];
    for (value, rgb) in series {
        let pts: Vec<(i64, i64)> = m
            .per_snr
            .iter()
            .filter(|s| value(s).is_finite())
            .map(|s| (px(s.snr_db), py(value(s))))
            .collect();
        for pair in pts.windows(2) {
            canvas.line(pair[0], pair[1], 2, rgb);
        }
        for &(x, y) in &pts {
            canvas.fill(x - 3, y - 3, 7, 7, rgb);
        }
    }
    canvas
}

fn snr_label(snr_db: f64) -> String {
    format!("{snr_db}dB")
}

fn accuracy_csv(m: &EvalMetrics) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::data(format!("csv encoding failed: {e}"));
    w.write_record(["snr_db", "acc_no_fusion", "acc_fused", "samples"]).map_err(to_err)?;
    for s in &m.per_snr {
        w.write_record([
            s.snr_db.to_string(),
            s.acc_no_fusion.to_string(),
            s.acc_fused.to_string(),
            s.samples.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::data(format!("csv encoding failed: {e}")))
}

fn confusion_csv(m: &EvalMetrics) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::data(format!("csv encoding failed: {e}"));
    w.write_record(["snr_db", "truth", "predicted", "count"]).map_err(to_err)?;
    for s in &m.per_snr {
        for (t, truth) in m.classes.iter().enumerate() {
            for (p, pred) in m.classes.iter().enumerate() {
                let n = s.confusion.count(t, p);
                w.write_record([s.snr_db.to_string(), truth.to_string(), pred.to_string(), n.to_string()])
                    .map_err(to_err)?;
            }
            if s.confusion.undecided[t] > 0 {
                let n = s.confusion.undecided[t];
                w.write_record([s.snr_db.to_string(), truth.to_string(), "undecided".into(), n.to_string()])
                    .map_err(to_err)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::data(format!("csv encoding failed: {e}")))
}

enum Artifact {
    Bytes(Vec<u8>),
    Png(Canvas),
}

/// Writes every report file for `m` into `dir` and returns their paths.
/// Nothing is written when `m` holds no results, and files already written
/// are removed again if a later one fails.
pub fn export_report(m: &EvalMetrics, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if m.per_snr.is_empty() || m.per_snr.iter().all(|s| s.samples == 0) {
        return Err(Error::data("no evaluation results to report"));
    }
    let tag = m.tag();
    let mut artifacts = vec![
        (format!("{tag}_accuracy.csv"), Artifact::Bytes(accuracy_csv(m)?)),
        (format!("{tag}_confusion.csv"), Artifact::Bytes(confusion_csv(m)?)),
        (
            format!("{tag}_metrics.json"),
            Artifact::Bytes(serde_json::to_vec_pretty(m).map_err(|e| Error::Numeric(e.to_string()))?),
        ),
        (format!("{tag}_accuracy.png"), Artifact::Png(accuracy_plot(m))),
        (format!("{tag}_confusion.png"), Artifact::Png(heatmap(&m.confusion())?)),
    ];
    for s in &m.per_snr {
        artifacts.push((
            format!("{tag}_confusion_{}.png", snr_label(s.snr_db)),
            Artifact::Png(heatmap(&s.confusion)?),
        ));
    }

    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for (name, artifact) in artifacts {
        let path = dir.join(name);
        let result = match &artifact {
            Artifact::Bytes(b) => std::fs::write(&path, b).map_err(|e| Error::io(&path, e)),
            Artifact::Png(c) => write_rgb8_png(c.width, c.height, &c.pixels, &path),
        };
        if let Err(e) = result {
            for p in written.iter().chain(std::iter::once(&path)) {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentConfig, Scenario};
    use crate::harness::metrics::evaluate;
    use crate::harness::metrics::stubs::{labeled_samples, Coin};

    fn metrics() -> EvalMetrics {
        let cfg = ExperimentConfig {
            scenario: Scenario::Mimo { nt: 2, nr: 4 },
            ..ExperimentConfig::default()
        };
        let samples = labeled_samples(8, &cfg.snr_list_db, 7, 4);
        evaluate(&cfg, &Coin(8, 11), &samples).unwrap()
    }

    #[test]
    fn accuracy_csv_roundtrips() {
        let m = metrics();
        let dir = tempfile::tempdir().unwrap();
        let files = export_report(&m, dir.path()).unwrap();
        assert_eq!(files.len(), 5 + 8);
        let rows = read_accuracy_csv(dir.path().join("mimo2x4_theta1_accuracy.csv")).unwrap();
        assert_eq!(rows.len(), m.per_snr.len());
        for (r, s) in rows.iter().zip(&m.per_snr) {
            assert!((r.snr_db - s.snr_db).abs() <= 1e-12);
            assert!((r.acc_no_fusion - s.acc_no_fusion).abs() <= 1e-12);
            assert!((r.acc_fused - s.acc_fused).abs() <= 1e-12);
            assert_eq!(r.samples, s.samples);
        }
        let json = std::fs::read_to_string(dir.path().join("mimo2x4_theta1_metrics.json")).unwrap();
        let back: EvalMetrics = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(dir.path().join("mimo2x4_theta1_confusion_-4dB.png").exists());
    }

    #[test]
    fn confusion_csv_counts_add_up() {
        let m = metrics();
        let text = String::from_utf8(confusion_csv(&m).unwrap()).unwrap();
        let total: u64 = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, m.confusion().total());
    }

    #[test]
    fn empty_metrics_write_nothing() {
        let mut m = metrics();
        m.per_snr.clear();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        assert!(matches!(export_report(&m, &out), Err(Error::Data(_))));
        assert!(!out.exists());
    }

    #[test]
    fn pngs_decode() {
        let m = metrics();
        let dir = tempfile::tempdir().unwrap();
        export_report(&m, dir.path()).unwrap();
        for (name, side) in [("mimo2x4_theta1_confusion.png", 8 * CELL + 1), ("mimo2x4_theta1_accuracy.png", 480)] {
            let decoder = png::Decoder::new(std::fs::File::open(dir.path().join(name)).unwrap());
            let reader = decoder.read_info().unwrap();
            assert_eq!(reader.info().width as usize, side);
        }
    }
}
