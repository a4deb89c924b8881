use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::ConvergenceReport;
use crate::error::{Error, Result};

const HEADER: [&str; 11] = [
    "h", "err_u", "rate_u", "err_v", "rate_v", "err_gu", "rate_gu", "err_gv", "rate_gv", "e0_u",
    "e0_v",
];

fn sig10(x: f64) -> String {
    format!("{x:.9e}")
}

/// Writes the report table, one row per level, rates against the next finer
/// level (empty on the last row).
pub fn write_report_csv<W: Write>(out: W, report: &ConvergenceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let rates = report.rates();
    for (i, row) in report.rows.iter().enumerate() {
        let rate = |j: usize| rates.get(i).map_or(String::new(), |r| sig10(r[j]));
        let e = &row.errors;
        w.write_record([
            sig10(row.h),
            sig10(e.err_u),
            rate(0),
            sig10(e.err_v),
            rate(1),
            sig10(e.err_gu),
            rate(2),
            sig10(e.err_gv),
            rate(3),
            sig10(e.e0_u),
            sig10(e.e0_v),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of a report table.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub h: f64,
    /// err_u, err_v, err_gu, err_gv
    pub errors: [f64; 4],
    pub rates: [Option<f64>; 4],
    pub e0: [f64; 2],
}

pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        return Err(Error::Validation("report header does not match".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("bad number `{}` in column {}", &rec[j], HEADER[j]),
            })
        };
        let opt = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        rows.push(CsvRow {
            h: num(0)?,
            errors: [num(1)?, num(3)?, num(5)?, num(7)?],
            rates: [opt(2)?, opt(4)?, opt(6)?, opt(8)?],
            e0: [num(9)?, num(10)?],
        });
    }
    Ok(rows)
}

/// Writes `report.csv` and `report.svg` into `dir`.
pub fn emit_report(report: &ConvergenceReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if report.rows.is_empty() {
        return Err(Error::Validation("cannot emit an empty report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("report.csv");
    let mut file = BufWriter::new(File::create(&csv_path)?);
    write_report_csv(&mut file, report)?;
    file.flush()?;
    let svg_path = dir.join("report.svg");
    plot_report(report, &svg_path)?;
    Ok((csv_path, svg_path))
}

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn plot_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let hs: Vec<f64> = report.rows.iter().map(|r| r.h).collect();
    let curves: [(&str, Vec<f64>); 4] = [
        (
            "err_u",
            report.rows.iter().map(|r| r.errors.err_u).collect(),
        ),
        (
            "err_v",
            report.rows.iter().map(|r| r.errors.err_v).collect(),
        ),
        (
            "err_gu",
            report.rows.iter().map(|r| r.errors.err_gu).collect(),
        ),
        (
            "err_gv",
            report.rows.iter().map(|r| r.errors.err_gv).collect(),
        ),
    ];
    let (h_min, h_max) = (
        hs.iter().copied().fold(f64::INFINITY, f64::min),
        hs[0].max(hs[hs.len() - 1]),
    );
    let positive = curves
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .filter(|&e| e > 0.0);
    let (mut e_min, mut e_max) =
        positive.fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(e), b.max(e)));
    if !e_min.is_finite() {
        e_min = 1e-16;
        e_max = 1.0;
    }
    // References through the coarsest gradient error.
    let anchor_h = h_max;
    let anchor_e = curves[2].1[0].max(e_min);
    let slope = |p: i32| -> Vec<(f64, f64)> {
        [h_min, h_max]
            .iter()
            .map(|&h| (h, anchor_e * (h / anchor_h).powi(p)))
            .collect()
    };
    let refs = [(1, slope(1)), (2, slope(2))];
    for (_, pts) in &refs {
        for &(_, e) in pts {
            e_min = e_min.min(e);
            e_max = e_max.max(e);
        }
    }

    let root = SVGBackend::new(path, (720, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let x_range = (h_min / 1.2)..(h_max * 1.2);
    let y_range = (e_min / 2.0)..(e_max * 2.0);
    let mut chart = ChartBuilder::on(&root)
        .caption(
            format!(
                "{} / {} / {}",
                report.problem,
                report.scheme.name(),
                report.family.name()
            ),
            ("sans-serif", 20),
        )
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x_range.log_scale(), y_range.log_scale())
        .map_err(plot_error)?;
    chart
        .configure_mesh()
        .x_desc("h")
        .y_desc("relative error")
        .x_label_formatter(&|x| format!("{x:.3e}"))
        .y_label_formatter(&|y| format!("{y:.1e}"))
        .draw()
        .map_err(plot_error)?;

    let palette = [RED, BLUE, GREEN, MAGENTA];
    for ((name, errs), color) in curves.iter().zip(palette) {
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .copied()
            .zip(errs.iter().copied())
            .filter(|p| p.1 > 0.0)
            .collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(*name)
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 4, color.filled())))
            .map_err(plot_error)?;
    }
    for (p, pts) in refs {
        let style = BLACK.mix(if p == 1 { 0.8 } else { 0.45 });
        chart
            .draw_series(LineSeries::new(pts, style))
            .map_err(plot_error)?
            .label(format!("slope {p}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}
