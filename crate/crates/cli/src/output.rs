use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pgnaa_core::experiments::{ExperimentReport, SweepReport};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{CliError, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PGNAA_OUT";
const DEFAULT_ROOT: &str = "runs";

pub const LOSS_CURVE_GNUPLOT: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 'epoch'
set ylabel 'cross-entropy loss'
set y2label 'validation accuracy'
set y2tics
plot 'loss_curve.csv' using 1:2 with lines, '' using 1:3 axes x1y2 with lines
";

pub const IMPORTANCE_GNUPLOT: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 'energy (keV)'
set ylabel 'channel importance'
plot 'importance.csv' using 2:3 with lines
";

/// Anything that keeps a list of written files.
pub trait Record {
    fn record(&mut self, name: &str);
}

impl Record for Vec<String> {
    fn record(&mut self, name: &str) {
        self.push(name.into());
    }
}

/// `out` if given, else `$PGNAA_OUT/<name>` (root `runs`); created if missing.
pub fn resolve(out: Option<&Path>, name: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(std::env::var_os(OUT_ENV).unwrap_or_else(|| DEFAULT_ROOT.into())).join(file_stem(name)),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// A label made safe for use as a file name.
pub fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8], log: &mut impl Record) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    log.record(name);
    Ok(())
}

pub fn write_text(dir: &Path, name: &str, text: &str, log: &mut impl Record) -> Result<()> {
    write_bytes(dir, name, text.as_bytes(), log)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, log: &mut impl Record) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    write_text(dir, name, &(text + "\n"), log)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn loss_curve_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("epoch,loss,validation_accuracy\n");
    for (i, (loss, acc)) in report.loss_curve.iter().zip(&report.validation_accuracy).enumerate() {
        writeln!(s, "{},{loss},{acc}", i + 1).expect("write to string");
    }
    s
}

/// One loss column per budget; runs that stopped early leave blanks.
pub fn sweep_curves_csv(report: &SweepReport) -> String {
    let mut s = String::from("epoch");
    for r in &report.runs {
        write!(s, ",k{}", r.budget).expect("write to string");
    }
    s.push('\n');
    let epochs = report.runs.iter().map(|r| r.loss_curve.len()).max().unwrap_or(0);
    for e in 0..epochs {
        write!(s, "{}", e + 1).expect("write to string");
        for r in &report.runs {
            match r.loss_curve.get(e) {
                Some(v) => write!(s, ",{v}"),
                None => write!(s, ","),
            }
            .expect("write to string");
        }
        s.push('\n');
    }
    s
}

pub fn sweep_gnuplot(report: &SweepReport) -> String {
    let plots: Vec<String> = (0..report.runs.len())
        .map(|i| format!("'sweep_curves.csv' using 1:{} with lines", i + 2))
        .collect();
    format!(
        "set datafile separator ','\nset datafile missing ''\nset key autotitle columnhead\n\
         set xlabel 'epoch'\nset ylabel 'cross-entropy loss'\nplot {}\n",
        plots.join(", ")
    )
}

pub fn summarize_run(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let w = &mut s;
    let line = |w: &mut String, key: &str, value: String| writeln!(w, "{key:<16}{value}").expect("write to string");
    line(w, "run", r.name.clone());
    line(w, "seed", r.seed.to_string());
    line(w, "species", format!("{} ({})", r.labels.len(), r.labels.join(", ")));
    line(w, "budget k", format!("{} counts", r.budget));
    line(
        w,
        "live time",
        format!("{:.3} s at {} counts/s", r.live_time_seconds, r.detector_rate),
    );
    line(w, "input width", format!("{} channels", r.input_width));
    let target = match r.reached_target_at {
        Some(e) => format!(" (target reached at epoch {e})"),
        None => String::new(),
    };
    line(w, "epochs run", format!("{}{target}", r.epochs_run));
    if let Some(loss) = r.loss_curve.last() {
        line(w, "final loss", format!("{loss:.4}"));
    }
    line(w, "test samples", r.test_samples.to_string());
    line(w, "accuracy", format!("{:.4}", r.accuracy));
    if r.degenerate {
        line(w, "note", "single-species library, nothing to classify".into());
    }
    if let Some(t) = &r.timings {
        line(
            w,
            "timings",
            format!(
                "sampling {:.2} s, mean epoch {:.2} s, prediction {:.2} s, total {:.2} s",
                t.sampling_seconds, t.mean_epoch_seconds, t.prediction_seconds, t.total_seconds
            ),
        );
    }
    writeln!(w, "confusion (rows actual, columns predicted)").expect("write to string");
    for (label, row) in r.labels.iter().zip(&r.confusion.values) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        writeln!(w, "  {label:<14}{}", cells.join(" ")).expect("write to string");
    }
    s
}

pub fn summarize_sweep(r: &SweepReport) -> String {
    let mut s = format!("sweep {} (seed {})\n", r.name, r.seed);
    writeln!(s, "{:>10} {:>10} {:>9} {:>7} {:>8}", "budget", "live_s", "accuracy", "epochs", "target").expect("write to string");
    for run in &r.runs {
        let target = run.reached_target_at.map_or("-".to_string(), |e| e.to_string());
        writeln!(
            s,
            "{:>10} {:>10.3} {:>9.4} {:>7} {:>8}",
            run.budget, run.live_time_seconds, run.accuracy, run.epochs_run, target
        )
        .expect("write to string");
    }
    s
}
