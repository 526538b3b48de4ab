//! Two-column spectrum CSV: header `Energy (keV),Counts`, one row per channel.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{ChannelCalibration, Provenance, Spectrum};
use crate::error::{Error, Result};

pub const HEADER: [&str; 2] = ["Energy (keV)", "Counts"];

/// Load a spectrum, mapping each energy row to its nearest calibrated
/// channel. The label is the file stem.
pub fn load_spectrum_csv(path: impl AsRef<Path>, cal: &ChannelCalibration) -> Result<Spectrum> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_spectrum_csv(file, cal, label)
}

pub fn read_spectrum_csv<R: Read>(
    reader: R,
    cal: &ChannelCalibration,
    label: impl Into<String>,
) -> Result<Spectrum> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected 2 header columns, found {}", headers.len()),
        });
    }

    let mut counts = vec![0u64; cal.n_channels()];
    let mut seen = vec![false; cal.n_channels()];
    let mut last_energy = f64::NEG_INFINITY;
    let mut rows = 0usize;

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let energy: f64 = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid energy {:?}", &record[0]),
        })?;
        if !energy.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite energy {:?}", &record[0]),
            });
        }
        let count = parse_count(&record[1]).map_err(|message| match message {
            CountError::Negative => Error::validation(format!(
                "line {line}: negative count {}",
                &record[1]
            )),
            CountError::NotInteger => Error::validation(format!(
                "line {line}: count {:?} is not a non-negative integer",
                &record[1]
            )),
            CountError::Malformed => Error::Parse {
                line,
                message: format!("invalid count {:?}", &record[1]),
            },
        })?;
        if energy <= last_energy {
            return Err(Error::validation(format!(
                "line {line}: energies must be strictly increasing ({energy} after {last_energy})"
            )));
        }
        last_energy = energy;

        let ch = cal.nearest_channel(energy)?;
        if seen[ch] {
            return Err(Error::validation(format!(
                "line {line}: energy {energy} maps to channel {ch} already filled by another row"
            )));
        }
        seen[ch] = true;
        counts[ch] = count;
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::validation("spectrum CSV has no data rows"));
    }
    Spectrum::new(*cal, counts, label, Provenance::Measured)
}

enum CountError {
    Negative,
    NotInteger,
    Malformed,
}

fn parse_count(field: &str) -> std::result::Result<u64, CountError> {
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    if field.parse::<i64>().is_ok() {
        return Err(CountError::Negative);
    }
    match field.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(CountError::Negative),
        Ok(v) if v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        Ok(_) => Err(CountError::NotInteger),
        Err(_) => Err(CountError::Malformed),
    }
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Write every channel as `energy,count` under the standard header.
pub fn write_spectrum_csv_to<W: Write>(spectrum: &Spectrum, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{},{}", HEADER[0], HEADER[1])?;
    let cal = spectrum.calibration();
    for (ch, &c) in spectrum.counts().iter().enumerate() {
        writeln!(out, "{},{}", cal.energy_at(ch), c)?;
    }
    out.flush()
}

pub fn write_spectrum_csv(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_spectrum_csv_to(spectrum, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_cal() -> ChannelCalibration {
        ChannelCalibration::new(4, 1.3, 1.3).unwrap()
    }

    #[test]
    fn toy_file_maps_to_count_list() {
        let data = "Energy (keV),Counts\n1.3,1\n2.6,10\n3.9,2\n5.2,0\n";
        let s = read_spectrum_csv(data.as_bytes(), &toy_cal(), "toy").unwrap();
        assert_eq!(s.counts(), &[1, 10, 2, 0]);
        assert_eq!(s.total_counts(), 13);
        assert_eq!(s.label(), "toy");
    }

    #[test]
    fn header_only_is_rejected() {
        let err = read_spectrum_csv("Energy (keV),Counts\n".as_bytes(), &toy_cal(), "x").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn negative_count_is_rejected() {
        let data = "Energy (keV),Counts\n1.3,1\n2.6,-1\n";
        let err = read_spectrum_csv(data.as_bytes(), &toy_cal(), "x").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let data = "Energy (keV),Counts\n1.3,1\n2.6,abc\n";
        match read_spectrum_csv(data.as_bytes(), &toy_cal(), "x").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let data = "Energy (keV),Counts\n1.3,1\n2.6\n";
        assert!(matches!(
            read_spectrum_csv(data.as_bytes(), &toy_cal(), "x").unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn out_of_range_energy_is_rejected() {
        let data = "Energy (keV),Counts\n1.3,1\n9.0,1\n";
        let err = read_spectrum_csv(data.as_bytes(), &toy_cal(), "x").unwrap_err();
        assert!(matches!(err, Error::Range { .. }), "{err}");
    }

    #[test]
    fn non_monotone_energies_are_rejected() {
        let data = "Energy (keV),Counts\n2.6,1\n1.3,1\n";
        assert!(read_spectrum_csv(data.as_bytes(), &toy_cal(), "x").is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_round_trips(
            counts in proptest::collection::vec(0u64..1_000_000, 2..300),
            gain in 0.01f64..10.0,
            offset in -50.0f64..50.0,
        ) {
            let cal = ChannelCalibration::new(counts.len(), gain, offset).unwrap();
            let s = Spectrum::new(cal, counts, "p", Provenance::Synthetic).unwrap();
            let mut buf = Vec::new();
            write_spectrum_csv_to(&s, &mut buf).unwrap();
            let back = read_spectrum_csv(buf.as_slice(), &cal, "p").unwrap();
            prop_assert_eq!(back.counts(), s.counts());

            let mut again = Vec::new();
            write_spectrum_csv_to(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
