//! JSON and CSV serialisation with 17 significant digits.

use std::io::Write;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::qmatrix::{QMatrixOperator, SpectralSphere};

/// `1.2345678901234567e-3` style: 17 significant digits, exact on re-parse.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn serialize_with<T: Serialize + ?Sized, F: Formatter>(value: &T, f: F) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(f));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(format!("serialising result: {e}")))?;
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}

/// Compact JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serialize_with(value, CompactFormatter)
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serialize_with(value, PrettyFormatter::new())
}

/// Output format of a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

/// Results with a tabular form.
pub trait CsvTable {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;

    fn to_csv(&self) -> String {
        let mut s = self.header().join(",");
        s.push('\n');
        for r in self.rows() {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

impl CsvTable for [SpectralSphere] {
    fn header(&self) -> Vec<&'static str> {
        vec!["u", "v", "mult"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|s| vec![fmt_f64(s.u), fmt_f64(s.v), s.mult.to_string()])
            .collect()
    }
}

impl CsvTable for QMatrixOperator {
    fn header(&self) -> Vec<&'static str> {
        vec!["i", "j", "w", "x", "y", "z"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let n = self.n();
        (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let mut r = vec![i.to_string(), j.to_string()];
                r.extend(self.get(i, j).to_array().map(fmt_f64));
                r
            })
            .collect()
    }
}

/// Serialises a result as JSON or, when it has one, as a CSV table.
pub fn result_report<T: Serialize + CsvTable + ?Sized>(result: &T, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(result).map(|mut s| {
            s.push('\n');
            s
        }),
        Format::Csv => Ok(result.to_csv()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::Quaternion;
    use proptest::prelude::*;

    #[test]
    fn quaternion_and_spheres() {
        let q = Quaternion::new(1.0, -0.5, 0.1, 3.0);
        assert_eq!(
            to_json(&q).unwrap(),
            "[1.0000000000000000e0,-5.0000000000000000e-1,1.0000000000000001e-1,3.0000000000000000e0]"
        );
        let s = vec![SpectralSphere { u: 2.0, v: 0.0, mult: 1 }];
        assert_eq!(to_json(&s).unwrap(), r#"[{"u":2.0000000000000000e0,"v":0.0000000000000000e0,"mult":1}]"#);
        assert_eq!(s.as_slice().to_csv(), "u,v,mult\n2.0000000000000000e0,0.0000000000000000e0,1\n");
        assert_eq!(to_json(&f64::INFINITY).unwrap(), "null");
    }

    #[test]
    fn matrix_json_round_trip() {
        let t = QMatrixOperator::from_fn(2, |i, j| Quaternion::new(0.1 * i as f64, 1.0 / 3.0, -(j as f64), 1e-300));
        let s = to_json(&t).unwrap();
        let back: QMatrixOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let csv = result_report(&t, Format::Csv).unwrap();
        assert!(csv.starts_with("i,j,w,x,y,z\n0,0,"));
        assert_eq!(csv.lines().count(), 5);
        assert!(to_json_pretty(&t).unwrap().contains('\n'));
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let j = to_json(&x).unwrap();
            prop_assert_eq!(serde_json::from_str::<f64>(&j).unwrap().to_bits(), x.to_bits());
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            prop_assert_eq!(digits, 17);
        }
    }
}
