//! Serialization helpers: every float is written with 17 significant digits
//! so identical inputs give byte-identical reports.

use std::io;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Value, json};

use crate::error::Error;
use crate::hermlin::ComplexMatrix;

/// Pretty JSON with `{:.16e}` floats.
struct FixedFloat<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloat(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report values serialize");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// Row-major `[[[re, im], ...], ...]`.
pub fn complex_matrix(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

/// Row-major `[[x, ...], ...]`.
pub fn real_matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn error_record(command: &str, err: &Error) -> Value {
    let mut record = json!({
        "command": command,
        "status": "error",
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
        },
    });
    let detail = match err {
        Error::SingularInformation {
            eigenvalue,
            null_direction,
        } => Some(json!({ "eigenvalue": eigenvalue, "null_direction": null_direction })),
        Error::DegenerateSpectrum {
            i,
            j,
            lambda_i,
            lambda_j,
            tol,
        } => Some(json!({ "i": i, "j": j, "lambda_i": lambda_i, "lambda_j": lambda_j, "tol": tol })),
        Error::RankChangeDetected(leak) => Some(json!({ "kernel_leakage": leak })),
        _ => None,
    };
    if let Some(d) = detail {
        record["error"]["detail"] = d;
    }
    record
}
