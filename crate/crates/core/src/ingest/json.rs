//! JSON output with controlled float formatting.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// How floats are printed in written documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatStyle {
    /// Shortest exact representation, padded to at least three decimals.
    /// Used for timestamps.
    Timestamp,
    /// 17 significant digits in scientific notation. Used for tensors.
    Scientific,
    /// Shortest exact representation.
    Shortest,
}

struct DocFormatter {
    pretty: Option<PrettyFormatter<'static>>,
    style: FloatStyle,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                match self.pretty.as_mut() {
                    Some(p) => p.$name(writer $(, $arg)*),
                    None => serde_json::ser::CompactFormatter.$name(writer $(, $arg)*),
                }
            }
        )*
    };
}

impl Formatter for DocFormatter {
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

    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value, self.style).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub(crate) fn format_float(value: f64, style: FloatStyle) -> String {
    match style {
        FloatStyle::Scientific => format!("{value:.16e}"),
        FloatStyle::Shortest => {
            let s = format!("{value}");
            if s.contains('.') || s.contains('e') {
                s
            } else {
                format!("{s}.0")
            }
        }
        FloatStyle::Timestamp => {
            let mut s = format!("{value}");
            match s.find('.') {
                Some(dot) => {
                    let decimals = s.len() - dot - 1;
                    for _ in decimals..3 {
                        s.push('0');
                    }
                }
                None => s.push_str(".000"),
            }
            s
        }
    }
}

/// Serialize `value` as JSON. Non-finite floats must be rejected by the
/// caller beforehand; they have no JSON representation.
pub fn to_json_string<T: Serialize>(value: &T, style: FloatStyle, pretty: bool) -> String {
    let mut out = Vec::new();
    let formatter = DocFormatter {
        pretty: pretty.then(PrettyFormatter::new),
        style,
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value
        .serialize(&mut ser)
        .expect("serializing in-memory documents cannot fail");
    let mut s = String::from_utf8(out).expect("serde_json emits UTF-8");
    s.push('\n');
    s
}
