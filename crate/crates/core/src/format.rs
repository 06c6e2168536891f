//! Fixed-precision text output shared by the JSON and CSV writers.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! outputs are byte-stable and round-trip exactly.

use std::io;

use serde::Serialize;

/// `x` with 17 significant digits, e.g. `1.3694384060045659e0`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0
        return format!("{:.16e}", 0.0f64);
    }
    format!("{x:.16e}")
}

/// JSON formatter writing every float through [`sig17`].
#[derive(Debug, Clone, Default)]
pub struct Sig17Formatter {
    indent: usize,
    has_value: bool,
}

impl Sig17Formatter {
    fn newline_indent<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(sig17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    // pretty printing, mirroring serde_json's PrettyFormatter with two spaces
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline_indent(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline_indent(w)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline_indent(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline_indent(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter::default());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sig17(1.0), "1.0000000000000000e0");
        assert_eq!(sig17(-0.0), "0.0000000000000000e0");
        assert_eq!(sig17(std::f64::consts::PI), "3.1415926535897931e0");
        let x = 0.1 + 0.2;
        assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_round_trip() {
        #[derive(Serialize, serde::Deserialize, PartialEq, Debug)]
        struct P {
            a: f64,
            b: Vec<f64>,
            n: usize,
        }
        let p = P {
            a: 1.0 / 3.0,
            b: vec![1e-300, -2.5, 0.0],
            n: 4,
        };
        let s = to_json_string(&p).unwrap();
        assert!(s.contains("3.3333333333333331e-1"));
        let back: P = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
