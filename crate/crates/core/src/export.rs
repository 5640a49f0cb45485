//! CSV helpers shared by the trajectory and control exports.

use std::io::Write;

use crate::error::Result;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub fn write_row<W: Write>(w: &mut W, cells: &[Option<f64>]) -> Result<()> {
    let line: Vec<String> = cells
        .iter()
        .map(|c| c.map(fmt17).unwrap_or_default())
        .collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.30000000000000004] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt17(f64::NAN), "");
    }

    #[test]
    fn rows() {
        let mut buf = Vec::new();
        write_row(&mut buf, &[Some(1.0), None, Some(-0.5)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "1.0000000000000000e0,,-5.0000000000000000e-1\n"
        );
    }
}
