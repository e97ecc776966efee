//! Text form of band-limited functions: sums of products of
//! numbers, `x`, `y`, `z`, Legendre polynomials `P<n>` and real harmonics
//! `Y<l>_<m>`, e.g. `1 + 0.5*x*y - P3` or `Y2_-1*z`.

use super::SphereFunction;
use crate::error::{Error, Result};

fn factor(tok: &str) -> Result<SphereFunction> {
    let bad = || Error::Parse(format!("unrecognized factor `{tok}`"));
    match tok {
        "x" => return Ok(SphereFunction::x()),
        "y" => return Ok(SphereFunction::y()),
        "z" => return Ok(SphereFunction::z()),
        _ => {}
    }
    if let Some(n) = tok.strip_prefix('P') {
        let n: usize = n.parse().map_err(|_| bad())?;
        return Ok(SphereFunction::legendre(n));
    }
    if let Some(rest) = tok.strip_prefix('Y') {
        let (l, m) = rest.split_once('_').ok_or_else(bad)?;
        let l: usize = l.parse().map_err(|_| bad())?;
        let m: i64 = m.parse().map_err(|_| bad())?;
        if m.unsigned_abs() as usize > l {
            return Err(Error::Parse(format!("|m| > l in `{tok}`")));
        }
        return Ok(SphereFunction::harmonic(l, m));
    }
    let c: f64 = tok.parse().map_err(|_| bad())?;
    if !c.is_finite() {
        return Err(bad());
    }
    Ok(SphereFunction::constant(c))
}

fn term(src: &str) -> Result<SphereFunction> {
    let mut acc: Option<SphereFunction> = None;
    for tok in src.split('*') {
        let tok = tok.trim();
        if tok.is_empty() {
            return Err(Error::Parse(format!("empty factor in `{src}`")));
        }
        let f = factor(tok)?;
        acc = Some(match acc {
            None => f,
            Some(a) if a.band() == 0 => &f * a.mean(),
            Some(a) if f.band() == 0 => &a * f.mean(),
            Some(a) => a.multiply(&f),
        });
    }
    acc.ok_or_else(|| Error::Parse("empty term".into()))
}

/// Parses a function expression; see the module docs for the grammar.
pub fn parse_function(src: &str) -> Result<SphereFunction> {
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty function".into()));
    }
    let mut total = SphereFunction::zero(0);
    let mut sign = 1.0;
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut i = 0;
    let flush = |from: usize, to: usize, sign: f64, total: &mut SphereFunction| -> Result<()> {
        let t = term(&s[from..to])?;
        *total = &*total + &(t * sign);
        Ok(())
    };
    if bytes[0] == b'-' || bytes[0] == b'+' {
        sign = if bytes[0] == b'-' { -1.0 } else { 1.0 };
        start = 1;
        i = 1;
    }
    while i < bytes.len() {
        let c = bytes[i];
        // a sign splits terms unless it belongs to an exponent or a harmonic order
        let part_of_token = i > 0 && matches!(bytes[i - 1], b'e' | b'E' | b'_' | b'*');
        if (c == b'+' || c == b'-') && !part_of_token {
            flush(start, i, sign, &mut total)?;
            sign = if c == b'-' { -1.0 } else { 1.0 };
            start = i + 1;
        }
        i += 1;
    }
    flush(start, bytes.len(), sign, &mut total)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &SphereFunction, b: &SphereFunction) -> bool {
        let band = a.band().max(b.band());
        (&a.truncate(band) - &b.truncate(band)).coeffs().iter().all(|c| c.abs() < 1e-13)
    }

    #[test]
    fn atoms() {
        assert!(close(&parse_function("z").unwrap(), &SphereFunction::z()));
        assert!(close(&parse_function("P2").unwrap(), &SphereFunction::legendre(2)));
        assert!(close(&parse_function("1").unwrap(), &SphereFunction::constant(1.0)));
        assert!(close(&parse_function("Y2_-1").unwrap(), &SphereFunction::harmonic(2, -1)));
    }

    #[test]
    fn sums_and_products() {
        let f = parse_function("1 + 0.5*x*y - P3").unwrap();
        let expect = &(&SphereFunction::constant(1.0) + &(SphereFunction::x().multiply(&SphereFunction::y()) * 0.5))
            - &SphereFunction::legendre(3);
        assert!(close(&f, &expect));
        let g = parse_function("-z*z+1e-1").unwrap();
        let expect = &(SphereFunction::z().multiply(&SphereFunction::z()) * -1.0) + &SphereFunction::constant(0.1);
        assert!(close(&g, &expect));
        assert!(close(&parse_function("2*-1").unwrap(), &SphereFunction::constant(-2.0)));
    }

    #[test]
    fn errors() {
        for bad in ["", "w", "P", "Y3_4", "x**y", "x+", "nan"] {
            assert!(parse_function(bad).is_err(), "{bad}");
        }
    }
}
