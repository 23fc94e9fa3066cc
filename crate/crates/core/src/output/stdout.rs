use std::fmt;

use crate::error::{Error, Result};

/// Grammar of a progress line, documented for external consumers.
pub const STDOUT_LINE_PATTERN: &str = r"^it=(\d+) t=(\S+) dt=(\S+) E=(\S+)(?: Z=(\S+))? wall=(\S+)$";

/// One progress line. Floats are printed with 17 significant digits, so
/// parsing a line gives back the exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct StdoutLine {
    pub it: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub enstrophy: Option<f64>,
    pub walltime: f64,
}

impl fmt::Display for StdoutLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "it={} t={:.16e} dt={:.16e} E={:.16e}", self.it, self.t, self.dt, self.energy)?;
        if let Some(z) = self.enstrophy {
            write!(f, " Z={z:.16e}")?;
        }
        write!(f, " wall={:.16e}", self.walltime)
    }
}

impl StdoutLine {
    pub fn parse(line: &str) -> Result<Self> {
        let mut tokens = line.trim_end().split(' ');
        let mut column = 1;
        let mut next = |key: &str, optional: bool| -> Result<Option<String>> {
            let err = |column, msg: String| Error::Parse { line: 1, column, message: msg };
            let mut peek = tokens.clone();
            match peek.next().and_then(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('='))) {
                Some(v) => {
                    let tok = tokens.next().unwrap_or_default();
                    let start = column;
                    column += tok.len() + 1;
                    if v.is_empty() {
                        return Err(err(start, format!("empty value for `{key}`")));
                    }
                    Ok(Some(v.to_string()))
                }
                None if optional => Ok(None),
                None => Err(err(column, format!("expected `{key}=`"))),
            }
        };
        let num = |s: Option<String>, key: &str| -> Result<f64> {
            let s = s.unwrap_or_default();
            s.parse().map_err(|_| Error::Parse {
                line: 1,
                column: 1,
                message: format!("invalid number `{s}` for `{key}`"),
            })
        };
        let it_text = next("it", false)?.unwrap_or_default();
        let it = it_text.parse().map_err(|_| Error::Parse {
            line: 1,
            column: 1,
            message: format!("invalid iteration `{it_text}`"),
        })?;
        let t = num(next("t", false)?, "t")?;
        let dt = num(next("dt", false)?, "dt")?;
        let energy = num(next("E", false)?, "E")?;
        let enstrophy = match next("Z", true)? {
            Some(z) => Some(num(Some(z), "Z")?),
            None => None,
        };
        let walltime = num(next("wall", false)?, "wall")?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse {
                line: 1,
                column,
                message: format!("unexpected trailing text `{extra}`"),
            });
        }
        Ok(StdoutLine { it, t, dt, energy, enstrophy, walltime })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        for z in [None, Some(1.0 / 7.0)] {
            let l = StdoutLine { it: 12, t: 0.1 + 0.2, dt: 1e-3, energy: 0.49999, enstrophy: z, walltime: 0.03 };
            let text = l.to_string();
            assert!(text.starts_with("it=12 t="));
            assert_eq!(StdoutLine::parse(&text).unwrap(), l);
        }
    }

    #[test]
    fn malformed_lines_fail() {
        for bad in ["", "it=1", "it=x t=1 dt=1 E=1 wall=1", "it=1 t=1 dt=1 E=1 wall=1 extra", "it=1 t= dt=1 E=1 wall=1"] {
            assert!(StdoutLine::parse(bad).is_err(), "{bad}");
        }
    }
}
