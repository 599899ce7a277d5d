use std::fmt;
use std::str::FromStr;

/// The `--eps` argument: `0.3`, `grid:lo:hi:count[:log]` or `search:lo:hi`.
#[derive(Clone, Debug, PartialEq)]
pub enum EpsSpec {
    Single(f64),
    Grid { lo: f64, hi: f64, count: usize, log: bool },
    Search { lo: f64, hi: f64 },
}

impl EpsSpec {
    pub fn grid(&self) -> Option<Vec<f64>> {
        match *self {
            EpsSpec::Grid { lo, hi, count, log: false } => Some(qbstab::linear_grid(lo, hi, count)),
            EpsSpec::Grid { lo, hi, count, log: true } => Some(qbstab::log_grid(lo, hi, count)),
            _ => None,
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{what}: {s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be positive and finite, got {v}"))
    }
}

fn range(lo: &str, hi: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = (number(lo, "lo")?, number(hi, "hi")?);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("need lo < hi, got {lo} and {hi}"))
    }
}

impl FromStr for EpsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(EpsSpec::Single(number(v, "epsilon")?)),
            ["grid", lo, hi, count, rest @ ..] => {
                let (lo, hi) = range(lo, hi)?;
                let count: usize = count.parse().map_err(|_| format!("grid count {count:?} is not an integer"))?;
                if count < 2 {
                    return Err("a grid needs at least 2 points".into());
                }
                let log = match rest {
                    [] => false,
                    ["log"] => true,
                    _ => return Err(format!("unexpected grid suffix in {s:?}")),
                };
                Ok(EpsSpec::Grid { lo, hi, count, log })
            }
            ["search", lo, hi] => {
                let (lo, hi) = range(lo, hi)?;
                Ok(EpsSpec::Search { lo, hi })
            }
            _ => Err(format!("cannot parse {s:?}; use a number, grid:lo:hi:count[:log] or search:lo:hi")),
        }
    }
}

impl fmt::Display for EpsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsSpec::Single(v) => write!(f, "{v}"),
            EpsSpec::Grid { lo, hi, count, log } => {
                write!(f, "grid:{lo}:{hi}:{count}{}", if *log { ":log" } else { "" })
            }
            EpsSpec::Search { lo, hi } => write!(f, "search:{lo}:{hi}"),
        }
    }
}
