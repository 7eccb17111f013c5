//! Parsing of value lists given on the command line.
//!
//! A grid is either a single number, a comma-separated list, or
//! `start:stop:count` for `count` evenly spaced values including both ends.

use crate::error::CliError;

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("malformed grid {spec:?}: {why}"));
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.trim().parse().map_err(|_| bad("not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite"))
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [list] => list.split(',').map(num).collect(),
        [start, stop, count] => {
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize = count.trim().parse().map_err(|_| bad("count must be an integer"))?;
            if count == 0 {
                return Err(bad("count must be positive"));
            }
            if count == 1 {
                return Ok(vec![start]);
            }
            if stop < start {
                return Err(bad("stop is below start"));
            }
            let last = (count - 1) as f64;
            Ok((0..count)
                .map(|i| if i + 1 == count { stop } else { start + (stop - start) * i as f64 / last })
                .collect())
        }
        _ => Err(bad("expected VALUE, V1,V2,... or START:STOP:COUNT")),
    }
}

/// `lo:hi` interval.
pub fn parse_interval(spec: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("malformed interval {spec:?}: expected LO:HI with LO < HI"));
    let (lo, hi) = spec.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo < hi && lo.is_finite() && hi.is_finite() {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}

pub fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>, CliError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("malformed {what} list {spec:?}")))
        })
        .collect()
}
