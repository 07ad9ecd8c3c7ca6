//! Sweep specifications and the cartesian grid they span.

use std::fmt;
use std::str::FromStr;

use ctmcgrid_core::Value;

/// `NAME=START:STEP:END`, inclusive of `END` when the steps land on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub start: Value,
    pub step: Value,
    pub end: Value,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, range) = s.split_once('=').ok_or_else(|| format!("expected NAME=START:STEP:END, got `{s}`"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let [start, step, end] = parts[..] else {
            return Err(format!("expected START:STEP:END after `{name}=`, got `{range}`"));
        };
        let num = |t: &str| match Value::parse_literal(t) {
            Some(v @ (Value::Int(_) | Value::Real(_))) => Ok(v),
            _ => Err(format!("`{t}` is not a number")),
        };
        let spec = SweepSpec { name: name.trim().to_string(), start: num(start)?, step: num(step)?, end: num(end)? };
        if spec.name.is_empty() {
            return Err("sweep needs a constant name".into());
        }
        spec.points()?;
        Ok(spec)
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.name, self.start, self.step, self.end)
    }
}

fn as_f64(v: Value) -> f64 {
    v.as_f64().expect("sweep bounds are numeric")
}

impl SweepSpec {
    fn is_integral(&self) -> bool {
        [self.start, self.step, self.end].iter().all(|v| matches!(v, Value::Int(_)))
    }

    /// Number of points.
    pub fn points(&self) -> Result<usize, String> {
        let (a, h, b) = (as_f64(self.start), as_f64(self.step), as_f64(self.end));
        if h == 0.0 {
            return Err(format!("sweep `{}` has a zero step", self.name));
        }
        let span = (b - a) / h;
        if span < 0.0 {
            return Err(format!("sweep `{}` never reaches its end", self.name));
        }
        if self.is_integral() {
            return Ok((span.floor() as usize) + 1);
        }
        // Tolerate representation error in the last step.
        Ok(((span + 1e-9).floor() as usize) + 1)
    }

    pub fn values(&self) -> Vec<Value> {
        let n = self.points().expect("validated on parse");
        match (self.start, self.step) {
            (Value::Int(a), Value::Int(h)) if self.is_integral() => {
                (0..n as i64).map(|i| Value::Int(a + i * h)).collect()
            }
            _ => {
                let (a, h) = (as_f64(self.start), as_f64(self.step));
                (0..n).map(|i| Value::Real(a + i as f64 * h)).collect()
            }
        }
    }
}

/// Grid points in row-major order: the first sweep varies slowest.
pub fn grid(specs: &[SweepSpec], cap: usize) -> Result<Vec<Vec<(String, Value)>>, String> {
    let mut total: usize = 1;
    for s in specs {
        total = total.saturating_mul(s.points()?);
    }
    if total > cap {
        return Err(format!("sweep has {total} grid points, above the cap of {cap} (see --max-points)"));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = specs.iter().find(|s| !seen.insert(s.name.as_str())) {
        return Err(format!("constant `{}` is swept twice", dup.name));
    }
    let mut points = vec![Vec::new()];
    for s in specs {
        let values = s.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((s.name.clone(), *v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_counts() {
        let s: SweepSpec = "RECOVERYTIME_SN=12:12:72".parse().unwrap();
        assert_eq!(s.points(), Ok(6));
        assert_eq!(s.values()[5], Value::Int(72));
        let r: SweepSpec = "x=0:0.1:0.3".parse().unwrap();
        assert_eq!(r.points(), Ok(4));
        let down: SweepSpec = "x=3:-1:1".parse().unwrap();
        assert_eq!(down.values(), vec![Value::Int(3), Value::Int(2), Value::Int(1)]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!("x=1:0:3".parse::<SweepSpec>().is_err());
        assert!("x=3:1:1".parse::<SweepSpec>().is_err());
        assert!("x=1:2".parse::<SweepSpec>().is_err());
        assert!("1:2:3".parse::<SweepSpec>().is_err());
        assert!("x=a:1:2".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn grid_is_row_major() {
        let specs: Vec<SweepSpec> = ["a=1:1:2", "b=10:10:30"].iter().map(|s| s.parse().unwrap()).collect();
        let g = grid(&specs, 100).unwrap();
        let flat: Vec<(i64, i64)> = g
            .iter()
            .map(|p| match (p[0].1, p[1].1) {
                (Value::Int(a), Value::Int(b)) => (a, b),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(flat, [(1, 10), (1, 20), (1, 30), (2, 10), (2, 20), (2, 30)]);
        assert!(grid(&specs, 5).is_err());
        assert_eq!(grid(&[], 1).unwrap(), vec![Vec::new()]);
    }
}
