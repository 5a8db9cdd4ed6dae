//! Grid specifications `a:b:N` (uniform) and `a:b:logN` (geometric).

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub log: bool,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                if self.log {
                    self.lo * (self.hi / self.lo).powf(s)
                } else {
                    self.lo + (self.hi - self.lo) * s
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let grid = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Grid { lo: v, hi: v, count: 1, log: false }
            }
            [a, b, n] => {
                let (log, n) = match n.strip_prefix("log") {
                    Some(rest) => (true, rest),
                    None => (false, *n),
                };
                let count = n.parse::<usize>().map_err(|e| format!("{n:?}: {e}"))?;
                Grid { lo: num(a)?, hi: num(b)?, count, log }
            }
            _ => return Err(format!("expected a:b:N, a:b:logN or a single value, got {s:?}")),
        };
        if grid.count == 0 {
            return Err("grid needs at least one point".into());
        }
        if !grid.lo.is_finite() || !grid.hi.is_finite() || grid.hi < grid.lo {
            return Err(format!("invalid range {}..{}", grid.lo, grid.hi));
        }
        if grid.log && !(grid.lo > 0.0) {
            return Err("log grid needs a positive lower end".into());
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_uniform_and_log() {
        let g: Grid = "0:1:5".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l: Grid = "1:64:log16".parse().unwrap();
        let p = l.points();
        assert_eq!(p.len(), 16);
        assert!((p[15] - 64.0).abs() < 1e-12 && p[0] == 1.0);
        assert_eq!("2.5".parse::<Grid>().unwrap().points(), vec![2.5]);
        assert!("1:0:3".parse::<Grid>().is_err());
        assert!("0:1:log3".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
    }
}
