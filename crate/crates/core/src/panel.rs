//! Panels of `(Y, W)` trajectories on an equidistant grid.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::model::Grid;

pub const PANEL_CSV_HEADER: &str = "unit,k,t,Y,W";

/// `n` units × `J + 1` grid points × `(Y, W)`, stored unit-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPanel {
    grid: Grid,
    units: usize,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl TrajectoryPanel {
    /// Builds a panel from unit-major `[unit][k][Y, W]` values.
    pub fn from_values(grid: Grid, units: usize, values: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if units == 0 {
            return Err(invalid("panel needs at least one unit"));
        }
        let want = units * (grid.steps() + 1) * 2;
        if values.len() != want {
            return Err(invalid(format!(
                "panel of {units} units on {} steps needs {want} values, got {}",
                grid.steps(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("panel contains non-finite values".into()));
        }
        Ok(TrajectoryPanel { grid, units, values, seed })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn stride(&self) -> usize {
        (self.grid.steps() + 1) * 2
    }

    /// Interleaved `[Y0, W0, Y1, W1, ...]` for one unit.
    pub fn unit(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.values[i * s..(i + 1) * s]
    }

    pub fn y(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.stride() + 2 * k]
    }

    pub fn w(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.stride() + 2 * k + 1]
    }

    /// Cross-unit sample mean of `Y` at `t_k`.
    pub fn mean_y(&self, k: usize) -> f64 {
        (0..self.units).map(|i| self.y(i, k)).sum::<f64>() / self.units as f64
    }

    /// Keeps every `factor`-th grid point, e.g. `factor = 2` halves `J`.
    pub fn subsample(&self, factor: usize) -> Result<TrajectoryPanel> {
        let grid = self.grid.coarsen(factor)?;
        let mut values = Vec::with_capacity(self.units * (grid.steps() + 1) * 2);
        for i in 0..self.units {
            let unit = self.unit(i);
            for k in 0..=grid.steps() {
                values.extend_from_slice(&unit[2 * k * factor..2 * k * factor + 2]);
            }
        }
        Ok(TrajectoryPanel { grid, units: self.units, values, seed: self.seed })
    }

    /// Long-format CSV: `unit,k,t,Y,W`, shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        writeln!(out, "{PANEL_CSV_HEADER}")?;
        let times = self.grid.times();
        for i in 0..self.units {
            for (k, t) in times.iter().enumerate() {
                line.clear();
                let _ = write!(
                    line,
                    "{i},{k},{},{},{}",
                    fmt_f64(*t),
                    fmt_f64(self.y(i, k)),
                    fmt_f64(self.w(i, k))
                );
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). Rows must
    /// be ordered by unit, then `k`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<TrajectoryPanel> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != PANEL_CSV_HEADER {
            return Err(invalid(format!("expected header '{PANEL_CSV_HEADER}', got '{header}'")));
        }
        let mut values = Vec::new();
        let mut steps = 0usize;
        let mut horizon = 0.0;
        let mut units = 0usize;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || invalid(format!("malformed panel row {}: '{line}'", lineno + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let unit: usize = f[0].parse().map_err(|_| bad())?;
            let k: usize = f[1].parse().map_err(|_| bad())?;
            let t: f64 = f[2].parse().map_err(|_| bad())?;
            if k == 0 && unit != units {
                return Err(bad());
            }
            if k == 0 {
                units += 1;
            }
            if unit == 0 && k >= steps {
                steps = k;
                horizon = t;
            }
            values.push(f[3].parse().map_err(|_| bad())?);
            values.push(f[4].parse().map_err(|_| bad())?);
        }
        let grid = Grid::new(steps, horizon)?;
        TrajectoryPanel::from_values(grid, units, values, None)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
