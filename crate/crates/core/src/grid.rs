//! Periodic cell-centered grids and the density fields that live on them.
//!
//! The spatial domain is `[0, L)` with periodic boundaries, split into `N`
//! cells of width `Δx = L/N`. Cell `n` is centered at `x_n = (n + 1/2)Δx`.
//! Density fields carry one value per cell with units of 1/length; solver
//! outputs integrate to one over the domain, while observations are
//! unconstrained reals.

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Uniform cell-centered grid on `[0, L)` with periodic wrap-around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    length: f64,
    cells: usize,
}

impl PeriodicGrid {
    /// Builds a grid of `cells` cells covering `[0, length)`.
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        if cells == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        Ok(PeriodicGrid { length, cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Cell width `Δx = L/N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Center of cell `n`, `x_n = (n + 1/2)Δx`.
    pub fn center(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.spacing()
    }

    /// All cell centers in order.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|n| self.center(n)).collect()
    }

    /// Maps a finite coordinate into `[0, L)` modulo the domain length.
    pub fn wrap(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::invalid(format!(
                "cannot wrap non-finite coordinate {x}"
            )));
        }
        Ok(self.wrap_fast(x))
    }

    /// Wrap without the finiteness check, for solver inner loops.
    #[inline]
    pub(crate) fn wrap_fast(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.length);
        // rem_euclid can round up to exactly L for tiny negative inputs.
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    /// Index of the cell containing the wrapped coordinate `x in [0, L)`.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let idx = (x / self.spacing()) as usize;
        idx.min(self.cells - 1)
    }
}

/// Maps a finite coordinate into `[0, L)`; free-function form of
/// [`PeriodicGrid::wrap`].
pub fn wrap(x: f64, grid: &PeriodicGrid) -> Result<f64> {
    grid.wrap(x)
}

/// A discrete density: one real value per grid cell, units 1/length.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps a value vector as a field on `grid`. Values must be finite but
    /// may be negative (observations are unconstrained).
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "density values must be finite, got {v}"
            )));
        }
        Ok(DensityField { grid, values })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass `Σ_n v_n Δx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// Largest cell value.
    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Elementwise difference `self - other` on a shared grid.
    pub fn residual_to(&self, other: &DensityField) -> Result<Vec<f64>> {
        if self.grid != other.grid {
            return Err(Error::invalid("density fields live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect())
    }

    /// Writes the field as CSV with header `cell_index,x_center,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "cell_index,x_center,value")?;
        for (n, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", n, fmt17(self.grid.center(n)), fmt17(*v))?;
        }
        Ok(())
    }

    /// Reads a field back from the CSV form written by [`write_csv`].
    ///
    /// The grid is reconstructed from the first cell center (`x_0 = Δx/2`)
    /// and the row count.
    ///
    /// [`write_csv`]: DensityField::write_csv
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty density CSV".into()))??;
        if header.trim() != "cell_index,x_center,value" {
            return Err(Error::Parse(format!(
                "unexpected density CSV header: {header}"
            )));
        }
        let mut centers = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let idx: usize = parse_field(parts.next(), "cell_index")?;
            if idx != values.len() {
                return Err(Error::Parse(format!("non-consecutive cell index {idx}")));
            }
            centers.push(parse_field::<f64>(parts.next(), "x_center")?);
            values.push(parse_field::<f64>(parts.next(), "value")?);
        }
        if values.is_empty() {
            return Err(Error::Parse("density CSV has no rows".into()));
        }
        let spacing = 2.0 * centers[0];
        let grid = PeriodicGrid::new(spacing * values.len() as f64, values.len())?;
        DensityField::new(grid, values)
    }
}

/// A perturbed solution: the data of the inverse problem, together with the
/// noise model that generated it and the seed of the draw.
#[derive(Debug, Clone)]
pub struct Observation {
    pub field: DensityField,
    pub noise: CovarianceSpec,
    pub seed: u64,
}

pub(crate) fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse(format!("missing field {name}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse {name} from {raw:?}")))
}

/// Formats a float with 17 significant digits so that reading it back is
/// bit-exact; infinities render as `inf`/`-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}
