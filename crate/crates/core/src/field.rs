//! Dense per-pixel scalar grids and the finite-difference stencils shared by
//! the gradient and flow modules.
//!
//! First derivatives use central differences in the interior and one-sided
//! differences on the outermost row/column. Second derivatives use the
//! three-point stencil with the border sample replicated.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dims(width * height, values.len()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    pub(crate) fn require_min_size(&self, min: usize) -> Result<()> {
        if self.width < min || self.height < min {
            return Err(Error::InvalidInput(format!(
                "field {}x{} too small, need at least {min}x{min}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn first_diff(f: &ScalarField, axis: Axis) -> ScalarField {
    let (w, h) = (f.width, f.height);
    ScalarField::from_fn(w, h, |x, y| {
        let (pos, len) = match axis {
            Axis::X => (x, w),
            Axis::Y => (y, h),
        };
        let at = |p: usize| match axis {
            Axis::X => f.at(p, y),
            Axis::Y => f.at(x, p),
        };
        if pos == 0 {
            at(1) - at(0)
        } else if pos == len - 1 {
            at(len - 1) - at(len - 2)
        } else {
            0.5 * (at(pos + 1) - at(pos - 1))
        }
    })
}

fn second_diff(f: &ScalarField, axis: Axis) -> ScalarField {
    let (w, h) = (f.width, f.height);
    ScalarField::from_fn(w, h, |x, y| {
        let (pos, len) = match axis {
            Axis::X => (x, w),
            Axis::Y => (y, h),
        };
        let at = |p: usize| match axis {
            Axis::X => f.at(p, y),
            Axis::Y => f.at(x, p),
        };
        let prev = at(pos.saturating_sub(1));
        let next = at((pos + 1).min(len - 1));
        next - 2.0 * at(pos) + prev
    })
}

/// ∂f/∂x. Requires at least 3×3.
pub fn d_dx(f: &ScalarField) -> Result<ScalarField> {
    f.require_min_size(3)?;
    Ok(first_diff(f, Axis::X))
}

/// ∂f/∂y. Requires at least 3×3.
pub fn d_dy(f: &ScalarField) -> Result<ScalarField> {
    f.require_min_size(3)?;
    Ok(first_diff(f, Axis::Y))
}

pub fn d2_dx2(f: &ScalarField) -> Result<ScalarField> {
    f.require_min_size(3)?;
    Ok(second_diff(f, Axis::X))
}

pub fn d2_dy2(f: &ScalarField) -> Result<ScalarField> {
    f.require_min_size(3)?;
    Ok(second_diff(f, Axis::Y))
}
