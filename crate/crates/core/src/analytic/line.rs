use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LineGrid;

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn check_diffusion(diffusion: f64) -> Result<()> {
    if diffusion > 0.0 && diffusion.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("diffusion coefficient {diffusion} must be positive")))
    }
}

fn elapsed(t: f64, t0: f64) -> Result<f64> {
    if t > t0 {
        Ok(t - t0)
    } else {
        Err(Error::DegenerateTime { t, t0 })
    }
}

/// Free-space heat kernel of `f_t = D f_xx`: mean `x0`, variance `2 D (t - t0)`.
pub fn gaussian_1d(x: f64, t: f64, x0: f64, t0: f64, diffusion: f64) -> Result<f64> {
    check_diffusion(diffusion)?;
    let tau = elapsed(t, t0)?;
    let four_dt = 4.0 * diffusion * tau;
    Ok((-(x - x0).powi(2) / four_dt).exp() / (PI * four_dt).sqrt())
}

/// Eventual absorption probabilities of the two-agent walk on `[0, N]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSplit {
    /// Probability of ending at `x1 = 0` (agent 2 holds everything).
    pub u: f64,
    /// Probability of ending at `x1 = N`.
    pub v: f64,
}

pub fn absorption_split(total: f64, x0: f64) -> Result<AbsorptionSplit> {
    if !(total > 0.0) {
        return Err(Error::OutOfRange(format!("total {total} must be positive")));
    }
    if !(0.0..=total).contains(&x0) {
        return Err(Error::OutOfRange(format!("start {x0} outside [0, {total}]")));
    }
    let v = x0 / total;
    Ok(AbsorptionSplit { u: 1.0 - v, v })
}

/// Mixed density of the walk on `[0, N]` with sticky endpoints: a
/// continuous part on `(0, N)` plus atoms at `0` and `N`.
///
/// The continuous part is the two-wall image series
/// `sum_k G(x - x0 - 2kN) - G(x + x0 - 2kN)`; the atoms are the masses that
/// have crossed each wall, which tend to the absorption split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSolution1d {
    pub total: f64,
    pub x0: f64,
    pub diffusion: f64,
    pub elapsed: f64,
    pub time: f64,
}

/// Above this multiple of the slowest decay rate the interior is negligible.
const SETTLED: f64 = 60.0;

impl ImageSolution1d {
    fn sigma(&self) -> f64 {
        (2.0 * self.diffusion * self.elapsed).sqrt()
    }

    fn pure_atom(&self) -> Option<[f64; 2]> {
        if self.x0 <= 0.0 {
            Some([1.0, 0.0])
        } else if self.x0 >= self.total {
            Some([0.0, 1.0])
        } else {
            None
        }
    }

    fn settled(&self) -> bool {
        self.diffusion * (PI / self.total).powi(2) * self.elapsed > SETTLED
    }

    /// `(centre, sign)` of every image kept in the series.
    fn images(&self) -> Vec<(f64, f64)> {
        let n = self.total;
        let k_max = ((n + 10.0 * self.sigma()) / (2.0 * n)).ceil() as i64 + 1;
        let mut out = Vec::with_capacity(4 * k_max as usize + 2);
        for k in -k_max..=k_max {
            let shift = 2.0 * k as f64 * n;
            out.push((self.x0 + shift, 1.0));
            out.push((-self.x0 + shift, -1.0));
        }
        out
    }

    /// Continuous part at `x`; zero outside `(0, N)`.
    pub fn density(&self, x: f64) -> f64 {
        if self.pure_atom().is_some() || self.settled() || x <= 0.0 || x >= self.total {
            return 0.0;
        }
        let sigma = self.sigma();
        let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
        self.images()
            .iter()
            .map(|&(c, s)| s * norm * (-0.5 * ((x - c) / sigma).powi(2)).exp())
            .sum::<f64>()
            .max(0.0)
    }

    /// Continuous mass in `[a, b]`, clipped to `[0, N]`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.min(self.total);
        if b <= a || self.pure_atom().is_some() || self.settled() {
            return 0.0;
        }
        let sigma = self.sigma();
        self.images()
            .iter()
            .map(|&(c, s)| s * (normal_cdf((b - c) / sigma) - normal_cdf((a - c) / sigma)))
            .sum::<f64>()
            .max(0.0)
    }

    /// Masses in consecutive intervals `[bounds[i], bounds[i + 1]]`.
    pub fn interval_masses(&self, bounds: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; bounds.len().saturating_sub(1)];
        self.fill_interval_masses(bounds, &mut out);
        out
    }

    pub(crate) fn fill_interval_masses(&self, bounds: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.pure_atom().is_some() || self.settled() {
            return;
        }
        let sigma = self.sigma();
        let reach = 10.0 * sigma;
        for (c, s) in self.images() {
            let lo = c - reach;
            let hi = c + reach;
            if hi < bounds[0] || lo > bounds[bounds.len() - 1] {
                continue;
            }
            let mut prev = normal_cdf((bounds[0] - c) / sigma);
            for (i, &b) in bounds.iter().enumerate().skip(1) {
                let cur = normal_cdf((b - c) / sigma);
                out[i - 1] += s * (cur - prev);
                prev = cur;
            }
        }
        out.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// Masses stuck at `0` and at `N`.
    pub fn atoms(&self) -> [f64; 2] {
        if let Some(a) = self.pure_atom() {
            return a;
        }
        let split = AbsorptionSplit {
            u: 1.0 - self.x0 / self.total,
            v: self.x0 / self.total,
        };
        if self.settled() {
            return [split.u, split.v];
        }
        let scale = self.sigma() * SQRT_2;
        let crossed = |wall: f64| -> f64 {
            self.images()
                .iter()
                .map(|&(c, s)| {
                    let d = (wall - c) * if wall == 0.0 { -1.0 } else { 1.0 };
                    s * 0.5 * d.signum() * libm::erfc(d.abs() / scale)
                })
                .sum::<f64>()
        };
        [
            crossed(0.0).clamp(0.0, split.u),
            crossed(self.total).clamp(0.0, split.v),
        ]
    }

    /// Atoms as `(location, mass)` pairs.
    pub fn atom_list(&self) -> Vec<(f64, f64)> {
        let [a, b] = self.atoms();
        vec![(0.0, a), (self.total, b)]
    }

    pub fn continuous_mass(&self) -> f64 {
        self.interval_mass(0.0, self.total)
    }

    pub fn total_mass(&self) -> f64 {
        let [a, b] = self.atoms();
        self.continuous_mass() + a + b
    }

    /// Node values of the density on `cells` uniform cells plus the atoms.
    pub fn sample_grid(&self, cells: usize) -> LineGrid {
        let mut grid = LineGrid::zeros(self.total, cells, self.time);
        for i in 1..cells {
            grid.density[i] = self.density(grid.node(i));
        }
        grid.atoms = self.atoms();
        grid
    }

    /// Cell masses assigned to nodes (divided by `h`), with the first and
    /// last interior nodes also taking the half cell next to the wall.
    pub fn cell_grid(&self, cells: usize) -> LineGrid {
        let mut grid = LineGrid::zeros(self.total, cells, self.time);
        let h = grid.spacing();
        let masses = self.interval_masses(&cell_bounds(self.total, cells));
        for (i, m) in masses.iter().enumerate() {
            grid.density[i + 1] = m / h;
        }
        grid.atoms = self.atoms();
        grid
    }
}

/// `0, 1.5h, 2.5h, ..., N - 1.5h, N`: one interval per interior node.
pub(crate) fn cell_bounds(total: f64, cells: usize) -> Vec<f64> {
    let h = total / cells as f64;
    let mut bounds = Vec::with_capacity(cells);
    bounds.push(0.0);
    for i in 1..cells - 1 {
        bounds.push((i as f64 + 0.5) * h);
    }
    bounds.push(total);
    bounds
}

pub fn image_solution_1d(x0: f64, t: f64, t0: f64, total: f64, diffusion: f64) -> Result<ImageSolution1d> {
    absorption_split(total, x0)?;
    check_diffusion(diffusion)?;
    let interior = x0 > 0.0 && x0 < total;
    let tau = if interior { elapsed(t, t0)? } else { (t - t0).max(0.0) };
    Ok(ImageSolution1d {
        total,
        x0,
        diffusion,
        elapsed: tau,
        time: t,
    })
}

/// `Q(x | x0) - u Q(x | 0) - v Q(x | N)` with single images at the walls.
/// This form is negative near the walls at short times and does not
/// conserve mass; [`image_solution_1d`] is the working solution.
pub fn boundary_point_image_density(x: f64, t: f64, x0: f64, t0: f64, total: f64, diffusion: f64) -> Result<f64> {
    let split = absorption_split(total, x0)?;
    Ok(gaussian_1d(x, t, x0, t0, diffusion)?
        - split.u * gaussian_1d(x, t, 0.0, t0, diffusion)?
        - split.v * gaussian_1d(x, t, total, t0, diffusion)?)
}
