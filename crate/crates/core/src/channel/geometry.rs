//! Hexagonal multi-cell layouts and the IMAC channel model.
//!
//! Cells are regular hexagons with inradius `R` (half the distance between
//! adjacent base stations) and circumradius `2R/sqrt(3)`. Adjacent centers
//! sit at `2R` along the directions 0, 60, ..., 300 degrees.
//!
//! Fixed layouts:
//! - 3 cells: a triangle of mutually adjacent cells,
//! - 7 cells: a center cell and its first ring,
//! - any other N: rows of the hex lattice, `ceil(sqrt(N))` cells per row,
//!   odd rows shifted by `R`, filled in row-major order (20 cells = 4 rows of 5).

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::rng;

/// Reference distance in the path-loss model `(200 / d)^3`.
pub const REFERENCE_DISTANCE: f64 = 200.0;
pub const PATH_LOSS_EXPONENT: f64 = 3.0;
/// Standard deviation of log-normal shadowing, dB.
pub const SHADOWING_DB: f64 = 8.0;
/// Minimum user-to-BS distance applied when the inner radius is zero.
pub const DISTANCE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Base-station centers for `num_cells` cells of inradius `r_cell`.
pub fn hex_layout(num_cells: usize, r_cell: f64) -> Vec<Point> {
    let sqrt3 = 3f64.sqrt();
    let a1 = Point::new(2.0 * r_cell, 0.0);
    let a2 = Point::new(r_cell, sqrt3 * r_cell);
    let lattice = |i: f64, j: f64| Point::new(i * a1.x + j * a2.x, i * a1.y + j * a2.y);
    match num_cells {
        3 => vec![lattice(0.0, 0.0), lattice(1.0, 0.0), lattice(0.0, 1.0)],
        7 => vec![
            lattice(0.0, 0.0),
            lattice(1.0, 0.0),
            lattice(0.0, 1.0),
            lattice(-1.0, 1.0),
            lattice(-1.0, 0.0),
            lattice(0.0, -1.0),
            lattice(1.0, -1.0),
        ],
        n => {
            let per_row = (n as f64).sqrt().ceil().max(1.0) as usize;
            (0..n)
                .map(|idx| {
                    let (row, col) = (idx / per_row, idx % per_row);
                    let shift = if row % 2 == 1 { r_cell } else { 0.0 };
                    Point::new(col as f64 * 2.0 * r_cell + shift, row as f64 * sqrt3 * r_cell)
                })
                .collect()
        }
    }
}

/// True when `p` (relative to the cell center) lies inside the hexagon of inradius `r_cell`.
fn in_hexagon(dx: f64, dy: f64, r_cell: f64) -> bool {
    let s = 3f64.sqrt() / 2.0;
    dx.abs() <= r_cell && (0.5 * dx + s * dy).abs() <= r_cell && (-0.5 * dx + s * dy).abs() <= r_cell
}

/// Node positions of one IMAC drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ImacGeometry {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub cell_radius: f64,
    pub inner_radius: f64,
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
}

impl ImacGeometry {
    pub fn circumradius(&self) -> f64 {
        2.0 * self.cell_radius / 3f64.sqrt()
    }

    pub fn home(&self, user: usize) -> usize {
        user / self.users_per_cell
    }

    pub fn min_distance(&self) -> f64 {
        self.inner_radius.max(DISTANCE_FLOOR)
    }
}

/// Multi-cell uplink scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imac {
    pub num_cells: usize,
    pub num_users: usize,
    pub cell_radius: f64,
    pub inner_radius: f64,
    pub noise_power: f64,
    pub p_max: f64,
}

impl Imac {
    pub fn new(num_cells: usize, num_users: usize, cell_radius: f64, inner_radius: f64) -> Self {
        Self { num_cells, num_users, cell_radius, inner_radius, noise_power: 1.0, p_max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cells == 0 || self.num_users == 0 {
            return Err(Error::invalid("IMAC needs N >= 1 and K >= 1"));
        }
        if !self.num_users.is_multiple_of(self.num_cells) {
            return Err(Error::invalid(format!("K = {} is not divisible by N = {}", self.num_users, self.num_cells)));
        }
        if !(self.inner_radius >= 0.0 && self.inner_radius < self.cell_radius) {
            return Err(Error::invalid(format!(
                "inner radius {} must lie in [0, R = {})",
                self.inner_radius, self.cell_radius
            )));
        }
        Ok(())
    }

    /// Drops every user uniformly in the region between the inner circle and
    /// the hexagon of its home cell (rejection from the bounding disk).
    pub fn sample_geometry(&self, rng: &mut impl Rng) -> ImacGeometry {
        let users_per_cell = self.num_users / self.num_cells;
        let bs_positions = hex_layout(self.num_cells, self.cell_radius);
        let mut geo = ImacGeometry {
            num_cells: self.num_cells,
            users_per_cell,
            cell_radius: self.cell_radius,
            inner_radius: self.inner_radius,
            bs_positions,
            user_positions: Vec::with_capacity(self.num_users),
        };
        let outer = geo.circumradius();
        let d_min = geo.min_distance();
        for user in 0..self.num_users {
            let center = geo.bs_positions[geo.home(user)];
            let p = loop {
                let rho = outer * rng.random::<f64>().sqrt();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                let (dx, dy) = (rho * theta.cos(), rho * theta.sin());
                if rho >= d_min && in_hexagon(dx, dy, self.cell_radius) {
                    break Point::new(center.x + dx, center.y + dy);
                }
            };
            geo.user_positions.push(p);
        }
        geo
    }

    /// Rayleigh magnitudes with variance `(200/d)^3 * L`, `10 log10 L ~ N(0, 8^2)`,
    /// stored user-major (`[k * N + n]`).
    pub fn sample_gains(&self, geo: &ImacGeometry, rng: &mut impl Rng) -> Vec<f64> {
        let shadow = Normal::new(0.0, SHADOWING_DB).expect("finite shadowing");
        let d_min = geo.min_distance();
        let mut gains = Vec::with_capacity(self.num_users * self.num_cells);
        for user in &geo.user_positions {
            for bs in &geo.bs_positions {
                let d = user.dist(bs).max(d_min);
                let l = 10f64.powf(shadow.sample(rng) / 10.0);
                let var = (REFERENCE_DISTANCE / d).powf(PATH_LOSS_EXPONENT) * l;
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                gains.push((var * (re * re + im * im) / 2.0).sqrt());
            }
        }
        gains
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<(ImacGeometry, ProblemInstance)> {
        let geo = self.sample_geometry(rng);
        let gains = self.sample_gains(&geo, rng);
        let inst = ProblemInstance::imac(self.num_cells, self.num_users, gains, self.noise_power, self.p_max)?;
        Ok((geo, inst))
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<ProblemInstance>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        (0..n).into_par_iter().map(|i| self.sample(&mut rng::substream(seed, i as u64)).map(|(_, inst)| inst)).collect()
    }
}

/// `n` IMAC instances for `num_cells` cells, `num_users` users, cell radius
/// `cell_radius` and inner radius `inner_radius` (meters).
pub fn generate_imac(
    num_cells: usize,
    num_users: usize,
    cell_radius: f64,
    inner_radius: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<ProblemInstance>> {
    Imac::new(num_cells, num_users, cell_radius, inner_radius).generate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_have_adjacent_centers_2r_apart() {
        for n in [3usize, 7, 20] {
            let pts = hex_layout(n, 100.0);
            assert_eq!(pts.len(), n);
            let mut min = f64::INFINITY;
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    min = min.min(a.dist(b));
                }
            }
            assert!((min - 200.0).abs() < 1e-9, "N={n}: {min}");
        }
        // every cell of the 7-cell layout touches the center
        let seven = hex_layout(7, 50.0);
        for p in &seven[1..] {
            assert!((p.dist(&seven[0]) - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(Imac::new(3, 24, 100.0, 100.0).validate().is_err());
        assert!(Imac::new(3, 25, 100.0, 0.0).validate().is_err());
        assert!(Imac::new(3, 24, 100.0, 0.0).validate().is_ok());
        assert!(generate_imac(3, 24, 100.0, 150.0, 1, 0).is_err());
    }

    #[test]
    fn unit_variance_at_reference_distance() {
        assert_eq!((REFERENCE_DISTANCE / 200.0).powf(PATH_LOSS_EXPONENT) * 1.0, 1.0);
    }

    #[test]
    fn user_distances_lie_in_annulus() {
        let scenario = Imac::new(7, 28, 100.0, 50.0);
        let outer = 100.0 * 2.0 / 3f64.sqrt();
        let mut rng = rng::substream(1, 0);
        let mut count = 0;
        while count < 10_000 {
            let geo = scenario.sample_geometry(&mut rng);
            for (u, p) in geo.user_positions.iter().enumerate() {
                let d = p.dist(&geo.bs_positions[geo.home(u)]);
                assert!((50.0..=outer + 1e-9).contains(&d), "{d}");
                // home BS is the nearest: the user is inside its own hexagon
                for bs in &geo.bs_positions {
                    assert!(d <= p.dist(bs) + 1e-9);
                }
                count += 1;
            }
        }
    }

    #[test]
    fn zero_inner_radius_uses_distance_floor() {
        let scenario = Imac::new(3, 12, 100.0, 0.0);
        let geo = scenario.sample_geometry(&mut rng::substream(2, 0));
        assert_eq!(geo.min_distance(), DISTANCE_FLOOR);
        for (u, p) in geo.user_positions.iter().enumerate() {
            assert!(p.dist(&geo.bs_positions[geo.home(u)]) >= DISTANCE_FLOOR);
        }
    }

    #[test]
    fn home_gain_ranks_high() {
        // rank 0 = weakest of N gains; under no distance effect the mean rank is (N-1)/2
        let (n_cells, k) = (3, 12);
        let insts = generate_imac(n_cells, k, 100.0, 0.0, 1000, 3).unwrap();
        let mut rank_sum = 0.0;
        let mut users = 0.0;
        for inst in &insts {
            for u in 0..k {
                let row = &inst.gains()[u * n_cells..(u + 1) * n_cells];
                let home = row[inst.home(u)];
                rank_sum += row.iter().filter(|g| **g < home).count() as f64;
                users += 1.0;
            }
        }
        let mean_rank = rank_sum / users;
        // uniform ranks: mean 1.0, sd of the mean ~ 0.82/sqrt(12000) ~ 0.0075
        assert!(mean_rank > 1.0 + 0.2, "{mean_rank}");
    }

    #[test]
    fn imac_instances_have_n_times_k_features() {
        let insts = generate_imac(3, 24, 100.0, 0.0, 4, 5).unwrap();
        for inst in &insts {
            assert_eq!(inst.feature_dim(), 72);
            assert!(inst.gains().iter().all(|g| g.is_finite() && *g >= 0.0));
        }
        assert_eq!(insts, generate_imac(3, 24, 100.0, 0.0, 4, 5).unwrap());
    }
}
