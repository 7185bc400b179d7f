//! Problem instances and power allocations shared by every module.

use crate::error::{check_dim, Error, Result};

/// Channel model an instance was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// K transmitter/receiver pairs; gains are a K×K matrix, row = receiver.
    Ic,
    /// Multi-cell uplink with `num_cells` base stations; gains are K×N,
    /// row = user, column = base station. Users are assigned to cells in
    /// contiguous blocks of K/N.
    Imac { num_cells: usize },
}

/// Channel magnitudes, noise powers, weights and power budget of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    kind: ChannelKind,
    num_users: usize,
    gains: Vec<f64>,
    noise: Vec<f64>,
    weights: Vec<f64>,
    p_max: f64,
}

impl ProblemInstance {
    /// Interference channel with `gains[k * K + j] = |h_kj|` (receiver k,
    /// transmitter j), unit weights.
    pub fn ic(num_users: usize, gains: Vec<f64>, noise_power: f64, p_max: f64) -> Result<Self> {
        Self::new(ChannelKind::Ic, num_users, gains, vec![noise_power; num_users], vec![1.0; num_users], p_max)
    }

    /// Interfering MAC with `gains[k * N + n]` = magnitude from user k to BS n.
    pub fn imac(num_cells: usize, num_users: usize, gains: Vec<f64>, noise_power: f64, p_max: f64) -> Result<Self> {
        Self::new(
            ChannelKind::Imac { num_cells },
            num_users,
            gains,
            vec![noise_power; num_users],
            vec![1.0; num_users],
            p_max,
        )
    }

    pub fn new(
        kind: ChannelKind,
        num_users: usize,
        gains: Vec<f64>,
        noise: Vec<f64>,
        weights: Vec<f64>,
        p_max: f64,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::invalid("instance needs at least one user"));
        }
        let cols = match kind {
            ChannelKind::Ic => num_users,
            ChannelKind::Imac { num_cells } => {
                if num_cells == 0 || !num_users.is_multiple_of(num_cells) {
                    return Err(Error::invalid(format!(
                        "{num_users} users cannot be split evenly over {num_cells} cells"
                    )));
                }
                num_cells
            }
        };
        check_dim(num_users * cols, gains.len())?;
        check_dim(num_users, noise.len())?;
        check_dim(num_users, weights.len())?;
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid(format!("channel gain {g} is not a finite nonnegative value")));
        }
        if noise.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        if weights.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::invalid("p_max must be positive"));
        }
        Ok(Self { kind, num_users, gains, noise, weights, p_max })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Number of receivers: K for IC, N base stations for IMAC.
    pub fn num_rx(&self) -> usize {
        match self.kind {
            ChannelKind::Ic => self.num_users,
            ChannelKind::Imac { num_cells } => num_cells,
        }
    }

    /// Raw gain storage (the network input features).
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn feature_dim(&self) -> usize {
        self.gains.len()
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Base station serving user `k` (IMAC); `k` itself for IC.
    pub fn home(&self, k: usize) -> usize {
        match self.kind {
            ChannelKind::Ic => k,
            ChannelKind::Imac { num_cells } => k / (self.num_users / num_cells),
        }
    }

    /// Magnitude of the link from transmitter `j` into the receiver of user `k`.
    ///
    /// IMAC is treated as an IC with co-located receivers: the receiver of
    /// user k is its home base station.
    #[inline]
    pub fn gain(&self, k: usize, j: usize) -> f64 {
        match self.kind {
            ChannelKind::Ic => self.gains[k * self.num_users + j],
            ChannelKind::Imac { num_cells } => self.gains[j * num_cells + self.home(k)],
        }
    }

    /// Effective K×K magnitude matrix, row-major, `[k * K + j] = gain(k, j)`.
    pub fn effective_gains(&self) -> Vec<f64> {
        let k_n = self.num_users;
        let mut out = Vec::with_capacity(k_n * k_n);
        for k in 0..k_n {
            for j in 0..k_n {
                out.push(self.gain(k, j));
            }
        }
        out
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_dim(self.num_users, weights.len())?;
        if weights.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        self.weights = weights;
        Ok(self)
    }
}

/// Per-transmitter powers in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every entry is finite and inside `[0, p_max]`.
    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.0.iter().all(|p| p.is_finite() && *p >= 0.0 && *p <= p_max)
    }
}

impl From<Vec<f64>> for PowerAllocation {
    fn from(p: Vec<f64>) -> Self {
        Self(p)
    }
}
