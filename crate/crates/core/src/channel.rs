//! Two-dimensional constellations, the IQ-imbalance channel `Y = HX + Z`,
//! its discretization onto a uniform output grid, and squared-distance
//! decoding metrics.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{MetricMatrix, TransitionMatrix};

pub type Point = [f64; 2];
pub type Matrix2 = [[f64; 2]; 2];

pub const IDENTITY: Matrix2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn apply(m: &Matrix2, x: &Point) -> Point {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

#[inline]
fn squared_distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
    #[serde(rename = "256qam")]
    Qam256,
}

impl Scheme {
    pub fn order(self) -> usize {
        match self {
            Scheme::Qpsk => 4,
            Scheme::Qam16 => 16,
            Scheme::Qam64 => 64,
            Scheme::Qam256 => 256,
        }
    }

    /// Output grid size used for this scheme in the full-resolution runs.
    pub fn reference_grid(self) -> usize {
        match self {
            Scheme::Qam256 => 40_000,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Qpsk => "qpsk",
            Scheme::Qam16 => "16qam",
            Scheme::Qam64 => "64qam",
            Scheme::Qam256 => "256qam",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" | "qam4" => Ok(Scheme::Qpsk),
            "16qam" | "qam16" => Ok(Scheme::Qam16),
            "64qam" | "qam64" => Ok(Scheme::Qam64),
            "256qam" | "qam256" => Ok(Scheme::Qam256),
            other => Err(format!(
                "unknown scheme {other:?} (expected qpsk, 16qam, 64qam or 256qam)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    scheme: Scheme,
    points: Vec<Point>,
}

impl Constellation {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Per-symbol energies `||x_i||^2`.
    pub fn powers(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|x| x[0] * x[0] + x[1] * x[1])
            .collect()
    }

    /// Mean energy under equally likely symbols.
    pub fn average_power(&self) -> f64 {
        self.powers().iter().sum::<f64>() / self.len() as f64
    }
}

/// Square QAM grid with per-axis levels `{±1, ±3, ...}`, scaled to unit
/// average power. Points are enumerated with the in-phase level as the slow index.
pub fn build_constellation(scheme: Scheme) -> Constellation {
    let side = match scheme {
        Scheme::Qpsk => 2,
        Scheme::Qam16 => 4,
        Scheme::Qam64 => 8,
        Scheme::Qam256 => 16,
    };
    let levels: Vec<f64> = (0..side)
        .map(|k| (2 * k) as f64 - (side - 1) as f64)
        .collect();
    // mean of l^2 over the levels is (side^2 - 1) / 3, two axes
    let scale = (2.0 * ((side * side - 1) as f64) / 3.0).sqrt().recip();
    let points = levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| [a * scale, b * scale]))
        .collect();
    Constellation { scheme, points }
}

/// `H = diag(eta1, eta2) * [[cos t, sin t], [-sin t, cos t]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqChannel {
    pub eta1: f64,
    pub eta2: f64,
    pub theta: f64,
    matrix: Matrix2,
}

impl IqChannel {
    pub fn new(eta1: f64, eta2: f64, theta: f64) -> Result<Self> {
        if !(eta1 > 0.0 && eta2 > 0.0 && eta1.is_finite() && eta2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scalings must be positive, got ({eta1}, {eta2})"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rotation {theta} is not finite"
            )));
        }
        let (sin, cos) = theta.sin_cos();
        let matrix = [[eta1 * cos, eta1 * sin], [-eta2 * sin, eta2 * cos]];
        Ok(Self {
            eta1,
            eta2,
            theta,
            matrix,
        })
    }

    pub fn matrix(&self) -> Matrix2 {
        self.matrix
    }
}

/// The imbalance model with `eta1 = 1`, `eta2 = eta`.
pub fn iq_channel(eta: f64, theta: f64) -> Result<IqChannel> {
    IqChannel::new(1.0, eta, theta)
}

/// Uniform `side x side` grid over `[-bound, bound]^2`, endpoints included.
///
/// Index `r * side + c` holds `(-bound + r * spacing, -bound + c * spacing)`:
/// the first coordinate is the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    points: Vec<Point>,
    side: usize,
    spacing: f64,
    bound: f64,
}

impl OutputGrid {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

pub fn output_grid(n: usize, bound: f64) -> Result<OutputGrid> {
    let side = (n as f64).sqrt().round() as usize;
    if n < 4 || side * side != n {
        return Err(Error::NonSquareGrid(n));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid bound must be positive, got {bound}"
        )));
    }
    let spacing = 2.0 * bound / (side - 1) as f64;
    let coord = |k: usize| {
        if k == side - 1 {
            bound
        } else {
            -bound + k as f64 * spacing
        }
    };
    let points = (0..side)
        .flat_map(|r| (0..side).map(move |c| [coord(r), coord(c)]))
        .collect();
    Ok(OutputGrid {
        points,
        side,
        spacing,
        bound,
    })
}

/// Noise variance per real dimension for `SNR = 1 / (2 sigma^2)`.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    1.0 / (2.0 * 10f64.powf(snr_db / 10.0))
}

/// Pointwise Gaussian density on the grid, each row renormalized to one.
pub fn discretize_awgn(
    channel: &IqChannel,
    sigma2: f64,
    constellation: &Constellation,
    grid: &OutputGrid,
) -> Result<TransitionMatrix> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let h = channel.matrix();
    let m = constellation.len();
    let n = grid.len();
    let inv = 1.0 / (2.0 * sigma2);
    let mut entries = Array2::<f64>::zeros((m, n));
    for (i, x) in constellation.points().iter().enumerate() {
        let center = apply(&h, x);
        let mut row = entries.row_mut(i);
        let mut total = 0.0;
        for (s, y) in row.iter_mut().zip(grid.points()) {
            *s = (-squared_distance(y, &center) * inv).exp();
            total += *s;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::GridUnderflow { row: i });
        }
        row.mapv_inplace(|v| v / total);
    }
    TransitionMatrix::new(entries)
}

/// `d_ij = ||y_j - H_hat x_i||^2`, i.e. `q(x, y) = exp(-d)`.
pub fn metric_matrix(
    constellation: &Constellation,
    grid: &OutputGrid,
    h_hat: &Matrix2,
) -> Result<MetricMatrix> {
    let mut entries = Array2::<f64>::zeros((constellation.len(), grid.len()));
    for (i, x) in constellation.points().iter().enumerate() {
        let center = apply(h_hat, x);
        for (d, y) in entries.row_mut(i).iter_mut().zip(grid.points()) {
            *d = squared_distance(y, &center);
        }
    }
    MetricMatrix::new(entries)
}
