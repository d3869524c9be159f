//! Chebyshev–Gauss–Lobatto collocation grids.
//!
//! Nodes are stored ascending in the physical coordinate. The canonical
//! values cos(kπ/M) (M = n_points − 1) run from +1 down to −1, and the
//! interval map x = (b−a)/2·(1−ξ) + a sends ξ=1 to a and ξ=−1 to b, so
//! ascending physical storage pairs node k with canonical index M−k. Both
//! `canonical_nodes` and `angles` are kept in ascending-node order to make
//! the pairing elementwise: `canonical_nodes[k] = cos(angles[k])` with
//! `angles[k] = (M−k)π/M`.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Grid {
    /// Number of grid points (polynomial degree plus one).
    pub n_points: usize,
    /// Collocation nodes, strictly ascending in [a, b].
    pub nodes: Vec<f64>,
    /// Pre-images of the canonical nodes: angles[k] = (M−k)π/M.
    pub angles: Vec<f64>,
    /// cos(angles[k]), ascending on [-1, 1].
    pub canonical_nodes: Vec<f64>,
    /// The interval (a, b), a < b.
    pub domain: (f64, f64),
    /// Chain-rule factor 2/(b−a): an order-n differentiation matrix built on
    /// canonical nodes converts to this interval by multiplying with scale^n.
    /// The orientation flip of the map is absorbed by the ascending ordering,
    /// so the factor is stored positive.
    pub scale: f64,
}

impl Grid {
    /// Convenience composition of [`gauss_lobatto`] and [`map_to_interval`].
    pub fn on_interval(n_points: usize, a: f64, b: f64) -> Result<Grid> {
        map_to_interval(&gauss_lobatto(n_points)?, a, b)
    }
}

/// Canonical Chebyshev–Gauss–Lobatto grid on [-1, 1].
pub fn gauss_lobatto(n_points: usize) -> Result<Grid> {
    if n_points < 2 {
        return Err(Error::GridTooSmall(n_points));
    }
    let m = n_points - 1;
    let mut angles = Vec::with_capacity(n_points);
    let mut canonical = Vec::with_capacity(n_points);
    for k in 0..n_points {
        // Each node is a direct cosine evaluation; no recurrence, so there is
        // no accumulated drift across the grid.
        let theta = (m - k) as f64 * std::f64::consts::PI / m as f64;
        angles.push(theta);
        canonical.push(theta.cos());
    }
    canonical[0] = -1.0;
    canonical[m] = 1.0;
    Ok(Grid {
        n_points,
        nodes: canonical.clone(),
        angles,
        canonical_nodes: canonical,
        domain: (-1.0, 1.0),
        scale: 1.0,
    })
}

/// Map a canonical grid to [a, b] via x = (b−a)/2·(1−ξ) + a.
pub fn map_to_interval(g: &Grid, a: f64, b: f64) -> Result<Grid> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    if g.domain != (-1.0, 1.0) {
        return Err(Error::NotCanonical(g.domain.0, g.domain.1));
    }
    let m = g.n_points - 1;
    let half = (b - a) / 2.0;
    let nodes: Vec<f64> = (0..g.n_points)
        .map(|k| half * (1.0 - g.canonical_nodes[m - k]) + a)
        .collect();
    Ok(Grid {
        n_points: g.n_points,
        nodes,
        angles: g.angles.clone(),
        canonical_nodes: g.canonical_nodes.clone(),
        domain: (a, b),
        scale: 2.0 / (b - a),
    })
}
