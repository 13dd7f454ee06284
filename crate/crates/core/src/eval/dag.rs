use crate::error::{Error, Result};
use crate::wake::FarmLayout;

/// Default half-angle of the wake cone, degrees.
pub const CONE_HALF_ANGLE_DEG: f64 = 15.0;
/// Default reach of a wake, in rotor diameters.
pub const MAX_RANGE_D: f64 = 20.0;

/// Wake interactions for one wind direction: `i → j` when `j` sits in `i`'s wake cone.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDag {
    pub turbines: usize,
    pub phi_inf: f64,
    /// Sorted `(upstream, downstream)` pairs.
    pub edges: Vec<(usize, usize)>,
}

impl InteractionDag {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }

    pub fn parents(&self, j: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == j).map(|e| e.0).collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect()
    }

    /// Kahn's algorithm, smallest ready index first; errors on a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indeg = vec![0usize; self.turbines];
        for &(_, j) in &self.edges {
            indeg[j] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..self.turbines).filter(|&k| indeg[k] == 0).collect();
        let mut order = Vec::with_capacity(self.turbines);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for j in self.children(i) {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != self.turbines {
            return Err(Error::contract(format!("wake graph at {}° has a cycle", self.phi_inf)));
        }
        Ok(order)
    }
}

/// Edges `i → j` where `j` is strictly downstream of `i`, within `max_range_d`
/// rotor diameters, and inside the cone of half-angle `half_angle_deg` around
/// the wind direction. Edges always point to a larger downstream coordinate,
/// so the graph is acyclic.
pub fn build_dag(layout: &FarmLayout, phi_inf: f64, half_angle_deg: f64, max_range_d: f64) -> InteractionDag {
    let coords = layout.wind_coordinates(phi_inf);
    let reach = max_range_d * layout.turbine.rotor_diameter_m;
    let tan = half_angle_deg.to_radians().tan();
    let mut edges = Vec::new();
    for (i, a) in coords.iter().enumerate() {
        for (j, b) in coords.iter().enumerate() {
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            if i != j && dx > crate::wake::solver::DOWNSTREAM_EPS_M && dx.hypot(dy) <= reach && dy.abs() <= dx * tan {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    InteractionDag { turbines: layout.len(), phi_inf, edges }
}

/// [`build_dag`] with the default 15° cone and 20 D reach.
pub fn default_dag(layout: &FarmLayout, phi_inf: f64) -> InteractionDag {
    build_dag(layout, phi_inf, CONE_HALF_ANGLE_DEG, MAX_RANGE_D)
}
