//! Benchmark fixtures shared by the criterion targets.

use pcf_core::{PermittivityMap, PolygonalPartition, Region, Lattice2D};

/// Square rod of side 0.4 and `n² = 13` in air on the unit square lattice.
pub fn square_rod() -> PermittivityMap {
    let lat = Lattice2D::square();
    let rod = Region::square([0.5, 0.5], 0.4, 13.0).expect("valid rod");
    PermittivityMap::new(PolygonalPartition::new(lat, vec![rod], 1.0).expect("valid partition"))
}
