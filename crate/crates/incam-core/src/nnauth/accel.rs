//! Cycle and energy model of the systolic MLP accelerator.
//!
//! PEs stream multiply-adds for one layer in tiles of `num_pes` output
//! neurons; each tile takes one pass over the layer inputs plus the bias.
//! Activations go through the sigmoid unit at a fixed per-neuron latency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fixed::FixedFormat;

/// Accelerator geometry and its per-MAC-cycle energy calibration.
///
/// The default energy table is normalized to the 16-bit datapath, with the
/// 8-bit entry at 0.59x and the 4-bit entry below that. These are
/// calibration inputs, not measurements made by this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorGeometry {
    pub num_pes: usize,
    /// Cycles the sigmoid unit spends per neuron.
    pub activation_latency: u64,
    /// Per-MAC-cycle energy units, keyed by datapath width in bits.
    pub energy_table: BTreeMap<u8, f64>,
}

impl Default for AcceleratorGeometry {
    fn default() -> Self {
        AcceleratorGeometry {
            num_pes: 8,
            activation_latency: 1,
            energy_table: BTreeMap::from([(4, 0.35), (8, 0.59), (16, 1.0)]),
        }
    }
}

impl AcceleratorGeometry {
    pub fn with_pes(num_pes: usize) -> Self {
        AcceleratorGeometry {
            num_pes,
            ..Default::default()
        }
    }
}

fn layer_pairs(topology: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    topology.windows(2).map(|w| (w[0], w[1]))
}

/// Multiply-add cycles only: sum over layers of
/// `ceil(n_out / num_pes) * (n_in + 1)`, the +1 covering the bias term.
pub fn mac_cycles(topology: &[usize], geom: &AcceleratorGeometry) -> u64 {
    assert!(geom.num_pes >= 1, "geometry needs at least one PE");
    layer_pairs(topology)
        .map(|(n_in, n_out)| (n_out.div_ceil(geom.num_pes) * (n_in + 1)) as u64)
        .sum()
}

/// Total cycles to evaluate the network once: MAC cycles plus
/// `n_out * activation_latency` per layer.
pub fn systolic_cycles(topology: &[usize], geom: &AcceleratorGeometry) -> u64 {
    let activations: u64 = layer_pairs(topology)
        .map(|(_, n_out)| n_out as u64 * geom.activation_latency)
        .sum();
    mac_cycles(topology, geom) + activations
}

/// Multiply-adds the network performs, counting the bias as one MAC.
pub fn total_macs(topology: &[usize]) -> u64 {
    layer_pairs(topology)
        .map(|(n_in, n_out)| ((n_in + 1) * n_out) as u64)
        .sum()
}

/// Fraction of PE-cycles doing useful MACs. 1.0 when the geometry tiles
/// every layer exactly; ceil waste pulls it down.
pub fn pe_utilization(topology: &[usize], geom: &AcceleratorGeometry) -> f64 {
    let cycles = mac_cycles(topology, geom);
    if cycles == 0 {
        return 1.0;
    }
    total_macs(topology) as f64 / (geom.num_pes as f64 * cycles as f64)
}

/// Energy for `cycles` at the datapath width of `format`.
pub fn energy_estimate(cycles: u64, geom: &AcceleratorGeometry, format: FixedFormat) -> Result<f64> {
    let per_cycle = geom.energy_table.get(&format.total_bits).ok_or_else(|| {
        Error::Parameter(format!(
            "energy table has no entry for {}-bit datapath",
            format.total_bits
        ))
    })?;
    Ok(cycles as f64 * per_cycle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_topology_cycle_counts() {
        let topo = [400usize, 8, 1];
        assert_eq!(systolic_cycles(&topo, &AcceleratorGeometry::with_pes(8)), 419);
        assert_eq!(systolic_cycles(&topo, &AcceleratorGeometry::with_pes(4)), 820);
    }

    #[test]
    fn single_pe_tiny_network() {
        assert_eq!(systolic_cycles(&[1, 1], &AcceleratorGeometry::with_pes(1)), 3);
    }

    #[test]
    fn single_pe_equals_macs_plus_activations() {
        let topo = [17usize, 5, 3, 1];
        let geom = AcceleratorGeometry::with_pes(1);
        let activations: u64 = topo[1..].iter().map(|&n| n as u64).sum();
        assert_eq!(systolic_cycles(&topo, &geom), total_macs(&topo) + activations);
    }

    #[test]
    fn utilization_examples() {
        let topo = [400usize, 8, 1];
        let at8 = pe_utilization(&topo, &AcceleratorGeometry::with_pes(8));
        assert!((at8 - 3217.0 / (8.0 * 410.0)).abs() < 1e-12);
        assert!((at8 - 0.981).abs() < 1e-3);
        let at16 = pe_utilization(&topo, &AcceleratorGeometry::with_pes(16));
        assert!(at16 < at8);
        // perfect tiling
        assert_eq!(pe_utilization(&[8, 8], &AcceleratorGeometry::with_pes(8)), 1.0);
    }

    #[test]
    fn cycles_non_increasing_in_pes() {
        let topo = [33usize, 12, 5, 1];
        let mut prev = u64::MAX;
        for pes in 1..=16 {
            let cycles = systolic_cycles(&topo, &AcceleratorGeometry::with_pes(pes));
            assert!(cycles <= prev);
            prev = cycles;
        }
    }

    #[test]
    fn energy_uses_calibration_table() {
        let geom = AcceleratorGeometry::default();
        let q8 = FixedFormat::default_for_bits(8).unwrap();
        let q16 = FixedFormat::default_for_bits(16).unwrap();
        let e8 = energy_estimate(100, &geom, q8).unwrap();
        let e16 = energy_estimate(100, &geom, q16).unwrap();
        // 8-bit datapath at 59% of the 16-bit energy: a 41% reduction
        assert!((e8 / e16 - 0.59).abs() < 1e-12);
        assert_eq!(energy_estimate(0, &geom, q8).unwrap(), 0.0);
        assert_eq!(energy_estimate(100, &geom, q16).unwrap(), 100.0);
    }

    #[test]
    fn missing_energy_entry_is_an_error() {
        let mut geom = AcceleratorGeometry::default();
        geom.energy_table.remove(&4);
        let q4 = FixedFormat::default_for_bits(4).unwrap();
        assert!(energy_estimate(10, &geom, q4).is_err());
    }
}
