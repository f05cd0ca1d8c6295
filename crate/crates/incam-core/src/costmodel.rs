//! Computation-communication cost model for in-camera pipelines.
//!
//! A pipeline is a linear chain of blocks. Some blocks are core, some are
//! optional filters that forward only a fraction of their input frames.
//! A placement configuration picks which optional blocks to instantiate,
//! where each in-camera block runs, and the cut after which data is
//! offloaded. Cloud compute is free; the bits crossing the cut are not.
//!
//! Energy is accounted per source frame with expected-frame multipliers
//! (the running product of upstream pass rates). Throughput is worst case:
//! every frame is assumed to pass every filter, and the slowest in-camera
//! block or the link bounds the rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a block executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Placement {
    #[serde(rename = "camera-cpu")]
    CameraCpu,
    #[serde(rename = "camera-accel")]
    CameraAccel,
    #[serde(rename = "cloud")]
    Cloud,
}

impl Placement {
    /// Short label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Placement::CameraCpu => "cpu",
            Placement::CameraAccel => "accel",
            Placement::Cloud => "cloud",
        }
    }

    const CAMERA: [Placement; 2] = [Placement::CameraCpu, Placement::CameraAccel];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Core,
    Optional,
}

/// Per-placement cost of running a block on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCost {
    /// Energy units per frame.
    pub energy: f64,
    /// Seconds per frame.
    pub latency_s: f64,
}

/// One processing block of a pipeline chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub id: String,
    pub kind: BlockKind,
    /// Placements this block supports, with their costs. A block missing a
    /// placement entry cannot be assigned that placement.
    pub compute_cost: BTreeMap<Placement, BlockCost>,
    /// Bits per frame this block emits downstream.
    pub output_bits: f64,
    /// Fraction of frames forwarded downstream (1.0 for non-filtering blocks).
    pub pass_rate: f64,
}

impl BlockSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pass_rate) {
            return Err(Error::schema(
                format!("blocks[{}].pass_rate", self.id),
                format!("{} not in [0,1]", self.pass_rate),
            ));
        }
        if !(self.output_bits >= 0.0) {
            return Err(Error::schema(
                format!("blocks[{}].output_bits", self.id),
                "must be >= 0".to_string(),
            ));
        }
        if self.compute_cost.is_empty() {
            return Err(Error::schema(
                format!("blocks[{}].compute_cost", self.id),
                "no placement entries".to_string(),
            ));
        }
        for (placement, cost) in &self.compute_cost {
            if !(cost.latency_s > 0.0) {
                return Err(Error::schema(
                    format!("blocks[{}].compute_cost[{}]", self.id, placement.label()),
                    "latency must be > 0".to_string(),
                ));
            }
            if !(cost.energy >= 0.0) {
                return Err(Error::schema(
                    format!("blocks[{}].compute_cost[{}]", self.id, placement.label()),
                    "energy must be >= 0".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Camera placements this block can be assigned to, in a fixed order.
    pub fn camera_placements(&self) -> impl Iterator<Item = Placement> + '_ {
        Placement::CAMERA
            .into_iter()
            .filter(|p| self.compute_cost.contains_key(p))
    }

    /// Energy delta from running this block as a filter at `placement`
    /// ahead of `downstream_energy` worth of per-frame work.
    pub fn benefit_at(&self, placement: Placement, downstream_energy: f64) -> Result<f64> {
        let cost = self.compute_cost.get(&placement).ok_or_else(|| {
            Error::Config(format!(
                "block `{}` has no cost entry for placement {}",
                self.id,
                placement.label()
            ))
        })?;
        Ok(filter_benefit(cost.energy, self.pass_rate, downstream_energy))
    }
}

/// Energy delta from inserting an optional filter in front of work costing
/// `downstream_energy` per frame: `filter_energy + pass_rate * downstream -
/// downstream`. Negative means the filter pays for itself.
pub fn filter_benefit(filter_energy: f64, pass_rate: f64, downstream_energy: f64) -> f64 {
    filter_energy + pass_rate * downstream_energy - downstream_energy
}

/// A linear chain of blocks fed by the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineGraph {
    pub blocks: Vec<BlockSpec>,
    /// Bits per frame produced by the sensor before block 1.
    pub source_bits: f64,
}

impl PipelineGraph {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::schema("blocks", "chain must be non-empty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for block in &self.blocks {
            block.validate()?;
            if !seen.insert(block.id.as_str()) {
                return Err(Error::schema("blocks", format!("duplicate block id `{}`", block.id)));
            }
        }
        if !(self.source_bits >= 0.0) {
            return Err(Error::schema("source_bits", "must be >= 0"));
        }
        Ok(())
    }

    pub fn block(&self, id: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.id == id)
    }

    /// Ids of optional blocks, in chain order.
    pub fn optional_ids(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Optional)
            .map(|b| b.id.as_str())
            .collect()
    }
}

/// Network link used for offloading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    #[serde(rename = "bandwidth_bps")]
    pub bandwidth_bits_per_s: f64,
    pub energy_per_bit: f64,
}

impl LinkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_bits_per_s > 0.0) {
            return Err(Error::schema("link.bandwidth_bps", "must be > 0"));
        }
        if !(self.energy_per_bit > 0.0) {
            return Err(Error::schema("link.energy_per_bit", "must be > 0"));
        }
        Ok(())
    }
}

/// Top-level pipeline document: the JSON fixture format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDoc {
    #[serde(flatten)]
    pub graph: PipelineGraph,
    pub link: LinkSpec,
}

/// Parses and validates a pipeline JSON document.
pub fn load_pipeline_json(bytes: &[u8]) -> Result<PipelineDoc> {
    let doc: PipelineDoc = serde_json::from_slice(bytes)
        .map_err(|e| Error::schema("pipeline", e.to_string()))?;
    doc.graph.validate()?;
    doc.link.validate()?;
    Ok(doc)
}

/// Which blocks run in camera, where, and after which the output is offloaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementConfig {
    /// Optional blocks actually instantiated, by id.
    pub included: Vec<String>,
    /// Placement of each in-camera block (those at or before the cut).
    pub placement: BTreeMap<String, Placement>,
    /// Position in the instantiated chain after which output is offloaded.
    /// 0 means the raw sensor output is offloaded.
    pub cut_index: usize,
}

impl PlacementConfig {
    /// Stable identifier used in CSV output and for deterministic ordering.
    pub fn id(&self) -> String {
        let inc = if self.included.is_empty() {
            "-".to_string()
        } else {
            self.included.join("+")
        };
        let plc = if self.placement.is_empty() {
            "-".to_string()
        } else {
            self.placement
                .iter()
                .map(|(id, p)| format!("{id}={}", p.label()))
                .collect::<Vec<_>>()
                .join("+")
        };
        format!("inc:{inc}/cut:{}/plc:{plc}", self.cut_index)
    }
}

/// The chain a config actually instantiates: in-camera blocks with their
/// placements, then the bits crossing the cut.
struct ResolvedChain<'a> {
    in_camera: Vec<(&'a BlockSpec, Placement)>,
    bits_at_cut: f64,
}

fn resolve<'a>(graph: &'a PipelineGraph, cfg: &PlacementConfig) -> Result<ResolvedChain<'a>> {
    for id in &cfg.included {
        match graph.block(id) {
            None => return Err(Error::Config(format!("included block `{id}` not in graph"))),
            Some(b) if b.kind != BlockKind::Optional => {
                return Err(Error::Config(format!(
                    "block `{id}` is core; only optional blocks are listed in `included`"
                )))
            }
            Some(_) => {}
        }
    }
    let chain: Vec<&BlockSpec> = graph
        .blocks
        .iter()
        .filter(|b| b.kind == BlockKind::Core || cfg.included.iter().any(|id| *id == b.id))
        .collect();
    if cfg.cut_index > chain.len() {
        return Err(Error::Config(format!(
            "cut_index {} exceeds instantiated chain length {}",
            cfg.cut_index,
            chain.len()
        )));
    }
    let mut in_camera = Vec::with_capacity(cfg.cut_index);
    for block in &chain[..cfg.cut_index] {
        let placement = *cfg.placement.get(&block.id).ok_or_else(|| {
            Error::Config(format!("in-camera block `{}` has no placement", block.id))
        })?;
        if placement == Placement::Cloud {
            return Err(Error::Config(format!(
                "in-camera block `{}` cannot be placed in the cloud",
                block.id
            )));
        }
        if !block.compute_cost.contains_key(&placement) {
            return Err(Error::Config(format!(
                "block `{}` has no cost entry for placement {}",
                block.id,
                placement.label()
            )));
        }
        in_camera.push((*block, placement));
    }
    if cfg.placement.len() != in_camera.len() {
        return Err(Error::Config(
            "placement map must cover exactly the in-camera blocks".to_string(),
        ));
    }
    let bits_at_cut = if cfg.cut_index == 0 {
        graph.source_bits
    } else {
        chain[cfg.cut_index - 1].output_bits
    };
    Ok(ResolvedChain {
        in_camera,
        bits_at_cut,
    })
}

/// Expected energy per source frame: in-camera compute weighted by the
/// running product of upstream pass rates, plus the communication cost of
/// the bits crossing the cut.
pub fn total_energy_cost(
    graph: &PipelineGraph,
    cfg: &PlacementConfig,
    link: &LinkSpec,
) -> Result<f64> {
    let chain = resolve(graph, cfg)?;
    let mut expected_frames = 1.0;
    let mut energy = 0.0;
    for (block, placement) in &chain.in_camera {
        energy += expected_frames * block.compute_cost[placement].energy;
        expected_frames *= block.pass_rate;
    }
    energy += expected_frames * chain.bits_at_cut * link.energy_per_bit;
    Ok(energy)
}

/// Worst-case sustained frame rate: the slowest in-camera block or the link,
/// whichever is lower. Pass rates do not relax throughput.
pub fn pipeline_throughput(
    graph: &PipelineGraph,
    cfg: &PlacementConfig,
    link: &LinkSpec,
) -> Result<f64> {
    let chain = resolve(graph, cfg)?;
    let mut fps = f64::INFINITY;
    for (block, placement) in &chain.in_camera {
        fps = fps.min(1.0 / block.compute_cost[placement].latency_s);
    }
    if chain.bits_at_cut > 0.0 {
        fps = fps.min(link.bandwidth_bits_per_s / chain.bits_at_cut);
    }
    Ok(fps)
}

/// One evaluated configuration from [`enumerate_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedConfig {
    pub config: PlacementConfig,
    pub throughput_fps: f64,
    pub energy: f64,
    pub feasible: bool,
}

const MAX_ENUM_BLOCKS: usize = 20;

/// Exhaustively evaluates every valid configuration of `graph`: all subsets
/// of optional blocks, all cut positions, all camera placements of in-camera
/// blocks. Results are sorted by (feasible desc, energy asc) with the config
/// id as the final tiebreak, so the ordering is deterministic.
pub fn enumerate_feasible(
    graph: &PipelineGraph,
    link: &LinkSpec,
    fps_threshold: f64,
) -> Result<Vec<EvaluatedConfig>> {
    graph.validate()?;
    link.validate()?;
    if graph.blocks.len() > MAX_ENUM_BLOCKS {
        return Err(Error::Parameter(format!(
            "exhaustive enumeration supports at most {MAX_ENUM_BLOCKS} blocks, graph has {}",
            graph.blocks.len()
        )));
    }
    let optional = graph.optional_ids();
    let mut results = Vec::new();
    for subset in 0u32..(1u32 << optional.len()) {
        let included: Vec<String> = optional
            .iter()
            .enumerate()
            .filter(|(i, _)| subset & (1 << i) != 0)
            .map(|(_, id)| id.to_string())
            .collect();
        let chain: Vec<&BlockSpec> = graph
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Core || included.iter().any(|id| *id == b.id))
            .collect();
        for cut_index in 0..=chain.len() {
            let mut assignments: Vec<BTreeMap<String, Placement>> = vec![BTreeMap::new()];
            for block in &chain[..cut_index] {
                let mut next = Vec::new();
                for placement in block.camera_placements() {
                    for partial in &assignments {
                        let mut extended = partial.clone();
                        extended.insert(block.id.clone(), placement);
                        next.push(extended);
                    }
                }
                assignments = next;
                if assignments.is_empty() {
                    break; // some in-camera block supports no camera placement
                }
            }
            for placement in assignments {
                let config = PlacementConfig {
                    included: included.clone(),
                    placement,
                    cut_index,
                };
                let throughput_fps = pipeline_throughput(graph, &config, link)?;
                let energy = total_energy_cost(graph, &config, link)?;
                results.push(EvaluatedConfig {
                    feasible: throughput_fps >= fps_threshold,
                    config,
                    throughput_fps,
                    energy,
                });
            }
        }
    }
    results.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(a.energy.total_cmp(&b.energy))
            .then_with(|| a.config.id().cmp(&b.config.id()))
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: &str, kind: BlockKind, energy: f64, latency_s: f64, bits: f64, pass: f64) -> BlockSpec {
        let mut compute_cost = BTreeMap::new();
        compute_cost.insert(Placement::CameraCpu, BlockCost { energy, latency_s });
        BlockSpec {
            id: id.to_string(),
            kind,
            compute_cost,
            output_bits: bits,
            pass_rate: pass,
        }
    }

    fn cpu_config(ids: &[&str], included: &[&str], cut: usize) -> PlacementConfig {
        PlacementConfig {
            included: included.iter().map(|s| s.to_string()).collect(),
            placement: ids[..cut]
                .iter()
                .map(|id| (id.to_string(), Placement::CameraCpu))
                .collect(),
            cut_index: cut,
        }
    }

    #[test]
    fn single_block_energy_sums_compute_and_comm() {
        let graph = PipelineGraph {
            blocks: vec![block("b1", BlockKind::Core, 2.0, 0.01, 10.0, 1.0)],
            source_bits: 100.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1e6,
            energy_per_bit: 0.1,
        };
        let cfg = cpu_config(&["b1"], &[], 1);
        assert_eq!(total_energy_cost(&graph, &cfg, &link).unwrap(), 3.0);
    }

    #[test]
    fn optional_filter_reduces_expected_downstream_energy() {
        let graph = PipelineGraph {
            blocks: vec![
                block("filt", BlockKind::Optional, 0.5, 0.01, 50.0, 0.1),
                block("core", BlockKind::Core, 10.0, 0.01, 10.0, 1.0),
            ],
            source_bits: 100.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1e6,
            energy_per_bit: 0.01,
        };
        let with = cpu_config(&["filt", "core"], &["filt"], 2);
        let without = cpu_config(&["core"], &[], 1);
        let comm = 10.0 * 0.01;
        let e_with = total_energy_cost(&graph, &with, &link).unwrap();
        let e_without = total_energy_cost(&graph, &without, &link).unwrap();
        assert!((e_with - (0.5 + 0.1 * 10.0 + 0.1 * comm)).abs() < 1e-12);
        assert!((e_without - (10.0 + comm)).abs() < 1e-12);
        assert!(e_with < e_without);
    }

    #[test]
    fn raw_offload_is_pure_communication() {
        let graph = PipelineGraph {
            blocks: vec![block("b1", BlockKind::Core, 2.0, 0.01, 10.0, 1.0)],
            source_bits: 100.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1e6,
            energy_per_bit: 1.0,
        };
        let cfg = cpu_config(&[], &[], 0);
        assert_eq!(total_energy_cost(&graph, &cfg, &link).unwrap(), 100.0);
    }

    #[test]
    fn throughput_is_min_of_blocks_and_link() {
        let graph = PipelineGraph {
            blocks: vec![
                block("a", BlockKind::Core, 1.0, 1.0 / 100.0, 1000.0, 1.0),
                block("b", BlockKind::Core, 1.0, 1.0 / 40.0, 1000.0, 1.0),
                block("c", BlockKind::Core, 1.0, 1.0 / 60.0, 1000.0, 1.0),
            ],
            source_bits: 1000.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 50.0 * 1000.0,
            energy_per_bit: 1.0,
        };
        let cfg = cpu_config(&["a", "b", "c"], &[], 3);
        let fps = pipeline_throughput(&graph, &cfg, &link).unwrap();
        assert!((fps - 40.0).abs() < 1e-9);
    }

    #[test]
    fn raw_offload_matches_400gbe_projection() {
        // Frame size back-derived so a 400 Gb/s link uploads at 395 FPS.
        let frame_bits = 400e9 / 395.0;
        let graph = PipelineGraph {
            blocks: vec![block("capture", BlockKind::Core, 1.0, 1e-3, frame_bits, 1.0)],
            source_bits: frame_bits,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 400e9,
            energy_per_bit: 1e-9,
        };
        let cfg = cpu_config(&[], &[], 0);
        let fps = pipeline_throughput(&graph, &cfg, &link).unwrap();
        assert!((fps - 395.0).abs() <= 1.0);
    }

    #[test]
    fn single_block_infinite_link() {
        let graph = PipelineGraph {
            blocks: vec![block("b", BlockKind::Core, 1.0, 1.0 / 30.0, 0.0, 1.0)],
            source_bits: 10.0,
        };
        // zero bits at the cut: link term unbounded
        let link = LinkSpec {
            bandwidth_bits_per_s: 1.0,
            energy_per_bit: 1.0,
        };
        let cfg = cpu_config(&["b"], &[], 1);
        let fps = pipeline_throughput(&graph, &cfg, &link).unwrap();
        assert!((fps - 30.0).abs() < 1e-9);
    }

    #[test]
    fn missing_placement_entry_is_a_config_error_naming_the_block() {
        let graph = PipelineGraph {
            blocks: vec![block("only-cpu", BlockKind::Core, 1.0, 0.01, 10.0, 1.0)],
            source_bits: 10.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1.0,
            energy_per_bit: 1.0,
        };
        let cfg = PlacementConfig {
            included: vec![],
            placement: [("only-cpu".to_string(), Placement::CameraAccel)].into(),
            cut_index: 1,
        };
        let err = total_energy_cost(&graph, &cfg, &link).unwrap_err();
        assert!(err.to_string().contains("only-cpu"));
    }

    #[test]
    fn filter_benefit_examples() {
        assert!((filter_benefit(0.5, 0.1, 10.0) - (-8.5)).abs() < 1e-12);
        assert_eq!(filter_benefit(0.5, 1.0, 10.0), 0.5);
        assert_eq!(filter_benefit(10.0, 0.0, 10.0), 0.0);
    }

    #[test]
    fn fast_blocks_and_fat_link_make_everything_feasible() {
        let graph = PipelineGraph {
            blocks: vec![
                block("a", BlockKind::Core, 1.0, 1e-9, 10.0, 1.0),
                block("f", BlockKind::Optional, 1.0, 1e-9, 10.0, 0.5),
            ],
            source_bits: 10.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1e18,
            energy_per_bit: 1e-9,
        };
        let results = enumerate_feasible(&graph, &link, 30.0).unwrap();
        assert!(!results.is_empty());
        assert!(results.iter().all(|r| r.feasible));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let graph = PipelineGraph {
            blocks: vec![
                block("a", BlockKind::Core, 3.0, 0.01, 100.0, 1.0),
                block("f", BlockKind::Optional, 1.0, 0.02, 80.0, 0.4),
                block("b", BlockKind::Core, 2.0, 0.03, 20.0, 1.0),
            ],
            source_bits: 200.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 4000.0,
            energy_per_bit: 0.01,
        };
        let a = enumerate_feasible(&graph, &link, 25.0).unwrap();
        let b = enumerate_feasible(&graph, &link, 25.0).unwrap();
        assert_eq!(a, b);
        for pair in a.windows(2) {
            let (x, y) = (&pair[0], &pair[1]);
            assert!(x.feasible >= y.feasible);
            if x.feasible == y.feasible {
                assert!(x.energy <= y.energy);
            }
        }
    }

    #[test]
    fn core_blocks_cannot_be_listed_as_included() {
        let graph = PipelineGraph {
            blocks: vec![block("a", BlockKind::Core, 1.0, 0.01, 10.0, 1.0)],
            source_bits: 10.0,
        };
        let link = LinkSpec {
            bandwidth_bits_per_s: 1.0,
            energy_per_bit: 1.0,
        };
        let cfg = PlacementConfig {
            included: vec!["a".to_string()],
            placement: BTreeMap::new(),
            cut_index: 0,
        };
        assert!(total_energy_cost(&graph, &cfg, &link).is_err());
    }

    #[test]
    fn pipeline_json_round_trip() {
        let json = r#"{
            "blocks": [
                {"id": "cap", "kind": "core",
                 "compute_cost": {"camera-cpu": {"energy": 1.0, "latency_s": 0.001}},
                 "output_bits": 1000.0, "pass_rate": 1.0}
            ],
            "source_bits": 1000.0,
            "link": {"bandwidth_bps": 1e6, "energy_per_bit": 1e-6}
        }"#;
        let doc = load_pipeline_json(json.as_bytes()).unwrap();
        assert_eq!(doc.graph.blocks[0].id, "cap");
        let back = serde_json::to_vec(&doc).unwrap();
        let doc2 = load_pipeline_json(&back).unwrap();
        assert_eq!(doc, doc2);
    }

    #[test]
    fn invalid_pass_rate_rejected() {
        let json = r#"{
            "blocks": [
                {"id": "cap", "kind": "core",
                 "compute_cost": {"camera-cpu": {"energy": 1.0, "latency_s": 0.001}},
                 "output_bits": 1000.0, "pass_rate": 1.5}
            ],
            "source_bits": 1000.0,
            "link": {"bandwidth_bps": 1e6, "energy_per_bit": 1e-6}
        }"#;
        let err = load_pipeline_json(json.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("pass_rate"));
    }
}
