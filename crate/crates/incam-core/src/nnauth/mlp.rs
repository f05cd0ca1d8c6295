//! Dense MLP inference in float and fixed point, plus the reference trainer.
//!
//! The float path is the accuracy oracle; the fixed path models the
//! accelerator datapath: weights and activations quantized, per-neuron
//! accumulation in a double-width integer, one requantization before the
//! sigmoid LUT. Results are bit-exact for identical inputs and formats.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fixed::{round_shift_half_even, FixedFormat, SigmoidLut, LUT_MAX, LUT_MIN};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully-connected network with sigmoid activations on every layer.
///
/// Layer `l` maps `topology[l]` inputs to `topology[l+1]` outputs with a
/// weight matrix of `(inputs + 1) * outputs` entries stored row-major,
/// bias row last: `w[i][j] = weights[l][i * outputs + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub topology: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    /// Datapath format the model was exported for; CLI `--bits` overrides.
    pub default_format: FixedFormat,
}

#[derive(Debug, Serialize, Deserialize)]
struct MlpDoc {
    topology: Vec<usize>,
    weights: Vec<Vec<f64>>,
    format: FormatDoc,
    lut_domain: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct FormatDoc {
    bits: u8,
    frac: u8,
}

impl MlpModel {
    pub fn new(topology: Vec<usize>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let model = MlpModel {
            topology,
            weights,
            default_format: FixedFormat::default_for_bits(8)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topology.len() < 2 {
            return Err(Error::schema("topology", "need at least input and output layers"));
        }
        if self.topology.iter().any(|&n| n == 0) {
            return Err(Error::schema("topology", "layer sizes must be >= 1"));
        }
        if self.weights.len() != self.topology.len() - 1 {
            return Err(Error::schema(
                "weights",
                format!(
                    "{} layers need {} weight matrices, got {}",
                    self.topology.len(),
                    self.topology.len() - 1,
                    self.weights.len()
                ),
            ));
        }
        for (l, w) in self.weights.iter().enumerate() {
            let expect = (self.topology[l] + 1) * self.topology[l + 1];
            if w.len() != expect {
                return Err(Error::schema(
                    format!("weights[{l}]"),
                    format!(
                        "shape ({}+1)x{} needs {} entries, got {}",
                        self.topology[l],
                        self.topology[l + 1],
                        expect,
                        w.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Parses and validates the MLP JSON schema.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let doc: MlpDoc =
            serde_json::from_slice(bytes).map_err(|e| Error::schema("mlp", e.to_string()))?;
        if doc.lut_domain != [LUT_MIN, LUT_MAX] {
            return Err(Error::schema(
                "lut_domain",
                format!("expected [{LUT_MIN}, {LUT_MAX}], got {:?}", doc.lut_domain),
            ));
        }
        let model = MlpModel {
            topology: doc.topology,
            weights: doc.weights,
            default_format: FixedFormat::new(doc.format.bits, doc.format.frac)
                .map_err(|e| Error::schema("format", e.to_string()))?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = MlpDoc {
            topology: self.topology.clone(),
            weights: self.weights.clone(),
            format: FormatDoc {
                bits: self.default_format.total_bits,
                frac: self.default_format.frac_bits,
            },
            lut_domain: [LUT_MIN, LUT_MAX],
        };
        serde_json::to_vec_pretty(&doc).expect("mlp serializes")
    }

    pub fn input_len(&self) -> usize {
        self.topology[0]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Dimension(format!(
                "model expects {} inputs, got {}",
                self.input_len(),
                input.len()
            )));
        }
        Ok(())
    }

    fn check_scalar_output(&self) -> Result<()> {
        let out = *self.topology.last().unwrap();
        if out != 1 {
            return Err(Error::Dimension(format!(
                "score requires a single output neuron, topology ends in {out}"
            )));
        }
        Ok(())
    }
}

/// Reference forward pass: f64 arithmetic, exact sigmoid.
pub fn forward_float(model: &MlpModel, input: &[f64]) -> Result<f64> {
    model.check_input(input)?;
    model.check_scalar_output()?;
    let mut activations = input.to_vec();
    for (l, weights) in model.weights.iter().enumerate() {
        let (n_in, n_out) = (model.topology[l], model.topology[l + 1]);
        let mut next = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut z = weights[n_in * n_out + j]; // bias row
            for (i, a) in activations.iter().enumerate() {
                z += weights[i * n_out + j] * a;
            }
            next.push(sigmoid(z));
        }
        activations = next;
    }
    Ok(activations[0])
}

/// Datapath forward pass: everything quantized to `format`, per-neuron
/// accumulation in i64 with 2x fraction bits, requantized once before the
/// LUT. Returns the output code; `format.to_real` recovers the score.
pub fn forward_fixed(
    model: &MlpModel,
    input: &[f64],
    format: FixedFormat,
    lut: &SigmoidLut,
) -> Result<i32> {
    model.check_input(input)?;
    model.check_scalar_output()?;
    let mut activations: Vec<i32> = input.iter().map(|&x| format.quantize(x)).collect();
    for (l, weights) in model.weights.iter().enumerate() {
        let (n_in, n_out) = (model.topology[l], model.topology[l + 1]);
        let mut next = Vec::with_capacity(n_out);
        for j in 0..n_out {
            // accumulator carries 2*frac_bits fraction bits
            let bias = i64::from(format.quantize(weights[n_in * n_out + j]));
            let mut acc: i64 = bias << format.frac_bits;
            for (i, &a) in activations.iter().enumerate() {
                let w = i64::from(format.quantize(weights[i * n_out + j]));
                acc += w * i64::from(a);
            }
            let pre_activation = format.saturate(round_shift_half_even(acc, format.frac_bits));
            next.push(lut.eval_code(pre_activation, format));
        }
        activations = next;
    }
    Ok(activations[0])
}

/// Accept when the score reaches the threshold (inclusive).
pub fn authenticate(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// A labeled training example: flattened patch plus a 0/1 label.
pub type Sample = (Vec<f64>, f64);

/// Plain per-sample backprop with mean-squared error, seeded and
/// deterministic. Zero epochs returns the initialization unchanged.
pub fn train_reference(
    dataset: &[Sample],
    topology: &[usize],
    epochs: usize,
    rate: f64,
    seed: u64,
) -> Result<MlpModel> {
    if dataset.is_empty() {
        return Err(Error::Parameter("training dataset is empty".to_string()));
    }
    for (i, (input, label)) in dataset.iter().enumerate() {
        if input.len() != topology[0] {
            return Err(Error::Dimension(format!(
                "sample {i} has {} inputs, topology expects {}",
                input.len(),
                topology[0]
            )));
        }
        if *label != 0.0 && *label != 1.0 {
            return Err(Error::Parameter(format!("sample {i} label {label} not in {{0,1}}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(topology.len() - 1);
    for l in 0..topology.len() - 1 {
        let len = (topology[l] + 1) * topology[l + 1];
        weights.push((0..len).map(|_| rng.gen_range(-0.5..0.5)).collect());
    }
    let mut model = MlpModel {
        topology: topology.to_vec(),
        weights,
        default_format: FixedFormat::default_for_bits(8)?,
    };

    for _ in 0..epochs {
        for (input, label) in dataset {
            train_step(&mut model, input, *label, rate);
        }
    }
    Ok(model)
}

fn train_step(model: &mut MlpModel, input: &[f64], target: f64, rate: f64) {
    let layers = model.weights.len();
    // forward, keeping every layer's activations
    let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
    for l in 0..layers {
        let (n_in, n_out) = (model.topology[l], model.topology[l + 1]);
        let w = &model.weights[l];
        let prev = &activations[l];
        let mut out = Vec::with_capacity(n_out);
        for j in 0..n_out {
            let mut z = w[n_in * n_out + j];
            for (i, a) in prev.iter().enumerate() {
                z += w[i * n_out + j] * a;
            }
            out.push(sigmoid(z));
        }
        activations.push(out);
    }
    // backward: delta = dE/dz with E = (a - t)^2 / 2
    let mut deltas: Vec<f64> = activations[layers]
        .iter()
        .map(|&a| (a - target) * a * (1.0 - a))
        .collect();
    for l in (0..layers).rev() {
        let (n_in, n_out) = (model.topology[l], model.topology[l + 1]);
        let prev_deltas: Vec<f64> = (0..n_in)
            .map(|i| {
                let a = activations[l][i];
                let sum: f64 = (0..n_out)
                    .map(|j| model.weights[l][i * n_out + j] * deltas[j])
                    .sum();
                sum * a * (1.0 - a)
            })
            .collect();
        let w = &mut model.weights[l];
        for j in 0..n_out {
            for i in 0..n_in {
                w[i * n_out + j] -= rate * deltas[j] * activations[l][i];
            }
            w[n_in * n_out + j] -= rate * deltas[j];
        }
        deltas = prev_deltas;
    }
}

/// Fraction of samples the model misclassifies at a 0.5 score threshold.
pub fn classification_error(model: &MlpModel, dataset: &[Sample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Parameter("dataset is empty".to_string()));
    }
    let mut wrong = 0usize;
    for (input, label) in dataset {
        let score = forward_float(model, input)?;
        let predicted = if authenticate(score, 0.5) { 1.0 } else { 0.0 };
        if predicted != *label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model(topology: &[usize]) -> MlpModel {
        let weights = topology
            .windows(2)
            .map(|w| vec![0.0; (w[0] + 1) * w[1]])
            .collect();
        MlpModel::new(topology.to_vec(), weights).unwrap()
    }

    #[test]
    fn zero_weights_score_half() {
        let model = zero_model(&[4, 2, 1]);
        let score = forward_float(&model, &[0.3, 0.1, 0.9, 0.5]).unwrap();
        assert!((score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_one_one_hand_computation() {
        // weight 1, bias 0 in both layers: sigmoid(sigmoid(1))
        let model = MlpModel::new(vec![1, 1, 1], vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let score = forward_float(&model, &[1.0]).unwrap();
        assert!((score - sigmoid(sigmoid(1.0))).abs() < 1e-12);
        assert!((score - 0.6750).abs() < 5e-4);
    }

    #[test]
    fn paper_topology_scores_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let topology = [400usize, 8, 1];
        let weights = topology
            .windows(2)
            .map(|w| (0..(w[0] + 1) * w[1]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = MlpModel::new(topology.to_vec(), weights).unwrap();
        let input: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..1.0)).collect();
        let score = forward_float(&model, &input).unwrap();
        assert!(score > 0.0 && score < 1.0);
    }

    #[test]
    fn input_length_mismatch_is_an_error() {
        let model = zero_model(&[4, 1]);
        assert!(forward_float(&model, &[0.0; 3]).is_err());
        let fmt = FixedFormat::default_for_bits(8).unwrap();
        let lut = SigmoidLut::new(fmt);
        assert!(forward_fixed(&model, &[0.0; 3], fmt, &lut).is_err());
    }

    #[test]
    fn fixed_zero_weights_score_half_within_one_lut_step() {
        let fmt = FixedFormat::default_for_bits(8).unwrap();
        let lut = SigmoidLut::new(fmt);
        let model = zero_model(&[4, 2, 1]);
        let code = forward_fixed(&model, &[0.1, 0.2, 0.3, 0.4], fmt, &lut).unwrap();
        let score = fmt.to_real(code);
        assert!((score - 0.5).abs() <= 0.5 / 64.0 + fmt.step(), "{score}");
    }

    #[test]
    fn fixed_is_bit_exact_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let topology = [6usize, 3, 1];
        let weights: Vec<Vec<f64>> = topology
            .windows(2)
            .map(|w| (0..(w[0] + 1) * w[1]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = MlpModel::new(topology.to_vec(), weights).unwrap();
        let input: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        for bits in [4u8, 8, 16] {
            let fmt = FixedFormat::default_for_bits(bits).unwrap();
            let lut = SigmoidLut::new(fmt);
            let a = forward_fixed(&model, &input, fmt, &lut).unwrap();
            let b = forward_fixed(&model, &input, fmt, &lut).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn authenticate_is_inclusive() {
        assert!(authenticate(0.9, 0.5));
        assert!(authenticate(0.5, 0.5));
        assert!(!authenticate(0.49, 0.5));
    }

    #[test]
    fn training_drives_error_to_zero_on_identical_pairs() {
        let dataset: Vec<Sample> = (0..8)
            .map(|i| {
                let v = if i % 2 == 0 { 0.9 } else { 0.1 };
                (vec![v; 4], if i % 2 == 0 { 1.0 } else { 0.0 })
            })
            .collect();
        let model = train_reference(&dataset, &[4, 3, 1], 400, 0.8, 1).unwrap();
        assert_eq!(classification_error(&model, &dataset).unwrap(), 0.0);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let dataset = vec![(vec![0.5; 4], 1.0)];
        let a = train_reference(&dataset, &[4, 2, 1], 0, 0.5, 7).unwrap();
        let b = train_reference(&dataset, &[4, 2, 1], 0, 0.5, 7).unwrap();
        assert_eq!(a, b);
        // same seed, nonzero epochs: weights move
        let c = train_reference(&dataset, &[4, 2, 1], 5, 0.5, 7).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(train_reference(&[], &[4, 1], 1, 0.5, 0).is_err());
    }

    #[test]
    fn bad_labels_rejected() {
        let dataset = vec![(vec![0.5; 4], 0.7)];
        assert!(train_reference(&dataset, &[4, 1], 1, 0.5, 0).is_err());
    }

    #[test]
    fn mlp_json_round_trip_and_shape_check() {
        let model = zero_model(&[400, 8, 1]);
        let parsed = MlpModel::from_json(&model.to_json()).unwrap();
        assert_eq!(parsed, model);

        let mut bad = model;
        bad.weights[0].pop();
        assert!(MlpModel::from_json(&bad.to_json()).is_err());
    }
}
