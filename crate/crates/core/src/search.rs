//! Automatic format selection for tensors and for weight/activation pairs.
//!
//! The exhaustive mode scores every admissible `(weight, input)` format pair
//! by the MSE of the layer output `Q(W)·Q(X)ᵀ` against `W·Xᵀ`. The
//! resolution-aware mode scores each tensor on its own with the resolution
//! bound and never forms a quantized product while choosing, which is where
//! its speed comes from.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::SearchError;
use crate::error_model::{mse, mse_slices, resolution_bound};
use crate::formats::{builtin_formats, FpFormatSpec, NumberSystem};
use crate::quantizer::{calibrate_minmax, quantize_values};
use crate::tensor::{matmul_nt_f64, widen, Tensor};

/// Which format pairs a layer may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixPolicy {
    /// Minifloat formats only; weights and inputs chosen freely.
    MixedFp,
    /// Integer and minifloat formats, chosen freely per tensor.
    AllMixed,
    /// Like `AllMixed`, but both tensors of a layer must be INT or both FP.
    LimitedMix,
    /// The two NIA formats only.
    NiaOnly,
    IntOnly,
}

impl MixPolicy {
    pub const ALL: [MixPolicy; 5] = [
        MixPolicy::MixedFp,
        MixPolicy::AllMixed,
        MixPolicy::LimitedMix,
        MixPolicy::NiaOnly,
        MixPolicy::IntOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MixPolicy::MixedFp => "mixed-fp",
            MixPolicy::AllMixed => "all-mixed",
            MixPolicy::LimitedMix => "limited-mix",
            MixPolicy::NiaOnly => "nia",
            MixPolicy::IntOnly => "int",
        }
    }

    /// Candidate formats in canonical order.
    pub fn candidates(self, bits: u8) -> Result<Vec<NumberSystem>, SearchError> {
        let builtin = builtin_formats(bits)?;
        let list: Vec<_> = match self {
            MixPolicy::AllMixed | MixPolicy::LimitedMix => builtin,
            MixPolicy::MixedFp => builtin.into_iter().filter(NumberSystem::is_fp).collect(),
            MixPolicy::IntOnly => builtin.into_iter().filter(NumberSystem::is_int).collect(),
            MixPolicy::NiaOnly if bits == 8 => vec![
                NumberSystem::Fp(FpFormatSpec::E5M2_NIA),
                NumberSystem::Fp(FpFormatSpec::E4M3_NIA),
            ],
            MixPolicy::NiaOnly => vec![],
        };
        if list.is_empty() {
            return Err(SearchError::EmptyPolicy {
                policy: self.name().to_string(),
                bits,
            });
        }
        Ok(list)
    }

    pub fn requires_same_family(self) -> bool {
        self == MixPolicy::LimitedMix
    }
}

impl fmt::Display for MixPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MixPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MixPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

/// The objective minimized when choosing formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Exhaustive pair search on the layer-output MSE.
    OutputMse,
    /// Per-tensor quantization MSE, tensors chosen independently.
    TensorMse,
    /// Per-tensor resolution bound, tensors chosen independently.
    Resolution,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::OutputMse => "mse",
            Criterion::TensorMse => "tensor-mse",
            Criterion::Resolution => "resolution",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Criterion::OutputMse,
            Criterion::TensorMse,
            Criterion::Resolution,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

/// Candidate formats plus the family constraint on pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    candidates: Vec<NumberSystem>,
    same_family: bool,
    label: String,
}

impl SearchSpace {
    pub fn new(candidates: Vec<NumberSystem>, same_family: bool) -> Result<Self, SearchError> {
        if candidates.is_empty() {
            return Err(SearchError::EmptyCandidates);
        }
        let label = if same_family {
            "custom-limited"
        } else {
            "custom"
        };
        Ok(SearchSpace {
            candidates,
            same_family,
            label: label.to_string(),
        })
    }

    pub fn from_policy(policy: MixPolicy, bits: u8) -> Result<Self, SearchError> {
        Ok(SearchSpace {
            candidates: policy.candidates(bits)?,
            same_family: policy.requires_same_family(),
            label: policy.name().to_string(),
        })
    }

    /// Replaces the candidate list while keeping the family constraint and label.
    pub fn with_candidates(mut self, candidates: Vec<NumberSystem>) -> Result<Self, SearchError> {
        if candidates.is_empty() {
            return Err(SearchError::EmptyCandidates);
        }
        self.candidates = candidates;
        Ok(self)
    }

    pub fn candidates(&self) -> &[NumberSystem] {
        &self.candidates
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn admits(&self, weight: &NumberSystem, input: &NumberSystem) -> bool {
        !self.same_family || weight.same_family(input)
    }

    /// Admissible `(weight_idx, input_idx)` pairs, weight-major canonical order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.candidates.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.admits(&self.candidates[i], &self.candidates[j]))
            .collect()
    }
}

/// Index of the smallest loss; the first one wins ties.
fn argmin(losses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSelection {
    pub format: NumberSystem,
    /// `(candidate, score)` in candidate order.
    pub loss_table: Vec<(NumberSystem, f64)>,
    pub degenerate: bool,
}

impl TensorSelection {
    pub fn loss(&self) -> f64 {
        self.loss_table
            .iter()
            .find(|(f, _)| *f == self.format)
            .map(|(_, l)| *l)
            .expect("selected format is in its own table")
    }
}

/// Scores one tensor under a MinMax-calibrated config.
pub fn tensor_score(t: &Tensor, system: NumberSystem, criterion: Criterion) -> f64 {
    let cfg = calibrate_minmax(t, system);
    match criterion {
        Criterion::Resolution => resolution_bound(t, &cfg),
        Criterion::OutputMse | Criterion::TensorMse => {
            mse(t, &quantize_values(t, &cfg)).expect("shapes match")
        }
    }
}

/// Chooses a format for a single tensor. A degenerate (all-zero) tensor
/// yields the first candidate.
pub fn select_tensor_format(
    t: &Tensor,
    candidates: &[NumberSystem],
    criterion: Criterion,
) -> Result<TensorSelection, SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::EmptyCandidates);
    }
    let degenerate = t.max_abs() == 0.0;
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&c| tensor_score(t, c, criterion))
        .collect();
    let best = if degenerate { 0 } else { argmin(&scores) };
    Ok(TensorSelection {
        format: candidates[best],
        loss_table: candidates.iter().copied().zip(scores).collect(),
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairLoss {
    #[serde(rename = "w_format")]
    pub weight: NumberSystem,
    #[serde(rename = "x_format")]
    pub input: NumberSystem,
    pub loss: f64,
}

/// The outcome for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSelection {
    pub weight_format: NumberSystem,
    pub input_format: NumberSystem,
    /// Realized layer-output MSE of the chosen pair.
    pub loss: f64,
    /// Every pair whose output MSE was evaluated, in canonical order.
    pub loss_table: Vec<PairLoss>,
    pub criterion: Criterion,
    /// Per-tensor scores, present for the factorized criteria.
    pub weight_scores: Vec<(NumberSystem, f64)>,
    pub input_scores: Vec<(NumberSystem, f64)>,
    pub degenerate: bool,
}

/// Inputs for one layer: weights `(out, in)` and a calibration batch `(batch, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub weights: Tensor,
    pub inputs: Tensor,
}

impl Layer {
    pub fn new(name: impl Into<String>, weights: Tensor, inputs: Tensor) -> Self {
        Layer {
            name: name.into(),
            weights,
            inputs,
        }
    }
}

struct LayerProblem {
    out: usize,
    batch: usize,
    inner: usize,
    reference: Vec<f64>,
}

impl LayerProblem {
    fn new(w: &Tensor, x: &Tensor, layer: usize) -> Result<Self, SearchError> {
        let (out, weight_in) = w.matrix_dims()?;
        let (batch, input_in) = x.matrix_dims()?;
        if weight_in != input_in {
            return Err(SearchError::InnerDimMismatch {
                layer,
                weight_in,
                input_in,
            });
        }
        let reference = matmul_nt_f64(&widen(w.data()), &widen(x.data()), out, batch, weight_in);
        Ok(LayerProblem {
            out,
            batch,
            inner: weight_in,
            reference,
        })
    }

    fn output_mse(&self, qw: &[f64], qx: &[f64]) -> f64 {
        let y = matmul_nt_f64(qw, qx, self.out, self.batch, self.inner);
        mse_slices(
            y.into_iter(),
            self.reference.iter().copied(),
            self.reference.len(),
        )
    }
}

fn simulated(t: &Tensor, system: NumberSystem) -> Vec<f64> {
    widen(quantize_values(t, &calibrate_minmax(t, system)).data())
}

/// Selects the weight and input formats of one layer.
pub fn select_layer_formats(
    weights: &Tensor,
    inputs: &Tensor,
    space: &SearchSpace,
    criterion: Criterion,
) -> Result<LayerSelection, SearchError> {
    select_layer(weights, inputs, space, criterion, 0)
}

fn select_layer(
    weights: &Tensor,
    inputs: &Tensor,
    space: &SearchSpace,
    criterion: Criterion,
    layer: usize,
) -> Result<LayerSelection, SearchError> {
    let problem = LayerProblem::new(weights, inputs, layer)?;
    let cand = space.candidates();
    let degenerate = weights.max_abs() == 0.0 || inputs.max_abs() == 0.0;

    if criterion == Criterion::OutputMse {
        let pairs = space.pairs();
        let qw: Vec<Vec<f64>> = cand.par_iter().map(|&c| simulated(weights, c)).collect();
        let qx: Vec<Vec<f64>> = cand.par_iter().map(|&c| simulated(inputs, c)).collect();
        let losses: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| problem.output_mse(&qw[i], &qx[j]))
            .collect();
        let best = argmin(&losses);
        let (i, j) = pairs[best];
        return Ok(LayerSelection {
            weight_format: cand[i],
            input_format: cand[j],
            loss: losses[best],
            loss_table: pairs
                .iter()
                .zip(&losses)
                .map(|(&(i, j), &loss)| PairLoss {
                    weight: cand[i],
                    input: cand[j],
                    loss,
                })
                .collect(),
            criterion,
            weight_scores: vec![],
            input_scores: vec![],
            degenerate,
        });
    }

    let (w_scores, x_scores) = rayon::join(
        || -> Vec<f64> {
            cand.iter()
                .map(|&c| tensor_score(weights, c, criterion))
                .collect()
        },
        || -> Vec<f64> {
            cand.iter()
                .map(|&c| tensor_score(inputs, c, criterion))
                .collect()
        },
    );

    // under a family constraint, pick the best member of each family per
    // tensor and let the realized output decide between families
    let families: Vec<Vec<usize>> = if space.same_family {
        let ints: Vec<usize> = (0..cand.len()).filter(|&i| cand[i].is_int()).collect();
        let fps: Vec<usize> = (0..cand.len()).filter(|&i| cand[i].is_fp()).collect();
        [ints, fps].into_iter().filter(|f| !f.is_empty()).collect()
    } else {
        vec![(0..cand.len()).collect()]
    };
    let w_zero = weights.max_abs() == 0.0;
    let x_zero = inputs.max_abs() == 0.0;
    let best_in = |scores: &[f64], members: &[usize], zero: bool| -> usize {
        if zero {
            return members[0];
        }
        let local: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
        members[argmin(&local)]
    };
    let mut loss_table = Vec::with_capacity(families.len());
    for members in &families {
        let i = best_in(&w_scores, members, w_zero);
        let j = best_in(&x_scores, members, x_zero);
        let loss = problem.output_mse(&simulated(weights, cand[i]), &simulated(inputs, cand[j]));
        loss_table.push(PairLoss {
            weight: cand[i],
            input: cand[j],
            loss,
        });
    }
    let best = argmin(&loss_table.iter().map(|p| p.loss).collect::<Vec<_>>());
    let chosen = loss_table[best];
    Ok(LayerSelection {
        weight_format: chosen.weight,
        input_format: chosen.input,
        loss: chosen.loss,
        loss_table,
        criterion,
        weight_scores: cand.iter().copied().zip(w_scores).collect(),
        input_scores: cand.iter().copied().zip(x_scores).collect(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerResult {
    pub name: String,
    pub selection: LayerSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramRow {
    pub format: NumberSystem,
    pub weight_count: usize,
    pub input_count: usize,
}

/// Search results for a whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatReport {
    pub layers: Vec<LayerResult>,
    pub histogram: Vec<HistogramRow>,
    pub criterion: Criterion,
    pub policy: String,
    pub wall_ms: f64,
}

impl FormatReport {
    /// Pretty JSON. Without `include_meta` the wall time is omitted so that
    /// identical inputs give identical bytes.
    pub fn to_json(&self, include_meta: bool) -> String {
        serde_json::to_string_pretty(&ReportJson {
            report: self,
            include_meta,
        })
        .expect("report serializes")
    }

    /// `format,w_count,x_count` rows in candidate order.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("format,w_count,x_count\n");
        for row in &self.histogram {
            out.push_str(&format!(
                "{},{},{}\n",
                row.format, row.weight_count, row.input_count
            ));
        }
        out
    }

    pub fn total_loss(&self) -> f64 {
        self.layers.iter().map(|l| l.selection.loss).sum()
    }
}

pub fn run_search(
    layers: &[Layer],
    space: &SearchSpace,
    criterion: Criterion,
) -> Result<FormatReport, SearchError> {
    if layers.is_empty() {
        return Err(SearchError::NoLayers);
    }
    let start = Instant::now();
    let selections = layers
        .par_iter()
        .enumerate()
        .map(|(i, l)| select_layer(&l.weights, &l.inputs, space, criterion, i))
        .collect::<Result<Vec<_>, _>>()?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut histogram: Vec<HistogramRow> = space
        .candidates()
        .iter()
        .map(|&format| HistogramRow {
            format,
            weight_count: 0,
            input_count: 0,
        })
        .collect();
    for s in &selections {
        let slot = |f: NumberSystem| space.candidates().iter().position(|&c| c == f).unwrap();
        histogram[slot(s.weight_format)].weight_count += 1;
        histogram[slot(s.input_format)].input_count += 1;
    }

    Ok(FormatReport {
        layers: layers
            .iter()
            .zip(selections)
            .map(|(l, selection)| LayerResult {
                name: l.name.clone(),
                selection,
            })
            .collect(),
        histogram,
        criterion,
        policy: space.label().to_string(),
        wall_ms,
    })
}

struct ReportJson<'a> {
    report: &'a FormatReport,
    include_meta: bool,
}

struct LayerJson<'a>(&'a LayerResult);
struct ScoreTable<'a>(&'a [(NumberSystem, f64)]);
struct LossTable<'a>(&'a [PairLoss]);
struct Histogram<'a>(&'a [HistogramRow]);
struct Counts {
    w: usize,
    x: usize,
}

impl Serialize for ReportJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = self.report;
        let mut st = s.serialize_struct("FormatReport", 5)?;
        let layers: Vec<_> = r.layers.iter().map(LayerJson).collect();
        st.serialize_field("layers", &layers)?;
        st.serialize_field("histogram", &Histogram(&r.histogram))?;
        st.serialize_field("criterion", r.criterion.name())?;
        st.serialize_field("policy", &r.policy)?;
        if self.include_meta {
            st.serialize_field("wall_ms", &r.wall_ms)?;
        }
        st.end()
    }
}

impl Serialize for LayerJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let sel = &self.0.selection;
        let mut st = s.serialize_struct("Layer", 8)?;
        st.serialize_field("name", &self.0.name)?;
        st.serialize_field("w_format", &sel.weight_format)?;
        st.serialize_field("x_format", &sel.input_format)?;
        st.serialize_field("loss", &sel.loss)?;
        st.serialize_field("loss_table", &LossTable(&sel.loss_table))?;
        if !sel.weight_scores.is_empty() {
            st.serialize_field("w_scores", &ScoreTable(&sel.weight_scores))?;
            st.serialize_field("x_scores", &ScoreTable(&sel.input_scores))?;
        }
        st.serialize_field("degenerate", &sel.degenerate)?;
        st.end()
    }
}

impl Serialize for LossTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for p in self.0 {
            map.serialize_entry(&format!("{},{}", p.weight, p.input), &p.loss)?;
        }
        map.end()
    }
}

impl Serialize for ScoreTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (f, v) in self.0 {
            map.serialize_entry(&f.name(), v)?;
        }
        map.end()
    }
}

impl Serialize for Histogram<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for row in self.0 {
            map.serialize_entry(
                &row.format.name(),
                &Counts {
                    w: row.weight_count,
                    x: row.input_count,
                },
            )?;
        }
        map.end()
    }
}

impl Serialize for Counts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Counts", 2)?;
        st.serialize_field("w", &self.w)?;
        st.serialize_field("x", &self.x)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{calibrate_minmax, quantize_values};
    use crate::synthetic::{gaussian, int_grid_tensor, student_t};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_mixed() -> SearchSpace {
        SearchSpace::from_policy(MixPolicy::AllMixed, 8).unwrap()
    }

    #[test]
    fn policy_candidate_sets() {
        let names = |p: MixPolicy, bits| -> Vec<String> {
            p.candidates(bits)
                .unwrap()
                .iter()
                .map(|c| c.name())
                .collect()
        };
        assert_eq!(
            names(MixPolicy::MixedFp, 8),
            ["e5m2", "e4m3", "e3m4", "e2m5"]
        );
        assert_eq!(names(MixPolicy::MixedFp, 6), ["e3m2", "e2m3"]);
        assert_eq!(names(MixPolicy::NiaOnly, 8), ["e5m2:nia", "e4m3:nia"]);
        assert_eq!(names(MixPolicy::IntOnly, 6), ["int6"]);
        assert!(MixPolicy::NiaOnly.candidates(6).is_err());
        assert_eq!(all_mixed().pairs().len(), 25);
        let limited = SearchSpace::from_policy(MixPolicy::LimitedMix, 8).unwrap();
        assert_eq!(limited.pairs().len(), 17);
        assert!(SearchSpace::new(vec![], false).is_err());
        assert_eq!(
            "limited-mix".parse::<MixPolicy>().unwrap(),
            MixPolicy::LimitedMix
        );
        assert_eq!(
            "resolution".parse::<Criterion>().unwrap(),
            Criterion::Resolution
        );
    }

    #[test]
    fn int_grid_tensor_selects_int8() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = int_grid_tensor(&[512], 0.0078125, &mut rng);
        let sel =
            select_tensor_format(&t, &builtin_formats(8).unwrap(), Criterion::TensorMse).unwrap();
        assert_eq!(sel.format, NumberSystem::INT8);
        assert_eq!(sel.loss(), 0.0);
    }

    #[test]
    fn degenerate_tensor_returns_first_candidate() {
        let t = Tensor::from_vec(vec![0.0; 8]).unwrap();
        let sel =
            select_tensor_format(&t, &builtin_formats(8).unwrap()[1..], Criterion::Resolution)
                .unwrap();
        assert!(sel.degenerate);
        assert_eq!(sel.format, NumberSystem::Fp(FpFormatSpec::E5M2));
        assert!(select_tensor_format(&t, &[], Criterion::Resolution).is_err());
    }

    #[test]
    fn long_tailed_tensor_prefers_e3m4() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = student_t(&[4096], 5.0, 1e9, &mut rng);
        for criterion in [Criterion::TensorMse, Criterion::Resolution] {
            let sel = select_tensor_format(&t, &builtin_formats(8).unwrap(), criterion).unwrap();
            assert_eq!(
                sel.format,
                NumberSystem::Fp(FpFormatSpec::E3M4),
                "{criterion}"
            );
        }
    }

    #[test]
    fn gaussian_tensor_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = gaussian(&[4096], 1.0, &mut rng);
        let cands = builtin_formats(8).unwrap();
        let sel = select_tensor_format(&t, &cands, Criterion::TensorMse).unwrap();
        let mut best = (f64::INFINITY, cands[0]);
        for &c in &cands {
            let cfg = calibrate_minmax(&t, c);
            let q = quantize_values(&t, &cfg);
            let e: f64 = t
                .data()
                .iter()
                .zip(q.data())
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
                / t.len() as f64;
            if e < best.0 {
                best = (e, c);
            }
        }
        assert_eq!(sel.format, best.1);
        // a pure Gaussian with MinMax scaling is covered better by a uniform grid
        assert_eq!(sel.format, NumberSystem::INT8);
    }

    #[test]
    fn grid_layer_selects_int8_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = int_grid_tensor(&[8, 16], 0.5, &mut rng);
        let x = int_grid_tensor(&[32, 16], 0.25, &mut rng);
        for policy in [
            MixPolicy::AllMixed,
            MixPolicy::LimitedMix,
            MixPolicy::IntOnly,
        ] {
            let space = SearchSpace::from_policy(policy, 8).unwrap();
            let sel = select_layer_formats(&w, &x, &space, Criterion::OutputMse).unwrap();
            assert_eq!(
                (sel.weight_format, sel.input_format),
                (NumberSystem::INT8, NumberSystem::INT8)
            );
            assert_eq!(sel.loss, 0.0);
        }
    }

    #[test]
    fn inner_dim_mismatch() {
        let w = Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        let x = Tensor::new(vec![4, 2], vec![1.0; 8]).unwrap();
        assert!(matches!(
            select_layer_formats(&w, &x, &all_mixed(), Criterion::OutputMse),
            Err(SearchError::InnerDimMismatch { .. })
        ));
        let v = Tensor::from_vec(vec![1.0; 3]).unwrap();
        assert!(select_layer_formats(&v, &x, &all_mixed(), Criterion::OutputMse).is_err());
    }

    #[test]
    fn limited_mix_factorized_keeps_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // grid weights favour INT8 alone, heavy-tailed inputs favour an FP format
        let w = int_grid_tensor(&[16, 32], 0.125, &mut rng);
        let x = student_t(&[64, 32], 5.0, 1e9, &mut rng);
        let space = SearchSpace::from_policy(MixPolicy::LimitedMix, 8).unwrap();
        for criterion in [
            Criterion::OutputMse,
            Criterion::TensorMse,
            Criterion::Resolution,
        ] {
            let sel = select_layer_formats(&w, &x, &space, criterion).unwrap();
            assert!(
                sel.weight_format.same_family(&sel.input_format),
                "{criterion}"
            );
        }
        let free = select_layer_formats(&w, &x, &all_mixed(), Criterion::TensorMse).unwrap();
        assert_eq!(free.weight_format, NumberSystem::INT8);
        assert!(free.input_format.is_fp());
    }

    #[test]
    fn report_histogram_and_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layers = vec![Layer::new(
            "fc",
            int_grid_tensor(&[4, 8], 0.5, &mut rng),
            int_grid_tensor(&[6, 8], 0.5, &mut rng),
        )];
        let report = run_search(&layers, &all_mixed(), Criterion::OutputMse).unwrap();
        assert_eq!(report.histogram[0].weight_count, 1);
        assert_eq!(report.histogram[0].input_count, 1);
        let csv = report.histogram_csv();
        assert!(csv.starts_with("format,w_count,x_count\nint8,1,1\ne5m2,0,0\n"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json(false)).unwrap();
        assert_eq!(json["layers"][0]["w_format"], "int8");
        assert_eq!(json["layers"][0]["loss_table"]["int8,int8"], 0.0);
        assert_eq!(json["histogram"]["int8"]["w"], 1);
        assert_eq!(json["policy"], "all-mixed");
        assert!(json.get("wall_ms").is_none());
        let with_meta: serde_json::Value = serde_json::from_str(&report.to_json(true)).unwrap();
        assert!(with_meta["wall_ms"].is_number());
        assert!(run_search(&[], &all_mixed(), Criterion::OutputMse).is_err());
    }
}
