//! Finite-difference verification of the analytic gradients.

use crate::corpus::EmbeddingOrigin;
use crate::error::{Error, Result};
use crate::model::{GradientTape, Model, ModelDims, Objective, PreparedPair};
use crate::numkit::SeededRng;
use crate::objective::{Batch, LossKind, CLASSES};
use crate::params::Parameters;
use crate::synthetic::{generate, SyntheticSpec};

pub const FD_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error; near-zero entries are compared
/// by absolute error against `tolerance × floor`.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

pub const MAX_CHECK_HIDDEN: usize = 8;
pub const MAX_CHECK_DIM: usize = 8;
pub const MAX_CHECK_BATCH: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < tolerance)
    }

    pub fn to_tsv(&self, tolerance: f64) -> String {
        let mut out = String::from("group\tentries\tmax_rel_error\tstatus\n");
        for g in &self.groups {
            let status = if g.max_rel_error < tolerance { "ok" } else { "FAIL" };
            out.push_str(&format!(
                "{}\t{}\t{:.3e}\t{status}\n",
                g.name, g.entries, g.max_rel_error
            ));
        }
        out
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// A loss that ignores its input; its gradient must vanish everywhere.
pub struct ConstantObjective(pub f64);

impl Objective<f64> for ConstantObjective {
    fn loss(&self, _batch: &Batch<f64>) -> Result<f64> {
        Ok(self.0)
    }

    fn gradient(&self, batch: &Batch<f64>) -> Result<Vec<[f64; CLASSES]>> {
        Ok(vec![[0.0; CLASSES]; batch.len()])
    }
}

/// Analytic gradients of `objective` at `model`, with an optional hook that
/// may alter them before comparison.
pub fn analytic_gradients(
    model: &Model<f64>,
    pairs: &[PreparedPair],
    objective: &dyn Objective<f64>,
) -> Result<GradientTape<f64>> {
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    Ok(model.batch_gradient(&refs, objective)?.1)
}

/// Compares `analytic` against central differences of `objective`, one
/// entry at a time, and reports the worst relative error per tensor.
pub fn compare_with_finite_differences(
    model: &Model<f64>,
    pairs: &[PreparedPair],
    objective: &dyn Objective<f64>,
    analytic: &GradientTape<f64>,
    step: f64,
) -> Result<GradCheckReport> {
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let mut probe = model.clone();
    let names: Vec<String> = model.params.params().into_iter().map(|(n, _)| n).collect();
    let analytic = analytic.params();
    let mut groups = Vec::with_capacity(names.len());
    for (gi, name) in names.iter().enumerate() {
        let len = analytic[gi].1.data().len();
        let mut worst = 0.0f64;
        for k in 0..len {
            let original = probe.params.params()[gi].1.data()[k];
            probe.params.params_mut()[gi].1.data_mut()[k] = original + step;
            let up = probe.batch_loss(&refs, objective)?;
            probe.params.params_mut()[gi].1.data_mut()[k] = original - step;
            let down = probe.batch_loss(&refs, objective)?;
            probe.params.params_mut()[gi].1.data_mut()[k] = original;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(analytic[gi].1.data()[k], numeric));
        }
        groups.push(GroupError {
            name: name.clone(),
            entries: len,
            max_rel_error: worst,
        });
    }
    Ok(GradCheckReport { groups })
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub dims: ModelDims,
    pub batch: usize,
    pub seed: u64,
    pub step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dims: ModelDims::new(3, 4),
            batch: 5,
            seed: 17,
            step: FD_STEP,
        }
    }
}

impl GradCheckConfig {
    fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if d.hidden > MAX_CHECK_HIDDEN || d.attention > MAX_CHECK_HIDDEN || d.mlp_hidden > MAX_CHECK_HIDDEN {
            return Err(Error::Config(format!(
                "gradient check needs hidden sizes ≤ {MAX_CHECK_HIDDEN}"
            )));
        }
        if d.embedding_dim > MAX_CHECK_DIM {
            return Err(Error::Config(format!("gradient check needs D ≤ {MAX_CHECK_DIM}")));
        }
        if self.batch < 2 || self.batch > MAX_CHECK_BATCH {
            return Err(Error::Config(format!(
                "gradient check batch must be in 2..={MAX_CHECK_BATCH}"
            )));
        }
        d.validate()
    }
}

/// Small random model and batch for gradient checking. Biases are drawn
/// away from zero so their gradients are exercised in general position.
pub fn gradcheck_fixture(config: &GradCheckConfig) -> Result<(Model<f64>, Vec<PreparedPair>)> {
    config.validate()?;
    let mut spec = SyntheticSpec::new(config.batch, config.dims, config.seed);
    spec.vocab_size = 12;
    spec.min_len = 2;
    spec.max_len = 4;
    let suite = generate(&spec)?;
    let mut rng = SeededRng::new(config.seed).fork(7);
    let table = suite.student_table::<f64>(EmbeddingOrigin::Random, &mut rng);
    let mut model = Model::new(
        config.dims,
        suite.vocab.clone(),
        table,
        suite.resources.clone(),
        &mut rng,
    )?;
    for (_, m) in model.params.network.params_mut() {
        if m.cols() == 1 {
            for x in m.data_mut() {
                *x = rng.uniform(-0.3, 0.3);
            }
        }
    }
    // golds off the integer grid except one, so both KLD branches run
    let mut pairs = model.prepare(&suite.pairs);
    for (i, p) in pairs.iter_mut().enumerate() {
        let g = p.gold.unwrap_or(0.0);
        p.gold = Some(if i == 0 { g.round() } else { g });
    }
    Ok((model, pairs))
}

/// Full-model gradient check for one loss.
pub fn gradient_check(config: &GradCheckConfig, loss: LossKind) -> Result<GradCheckReport> {
    let (model, pairs) = gradcheck_fixture(config)?;
    let analytic = analytic_gradients(&model, &pairs, &loss)?;
    compare_with_finite_differences(&model, &pairs, &loss, &analytic, config.step)
}
