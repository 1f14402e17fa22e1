//! Named strategies selected at run time: dependence models compared in the
//! χ evaluation and synthetic ground-truth generators.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brown_resnick::{br_chi_at, fit_br, SiteGeometry};
use crate::dependence::{chi_matrix, ChiMatrix, Site};
use crate::error::{Error, Result};
use crate::grid::{GridData, PseudoGrid};
use crate::margins::PSEUDO_CLAMP;
use crate::pipeline::{generated_chi, EmulatorModel};
use crate::synthetic::{GaussCopula, HrPairs, Mixed, SyntheticGenerator};

/// Name-keyed collection of strategy objects.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, entry: Arc<T>) {
        self.entries.insert(name, entry);
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Everything a dependence model may draw on to produce χ estimates.
pub struct ChiContext<'a> {
    pub train: &'a PseudoGrid,
    pub geometry: &'a SiteGeometry,
    pub pairs: &'a [(Site, Site)],
    pub q: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub emulator: Option<&'a EmulatorModel>,
}

pub trait DependenceModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn chi(&self, ctx: &ChiContext) -> Result<ChiMatrix>;
}

/// Empirical χ of the training sample itself (the benchmark).
pub struct TrainEmpirical;

/// χ of independent uniform fields.
pub struct Independence;

/// Fractal-variogram Brown–Resnick model fitted to the training χ.
pub struct BrownResnick;

/// χ of fields drawn from a trained generator.
pub struct Emulator;

impl DependenceModel for TrainEmpirical {
    fn name(&self) -> &'static str {
        "train-empirical"
    }

    fn chi(&self, ctx: &ChiContext) -> Result<ChiMatrix> {
        chi_matrix(ctx.train, ctx.pairs, ctx.q)
    }
}

impl DependenceModel for Independence {
    fn name(&self) -> &'static str {
        "independence"
    }

    fn chi(&self, ctx: &ChiContext) -> Result<ChiMatrix> {
        let (h, w) = ctx.train.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let values = (0..ctx.n_samples * h * w)
            .map(|_| rng.gen::<f64>().clamp(PSEUDO_CLAMP, 1.0 - PSEUDO_CLAMP))
            .collect();
        let grid = PseudoGrid::new(GridData::new(ctx.n_samples, h, w, values)?)?;
        chi_matrix(&grid, ctx.pairs, ctx.q)
    }
}

impl DependenceModel for BrownResnick {
    fn name(&self) -> &'static str {
        "brown-resnick"
    }

    fn chi(&self, ctx: &ChiContext) -> Result<ChiMatrix> {
        let fit = fit_br(&chi_matrix(ctx.train, ctx.pairs, ctx.q)?, ctx.geometry)?;
        let chi = ctx
            .pairs
            .iter()
            .map(|&(a, b)| Ok(Some(br_chi_at(ctx.geometry.distance(a, b)?, &fit.params)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChiMatrix {
            pairs: ctx.pairs.to_vec(),
            chi,
            q: ctx.q,
        })
    }
}

impl DependenceModel for Emulator {
    fn name(&self) -> &'static str {
        "evtgan"
    }

    fn chi(&self, ctx: &ChiContext) -> Result<ChiMatrix> {
        let model = ctx
            .emulator
            .ok_or_else(|| Error::State("the evtgan model needs a trained emulator".into()))?;
        generated_chi(model.gan(), ctx.n_samples, ctx.seed, ctx.pairs, ctx.q)
    }
}

pub fn dependence_models() -> Registry<dyn DependenceModel> {
    let mut r: Registry<dyn DependenceModel> = Registry::new("dependence model");
    let models: [Arc<dyn DependenceModel>; 4] = [
        Arc::new(TrainEmpirical),
        Arc::new(Independence),
        Arc::new(BrownResnick),
        Arc::new(Emulator),
    ];
    for m in models {
        r.register(m.name(), m);
    }
    r
}

pub fn synthetic_generators() -> Registry<dyn SyntheticGenerator> {
    let mut r: Registry<dyn SyntheticGenerator> = Registry::new("synthetic generator");
    let gens: [Arc<dyn SyntheticGenerator>; 3] = [Arc::new(GaussCopula), Arc::new(HrPairs), Arc::new(Mixed)];
    for g in gens {
        r.register(g.name(), g);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        assert_eq!(
            dependence_models().names(),
            vec!["brown-resnick", "evtgan", "independence", "train-empirical"]
        );
        assert_eq!(synthetic_generators().names(), vec!["gauss_copula", "hr_pairs", "mixed"]);
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let err = synthetic_generators().get("gauss").err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("gauss_copula") && msg.contains("'gauss'"), "{msg}");
    }

    #[test]
    fn emulator_model_requires_trained_generator() {
        let train = PseudoGrid::new(GridData::new(3, 1, 2, vec![0.25, 0.5, 0.5, 0.75, 0.75, 0.25]).unwrap()).unwrap();
        let geom = SiteGeometry::grid(1, 2);
        let pairs = [((0, 0), (0, 1))];
        let ctx = ChiContext {
            train: &train,
            geometry: &geom,
            pairs: &pairs,
            q: 0.6,
            n_samples: 10,
            seed: 0,
            emulator: None,
        };
        assert!(matches!(Emulator.chi(&ctx), Err(Error::State(_))));
        assert_eq!(TrainEmpirical.chi(&ctx).unwrap().chi, vec![Some(0.0)]);
    }
}
