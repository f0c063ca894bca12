use std::collections::BTreeMap;

use super::rates::{aqueous_equilibrium_constant, ArrheniusParams};
use super::{add_opt, EvalContext, JacobianBuilder, Process};
use crate::config::{CondensedUnits, MechanismConfig, ProcessConfig, ProcessType, SpeciesKind};
use crate::sparse::{CscMatrix, SparsityPattern};
use crate::state::{EnvironmentalState, StateLayout};

/// One direction of a condensed-phase reaction inside one phase instance.
#[derive(Debug, Clone)]
struct Term {
    /// (offset, exponent, 1/MW)
    species: Vec<(usize, u32, f64)>,
    order: i32,
}

impl Term {
    /// `∏ (m_i/MW_i)^{q_i}`, mol m⁻³ based.
    fn product(&self, y: &[f64]) -> f64 {
        self.species
            .iter()
            .map(|&(o, q, inv)| (y[o] * inv).powi(q as i32))
            .product()
    }

    /// `∂/∂m_j` of [`Term::product`] for the `j`-th species.
    fn partial(&self, y: &[f64], j: usize) -> f64 {
        let mut v = 1.0;
        for (i, &(o, q, inv)) in self.species.iter().enumerate() {
            let x = y[o] * inv;
            if i == j {
                v *= q as f64 * x.powi(q as i32 - 1) * inv;
            } else {
                v *= x.powi(q as i32);
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
struct Instance {
    fwd: Term,
    rev: Term,
    /// (row, ν·MW): kg produced per mol of reaction.
    rows: Vec<(usize, f64)>,
    water: Option<usize>,
    /// Columns in the order fwd species, rev species, water.
    cols: Vec<usize>,
    slots: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
enum CondensedRate {
    Arrhenius(ArrheniusParams),
    Reversible { a: f64, c: f64, k_reverse: f64 },
}

/// Condensed-phase reaction replicated over every instance of its phase.
#[derive(Debug, Clone)]
pub struct CondensedReaction {
    process_type: ProcessType,
    label: Option<String>,
    rate: CondensedRate,
    molar: bool,
    instances: Vec<Instance>,
    k_forward: f64,
    k_reverse: f64,
}

impl CondensedReaction {
    pub fn new(config: &MechanismConfig, layout: &StateLayout, p: &ProcessConfig) -> Self {
        let phase = p.phase.as_deref().expect("validated phase");
        let molar = p.process_type == ProcessType::AqueousReversible
            || p.units.unwrap_or(CondensedUnits::Molar) == CondensedUnits::Molar;
        let mw = |s: &str| {
            config
                .species(SpeciesKind::Aerosol, s)
                .expect("validated aerosol species")
                .molecular_weight
        };
        let reversible = p.process_type == ProcessType::AqueousReversible;
        let instances = layout
            .instances_of(phase)
            .map(|(_, pi)| {
                let off = |s: &str| {
                    let k = pi
                        .species
                        .iter()
                        .position(|x| x == s)
                        .expect("species in phase");
                    pi.offsets[k]
                };
                let fwd = Term {
                    species: p
                        .reactants
                        .iter()
                        .map(|(s, r)| (off(s), r.qty, 1.0 / mw(s)))
                        .collect(),
                    order: p.reactants.values().map(|r| r.qty as i32).sum(),
                };
                let rev = if reversible {
                    Term {
                        species: p
                            .products
                            .iter()
                            .map(|(s, r)| (off(s), r.yield_ as u32, 1.0 / mw(s)))
                            .collect(),
                        order: p.products.values().map(|r| r.yield_ as i32).sum(),
                    }
                } else {
                    Term {
                        species: Vec::new(),
                        order: 0,
                    }
                };
                let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
                for (s, r) in &p.reactants {
                    *coef.entry(off(s)).or_default() -= r.qty as f64 * mw(s);
                }
                for (s, r) in &p.products {
                    *coef.entry(off(s)).or_default() += r.yield_ * mw(s);
                }
                let water = if molar {
                    p.water_species.as_deref().map(off)
                } else {
                    None
                };
                let mut cols: Vec<usize> = fwd
                    .species
                    .iter()
                    .chain(&rev.species)
                    .map(|t| t.0)
                    .collect();
                cols.extend(water);
                let rows: Vec<(usize, f64)> = coef.into_iter().collect();
                Instance {
                    slots: vec![vec![None; rows.len()]; cols.len()],
                    fwd,
                    rev,
                    rows,
                    water,
                    cols,
                }
            })
            .collect();
        let rate = if reversible {
            CondensedRate::Reversible {
                a: p.param("A"),
                c: p.param("C"),
                k_reverse: p.param("k_reverse"),
            }
        } else {
            CondensedRate::Arrhenius(ArrheniusParams::from_config(p))
        };
        Self {
            process_type: p.process_type,
            label: p.label.clone(),
            rate,
            molar,
            instances,
            k_forward: 0.0,
            k_reverse: 0.0,
        }
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// `(k_forward, k_reverse)` at the cached environment.
    pub fn rate_constants(&self) -> (f64, f64) {
        (self.k_forward, self.k_reverse)
    }

    /// Water mass (kg m⁻³) for molar units, 1 for mol m⁻³ units, `None` when dry.
    fn water_factor(&self, inst: &Instance, y: &[f64]) -> Option<f64> {
        match inst.water {
            Some(w) if y[w] > 0.0 => Some(y[w]),
            Some(_) => None,
            None => Some(1.0),
        }
    }

    /// Net reaction rate per m³ of air and its water scaling of each direction.
    fn net_rate(&self, inst: &Instance, y: &[f64], w: f64) -> (f64, f64, f64) {
        let sf = if self.molar {
            w.powi(1 - inst.fwd.order)
        } else {
            1.0
        };
        let sr = if self.molar {
            w.powi(1 - inst.rev.order)
        } else {
            1.0
        };
        let rf = self.k_forward * sf * inst.fwd.product(y);
        let rr = if inst.rev.species.is_empty() {
            0.0
        } else {
            self.k_reverse * sr * inst.rev.product(y)
        };
        (rf - rr, rf, rr)
    }
}

impl Process for CondensedReaction {
    fn process_type(&self) -> ProcessType {
        self.process_type
    }

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn register_jacobian_elements(&self, jac: &mut JacobianBuilder) {
        for inst in &self.instances {
            let rows: Vec<usize> = inst.rows.iter().map(|r| r.0).collect();
            jac.register_block(&rows, &inst.cols);
        }
    }

    fn update_ids(&mut self, pattern: &SparsityPattern) {
        for inst in &mut self.instances {
            for (c, &col) in inst.cols.iter().enumerate() {
                for (r, &(row, _)) in inst.rows.iter().enumerate() {
                    inst.slots[c][r] = pattern.slot(row, col);
                }
            }
        }
    }

    fn update_for_new_environmental_state(&mut self, env: &EnvironmentalState) {
        match &self.rate {
            CondensedRate::Arrhenius(a) => {
                self.k_forward = a.rate_constant(env.temperature, env.pressure);
                self.k_reverse = 0.0;
            }
            CondensedRate::Reversible { a, c, k_reverse } => {
                self.k_forward = aqueous_equilibrium_constant(*a, *c, env.temperature) * k_reverse;
                self.k_reverse = *k_reverse;
            }
        }
    }

    fn calculate_derivative_contribution(&self, ctx: &EvalContext<'_>, forcing: &mut [f64]) {
        let y = ctx.state;
        for inst in &self.instances {
            let Some(w) = self.water_factor(inst, y) else {
                continue;
            };
            let (net, _, _) = self.net_rate(inst, y, w);
            for &(row, c) in &inst.rows {
                forcing[row] += c * net;
            }
        }
    }

    fn calculate_jacobian_contribution(&self, ctx: &EvalContext<'_>, jac: &mut CscMatrix) {
        let y = ctx.state;
        for inst in &self.instances {
            let Some(w) = self.water_factor(inst, y) else {
                continue;
            };
            let sf = if self.molar {
                w.powi(1 - inst.fwd.order)
            } else {
                1.0
            };
            let sr = if self.molar {
                w.powi(1 - inst.rev.order)
            } else {
                1.0
            };
            let nf = inst.fwd.species.len();
            let nr = inst.rev.species.len();
            let mut dnet = Vec::with_capacity(inst.cols.len());
            for j in 0..nf {
                dnet.push(self.k_forward * sf * inst.fwd.partial(y, j));
            }
            for j in 0..nr {
                dnet.push(-self.k_reverse * sr * inst.rev.partial(y, j));
            }
            if inst.water.is_some() {
                let (_, rf, rr) = self.net_rate(inst, y, w);
                dnet.push(
                    ((1 - inst.fwd.order) as f64 * rf - (1 - inst.rev.order) as f64 * rr) / w,
                );
            }
            for (c, d) in dnet.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (r, &(_, coef)) in inst.rows.iter().enumerate() {
                    add_opt(jac, inst.slots[c][r], coef * d);
                }
            }
        }
    }
}
