//! Run configuration read from JSON. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use tipscan_core::bifurcation::{
    default_c_grid, BifurcationError, BisectionOptions, HorizonPolicy, Model, ModelKind, SecondAxis, TippingSearch,
};
use tipscan_core::coeffs::{ProblemSpec, Rate};
use tipscan_core::hullscan::{default_s_grid, DEFAULT_BAND};
use tipscan_core::ivp::IvpParams;
use tipscan_core::pullback::HorizonParams;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tipping: Option<TippingSearch>,
    #[serde(default)]
    pub hull: HullConfig,
}

fn default_model() -> ModelKind {
    ModelKind::Rate
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub ivp: IvpParams,
    pub horizons: HorizonPolicy,
    pub bisection: BisectionOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    List { values: Vec<Rate> },
    Linear { start: f64, stop: f64, count: usize },
    Step { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Grid::List { values } => {
                if values.is_empty() {
                    return Err("grid list is empty".into());
                }
                Ok(values.iter().map(|r| r.as_f64()).collect())
            }
            Grid::Linear { start, stop, count } => {
                if *count == 0 || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(format!("bad linear grid {start}..{stop} x {count}"));
                }
                if *count == 1 {
                    return Ok(vec![*start]);
                }
                let n = (*count - 1) as f64;
                Ok((0..*count).map(|k| start + (stop - start) * k as f64 / n).collect())
            }
            Grid::Step { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(format!("bad step grid {start}..{stop} by {step}"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| start + step * k as f64).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Hold,
    Shift,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub c: Option<Grid>,
    pub second: Option<Grid>,
    pub second_axis: AxisKind,
    pub s: Option<Grid>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            c: None,
            second: None,
            second_axis: AxisKind::Hold,
            s: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HullConfig {
    pub c: Rate,
    pub band: f64,
    /// Horizons for the untransitioned pair; defaults to a 1000-unit launch.
    pub horizons: HorizonParams,
}

impl Default for HullConfig {
    fn default() -> Self {
        HullConfig {
            c: Rate::PosInf,
            band: DEFAULT_BAND,
            horizons: HorizonParams {
                t_match: 1.0,
                t_far: 1000.0,
                tol_gap: 1e-4,
                delta_tail: 0.1,
            },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills optional grids so the echoed config is complete.
    pub fn with_defaults(mut self) -> Self {
        if self.grids.c.is_none() {
            let values = default_c_grid(4, 5, 50.0).into_iter().map(Rate::Finite).collect();
            self.grids.c = Some(Grid::List { values });
        }
        if self.grids.second.is_none() {
            let v = match self.grids.second_axis {
                AxisKind::Hold => self.problem.transition.hold(),
                AxisKind::Shift => 0.0,
            };
            self.grids.second = Some(Grid::List {
                values: vec![Rate::Finite(v)],
            });
        }
        if self.grids.s.is_none() {
            self.grids.s = Some(Grid::Step {
                start: -40.0,
                stop: 40.0,
                step: 0.5,
            });
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        self.solver.ivp.validate().map_err(|e| e.to_string())?;
        self.solver.bisection.validate().map_err(|e| e.to_string())?;
        match &self.solver.horizons {
            HorizonPolicy::Fixed(hp) => hp.validate().map_err(|e| e.to_string())?,
            HorizonPolicy::Auto {
                delta_tail,
                settle,
                tol_gap,
            } => {
                if !(*delta_tail > 0.0 && *settle > 0.0 && *tol_gap > 0.0) {
                    return Err("auto horizons need positive delta_tail, settle and tol_gap".into());
                }
            }
        }
        self.hull.horizons.validate().map_err(|e| e.to_string())?;
        if !(self.hull.band >= 0.0) {
            return Err("hull band must be nonnegative".into());
        }
        for grid in [&self.grids.c, &self.grids.second, &self.grids.s].into_iter().flatten() {
            grid.values()?;
        }
        if self.model == ModelKind::Size && self.problem.transition.hold() != 0.0 {
            return Err("the size model requires hold = 0".into());
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        Model {
            kind: self.model,
            base: self.problem.transition.base().clone(),
            forcing: self.problem.forcing.clone(),
            offset: self.problem.offset,
        }
    }

    /// The problem the single-equation commands act on. For the size model
    /// the configured rate is the scale `c`.
    pub fn single_problem(&self) -> Result<ProblemSpec, BifurcationError> {
        match self.model {
            ModelKind::Rate => Ok(self.problem.clone()),
            ModelKind::Size => self
                .model()
                .problem(self.problem.transition.rate(), SecondAxis::Hold(0.0)),
        }
    }

    pub fn fixed_second(&self) -> SecondAxis {
        SecondAxis::Hold(self.problem.transition.hold())
    }

    pub fn c_grid(&self) -> Result<Vec<f64>, String> {
        match &self.grids.c {
            Some(g) => g.values(),
            None => Ok(default_c_grid(4, 5, 50.0)),
        }
    }

    pub fn second_grid(&self) -> Result<Vec<f64>, String> {
        match &self.grids.second {
            Some(g) => g.values(),
            None => Ok(vec![0.0]),
        }
    }

    pub fn s_grid(&self) -> Result<Vec<f64>, String> {
        match &self.grids.s {
            Some(g) => g.values(),
            None => Ok(default_s_grid()),
        }
    }

    pub fn second_axis(&self, value: f64) -> SecondAxis {
        match self.grids.second_axis {
            AxisKind::Hold => SecondAxis::Hold(value),
            AxisKind::Shift => SecondAxis::Shift(value),
        }
    }
}
