"""
Pydantic models for every record that crosses a file or HTTP boundary:
risk specifications, experiment configuration, bound parameters, result rows.
"""
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backend.config import MASTER_SEED, OUT_DIR


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --- risk specifications ----------------------------------------------------

class MeanRisk(StrictModel):
    kind: Literal["mean"] = "mean"


class CVaRRisk(StrictModel):
    kind: Literal["cvar"] = "cvar"
    alpha: float = Field(gt=0.0, le=1.0)


class EnvelopeTerm(StrictModel):
    """
    One linear term of an envelope constraint.

    var   -- "xi" (the reweighting density) or "h" (free dual variables, one per atom)
    at    -- "self": the variable at the row's own atom (per-atom rows only);
             "sum": sum over all atoms, weighted by the atom probability when
             `weighted` is set (so a weighted sum is an expectation under m)
    """
    var: Literal["xi", "h"]
    coef: float
    at: Literal["self", "sum"] = "self"
    weighted: bool = True


class EnvelopeConstraint(StrictModel):
    sense: Literal["eq", "le"]
    terms: List[EnvelopeTerm]
    rhs: float = 0.0
    per_atom: bool = True

    @model_validator(mode="after")
    def _check_terms(self):
        if not self.terms:
            raise ValueError("constraint needs at least one term")
        if not self.per_atom and any(t.at == "self" for t in self.terms):
            raise ValueError("a single (non per-atom) row can only use 'sum' terms")
        return self


class EnvelopeRisk(StrictModel):
    """
    Polyhedral risk envelope over one weight per support atom. The weights are
    always nonnegative; `normalized` adds the probability-weighted mean-one row.
    """
    kind: Literal["envelope"] = "envelope"
    normalized: bool = True
    dual: bool = False
    constraints: List[EnvelopeConstraint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_dual(self):
        uses_h = any(t.var == "h" for c in self.constraints for t in c.terms)
        if uses_h and not self.dual:
            raise ValueError("constraints reference 'h' but dual variables are disabled")
        return self


RiskSpec = Annotated[Union[MeanRisk, CVaRRisk, EnvelopeRisk], Field(discriminator="kind")]
InnerRiskSpec = RiskSpec
OuterRiskSpec = RiskSpec


class RiskPair(StrictModel):
    inner: RiskSpec = MeanRisk()
    outer: RiskSpec = MeanRisk()


# --- experiment configuration -----------------------------------------------

class EnvConfig(StrictModel):
    preset: Literal["coin_toss", "inventory"] = "coin_toss"
    p_head: Optional[float] = Field(None, gt=0.0, lt=1.0)
    n: Optional[int] = Field(None, ge=1)
    k: Optional[float] = None
    h: Optional[float] = None
    p: Optional[float] = None
    tilt: Optional[float] = None
    gamma: Optional[float] = Field(None, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_preset_fields(self):
        coin_only = {"p_head": self.p_head}
        inv_only = {"n": self.n, "k": self.k, "h": self.h, "p": self.p, "tilt": self.tilt}
        if self.preset == "coin_toss":
            extra = [name for name, v in inv_only.items() if v is not None]
        else:
            extra = [name for name, v in coin_only.items() if v is not None]
        if extra:
            raise ValueError(f"fields {extra} do not apply to preset '{self.preset}'")
        return self


class PriorEnvOverrides(StrictModel):
    p_head: Optional[float] = Field(None, gt=0.0, lt=1.0)
    tilt: Optional[float] = None


class PriorConfig(StrictModel):
    kind: Literal["uniform", "informative"] = "uniform"
    mass: float = Field(1.0, gt=0.0)
    env: Optional[PriorEnvOverrides] = None


class EpsilonSchedule(StrictModel):
    start: float = Field(0.3, ge=0.0, le=1.0)
    decay: float = Field(0.9, gt=0.0, le=1.0)
    floor: float = Field(0.05, ge=0.001, le=1.0)

    def at(self, stage: int) -> float:
        """Exploration rate for 1-based stage u."""
        return max(self.floor, self.start * self.decay ** (stage - 1))


class TrainingSection(StrictModel):
    stages: int = Field(20, ge=0)
    delta: int = Field(100, ge=1)
    scheduler: Literal["fixed", "sweep"] = "fixed"
    theta: float = Field(0.01, gt=0.0)
    mc_samples: int = Field(200, ge=1)
    epsilon: EpsilonSchedule = EpsilonSchedule()
    seed: int = MASTER_SEED
    initial_distribution: Optional[List[float]] = None
    prior: PriorConfig = PriorConfig()

    @field_validator("initial_distribution")
    @classmethod
    def _check_mu0(cls, value):
        if value is None:
            return value
        if any(x < 0 for x in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError("initial distribution must be a probability vector")
        return value


class EvalSection(StrictModel):
    grid: Optional[Dict[str, List[float]]] = None

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value):
        if value is None:
            return value
        if len(value) != 1 or next(iter(value)) not in ("p_head", "tilt"):
            raise ValueError("grid must be exactly one of {'p_head': [...]} or {'tilt': [...]}")
        if not next(iter(value.values())):
            raise ValueError("grid must list at least one deployment")
        return value


class ExperimentConfig(StrictModel):
    env: EnvConfig = EnvConfig()
    risk: RiskPair = RiskPair()
    training: TrainingSection = TrainingSection()
    eval: EvalSection = EvalSection()
    runs: int = Field(50, ge=1)
    out: str = OUT_DIR
    baselines: List[Literal["q_learning"]] = Field(default_factory=list)


# --- results ----------------------------------------------------------------

METRICS = ("steps_seen", "iterations", "oracle_value", "worst_deploy_value", "wall_ms")
CSV_COLUMNS = ("run", "stage") + METRICS


class ResultRow(StrictModel):
    run: int
    stage: int
    metric: str
    value: float

    @field_validator("metric")
    @classmethod
    def _known_metric(cls, value):
        if value not in METRICS:
            raise ValueError(f"unknown metric '{value}'")
        return value


# --- complexity bounds ------------------------------------------------------

class BoundParams(StrictModel):
    c_bar: float = Field(1.0, gt=0.0)
    gamma: float = Field(0.9, gt=0.0, lt=1.0)
    theta: float = Field(0.1, gt=0.0)
    alpha1: float = Field(1.0, gt=0.0, le=1.0)
    alpha2: float = Field(1.0, gt=0.0, le=1.0)
    n_states: int = Field(2, ge=1)
    n_actions: int = Field(2, ge=1)
    a_bar0: float = Field(1.0, gt=0.0)
    o_alpha: float = Field(1.0, gt=0.0)
    mu_min: float = Field(0.01, gt=0.0, le=1.0)
    t0: float = Field(0.0, ge=0.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    xi: float = Field(1.0, gt=0.0)
    eta: float = Field(1.0, gt=0.0)
    delta_total: float = Field(0.0, ge=0.0)
    sweep_index: int = Field(0, ge=0)
    o0: float = Field(1.0, gt=0.0)


# --- HTTP request bodies ----------------------------------------------------

class SolveRequest(StrictModel):
    env: EnvConfig = EnvConfig()
    inner: RiskSpec = MeanRisk()
    theta: float = Field(1e-6, gt=0.0)


class EvaluateRequest(StrictModel):
    env: EnvConfig = EnvConfig()
    actions: List[int]
    inner: RiskSpec = MeanRisk()
    theta: float = Field(1e-6, gt=0.0)
    grid: Dict[str, List[float]]
