"""Scenario files: parsing and validation, experiment dispatch, CSV/JSON artifacts, plot scripts.

A scenario is one JSON object with four sections::

    {"name": "...", "model": {"type": ...}, "grid": {...}, "scheme": {...},
     "experiment": {"type": ..., knobs}}

Validation collects every problem before failing.  Runs are deterministic: the
CSV files of a scenario depend only on its normalized config.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harris
from .errors import FloquetHarrisError
from .floquet import PropagatorProvider, convergence_rate, floquet_family, normalized_profile
from .growth_fragmentation import (
    FragmentationDistribution,
    GFModel,
    PeriodicCoefficient,
    doeblin_certificate_gf,
    gabriel_bounds,
    lyapunov_pair_gf,
    perron_floquet,
)
from .measure_space import DiscreteFunction, DiscreteMeasure, SpaceGrid, WeightPair, weighted_tv_norm
from .propagator import Method, Propagator, StepScheme, compose
from .selection_mutation import FitnessField, MutationKernel, SMModel, lyapunov_pair_sm

REQUIRED = object()
TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    """All validation problems of one scenario, one per line."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# ---------------------------------------------------------------------------
# schema


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _interval(x):
    return isinstance(x, list) and len(x) == 2 and all(_num(v) for v in x) and x[0] < x[1]


def _num_list(x):
    return isinstance(x, list) and len(x) > 0 and all(_num(v) for v in x)


# field -> (validator, description, default)
FLOAT = (_num, "a finite number")
POS = (lambda x: _num(x) and x > 0, "a positive number")
NONNEG = (lambda x: _num(x) and x >= 0, "a nonnegative number")
INT_POS = (lambda x: _int(x) and x > 0, "a positive integer")
INTERVAL = (_interval, "a pair [lo, hi] with lo < hi")
BOOL = (lambda x: isinstance(x, bool), "true or false")


def _choice(*options):
    return (lambda x: x in options, "one of " + ", ".join(map(repr, options)))


def _opt(rule):
    check, what = rule
    return (lambda x: x is None or check(x), what + " or null")


COEF_SCHEMA = {"mean": (*FLOAT, REQUIRED), "sin_amp": (*FLOAT, 0.0), "sin_phase": (*FLOAT, 0.0)}

MODEL_SCHEMAS = {
    "growth_fragmentation": {
        "period": (*POS, 1.0),
        "g0": ("coef", None, REQUIRED),
        "g1": ("coef", None, {"mean": 0.0}),
        "b0": ("coef", None, {"mean": 0.0}),
        "b1": ("coef", None, REQUIRED),
        "kappa": ("section", {
            "kind": (*_choice("uniform_binary", "floor_plus_bump"), "uniform_binary"),
            "kappa_floor": (*POS, 1.0),
        }, {}),
        "alpha_weight": (*POS, 2.0),
        "c_floor": (*NONNEG, 0.0),
    },
    "selection_mutation": {
        "fitness": ("section", {
            "kind": (*_choice("sqrt_shift", "power_confine"), "power_confine"),
            "T": (*POS, 1.0),
            "A0": (*FLOAT, 0.0),
            "A1": (*POS, 1.0),
            "p": (*POS, 2.0),
            "phi": (*FLOAT, 0.0),
        }, REQUIRED),
        "kernel": ("optional_section", {
            "kind": (*_choice("uniform_window", "decaying_uniform"), "uniform_window"),
            "eps": (*POS, 1.0),
            "q": (*POS, 1.0),
            "kappa_lo": (*POS, 0.5),
            "kappa_hi": (*NONNEG, 0.5),
        }, {}),
    },
    "sin_exact": {"T": (*POS, TWO_PI)},
}

GRID_SCHEMA = {
    "x_min": (*_opt(FLOAT), None),
    "x_max": (*_opt(FLOAT), None),
    "n_nodes": (lambda x: _int(x) and x >= 2, "an integer >= 2", REQUIRED),
}

SCHEME_SCHEMA = {
    "method": (*_choice("euler", "heun"), "euler"),
    "dt_max": (*POS, 0.01),
    "cfl_safety": (lambda x: _num(x) and 0 < x <= 1, "a number in (0, 1]", 0.9),
}

EXPERIMENT_SCHEMAS = {
    "floquet": {
        "s0": (*FLOAT, 0.0), "n_samples": (lambda x: _int(x) and x >= 2, "an integer >= 2", 9),
        "tol": (*POS, 1e-10), "n_monodromy": (*INT_POS, 2000), "agreement_tol": (*POS, 5e-3),
        "expected_lambda": (*_opt(FLOAT), None), "expected_tol": (*POS, 1e-8),
    },
    "harris_A": {
        "k": (*INT_POS, 1), "s0": (*FLOAT, 0.0), "K": (*INTERVAL, REQUIRED),
        "nu": (*INTERVAL, REQUIRED), "n_max": (*INT_POS, 10), "x0": (*_opt(POS), None),
    },
    "harris_B": {
        "s0": (*FLOAT, 0.0), "tau": (*_opt(POS), None), "n_max": (*INT_POS, 8),
        "time_samples": (*_opt((_num_list, "a non-empty list of numbers")), None),
        "K": (*INTERVAL, REQUIRED), "nu": (*_opt(INTERVAL), None), "x0": (*_opt(POS), None),
        "b5": (*BOOL, True), "b5_points": (*INT_POS, 3), "n_quad": (*INT_POS, 16),
    },
    "convergence": {
        "s0": (*FLOAT, 0.0), "horizon_periods": (*INT_POS, 15),
        "n_samples": (lambda x: _int(x) and x >= 2, "an integer >= 2", 9),
        "n_checkpoints": (*INT_POS, 15), "tol": (*POS, 1e-10),
        "diracs": (lambda x: isinstance(x, list) and len(x) == 2 and all(_num(v) for v in x),
                   "a list of two positions", REQUIRED),
        "profile_tol": (*POS, 1e-4), "floor": (*POS, 1e-14),
        "resolution_factor": (*POS, 100.0),
    },
    "gabriel": {
        "n_s": (lambda x: _int(x) and x >= 2, "an integer >= 2", 17),
        "n_monodromy": (*INT_POS, 4000), "power_tol": (*POS, 1e-10),
        "collapse_tol": (*POS, 5e-3),
    },
    "counterexample_b4": {
        "k_max": (*INT_POS, 8), "n_max": (*INT_POS, 8), "n_s": (*INT_POS, 8),
        "ratio_tol": (*POS, 1e-10),
    },
    "doeblin": {
        "s": (*FLOAT, 0.0), "t": (*POS, 0.5), "R": (*POS, 2.0),
        "a1": (lambda x: _num(x) and 0 < x < 1, "a number in (0, 1)", 0.5),
    },
}

COMPATIBLE = {
    "floquet": ("growth_fragmentation", "selection_mutation"),
    "harris_A": ("growth_fragmentation", "selection_mutation", "sin_exact"),
    "harris_B": ("selection_mutation", "sin_exact"),
    "convergence": ("growth_fragmentation", "selection_mutation"),
    "gabriel": ("growth_fragmentation",),
    "counterexample_b4": ("sin_exact",),
    "doeblin": ("growth_fragmentation",),
}

TOP_KEYS = ("name", "model", "grid", "scheme", "experiment")


class _Validator:
    def __init__(self, text: str | None):
        self.text = text or ""
        self.problems: list[str] = []

    def line_of(self, path: tuple) -> int | None:
        pos = 0
        for key in path:
            if isinstance(key, int):
                continue
            m = re.compile(r'"' + re.escape(str(key)) + r'"\s*:').search(self.text, pos)
            if m is None:
                return None
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1 if path else None

    def error(self, path: tuple, msg: str) -> None:
        where = ".".join(str(p) for p in path) or "<root>"
        line = self.line_of(path)
        prefix = f"line {line}: " if line else ""
        self.problems.append(f"{prefix}{where}: {msg}")

    def section(self, data, schema: dict, path: tuple) -> dict:
        if not isinstance(data, dict):
            self.error(path, "must be an object")
            return {}
        out = {}
        for key in sorted(set(data) - set(schema) - {"type"}):
            self.error(path + (key,), f"unknown key {key!r}")
        for key, (check, what, default) in schema.items():
            here = path + (key,)
            if key not in data:
                if default is REQUIRED:
                    self.error(here, "missing required field")
                    continue
                value = copy.deepcopy(default)
                if check in ("coef", "section", "optional_section") and value is not None:
                    value = self._nested(check, what, value, here)
                out[key] = value
                continue
            value = data[key]
            if check in ("coef", "section", "optional_section"):
                out[key] = self._nested(check, what, value, here)
            elif check(value):
                out[key] = value
            else:
                self.error(here, f"must be {what}, got {value!r}")
        return out

    def _nested(self, kind, schema, value, path):
        if kind == "optional_section" and value is None:
            return None
        return self.section(value, COEF_SCHEMA if kind == "coef" else schema, path)


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model: dict
    grid: dict
    scheme: dict
    experiment: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "model": copy.deepcopy(self.model), "grid": dict(self.grid),
                "scheme": dict(self.scheme), "experiment": copy.deepcopy(self.experiment)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @property
    def model_type(self) -> str:
        return self.model["type"]

    @property
    def experiment_type(self) -> str:
        return self.experiment["type"]


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file; raises ConfigError listing every problem."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}: invalid JSON: {exc.msg}"]) from None
    return parse_dict(data, text)


def parse_dict(data, text: str | None = None) -> ScenarioConfig:
    v = _Validator(text)
    if not isinstance(data, dict):
        raise ConfigError(["<root>: scenario must be a JSON object"])
    for key in sorted(set(data) - set(TOP_KEYS)):
        v.error((key,), f"unknown key {key!r}")
    name = data.get("name", "scenario")
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        v.error(("name",), "must be a string of letters, digits, '_', '.', '-'")
        name = "scenario"

    model_raw = data.get("model")
    model: dict = {}
    mtype = None
    if not isinstance(model_raw, dict):
        v.error(("model",), "missing or not an object")
    else:
        mtype = model_raw.get("type")
        if mtype not in MODEL_SCHEMAS:
            v.error(("model", "type"), f"must be one of {sorted(MODEL_SCHEMAS)}, got {mtype!r}")
            mtype = None
        else:
            model = {"type": mtype, **v.section(model_raw, MODEL_SCHEMAS[mtype], ("model",))}

    grid = v.section(data.get("grid", {}), GRID_SCHEMA, ("grid",))
    scheme = v.section(data.get("scheme", {}), SCHEME_SCHEMA, ("scheme",))

    exp_raw = data.get("experiment")
    experiment: dict = {}
    etype = None
    if not isinstance(exp_raw, dict):
        v.error(("experiment",), "missing or not an object")
    else:
        etype = exp_raw.get("type")
        if etype not in EXPERIMENT_SCHEMAS:
            v.error(("experiment", "type"),
                    f"must be one of {sorted(EXPERIMENT_SCHEMAS)}, got {etype!r}")
            etype = None
        else:
            experiment = {"type": etype,
                          **v.section(exp_raw, EXPERIMENT_SCHEMAS[etype], ("experiment",))}

    if mtype and etype and mtype not in COMPATIBLE[etype]:
        v.error(("experiment", "type"), f"experiment {etype!r} does not apply to model {mtype!r}")
    if mtype and not v.problems:
        _semantic_checks(v, model, grid, experiment)
    if v.problems:
        raise ConfigError(v.problems)
    return ScenarioConfig(name, model, grid, scheme, experiment)


def _semantic_checks(v: _Validator, model: dict, grid: dict, experiment: dict) -> None:
    """Re-run the model types' own constraints so failures surface at parse time."""
    mtype = model["type"]
    if mtype == "sin_exact":
        if not math.isclose(model["T"], TWO_PI, rel_tol=1e-12):
            v.error(("model", "T"), f"the sine model has period 2 pi, got {model['T']!r}")
        for key in ("x_min", "x_max"):
            if grid.get(key) is not None:
                v.error(("grid", key), "the sine model fixes its periodic grid; give n_nodes only")
        return
    if grid.get("x_min") is None or grid.get("x_max") is None:
        v.error(("grid",), "x_min and x_max are required for this model")
        return
    if not grid["x_min"] < grid["x_max"]:
        v.error(("grid", "x_max"), "x_max must exceed x_min")
        return
    try:
        built = build_model(model, grid, enforce=False)
    except (ValueError, FloquetHarrisError) as exc:
        v.error(("model",), str(exc))
        return
    if mtype == "growth_fragmentation":
        for msg in built.floor_violations():
            key = msg.split()[0]
            v.error(("model", key), msg)
    lo, hi = grid["x_min"], grid["x_max"]
    for key in ("K", "nu"):
        iv = experiment.get(key)
        if iv is not None and not (lo <= iv[0] and iv[1] <= hi):
            v.error(("experiment", key), f"interval {iv} leaves the grid [{lo}, {hi}]")
    for x in experiment.get("diracs", []) or []:
        if not lo <= x <= hi:
            v.error(("experiment", "diracs"), f"position {x} is off the grid [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# construction


def build_grid(model: dict, grid: dict) -> SpaceGrid:
    if model["type"] == "sin_exact":
        return harris.sin_grid(grid["n_nodes"])
    return SpaceGrid(grid["x_min"], grid["x_max"], grid["n_nodes"])


def build_model(model: dict, grid: dict, enforce: bool = True):
    g = build_grid(model, grid)
    mtype = model["type"]
    if mtype == "growth_fragmentation":
        T = model["period"]
        coef = {k: PeriodicCoefficient(period=T, **model[k]) for k in ("g0", "g1", "b0", "b1")}
        kappa = FragmentationDistribution(**model["kappa"])
        return GFModel(kappa=kappa, grid=g, alpha_weight=model["alpha_weight"],
                       c_floor=model["c_floor"], enforce_floors=enforce, **coef)
    if mtype == "selection_mutation":
        kernel = None if model["kernel"] is None else MutationKernel(**model["kernel"])
        return SMModel(FitnessField(**model["fitness"]), kernel, g)
    return harris.SinProvider(g)


def build_scheme(scheme: dict) -> StepScheme:
    return StepScheme(dt_max=scheme["dt_max"], method=Method(scheme["method"]),
                      cfl_safety=scheme["cfl_safety"])


def _provider(cfg: ScenarioConfig):
    model = build_model(cfg.model, cfg.grid)
    if cfg.model_type == "sin_exact":
        return model, model
    return model, PropagatorProvider(model, build_scheme(cfg.scheme))


def _pair(cfg: ScenarioConfig, model, s0: float, x0) -> WeightPair:
    if cfg.model_type == "growth_fragmentation":
        return lyapunov_pair_gf(model, s0)
    if cfg.model_type == "selection_mutation":
        return lyapunov_pair_sm(model, x0 if x0 is not None else 0.5 * model.L,
                                build_scheme(cfg.scheme))
    one = DiscreteFunction.constant(model.grid, 1.0)
    return WeightPair(one, one)


def _weight(cfg: ScenarioConfig, model) -> DiscreteFunction:
    if cfg.model_type == "growth_fragmentation":
        return model.weight_V()
    return DiscreteFunction.constant(model.grid, 1.0)


# ---------------------------------------------------------------------------
# artifacts


def _fmt(v) -> str:
    return format(float(v), ".15g")


def write_csv(path: Path, header, rows) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


@dataclass
class RunReport:
    config: dict
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    directory: str = ""

    def add(self, criterion: str, value, passed: bool) -> None:
        self.verdicts.append({"criterion": criterion, "value": harris._jsonable(value),
                              "pass": bool(passed)})

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v["pass"] for v in self.verdicts)

    def to_dict(self) -> dict:
        return harris._jsonable({
            "config": self.config, "wall_time": self.wall_time, "outputs": self.outputs,
            "verdicts": self.verdicts, "details": self.details, "pass": self.passed,
        })

    def summary(self) -> str:
        width = max((len(v["criterion"]) for v in self.verdicts), default=9)
        lines = [f"{v['criterion']:<{width}}  {'pass' if v['pass'] else 'FAIL':<4}  {v['value']}"
                 for v in self.verdicts]
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)


class _Run:
    def __init__(self, cfg: ScenarioConfig, out_dir: Path):
        self.cfg = cfg
        self.dir = out_dir
        self.report = RunReport(cfg.to_dict(), directory=str(out_dir))

    def csv(self, name: str, header, rows) -> None:
        path = write_csv(self.dir / f"{name}.csv", header, rows)
        self.report.outputs[name] = path.name

    def harris(self, rep: harris.HarrisReport, csv_name: str) -> None:
        self.report.details[csv_name] = rep.to_dict()
        self.report.details["harris_table"] = rep.table()
        for c in rep.checks:
            self.report.add(f"{c.name} pass", {"margin": c.margin, **c.constants}, c.passed)


def output_dir(cfg: ScenarioConfig, root) -> Path:
    return Path(root) / f"{cfg.name}-{cfg.digest()}"


def run(cfg: ScenarioConfig, out_root="runs") -> RunReport:
    """Run the scenario's experiment, write its artifacts and report.json, return the report."""
    out = output_dir(cfg, out_root)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    r = _Run(cfg, out)
    r.report.outputs["config"] = "config.json"
    start = time.perf_counter()
    EXPERIMENTS[cfg.experiment_type](r)
    r.report.wall_time = time.perf_counter() - start
    r.report.outputs["report"] = "report.json"
    (out / "report.json").write_text(json.dumps(r.report.to_dict(), indent=2, sort_keys=True) + "\n")
    return r.report


# ---------------------------------------------------------------------------
# experiments


def _exp_floquet(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model, provider = _provider(cfg)
    V = _weight(cfg, model)
    fam, eig = floquet_family(provider, e["s0"], e["n_samples"], V, tol=e["tol"])
    lam_power = fam.lambda_F
    r.report.add("power iteration residual", eig.residual, eig.residual <= e["tol"])
    dh, dg = fam.endpoint_mismatch()
    r.report.add("h endpoint mismatch", dh, dh <= 1e-8)
    r.report.add("gamma endpoint mismatch", dg, dg <= 1e-6)
    lam_ref = lam_power
    if cfg.model_type == "growth_fragmentation":
        lam_mono = perron_floquet(model, e["n_monodromy"]).lambda_F
        gap = abs(lam_mono - lam_power)
        r.csv("lambda", ("lambda_F_monodromy", "lambda_F_powerit", "gap"), [(lam_mono, lam_power, gap)])
        r.report.add("lambda_F monodromy vs power iteration", gap, gap <= e["agreement_tol"])
        lam_ref = lam_mono
    else:
        r.csv("lambda", ("lambda_F_powerit", "Lambda", "residual"), [(lam_power, eig.Lambda, eig.residual)])
    if e["expected_lambda"] is not None:
        err = abs(lam_ref - e["expected_lambda"])
        r.report.add("lambda_F vs expected", lam_ref, err <= e["expected_tol"])
    x = model.grid.nodes
    header = ["x"] + [f"h_{k}" for k in range(len(fam.times))]
    r.csv("h_family", header, zip(x, *(h.values for h in fam.h_samples)))
    header = ["x"] + [f"gamma_{k}" for k in range(len(fam.times))]
    r.csv("gamma_family", header, zip(x, *(g.masses for g in fam.gamma_samples)))
    r.csv("sample_times", ("k", "t"), enumerate(fam.times))
    r.report.details["lambda_F"] = lam_ref
    r.report.details["provider_clamps"] = getattr(provider, "clamps", 0)


def _k_period_map(provider, s0: float, T: float, k: int) -> Propagator:
    P = provider.get(s0, s0 + T)
    one = P
    for j in range(1, k):
        P = compose(P, provider.get(s0 + j * T, s0 + (j + 1) * T))
    return P if k > 1 else one


def _exp_harris_A(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model, provider = _provider(cfg)
    T = provider.period
    grid = model.grid
    pair = _pair(cfg, model, e["s0"], e["x0"])
    K = harris.SmallSet.from_interval(grid, *e["K"])
    nu = harris.MinorizationMeasure.lebesgue_on(grid, *e["nu"])
    Pk = _k_period_map(provider, e["s0"], T, e["k"])
    rep = harris.check_assumption_A(Pk, pair, K, nu, e["n_max"], P_period=Pk)
    r.harris(rep, "harris_A")
    a4 = rep.get("A4")
    r.csv("a4_ratios", ("n", "ratio"), enumerate(a4.notes["ratios"], start=1))
    if cfg.model_type == "growth_fragmentation":
        lam = perron_floquet(model).lambda_F
        r.report.details["beta_candidate"] = math.exp(lam * e["k"] * T)


def _exp_harris_B(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model, provider = _provider(cfg)
    T = provider.period
    grid = model.grid
    tau = e["tau"] if e["tau"] is not None else T
    samples = e["time_samples"]
    if samples is None:
        samples = (e["s0"] + T * np.arange(4) / 4).tolist()
    pair = _pair(cfg, model, e["s0"], e["x0"])
    K = harris.SmallSet.from_interval(grid, *e["K"])
    nu = (harris.MinorizationMeasure.uniform_on(K) if e["nu"] is None
          else harris.MinorizationMeasure.lebesgue_on(grid, *e["nu"]))
    sigma = None
    if e["b5"] and cfg.model_type == "selection_mutation":
        sigma = harris.sm_sigma_builder(model, e["s0"], tau)
    rep = harris.check_B_suite(provider, pair, K, nu, e["s0"], tau, e["n_max"], samples,
                               sigma=sigma, b5_points=e["b5_points"], n_quad=e["n_quad"])
    r.harris(rep, "harris_B")
    b4 = rep.get("B4")
    r.csv("b4_trend", ("n", "max_log_ratio"), enumerate(b4.notes["max_log_ratio_by_n"], start=1))


def _exp_convergence(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model, provider = _provider(cfg)
    T = provider.period
    V = _weight(cfg, model)
    fam, eig = floquet_family(provider, e["s0"], e["n_samples"], V, tol=e["tol"])
    horizon = e["horizon_periods"] * T
    grid = model.grid
    # distances below the accuracy of the eigen-pair measure that error, not the decay
    floor = max(e["floor"], e["resolution_factor"] * max(eig.residual, eig.gamma_residual))
    r.report.details["distance_floor"] = floor
    finals = []
    for idx, x in enumerate(e["diracs"]):
        mu = DiscreteMeasure.dirac(grid, int(round((x - grid.x_min) / grid.dx)))
        res = convergence_rate(provider, fam, mu, e["s0"], horizon, e["n_checkpoints"],
                               floor=floor)
        tag = "ab"[idx]
        r.csv(f"decay_{tag}", ("t", "distance", "rescaled"), res.csv_rows())
        r.report.details[f"fit_{tag}"] = {"C_hat": res.C_hat, "omega_hat": res.omega_hat,
                                          "fit_window": list(res.fit_window),
                                          "converged_flag": res.converged_flag}
        r.report.add(f"omega_hat > 0 (dirac {tag})", res.omega_hat, res.omega_hat > 0)
        start = int(math.floor(0.2 * e["n_checkpoints"]))
        tail = res.distances[start:]
        live = tail[tail >= floor]
        mono = bool(np.all(np.diff(live) < 0))
        r.report.add(f"post-transient distances decreasing (dirac {tag})", int(live.size), mono)
        finals.append(normalized_profile(res.final_profile, fam.h_at(e["s0"] + horizon)))
    gap = weighted_tv_norm(DiscreteMeasure(grid, finals[0].masses - finals[1].masses), V)
    r.report.add("normalized profiles agree", gap, gap <= e["profile_tol"])
    r.csv("profiles", ("x", "profile_a", "profile_b"),
          zip(grid.nodes, finals[0].masses, finals[1].masses))
    r.report.details["lambda_F"] = fam.lambda_F


def _exp_gabriel(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model = build_model(cfg.model, cfg.grid)
    res = gabriel_bounds(model, build_scheme(cfg.scheme), e["n_s"], e["n_monodromy"], e["power_tol"])
    lower = res.lambda_F - res.lam_bar_g0
    upper = res.lam_g0_bar - res.lambda_F
    r.report.add("lower comparison margin", lower, lower >= -res.tol)
    r.report.add("upper comparison margin", upper, upper >= -res.tol)
    if model.g0.is_constant:
        spread = max(res.lam_bar_g0, res.lam_g0_bar, res.lambda_F) - min(
            res.lam_bar_g0, res.lam_g0_bar, res.lambda_F)
        r.report.add("constant growth collapses the bounds", spread, spread <= e["collapse_tol"])
    r.csv("gabriel", ("lam_bar_g0", "lambda_F", "lam_g0_bar", "allowance"),
          [(res.lam_bar_g0, res.lambda_F, res.lam_g0_bar, res.allowance)])
    r.csv("frozen_eigenvalues", ("s", "lambda_frozen"), res.samples)


def _exp_counterexample(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    provider = build_model(cfg.model, cfg.grid)
    grid = provider.grid
    T = harris.SIN_PERIOD
    x = grid.nodes
    one = np.ones(grid.n_nodes)
    rows, worst = [], 0.0
    for k in range(1, e["k_max"] + 1):
        u = 0.5 * T * k / e["k_max"]
        a = _compose_sin(grid, 0.0, k) @ one
        b = _compose_sin(grid, u, k) @ one
        exact = harris.sin_b4_ratio(x, 0.0, u, k, T)
        err = float(np.max(np.abs((a / b) / exact - 1.0)))
        worst = max(worst, err)
        rows.append((k, u, float(np.max(np.log(exact))), err))
    r.csv("ratio_check", ("k", "u", "max_log_ratio", "rel_error"), rows)
    r.report.add("closed-form ratio matches composition", worst, worst <= e["ratio_tol"])
    pair = WeightPair(DiscreteFunction(grid, one), DiscreteFunction(grid, one))
    K = harris.SmallSet(grid, 0, grid.n_nodes - 1)
    nu = harris.MinorizationMeasure.uniform_on(K)
    samples = (T * np.arange(e["n_s"]) / e["n_s"]).tolist()
    b4 = harris.check_B4(provider, pair, K, 0.0, T, e["n_max"], samples)
    a4 = harris.check_A4(provider.get(0.0, T), pair, K, nu, e["n_max"])
    r.report.add("B4 pass = false", {"log_slope": b4.notes["log_slope"], "C_B4": b4.constants["C_B4"]},
                 (not b4.passed) and b4.notes["log_slope"] > 0)
    r.report.add("A4 pass = false", {"log_slope": a4.notes["log_slope"], "d_A4": a4.constants["d_A4"]},
                 not a4.passed)
    r.csv("b4_trend", ("n", "max_log_ratio"), enumerate(b4.notes["max_log_ratio_by_n"], start=1))
    r.report.details["B4"] = b4.to_dict()
    r.report.details["A4"] = a4.to_dict()


def _compose_sin(grid, s: float, k: int) -> np.ndarray:
    T = harris.SIN_PERIOD
    M = np.eye(grid.n_nodes)
    for j in range(k):
        M = M @ harris.sin_propagator(grid, s + j * T, s + (j + 1) * T).matrix
    return M


def _exp_doeblin(r: _Run) -> None:
    cfg, e = r.cfg, r.cfg.experiment
    model = build_model(cfg.model, cfg.grid)
    cert = doeblin_certificate_gf(model, e["s"], e["t"], e["R"], build_scheme(cfg.scheme), e["a1"])
    r.report.add("Doeblin margin >= 0", cert.margin, cert.passed)
    r.report.add("c_st > 0", cert.c_st, cert.c_st > 0)
    r.csv("doeblin", ("c_st", "nu_lo", "nu_hi", "a2", "B", "c_beta", "tau_star", "margin",
                      "relative_margin"),
          [(cert.c_st, *cert.nu_support, cert.a2, cert.B, cert.c_beta, cert.tau_star,
            cert.margin, cert.relative_margin)])


EXPERIMENTS = {
    "floquet": _exp_floquet,
    "harris_A": _exp_harris_A,
    "harris_B": _exp_harris_B,
    "convergence": _exp_convergence,
    "gabriel": _exp_gabriel,
    "counterexample_b4": _exp_counterexample,
    "doeblin": _exp_doeblin,
}


# ---------------------------------------------------------------------------
# plot scripts


def _gp_header(title: str, png: str) -> str:
    return (f"set terminal pngcairo size 900,600\nset output '{png}'\n"
            f"set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\n")


def emit_plots(report_path) -> list[Path]:
    """Write gnuplot scripts next to a report's CSVs; nothing is executed."""
    report_path = Path(report_path)
    report = json.loads(report_path.read_text())
    base = report_path.parent
    outputs = {k: v for k, v in report.get("outputs", {}).items() if v.endswith(".csv")}
    for name, fname in outputs.items():
        if not (base / fname).exists():
            raise FileNotFoundError(f"report references missing CSV {fname}")
    scripts = []
    for tag in ("a", "b"):
        name = f"decay_{tag}"
        if name in outputs:
            fit = report.get("details", {}).get(f"fit_{tag}", {})
            C, w = fit.get("C_hat", 0.0), fit.get("omega_hat", 0.0)
            body = _gp_header(f"distance to the Floquet profile (dirac {tag})", f"{name}.png")
            body += "set logscale y\nset xlabel 't'\nset ylabel 'weighted TV distance'\n"
            if isinstance(C, (int, float)) and isinstance(w, (int, float)) and C > 0:
                body += (f"fit_line(t) = {C!r} * exp(-({w!r}) * t)\n"
                         f"plot '{outputs[name]}' using 1:2 with linespoints, "
                         f"fit_line(x) title 'fit' with lines\n")
            else:
                body += f"plot '{outputs[name]}' using 1:2 with linespoints\n"
            scripts.append(_write_script(base / f"{name}.gp", body))
    if "h_family" in outputs:
        n_cols = len((base / outputs["h_family"]).read_text().splitlines()[0].split(","))
        body = _gp_header("Floquet eigenfunctions h_t", "h_family.png")
        body += f"set xlabel 'x'\nplot for [i=2:{n_cols}] '{outputs['h_family']}' using 1:i with lines\n"
        scripts.append(_write_script(base / "h_family.gp", body))
    if "b4_trend" in outputs:
        body = _gp_header("ratio bound trend", "b4_trend.png")
        body += f"set xlabel 'n'\nset ylabel 'max log ratio'\nplot '{outputs['b4_trend']}' using 1:2 with linespoints\n"
        scripts.append(_write_script(base / "b4_trend.gp", body))
    if "profiles" in outputs:
        body = _gp_header("normalized profiles at the horizon", "profiles.png")
        body += f"set xlabel 'x'\nplot for [i=2:3] '{outputs['profiles']}' using 1:i with lines\n"
        scripts.append(_write_script(base / "profiles.gp", body))
    if not scripts:
        warnings.warn(f"no plottable series in {report_path}", stacklevel=2)
    return scripts


def _write_script(path: Path, body: str) -> Path:
    path.write_text(body)
    return path
