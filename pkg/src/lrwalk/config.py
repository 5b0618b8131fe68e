"""Experiment configuration: JSON schema, validation and model construction.

A config is a plain JSON object.  Angles may be numbers (radians) or strings
such as ``"pi/4"`` or ``"3*pi/2"``; they are resolved to radians only when a
model is built, so a config round-trips through JSON unchanged.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .operators import CoinParams, PhaseProfile, WalkModel
from .spectral import band_vector
from .state import LatticeState, make_delta_state, make_gaussian_state

__all__ = [
    "SCHEMA_VERSION",
    "KINDS",
    "ConfigError",
    "Diagnostic",
    "ExperimentConfig",
    "parse_angle",
    "validate",
    "build_model",
    "build_state",
    "sweep_rows",
    "minimal_config",
]

SCHEMA_VERSION = 1
KINDS = ("evolve", "spectrum", "assumption", "waveop", "weaklimit", "sweep")

DEFAULT_PARAMS = {
    "evolve": {"T": 1000},
    "spectrum": {"kgrid": 4096, "commutator_kgrid": 1024, "commutator_degree": 16},
    "assumption": {"radius": 10000},
    "waveop": {"checkpoints": [50, 100, 200, 400, 800], "direction": "+", "escape_radius": 0,
               "identity_trials": 20, "identity_T": 50, "seed": 0},
    "weaklimit": {"T_list": [250, 500, 1000, 2000], "kgrid": 4096,
                  "checkpoints": [200, 400, 800, 1600, 3200], "T_wave": None,
                  "R": 10, "T_avg": 2000, "xi_grid": [-5.0, 5.0, 21]},
    "sweep": {"base": "waveop", "grid": {}, "base_params": {}},
}

DEFAULT_TOLERANCES = {
    "evolve": {"norm": 1e-9},
    "spectrum": {"eigen": 1e-10, "arcs": 1e-10, "velocity_fd": 1e-6, "commutator": 1e-6},
    "assumption": {"kappa_drift": 0.01},
    "waveop": {"increment": 0.01, "identity": 1e-11},
    "weaklimit": {"kolmogorov": 0.05, "cf": 0.05, "increment": 0.01},
    "sweep": {},
}

_ANGLE = re.compile(r"^\s*([+-]?\d*(?:\.\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d+)?))?\s*$")


class ConfigError(ValueError):
    """Raised when a config fails validation; carries the diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def parse_angle(value) -> float:
    """Radians from a number or a string like ``"pi/4"``, ``"-3pi/2"``, ``"0.5*pi"``."""
    if isinstance(value, bool):
        raise ValueError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        s = value.strip().lower()
        try:
            return float(s)
        except ValueError:
            pass
        m = _ANGLE.match(s)
        if m:
            coef = m.group(1)
            if coef in (None, "", "+"):
                c = 1.0
            elif coef == "-":
                c = -1.0
            else:
                c = float(coef)
            d = float(m.group(2)) if m.group(2) else 1.0
            return c * math.pi / d
    raise ValueError(f"not an angle: {value!r}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_coin(coin: dict, out: list) -> None:
    if not isinstance(coin, dict):
        out.append(Diagnostic("model.coin", "must be an object"))
        return
    if coin.get("preset") is not None:
        if coin["preset"] != "hadamard":
            out.append(Diagnostic("model.coin.preset", f"unknown preset {coin['preset']!r}"))
        return
    a = coin.get("a")
    if not _is_num(a):
        out.append(Diagnostic("model.coin.a", "required number"))
        return
    if a == 0:
        out.append(Diagnostic("model.coin.a", "a = 0 is the excluded off-diagonal coin; a must lie in (0, 1]"))
    elif not 0 < a <= 1:
        out.append(Diagnostic("model.coin.a", f"a must lie in (0, 1], got {a}"))
    b = coin.get("b")
    if b is not None:
        if not _is_num(b) or not 0 <= b <= 1:
            out.append(Diagnostic("model.coin.b", "must be a number in [0, 1]"))
        elif 0 < a <= 1 and abs(a * a + b * b - 1) > 1e-12:
            out.append(Diagnostic("model.coin.b", f"a^2 + b^2 = {a * a + b * b!r}, must equal 1"))
    for name in ("alpha", "beta", "delta"):
        if name in coin:
            try:
                parse_angle(coin[name])
            except ValueError as e:
                out.append(Diagnostic(f"model.coin.{name}", str(e)))


def _check_profile(prof, out: list) -> None:
    if prof is None:
        return
    if not isinstance(prof, dict):
        out.append(Diagnostic("model.profile", "must be an object or null"))
        return
    kind = prof.get("kind", "none")
    if kind not in ("none", "log", "power", "cumsum"):
        out.append(Diagnostic("model.profile.kind", f"unknown profile kind {kind!r}"))
        return
    p = prof.get("p")
    if kind == "power" and not (_is_num(p) and 0 < p < 1):
        out.append(Diagnostic("model.profile.p", "power profile needs 0 < p < 1"))
    if kind == "cumsum" and not (_is_num(p) and p > 0):
        out.append(Diagnostic("model.profile.p", "cumsum profile needs p > 0"))
    for name in ("kappa", "eps0"):
        v = prof.get(name)
        if v is not None and not (_is_num(v) and v > 0):
            out.append(Diagnostic(f"model.profile.{name}", "must be positive"))


def _check_state(st, out: list) -> None:
    if not isinstance(st, dict):
        out.append(Diagnostic("initial_state", "must be an object"))
        return
    kind = st.get("type", "delta")
    spin = st.get("spin", [1, 0])
    try:
        s = _parse_spin(spin)
        if kind == "delta" and not np.any(s != 0):
            out.append(Diagnostic("initial_state.spin", "spin vector must be nonzero"))
    except ValueError as e:
        out.append(Diagnostic("initial_state.spin", str(e)))
    if kind == "delta":
        if not _is_int(st.get("site", 0)):
            out.append(Diagnostic("initial_state.site", "must be an integer"))
        for key in ("band", "momentum", "width", "center"):
            if key in st:
                out.append(Diagnostic(f"initial_state.{key}", "only applies to a gaussian packet"))
    elif kind == "gaussian":
        w = st.get("width", 10)
        if not (_is_num(w) and w > 0):
            out.append(Diagnostic("initial_state.width", "must be positive"))
        if not _is_num(st.get("center", 0)):
            out.append(Diagnostic("initial_state.center", "must be a number"))
        band = st.get("band")
        if band is not None and band not in (1, 2):
            out.append(Diagnostic("initial_state.band", "must be 1 or 2"))
        try:
            parse_angle(st.get("momentum", 0.0))
        except ValueError as e:
            out.append(Diagnostic("initial_state.momentum", str(e)))
    else:
        out.append(Diagnostic("initial_state.type", f"unknown state type {kind!r}"))


def _parse_spin(spin) -> np.ndarray:
    if not isinstance(spin, (list, tuple)) or len(spin) != 2:
        raise ValueError("spin must be a pair")
    out = []
    for c in spin:
        if _is_num(c):
            out.append(complex(c))
        elif isinstance(c, (list, tuple)) and len(c) == 2 and all(_is_num(t) for t in c):
            out.append(complex(c[0], c[1]))
        else:
            raise ValueError("spin entries must be numbers or [re, im] pairs")
    return np.array(out)


def _check_checkpoints(field_name: str, cps, out: list) -> None:
    if not isinstance(cps, list) or not cps or not all(_is_int(t) for t in cps):
        out.append(Diagnostic(field_name, "must be a nonempty list of integers"))
        return
    if any(t < 0 for t in cps):
        out.append(Diagnostic(field_name, "must be nonnegative"))
    if any(b <= a for a, b in zip(cps, cps[1:])):
        out.append(Diagnostic(field_name, "must be strictly increasing (sorted, no repeats)"))


def _check_kgrid(field_name: str, n, out: list) -> None:
    if not _is_int(n) or n < 64 or n & (n - 1):
        out.append(Diagnostic(field_name, f"must be a power of two >= 64, got {n!r}"))


def _check_params(kind: str, params: dict, out: list, state_width: Optional[int]) -> None:
    pre = "params"
    if kind == "evolve":
        if not (_is_int(params.get("T")) and params["T"] > 0):
            out.append(Diagnostic(f"{pre}.T", "must be a positive integer"))
    elif kind == "spectrum":
        _check_kgrid(f"{pre}.kgrid", params.get("kgrid"), out)
        _check_kgrid(f"{pre}.commutator_kgrid", params.get("commutator_kgrid"), out)
        d = params.get("commutator_degree")
        if not (_is_int(d) and d >= 0):
            out.append(Diagnostic(f"{pre}.commutator_degree", "must be a nonnegative integer"))
        elif _is_int(params.get("commutator_kgrid")) and d > params["commutator_kgrid"] // 8:
            out.append(Diagnostic(f"{pre}.commutator_degree", "must be at most commutator_kgrid / 8"))
        n = params.get("kgrid")
        if state_width is not None and _is_int(n) and n < 2 * state_width:
            out.append(Diagnostic(f"{pre}.kgrid", f"grid of {n} nodes is too small for an initial support of "
                                  f"width {state_width}; need n >= {2 * state_width}"))
    elif kind == "assumption":
        if not (_is_int(params.get("radius")) and params["radius"] >= 1):
            out.append(Diagnostic(f"{pre}.radius", "must be an integer >= 1"))
    elif kind == "waveop":
        _check_checkpoints(f"{pre}.checkpoints", params.get("checkpoints"), out)
        if params.get("direction") not in ("+", "-"):
            out.append(Diagnostic(f"{pre}.direction", "must be '+' or '-'"))
        for name in ("escape_radius", "identity_trials", "identity_T", "seed"):
            v = params.get(name)
            if not (_is_int(v) and v >= 0):
                out.append(Diagnostic(f"{pre}.{name}", "must be a nonnegative integer"))
    elif kind == "weaklimit":
        tl = params.get("T_list")
        _check_checkpoints(f"{pre}.T_list", tl, out)
        if isinstance(tl, list) and any(_is_int(t) and t <= 0 for t in tl):
            out.append(Diagnostic(f"{pre}.T_list", "T values must be positive"))
        _check_kgrid(f"{pre}.kgrid", params.get("kgrid"), out)
        _check_checkpoints(f"{pre}.checkpoints", params.get("checkpoints"), out)
        tw = params.get("T_wave")
        if tw is not None and not (_is_int(tw) and tw >= 0):
            out.append(Diagnostic(f"{pre}.T_wave", "must be a nonnegative integer or null"))
        for name in ("R", "T_avg"):
            v = params.get(name)
            if not (_is_int(v) and v >= 1):
                out.append(Diagnostic(f"{pre}.{name}", "must be an integer >= 1"))
        xg = params.get("xi_grid")
        if not (isinstance(xg, list) and len(xg) == 3 and _is_num(xg[0]) and _is_num(xg[1])
                and _is_int(xg[2]) and xg[2] >= 1 and xg[0] <= xg[1]):
            out.append(Diagnostic(f"{pre}.xi_grid", "must be [lo, hi, count] with lo <= hi, count >= 1"))
    elif kind == "sweep":
        base = params.get("base")
        if base not in KINDS or base == "sweep":
            out.append(Diagnostic(f"{pre}.base", f"must be one of {[k for k in KINDS if k != 'sweep']}"))
        grid = params.get("grid")
        if not isinstance(grid, dict) or not grid:
            out.append(Diagnostic(f"{pre}.grid", "sweep grid is empty"))
            return
        for name, values in grid.items():
            if name not in ("p", "a"):
                out.append(Diagnostic(f"{pre}.grid.{name}", "only 'p' and 'a' can be swept"))
            elif not isinstance(values, list) or not values:
                out.append(Diagnostic(f"{pre}.grid.{name}", "sweep grid is empty"))
            elif not all(_is_num(v) for v in values):
                out.append(Diagnostic(f"{pre}.grid.{name}", "values must be numbers"))
            elif name == "a" and any(not 0 < v <= 1 for v in values):
                out.append(Diagnostic(f"{pre}.grid.a", "a must lie in (0, 1]; a = 0 is the excluded off-diagonal coin"))
            elif name == "p" and any(not 0 < v <= 1 for v in values):
                out.append(Diagnostic(f"{pre}.grid.p", "p must lie in (0, 1]"))


def validate(raw: Any) -> list:
    """Schema and cross-field diagnostics; an empty list means the config is valid."""
    out: list = []
    if not isinstance(raw, dict):
        return [Diagnostic("<root>", "config must be a JSON object")]
    sv = raw.get("schema_version", SCHEMA_VERSION)
    if sv != SCHEMA_VERSION:
        out.append(Diagnostic("schema_version", f"unsupported schema version {sv!r}"))
    kind = raw.get("experiment")
    if kind not in KINDS:
        out.append(Diagnostic("experiment", f"must be one of {list(KINDS)}, got {kind!r}"))
        return out
    model = raw.get("model")
    if not isinstance(model, dict):
        out.append(Diagnostic("model", "required object with a coin block"))
    else:
        _check_coin(model.get("coin"), out)
        _check_profile(model.get("profile"), out)
    _check_state(raw.get("initial_state", {}), out)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        out.append(Diagnostic("params", "must be an object"))
        params = {}
    unknown = set(params) - set(DEFAULT_PARAMS[kind])
    for name in sorted(unknown):
        out.append(Diagnostic(f"params.{name}", f"unknown parameter for {kind}"))
    merged = {**DEFAULT_PARAMS[kind], **params}
    width = None
    if not out:
        try:
            width = build_state(raw.get("initial_state", {}), None).width
        except ValueError as e:
            out.append(Diagnostic("initial_state", str(e)))
    _check_params(kind, merged, out, width)
    if kind == "assumption" and isinstance(model, dict):
        prof = model.get("profile")
        if prof is None or (isinstance(prof, dict) and prof.get("kind", "none") == "none"):
            out.append(Diagnostic("model.profile", "assumption check needs a phase profile"))
    if kind == "sweep" and not out:
        for i, row in enumerate(sweep_rows(raw)):
            for d in validate(row["config"]):
                out.append(Diagnostic(f"sweep[{i}].{d.field}", d.message))
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        out.append(Diagnostic("tolerances", "must be an object"))
    else:
        for name, v in tols.items():
            if not (_is_num(v) and v > 0):
                out.append(Diagnostic(f"tolerances.{name}", "must be positive"))
    th = raw.get("threads", 1)
    if not (_is_int(th) and th >= 1):
        out.append(Diagnostic("threads", "must be a positive integer"))
    return out


def build_coin(coin: dict) -> CoinParams:
    if coin.get("preset") == "hadamard":
        return CoinParams.hadamard()
    a = float(coin["a"])
    b = coin.get("b")
    b = math.sqrt(max(0.0, 1.0 - a * a)) if b is None else float(b)
    return CoinParams(a, b, parse_angle(coin.get("alpha", 0.0)), parse_angle(coin.get("beta", 0.0)),
                      parse_angle(coin.get("delta", 0.0)))


def build_profile(prof: Optional[dict]) -> Optional[PhaseProfile]:
    if prof is None or prof.get("kind", "none") == "none":
        return None
    kind = prof["kind"]
    kappa, eps0 = prof.get("kappa"), prof.get("eps0")
    if kind == "log":
        if eps0 is not None and eps0 != 1.0:
            return PhaseProfile(PhaseProfile.log().xi, PhaseProfile.log().theta, eps0=eps0,
                                kappa=kappa, kind="log", p=1.0)
        return PhaseProfile.log(kappa)
    if kind == "power":
        return PhaseProfile.power(prof["p"], kappa, eps0)
    return PhaseProfile.cumsum(prof["p"], kappa, eps0)


def build_model(model: dict) -> WalkModel:
    return WalkModel(build_coin(model["coin"]), build_profile(model.get("profile")))


def build_state(st: dict, coin: Optional[CoinParams]) -> LatticeState:
    """Initial state from its config block (``band`` needs ``coin``).

    The spin is normalized so the state has unit norm.
    """
    kind = st.get("type", "delta")
    spin = _parse_spin(st.get("spin", [1, 0]))
    if np.any(spin != 0):
        spin = spin / np.linalg.norm(spin)
    if kind == "delta":
        return make_delta_state(int(st.get("site", 0)), spin)
    k0 = parse_angle(st.get("momentum", 0.0))
    band = st.get("band")
    if band is not None and coin is not None:
        spin = band_vector(coin, k0, int(band))
    return make_gaussian_state(float(st.get("center", 0)), float(st.get("width", 10)), spin, k0)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated config with defaults filled in.

    ``raw`` is the JSON object exactly as given (after CLI overrides);
    ``params`` and ``tolerances`` merge it over the per-kind defaults.
    """

    raw: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        diags = validate(raw)
        if diags:
            raise ConfigError(diags)
        return cls(copy.deepcopy(raw))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError([Diagnostic("<json>", str(e))]) from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2) + "\n"

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    @property
    def kind(self) -> str:
        return self.raw["experiment"]

    @property
    def name(self) -> str:
        return self.raw.get("name", self.kind)

    @property
    def params(self) -> dict:
        return {**DEFAULT_PARAMS[self.kind], **self.raw.get("params", {})}

    @property
    def tolerances(self) -> dict:
        return {**DEFAULT_TOLERANCES[self.kind], **self.raw.get("tolerances", {})}

    @property
    def threads(self) -> int:
        return int(self.raw.get("threads", 1))

    @property
    def output_dir(self) -> str:
        return self.raw.get("output_dir", "runs")

    def model(self) -> WalkModel:
        return build_model(self.raw["model"])

    def initial_state(self) -> LatticeState:
        return build_state(self.raw.get("initial_state", {}), build_coin(self.raw["model"]["coin"]))

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """New validated config with top-level or ``params.*``/``tolerances.*`` fields replaced."""
        raw = copy.deepcopy(self.raw)
        for key, value in changes.items():
            if value is None:
                continue
            head, _, tail = key.partition(".")
            if tail:
                raw.setdefault(head, {})[tail] = value
            else:
                raw[head] = value
        return ExperimentConfig.from_dict(raw)


def minimal_config(kind: str = "evolve") -> dict:
    """Smallest valid config for ``kind`` (Hadamard coin, no profile, delta state)."""
    raw = {"schema_version": SCHEMA_VERSION, "experiment": kind, "model": {"coin": {"preset": "hadamard"}}}
    if kind == "sweep":
        raw["params"] = {"base": "waveop", "grid": {"p": [0.5]}}
    return raw


def sweep_rows(raw: dict) -> list:
    """Per-point configs of a sweep, in ``p``-major order.

    ``p = 1`` selects the logarithmic profile, ``0 < p < 1`` the power
    profile (or the cumulative-sum profile when the base uses one).  ``a``
    replaces the coin's ``a`` and ``b = sqrt(1 - a^2)``, keeping its angles.
    """
    params = {**DEFAULT_PARAMS["sweep"], **raw.get("params", {})}
    grid = params["grid"]
    ps = grid.get("p", [None])
    as_ = grid.get("a", [None])
    rows = []
    for p in ps:
        for a in as_:
            cfg = {k: copy.deepcopy(v) for k, v in raw.items()
                   if k not in ("experiment", "params", "name", "threads", "output_dir")}
            cfg["experiment"] = params["base"]
            if params["base_params"]:
                cfg["params"] = copy.deepcopy(params["base_params"])
            model = cfg["model"]
            if a is not None:
                coin = model["coin"]
                if coin.get("preset") == "hadamard":
                    coin = {"alpha": 0.0, "beta": 0.0, "delta": "pi"}
                coin = {k: v for k, v in coin.items() if k not in ("preset", "a", "b")}
                coin.update(a=a, b=math.sqrt(max(0.0, 1.0 - a * a)))
                model["coin"] = coin
            if p is not None:
                base = model.get("profile") or {}
                extra = {k: base[k] for k in ("kappa",) if base.get(k) is not None}
                if base.get("kind") == "cumsum":
                    model["profile"] = {"kind": "cumsum", "p": p, **extra}
                elif p == 1:
                    model["profile"] = {"kind": "log", **extra}
                else:
                    model["profile"] = {"kind": "power", "p": p, **extra}
            rows.append({"p": p, "a": a, "config": cfg})
    return rows
