"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import InputError

_SECTION = "experiment"

# budget knobs and their defaults; anything else in the file is rejected
BUDGET_DEFAULTS: dict[str, float | int | str] = {
    "calib_budget": 2000,  # seeds for the p_c bisection and chi(p_s)
    "kappa": "auto",  # kappa-hat value, or "auto" for the finite-n ER estimate
    "kappa_samples": 300,
    "n_perm": 2000,
    "alpha": 0.01,
    "top_k": 5,
    "gp_points": 4,
    "n_pairs": 200,  # metric-comparison pairs per seed
    "radius": 1,
    "reps": 5,  # window-width repetitions
    "R": 0,  # long-thin scan radius, 0 means round(V^{1/3})
    "M": 0,  # long-thin scan ball size, 0 means round(V^{2/3})
    "scan_cap": 4096,
    "eta0": 0.1,
    "r0": 13.0,
    "n_mc": 20,
}
_INTS = {"calib_budget", "kappa_samples", "n_perm", "top_k", "gp_points", "n_pairs", "radius",
         "reps", "R", "M", "scan_cap", "n_mc"}
_FLOATS = {"alpha", "eta0", "r0"}


def _split(value: str) -> list[str]:
    return [x.strip() for x in value.split(",") if x.strip()]


@dataclass
class ExperimentConfig:
    experiment: str
    m: list[int] = field(default_factory=list)
    lam: list[float] = field(default_factory=lambda: [0.0])
    base_seed: int = 0
    n_seeds: int = 0
    budgets: dict = field(default_factory=dict)
    out_dir: str = "results"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])
    p_c: list[float] = field(default_factory=list)  # optional p_c-hat per m, skips calibration

    def __post_init__(self):
        unknown = set(self.budgets) - set(BUDGET_DEFAULTS)
        if unknown:
            raise InputError(f"unknown budget keys: {sorted(unknown)}")
        self.budgets = {**BUDGET_DEFAULTS, **self.budgets}
        if self.n_seeds < 0:
            raise InputError("n_seeds must be >= 0")
        if self.base_seed < 0:
            raise InputError("base_seed must be >= 0")
        if any(f not in ("csv", "json") for f in self.formats):
            raise InputError("formats must be among csv, json")
        if self.p_c and len(self.p_c) != len(self.m):
            raise InputError("p_c needs one value per m")

    def budget(self, key: str):
        return self.budgets[key]

    def seeds(self, offset: int = 0) -> range:
        start = self.base_seed + offset
        return range(start, start + self.n_seeds)

    def p_c_for(self, m: int) -> float | None:
        if not self.p_c:
            return None
        return self.p_c[self.m.index(m)]

    def canonical(self) -> dict:
        return {
            "experiment": self.experiment,
            "m": list(self.m),
            "lambda": list(self.lam),
            "base_seed": self.base_seed,
            "n_seeds": self.n_seeds,
            "budgets": dict(sorted(self.budgets.items())),
            "formats": list(self.formats),
            "p_c": list(self.p_c),
        }

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(f"[{_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise InputError(f"malformed config: {exc}") from None
        raw = dict(cp[_SECTION])
        try:
            name = raw.pop("experiment")
        except KeyError:
            raise InputError("config lacks 'experiment'") from None
        kw: dict = {"experiment": name}
        try:
            if "m" in raw:
                kw["m"] = [int(x) for x in _split(raw.pop("m"))]
            if "lambda" in raw:
                kw["lam"] = [float(x) for x in _split(raw.pop("lambda"))]
            if "seed" in raw:
                kw["base_seed"] = int(raw.pop("seed"))
            if "seeds" in raw:
                kw["n_seeds"] = int(raw.pop("seeds"))
            if "out_dir" in raw:
                kw["out_dir"] = raw.pop("out_dir")
            if "formats" in raw:
                kw["formats"] = _split(raw.pop("formats"))
            if "p_c" in raw:
                kw["p_c"] = [float(x) for x in _split(raw.pop("p_c"))]
            budgets = {}
            for key, val in raw.items():
                if key in _INTS:
                    budgets[key] = int(val)
                elif key in _FLOATS:
                    budgets[key] = float(val)
                else:
                    budgets[key] = val
        except ValueError as exc:
            raise InputError(f"bad config value: {exc}") from None
        return cls(budgets=budgets, **kw)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text)
