"""Run configuration read from an INI-style file.

Example::

    [truth]
    lambda0 = 0.5
    family = exponential
    rate = 1.0

    [prior]
    a = 1
    b = 1
    c = 1
    h_family = exponential
    h_rate = 0.5

    [experiment]
    n_list = 50, 500, 5000
    seeds = 0, 1, 2
    n = 2000
    draws = 5000
    k = 2000

    [output]
    dir = out

Service laws are given by ``family`` plus the family's parameter names
(``rate``; ``shape, scale``; ``sigma, scale``; ``low, high``) and an optional
``bound``.  In ``[prior]`` the same keys carry an ``h_`` prefix; without
them the prior guess is the true service law.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .asymptotics import BVM_GRID, PriorSpec
from .exceptions import ConfigurationError
from .queue_core import MG1Truth, ServiceDist

_SECTIONS = ("truth", "prior", "experiment", "output")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _dist(section: configparser.SectionProxy, prefix: str = "") -> ServiceDist | None:
    fam_key = prefix + "family"
    if fam_key not in section:
        return None
    d = {k[len(prefix):]: v for k, v in section.items() if k.startswith(prefix)}
    return ServiceDist.from_dict(d)


@dataclass
class RunConfig:
    truth: MG1Truth = field(default_factory=lambda: MG1Truth(0.5, ServiceDist.exponential(1.0)))
    prior: PriorSpec = field(default_factory=PriorSpec)
    n_list: list = field(default_factory=lambda: [50, 500, 5000])
    seeds: list = field(default_factory=lambda: list(range(10)))
    n: int = 2000
    draws: int = 5000
    k: int = 2000
    grid: tuple = BVM_GRID
    w_grid: tuple = (0.5, 1.0, 2.0)
    z_grid: list | None = None
    time_change: str = "hazard"
    out_dir: Path = Path("out")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_parser(parser)

    @classmethod
    def from_string(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(str(exc)) from None
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> "RunConfig":
        unknown = set(parser.sections()) - set(_SECTIONS)
        if unknown:
            raise ConfigurationError(f"unknown config sections {sorted(unknown)}")
        cfg = cls()
        try:
            if parser.has_section("truth"):
                sec = parser["truth"]
                service = _dist(sec) or cfg.truth.service
                cfg.truth = MG1Truth(sec.getfloat("lambda0", cfg.truth.lambda0), service)
            if parser.has_section("prior"):
                sec = parser["prior"]
                M = sec.get("m")
                cfg.prior = PriorSpec(
                    a=sec.getfloat("a", 1.0),
                    b=sec.getfloat("b", 1.0),
                    c=sec.getfloat("c", 1.0),
                    H=_dist(sec, "h_"),
                    M_bound=float(M) if M not in (None, "") else None,
                    n_cells=sec.getint("n_cells", 2000),
                )
            if parser.has_section("experiment"):
                sec = parser["experiment"]
                if "n_list" in sec:
                    cfg.n_list = _ints(sec["n_list"])
                if "seeds" in sec:
                    cfg.seeds = _ints(sec["seeds"])
                cfg.n = sec.getint("n", cfg.n)
                cfg.draws = sec.getint("draws", cfg.draws)
                cfg.k = sec.getint("k", cfg.k)
                if "grid" in sec:
                    cfg.grid = tuple(_floats(sec["grid"]))
                if "w_grid" in sec:
                    cfg.w_grid = tuple(_floats(sec["w_grid"]))
                if "z_grid" in sec:
                    cfg.z_grid = _floats(sec["z_grid"])
                cfg.time_change = sec.get("time_change", cfg.time_change)
            if parser.has_section("output"):
                cfg.out_dir = Path(parser["output"].get("dir", str(cfg.out_dir)))
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad config value: {exc}") from None
        cfg.validate()
        return cfg

    def validate(self):
        if not self.n_list or min(self.n_list) < 0:
            raise ConfigurationError("n_list must be a nonempty list of nonnegative sizes")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        if self.n < 0 or self.draws < 1 or self.k < 1:
            raise ConfigurationError("n must be >= 0, draws and k >= 1")
        if self.time_change not in ("hazard", "odds"):
            raise ConfigurationError("time_change must be hazard or odds")
