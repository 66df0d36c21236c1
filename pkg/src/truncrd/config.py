"""Flat INI scenario files.

Sections and keys (all optional unless noted)::

    [source]      kind = dsbs | table;  crossover = 0.25;  table = 0.375 0.125; 0.125 0.375
    [distortion]  kind = erasure | hamming | table;  n_hat = 2;  table = 0 inf 1; inf 0 1
    [problem]     kind = shannon | conditional | wyner-ziv | generic;  u_card = 3
                  objective = one MI term per line, e.g. "1.0 X;U|Y"
                  markov = one chain per line, e.g. "U - X - Y"
    [sweep]       D = 0.25, 0.5;  schedule = geometric | arithmetic;  n_max = 10;  step = 1
                  caps = 2 4 8 16;  tol = 1e-3;  oracle_resolution = 64
    [solver]      restarts = 32;  seed = 0;  workers = 1;  method = auto | generic

Table rows are separated by ';' or newlines, entries by whitespace or commas.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .constraints import MarkovChainSpec
from .errors import ConfigError
from .objective import parse_term
from .scenarios import ScenarioConfig
from .solvers.problem import SolverOptions

__all__ = ["load_config", "parse_config", "parse_table"]

_KEYS = {
    "source": {"kind", "crossover", "table"},
    "distortion": {"kind", "n_hat", "table"},
    "problem": {"kind", "u_card", "objective", "markov"},
    "sweep": {"d", "schedule", "n_max", "step", "caps", "tol", "oracle_resolution"},
    "solver": {"restarts", "seed", "workers", "method"},
}


def parse_table(text: str, cast=float) -> list[list]:
    rows = [r for r in text.replace("\n", ";").split(";") if r.strip()]
    return [[cast(v) for v in r.replace(",", " ").split()] for r in rows]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for name in cp.sections():
        if name not in _KEYS:
            raise ConfigError(f"unknown section [{name}]")
        extra = set(cp[name]) - _KEYS[name]
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    get = lambda s: cp[s] if cp.has_section(s) else {}  # noqa: E731
    src, dis, prob, sw, sol = (get(s) for s in ("source", "distortion", "problem", "sweep", "solver"))

    kw: dict = {}
    try:
        skind = src.get("kind", "dsbs").strip()
        if skind == "dsbs":
            kw["crossover"] = float(src.get("crossover", "0.25"))
        elif skind == "table":
            if "table" not in src:
                raise ConfigError("[source] kind = table needs a table")
            t = parse_table(src["table"])
            kw["source_table"] = t[0] if len(t) == 1 else t
        else:
            raise ConfigError(f"unknown source kind {skind!r}")

        kw["distortion"] = dis.get("kind", "erasure").strip()
        if "table" in dis:
            kw["distortion_table"] = parse_table(dis["table"], cast=str.strip)
        if "n_hat" in dis:
            kw["n_hat"] = int(dis["n_hat"])

        kw["kind"] = prob.get("kind", "shannon").strip()
        if "u_card" in prob:
            kw["u_card"] = int(prob["u_card"])
        if "objective" in prob:
            kw["objective"] = tuple(parse_term(ln) for ln in _lines(prob["objective"]))
        if "markov" in prob:
            kw["markov"] = tuple(MarkovChainSpec.parse(ln) for ln in _lines(prob["markov"]))

        if "d" in sw:
            kw["D_grid"] = _floats(sw["d"])
        if "caps" in sw:
            kw["caps"] = _floats(sw["caps"])
        if "schedule" in sw:
            kw["schedule"] = sw["schedule"].strip()
        if "n_max" in sw:
            kw["n_max"] = int(sw["n_max"])
        if "step" in sw:
            kw["step"] = float(sw["step"])
        if "tol" in sw:
            kw["tol"] = float(sw["tol"])
        if "oracle_resolution" in sw:
            kw["oracle_resolution"] = int(sw["oracle_resolution"])

        kw["solver"] = SolverOptions(
            restarts=int(sol.get("restarts", "32")),
            seed=int(sol.get("seed", "0")),
            workers=int(sol.get("workers", "1")),
            method=sol.get("method", "auto").strip(),
        )
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())
