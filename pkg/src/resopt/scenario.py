"""Scenario documents (YAML or JSON) and CSV helpers.

A scenario has exactly three sections::

    mechanism:
      two_period: {C: 2, k: 1.5}          # or three_period {C, k, alpha}
                                           # or m_period {C, k, beta, m}
    population:
      uniform_p: {a: 0, b: 1, values: false}
      # or users: [{p: 0.3, v: 0.8}, ...]     users_file: users.csv
      # or info_structures: [{p1: .7, p21: .6, p22: .2}, ...]
      # or info_file: infos.csv               uniform_info: {values: false}
    run:
      n_users: 10000
      replications: 100
      seed: 0
      cost_model: forfeit                  # or resale
      strategy: truthful                   # or {fixed: 0.3} or {grid: 0.001}

Unknown keys are errors.  Relative file paths are resolved against the
scenario's directory.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError, ResoptError
from .multiperiod import InfoStructure, ThreePeriodParams, mperiod_weights
from .pricing import PricingParams
from .sim import (FixedReport, GridOptimizer, InfoList, SimConfig, ThreePeriodUser, Truthful,
                  TwoPeriodUser, UniformInfo, UniformP, UserList)


@dataclass(frozen=True)
class MPeriodParams:
    C: float
    k: float
    beta: float
    m: int


def fmt(x) -> str:
    """CSV number format: 12 significant digits, shortest round-trip text."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return repr(float(f"{float(x):.12g}"))


def fmt_exact(x) -> str:
    """Full-precision text for values that must survive a round trip."""
    return "" if x is None else repr(float(x))


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file so failures leave no
    partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _section(doc, name, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a mapping", field=where)
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}", field=f"{where}.{unknown[0]}")
    return doc


def _one_of(doc, options, where):
    _section(doc, where, options, where)
    if len(doc) != 1:
        raise ConfigError(f"{where} needs exactly one of {', '.join(options)}", field=where)
    (kind, body), = doc.items()
    return kind, body


def _number(body, key, where, required=True, default=None):
    if key not in body:
        if required:
            raise ConfigError(f"missing {where}.{key}", field=f"{where}.{key}")
        return default
    val = body[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {val!r}", field=f"{where}.{key}")
    return val


def _wrap(where, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except ResoptError as exc:
        raise ConfigError(f"{where}: {exc}", field=where) from exc


def parse_mechanism(doc):
    kind, body = _one_of(doc, ("two_period", "three_period", "m_period"), "mechanism")
    where = f"mechanism.{kind}"
    if kind == "two_period":
        _section(body, where, ("C", "k"), where)
        return _wrap(where, PricingParams, float(_number(body, "C", where)), float(_number(body, "k", where)))
    if kind == "three_period":
        _section(body, where, ("C", "k", "alpha"), where)
        return _wrap(where, ThreePeriodParams, float(_number(body, "C", where)),
                     float(_number(body, "k", where)), float(_number(body, "alpha", where)))
    _section(body, where, ("C", "k", "beta", "m"), where)
    C, k = float(_number(body, "C", where)), float(_number(body, "k", where))
    beta, m = float(_number(body, "beta", where)), _number(body, "m", where)
    _wrap(where, PricingParams, C, k)
    _wrap(where, mperiod_weights, beta, m)
    return MPeriodParams(C, k, beta, int(m))


def _read_rows(path, columns, optional, where):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in columns if c not in header]
            extra = [c for c in header if c not in columns and c not in optional]
            if missing or extra:
                bad = (missing or extra)[0]
                raise ConfigError(f"{path}: bad column set (problem with {bad!r})", field=where)
            rows = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.append({key: (float(val) if val not in (None, "") else None)
                                 for key, val in row.items()})
                except ValueError as exc:
                    raise ConfigError(f"{path}: line {lineno}: {exc}", field=where) from exc
            return rows
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}", field=where) from exc


def _two_user(row, where):
    _section(row, where, ("p", "v"), where)
    p = _number(row, "p", where)
    v = row.get("v")
    return TwoPeriodUser(float(p), None if v is None else float(_number(row, "v", where)))


def _three_user(row, where):
    _section(row, where, ("p1", "p21", "p22", "v"), where)
    info = _wrap(where, InfoStructure, *(float(_number(row, key, where)) for key in ("p1", "p21", "p22")))
    v = row.get("v")
    return ThreePeriodUser(info, None if v is None else float(_number(row, "v", where)))


def parse_population(doc, base_dir="."):
    kind, body = _one_of(doc, ("uniform_p", "uniform_info", "users", "users_file",
                                "info_structures", "info_file"), "population")
    where = f"population.{kind}"
    if kind == "uniform_p":
        body = body or {}
        _section(body, where, ("a", "b", "values"), where)
        return UniformP(float(_number(body, "a", where, False, 0.0)),
                        float(_number(body, "b", where, False, 1.0)),
                        bool(body.get("values", False)))
    if kind == "uniform_info":
        body = body or {}
        _section(body, where, ("values",), where)
        return UniformInfo(bool(body.get("values", False)))
    if kind in ("users", "info_structures"):
        if not isinstance(body, list):
            raise ConfigError(f"{where} must be a list", field=where)
        make = _two_user if kind == "users" else _three_user
        users = [make(row, f"{where}[{i}]") for i, row in enumerate(body)]
        return (UserList if kind == "users" else InfoList)(users)
    if not isinstance(body, str):
        raise ConfigError(f"{where} must be a file path", field=where)
    path = Path(base_dir) / body
    if kind == "users_file":
        rows = _read_rows(path, ("p",), ("v",), where)
        return UserList([_two_user(row, f"{where}[{i}]") for i, row in enumerate(rows)])
    rows = _read_rows(path, ("p1", "p21", "p22"), ("v",), where)
    return InfoList([_three_user(row, f"{where}[{i}]") for i, row in enumerate(rows)])


def _strategy(val):
    if val in (None, "truthful"):
        return Truthful()
    if isinstance(val, dict) and len(val) == 1:
        (key, arg), = val.items()
        if key == "fixed" and isinstance(arg, (int, float)):
            return FixedReport(float(arg))
        if key == "grid" and isinstance(arg, (int, float)):
            return GridOptimizer(float(arg))
    raise ConfigError(f"run.strategy must be truthful, {{fixed: q}} or {{grid: step}}, got {val!r}",
                      field="run.strategy")


def _int(body, key, default):
    val = body.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"run.{key} must be an integer, got {val!r}", field=f"run.{key}")
    return val


@dataclass(frozen=True)
class Scenario:
    mechanism: object
    config: SimConfig | None


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Parse and validate a scenario file.  ``seed`` overrides ``run.seed``.

    ``config`` is None for m-period mechanisms, which have no simulator.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}", field="scenario") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario {path} is not valid YAML/JSON: {exc}", field="scenario") from exc
    _section(doc, "scenario", ("mechanism", "population", "run"), "scenario")
    for name in ("mechanism", "population", "run"):
        if name not in doc:
            raise ConfigError(f"scenario is missing the {name} section", field=name)
    mechanism = parse_mechanism(doc["mechanism"])
    population = parse_population(doc["population"], path.parent)
    run = _section(doc["run"] or {}, "run", ("n_users", "replications", "seed", "cost_model", "strategy"), "run")
    if isinstance(mechanism, MPeriodParams):
        return Scenario(mechanism, None)
    run_seed = _int(run, "seed", 0) if seed is None else seed
    cost_model = run.get("cost_model", "forfeit")
    config = SimConfig(
        mechanism=mechanism,
        population=population,
        n_users=_int(run, "n_users", None),
        replications=_int(run, "replications", 1),
        seed=run_seed,
        cost_model=cost_model,
        strategy=_strategy(run.get("strategy")),
    )
    return Scenario(mechanism, config)
