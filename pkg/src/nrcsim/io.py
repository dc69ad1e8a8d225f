"""Configuration parsing, CSV emission and run manifests.

Config files are JSON. Every power quantity is given in dB under a
``*_db`` key; bare linear keys such as ``rho_d`` are rejected so that units
cannot be mixed up. ``null`` in a dB slot means "off" (linear zero).

Example::

    {
      "system": {"n_bs": 100, "num_ue": 20, "antennas_per_ue": 1, "tau_u": 20,
                 "rho_u_db": 0, "rho_d_db": 20, "coherence_symbols": 196},
      "nrc_db": {"sigma2_a_d_db": -20, "sigma2_c_d_db": -20,
                 "delta2_c_d_db": -30, "sigma2_c_od_db": -30},
      "sweep": {"variable": "rho_d_db", "grid": [-10, 0, 10, 20, 30],
                "precoders": ["ZF", "MRT"], "engines": ["analytic", "mc"],
                "mc_realizations": 1000, "seed": 42}
    }
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np
import scipy

from .analytic import CouplingRule
from .experiments import SweepRow, SweepSpec
from .model import (
    NRC_FIELDS,
    NrcsimError,
    NrcStats,
    SystemConfig,
    db_to_linear,
    linear_to_db,
)

CSV_HEADER = ("variable", "value", "precoder", "engine", "antenna", "sinr_db", "rate_bps_hz",
              "se_bps_hz", "alpha", "ci_halfwidth")

_SYSTEM_KEYS = {"n_bs", "ue_antennas", "num_ue", "antennas_per_ue", "tau_u", "rho_u_db",
                "rho_d_db", "coherence_symbols"}
_SWEEP_KEYS = {"variable", "grid", "nrc_param", "coupling_db", "precoders", "engines",
               "mc_realizations", "seed", "freeze_nrc"}
_NRC_KEYS = {f"{name}_db" for name in NRC_FIELDS}


class ParseError(NrcsimError):
    """Config file is unreadable, malformed, or misses/mistypes a field."""


class IoError(NrcsimError):
    pass


def builtin_configs() -> list[str]:
    root = resources.files("nrcsim") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_source(path: str | Path) -> tuple[str, str]:
    p = Path(path)
    if p.is_file():
        return str(p), p.read_text(encoding="utf-8")
    name = str(path)
    if name in builtin_configs():
        res = resources.files("nrcsim") / "configs" / f"{name}.json"
        return f"<builtin:{name}>", res.read_text(encoding="utf-8")
    raise ParseError(f"{path}: no such file or built-in config "
                     f"(built-ins: {', '.join(builtin_configs())})")


def parse_config(path: str | Path) -> tuple[SystemConfig, NrcStats, SweepSpec]:
    """Load and validate a config file (or built-in config name)."""
    where, text = _read_source(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    cfg, nrc, spec = parse_config_dict(doc, where)
    spec.validate()
    return cfg, nrc, spec


class _Fields:
    """Typed access to one JSON object with field-path diagnostics."""

    def __init__(self, obj: Any, path: str, allowed: set[str], where: str):
        self.where, self.path = where, path
        if not isinstance(obj, dict):
            self.fail(path, "expected an object")
        self.obj = obj
        for key in obj:
            if key not in allowed:
                hint = ""
                if f"{key}_db" in allowed:
                    hint = f"; linear values are not accepted, use '{key}_db'"
                self.fail(f"{path}.{key}", f"unknown field{hint}")

    def fail(self, field_path: str, msg: str):
        raise ParseError(f"{self.where}: field '{field_path}': {msg}")

    def has(self, key: str) -> bool:
        return key in self.obj

    def get(self, key: str, kind, default: Any = ...):
        if key not in self.obj:
            if default is ...:
                self.fail(f"{self.path}.{key}", "missing required field")
            return default
        value = self.obj[key]
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(f"{self.path}.{key}", f"expected an integer, got {value!r}")
        elif kind is float:
            if value is None:
                return -math.inf
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(f"{self.path}.{key}", f"expected a number or null, got {value!r}")
            value = float(value)
        elif kind is bool:
            if not isinstance(value, bool):
                self.fail(f"{self.path}.{key}", f"expected true/false, got {value!r}")
        elif kind is str:
            if not isinstance(value, str):
                self.fail(f"{self.path}.{key}", f"expected a string, got {value!r}")
        elif kind is list:
            if not isinstance(value, list):
                self.fail(f"{self.path}.{key}", f"expected a list, got {value!r}")
        return value


def parse_config_dict(doc: Mapping[str, Any], where: str = "<config>"
                      ) -> tuple[SystemConfig, NrcStats, SweepSpec]:
    top = _Fields(doc, "", {"system", "nrc_db", "sweep"}, where)
    sys_f = _Fields(top.get("system", dict), "system", _SYSTEM_KEYS, where)
    if sys_f.has("ue_antennas"):
        ue = sys_f.get("ue_antennas", list)
        if not all(isinstance(m, int) and not isinstance(m, bool) for m in ue):
            sys_f.fail("system.ue_antennas", "expected a list of integers")
    else:
        ue = [sys_f.get("antennas_per_ue", int, 1)] * sys_f.get("num_ue", int)
    cfg = SystemConfig(
        n_bs=sys_f.get("n_bs", int),
        ue_antennas=tuple(ue),
        tau_u=sys_f.get("tau_u", int),
        rho_u=db_to_linear(sys_f.get("rho_u_db", float)),
        rho_d=db_to_linear(sys_f.get("rho_d_db", float)),
        coherence_symbols=sys_f.get("coherence_symbols", int),
    )
    nrc_f = _Fields(top.get("nrc_db", dict, {}), "nrc_db", _NRC_KEYS, where)
    nrc = NrcStats(**{name: db_to_linear(nrc_f.get(f"{name}_db", float, -math.inf))
                      for name in NRC_FIELDS})

    sw = _Fields(top.get("sweep", dict, {}), "sweep", _SWEEP_KEYS, where)
    grid = sw.get("grid", list, [20.0])
    for i, v in enumerate(grid):
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            sw.fail(f"sweep.grid[{i}]", f"expected a number or null, got {v!r}")
    cpl = _Fields(sw.get("coupling_db", dict, {}), "sweep.coupling_db", _NRC_KEYS, where)
    coupling = CouplingRule(**{f"{name}_db": cpl.get(f"{name}_db", float,
                                                     getattr(CouplingRule(), f"{name}_db"))
                               for name in NRC_FIELDS})
    spec = SweepSpec(
        base=cfg,
        nrc_base=nrc,
        variable=sw.get("variable", str, "rho_d_db"),
        grid=tuple(-math.inf if v is None else float(v) for v in grid),
        coupling=coupling,
        precoders=tuple(sw.get("precoders", list, ["ZF", "MRT"])),
        engines=tuple(sw.get("engines", list, ["analytic"])),
        mc_realizations=sw.get("mc_realizations", int, 1000),
        seed=sw.get("seed", int, 0),
        nrc_param=sw.get("nrc_param", str, None) if sw.obj.get("nrc_param") is not None else None,
        freeze_nrc=sw.get("freeze_nrc", bool, False),
    )
    return cfg, nrc, spec


def _db(value: float) -> float | None:
    """dB value that converts back to exactly ``value``; ``None`` for zero.

    Every value that itself came from a dB float has such a preimage. Other
    linear values may not (``10 ** (x / 10)`` skips floats), and fall back to
    the nearest dB value.
    """
    if value == 0:
        return None
    x = linear_to_db(value)
    for _ in range(64):
        if db_to_linear(x) == value:
            return x
        x = np.nextafter(x, math.inf if db_to_linear(x) < value else -math.inf)
    return linear_to_db(value)


def _db_grid(value: float) -> float | None:
    return None if value == -math.inf else value


def dump_config(spec: SweepSpec) -> dict[str, Any]:
    """Resolved config in the file schema; ``parse_config_dict`` inverts it."""
    cfg = spec.base
    return {
        "system": {
            "n_bs": cfg.n_bs,
            "ue_antennas": list(cfg.ue_antennas),
            "tau_u": cfg.tau_u,
            "rho_u_db": _db(cfg.rho_u),
            "rho_d_db": _db(cfg.rho_d),
            "coherence_symbols": cfg.coherence_symbols,
        },
        "nrc_db": {f"{name}_db": _db(getattr(spec.nrc_base, name)) for name in NRC_FIELDS},
        "sweep": {
            "variable": spec.variable,
            "grid": [_db_grid(v) for v in spec.grid],
            "nrc_param": spec.nrc_param,
            "coupling_db": {f"{name}_db": _db_grid(getattr(spec.coupling, f"{name}_db"))
                            for name in NRC_FIELDS},
            "precoders": [str(p) for p in spec.precoders],
            "engines": list(spec.engines),
            "mc_realizations": spec.mc_realizations,
            "seed": spec.seed,
            "freeze_nrc": spec.freeze_nrc,
        },
    }


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(float(value), ".16e")
    return str(value)


def _write(dest: str | Path | TextIO, header: Sequence[str],
           records: Iterable[Sequence[Any]]) -> None:
    def dump(fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in records:
            writer.writerow([_fmt(v) for v in rec])

    if hasattr(dest, "write"):
        dump(dest)
        return
    try:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            dump(fh)
    except OSError as exc:
        raise IoError(f"cannot write {dest}: {exc}") from exc


def emit_csv(rows: Sequence[SweepRow], path: str | Path | TextIO) -> None:
    """Write sweep rows; extra columns of the first row are appended to the header."""
    extra_keys = [k for k, _ in rows[0].extras] if rows else []
    header = list(CSV_HEADER) + extra_keys
    _write(path, header, ([r.variable, r.value, r.precoder, r.engine, r.antenna, r.sinr_db,
                           r.rate, r.spectral_efficiency, r.alpha, r.ci_halfwidth]
                          + [v for _, v in r.extras] for r in rows))


def emit_table(rows: Sequence[Any], path: str | Path | TextIO, header: Sequence[str] | None = None) -> None:
    """Write a list of flat dataclass rows, one column per field."""
    if header is None:
        if not rows:
            raise ValueError("header required for an empty table")
        header = [f.name for f in fields(rows[0])]
    _write(path, header, ([getattr(r, h) for h in header] for r in rows))


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config: dict
    seed: int
    engine_versions: dict
    wall_clock_s: float
    outputs: dict  # file name -> sha256

    @classmethod
    def build(cls, command: str, spec: SweepSpec, started: float,
              outputs: Iterable[str | Path]) -> "RunManifest":
        from . import __version__
        return cls(
            tool_version=__version__,
            command=command,
            config=dump_config(spec),
            seed=spec.seed,
            engine_versions={"python": platform.python_version(), "numpy": np.__version__,
                             "scipy": scipy.__version__},
            wall_clock_s=time.perf_counter() - started,
            outputs={Path(p).name: sha256_file(p) for p in outputs},
        )

    def write(self, path: str | Path) -> None:
        try:
            Path(path).write_text(json.dumps(asdict(self), indent=2, allow_nan=False) + "\n",
                                  encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def manifest_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".manifest.json")


def figure_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".png")
