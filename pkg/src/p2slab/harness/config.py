"""Strict flat ``key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment; list values are comma
separated. Unknown keys, keys that the chosen kind does not use, bad types and
duplicates are errors that cite the key and line number.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

KINDS = ("validate", "trotter-sweep", "floquet-sweep", "sw-sweep", "bounds", "ft-overhead")
COMMON = ("kind", "seed", "out", "threads", "tol", "record_timing")
THREADS_ENV = "P2S_THREADS"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _list(conv: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(s: str) -> list:
        items = [x.strip() for x in s.split(",")]
        if not items or any(x == "" for x in items):
            raise ValueError("empty list entry")
        return [conv(x) for x in items]
    parse.__name__ = f"list of {conv.__name__}"
    return parse


def _str(s: str) -> str:
    return s.strip()


_str.__name__ = "string"
_int = int
_float = float
_bool.__name__ = "boolean"
INTS, FLOATS, STRS = _list(_int), _list(_float), _list(_str)

# key -> (parser, help text)
SCHEMA: dict[str, tuple[Callable[[str], Any], str]] = {
    "kind": (_str, "experiment kind: " + " | ".join(KINDS)),
    "seed": (_int, "seed for random initial states (validate)"),
    "out": (_str, "output CSV path"),
    "threads": (_int, f"worker threads; falls back to ${THREADS_ENV}, then 1"),
    "tol": (_float, "integrator tolerance"),
    "record_timing": (_bool, "add a wall_time_ms column (breaks byte-for-byte reproducibility)"),
    "N": (INTS, "system sizes (modes for fermions, qubits for sw-sweep)"),
    "T": (INTS, "Trotter step counts"),
    "p_order": (INTS, "expansion / product-formula orders"),
    "noise": (FLOATS, "discrete depolarizing probability (trotter) or rate gamma (floquet, sw, bounds)"),
    "uptau": (FLOATS, "stroboscopic periods"),
    "h": (_float, "on-site strength"),
    "g": (_float, "bond strength"),
    "h0": (_float, "static on-site strength"),
    "h1": (_float, "oscillating on-site amplitude"),
    "g0": (_float, "static bond strength"),
    "g1": (_float, "oscillating bond amplitude"),
    "tau": (_float, "target evolution time"),
    "placement": (_str, "trotter noise placement: all | touched"),
    "boundary": (_str, "chain boundary: open | periodic"),
    "validate_p": (_float, "discrete depolarizing probability in the validate suite"),
    "validate_gamma": (_float, "continuous depolarizing rate in the validate suite"),
    "mappings": (STRS, "bounds mappings: trotter, floquet-magnus, schrieffer-wolff"),
    "d": (_int, "lattice dimension for bound formulas"),
    "c_map": (_float, "prefactor of the mapping error term"),
    "c_noise": (_float, "prefactor of the noise error term"),
    "xi0": (FLOATS, "physical noise rates"),
    "xi_th": (_float, "threshold noise rate"),
    "t_code": (_int, "base code corrects t errors (distance 2t+1)"),
    "L": (INTS, "concatenation levels"),
    "delta": (FLOATS, "target precisions"),
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "validate": {"N": [2, 3, 4, 5, 6], "h": 1.0, "g": 0.5, "tau": 1.0, "h0": 1.0, "h1": 0.5,
                 "g0": 1.0, "g1": 0.5, "uptau": [0.5], "validate_p": 0.05, "validate_gamma": 0.01},
    "trotter-sweep": {"N": [16], "T": [4, 8, 16, 32], "p_order": [2], "noise": [0.0], "h": 1.0, "g": 0.5,
                      "tau": 1.0, "placement": "all", "boundary": "open"},
    "floquet-sweep": {"N": [8], "uptau": [0.4, 0.2, 0.1], "p_order": [0], "noise": [0.0], "h0": 1.0,
                      "h1": 0.5, "g0": 1.0, "g1": 0.5, "tau": 1.5, "boundary": "open"},
    "sw-sweep": {"N": [6], "uptau": [0.2, 0.1, 0.05], "p_order": [0], "noise": [0.0], "tau": 1.0},
    "bounds": {"mappings": ["trotter", "floquet-magnus", "schrieffer-wolff"], "p_order": [1, 2],
               "noise": [1e-6, 1e-4, 1e-2], "d": 1, "tau": 1.0, "c_map": 1.0, "c_noise": 1.0},
    "ft-overhead": {"xi0": [1e-3], "xi_th": 1e-2, "t_code": 1, "L": [0, 1, 2, 3], "delta": [1e-3],
                    "p_order": [2], "d": 1, "tau": 1.0, "c_map": 1.0, "c_noise": 1.0},
}
COMMON_DEFAULTS = {"seed": 0, "out": None, "threads": None, "tol": 1e-11, "record_timing": False}


@dataclass
class ExperimentConfig:
    kind: str
    values: dict[str, Any] = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def resolved_threads(self, override: int | None = None) -> int:
        n = override if override is not None else self.values.get("threads")
        if n is None:
            env = os.environ.get(THREADS_ENV)
            if env:
                try:
                    n = int(env)
                except ValueError as exc:
                    raise ConfigError(f"${THREADS_ENV} must be an integer, got {env!r}") from exc
        n = 1 if n is None else n
        if n < 1:
            raise ConfigError("threads must be >= 1")
        return n


def allowed_keys(kind: str) -> set[str]:
    return set(COMMON) | set(DEFAULTS[kind])


def _validate(cfg: ExperimentConfig, lines: dict[str, int]) -> None:
    def fail(key: str, msg: str) -> None:
        where = f" (line {lines[key]})" if key in lines else ""
        raise ConfigError(f"{cfg.source}: key {key!r}{where}: {msg}")

    v = cfg.values
    for key, val in v.items():
        if isinstance(val, list) and not val:
            fail(key, "grid must be non-empty")
    if "placement" in v and v["placement"] not in ("all", "touched"):
        fail("placement", "must be 'all' or 'touched'")
    if "boundary" in v and v["boundary"] not in ("open", "periodic"):
        fail("boundary", "must be 'open' or 'periodic'")
    for key in ("N", "T", "L"):
        if key in v and any(x < (0 if key == "L" else 1) for x in v[key]):
            fail(key, "values out of range")
    for key in ("uptau", "xi0", "delta"):
        if key in v and any(x <= 0 for x in v[key]):
            fail(key, "values must be positive")
    if "noise" in v and any(x < 0 for x in v["noise"]):
        fail("noise", "values must be non-negative")
    if "p_order" in v and any(x < 0 for x in v["p_order"]):
        fail("p_order", "orders must be non-negative")
    if cfg.kind == "validate" and any(n > 6 or n < 2 for n in v["N"]):
        fail("N", "the dense oracle needs 2 <= N <= 6")
    if cfg.kind == "trotter-sweep":
        if any(p < 1 or (p > 2 and p % 2) for p in v["p_order"]):
            fail("p_order", "product formulas exist for p = 1, 2 or even p")
        if any(x > 1 for x in v["noise"]):
            fail("noise", "depolarizing probabilities must be <= 1")
        if v["boundary"] == "periodic" and any(n < 4 or n % 2 for n in v["N"]):
            fail("N", "a periodic chain needs even N >= 4")
    if cfg.kind == "floquet-sweep" and any(p not in (0, 1) for p in v["p_order"]):
        fail("p_order", "floquet sweeps support p in {0, 1}")
    if cfg.kind == "sw-sweep":
        if any(p not in (0, 1) for p in v["p_order"]):
            fail("p_order", "sw sweeps support p in {0, 1}")
        if any(n % 2 or n > 8 for n in v["N"]):
            fail("N", "sw sweeps need even N <= 8")
    if cfg.kind == "bounds":
        bad = set(v["mappings"]) - {"trotter", "floquet-magnus", "schrieffer-wolff"}
        if bad:
            fail("mappings", f"unknown mapping(s) {sorted(bad)}")
        if "trotter" in v["mappings"] and 0 in v["p_order"]:
            fail("p_order", "trotter needs p >= 1")
        if any(x <= 0 for x in v["noise"]):
            fail("noise", "bounds need gamma > 0")
    if cfg.kind == "ft-overhead":
        if any(x >= v["xi_th"] for x in v["xi0"]):
            fail("xi0", "below threshold required: xi0 must be smaller than xi_th")
        if 0 in v["p_order"]:
            fail("p_order", "need p >= 1")


def parse_config(text: str, source: str = "<string>", kind: str | None = None) -> ExperimentConfig:
    """Parse config text; ``kind`` supplies the kind when the text omits it
    and must agree with it otherwise."""
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {body!r}")
        key, value = (x.strip() for x in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        if value == "":
            raise ConfigError(f"{source}: line {lineno}: key {key!r} has no value")
        conv = SCHEMA[key][0]
        try:
            raw[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {lineno}: key {key!r} expects {conv.__name__}: {exc}") from None
        lines[key] = lineno

    file_kind = raw.get("kind")
    if file_kind is None and kind is None:
        raise ConfigError(f"{source}: missing required key 'kind'")
    if file_kind is not None and kind is not None and file_kind != kind:
        raise ConfigError(f"{source}: line {lines['kind']}: key 'kind' is {file_kind!r} "
                          f"but the subcommand is {kind!r}")
    kind = file_kind or kind
    if kind not in KINDS:
        where = f" line {lines['kind']}:" if "kind" in lines else ""
        raise ConfigError(f"{source}:{where} key 'kind': unknown kind {kind!r}; expected one of {KINDS}")
    allowed = allowed_keys(kind)
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{source}: line {lines[key]}: key {key!r} is not used by kind {kind!r}")
    values = dict(COMMON_DEFAULTS)
    values.update(DEFAULTS[kind])
    values.update(raw)
    values["kind"] = kind
    cfg = ExperimentConfig(kind, values, source)
    _validate(cfg, lines)
    return cfg


def load_config(path: str | os.PathLike, kind: str | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror or exc}") from None
    return parse_config(text, str(p), kind)


def default_config(kind: str) -> ExperimentConfig:
    return parse_config("", "<defaults>", kind)


def schema_help() -> str:
    out = ["Config file: one 'key = value' per line, '#' comments, lists comma-separated.", "", "Keys:"]
    width = max(len(k) for k in SCHEMA)
    for key, (conv, text) in SCHEMA.items():
        out.append(f"  {key:<{width}}  [{conv.__name__}] {text}")
    out += ["", "Per-kind keys and defaults (common keys: " + ", ".join(COMMON) + "):"]
    for kind, d in DEFAULTS.items():
        out.append(f"  {kind}:")
        for key, val in d.items():
            shown = ",".join(map(str, val)) if isinstance(val, list) else val
            out.append(f"    {key} = {shown}")
    return "\n".join(out)
