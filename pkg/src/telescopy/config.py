"""Experiment configuration: a versioned JSON document plus ``key=value`` overrides."""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from .distillation import REGIME_FACTOR, TauSchedule, Variant, ansatz_schedule
from .povm import MeasurementSettings, Scheme
from .state import (
    CoherenceSet,
    SourceModel,
    TelescopeArray,
    coherence_from_source,
    n_pairs,
    pair_name,
    pairs,
    parse_pair,
)

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "scheme": "gjc_classical",
    "m": 3,
    "epsilon": 0.01,
    "d": 5,
    "schedule": None,
    "variant": "pure_weak",
    "coherence": {"value": [0.5, 0.0]},
    "phase": {"delta": 0.0},
    "samples": 100000,
    "seed": 0,
    "budget": 50_000_000,
    "regime_factor": REGIME_FACTOR,
    "step": 1e-6,
    "threads": 1,
    "output": None,
}

KNOWN = set(DEFAULTS) | {"figure", "ms", "ds"}


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _complex(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(where, f"cannot read {value!r} as a complex number; use [re, im]")


def _int(doc, key, lo=None):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(key, f"must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(key, f"must be >= {lo}, got {v}")
    return v


def _float(doc, key, lo=None, hi=None, open_lo=False, open_hi=False):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(key, f"must be a finite number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (open_lo and v == lo)):
        raise ConfigError(key, f"must be {'>' if open_lo else '>='} {lo}, got {v}")
    if hi is not None and (v > hi or (open_hi and v == hi)):
        raise ConfigError(key, f"must be {'<' if open_hi else '<='} {hi}, got {v}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: Scheme
    m: int
    epsilon: float
    d: int
    schedule: Union[None, str, tuple]
    variant: Variant
    coherence: CoherenceSet
    settings: MeasurementSettings
    samples: int
    seed: int
    budget: int
    regime_factor: float
    step: float
    threads: int
    output: Optional[str]
    raw: Dict[str, Any] = field(repr=False, compare=False, default_factory=dict)

    @property
    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def explicit_schedule(self):
        """The schedule for the explicit and ansatz arms; ``None`` for ``optimize`` or absent."""
        if self.schedule is None or self.schedule == "optimize":
            return None
        if self.schedule == "ansatz":
            base = ansatz_schedule(self.d)
            if self.variant is Variant.HARD_FINAL:
                return TauSchedule(base.taus[:-1], Variant.HARD_FINAL)
            return base
        return TauSchedule(self.schedule, self.variant)


def _coherence(spec, m):
    where = "coherence"
    if not isinstance(spec, dict):
        raise ConfigError(where, "must be an object with one of value, pairs, source")
    arms = [k for k in ("value", "pairs", "source") if k in spec]
    if len(arms) != 1:
        raise ConfigError(where, f"give exactly one of value, pairs, source (got {arms or 'none'})")
    arm = arms[0]
    if arm == "value":
        g = CoherenceSet.uniform(m, _complex(spec["value"], "coherence.value"))
    elif arm == "pairs":
        entries = spec["pairs"]
        if not isinstance(entries, dict):
            raise ConfigError("coherence.pairs", "must map pair names to complex values")
        mapping = {}
        for key, v in entries.items():
            try:
                p = parse_pair(m, key)
            except ValueError as exc:
                raise ConfigError(f"coherence.pairs.{key}", str(exc)) from None
            mapping[p] = _complex(v, f"coherence.pairs.{key}")
        missing = [pair_name(p) for p in pairs(m) if p not in mapping]
        if missing:
            raise ConfigError("coherence.pairs", f"missing pairs {', '.join(missing)}")
        g = CoherenceSet.from_mapping(m, mapping)
    else:
        g = _source_coherence(spec, m)
    bad = np.abs(g.values) > 1.0 + 1e-9
    if bad.any():
        raise ConfigError(where, "every |g_XY| must be <= 1")
    return g


def _source_coherence(spec, m):
    src = spec["source"]
    if not isinstance(src, dict) or "kind" not in src:
        raise ConfigError("coherence.source", "must be an object with a kind")
    kind = src["kind"]
    try:
        if kind == "point":
            model = SourceModel.point(float(src.get("x0", 0.0)))
        elif kind == "uniform":
            model = SourceModel.uniform(float(src["width"]), float(src.get("center", 0.0)))
        elif kind == "discrete":
            model = SourceModel(positions=src["positions"], weights=src["weights"])
        else:
            raise ConfigError("coherence.source.kind", f"unknown kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"coherence.source.{exc.args[0]}", "required") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("coherence.source", str(exc)) from None
    if "baselines" in spec:
        b = spec["baselines"]
        if not isinstance(b, list) or len(b) != n_pairs(m):
            raise ConfigError("coherence.baselines", f"need {n_pairs(m)} entries")
        arr = TelescopeArray(m, tuple(float(v) for v in b))
    elif "positions" in spec:
        pos = spec["positions"]
        if not isinstance(pos, list) or len(pos) != m:
            raise ConfigError("coherence.positions", f"need {m} telescope positions")
        arr = TelescopeArray.from_positions(pos, float(spec.get("wavenumber", 1.0)))
    else:
        raise ConfigError("coherence", "source models need baselines or positions")
    return coherence_from_source(model, arr)


def _phase(spec, scheme, m):
    if not isinstance(spec, dict):
        raise ConfigError("phase", "must be an object with delta, pairs or telescopes")
    arms = [k for k in ("delta", "pairs", "telescopes") if k in spec]
    if len(arms) != 1:
        raise ConfigError("phase", f"give exactly one of delta, pairs, telescopes (got {arms or 'none'})")
    arm = arms[0]
    if arm == "delta":
        v = spec["delta"]
        if not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigError("phase.delta", "must be a finite number")
        if scheme.pair_phased:
            return MeasurementSettings(scheme, delta=float(v))
        if float(v) != 0.0:
            raise ConfigError(
                "phase.delta",
                f"{scheme.value} uses per-telescope phases; give phase.telescopes instead",
            )
        return MeasurementSettings(scheme, telescope_deltas=[0.0] * m)
    if arm == "pairs":
        if not scheme.pair_phased:
            raise ConfigError("phase.pairs", f"{scheme.value} takes per-telescope phases")
        entries = spec["pairs"]
        out = {}
        for key, v in entries.items():
            try:
                out[parse_pair(m, key)] = float(v)
            except ValueError as exc:
                raise ConfigError(f"phase.pairs.{key}", str(exc)) from None
        return MeasurementSettings(scheme, pair_deltas=out)
    t = spec["telescopes"]
    if not isinstance(t, list) or len(t) != m:
        raise ConfigError("phase.telescopes", f"need {m} phases")
    if scheme.pair_phased:
        d = [float(t[i]) - float(t[j]) for i, j in pairs(m)]
        return MeasurementSettings(scheme, pair_deltas=dict(zip(pairs(m), d)))
    return MeasurementSettings(scheme, telescope_deltas=[float(v) for v in t])


def _schedule(doc):
    s = doc["schedule"]
    if s is None or s in ("ansatz", "optimize"):
        return s
    if isinstance(s, str):
        raise ConfigError("schedule", f"unknown schedule {s!r}; use a tau list, 'ansatz' or 'optimize'")
    if not isinstance(s, list) or not s and Variant.parse(doc["variant"]) is Variant.PURE_WEAK:
        raise ConfigError("schedule", "must be a non-empty list of tau values")
    taus = []
    for i, t in enumerate(s):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0.0 < t < 1.0:
            raise ConfigError(f"schedule[{i}]", f"tau must lie strictly inside (0, 1), got {t!r}")
        taus.append(float(t))
    return tuple(taus)


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError("--override", f"expected key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        if parts[0] in ("coherence", "phase") and len(parts) == 2:
            # switching arms replaces the whole sub-object
            node.clear()
        node[parts[-1]] = parse_value(text)
    return doc


def load_document(path=None, overrides=(), seed=None):
    if path is None:
        doc = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    doc = apply_overrides(doc, overrides)
    if seed is not None:
        doc["seed"] = seed
    return doc


def resolve(doc) -> ExperimentConfig:
    unknown = sorted(set(doc) - KNOWN)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    merged = {**copy.deepcopy(DEFAULTS), **doc}
    if merged["version"] != CONFIG_VERSION:
        raise ConfigError("version", f"unsupported version {merged['version']!r}; expected {CONFIG_VERSION}")
    try:
        scheme = Scheme.parse(merged["scheme"])
    except ValueError as exc:
        raise ConfigError("scheme", str(exc)) from None
    try:
        variant = Variant.parse(merged["variant"])
    except ValueError as exc:
        raise ConfigError("variant", str(exc)) from None
    m = _int(merged, "m", lo=2)
    if m > 12:
        raise ConfigError("m", f"must be <= 12, got {m}")
    eps = _float(merged, "epsilon", 0.0, 1.0, open_lo=True, open_hi=True)
    d = _int(merged, "d", lo=1)
    seed = _int(merged, "seed", lo=0)
    if seed >= 2 ** 64:
        raise ConfigError("seed", "must fit in 64 bits")
    return ExperimentConfig(
        scheme=scheme,
        m=m,
        epsilon=eps,
        d=d,
        schedule=_schedule(merged),
        variant=variant,
        coherence=_coherence(merged["coherence"], m),
        settings=_phase(merged["phase"], scheme, m),
        samples=_int(merged, "samples", lo=1),
        seed=seed,
        budget=_int(merged, "budget", lo=1),
        regime_factor=_float(merged, "regime_factor", 0.0, open_lo=True),
        step=_float(merged, "step", 0.0, open_lo=True),
        threads=_int(merged, "threads", lo=1),
        output=merged["output"],
        raw=merged,
    )


def load_config(path=None, overrides=(), seed=None) -> ExperimentConfig:
    return resolve(load_document(path, overrides, seed))
