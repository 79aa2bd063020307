"""Experiment configuration documents (schema in docs/formats.md).

:func:`parse_config` validates a JSON mapping and returns a normalized copy
with every optional field filled in. Normalization is idempotent, so
parse -> serialize -> parse returns the same mapping. Malformed documents
raise :class:`ConfigError` naming the offending field, e.g. ``data.seed``.
"""

import math

from .calculus import INEQUALITIES
from .errors import ConfigError
from .solver import SolverConfig

__all__ = ["parse_config", "SECTIONS", "REQUIRED"]

REQUIRED = object()
TWO_PI = 2.0 * math.pi


def _number(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return float(v)


def _int(path, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    return int(v)


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true or false, got {v!r}")
    return v


def _str(path, v):
    if not isinstance(v, str):
        raise ConfigError(path, f"expected a string, got {v!r}")
    return v


def _list(path, v, item):
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list, got {v!r}")
    return [item(f"{path}[{i}]", x) for i, x in enumerate(v)]


def _pair(path, v):
    out = _list(path, v, _number)
    if len(out) != 2:
        raise ConfigError(path, f"expected [low, high], got {v!r}")
    return out


def _band(path, v):
    """[low, high] in lattice units; high may be null (the dealiasing cutoff)."""
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(path, f"expected [low, high], got {v!r}")
    return [_number(f"{path}[0]", v[0]), None if v[1] is None else _number(f"{path}[1]", v[1])]


def _nullable(kind):
    def check(path, v):
        return None if v is None else kind(path, v)
    return check


def _listof(kind):
    def check(path, v):
        return _list(path, v, kind)
    return check


def _choice(*options):
    def check(path, v):
        _str(path, v)
        if v not in options:
            raise ConfigError(path, f"expected one of {list(options)}, got {v!r}")
        return v
    return check


# field -> (checker, default)
DATA = {
    "kind": (_choice("random", "snapshot"), "random"),
    "fraction": (_number, 0.5),
    "seed": (_int, 0),
    "band": (_pair, [1.0, 2.0]),
    "split": (_number, 0.5),
    "u0": (_nullable(_str), None),
    "theta0": (_nullable(_str), None),
}

CONSTANTS = {
    "source": (_choice("estimate", "given"), "estimate"),
    "k1": (_nullable(_number), None),
    "k2": (_nullable(_number), None),
    "k3": (_nullable(_number), None),
    "seed_count": (_int, 50),
    "N": (_nullable(_int), None),
    "M": (_nullable(_int), None),
    "bands": (_listof(_pair), [[1.0, 1.5], [1.5, 2.5], [1.0, 2.5]]),
    "kinds": (_listof(_choice("free", "steady")), ["free", "steady"]),
    "scale": (_number, 1.0),
}

SOLVE = {
    "etd_check": (_bool, True),
    "save_state": (_bool, False),
}

CALCULUS = {
    "n": (_int, 3),
    "resolutions": (_listof(_int), [16, 32]),
    "L": (_number, TWO_PI),
    "seed_count": (_int, 100),
    "bands": (_nullable(_listof(_pair)), None),
    "audits": (_listof(lambda p, v: v), REQUIRED),
}

AUDIT_COMMON = {
    "inequality": (_choice(*INEQUALITIES), REQUIRED),
    "n": (_nullable(_int), None),
    "resolutions": (_nullable(_listof(_int)), None),
}

AUDIT_FIELDS = {
    "KPV": ("s", "s1", "s2", "p", "q", "r"),
    "Product": ("s", "s1", "s2"),
    "UF1": ("alpha", "eps"),
    "UF2": ("alpha", "eps"),
    "UF3": ("alpha", "eps"),
    "Embedding": ("s",),
    "Interpolation": ("s_lo", "s_mid", "s_hi"),
}

SEMIGROUP = {
    "n": (_int, 3),
    "N": (_int, 16),
    "L": (_number, TWO_PI),
    "alpha": (_number, 1.0),
    "s": (_number, 0.0),
    "seed_count": (_int, 10),
    "bands": (_listof(_band), [[1.0, 1.5], [1.0, None], [2.0, None]]),
    "gamma_ratios": (_listof(_number), [0.5, 1.0, 2.0]),
    "t_min": (_number, 1e-3),
    "t_max": (_number, 10.0),
    "t_count": (_int, 200),
    "T_values": (_listof(_number), [0.1, 1.0, 10.0]),
    "M": (_int, 256),
}

SCALING = {
    "lambda": (_int, 2),
}

UNIQUENESS = {
    "eps": (_number, 0.25),
    "c_interp": (_nullable(_number), None),
}

SECTIONS = {
    "data": DATA,
    "constants": CONSTANTS,
    "solve": SOLVE,
    "calculus": CALCULUS,
    "semigroup": SEMIGROUP,
    "scaling": SCALING,
    "uniqueness": UNIQUENESS,
}


def _section(name, doc, schema):
    if not isinstance(doc, dict):
        raise ConfigError(name, "expected an object")
    unknown = sorted(set(doc) - set(schema))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown field")
    out = {}
    for key, (check, default) in schema.items():
        path = f"{name}.{key}"
        if key in doc:
            out[key] = check(path, doc[key])
        elif default is REQUIRED:
            raise ConfigError(path, "missing required field")
        else:
            out[key] = default
    return out


def _audit(path, doc):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    if "inequality" not in doc:
        raise ConfigError(f"{path}.inequality", "missing required field")
    kind = AUDIT_COMMON["inequality"][0](f"{path}.inequality", doc["inequality"])
    schema = dict(AUDIT_COMMON)
    schema.update({k: (_number, REQUIRED) for k in AUDIT_FIELDS[kind]})
    return _section(path, doc, schema)


def _check_ranges(out):
    c = out.get("constants")
    if c is not None:
        if c["source"] == "given":
            for k in ("k1", "k2", "k3"):
                if c[k] is None or not c[k] > 0:
                    raise ConfigError(f"constants.{k}", "a positive value is required when source is 'given'")
        if c["seed_count"] < 1:
            raise ConfigError("constants.seed_count", "must be >= 1")
        if not c["bands"]:
            raise ConfigError("constants.bands", "must not be empty")
    d = out.get("data")
    if d is not None and d["kind"] == "snapshot":
        for k in ("u0", "theta0"):
            if d[k] is None:
                raise ConfigError(f"data.{k}", "a snapshot path is required when kind is 'snapshot'")
    for name in ("calculus", "semigroup"):
        sec = out.get(name)
        if sec is not None and sec["seed_count"] < 1:
            raise ConfigError(f"{name}.seed_count", "must be >= 1")
    s = out.get("semigroup")
    if s is not None:
        if s["t_count"] < 1:
            raise ConfigError("semigroup.t_count", "must be >= 1")
        if not 0 < s["t_min"] <= s["t_max"]:
            raise ConfigError("semigroup.t_min", "need 0 < t_min <= t_max")


def parse_config(doc):
    """Validate and normalize a configuration mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "expected a JSON object at top level")
    unknown = sorted(set(doc) - set(SECTIONS) - {"solver"})
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    out = {}
    if "solver" in doc:
        # structure only; parameter ranges are checked when the SolverConfig
        # is built, and violations there are precondition errors
        out["solver"] = _section("solver", doc["solver"], SOLVER)
    for name, schema in SECTIONS.items():
        if name in doc:
            out[name] = _section(name, doc[name], schema)
    if "calculus" in out:
        out["calculus"]["audits"] = [_audit(f"calculus.audits[{i}]", a)
                                     for i, a in enumerate(out["calculus"]["audits"])]
    _check_ranges(out)
    return out


SOLVER = {
    "n": (_int, REQUIRED),
    "alpha": (_number, REQUIRED),
    "T": (_number, REQUIRED),
    "N": (_int, REQUIRED),
    "L": (_number, REQUIRED),
    "M": (_int, REQUIRED),
    "picard_tol": (_number, REQUIRED),
    "picard_max_iters": (_int, REQUIRED),
    "mode": (_str, REQUIRED),
}


def require(cfg, name):
    """Return section ``name`` or raise ConfigError when it is absent."""
    if name not in cfg:
        raise ConfigError(name, "missing required section")
    return cfg[name]


def solver_config(cfg):
    """Build the SolverConfig; range violations raise PreconditionError."""
    return SolverConfig.from_dict(require(cfg, "solver"))
