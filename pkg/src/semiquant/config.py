"""Experiment configuration files.

Format: ``[section]`` headers followed by ``key = value`` lines.  ``#`` starts
a comment; blank lines are ignored.  Every section and key must appear in
:data:`SCHEMA`; anything else is rejected with its line number.

Example::

    [geometry]
    factors = 1
    twists = 0

    [hamiltonian]
    preset = rotation

    [run]
    p = 10..50
    checks = rrh, spectrum

Value syntax
------------
* numbers accept ``sqrt(x)``; ``inf`` is allowed where noted;
* lists are comma separated;
* p-grids are ``a..b`` (step 1), ``a..b step s`` or an explicit list;
* points are ``u:theta`` per factor, factors joined by ``/`` and points by
  ``;`` (``u = 1/(1+|z|^2)``, ``theta = arg z``).

The only environment variable consulted anywhere is the cache directory
(``SEMIQUANT_CACHE``), and only when ``--cache`` is not given.
"""
from dataclasses import dataclass, field

import numpy as np

from .phase_space.hamiltonian import eval_number

DEFAULT_SEED = 20240611

CHECK_NAMES = ("rrh", "spectrum", "invariants", "kato", "poisson", "weyl", "orbit", "a0",
               "b0", "kernel_decay", "window_decay", "coherent", "bochner")

DEFAULT_TOLERANCES = {
    "rrh": 1e-12,               # relative; dimensions are integers
    "spectrum": 1e-10,
    "hermitian": 1e-10,
    "unitary": 1e-9,
    "group_law": 1e-9,
    "trace_formula": 1e-9,
    "symplectic": 1e-8,
    "energy": 1e-8,
    "action_additivity": 1e-8,
    "kato_order": 0.9,          # minimum observed order
    "kato_defect": 5e-3,        # maximum defect at the largest step count
    "poisson": 1e-8,
    "weyl": 0.2,                # relative spread of p (Tr - Weyl)
    "orbit": 0.05,
    "a0": 0.02,
    "b0": 0.05,
    "decay_rate": 3.0,          # fitted exponent must be below -decay_rate
    "coherent_peak": 3.0,       # peak within coherent_peak / sqrt(p)
    "coherent_mass": 0.01,
    "bochner_gap": 1.0,         # next eigenvalue >= bochner_gap * 2 pi n p
    "bochner_zero": 1e-8,       # near-zero threshold relative to 4 pi p
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``field`` locate the problem."""

    def __init__(self, msg, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)
        self.line = line
        self.field = field


# -- value codecs ---------------------------------------------------------------------

def _fmt_float(v):
    v = float(v)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _parse_float(text):
    t = text.strip().lower()
    if t in ("inf", "+inf"):
        return float("inf")
    if t == "-inf":
        return float("-inf")
    return float(eval_number(t))


def _parse_int(text):
    v = _parse_float(text)
    if not float(v).is_integer():
        raise ValueError(f"expected an integer, got {text.strip()!r}")
    return int(v)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text.strip()!r}")


def _split(text, sep=","):
    return [s.strip() for s in text.split(sep) if s.strip()]


def parse_pgrid(text):
    """``a..b``, ``a..b step s`` or ``p1, p2, ...`` -> tuple of ints."""
    t = text.strip()
    if ".." in t:
        rng, _, step = t.partition("step")
        a, _, b = rng.partition("..")
        a, b = _parse_int(a), _parse_int(b)
        s = _parse_int(step) if step.strip() else 1
        if s <= 0 or b < a:
            raise ValueError("p-range must be increasing with a positive step")
        ps = tuple(range(a, b + 1, s))
    else:
        ps = tuple(_parse_int(v) for v in _split(t))
    if not ps or min(ps) < 1:
        raise ValueError("p values must be positive integers")
    if len(set(ps)) != len(ps):
        raise ValueError("duplicate p values")
    return ps


def format_pgrid(ps):
    ps = tuple(ps)
    if len(ps) >= 3:
        steps = {b - a for a, b in zip(ps, ps[1:])}
        if len(steps) == 1 and ps[1] > ps[0]:
            s = steps.pop()
            return f"{ps[0]}..{ps[-1]}" + (f" step {s}" if s != 1 else "")
    return ", ".join(str(p) for p in ps)


def parse_points(text):
    """``u:theta[/u:theta...]`` separated by ``;`` -> tuple of ((u...), (theta...))."""
    pts = []
    for item in _split(text, ";"):
        us, ths = [], []
        for fac in item.split("/"):
            u, sep, th = fac.partition(":")
            if not sep:
                raise ValueError(f"point factor {fac.strip()!r} is not of the form u:theta")
            u, th = _parse_float(u), _parse_float(th)
            if not 0.0 <= u <= 1.0:
                raise ValueError("u must lie in [0, 1]")
            us.append(u)
            ths.append(th)
        pts.append((tuple(us), tuple(ths)))
    return tuple(pts)


def format_points(pts):
    return "; ".join("/".join(f"{_fmt_float(u)}:{_fmt_float(t)}" for u, t in zip(us, ths))
                     for us, ths in pts)


_CODECS = {
    "int": (_parse_int, str),
    "float": (_parse_float, _fmt_float),
    "str": (lambda s: s.strip(), str),
    "bool": (_parse_bool, lambda b: "true" if b else "false"),
    "ints": (lambda s: tuple(_parse_int(v) for v in _split(s)),
             lambda v: ", ".join(str(x) for x in v)),
    "names": (lambda s: tuple(_split(s)), lambda v: ", ".join(v)),
    "pgrid": (parse_pgrid, format_pgrid),
    "points": (parse_points, format_points),
}

# section -> key -> (type, default); a default of ``None`` means "not set".
SCHEMA = {
    "geometry": {"factors": ("int", 1), "twists": ("ints", None)},
    "hamiltonian": {"preset": ("str", "rotation"), "lift": ("str", "auto")},
    "window": {"center": ("float", 0.0), "half_width": ("float", 1.0),
               "order": ("float", float("inf")), "beta": ("float", 1.0)},
    "run": {"level": ("float", None), "p": ("pgrid", (10, 20, 30, 40, 50)),
            "time": ("float", 0.3), "steps": ("ints", (250, 500, 1000, 2000)),
            "checks": ("names", ()), "points": ("points", ()),
            "far_points": ("points", ()), "offset": ("float", 0.3),
            "extrapolation_order": ("int", 3), "fit_orders": ("int", 3),
            "bochner_levels": ("int", 2), "seed": ("int", DEFAULT_SEED),
            "samples": ("int", 20)},
    "output": {"out": ("str", "results"), "cache": ("str", None),
               "matrices": ("bool", False)},
    "tolerances": {name: ("float", val) for name, val in DEFAULT_TOLERANCES.items()},
}


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``values`` holds every schema entry (defaults filled in); ``explicit``
    records which (section, key) pairs were written in the source, so that
    formatting reproduces the same file content.
    """

    values: dict
    explicit: tuple = ()
    source: str = "<string>"
    lines: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, key):
        section, _, name = key.partition(".")
        return self.values[section][name]

    def get(self, section, key):
        return self.values[section][key]

    # convenience accessors ------------------------------------------------------------
    @property
    def factors(self):
        return self.get("geometry", "factors")

    @property
    def twists(self):
        tw = self.get("geometry", "twists")
        return tuple(tw) if tw is not None else (0,) * self.factors

    @property
    def p_grid(self):
        return self.get("run", "p")

    @property
    def checks(self):
        return self.get("run", "checks")

    @property
    def level(self):
        return self.get("run", "level")

    @property
    def seed(self):
        return self.get("run", "seed")

    def tolerance(self, name):
        return self.values["tolerances"][name]

    def geometry(self):
        from .phase_space.geometry import ModelGeometry
        return ModelGeometry(self.factors, self.twists)

    def hamiltonian(self):
        from .phase_space.hamiltonian import parse_preset
        return parse_preset(self.get("hamiltonian", "preset"), self.factors)

    def window(self):
        from .semiclassics.window import WindowFunction
        w = self.values["window"]
        return WindowFunction(w["center"], w["half_width"], w["order"], w["beta"])

    @property
    def lift(self):
        lift = self.get("hamiltonian", "lift")
        return None if lift == "auto" else lift

    def chart_points(self, key="points"):
        from .phase_space.orbits import point_from_u_theta
        return [point_from_u_theta(list(us), list(ths)) for us, ths in self.get("run", key)]

    def line_of(self, section, key=None):
        return self.lines.get((section, key))

    def to_text(self):
        """Canonical text; ``parse_config(cfg.to_text()) == cfg``."""
        out = []
        for section, keys in SCHEMA.items():
            names = [k for k in keys if (section, k) in self.explicit]
            if not names:
                continue
            if out:
                out.append("")
            out.append(f"[{section}]")
            for k in names:
                kind = keys[k][0]
                out.append(f"{k} = {_CODECS[kind][1](self.values[section][k])}")
        return "\n".join(out) + "\n"

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.to_text() == other.to_text() and _values_equal(self.values, other.values)


def _values_equal(a, b):
    return all(a[s][k] == b[s][k] or (isinstance(a[s][k], float) and np.isnan(a[s][k])
                                      and np.isnan(b[s][k]))
               for s in SCHEMA for k in SCHEMA[s])


def parse_config(text, source="<string>"):
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With the offending line number and ``section.key`` field.
    """
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    explicit, lines = [], {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, section)
            lines[(section, None)] = lineno
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError("expected 'key = value'", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno, key)
        fname = f"{section}.{key}"
        if key not in SCHEMA[section]:
            raise ConfigError("unknown key", lineno, fname)
        if (section, key) in explicit:
            raise ConfigError("duplicate key", lineno, fname)
        kind = SCHEMA[section][key][0]
        try:
            values[section][key] = _CODECS[kind][0](val)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, fname) from None
        explicit.append((section, key))
        lines[(section, key)] = lineno
    cfg = ExperimentConfig(values, tuple(explicit), source, lines)
    validate(cfg)
    return cfg


def validate(cfg):
    """Semantic checks beyond the per-value syntax."""
    def fail(msg, section, key):
        raise ConfigError(msg, cfg.line_of(section, key), f"{section}.{key}")

    if cfg.factors < 1:
        fail("factors must be at least 1", "geometry", "factors")
    tw = cfg.get("geometry", "twists")
    if tw is not None and len(tw) != cfg.factors:
        fail(f"expected {cfg.factors} twists, got {len(tw)}", "geometry", "twists")
    try:
        f = cfg.hamiltonian()
    except ValueError as exc:
        fail(str(exc), "hamiltonian", "preset")
    if f.factors != cfg.factors:
        fail(f"preset acts on {f.factors} factor(s), geometry has {cfg.factors}",
             "hamiltonian", "preset")
    if cfg.get("hamiltonian", "lift") not in ("auto", "kostant", "metaplectic"):
        fail("lift must be auto, kostant or metaplectic", "hamiltonian", "lift")
    try:
        cfg.window()
    except ValueError as exc:
        fail(str(exc), "window", "half_width")
    for name in cfg.checks:
        if name not in CHECK_NAMES:
            fail(f"unknown check {name!r} (known: {', '.join(CHECK_NAMES)})", "run", "checks")
    for key in ("points", "far_points"):
        for us, _ in cfg.get("run", key):
            if len(us) != cfg.factors:
                fail(f"points need {cfg.factors} factor(s)", "run", key)
    if any(s < 1 for s in cfg.get("run", "steps")):
        fail("step counts must be positive", "run", "steps")
    if cfg.get("run", "extrapolation_order") < 1:
        fail("extrapolation order must be at least 1", "run", "extrapolation_order")
    if cfg.get("run", "samples") < 1:
        fail("samples must be positive", "run", "samples")
    for name, val in cfg.values["tolerances"].items():
        if not (val > 0 and np.isfinite(val)):
            fail("tolerances must be positive and finite", "tolerances", name)
    return cfg


def load_config(path):
    """Read and parse a configuration file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, str(path))
