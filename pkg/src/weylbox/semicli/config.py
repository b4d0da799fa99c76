"""Experiment configuration: an INI-style document with sections.

    [operator]   kind, theorem, mu_rule, mu | mu_hbar | mu_list, wilson
    [fields]     B (vector expression), W (or V for Dirac)
    [domain]     lower, upper, points, path (separable | full), points2d, points_z
    [sweep]      hbar (strictly decreasing list), gamma, lam
    [tessellation] r, rho (optional)
    [output]     dir, format, prefix
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass

from ..errors import ParseError, ValidationError
from .expr import FieldExpression

THEOREMS = {
    # name: (operator family, divide by (mu hbar + 1), lambda must be > 0)
    "count": ("pauli", False, False),
    "count2": ("pauli", False, True),
    "new3": ("pauli", False, False),
    "5.6": ("pauli", True, True),
    "4.1": ("dirac", False, True),
    "6": ("dirac", True, True),
}
MU_RULES = ("fixed", "product", "free")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    theorem: str
    B: FieldExpression
    W: FieldExpression
    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    hbar: tuple[float, ...]
    mu_rule: str = "fixed"
    mu: float = 1.0
    mu_hbar: float = 1.0
    mu_list: tuple[float, ...] = ()
    gamma: tuple[float, ...] = (0.0,)
    lam: tuple[float, ...] = (0.0,)
    path: str = "separable"
    points: tuple[int, int, int] = (24, 24, 24)
    points2d: int = 64
    points_z: int = 0
    wilson: float = 1.0
    tess_r: float | None = None
    rho: float | None = None
    out_dir: str = "."
    fmt: str = "csv"
    prefix: str = "sweep"

    @property
    def normalized(self) -> bool:
        return THEOREMS[self.theorem][1]

    def mus(self, hbar: float) -> tuple[float, ...]:
        if self.mu_rule == "fixed":
            return (self.mu,)
        if self.mu_rule == "product":
            return (self.mu_hbar / hbar,)
        return self.mu_list

    def echo(self) -> dict:
        d = asdict(self)
        d["B"] = self.B.text
        d["W"] = self.W.text
        return d


def _strip(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        v = v[1:-1]
    return v


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            cur = m.group(1).strip().lower()
            continue
        if cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def _floats(name: str, v: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in re.split(r"[,\s]+", _strip(v)) if x)
    except ValueError:
        raise ValidationError(name, f"expected a list of numbers, got {v!r}") from None


def _number(name: str, v: str, kind=float):
    try:
        return kind(_strip(v))
    except ValueError:
        raise ValidationError(name, f"expected a number, got {v!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("missing section header", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", line=line) from None
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return default

    def expr(section, key, default):
        raw = get(section, key)
        if raw is None:
            if default is None:
                raise ValidationError(f"{section}.{key}", "required")
            raw = default
        try:
            return FieldExpression.parse(_strip(raw))
        except ParseError as exc:
            raise ParseError(f"{section}.{key}: {exc.message}", line=_line_of(text, section, key), column=exc.column) from None

    kind = _strip(get("operator", "kind", "pauli")).lower()
    if kind not in ("pauli", "dirac", "schrodinger"):
        raise ValidationError("operator.kind", f"unsupported kind {kind!r}")
    theorem = _strip(get("operator", "theorem", "count" if kind != "dirac" else "4.1")).lower()
    if theorem not in THEOREMS:
        raise ValidationError("operator.theorem", f"unknown theorem {theorem!r}; choose from {sorted(THEOREMS)}")
    family = THEOREMS[theorem][0]
    if (family == "dirac") != (kind == "dirac"):
        raise ValidationError("operator.theorem", f"theorem {theorem} does not apply to kind {kind}")
    mu_rule = _strip(get("operator", "mu_rule", "free" if theorem == "5.6" else "fixed")).lower()
    if mu_rule not in MU_RULES:
        raise ValidationError("operator.mu_rule", f"choose from {MU_RULES}")

    B = expr("fields", "B", "(0,0,0)")
    if not B.is_vector:
        raise ValidationError("fields.B", "B must be a vector expression (b1, b2, b3)")
    W = expr("fields", "V" if kind == "dirac" and cp.has_option("fields", "V") else "W", "0")
    if W.is_vector:
        raise ValidationError("fields.W", "the potential must be a scalar expression")

    lower = _floats("domain.lower", get("domain", "lower", "0,0,0"))
    upper = _floats("domain.upper", get("domain", "upper", "1,1,1"))
    if len(lower) != 3 or len(upper) != 3:
        raise ValidationError("domain", "lower and upper need three coordinates")
    if any(u <= l for l, u in zip(lower, upper)):
        raise ValidationError("domain.upper", "upper must exceed lower componentwise")
    points = tuple(int(x) for x in _floats("domain.points", get("domain", "points", "24,24,24")))
    if len(points) == 1:
        points = points * 3
    if len(points) != 3 or min(points) < 3:
        raise ValidationError("domain.points", "need three counts, each at least 3")
    path = _strip(get("domain", "path", "separable" if kind == "pauli" else "full")).lower()
    if path not in ("separable", "full"):
        raise ValidationError("domain.path", "choose separable or full")
    if path == "separable" and kind != "pauli":
        raise ValidationError("domain.path", "the separable path is only available for pauli")

    hbar = _floats("sweep.hbar", get("sweep", "hbar", "0.2,0.1"))
    if not hbar or any(h <= 0 for h in hbar):
        raise ValidationError("sweep.hbar", "hbar values must be positive")
    if any(b >= a for a, b in zip(hbar, hbar[1:])):
        raise ValidationError("sweep.hbar", "the hbar ladder must be strictly decreasing")
    gamma = _floats("sweep.gamma", get("sweep", "gamma", "0"))
    lam = _floats("sweep.lam", get("sweep", "lam", "0"))
    if any(g < 0 for g in gamma):
        raise ValidationError("sweep.gamma", "gamma must be >= 0")
    if THEOREMS[theorem][2] and any(l <= 0 for l in lam):
        raise ValidationError("sweep.lam", f"theorem {theorem} needs lambda > 0")
    if kind == "dirac":
        if any(not 0 < l < 1 for l in lam):
            raise ValidationError("sweep.lam", "Dirac gap counts need lambda in (0, 1)")
        if any(g != 0 for g in gamma):
            raise ValidationError("sweep.gamma", "Dirac sweeps support gamma = 0 only")

    mu = _number("operator.mu", get("operator", "mu", "1"))
    mu_hbar = _number("operator.mu_hbar", get("operator", "mu_hbar", "1"))
    mu_list = _floats("operator.mu_list", get("operator", "mu_list", "")) if get("operator", "mu_list") else ()
    if mu_rule == "free" and not mu_list:
        raise ValidationError("operator.mu_list", "the free rule needs a list of mu values")
    if min((mu, mu_hbar) + mu_list) < 0:
        raise ValidationError("operator.mu", "mu must be nonnegative")

    tess_r = get("tessellation", "r")
    rho = get("tessellation", "rho")
    fmt = _strip(get("output", "format", "csv")).lower()
    if fmt not in ("csv", "json", "both"):
        raise ValidationError("output.format", "choose csv, json or both")

    return ExperimentConfig(
        kind=kind,
        theorem=theorem,
        B=B,
        W=W,
        lower=lower,
        upper=upper,
        hbar=hbar,
        mu_rule=mu_rule,
        mu=mu,
        mu_hbar=mu_hbar,
        mu_list=mu_list,
        gamma=gamma,
        lam=lam,
        path=path,
        points=points,
        points2d=_number("domain.points2d", get("domain", "points2d", "64"), int),
        points_z=_number("domain.points_z", get("domain", "points_z", "0"), int),
        wilson=_number("operator.wilson", get("operator", "wilson", "1")),
        tess_r=None if tess_r is None else _number("tessellation.r", tess_r),
        rho=None if rho is None else _number("tessellation.rho", rho),
        out_dir=_strip(get("output", "dir", ".")),
        fmt=fmt,
        prefix=_strip(get("output", "prefix", "sweep")),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
