"""Problem and report files, random test plants.

Problems and reports are JSON. Matrices are stored as lists of rows and
floats are written with Python's shortest round-trip representation, so
``load_problem(save_problem(p))`` reproduces every entry bit for bit.
Reports are written with sorted keys and carry no timestamps, so identical
inputs give byte-identical files.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CQLQGError
from .linalg import INTERLEAVED, LAYOUTS
from .model import ControllerParams, validate_plant

SCHEMA_VERSION = 1
MATRIX_NAMES = ("A", "B1", "B2", "C", "D", "C0", "D0")
DIM_NAMES = ("n", "m1", "m2", "p", "p0")


class ProblemParseError(CQLQGError):
    """The problem file is not well-formed JSON of the expected shape."""


class DimensionMismatch(CQLQGError):
    """Declared dimensions disagree with the matrix shapes."""


@dataclass(eq=False)
class ProblemFile:
    """A plant with optional initial parameters and solver overrides.

    ``matrices`` holds float arrays keyed by MATRIX_NAMES.
    """

    matrices: dict
    layout: str = INTERLEAVED
    initial: Optional[ControllerParams] = None
    config: dict = field(default_factory=dict)

    @property
    def dims(self):
        a, b1, b2, c, c0 = (self.matrices[k] for k in ("A", "B1", "B2", "C", "C0"))
        return {"n": a.shape[0], "m1": b1.shape[1], "m2": b2.shape[1], "p": c.shape[0],
                "p0": c0.shape[0]}

    def plant(self):
        """Validated PlantModel (raises ValidationError or ShapeError)."""
        return validate_plant(layout=self.layout, **self.matrices)

    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION, "dims": self.dims, "layout": self.layout,
             "matrices": {k: rows(self.matrices[k]) for k in MATRIX_NAMES}}
        if self.initial is not None:
            d["initial"] = params_to_dict(self.initial)
        if self.config:
            d["config"] = dict(self.config)
        return d

    @classmethod
    def from_plant(cls, plant, initial=None, config=None):
        return cls({k: v.copy() for k, v in plant.matrices().items()}, plant.layout, initial,
                   dict(config or {}))


def rows(m):
    """Nested list of Python floats, row-major."""
    return [[float(x) for x in r] for r in np.atleast_2d(np.asarray(m, dtype=float))]


def _matrix(value, name):
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemParseError(f"{name}: not a rectangular numeric array ({exc})") from None
    if a.ndim != 2:
        raise ProblemParseError(f"{name}: expected a list of rows, got {a.ndim} dimension(s)")
    return a


def params_to_dict(params):
    return {"R": rows(params.R), "b1": rows(params.b1), "b2": rows(params.b2)}


def params_from_dict(d):
    try:
        return ControllerParams(_matrix(d["R"], "initial.R"), _matrix(d["b1"], "initial.b1"),
                                _matrix(d["b2"], "initial.b2"))
    except KeyError as exc:
        raise ProblemParseError(f"initial parameters lack {exc}") from None


def problem_from_dict(d):
    if not isinstance(d, dict):
        raise ProblemParseError("problem must be a JSON object")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProblemParseError(f"unsupported schema_version {version!r}")
    try:
        mats = {k: _matrix(d["matrices"][k], k) for k in MATRIX_NAMES}
    except (KeyError, TypeError) as exc:
        raise ProblemParseError(f"missing matrix {exc}") from None
    layout = d.get("layout", INTERLEAVED)
    if layout not in LAYOUTS:
        raise ProblemParseError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    initial = params_from_dict(d["initial"]) if d.get("initial") is not None else None
    config = d.get("config") or {}
    if not isinstance(config, dict):
        raise ProblemParseError("config overrides must be a JSON object")
    problem = ProblemFile(mats, layout, initial, dict(config))
    declared = d.get("dims")
    if declared is not None:
        actual = problem.dims
        bad = [k for k in DIM_NAMES if k in declared and declared[k] != actual[k]]
        if bad:
            raise DimensionMismatch("declared dimensions disagree with matrices: "
                                    + ", ".join(f"{k}={declared[k]} vs {actual[k]}" for k in bad))
    return problem


def dumps(obj):
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def save_problem(problem, path):
    with open(path, "w") as fh:
        fh.write(dumps(problem.to_dict()))


def load_problem(path):
    """Read a ProblemFile; malformed content raises ProblemParseError."""
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"invalid JSON: {exc}") from None
    return problem_from_dict(d)


def problem_hash(problem):
    return hashlib.sha256(dumps(problem.to_dict()).encode()).hexdigest()


def random_plant(seed, n=2, m1=2, m2=2, p=2, p0=2, abscissa=-0.5):
    """Seeded random plant as a ProblemFile.

    Draws use numpy's PCG64 generator (``numpy.random.default_rng(seed)``)
    in the fixed order A, B1, B2, C, D, C0, D0, all standard normal.
    A is then shifted by a multiple of the identity so that its spectral
    abscissa equals ``abscissa``; D = [I 0] + 0.3 N and D0 = [I; 0] + 0.3 N
    are full rank with probability one.

    The default gives open-loop stable plants. A positive ``abscissa``
    gives open-loop unstable ones, which exclude the degenerate limits of
    the synthesis problem (see the README).
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a -= (np.max(np.linalg.eigvals(a).real) - abscissa) * np.eye(n)
    b1 = rng.standard_normal((n, m1))
    b2 = rng.standard_normal((n, m2))
    c = rng.standard_normal((p, n))
    d = np.eye(p, m1) + 0.3 * rng.standard_normal((p, m1))
    c0 = rng.standard_normal((p0, n))
    d0 = np.eye(p0, m2) + 0.3 * rng.standard_normal((p0, m2))
    plant = validate_plant(a, b1, b2, c, d, c0, d0)
    return ProblemFile.from_plant(plant)


# reports

def _clean(x):
    """JSON-ready copy: arrays to lists, numpy scalars to Python scalars."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def realization_to_dict(real):
    return {"a": rows(real.a), "b1": rows(real.b1), "b2": rows(real.b2), "c": rows(real.c)}


def synthesis_to_dict(report):
    return _clean({
        "status": report.status,
        "cost": report.cost,
        "initial_cost": report.initial_cost,
        "outer_iterations": report.outer_iterations,
        "iterations": [r.to_dict() for r in report.iterations],
        "params": params_to_dict(report.params),
        "realization": realization_to_dict(report.realization),
        "diagnostics": list(report.diagnostics),
        "attempts": report.attempts,
    })


def certificate_to_dict(cert):
    return _clean(cert._asdict())


def classical_to_dict(ctrl):
    return _clean({
        "cost": ctrl.cost,
        "control_riccati": rows(ctrl.Q1),
        "filter_riccati": rows(ctrl.P1),
        "control_residual": ctrl.control_residual,
        "filter_residual": ctrl.filter_residual,
        "realization": realization_to_dict(ctrl.realization),
    })


def write_report(report, path):
    with open(path, "w") as fh:
        fh.write(dumps(_clean(report)))


def read_report(path):
    with open(path) as fh:
        return json.load(fh)
