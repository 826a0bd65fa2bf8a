"""Scenario definition: parameters, inlet and target velocity profiles,
training-set sampling and the run configuration.

The parameter ``mu`` is the vector of inlet Reynolds numbers, one per inlet.
The inlet speed scales as ``nu * Re / R_in`` times a pulsatile waveform.
"""

from dataclasses import dataclass, fields, replace
import hashlib
import math

import numpy as np

from . import geometry as geo
from .fem import DirichletData, lift_dirichlet


class ConfigError(ValueError):
    """Invalid configuration value or malformed configuration file."""


@dataclass(frozen=True)
class ParameterPoint:
    """Inlet Reynolds numbers, one per inlet (``INLET_1``, ``INLET_2``, ...)."""

    re: tuple

    def __post_init__(self):
        object.__setattr__(self, "re", tuple(float(r) for r in np.atleast_1d(self.re)))
        if not self.re or not all(math.isfinite(r) for r in self.re):
            raise ConfigError(f"invalid Reynolds numbers {self.re}")

    def __len__(self):
        return len(self.re)

    def label(self):
        return "_".join(f"{r:g}" for r in self.re)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical, numerical and reduction settings.

    Units are part of the field names.  The defaults reproduce the single
    inlet-parameter scenario on the planar bifurcation with both inlets
    driven by the same Reynolds number.
    """

    nu_mm2_s: float = 3.6
    alpha: float = 1e-3
    T_s: float = 1.0
    dt_s: float = 0.01
    snapshot_stride: int = 5
    v_const_mm_s: float = 250.0
    n_train: int = 21
    seed: int = 12345
    eps_tol: float = 1e-10
    n_t_pod: int = 10
    n_max: int = 15
    n_supremizer: int = -1          # -1: as many supremizer modes as pressure modes
    re_min: float = 50.0
    re_max: float = 80.0
    n_params: int = 1               # 1: one Re shared by all inlets, 2: one per inlet
    energy_squared: bool = False
    density_g_mm3: float = 0.0      # 0: report WSS in kinematic units
    newton_tol: float = 1e-9
    newton_maxit: int = 25
    geometry_kind: str = "bifurcation_2d"
    inlet_radius_mm: float = 1.0
    branch_angle_rad: float = math.pi / 6
    branch_length_mm: float = 10.0
    outlet_length_mm: float = 10.0
    target_h_mm: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.dt_s > 0 or not self.T_s > 0:
            raise ConfigError("T_s and dt_s must be positive")
        n = self.T_s / self.dt_s
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"T_s / dt_s must be an integer, got {n}")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if not self.nu_mm2_s > 0:
            raise ConfigError("nu_mm2_s must be positive")
        if self.n_train < 1:
            raise ConfigError("n_train must be >= 1")
        if not self.re_min <= self.re_max:
            raise ConfigError("empty parameter domain: re_min > re_max")
        if self.n_params not in (1, 2):
            raise ConfigError("n_params must be 1 or 2")
        if not 0 < self.eps_tol < 1:
            raise ConfigError("eps_tol must lie in (0, 1)")

    @property
    def n_steps(self):
        return int(round(self.T_s / self.dt_s))

    @property
    def n_stored(self):
        return 1 + self.n_steps // self.snapshot_stride

    @property
    def geometry(self):
        return geo.GeometryParams(kind=self.geometry_kind, inlet_radius=self.inlet_radius_mm,
                                  branch_angle=self.branch_angle_rad,
                                  branch_length=self.branch_length_mm,
                                  outlet_length=self.outlet_length_mm,
                                  target_h=self.target_h_mm)

    def in_domain(self, mu):
        return all(self.re_min - 1e-12 <= r <= self.re_max + 1e-12 for r in mu.re)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def hash(self):
        """Short SHA-256 digest of the canonical text form."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def with_(self, **kw):
        return replace(self, **kw)


_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(name, raw, lineno):
    typ = _TYPES[name]
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {name} = {raw!r}") from None


def parse_config(text, extra=None):
    """Parse flat ``key = value`` text.  Unknown keys are rejected unless they
    appear in ``extra`` (a set of extra accepted keys), which are returned
    separately.  ``#`` starts a comment.
    """
    values, others = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in _TYPES:
            values[key] = _coerce(key, raw, lineno)
        elif extra is not None and key in extra:
            others[key] = raw
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        cfg = ScenarioConfig(**values)
    except ConfigError:
        raise
    return (cfg, others) if extra is not None else cfg


def load_config(path, extra=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), extra)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())


# --------------------------------------------------------------------------
# profiles

def waveform(t):
    """Pulsatile inflow modulation ``0.02 + 0.02 sin(pi t)``."""
    return 0.02 + 0.02 * np.sin(np.pi * np.asarray(t, dtype=float))


def expand_mu(mu, n_inlets):
    """Per-inlet Reynolds numbers; a single value drives every inlet."""
    re = mu.re
    if len(re) == 1:
        return re * n_inlets
    if len(re) != n_inlets:
        raise ConfigError(f"parameter has {len(re)} components for {n_inlets} inlets")
    return re


def inlet_shape(mesh, tag, X, tol=1e-8):
    """Unit inlet shape ``-(1/R_in)(1 - r^2/R_in^2) n_in`` at points ``X``.

    ``r`` is the in-plane distance from the inlet centroid.  Raises if a point
    is off the inlet plane.
    """
    c, n, R = mesh.inlets[tag]
    X = np.atleast_2d(X)
    d = X - c
    off = d @ n
    if np.any(np.abs(off) > tol * max(1.0, R)):
        raise ConfigError("inlet profile evaluated off the inlet boundary")
    inplane = d - off[:, None] * n
    r2 = np.einsum("ij,ij->i", inplane, inplane)
    mag = (1.0 - r2 / R ** 2) / R
    return -mag[:, None] * n[None, :]


def inlet_profile(mesh, mu, nu, t, X, tag=geo.INLET_1):
    """Inlet velocity ``-(nu Re / R_in)(1 - r^2/R_in^2) f(t) n_in`` (mm/s)."""
    tags = sorted(mesh.inlets)
    re = expand_mu(mu, len(tags))[tags.index(tag)]
    return nu * re * waveform(t) * inlet_shape(mesh, tag, X)


def inlet_lift_shapes(space):
    """Lift vectors ``L_i`` of the unit inlet shapes, one per inlet tag.

    The full lift at ``(t, mu)`` is ``sum_i nu Re_i f(t) L_i``.
    """
    mesh = space.mesh
    shapes = []
    for tag in sorted(mesh.inlets):
        data = DirichletData({tag: lambda X, t, _tag=tag: inlet_shape(mesh, _tag, X)})
        lift, _ = lift_dirichlet(space, data, 0.0)
        shapes.append(lift)
    return shapes


def lift_coefficients(mu, nu, t, n_inlets):
    return np.array([nu * r * float(waveform(t)) for r in expand_mu(mu, n_inlets)])


def dirichlet_data(mesh, mu, nu):
    """Boundary data for the state velocity: inlet profiles, zero wall."""
    vals = {}
    for tag in sorted(mesh.inlets):
        vals[tag] = (lambda X, t, _tag=tag: inlet_profile(mesh, mu, nu, t, X, _tag))
    vals[geo.WALL] = lambda X, t: np.zeros_like(np.atleast_2d(X))
    return DirichletData(vals)


def target_profile(cl, v_const, X):
    """Target velocity ``v_const (1 - r^2/R(s)^2)_+ t(s)`` at points ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, r, t, R, _ = geo.centerline_query(cl, X)
    mag = v_const * np.clip(1.0 - (r / R) ** 2, 0.0, None)
    return mag[:, None] * t


# --------------------------------------------------------------------------
# sampling

@dataclass(frozen=True)
class TrainingSet:
    points: tuple

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def array(self):
        return np.array([p.re for p in self.points])


def sample_training_set(cfg):
    """Uniform random samples in the parameter box plus its corners.

    When ``n_train >= 2**P`` the ``2**P`` corners are appended after
    ``n_train - 2**P`` uniform draws from ``numpy.random.default_rng(seed)``;
    otherwise all points are uniform draws.
    """
    P = cfg.n_params
    lo, hi = cfg.re_min, cfg.re_max
    if not lo <= hi:
        raise ConfigError("empty parameter domain")
    n_corner = 2 ** P if cfg.n_train >= 2 ** P else 0
    rng = np.random.default_rng(cfg.seed)
    draws = rng.uniform(lo, hi, size=(cfg.n_train - n_corner, P))
    corners = np.array(np.meshgrid(*[[lo, hi]] * P, indexing="ij")).reshape(P, -1).T
    pts = np.vstack([draws, corners[:n_corner]]) if n_corner else draws
    return TrainingSet(tuple(ParameterPoint(tuple(p)) for p in pts))
