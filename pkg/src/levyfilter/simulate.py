"""Coupled-jump simulation of the signal/observation pair.

The observation is driven by a Brownian motion plus the second jump
component; the signal by a compensated symmetric jump process (small jumps
cut at eps) plus the first jump component.  Jumps are generated
observation-first: marks z2 arrive as a compound Poisson stream, and each
signal co-jump z1 is drawn from the conditional law given z2, mirroring
the conditioning that the density evolution consumes.

Jump streams are layered over dyadic mark annuli with per-annulus
substreams, so truncation refinements share their coarse jumps (common
random numbers) and a path is a bit-for-bit function of (seed, model, dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .copulas import (
    ClaytonCopula,
    CompleteDependenceCopula,
    IndependenceCopula,
    LevyCopula,
    conditional_law,
    conditional_quantile_bulk,
)
from .errors import DomainError, SimulationError
from .measures import LevyMeasure, TemperedStableMeasure, truncated_mass

CSV_HEADER = "t,X,Y,Yc,dW2,jump_flag,z2,z1"


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------


@dataclass
class DriftSpec:
    """State drift b(x): none, constant, or affine a + b x."""

    kind: str = "none"  # "none" | "const" | "linear"
    a: float = 0.0
    b: float = 0.0

    def __call__(self, x):
        if self.kind == "none":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "const":
            return np.full_like(np.asarray(x, dtype=float), self.a)
        return self.a + self.b * np.asarray(x, dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.kind in ("none", "const")

    @property
    def constant_value(self) -> float:
        return self.a if self.kind == "const" else 0.0


@dataclass
class SensorSpec:
    """Observation sensor g(x); bounded and twice differentiable by contract.

    ``delta_g`` declares the Sobolev regularity used by the well-posedness
    checker (a Gaussian bump lies in every H^s).
    """

    kind: str = "gauss_bump"  # "zero" | "const" | "linear" | "gauss_bump"
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    delta_g: float = 2.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "const":
            return np.full_like(x, self.amplitude)
        if self.kind == "linear":
            return self.amplitude * x
        u = (x - self.center) / self.width
        return self.amplitude * np.exp(-u * u)

    def sup_on(self, half_width: float, n: int = 4096) -> float:
        grid = np.linspace(-half_width, half_width, n)
        return float(np.max(np.abs(self(grid))))


@dataclass
class X0Law:
    """Initial state law: Gaussian or a tabulated density."""

    kind: str = "gaussian"
    mean: float = 0.0
    sd: float = 1.0
    x_nodes: Optional[np.ndarray] = None
    pdf_values: Optional[np.ndarray] = None

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            z = (x - self.mean) / self.sd
            return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))
        vals = np.interp(x, self.x_nodes, self.pdf_values, left=0.0, right=0.0)
        return vals

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.sd, size)
        # inverse CDF on the tabulated density
        dx = np.diff(self.x_nodes)
        mids = 0.5 * (self.pdf_values[1:] + self.pdf_values[:-1])
        cdf = np.concatenate([[0.0], np.cumsum(mids * dx)])
        cdf /= cdf[-1]
        return np.interp(rng.random(size), cdf, self.x_nodes)

    def mass_inside(self, half_width: float) -> float:
        if self.kind == "gaussian":
            from scipy.stats import norm

            return float(
                norm.cdf((half_width - self.mean) / self.sd)
                - norm.cdf((-half_width - self.mean) / self.sd)
            )
        inside = (self.x_nodes >= -half_width) & (self.x_nodes <= half_width)
        total = np.trapezoid(self.pdf_values, self.x_nodes)
        if not np.any(inside):
            return 0.0
        return float(np.trapezoid(self.pdf_values[inside], self.x_nodes[inside]) / total)


@dataclass
class L0Spec:
    """State-driving compensated pure-jump noise; symmetric tempered stable."""

    kind: str = "tempered"  # "tempered" | "none"
    alpha: float = 1.5

    def __post_init__(self):
        if self.kind == "tempered" and not 1.0 < self.alpha < 2.0:
            raise DomainError("stability index of the state noise must lie in (1, 2)")

    def measure(self) -> Optional[LevyMeasure]:
        if self.kind == "none":
            return None
        return TemperedStableMeasure(self.alpha, support="symmetric")


@dataclass
class ModelSpec:
    """Full filtering model: dynamics, sensor, jump measures, coupling."""

    drift: DriftSpec
    sensor: SensorSpec
    nu1: LevyMeasure
    nu2: LevyMeasure
    copula: LevyCopula
    l0: L0Spec
    eps: float
    x0: X0Law
    # declared regularity metadata consumed by the well-posedness checker
    rho: float = 0.5
    rho0: float = 0.0

    def __post_init__(self):
        if self.eps <= 0 and (
            self.nu1.activity == "sigma-finite" or self.nu2.activity == "sigma-finite"
        ):
            raise DomainError("sigma-finite jump measures require a positive cutoff")
        if self.eps < 0:
            raise DomainError("cutoff must be nonnegative")

    def validate_sensor(self, half_width: float = 20.0) -> float:
        sup = self.sensor.sup_on(half_width)
        if not np.isfinite(sup):
            raise DomainError("sensor unbounded on the solver domain")
        return sup


@dataclass
class JumpEvents:
    """Ordered coupled jump events on [0, T]."""

    t: np.ndarray
    z2: np.ndarray  # observation jump sizes (NaN for signal-only events)
    z1: np.ndarray  # coupled signal jumps (NaN for observation-only events)

    def __len__(self):
        return len(self.t)


@dataclass
class PathRecord:
    """One simulated realization of the pair (X, Y) on a uniform grid."""

    dt: float
    times: np.ndarray
    dW2: np.ndarray
    events: JumpEvents
    X: np.ndarray
    Y: np.ndarray
    Yc: np.ndarray
    seed: int

    def to_csv(self, path: str) -> None:
        """Serialize with 17 significant digits; one row per grid point.

        Event rows carry the jump columns of the event applied in the step
        ending at that time (empty when none).
        """
        n = len(self.times)
        ev_by_step = {}
        for te, a, b in zip(self.events.t, self.events.z2, self.events.z1):
            k = min(int(np.ceil(te / self.dt - 1e-12)), n - 1)
            ev_by_step.setdefault(k, []).append((a, b))
        lines = [CSV_HEADER]
        for i in range(n):
            dw = self.dW2[i - 1] if i > 0 else 0.0
            evs = ev_by_step.get(i, [])
            flag = 1 if evs else 0
            z2s = ";".join(_fmt(a) for a, _ in evs if np.isfinite(a))
            z1s = ";".join(_fmt(b) for _, b in evs if np.isfinite(b))
            lines.append(
                ",".join(
                    [
                        _fmt(self.times[i]),
                        _fmt(self.X[i]),
                        _fmt(self.Y[i]),
                        _fmt(self.Yc[i]),
                        _fmt(dw),
                        str(flag),
                        z2s,
                        z1s,
                    ]
                )
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path: str) -> "PathRecord":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise DomainError(f"unexpected path header {header!r}")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
        times = np.array([float(r[0]) for r in rows])
        X = np.array([float(r[1]) for r in rows])
        Y = np.array([float(r[2]) for r in rows])
        Yc = np.array([float(r[3]) for r in rows])
        dW2 = np.array([float(r[4]) for r in rows])[1:]
        dt = float(times[1] - times[0])
        ts, z2s, z1s = [], [], []
        for i, r in enumerate(rows):
            if r[5] == "1":
                for a, b in zip(r[6].split(";"), r[7].split(";")):
                    ts.append(times[i])
                    z2s.append(float(a) if a else math.nan)
                    z1s.append(float(b) if b else math.nan)
        events = JumpEvents(np.array(ts), np.array(z2s), np.array(z1s))
        return PathRecord(
            dt=dt, times=times, dW2=dW2, events=events, X=X, Y=Y, Yc=Yc, seed=-1
        )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# Substream layout
# ---------------------------------------------------------------------------

_ROLE_X0 = 0
_ROLE_W2 = 1
_ROLE_L0 = 2  # + annulus index * 10
_ROLE_MARKS = 3  # + annulus index * 10
_ROLE_SOLO = 4  # independent signal-jump stream (independence coupling)


def _rng_for(seed: int, role: int, annulus: int = 0) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(role + 10 * annulus,))
    )


def _annuli_from_levels(eps_levels) -> list:
    """Mark annuli (lo, hi) for nested truncations; hi=inf for the coarsest."""
    levels = sorted(set(float(e) for e in eps_levels), reverse=True)
    bounds = [math.inf] + levels
    return [(bounds[i + 1], bounds[i]) for i in range(len(levels))]


def _annulus_stream(
    m: LevyMeasure, lo: float, hi: float, T: float, rng: np.random.Generator
):
    """Poisson stream of jumps with one-sided magnitude in (lo, hi]."""
    u_lo = float(m.tail_exact(lo))
    u_hi = 0.0 if math.isinf(hi) else float(m.tail_exact(hi))
    rate = u_lo - u_hi
    if m.support == "symmetric":
        rate *= 2.0
    n = rng.poisson(rate * T)
    t = np.sort(rng.uniform(0.0, T, n))
    u = u_hi + (u_lo - u_hi) * rng.random(n)
    z = m.inverse_tail_exact(np.maximum(u, 1e-300), extrapolate=True)
    z = np.clip(z, lo, None)
    if m.support == "symmetric":
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        z = z * sign
    uz1 = rng.random(n)  # conditional-draw uniforms, reused across levels
    return t, z, uz1


# ---------------------------------------------------------------------------
# Jump simulation
# ---------------------------------------------------------------------------


def simulate_coupled_jumps(
    model: ModelSpec,
    T: float,
    seed: int,
    eps_levels=None,
) -> dict:
    """Simulate the coupled jump events for each truncation level.

    Returns {eps: JumpEvents}.  Marks z2 arrive at rate nu2({z > eps});
    each is paired with a signal jump from the conditional law (common
    random numbers across levels: shared annuli reuse times, marks and the
    conditional-draw uniforms).  Under independence the signal stream is
    generated separately and carries no marks.
    """
    if T <= 0:
        raise DomainError("horizon must be positive")
    levels = eps_levels if eps_levels is not None else [model.eps]
    annuli = _annuli_from_levels(levels)

    per_annulus = []
    for idx, (lo, hi) in enumerate(annuli):
        rng = _rng_for(seed, _ROLE_MARKS, idx)
        per_annulus.append(_annulus_stream(model.nu2, lo, hi, T, rng))

    independence = isinstance(model.copula, IndependenceCopula)
    solo_by_annulus = []
    if independence:
        for idx, (lo, hi) in enumerate(annuli):
            rng = _rng_for(seed, _ROLE_SOLO, idx)
            solo_by_annulus.append(_annulus_stream(model.nu1, lo, hi, T, rng))

    out = {}
    for eps in sorted(set(float(e) for e in levels), reverse=True):
        ts, z2s, u1s = [], [], []
        for (lo, hi), (t, z, u) in zip(annuli, per_annulus):
            if lo >= eps - 1e-15:
                ts.append(t)
                z2s.append(z)
                u1s.append(u)
        t = np.concatenate(ts) if ts else np.empty(0)
        z2 = np.concatenate(z2s) if z2s else np.empty(0)
        u1 = np.concatenate(u1s) if u1s else np.empty(0)
        order = np.argsort(t, kind="stable")
        t, z2, u1 = t[order], z2[order], u1[order]

        if independence:
            z1 = np.full_like(z2, math.nan)
            st, sz = [], []
            for (lo, hi), (tt, zz, _) in zip(annuli, solo_by_annulus):
                if lo >= eps - 1e-15:
                    st.append(tt)
                    sz.append(zz)
            st = np.concatenate(st) if st else np.empty(0)
            sz = np.concatenate(sz) if sz else np.empty(0)
            t_all = np.concatenate([t, st])
            z2_all = np.concatenate([z2, np.full_like(st, math.nan)])
            z1_all = np.concatenate([z1, sz])
            order = np.argsort(t_all, kind="stable")
            out[eps] = JumpEvents(t_all[order], z2_all[order], z1_all[order])
        else:
            if len(z2):
                z1 = np.asarray(
                    conditional_quantile_bulk(model.copula, model.nu1, model.nu2, z2, u1)
                )
            else:
                z1 = np.empty(0)
            out[eps] = JumpEvents(t, z2, z1)
    return out


def simulate_L0(
    model: ModelSpec,
    T: float,
    dt: float,
    seed: int,
    eps_levels=None,
) -> dict:
    """Per-step increments of the eps-truncated compensated state noise.

    Returns {eps: increments array of length round(T/dt)}.  The compensator
    of the symmetric specification vanishes; the drift correction is kept
    in the code path for one-sided generality.
    """
    n_steps = _n_steps(T, dt)
    levels = eps_levels if eps_levels is not None else [model.eps]
    m0 = model.l0.measure()
    if m0 is None:
        return {float(e): np.zeros(n_steps) for e in levels}

    annuli = _annuli_from_levels(levels)
    per_annulus = []
    for idx, (lo, hi) in enumerate(annuli):
        rng = _rng_for(seed, _ROLE_L0, idx)
        t, z, _ = _annulus_stream(m0, lo, hi, T, rng)
        per_annulus.append((lo, t, z))

    out = {}
    for eps in sorted(set(float(e) for e in levels), reverse=True):
        incs = np.zeros(n_steps)
        comp = 0.0
        for lo, t, z in per_annulus:
            if lo >= eps - 1e-15:
                steps = np.minimum((t / dt).astype(int), n_steps - 1)
                np.add.at(incs, steps, z)
                comp += _compensator_rate(m0, lo)
        incs -= comp * dt
        out[eps] = incs
    return out


def _compensator_rate(m: LevyMeasure, lo: float) -> float:
    # int_{lo < |z| <= 1} z nu(dz); zero by symmetry for symmetric measures
    if m.support == "symmetric":
        return 0.0
    if lo >= 1.0:
        return 0.0
    from ._quad import quad_split

    return quad_split(lambda z: z * np.asarray(m.density(z)), lo, 1.0)


def _n_steps(T: float, dt: float) -> int:
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise DomainError(f"dt={dt} does not divide the horizon T={T}")
    return int(n)


# ---------------------------------------------------------------------------
# State / observation integration
# ---------------------------------------------------------------------------


def simulate_state(
    model: ModelSpec,
    T: float,
    dt: float,
    events: JumpEvents,
    l0_incs: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Euler-Maruyama for the state; jumps applied at the end of their step."""
    n = _n_steps(T, dt)
    jump_per_step = np.zeros(n)
    sig = np.isfinite(events.z1)
    if np.any(sig):
        steps = np.minimum((events.t[sig] / dt).astype(int), n - 1)
        np.add.at(jump_per_step, steps, events.z1[sig])

    x = np.empty(n + 1)
    x[0] = model.x0.sample(rng)
    for k in range(n):
        x[k + 1] = x[k] + float(model.drift(x[k])) * dt + l0_incs[k] + jump_per_step[k]
        if not np.isfinite(x[k + 1]):
            raise SimulationError("state became non-finite", step=k)
    return x


def simulate_observation(
    model: ModelSpec,
    T: float,
    dt: float,
    x: np.ndarray,
    events: JumpEvents,
    rng: np.random.Generator,
):
    """Continuous part Yc (sensor drift + Brownian) and Y with marks added."""
    n = _n_steps(T, dt)
    dw = math.sqrt(dt) * rng.standard_normal(n)
    yc = np.empty(n + 1)
    yc[0] = 0.0
    g = model.sensor
    for k in range(n):
        yc[k + 1] = yc[k] + float(g(x[k])) * dt + dw[k]

    mark_per_step = np.zeros(n)
    obs = np.isfinite(events.z2)
    if np.any(obs):
        steps = np.minimum((events.t[obs] / dt).astype(int), n - 1)
        np.add.at(mark_per_step, steps, events.z2[obs])
    y = yc.copy()
    y[1:] += np.cumsum(mark_per_step)
    return y, yc, dw


def simulate_path(
    model: ModelSpec, T: float, dt: float, seed: int, eps_levels=None
):
    """Full path simulation; returns one PathRecord (or {eps: PathRecord}).

    With ``eps_levels`` the records share all randomness except the extra
    small-jump annuli (common random numbers for truncation refinement).
    """
    levels = eps_levels if eps_levels is not None else [model.eps]
    events_by_eps = simulate_coupled_jumps(model, T, seed, levels)
    l0_by_eps = simulate_L0(model, T, dt, seed, levels)
    n = _n_steps(T, dt)
    times = dt * np.arange(n + 1)

    records = {}
    for eps in events_by_eps:
        rng_x0 = _rng_for(seed, _ROLE_X0)
        x = simulate_state(model, T, dt, events_by_eps[eps], l0_by_eps[eps], rng_x0)
        rng_w2 = _rng_for(seed, _ROLE_W2)
        y, yc, dw = simulate_observation(model, T, dt, x, events_by_eps[eps], rng_w2)
        records[eps] = PathRecord(
            dt=dt,
            times=times,
            dW2=dw,
            events=events_by_eps[eps],
            X=x,
            Y=y,
            Yc=yc,
            seed=seed,
        )
    if eps_levels is None:
        return records[float(model.eps)]
    return records


def girsanov_Z(path: PathRecord, g: Callable) -> float:
    """Terminal value of the measure-change exponential.

    Z(T) = exp(- sum g(X_k) dW_k - 1/2 sum g(X_k)^2 dt); the discretized
    stochastic exponential is an exact martingale step by step.
    """
    gx = np.asarray(g(path.X[:-1]))
    expo = -np.sum(gx * path.dW2) - 0.5 * np.sum(gx * gx) * path.dt
    return math.exp(expo)
