"""Bootstrap particle filter: the independent oracle for the spectral solver.

Particles follow the prior dynamics (Euler-Maruyama with their own
truncated state-noise increments), are reweighted by the observation
likelihood exp(g dYc - g^2 dt / 2), and at observed marks each particle
jumps by an independent draw from the unit-mass conditional law, so the
jump update carries no weight change (the proposal is exactly the prior
transition given the mark).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .copulas import IndependenceCopula, conditional_law
from .errors import FilterDegeneracyError, SimulationError
from .measures import LevyMeasure
from .output import FilterOutput
from .simulate import ModelSpec, PathRecord

RESAMPLE_THRESHOLD = 0.5


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    logw: np.ndarray

    @property
    def n(self) -> int:
        return len(self.x)

    def weights(self) -> np.ndarray:
        w = np.exp(self.logw - np.max(self.logw))
        return w / np.sum(w)

    def ess(self) -> float:
        w = self.weights()
        return float(1.0 / np.sum(w * w))

    def mean(self) -> float:
        return float(np.sum(self.weights() * self.x))

    def prob_exceed(self, a: float) -> float:
        return float(np.sum(self.weights() * (self.x > a)))


def sample_l0_increments(
    m0: LevyMeasure | None, eps: float, dt: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Independent truncated compensated-noise increments for n particles."""
    if m0 is None:
        return np.zeros(n)
    lam_side = float(m0.tail_exact(eps))
    rate = 2.0 * lam_side if m0.support == "symmetric" else lam_side
    counts = rng.poisson(rate * dt, n)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(n)
    u = lam_side * (1.0 - rng.random(total))
    z = m0.inverse_tail_exact(np.maximum(u, 1e-300), extrapolate=True)
    if m0.support == "symmetric":
        z = z * np.where(rng.random(total) < 0.5, -1.0, 1.0)
    owner = np.repeat(np.arange(n), counts)
    return np.bincount(owner, weights=z, minlength=n)


def propagate(
    ens: ParticleEnsemble, model: ModelSpec, dt: float, dl0: np.ndarray
) -> ParticleEnsemble:
    """Euler-Maruyama prior step with supplied per-particle noise increments."""
    ens.x = ens.x + np.asarray(model.drift(ens.x)) * dt + dl0
    if not np.all(np.isfinite(ens.x)):
        raise SimulationError("particle positions became non-finite")
    return ens


def weight_update(ens: ParticleEnsemble, d_yc: float, dt: float, g) -> ParticleEnsemble:
    gx = np.asarray(g(ens.x))
    ens.logw = ens.logw + gx * d_yc - 0.5 * gx * gx * dt
    shift = np.max(ens.logw)
    if not np.isfinite(shift):
        raise FilterDegeneracyError("all particle weights underflowed")
    total = np.sum(np.exp(ens.logw - shift))
    ens.logw = ens.logw - (shift + math.log(total))  # sum exp(logw) = 1
    return ens


def jump_update(
    ens: ParticleEnsemble, law, rng: np.random.Generator
) -> ParticleEnsemble:
    """Each particle jumps by an independent conditional draw; weights untouched."""
    z1 = law.quantile(rng.random(ens.n))
    ens.x = ens.x + z1
    return ens


def resample_systematic(
    ens: ParticleEnsemble, threshold: float, rng: np.random.Generator
) -> ParticleEnsemble:
    """Systematic resampling when ESS < threshold * n; weights reset uniform."""
    n = ens.n
    if ens.ess() >= threshold * n:
        return ens
    w = ens.weights()
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(w), positions)
    ens.x = ens.x[np.minimum(idx, n - 1)]
    ens.logw = np.full(n, -math.log(n))
    return ens


def run_pf(
    model: ModelSpec,
    path: PathRecord,
    n_particles: int,
    seed: int,
    thresholds=(0.5,),
    resample_threshold: float = RESAMPLE_THRESHOLD,
    record_stride: int = 1,
) -> FilterOutput:
    """Run the bootstrap filter along one observation record.

    Emits the same output schema as the spectral engine plus an ESS column.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    n = len(path.times) - 1
    dt = path.dt
    g = model.sensor
    m0 = model.l0.measure()
    independence = isinstance(model.copula, IndependenceCopula)

    ens = ParticleEnsemble(
        x=model.x0.sample(rng, n_particles),
        logw=np.full(n_particles, -math.log(n_particles)),
    )

    laws_by_step: dict = {}
    solo_rate = 0.0
    if independence:
        solo_rate = float(model.nu1.tail_exact(model.eps))
    else:
        for te, z2 in zip(path.events.t, path.events.z2):
            if not np.isfinite(z2):
                continue
            k = min(int(te / dt), n - 1)
            laws_by_step.setdefault(k, []).append(
                conditional_law(model.copula, model.nu1, model.nu2, float(z2))
            )

    rec_t, rec_mean, rec_xi, rec_ess = [], [], [], []
    rec_probs = {float(a): [] for a in thresholds}

    def record(i):
        rec_t.append(path.times[i])
        rec_mean.append(ens.mean())
        for a in thresholds:
            rec_probs[float(a)].append(ens.prob_exceed(a))
        rec_xi.append(0.0)
        rec_ess.append(ens.ess())

    record(0)
    for k in range(n):
        dl0 = sample_l0_increments(m0, model.eps, dt, n_particles, rng)
        if independence and solo_rate > 0.0:
            counts = rng.poisson(solo_rate * dt, n_particles)
            total = int(counts.sum())
            if total:
                u = solo_rate * (1.0 - rng.random(total))
                z = model.nu1.inverse_tail_exact(np.maximum(u, 1e-300), extrapolate=True)
                owner = np.repeat(np.arange(n_particles), counts)
                dl0 = dl0 + np.bincount(owner, weights=z, minlength=n_particles)
        propagate(ens, model, dt, dl0)
        d_yc = path.Yc[k + 1] - path.Yc[k]
        weight_update(ens, d_yc, dt, g)
        for law in laws_by_step.get(k, []):
            jump_update(ens, law, rng)
        resample_systematic(ens, resample_threshold, rng)
        if (k + 1) % record_stride == 0 or k == n - 1:
            record(k + 1)

    return FilterOutput(
        t=np.asarray(rec_t),
        mean=np.asarray(rec_mean),
        thresholds=tuple(float(a) for a in thresholds),
        probs={a: np.asarray(v) for a, v in rec_probs.items()},
        xi_log=np.asarray(rec_xi),
        renorm_count=np.zeros(len(rec_t)),
        ess=np.asarray(rec_ess),
    )
