"""Observation models, dataset generation, and mismatch diagnostics.

Datasets tie together an input law and an output rule.  The mismatch report
measures how far a candidate target vector is from explaining the outputs
linearly: the deviation (psi_1 proxy of y - <x, beta>), the global covariance
||E[(y - <x, beta>) x]||_2, and its local variant over feasible directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry
from .distributions import (DistributionSpec, psi_norm_estimate, sample_inputs,
                            second_moment_matrix)
from .errors import ConfigurationError
from .seeding import derive_seed, partitioned_mean, rng_for

MODEL_KINDS = ("linear", "single_index", "quadratic", "lifted_view")

LINKS = {
    "identity": lambda z: z,
    "sign": np.sign,
    "tanh": np.tanh,
    "relu": lambda z: np.maximum(z, 0.0),
    "square": lambda z: z ** 2,
    "cube": lambda z: z ** 3,
    "abs": np.abs,
}

_MC_CHUNK = 1 << 17
_SIGMA_SAMPLE_CAP = 2_000_000


@dataclass(frozen=True)
class Noise:
    kind: str = "none"  # none | gaussian | laplace
    level: float = 0.0  # std for gaussian, scale b for laplace

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "laplace"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.level < 0:
            raise ConfigurationError("noise level must be nonnegative")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "none" or self.level == 0.0:
            return np.zeros(n)
        if self.kind == "gaussian":
            return self.level * rng.standard_normal(n)
        return rng.laplace(0.0, self.level, size=n)


@dataclass(frozen=True)
class ObservationModel:
    """Output rule y | x.

    linear:        y = <x, beta0> + noise
    single_index:  y = f(<x, beta0>) + noise
    quadratic:     y = (<x, beta0> + noise)^2      (noise inside the square)
    lifted_view:   quadratic outputs paired with centered rank-one lifts
                   x x^T - E[x x^T] as inputs
    """

    kind: str
    beta0: np.ndarray = field(compare=False)
    link: str = "identity"
    noise: Noise = Noise()

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.link not in LINKS:
            raise ConfigurationError(f"unknown link {self.link!r}")
        b = np.asarray(self.beta0, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise ConfigurationError("beta0 must be a vector")
        if self.kind in ("single_index", "quadratic", "lifted_view") \
                and not np.any(b):
            raise ConfigurationError(f"beta0 must be non-zero for {self.kind}")
        object.__setattr__(self, "beta0", b)

    @property
    def p(self) -> int:
        return self.beta0.size


@dataclass
class Dataset:
    """Sampled (inputs, outputs) with provenance.

    inputs is n x p, or n x p x p for the lifted view (stored centered);
    `centering` records the second-moment matrix subtracted from the lifts.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    spec: DistributionSpec
    model: ObservationModel
    seed: int
    centering: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ConfigurationError("inputs/outputs row counts disagree")

    @property
    def n(self) -> int:
        return self.outputs.size

    @property
    def lifted(self) -> bool:
        return self.inputs.ndim == 3


def generate_dataset(model: ObservationModel, spec: DistributionSpec, n: int,
                     seed: int, calibration_size: int = 100_000) -> Dataset:
    """Deterministic dataset for (model, spec, n, seed)."""
    if model.p != spec.p:
        raise ConfigurationError("model/spec dimension mismatch")
    x = sample_inputs(spec, n, derive_seed(seed, "inputs"))
    noise_rng = rng_for(seed, "noise")
    nu = model.noise.draw(noise_rng, n)
    z = x @ model.beta0
    f = LINKS[model.link]

    if model.kind == "linear":
        y = z + nu
        return Dataset(x, y, spec, model, seed)
    if model.kind == "single_index":
        y = f(z) + nu
        return Dataset(x, y, spec, model, seed)
    if model.kind in ("quadratic", "lifted_view"):
        y = (z + nu) ** 2
        if model.kind == "quadratic":
            return Dataset(x, y, spec, model, seed)
        centering = lift_centering(spec, seed, calibration_size)
        lifts = x[:, :, None] * x[:, None, :] - centering
        return Dataset(lifts, y, spec, model, seed, centering=centering)
    raise ConfigurationError(f"unknown model kind {model.kind!r}")


def lift_centering(spec: DistributionSpec, seed: int,
                   calibration_size: int = 100_000) -> np.ndarray:
    """Second moment E[x x^T]: analytic for the closed-form laws, empirical
    (independent calibration sample) for mixed specs."""
    if spec.kind != "mixed":
        return second_moment_matrix(spec)
    calib = sample_inputs(spec, calibration_size, derive_seed(seed, "lift-calibration"))
    return (calib.T @ calib) / calibration_size


# ---------------------------------------------------------------------------
# Target scalings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetScale:
    value: float
    std_error: float
    budget: int


def target_scale_mu(model: ObservationModel, spec: DistributionSpec,
                    mc_budget: int, seed: int) -> TargetScale:
    """MC estimate of E[f(<x, b0>) <x, b0>] / ||b0||^2 for single-index models."""
    if model.kind != "single_index":
        raise ConfigurationError("target_scale_mu applies to single_index models")
    if not np.any(model.beta0):
        raise ConfigurationError("beta0 must be non-zero")
    f = LINKS[model.link]
    b0 = model.beta0
    nsq = float(b0 @ b0)

    def chunk(rng, m):
        x = sample_inputs(spec, m, rng.integers(2 ** 63))
        z = x @ b0
        return f(z) * z / nsq

    partitions = max(1, -(-mc_budget // _MC_CHUNK))
    mean, se = partitioned_mean(mc_budget, partitions, seed, "target-scale-mu", chunk)
    return TargetScale(float(mean), float(se), mc_budget)


def lifted_target_scale(link: str, mc_budget: int, seed: int) -> TargetScale:
    """MC estimate of (1/2) E[f(Z)(Z^2 - 1)] for standard normal Z."""
    if link not in LINKS:
        raise ConfigurationError(f"unknown link {link!r}")
    f = LINKS[link]

    def chunk(rng, m):
        z = rng.standard_normal(m)
        return 0.5 * f(z) * (z * z - 1.0)

    partitions = max(1, -(-mc_budget // _MC_CHUNK))
    mean, se = partitioned_mean(mc_budget, partitions, seed, "lifted-target-scale", chunk)
    return TargetScale(float(mean), float(se), mc_budget)


# ---------------------------------------------------------------------------
# Mismatch report
# ---------------------------------------------------------------------------

@dataclass
class MismatchReport:
    sigma: float
    rho_global: float
    rho_local: Optional[float]
    mc_std_error: float
    budget: int
    directions_used: int = 0
    scale_exceeds_diameter: bool = False


def mismatch_report(model: ObservationModel, spec: DistributionSpec,
                    beta_nat, hypothesis_set=None, t: Optional[float] = None,
                    mc_budget: int = 100_000, seed: int = 0,
                    n_dirs: int = 512) -> MismatchReport:
    """Estimate the mismatch deviation/covariance of beta_nat under the model.

    rho_local is a supremum over a sampled direction set (slice directions
    for t > 0, cone directions for t = 0, vertex differences included for
    polytopal sets), hence a lower bound on the true supremum.
    """
    if mc_budget < 1_000:
        raise ConfigurationError("mc_budget must be at least 1000")
    beta_nat = np.asarray(beta_nat, dtype=float)
    if beta_nat.shape != (spec.p,):
        raise ConfigurationError("beta_nat dimension mismatch")

    mean_vec = np.zeros(spec.p)
    sq_vec = np.zeros(spec.p)
    xi_samples = []
    collected = 0
    done = 0
    idx = 0
    while done < mc_budget:
        m = min(_MC_CHUNK, mc_budget - done)
        ds = generate_dataset(model, spec, m, derive_seed(seed, "mismatch", idx))
        xi = ds.outputs - ds.inputs @ beta_nat
        contrib = ds.inputs * xi[:, None]
        mean_vec += contrib.sum(axis=0)
        sq_vec += (contrib ** 2).sum(axis=0)
        if collected < _SIGMA_SAMPLE_CAP:
            take = min(m, _SIGMA_SAMPLE_CAP - collected)
            xi_samples.append(xi[:take])
            collected += take
        done += m
        idx += 1
    mean_vec /= mc_budget
    var_vec = np.maximum(sq_vec / mc_budget - mean_vec ** 2, 0.0)
    se_vec = np.sqrt(var_vec / mc_budget)
    mc_std_error = float(np.sqrt(np.mean(se_vec ** 2)))

    sigma = psi_norm_estimate(np.concatenate(xi_samples), alpha=1).value
    rho_global = float(np.linalg.norm(mean_vec))

    rho_local = None
    used = 0
    exceeds = False
    if hypothesis_set is not None and t is not None:
        if t < 0:
            raise ConfigurationError("t must be nonnegative")
        if t == 0:
            sample = geometry.cone_directions(hypothesis_set, beta_nat, n_dirs,
                                              derive_seed(seed, "mismatch-dirs"))
        else:
            sample = geometry.sphere_slice_directions(
                hypothesis_set, beta_nat, t, n_dirs,
                derive_seed(seed, "mismatch-dirs"))
        if sample.directions.shape[0] == 0:
            exceeds = t is not None and t > 0
        else:
            rho_local = float(np.max(sample.directions @ mean_vec))
            used = sample.directions.shape[0]

    return MismatchReport(sigma=float(sigma), rho_global=rho_global,
                          rho_local=rho_local, mc_std_error=mc_std_error,
                          budget=mc_budget, directions_used=used,
                          scale_exceeds_diameter=exceeds)


def sparse_vector(p: int, k: int, seed: int, norm: str = "l2") -> np.ndarray:
    """Random k-sparse vector with unit l2 (or l1) norm; a config convenience."""
    if not (1 <= k <= p):
        raise ConfigurationError("need 1 <= k <= p")
    rng = rng_for(seed, "sparse-vector")
    support = rng.choice(p, size=k, replace=False)
    vals = rng.standard_normal(k)
    v = np.zeros(p)
    v[support] = vals
    denom = np.linalg.norm(v) if norm == "l2" else np.abs(v).sum()
    return v / denom
