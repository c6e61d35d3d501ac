"""
Probability models of PV output and loads, cumulant machinery,
decorrelation transform and Nataf correlated sampling
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import stats
from scipy.linalg import LinAlgError, cholesky, pinv, qr, solve_triangular
from scipy.optimize import brentq

from acdc_plf.config import settings
from acdc_plf.exceptions import (
    DecompositionError,
    DegenerateVariableError,
    InfeasibleCorrelationError,
    InfeasibleMomentsError,
    InvalidArgumentError,
)
from acdc_plf.models.stochastic import (
    BetaPvModel,
    CorrelationModel,
    CumulantSet,
    EmpiricalModel,
    GaussianLoadModel,
    Marginal,
    NatafSampler,
    ParametricModel,
    StochasticSpec,
)

logger = logging.getLogger(__name__)

# Probabilities fed to inverse CDFs stay strictly inside (0, 1)
_U_EPS = 1e-16


# ---------------------------------------------------------------------------
# Moments and cumulants

def beta_params_from_stats(mu: float, sigma: float) -> Tuple[float, float]:
    """Beta shapes from the normalized mean and standard deviation"""
    if not 0 < mu < 1:
        raise InfeasibleMomentsError(f"normalized mean must lie in (0, 1), got {mu}")
    var = sigma ** 2
    if not 0 < var < mu * (1 - mu):
        raise InfeasibleMomentsError(f"variance {var:.6g} must lie in (0, {mu * (1 - mu):.6g})")
    bracket = mu * (1 - mu) / var - 1.0
    alpha, beta = mu * bracket, (1 - mu) * bracket
    if not (alpha > 0 and beta > 0):
        raise InfeasibleMomentsError(f"moments give non-positive shapes ({alpha}, {beta})")
    return alpha, beta


def pv_max_power(r_max: float, areas: Sequence[float], efficiencies: Sequence[float]) -> float:
    """Maximum plant output: irradiance times the efficiency-weighted module area"""
    if len(areas) != len(efficiencies):
        raise InvalidArgumentError(f"{len(areas)} areas but {len(efficiencies)} efficiencies")
    if not areas:
        logger.warning("PV plant without modules has zero maximum output")
        return 0.0
    if r_max <= 0 or any(a <= 0 for a in areas) or any(e <= 0 for e in efficiencies):
        raise InvalidArgumentError("irradiance, areas and efficiencies must be positive")
    return float(r_max * np.dot(areas, efficiencies))


def beta_origin_moments(alpha: float, beta: float, order: int) -> np.ndarray:
    """E[X^k], k = 1..order, of a Beta(alpha, beta) variable on [0, 1]"""
    if not (alpha > 0 and beta > 0) or order < 1:
        raise InvalidArgumentError("Beta moments need positive shapes and order >= 1")
    i = np.arange(order)
    return np.cumprod((alpha + i) / (alpha + beta + i))


def moments_to_cumulants(origin_moments: Sequence[float]) -> CumulantSet:
    m = np.asarray(origin_moments, dtype=float)
    if m.size < 2:
        raise InvalidArgumentError("need at least two origin moments")
    gamma = np.zeros(m.size)
    for n in range(1, m.size + 1):
        acc = m[n - 1]
        for j in range(1, n):
            acc -= math.comb(n - 1, j - 1) * gamma[j - 1] * m[n - j - 1]
        gamma[n - 1] = acc
    return CumulantSet(gamma)


def gaussian_cumulants(mu: float, sigma: float, order: int = settings.cumulant_order) -> CumulantSet:
    if sigma < 0:
        raise InvalidArgumentError(f"negative standard deviation {sigma}")
    values = np.zeros(order)
    values[0], values[1] = mu, sigma ** 2
    return CumulantSet(values)


def beta_cumulants(alpha: float, beta: float, r_m: float = 1.0,
                   order: int = settings.cumulant_order) -> CumulantSet:
    """Cumulants of R_M times a Beta(alpha, beta) variable"""
    return moments_to_cumulants(beta_origin_moments(alpha, beta, order)).affine(r_m)


def sample_cumulants(samples: Sequence[float], order: int = settings.cumulant_order) -> CumulantSet:
    """Cumulants from sample origin moments (computed about the sample mean)"""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InvalidArgumentError("need at least two samples")
    mean = float(x.mean())
    d = x - mean
    moments = np.empty(order)
    power = np.ones_like(d)
    for k in range(order):
        power = power * d
        moments[k] = power.mean()
    centered = moments_to_cumulants(moments)
    return centered.affine(1.0, mean - centered.mean)


# ---------------------------------------------------------------------------
# Correlation

def _check_correlation(c: np.ndarray) -> np.ndarray:
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if c.shape[0] != c.shape[1]:
        raise DecompositionError(f"correlation matrix must be square, got {c.shape}")
    if not np.allclose(c, c.T, atol=1e-10):
        raise DecompositionError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(c), 1.0, atol=1e-10):
        raise DecompositionError("correlation matrix needs a unit diagonal")
    return c


def decorrelation_transform(c_z) -> Tuple[np.ndarray, np.ndarray]:
    """Lower-triangular G with G G^T = C and B = G^-1 (the pseudo-inverse when C is singular)"""
    c = _check_correlation(c_z)
    n = c.shape[0]
    if np.linalg.eigvalsh(c).min() < -1e-10:
        minor = next(k for k in range(1, n + 1) if np.linalg.eigvalsh(c[:k, :k]).min() < -1e-10)
        raise DecompositionError(f"correlation matrix is not positive semi-definite (leading minor of order {minor})",
                                 details={"leading_minor": minor})
    try:
        g = cholesky(c, lower=True)
    except LinAlgError:
        g = _semidefinite_factor(c)
        logger.info("Correlation matrix is singular (rank %d); B is the pseudo-inverse of G",
                    np.linalg.matrix_rank(c, tol=1e-8))
        return g, pinv(g)
    b = solve_triangular(g, np.eye(n), lower=True)
    return g, b


def _semidefinite_factor(c: np.ndarray) -> np.ndarray:
    """Lower-triangular G with G G^T = C for a singular positive semi-definite C"""
    eigval, eigvec = np.linalg.eigh(c)
    root = eigvec * np.sqrt(np.clip(eigval, 0.0, None))[None, :]
    _, r = qr(root.T)
    g = r.T
    return g * np.where(np.diag(g) < 0, -1.0, 1.0)[None, :]


def correlation_model(members: List[str], c) -> CorrelationModel:
    g, b = decorrelation_transform(c)
    return CorrelationModel(members=list(members), C=np.asarray(c, dtype=float), G=g, B=b)


def compose(g: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Correlated variables from uncorrelated ones (column vectors)"""
    return g @ y


def decorrelate(b: np.ndarray, z: np.ndarray) -> np.ndarray:
    return b @ z


def correlation_matrix_from_samples(samples: np.ndarray) -> np.ndarray:
    """Pearson correlation of sample columns (rows are draws)"""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidArgumentError("need a (draws, variables) matrix with at least 2 draws")
    std = x.std(axis=0)
    flat = np.flatnonzero(std == 0)
    if flat.size:
        raise DegenerateVariableError(f"variables {flat.tolist()} have zero variance", details={"columns": flat.tolist()})
    c = np.corrcoef(x, rowvar=False)
    np.fill_diagonal(c, 1.0)
    return c


# ---------------------------------------------------------------------------
# Marginals

def _point_mass(name: str, value: float) -> Marginal:
    return Marginal(
        name=name,
        ppf=lambda u: np.full(np.shape(u), value, dtype=float),
        cdf=lambda x: (np.asarray(x, dtype=float) >= value).astype(float),
        mean=value,
        std=0.0,
        is_gaussian=True,
        cumulants=lambda order: gaussian_cumulants(value, 0.0, order),
    )


def _from_scipy(name: str, dist, gaussian: bool = False, cumulants=None) -> Marginal:
    return Marginal(
        name=name,
        ppf=dist.ppf,
        cdf=dist.cdf,
        mean=float(dist.mean()),
        std=float(dist.std()),
        is_gaussian=gaussian,
        cumulants=cumulants,
    )


def gaussian_marginal(name: str, mu: float, sigma: float) -> Marginal:
    if sigma == 0:
        return _point_mass(name, mu)
    return _from_scipy(name, stats.norm(loc=mu, scale=sigma), gaussian=True,
                       cumulants=lambda order: gaussian_cumulants(mu, sigma, order))


def pv_capacity_pu(model: BetaPvModel, s_base_mva: float) -> float:
    """R_M of a PV plant in per unit of the AC base power"""
    if model.r_m_mw is not None:
        return model.r_m_mw / s_base_mva
    kw = pv_max_power(model.r_max, model.areas, model.efficiencies)
    return kw / 1000.0 / s_base_mva


def pv_shapes(model: BetaPvModel) -> Tuple[float, float]:
    if model.alpha is not None:
        return model.alpha, model.beta
    return beta_params_from_stats(model.mean, model.std)


def pv_marginal(model: BetaPvModel, s_base_mva: float) -> Marginal:
    alpha, beta = pv_shapes(model)
    r_m = pv_capacity_pu(model, s_base_mva)
    if r_m == 0:
        return _point_mass(model.id, 0.0)
    return _from_scipy(model.id, stats.beta(alpha, beta, scale=r_m),
                       cumulants=lambda order: beta_cumulants(alpha, beta, r_m, order))


def scale_pv(spec: StochasticSpec, factor: float) -> StochasticSpec:
    """Spec with every PV capacity multiplied by factor"""
    if factor < 0:
        raise InvalidArgumentError(f"PV scale must be non-negative, got {factor}")
    if factor == 1.0:
        return spec
    pv = []
    for model in spec.pv:
        if model.r_m_mw is not None:
            pv.append(model.model_copy(update={"r_m_mw": model.r_m_mw * factor}))
        else:
            pv.append(model.model_copy(update={"r_max": model.r_max * factor}))
    return spec.model_copy(update={"pv": pv})


def load_marginals(model: GaussianLoadModel) -> Tuple[Marginal, Marginal]:
    """Demand marginals (P, Q); the network sees them with a negative sign"""
    return (gaussian_marginal(f"{model.id}.p", model.p_mean, model.p_std),
            gaussian_marginal(f"{model.id}.q", model.q_mean, model.q_std))


def empirical_marginal(model: EmpiricalModel) -> Marginal:
    if model.samples is not None:
        data = np.sort(np.asarray(model.samples, dtype=float))
        return Marginal(
            name=model.id,
            ppf=lambda u: np.quantile(data, np.clip(u, 0.0, 1.0)),
            cdf=lambda x: np.searchsorted(data, x, side="right") / data.size,
            mean=float(data.mean()),
            std=float(data.std()),
            samples=data,
        )
    values = np.asarray(model.cdf_values, dtype=float)
    probs = np.asarray(model.cdf_probabilities, dtype=float)
    ppf = lambda u: np.interp(u, probs, values)
    # moments of the tabulated distribution by midpoint quadrature of the inverse CDF
    grid = ppf((np.arange(20000) + 0.5) / 20000)
    return Marginal(
        name=model.id,
        ppf=ppf,
        cdf=lambda x: np.interp(x, values, probs, left=0.0, right=1.0),
        mean=float(grid.mean()),
        std=float(grid.std()),
    )


def parametric_marginal(model: ParametricModel) -> Marginal:
    try:
        dist = getattr(stats, model.distribution)(**model.params)
        dist.mean()
    except TypeError as e:
        raise InvalidArgumentError(f"bad parameters for {model.distribution}: {e}")
    return _from_scipy(model.id, dist)


def marginal_cumulants(marginal: Marginal, order: int, seed: int, stream: Tuple[int, ...],
                       sample_size: int = settings.cumulant_sample_size) -> CumulantSet:
    """Closed form when known, else sample cumulants of seeded inverse-CDF draws"""
    if marginal.cumulants is not None:
        return marginal.cumulants(order)
    if marginal.samples is not None:
        return sample_cumulants(marginal.samples, order)
    e = standard_normals(seed, stream, sample_size, 1)[:, 0]
    return sample_cumulants(marginal.ppf(to_uniform(e)), order)


# ---------------------------------------------------------------------------
# Seeded sampling

def stream_generator(seed: int, stream: Tuple[int, ...], chunk: int) -> np.random.Generator:
    """Generator of one chunk of one sub-stream; independent of any worker layout"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream) + (chunk,)))


def standard_normals(seed: int, stream: Tuple[int, ...], n_draws: int, n_vars: int,
                     chunk_size: int = settings.sample_chunk_size) -> np.ndarray:
    """(n_draws, n_vars) standard normals generated chunk by chunk"""
    out = np.empty((n_draws, n_vars))
    for chunk, start in enumerate(range(0, n_draws, chunk_size)):
        stop = min(start + chunk_size, n_draws)
        out[start:stop] = stream_generator(seed, stream, chunk).standard_normal((stop - start, n_vars))
    return out


def to_uniform(z: np.ndarray) -> np.ndarray:
    return np.clip(stats.norm.cdf(z), _U_EPS, 1.0 - _U_EPS)


def nataf_adjust(c_w, marginals: Sequence[Marginal], order: int = settings.hermite_quadrature_order,
                 gaussian_shortcut: bool = True) -> Tuple[np.ndarray, bool]:
    """
    Correlation C_Q of the underlying standard normals that reproduces C_W
    after the marginal transforms. Returns (C_Q, repaired).
    """
    c_w = _check_correlation(c_w)
    n = c_w.shape[0]
    if len(marginals) != n:
        raise InvalidArgumentError(f"{len(marginals)} marginals for a {n}x{n} correlation matrix")
    nodes, weights = hermegauss(order)
    weights = weights / math.sqrt(2.0 * math.pi)
    w2 = np.outer(weights, weights)
    u1 = to_uniform(nodes)
    g1 = [np.asarray(m.ppf(u1), dtype=float) for m in marginals]
    means = [float(weights @ g) for g in g1]
    stds = [math.sqrt(max(float(weights @ g ** 2) - mu ** 2, 0.0)) for g, mu in zip(g1, means)]

    c_q = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rho_w = c_w[i, j]
            if rho_w == 0 or marginals[i].std == 0 or marginals[j].std == 0:
                rho_q = 0.0
            elif gaussian_shortcut and marginals[i].is_gaussian and marginals[j].is_gaussian:
                rho_q = rho_w
            else:
                gi = g1[i][:, None]

                def mismatch(rho, i=i, j=j, gi=gi):
                    z2 = rho * nodes[:, None] + math.sqrt(1.0 - rho ** 2) * nodes[None, :]
                    gj = np.asarray(marginals[j].ppf(to_uniform(z2)), dtype=float)
                    corr = (np.sum(w2 * gi * gj) - means[i] * means[j]) / (stds[i] * stds[j])
                    return corr - rho_w

                lo, hi = -0.9999, 0.9999
                f_lo, f_hi = mismatch(lo), mismatch(hi)
                if f_lo * f_hi > 0:
                    raise InfeasibleCorrelationError(
                        f"correlation {rho_w} between {marginals[i].name} and {marginals[j].name} "
                        f"is unreachable with these marginals",
                        details={"pair": [marginals[i].name, marginals[j].name], "rho": rho_w},
                    )
                rho_q = brentq(mismatch, lo, hi, xtol=1e-12)
            c_q[i, j] = c_q[j, i] = rho_q

    repaired = False
    eigval, eigvec = np.linalg.eigh(c_q)
    if eigval.min() < 1e-12:
        logger.warning("Adjusted correlation matrix is not positive definite (min eigenvalue %.3e); repairing",
                       eigval.min())
        fixed = eigvec @ np.diag(np.clip(eigval, 1e-10, None)) @ eigvec.T
        d = np.sqrt(np.diag(fixed))
        c_q = fixed / np.outer(d, d)
        np.fill_diagonal(c_q, 1.0)
        repaired = True
    return c_q, repaired


def build_nataf_sampler(c_w, marginals: Sequence[Marginal], seed: int, stream: int = 0,
                        labels: Optional[List[str]] = None) -> NatafSampler:
    c_q, repaired = nataf_adjust(c_w, marginals)
    g_q, _ = decorrelation_transform(c_q)
    return NatafSampler(
        C_W=np.asarray(c_w, dtype=float),
        C_Q=c_q,
        G_Q=g_q,
        marginals=list(marginals),
        seed=seed,
        stream=stream,
        repaired=repaired,
        labels=list(labels or [m.name for m in marginals]),
    )


def correlated_samples(sampler: NatafSampler, n_draws: int, seed: Optional[int] = None,
                       stream: Tuple[int, ...] = ()) -> np.ndarray:
    """(n_draws, n_vars) samples with the sampler's marginals and target correlation"""
    if n_draws < 1:
        raise InvalidArgumentError("need at least one draw")
    seed = sampler.seed if seed is None else seed
    e = standard_normals(seed, tuple(stream) + (sampler.stream,), n_draws, len(sampler.marginals))
    q = compose(sampler.G_Q, e.T).T
    u = to_uniform(q)
    return np.column_stack([m.ppf(u[:, k]) for k, m in enumerate(sampler.marginals)])
