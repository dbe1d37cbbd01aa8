"""Distances to Gaussian targets, Stein residuals and scaling fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtr, ndtri

from skclt.errors import SteinConsistencyError
from skclt.resample import jackknife
from skclt.theory.quadrature import gauss_expect

LEVY_TOL = 1e-9
MGF_GUARD = 2.0


class MeasureTag(str, Enum):
    ANNEALED = "annealed"
    QUENCHED = "quenched_single_disorder"
    ACROSS_DISORDER = "across_disorder_means"


@dataclass(frozen=True)
class EmpiricalSample:
    values: np.ndarray
    measure_tag: MeasureTag = MeasureTag.ANNEALED
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains non-finite values")
        order = np.argsort(v, kind="stable")
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "measure_tag", MeasureTag(self.measure_tag))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()[order]
            object.__setattr__(self, "weights", w / w.sum())

    def __len__(self):
        return self.values.size


def _sorted(sample) -> np.ndarray:
    if isinstance(sample, EmpiricalSample):
        if sample.weights is not None:
            raise NotImplementedError("weighted samples are not supported by the distance functions")
        return sample.values
    return EmpiricalSample(sample).values


def _G(t, mu, sigma):
    """int_{-inf}^t Phi((s - mu) / sigma) ds."""
    z = (t - mu) / sigma
    return (t - mu) * ndtr(z) + sigma * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def wasserstein1_to_gaussian(sample, mu: float, sigma: float) -> float:
    """Exact W1 distance between the empirical law of ``sample`` and N(mu, sigma^2).

    Integrates |F_n - Phi| in closed form on each interval between order
    statistics, splitting where Phi crosses the empirical level.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    x = _sorted(sample)
    n = x.size
    total = _G(x[0], mu, sigma)  # F_n = 0 left of the sample
    z = (x[-1] - mu) / sigma
    # F_n = 1 right of the sample: int_{x_n}^inf (1 - Phi)
    total += sigma * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) - (x[-1] - mu) * ndtr(-z)
    if n > 1:
        a, b = x[:-1], x[1:]
        c = np.arange(1, n) / n
        t = np.clip(mu + sigma * ndtri(c), a, b)
        Ga, Gb, Gt = _G(a, mu, sigma), _G(b, mu, sigma), _G(t, mu, sigma)
        below = c * (t - a) - (Gt - Ga)
        above = (Gb - Gt) - c * (b - t)
        total += float(np.sum(below + above))
    return float(total)


def kolmogorov_to_gaussian(sample, mu: float, sigma: float) -> float:
    x = _sorted(sample)
    n = x.size
    F = ndtr((x - mu) / sigma) if sigma > 0 else (x >= mu).astype(float)
    k = np.arange(1, n + 1)
    return float(max(np.max(k / n - F), np.max(F - (k - 1) / n)))


def levy_to_gaussian(sample, mu: float, sigma: float, tol: float = LEVY_TOL) -> float:
    """Levy distance between the empirical law and N(mu, sigma^2).

    sigma = 0 means the point mass at mu. The sandwich condition for a given
    epsilon is checked at the empirical jumps and at the target's jump.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    x = _sorted(sample)
    n = x.size
    k = np.arange(1, n + 1)

    if sigma > 0:
        cdf = left = lambda t: ndtr((t - mu) / sigma)
    else:
        cdf = lambda t: (np.asarray(t) >= mu).astype(float)
        left = lambda t: (np.asarray(t) > mu).astype(float)

    def ok(eps):
        # target(x) <= F_n(x + eps) + eps, tightest just left of x_k - eps
        if np.max(left(x - eps) - (k - 1) / n) > eps:
            return False
        # F_n(x - eps) - eps <= target(x), tightest at x_k + eps
        if np.max(k / n - cdf(x + eps)) > eps:
            return False
        if sigma == 0:
            if 1.0 - np.searchsorted(x, mu + eps, side="right") / n > eps:
                return False
            if np.searchsorted(x, mu - eps, side="left") / n > eps:
                return False
        return True

    lo, hi = 0.0, 1.0
    if ok(0.0):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


# Stein equation

@dataclass
class TestFunction:
    name: str
    g: object
    lipschitz: float


def _log_cosh(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(x, -x) - math.log(2.0)


def battery(names=("tanh", "arctan", "soft_clip", "log_cosh")) -> list[TestFunction]:
    """Lipschitz test functions with known constants.

    The first three are odd and so blind to a misspecified variance when the
    data are symmetric about 0; log_cosh is even and picks that up.
    """
    table = {
        "tanh": TestFunction("tanh", np.tanh, 1.0),
        "arctan": TestFunction("arctan", np.arctan, 1.0),
        # smooth version of x on |x| <= K, saturating at +-K
        "soft_clip": TestFunction("soft_clip", lambda x: 2.0 * np.tanh(np.asarray(x) / 2.0), 1.0),
        "log_cosh": TestFunction("log_cosh", _log_cosh, 1.0),
    }
    return [table[n] for n in names]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_PANELS = 12


def _half_line_integral(x, sigma, g, eg, sign):
    """int_0^S exp(-(2|x| s + s^2) / (2 sigma^2)) (g(x + sign s) - Eg) ds, per x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s2 = sigma * sigma
    smax = np.minimum(12.0 * sigma, 60.0 * s2 / np.maximum(np.abs(x), 1e-300))
    edges = np.linspace(0.0, 1.0, _PANELS + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wu = (half[:, None] * _GL_W[None, :]).ravel()
    s = smax[:, None] * u[None, :]
    w = smax[:, None] * wu[None, :]
    kern = np.exp(-(2.0 * np.abs(x)[:, None] * s + s * s) / (2.0 * s2))
    vals = np.asarray(g(x[:, None] + sign * s), dtype=float) - eg
    return np.sum(w * kern * vals, axis=1)


def stein_f_direct(x, g, sigma, eg):
    """Solution of sigma^2 f' - x f = g - Eg(sigma z) at the points x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    pos = x >= 0
    s2 = sigma * sigma
    if pos.any():
        out[pos] = -_half_line_integral(x[pos], sigma, g, eg, +1.0) / s2
    if (~pos).any():
        out[~pos] = _half_line_integral(x[~pos], sigma, g, eg, -1.0) / s2
    return out


@dataclass
class SteinTestFunction:
    """Solved Stein pair (f, f') for a Lipschitz g and target N(0, sigma^2)."""

    name: str
    g: object
    lipschitz: float
    sigma: float
    mean_g: float
    grid: np.ndarray
    f_grid: np.ndarray
    bounds: dict = field(default_factory=dict)
    observed: dict = field(default_factory=dict)
    _spline: object = field(default=None, repr=False)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self._spline(x), dtype=float)
        outside = (x < self.grid[0]) | (x > self.grid[-1])
        if np.any(outside):
            out = np.array(out, copy=True)
            out[outside] = stein_f_direct(x[outside], self.g, self.sigma, self.mean_g)
        return out

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        return (x * self.f(x) + np.asarray(self.g(x), dtype=float) - self.mean_g) / self.sigma ** 2

    def ode_residual(self, step: float = 1e-3) -> float:
        """max |sigma^2 f' - x f - (g - Eg)| with f' from a 5-point stencil of the direct solution."""
        x = self.grid[(self.grid > self.grid[0] + 3 * step) & (self.grid < self.grid[-1] - 3 * step)][::10]
        F = lambda t: stein_f_direct(t, self.g, self.sigma, self.mean_g)
        d = (-F(x + 2 * step) + 8 * F(x + step) - 8 * F(x - step) + F(x - 2 * step)) / (12 * step)
        r = self.sigma ** 2 * d - x * F(x) - (np.asarray(self.g(x)) - self.mean_g)
        return float(np.max(np.abs(r)))

    def dump_rows(self):
        fp = self.fprime(self.grid)
        return [{"x": float(a), "f": float(b), "fprime": float(c)} for a, b, c in zip(self.grid, self.f_grid, fp)]


def stein_bounds(lipschitz: float, sigma: float) -> dict:
    """Sup-norm bounds for the solution with target variance sigma^2."""
    return {"f": lipschitz, "fprime": math.sqrt(2 / math.pi) * lipschitz / sigma,
            "lip_fprime": 2.0 * lipschitz / sigma ** 2}


def stein_solve(g, lipschitz: float, sigma: float, name: str | None = None, half_width: float = 10.0,
                points: int = 4001, check: bool = True) -> SteinTestFunction:
    """Solve sigma^2 f' - x f = g - E g(sigma z) and check the bound triple on a grid.

    Raises:
        SteinConsistencyError: a bound is exceeded by more than 1e-6.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if isinstance(g, TestFunction):
        name, lipschitz, g = g.name, g.lipschitz, g.g
    if name is None:
        name = getattr(g, "__name__", "g")
    eg = gauss_expect(lambda z: g(sigma * z), 161)
    grid = np.linspace(-half_width * sigma, half_width * sigma, points)
    fg = stein_f_direct(grid, g, sigma, eg)
    st = SteinTestFunction(name, g, lipschitz, sigma, eg, grid, fg, _spline=CubicSpline(grid, fg))
    fp = (grid * fg + np.asarray(g(grid), dtype=float) - eg) / sigma ** 2
    st.bounds = stein_bounds(lipschitz, sigma)
    st.observed = {"f": float(np.max(np.abs(fg))), "fprime": float(np.max(np.abs(fp))),
                   "lip_fprime": float(np.max(np.abs(np.diff(fp)) / np.diff(grid)))}
    if check:
        for k, bound in st.bounds.items():
            if st.observed[k] > bound + 1e-6:
                raise SteinConsistencyError(f"{name}: sup {k} = {st.observed[k]:.8g} exceeds bound {bound:.8g}")
    return st


def _as_test_functions(sigma, test_functions):
    out = []
    for tf in test_functions:
        out.append(tf if isinstance(tf, SteinTestFunction) else stein_solve(tf, None, math.sqrt(sigma)))
    return out


def annealed_stein_residual(sample, sigma2: float, test_functions=None, groups=None) -> dict:
    """|mean(X f(X)) - sigma2 mean(f'(X))| per test function, with SE.

    ``sample`` may be 2-D with one row per disorder (or pass ``groups``);
    the SE is then a jackknife over groups, otherwise over points. Returns
    ``{name: {"signed", "residual", "se"}}``.
    """
    if test_functions is None:
        test_functions = battery()
    fns = _as_test_functions(sigma2, test_functions)
    x = np.asarray(sample, dtype=float)
    if groups is not None:
        groups = np.asarray(groups)
        labels = np.unique(groups)
        rows = [x[groups == g] for g in labels]
    elif x.ndim == 2:
        rows = list(x)
    else:
        rows = None
    out = {}
    for st in fns:
        if rows is None:
            y = x * st.f(x) - sigma2 * st.fprime(x)
            est, se = jackknife(y)
        else:
            sums = np.array([np.sum(r * st.f(r) - sigma2 * st.fprime(r)) for r in rows])
            counts = np.array([r.size for r in rows], dtype=float)
            data = np.column_stack([sums, counts])
            est, se = jackknife(data, lambda d: d[:, 0].sum() / d[:, 1].sum())
        out[st.name] = {"signed": est, "residual": abs(est), "se": se}
    return out


# split-chain quenched functionals

def _chains(per_disorder):
    out = []
    for e in per_disorder:
        H = e.H if hasattr(e, "H") else np.asarray(e, dtype=float)
        if H.ndim != 2 or H.shape[0] < 2:
            raise ValueError("each disorder needs a (n_chains >= 2, n_records) array")
        out.append(H)
    return out


def _halves(n_chains):
    k = n_chains // 2
    return list(range(k)), list(range(k, n_chains))


def _pair_cov(u, v):
    """Unbiased covariance of two observables from independent chains at common times.

    ``u``, ``v`` have shape (chains, records); uses (u_c - u_c')(v_c - v_c') / 2
    over chain pairs c < c'.
    """
    c = u.shape[0]
    tot = 0.0
    npairs = 0
    for i in range(c):
        for j in range(i + 1, c):
            tot += np.mean((u[i] - u[j]) * (v[i] - v[j])) / 2
            npairs += 1
    return tot / npairs


def _require_half_pairs(H):
    if H.shape[0] < 4:
        raise ValueError("split-chain variance functionals need at least 4 chains (2 per half)")


def quenched_stein_residual(per_disorder, sigma_Q2: float, f) -> dict:
    """Estimate E <H f(H) - sigma_Q2 f'(H) - <H> f(H)>^2.

    The inner Gibbs average equals Cov(H, f(H)) - sigma_Q2 <f'(H)>; it is
    estimated separately on the two chain halves and the two estimates are
    multiplied, which is unbiased for its square. ``f`` is a
    :class:`SteinTestFunction` (or anything with ``f`` and ``fprime``).
    Also returns the plug-in square of the full-sample estimate as
    ``naive`` for comparison.
    """
    chains = _chains(per_disorder)
    prods, naive = [], []
    for H in chains:
        _require_half_pairs(H)
        fH, dH = f.f(H), f.fprime(H)
        a, b = _halves(H.shape[0])
        ia = _pair_cov(H[a], fH[a]) - sigma_Q2 * dH[a].mean()
        ib = _pair_cov(H[b], fH[b]) - sigma_Q2 * dH[b].mean()
        prods.append(ia * ib)
        full = np.mean(H * fH) - H.mean() * fH.mean() - sigma_Q2 * dH.mean()
        naive.append(full ** 2)
    est, se = jackknife(np.array(prods))
    return {"estimate": est, "se": se, "naive": float(np.mean(naive)), "per_disorder": np.array(prods)}


def within_variances(per_disorder) -> np.ndarray:
    """Unbiased quenched variance of H per disorder (all chain pairs)."""
    return np.array([_pair_cov(H, H) for H in _chains(per_disorder)])


def quenched_variance(per_disorder) -> tuple[float, float]:
    """E over disorders of the Gibbs variance of H, with SE over disorders."""
    return jackknife(within_variances(per_disorder))


def variance_concentration(per_disorder, sigma_Q2: float) -> dict:
    """Estimate E[(<(H - <H>)^2> - sigma_Q2)^2] from products of half estimates."""
    chains = _chains(per_disorder)
    prods, naive = [], []
    for H in chains:
        _require_half_pairs(H)
        a, b = _halves(H.shape[0])
        prods.append((_pair_cov(H[a], H[a]) - sigma_Q2) * (_pair_cov(H[b], H[b]) - sigma_Q2))
        naive.append((H.var() - sigma_Q2) ** 2)
    est, se = jackknife(np.array(prods))
    return {"estimate": est, "se": se, "naive": float(np.mean(naive)), "per_disorder": np.array(prods)}


def across_disorder_variance(per_disorder) -> dict:
    """Variance over disorders of the Gibbs mean <H>.

    Uses E[m_A m_B] - (E m)^2 with m_A, m_B the means over the two chain
    halves, which removes the Monte Carlo noise of each <H> from the
    estimate. The plug-in variance of the full means is returned as
    ``naive``.
    """
    chains = _chains(per_disorder)
    d = len(chains)
    if d < 2:
        raise ValueError("need at least two disorders")
    mm = []
    for H in chains:
        a, b = _halves(H.shape[0])
        mm.append((H[a].mean(), H[b].mean(), H.mean()))
    mm = np.array(mm)

    def stat(x):
        n = len(x)
        m = x[:, 2]
        cross = (m.sum() ** 2 - np.sum(m ** 2)) / (n * (n - 1))
        return np.mean(x[:, 0] * x[:, 1]) - cross

    est, se = jackknife(mm, stat)
    return {"estimate": est, "se": se, "naive": float(np.var(mm[:, 2], ddof=1))}


# transforms

def empirical_mgf(sample, mu_values) -> dict:
    """mu -> (mean exp(mu X), SE).

    Raises:
        ValueError: |mu| > 2, or exp overflows at some mu (the message names it).
    """
    x = np.asarray(sample, dtype=float).ravel()
    out = {}
    for mu in mu_values:
        mu = float(mu)
        if abs(mu) > MGF_GUARD:
            raise ValueError(f"|mu| must be <= {MGF_GUARD}, got mu={mu}")
        with np.errstate(over="raise"):
            try:
                y = np.exp(mu * x)
            except FloatingPointError as exc:
                raise ValueError(f"exp(mu X) overflows at mu={mu}") from exc
        out[mu] = (float(y.mean()), float(y.std(ddof=1) / math.sqrt(len(y))) if len(y) > 1 else float("nan"))
    return out


@dataclass(frozen=True)
class CFPoint:
    value: complex
    se: float
    modulus: float
    phase: float


def empirical_cf(sample, t_values) -> dict:
    """t -> empirical characteristic function mean(exp(i t X)) with SE."""
    x = np.asarray(sample, dtype=float).ravel()
    n = len(x)
    out = {}
    for t in t_values:
        t = float(t)
        if t == 0.0:
            out[t] = CFPoint(1 + 0j, 0.0, 1.0, 0.0)
            continue
        c, s = np.cos(t * x), np.sin(t * x)
        v = complex(c.mean(), s.mean())
        se = math.sqrt((c.var(ddof=1) + s.var(ddof=1)) / n) if n > 1 else float("nan")
        out[t] = CFPoint(v, se, abs(v), math.atan2(v.imag, v.real))
    return out


# scaling

@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    slope_ci: tuple
    slope_se: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "slope_ci_low": self.slope_ci[0], "slope_ci_high": self.slope_ci[1], "slope_se": self.slope_se}


def _ols(lx, ly):
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return coef


def scaling_fit(sizes, values, bootstrap_values=None, level: float = 0.95) -> ScalingFit:
    """OLS fit of log(value) = slope log(N) + intercept.

    ``bootstrap_values`` has shape (B, len(sizes)), e.g. the statistic
    recomputed on disorder resamples at each size; the slope CI is then the
    basic bootstrap interval of the refitted slopes (reflected about the
    estimate, which undoes the upward bias of distances on resamples). Without it the CI is the
    normal interval from the OLS standard error.
    """
    n = np.asarray(sizes, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.size < 3 or n.size != v.size:
        raise ValueError("need at least 3 sizes with one value each")
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("sizes and values must be positive")
    lx, ly = np.log(n), np.log(v)
    slope, intercept = _ols(lx, ly)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = n.size - 2
    se = math.sqrt(ss_res / dof / np.sum((lx - lx.mean()) ** 2)) if dof > 0 else float("nan")
    alpha = 1 - level
    if bootstrap_values is not None:
        bv = np.asarray(bootstrap_values, dtype=float)
        bv = bv[np.all(bv > 0, axis=1)]
        slopes = np.array([_ols(lx, np.log(row))[0] for row in bv])
        lo, hi = np.quantile(slopes, [alpha / 2, 1 - alpha / 2])
        ci = (float(2 * slope - hi), float(2 * slope - lo))
        se = float(np.std(slopes, ddof=1))
    else:
        z = float(ndtri(1 - alpha / 2))
        ci = (slope - z * se, slope + z * se)
    return ScalingFit(float(slope), float(intercept), float(r2), ci, float(se))


def bootstrap_units(units, statistic, n_boot: int = 200, seed: int = 0) -> np.ndarray:
    """statistic(units[idx]) over ``n_boot`` resamples of the units with replacement."""
    rng = np.random.default_rng(seed)
    n = len(units)
    out = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        out[b] = statistic([units[i] for i in idx])
    return out


def extrapolate_inverse_n(sizes, values, ses=None) -> dict:
    """Weighted least squares fit value_N = limit + c / N.

    Returns the limit, its standard error and c.
    """
    n = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if ses is None else 1.0 / np.maximum(np.asarray(ses, dtype=float), 1e-300) ** 2
    A = np.column_stack([np.ones_like(n), 1.0 / n])
    Aw = A * np.sqrt(w)[:, None]
    yw = y * np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    cov = np.linalg.inv(Aw.T @ Aw)
    if ses is None:
        dof = max(len(y) - 2, 1)
        cov = cov * float(np.sum((yw - Aw @ coef) ** 2)) / dof
    return {"limit": float(coef[0]), "se": float(math.sqrt(cov[0, 0])), "slope": float(coef[1])}
