"""Expansion of eigenfunction products into the eigenbasis.

Exact combinatorial oracles (frequency convolution on the flat torus,
Wigner-3j / Gaunt contractions on the sphere) are cross-checked against
quadrature whenever both are available; the torus of revolution is
quadrature only.

The 3j kernel uses the three-term recursion in the third angular momentum,
run from both ends of the admissible range and spliced in the classical
region, with the overall scale fixed by the two-sided normalization
sum (2 l3 + 1) f(l3)^2 = 1 and the sign anchored at l3 = l1 + l2.  Unlike
factorial formulas this survives degrees around 64 without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BreakdownError, ParameterError, UnderResolvedError
from .manifolds import COS, SIN, FlatTorus, Mode, RevTorus, SpectralBasis, Sphere2

FOUR_PI = 4.0 * math.pi

EXACT_ZERO_SNAP = 1e-15
ORACLE_AGREEMENT_TOL = 1e-10

__all__ = [
    "ProductSpec",
    "CoefficientSeries",
    "expand_product",
    "quadrature_coefficients",
    "torus_support_lambda",
    "parseval_report",
    "wigner_3j",
    "gaunt_real",
    "series_to_csv",
]


# ---------------------------------------------------------------------------
# Wigner 3j


def _jacobi_a(j3: float, j1: int, j2: int, m3: int) -> float:
    return math.sqrt(
        (j3 * j3 - (j1 - j2) ** 2)
        * ((j1 + j2 + 1.0) ** 2 - j3 * j3)
        * (j3 * j3 - m3 * m3)
    )


def _jacobi_b(j3: float, j1: int, j2: int, m1: int, m2: int, m3: int) -> float:
    return -(2.0 * j3 + 1.0) * (
        m3 * (j1 * (j1 + 1.0) - j2 * (j2 + 1.0)) + (m1 - m2) * j3 * (j3 + 1.0)
    )


def _zero_m_value(j1: int, j2: int, j3: int) -> float:
    """Closed form of the all-zero-m symbol through log-gamma."""
    total = j1 + j2 + j3
    if total % 2:
        return 0.0
    g = total // 2
    lg = math.lgamma
    log_delta = (
        lg(total - 2 * j1 + 1) + lg(total - 2 * j2 + 1) + lg(total - 2 * j3 + 1)
        - lg(total + 2)
    )
    log_term = lg(g + 1) - lg(g - j1 + 1) - lg(g - j2 + 1) - lg(g - j3 + 1)
    return (-1.0) ** g * math.exp(0.5 * log_delta + log_term)


_RESCALE = 1e150


@lru_cache(maxsize=1 << 18)
def _three_j_range(j1: int, j2: int, m1: int, m2: int):
    """All 3j(j1 j2 j3; m1 m2 -(m1+m2)) over the admissible j3 range.

    Returns (j3_min, tuple of values for j3 = j3_min .. j1+j2).
    """
    m3 = -(m1 + m2)
    j_lo = max(abs(j1 - j2), abs(m3))
    j_hi = j1 + j2
    count = j_hi - j_lo + 1
    if count == 1:
        sign = (-1.0) ** (j1 - j2 - m3)
        return j_lo, (sign / math.sqrt(2.0 * j_lo + 1.0),)
    if m1 == 0 and m2 == 0:
        return j_lo, tuple(_zero_m_value(j1, j2, j3) for j3 in range(j_lo, j_hi + 1))

    def a_at(j3):
        return _jacobi_a(float(j3), j1, j2, m3)

    def b_at(j3):
        return _jacobi_b(float(j3), j1, j2, m1, m2, m3)

    down = np.zeros(count)
    down[-1] = 1.0
    for idx in range(count - 1, 0, -1):
        j3 = j_lo + idx
        upper = down[idx + 1] if idx + 1 < count else 0.0
        down[idx - 1] = -(j3 * a_at(j3 + 1) * upper + b_at(j3) * down[idx]) / (
            (j3 + 1.0) * a_at(j3)
        )
        peak = abs(down[idx - 1])
        if peak > _RESCALE:
            down[idx - 1:] /= peak

    up = np.zeros(count)
    if j_lo == 0:
        # only reachable with j1 == j2 and m2 == -m1 != 0; seed the first two
        # values from their closed forms (the three-term relation is vacuous
        # at j3 = 0)
        up[0] = (-1.0) ** (j1 - m1) / math.sqrt(2.0 * j1 + 1.0)
        up[1] = (
            (-1.0) ** (j1 - m1)
            * 2.0
            * m1
            / math.sqrt(2.0 * j1 * (2.0 * j1 + 1.0) * (2.0 * j1 + 2.0))
        )
    else:
        up[0] = 1.0
        up[1] = -b_at(j_lo) * up[0] / (j_lo * a_at(j_lo + 1))
    for idx in range(1, count - 1):
        j3 = j_lo + idx
        up[idx + 1] = -(b_at(j3) * up[idx] + (j3 + 1.0) * a_at(j3) * up[idx - 1]) / (
            j3 * a_at(j3 + 1)
        )
        peak = abs(up[idx + 1])
        if peak > _RESCALE:
            up[: idx + 2] /= peak

    overlap = np.abs(up) * np.abs(down)
    pivot = int(np.argmax(overlap))
    if overlap[pivot] == 0.0:  # pragma: no cover - defensive
        raise BreakdownError("3j recursion lost all overlap between passes")
    values = np.empty(count)
    values[: pivot + 1] = up[: pivot + 1]
    values[pivot:] = down[pivot:] * (up[pivot] / down[pivot])
    j3s = np.arange(j_lo, j_hi + 1, dtype=float)
    norm = math.sqrt(float(np.sum((2.0 * j3s + 1.0) * values * values)))
    values /= norm
    anchor = (-1.0) ** (j1 - j2 - m3)
    if values[-1] * anchor < 0.0:
        values = -values
    return j_lo, tuple(float(v) for v in values)


def _validate_lm(l: int, m: int, label: str):
    if not isinstance(l, (int, np.integer)) or isinstance(l, bool) or l < 0:
        raise ParameterError(f"{label}: degree must be a nonnegative integer")
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or abs(m) > l:
        raise ParameterError(f"{label}: order must be an integer with |m| <= l")


def wigner_3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """The Wigner 3j symbol for integer angular momenta.

    Zero when m1+m2+m3 != 0 or the triangle inequality fails; otherwise
    evaluated from the recursion described in the module docstring.
    """
    for l, m, label in ((l1, m1, "first"), (l2, m2, "second"), (l3, m3, "third")):
        _validate_lm(l, m, f"{label} column")
    if m1 + m2 + m3 != 0:
        return 0.0
    if l3 < abs(l1 - l2) or l3 > l1 + l2:
        return 0.0
    j_lo, values = _three_j_range(int(l1), int(l2), int(m1), int(m2))
    return values[l3 - j_lo]


# ---------------------------------------------------------------------------
# real Gaunt coefficients


def _complex_weights(m: int):
    """Real harmonic as a combination of the phase-free complex ones."""
    if m == 0:
        return ((0, 1.0 + 0.0j),)
    am = abs(m)
    inv = 1.0 / math.sqrt(2.0)
    if m > 0:  # cosine type
        return ((am, inv + 0.0j), (-am, inv + 0.0j))
    return ((am, -1.0j * inv), (-am, 1.0j * inv))  # sine type


def gaunt_real(l1: int, m1: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral over the sphere of three real harmonics.

    Built from :func:`wigner_3j` via the real-to-complex change of basis;
    our real harmonics carry no Condon-Shortley phase, which contributes
    the (-1)^mu factors below.
    """
    for l, m, label in ((l1, m1, "first"), (l2, m2, "second"), (l3, m3, "third")):
        _validate_lm(l, m, f"{label} harmonic")
    total = l1 + l2 + l3
    if total % 2:
        return 0.0
    if l3 < abs(l1 - l2) or l3 > l1 + l2:
        return 0.0
    if (int(m1 < 0) + int(m2 < 0) + int(m3 < 0)) % 2:
        return 0.0
    base = wigner_3j(l1, l2, l3, 0, 0, 0)
    if base == 0.0:
        return 0.0
    prefactor = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / FOUR_PI)
    acc = 0.0 + 0.0j
    for mu1, c1 in _complex_weights(m1):
        for mu2, c2 in _complex_weights(m2):
            for mu3, c3 in _complex_weights(m3):
                if mu1 + mu2 + mu3 != 0:
                    continue
                phase = (-1.0) ** (max(mu1, 0) + max(mu2, 0) + max(mu3, 0))
                acc += c1 * c2 * c3 * phase * wigner_3j(l1, l2, l3, mu1, mu2, mu3)
    return float(acc.real) * prefactor * base


# ---------------------------------------------------------------------------
# product specifications and series


@dataclass(frozen=True)
class ProductSpec:
    """A finite product of basis eigenfunctions, identified by mode ids
    (repetition allowed)."""

    basis: SpectralBasis
    factors: tuple

    def __post_init__(self):
        factors = tuple(int(i) for i in self.factors)
        if len(factors) < 1:
            raise ParameterError("a product needs at least one factor")
        for i in factors:
            if not 0 <= i < self.basis.size:
                raise ParameterError(f"unknown mode id {i}")
        object.__setattr__(self, "factors", factors)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def sum_lambda(self) -> float:
        return float(sum(self.basis.modes[i].lam for i in sorted(self.factors)))

    def factor_modes(self):
        return tuple(self.basis.modes[i] for i in self.factors)


@dataclass(frozen=True)
class CoefficientSeries:
    """Coefficients <f, phi_i> for every basis mode, with Parseval
    bookkeeping.  ``method`` records which route produced the stored
    values: "both" keeps the exact oracle after it agreed with quadrature
    to 1e-10, "quadrature" keeps raw quadrature values."""

    product: ProductSpec
    ids: np.ndarray
    lams: np.ndarray
    coeffs: np.ndarray
    f_norm_sq: float
    method: str
    mass_captured: float = field(init=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=int)
        lams = np.asarray(self.lams, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if not (ids.shape == lams.shape == coeffs.shape):
            raise ParameterError("series columns must have equal length")
        if np.any(np.diff(lams) < 0.0):
            raise ParameterError("series entries must be sorted by ascending lambda")
        mass = float(coeffs @ coeffs)
        if mass > self.f_norm_sq * (1.0 + 1e-8):
            raise BreakdownError(
                f"captured mass {mass!r} exceeds the product norm {self.f_norm_sq!r}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "lams", lams)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "mass_captured", mass)

    @property
    def sum_lambda(self) -> float:
        return self.product.sum_lambda

    def entries(self):
        return list(zip(self.ids.tolist(), self.lams.tolist(), self.coeffs.tolist()))

    def truncated(self, lambda_max: float) -> "CoefficientSeries":
        """Sub-series of entries with lambda <= lambda_max (same product,
        same quadrature norm)."""
        keep = self.lams <= lambda_max * (1.0 + 1e-12)
        return CoefficientSeries(self.product, self.ids[keep], self.lams[keep],
                                 self.coeffs[keep], self.f_norm_sq, self.method)


def expand_product(spec: ProductSpec) -> CoefficientSeries:
    """Expand f = prod of factor modes into the basis.

    Runs the exact oracle when the model has one (flat torus any order,
    sphere up to three factors) and always runs quadrature; the two must
    agree to 1e-10 or the expansion aborts.
    """
    basis = spec.basis
    _check_grid_resolution(spec)
    quad_coeffs, f_norm_sq = _quadrature_expansion(spec)
    exact = _exact_expansion(spec)
    if exact is not None:
        gap = float(np.max(np.abs(exact - quad_coeffs))) if exact.size else 0.0
        if gap > ORACLE_AGREEMENT_TOL:
            raise BreakdownError(
                f"exact and quadrature coefficients disagree by {gap:.3e}")
        coeffs = exact.copy()
        coeffs[np.abs(coeffs) < EXACT_ZERO_SNAP] = 0.0
        method = "both"
    else:
        coeffs = quad_coeffs
        method = "quadrature"
    ids = np.arange(basis.size)
    return CoefficientSeries(spec, ids, basis.lambdas(), coeffs, f_norm_sq, method)


def quadrature_coefficients(spec: ProductSpec):
    """Raw quadrature coefficients and the product norm, bypassing the
    exact oracle (used to test the two routes against each other)."""
    _check_grid_resolution(spec)
    return _quadrature_expansion(spec)


def torus_support_lambda(spec: ProductSpec) -> float:
    """Largest frequency in the exact expansion support of a flat-torus
    product: the product's band limit.

    The product of separable modes is separable, so the support is the
    cartesian product of the per-axis supports and its largest frequency
    is reached at the per-axis maxima.
    """
    basis = spec.basis
    model = basis.model
    if not isinstance(model, FlatTorus):
        raise ParameterError("support enumeration is exact on flat tori only")
    largest = 0.0
    per_axis_max = []
    for axis in range(model.dim):
        current = {(0, COS): 1.0}
        for i in sorted(spec.factors):
            k = basis.modes[i].rep[0][axis]
            parity = basis.modes[i].rep[1][axis]
            norm = _torus_axis_norm(model.periods[axis], k)
            current = _trig_multiply(current, {(k, parity): norm})
        scale = 2.0 * math.pi / model.periods[axis]
        per_axis_max.append(max((k * scale for (k, _p) in current), default=0.0))
    largest = math.hypot(*per_axis_max) if model.dim == 2 else per_axis_max[0]
    return largest


def parseval_report(series: CoefficientSeries):
    """(ratio, defect): captured mass over the quadrature norm of f."""
    if series.f_norm_sq <= 0.0:
        raise BreakdownError(
            "product has zero quadrature norm; eigenfunction products "
            "cannot vanish identically, so the grid or basis broke down")
    ratio = series.mass_captured / series.f_norm_sq
    return ratio, 1.0 - ratio


# ---------------------------------------------------------------------------
# quadrature route


def _check_grid_resolution(spec: ProductSpec):
    basis = spec.basis
    model = basis.model
    exact = basis.axis_exactness()
    modes = spec.factor_modes()
    if isinstance(model, FlatTorus):
        for axis in range(model.dim):
            factor_bw = sum(m.rep[0][axis] for m in modes)
            target_bw = max(m.rep[0][axis] for m in basis.modes)
            needed = max(factor_bw + target_bw, 2 * factor_bw)
            if needed > exact[axis]:
                raise UnderResolvedError(
                    f"axis {axis}: integrand bandwidth {needed} exceeds grid "
                    f"exactness {exact[axis]}")
    elif isinstance(model, Sphere2):
        factor_bw = sum(m.rep[0] for m in modes)
        target_bw = max(m.rep[0] for m in basis.modes)
        needed = max(factor_bw + target_bw, 2 * factor_bw)
        if needed > basis.grid.exactness_degree:
            raise UnderResolvedError(
                f"spherical degree {needed} exceeds grid exactness "
                f"{basis.grid.exactness_degree}")
    elif isinstance(model, RevTorus):
        trunc = (len(basis.modes[0].rep[2]) - 1) // 2
        factor_s = spec.n_factors * trunc  # profile bandwidth estimate: the
        factor_t = sum(m.rep[0] for m in modes)  # Galerkin truncation per factor
        target_t = max(m.rep[0] for m in basis.modes)
        need_s = max(factor_s + trunc, 2 * factor_s)
        need_t = max(factor_t + target_t, 2 * factor_t)
        if need_s > exact[0] or need_t > exact[1]:
            raise UnderResolvedError(
                f"product bandwidth ({need_s}, {need_t}) exceeds grid "
                f"exactness {exact}")
    else:
        raise ParameterError(f"unknown manifold model {model!r}")


def _product_values_by_axis(spec: ProductSpec):
    """Pointwise product of the factors as a grid-shaped array."""
    basis = spec.basis
    profiles = [basis.axis_profiles(basis.modes[i]) for i in sorted(spec.factors)]
    if len(profiles[0]) == 1:
        values = profiles[0][0].copy()
        for prof in profiles[1:]:
            values *= prof[0]
        return values
    values = np.multiply.outer(profiles[0][0], profiles[0][1])
    for prof in profiles[1:]:
        values *= np.multiply.outer(prof[0], prof[1])
    return values


def _quadrature_expansion(spec: ProductSpec):
    basis = spec.basis
    values = _product_values_by_axis(spec)
    if values.ndim == 1:
        w = basis.grid.weights
        f_norm_sq = float(w @ (values * values))
        coeffs = np.array([
            float(w @ (values * basis.values_on_grid(m))) for m in basis.modes
        ])
        return coeffs, f_norm_sq
    w1 = basis.grid.axes[0][1]
    w2 = basis.grid.axes[1][1]
    weighted = values * np.multiply.outer(w1, w2)
    f_norm_sq = float(np.sum(weighted * values))
    coeffs = np.empty(basis.size)
    for i, mode in enumerate(basis.modes):
        u, v = basis.axis_profiles(mode)
        coeffs[i] = float(u @ weighted @ v)
    return coeffs, f_norm_sq


# ---------------------------------------------------------------------------
# exact routes


def _exact_expansion(spec: ProductSpec):
    model = spec.basis.model
    if isinstance(model, FlatTorus):
        return _torus_exact(spec)
    if isinstance(model, Sphere2) and spec.n_factors <= 3:
        return _sphere_exact(spec)
    return None


def _trig_multiply(left: dict, right: dict) -> dict:
    """Product of two 1-d trigonometric polynomials.

    Keys are (frequency, parity) with parity 0 = cos, 1 = sin and
    frequency >= 0; the product-to-sum identities keep the dictionary
    exact (coefficients are halved, never approximated).
    """
    out: dict = {}

    def add(k: int, parity: int, value: float):
        if value == 0.0:
            return
        if k < 0:
            k = -k
            if parity == SIN:
                value = -value
        if k == 0 and parity == SIN:
            return
        key = (k, parity)
        out[key] = out.get(key, 0.0) + value

    for (ka, pa), ca in left.items():
        for (kb, pb), cb in right.items():
            half = 0.5 * ca * cb
            if pa == COS and pb == COS:
                add(ka - kb, COS, half)
                add(ka + kb, COS, half)
            elif pa == SIN and pb == SIN:
                add(ka - kb, COS, half)
                add(ka + kb, COS, -half)
            elif pa == SIN and pb == COS:
                add(ka - kb, SIN, half)
                add(ka + kb, SIN, half)
            else:  # cos * sin
                add(kb - ka, SIN, half)
                add(kb + ka, SIN, half)
    return {k: v for k, v in out.items() if v != 0.0}


def _torus_axis_norm(period: float, k: int) -> float:
    return 1.0 / math.sqrt(period) if k == 0 else math.sqrt(2.0 / period)


def _torus_exact(spec: ProductSpec) -> np.ndarray:
    basis = spec.basis
    model: FlatTorus = basis.model
    axis_dicts = []
    for axis in range(model.dim):
        current = {(0, COS): 1.0}
        for i in sorted(spec.factors):
            k = basis.modes[i].rep[0][axis]
            parity = basis.modes[i].rep[1][axis]
            norm = _torus_axis_norm(model.periods[axis], k)
            current = _trig_multiply(current, {(k, parity): norm})
        axis_dicts.append(current)
    coeffs = np.zeros(basis.size)
    for i, mode in enumerate(basis.modes):
        value = 1.0
        for axis in range(model.dim):
            k = mode.rep[0][axis]
            parity = mode.rep[1][axis]
            raw = axis_dicts[axis].get((k, parity), 0.0)
            if raw == 0.0:
                value = 0.0
                break
            period = model.periods[axis]
            inner = period if k == 0 else 0.5 * period
            value *= raw * inner * _torus_axis_norm(period, k)
        coeffs[i] = value
    return coeffs


def _sphere_pair_map(a: Mode, b: Mode) -> dict:
    """Expansion of Y_a * Y_b over (l, m) pairs, exact through Gaunt."""
    la, ma = a.rep
    lb, mb = b.rep
    out = {}
    for l in range(abs(la - lb), la + lb + 1):
        for m in range(-l, l + 1):
            g = gaunt_real(la, ma, lb, mb, l, m)
            if g != 0.0:
                out[(l, m)] = g
    return out


def _sphere_exact(spec: ProductSpec) -> np.ndarray:
    basis = spec.basis
    modes = [basis.modes[i] for i in sorted(spec.factors)]
    coeffs = np.zeros(basis.size)
    if len(modes) == 1:
        coeffs[modes[0].id] = 1.0
        return coeffs
    pair = _sphere_pair_map(modes[0], modes[1])
    if len(modes) == 2:
        for i, mode in enumerate(basis.modes):
            coeffs[i] = pair.get(mode.rep, 0.0)
        return coeffs
    lc, mc = modes[2].rep
    for i, mode in enumerate(basis.modes):
        li, mi = mode.rep
        total = 0.0
        for (l, m), weight in pair.items():
            total += weight * gaunt_real(l, m, lc, mc, li, mi)
        coeffs[i] = total
    return coeffs


# ---------------------------------------------------------------------------
# CSV view


def series_to_csv(series: CoefficientSeries) -> str:
    """CSV dump: one row per entry, 17-significant-digit floats."""
    lines = ["index,lambda,coeff,abs_coeff,cumulative_mass_ratio"]
    running = 0.0
    denom = series.f_norm_sq if series.f_norm_sq > 0.0 else 1.0
    for mode_id, lam, coeff in series.entries():
        running += coeff * coeff
        lines.append(
            f"{mode_id},{lam:.17g},{coeff:.17g},{abs(coeff):.17g},{running / denom:.17g}"
        )
    return "\n".join(lines) + "\n"
