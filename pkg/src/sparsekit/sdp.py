"""Packing SDP solver and Taylor evaluation of the barrier kernel.

Two independent pieces live here.

The Taylor half expands the barrier kernel f(x) = exp(1/x) / x^2 around
x = 1.  f satisfies x^2 f' + (2x + 1) f = 0, which turns into a 3-term
recurrence for the series coefficients c_k (c_0 = e, c_1 = -3e):

    c_{k+1} = -((2k + 3) c_k + (k + 1) c_{k-1}) / (k + 1)

The series converges on 0 < x < 2 and, for x < 1, every term of the sum
is positive, so evaluation is cancellation-free.  `taylor_f` evaluates
the truncated series in extended precision, `matfun_taylor` applies it to
a symmetric matrix by a float64 Horner scheme, `error_bound` gives the
analytic truncation bound and `threshold_degree` inverts it.

The SDP half solves restricted two-block packing programs

    max  c . x   s.t.   sum_i x_i A_i <= B_k  (k = 1..K),  x >= 0

approximately via multiplicative-weight prices: grow all cheap
coordinates by a common factor until a price or the packing constraint
binds, freeze expensive coordinates, then greedily saturate leftover
slack and rescale exactly onto the feasible boundary.  Prices come from
`exp_trace_oracle`.  The returned value is within SOLVER_KAPPA of the
optimum on the benchmark distribution used in the tests.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np
from scipy.linalg import eigh as scipy_eigh

from ._linalg import eigh, eigvalsh, rng_from, sym
from .errors import PotentialOverflowError, PreconditionError, SdpDomainError

# constant in the truncation-degree formula degree >= (C/x^2) ln(1/(x eps))
C_TAYLOR = 5.0

# largest exponent fed to exp(); beyond this float64 overflows
EXP_CLAMP = 700.0

# float64 Horner is capped here: |c_k| ~ exp(2 sqrt(k)) overflows near 1e5
MAX_FLOAT_DEGREE = 100_000

# empirical approximation factor of solve_packing_sdp on diagonal
# benchmark instances (worst measured value, rounded up); the acceptance
# bar is 10
SOLVER_KAPPA = 8.0


# ---------------------------------------------------------------------------
# Taylor machinery for f(x) = exp(1/x) / x**2 around x = 1


def taylor_rationals(degree):
    """Rational parts r_k of the series coefficients, c_k = e * r_k.

    Exact Fractions from the 3-term recurrence.  Denominators grow
    factorially, so this is for cross-checks at small degree; the float
    and mpf paths below are what evaluation uses.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    out = [Fraction(1)]
    if degree >= 1:
        out.append(Fraction(-3))
    for k in range(1, degree):
        nxt = -((2 * k + 3) * out[k] + (k + 1) * out[k - 1]) / (k + 1)
        out.append(nxt)
    return out


_MP_COEFF_CACHE = {"degree": -1, "dps": 0, "coeffs": []}


def _coeff_dps(degree):
    # coefficients grow like exp(2 sqrt(k)); the recurrence is stable, so
    # a margin over the target precision is enough
    return 60 + int(3.2 * math.sqrt(degree + 1))


def _coeffs_mp(degree):
    """Series coefficients c_0..c_degree as mpf values (cached)."""
    cache = _MP_COEFF_CACHE
    want_dps = _coeff_dps(degree)
    if cache["degree"] >= degree and cache["dps"] >= want_dps:
        return cache["coeffs"][: degree + 1]
    with mp.workdps(want_dps):
        e = mp.e
        coeffs = [e]
        if degree >= 1:
            coeffs.append(-3 * e)
        for k in range(1, degree):
            nxt = -((2 * k + 3) * coeffs[k] + (k + 1) * coeffs[k - 1]) / (k + 1)
            coeffs.append(+nxt)
    cache.update(degree=degree, dps=want_dps, coeffs=coeffs)
    return coeffs


def taylor_coefficients(degree):
    """Coefficients c_0..c_degree of f around 1, as a float64 array.

    Small degrees go through exact rational arithmetic; large degrees use
    the extended-precision recurrence directly.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if degree > MAX_FLOAT_DEGREE:
        raise ValueError(f"degree {degree} exceeds float64 range of the coefficients")
    if degree <= 500:
        rats = taylor_rationals(degree)
        with mp.workdps(60):
            e = mp.e
            return np.array([float(e * mp.mpf(r.numerator) / r.denominator) for r in rats])
    return np.array([float(c) for c in _coeffs_mp(degree)])


def taylor_f(x, degree):
    """Truncated series for f evaluated at scalar x, extended precision.

    Valid on 0 < x < 2.  For x < 1 all summed terms are positive, so the
    working precision only needs to cover the coefficient magnitudes.
    """
    if not 0.0 < x < 2.0:
        raise PreconditionError(f"taylor series for the kernel needs 0 < x < 2, got {x}")
    coeffs = _coeffs_mp(degree)
    dps = 50 + int(2.2 / x) + int(2 * math.log10(degree + 2))
    with mp.workdps(dps):
        t = mp.mpf(repr(float(x))) - 1
        acc = mp.mpf(0)
        for c in reversed(coeffs):
            acc = acc * t + c
        return float(acc)


def error_bound(x, degree, mp_out=False):
    """Closed-form estimate 8 (degree+1) exp(5/x - x degree) of the truncation error.

    Requires 0 < x <= 1, and dominates the true remainder for degrees up
    to the saturation scale, roughly 6/x^2: the series coefficients grow
    like exp(2 sqrt(k)), so once 2 sqrt(degree) outruns 5/x the true
    remainder can exceed this estimate even though both are already
    astronomically small there.  Returns a float by default; with
    mp_out=True returns an mpf so sub-float64 magnitudes stay
    representable.
    """
    if not 0.0 < x <= 1.0:
        raise PreconditionError(f"truncation bound holds for 0 < x <= 1, got {x}")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    with mp.workdps(40):
        val = 8 * (degree + 1) * mp.exp(mp.mpf(5) / mp.mpf(repr(float(x))) - mp.mpf(repr(float(x))) * degree)
        return val if mp_out else float(val)


def threshold_degree(x, eps):
    """Smallest prescribed degree (C/x^2) ln(1/(x eps)) for target error eps."""
    if not 0.0 < x <= 1.0:
        raise PreconditionError(f"threshold formula holds for 0 < x <= 1, got {x}")
    if not 0.0 < eps < 0.5:
        raise PreconditionError(f"target error must be in (0, 1/2), got {eps}")
    return int(math.ceil((C_TAYLOR / (x * x)) * math.log(1.0 / (x * eps))))


def matfun_taylor(a, degree, clip_psd=False):
    """Apply the truncated kernel series to a symmetric matrix by Horner.

    Evaluation is pure float64 matrix arithmetic; an eigenvalue check is
    done once up front purely to validate the domain.  The spectrum must
    lie in [1/EXP_CLAMP, 2): below that exp(1/x) overflows float64 and a
    PotentialOverflowError is raised, above it the series diverges.  With
    clip_psd=True the result's tiny negative eigenvalues (truncation
    noise) are clipped to zero at the cost of one factorization.
    """
    a = sym(np.asarray(a, dtype=float))
    w = eigvalsh(a)
    if w[0] <= 1.0 / EXP_CLAMP:
        raise PotentialOverflowError(
            f"spectrum reaches {w[0]:.3e}; kernel exceeds float64 below {1.0 / EXP_CLAMP:.3e}"
        )
    if w[-1] >= 2.0:
        raise PreconditionError(f"series diverges at eigenvalue {w[-1]:.6f} >= 2")
    coeffs = taylor_coefficients(degree)
    d = a.shape[0]
    eye = np.eye(d)
    shifted = a - eye
    acc = coeffs[-1] * eye
    for c in coeffs[-2::-1]:
        acc = acc @ shifted + c * eye
    acc = sym(acc)
    if clip_psd:
        lam, vec = eigh(acc)
        acc = sym((vec * np.clip(lam, 0.0, None)) @ vec.T)
    return acc


# ---------------------------------------------------------------------------
# restricted packing SDP


@dataclass
class SdpInstance:
    """max c.x s.t. sum_i x_i factors[i] <= blocks[k] for all k, x >= 0."""

    c: np.ndarray
    factors: np.ndarray
    blocks: list
    delta: float

    def validate(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise SdpDomainError("rewards must be a finite 1-d array")
        m = c.size
        fac = np.asarray(self.factors, dtype=float)
        if fac.shape[:1] != (m,) or fac.ndim != 3 or fac.shape[1] != fac.shape[2]:
            raise SdpDomainError(f"factors shape {fac.shape} incompatible with {m} rewards")
        d = fac.shape[1]
        if np.abs(fac - fac.transpose(0, 2, 1)).max() > 1e-9 * max(1.0, np.abs(fac).max()):
            raise SdpDomainError("factors must be symmetric")
        if not self.blocks:
            raise SdpDomainError("at least one bound block is required")
        for blk in self.blocks:
            if blk.shape != (d, d):
                raise SdpDomainError(f"block shape {blk.shape} does not match factors ({d})")
            wb = eigvalsh(blk)
            if wb[0] < -1e-9 * max(1.0, wb[-1]):
                raise SdpDomainError("bound blocks must be positive semidefinite")
        if not 0.0 < self.delta < 1.0:
            raise SdpDomainError(f"delta must be in (0, 1), got {self.delta}")

    def _norm(self):
        """Whitened factors per block, cached on the instance.

        Singular blocks are deflated to their range; a factor carrying
        mass outside some block's range can never receive positive
        weight and is flagged forbidden.
        """
        cached = getattr(self, "_norm_cache", None)
        if cached is not None:
            return cached
        fac = np.asarray(self.factors, dtype=float)
        m = fac.shape[0]
        atil = []
        rdims = []
        forbidden = np.zeros(m, dtype=bool)
        for blk in self.blocks:
            w, v = eigh(blk)
            wmax = max(w[-1], 0.0)
            if wmax <= 0.0:
                raise SdpDomainError("a bound block is identically zero")
            keep = w > 1e-12 * wmax
            if not np.all(keep):
                v_null = v[:, ~keep]
                null_mass = np.einsum("dr,ide,er->i", v_null, fac, v_null)
                traces = np.trace(fac, axis1=1, axis2=2)
                forbidden |= null_mass > 1e-10 * np.maximum(traces, 1e-300)
            root_inv = v[:, keep] * (1.0 / np.sqrt(w[keep]))
            atil.append(np.einsum("dr,ide,es->irs", root_inv, fac, root_inv))
            rdims.append(int(keep.sum()))
        cache = {"atil": atil, "rdims": rdims, "forbidden": forbidden}
        self._norm_cache = cache
        return cache


@dataclass
class SdpSolution:
    x: np.ndarray
    objective: float
    rounds: int
    n_price_evals: int
    scale: float = 1.0


def _expm_taylor(a, terms=30):
    """exp of a symmetric matrix by scaling-and-squaring with a Taylor tail."""
    a = sym(np.asarray(a, dtype=float))
    norm = np.linalg.norm(a, "fro")
    squarings = max(0, int(math.ceil(math.log2(max(norm, 1e-300) / 0.5))))
    small = a / (2.0**squarings)
    eye = np.eye(a.shape[0])
    acc = eye.copy()
    term = eye.copy()
    for k in range(1, terms + 1):
        term = term @ small / k
        acc = acc + term
    for _ in range(squarings):
        acc = acc @ acc
    return sym(acc)


def exp_trace_oracle(instance, x, L, method="exact", with_lmax=False):
    """Exponential prices of a packing instance at the point x.

    For each coordinate i returns

        v_i = sum_k  A_i . Rk exp(L (Rk (sum_j x_j A_j) Rk - I)) Rk

    with Rk = blocks[k]^{-1/2} (deflated to the range for singular
    blocks).  Forbidden coordinates (mass outside a block's range) price
    at infinity.  method="taylor" swaps the eigendecomposition for a
    scaling-and-squaring series; exponents are clamped at EXP_CLAMP.
    With with_lmax=True also returns the largest whitened eigenvalue of
    the current combination over the blocks.
    """
    norm = instance._norm()
    x = np.asarray(x, dtype=float)
    prices = np.zeros(x.size)
    lmax = -np.inf
    for atil in norm["atil"]:
        mk = np.tensordot(x, atil, axes=1)
        if method == "exact":
            w, v = eigh(mk)
            lmax = max(lmax, w[-1])
            expw = np.exp(np.minimum(L * (w - 1.0), EXP_CLAMP))
            wk = sym((v * expw) @ v.T)
        elif method == "taylor":
            lmax = max(lmax, eigvalsh(mk)[-1])
            wk = _expm_taylor(L * (mk - np.eye(mk.shape[0])))
        else:
            raise ValueError(f"unknown method {method!r}")
        prices += np.einsum("irs,rs->i", atil, wk)
    prices[norm["forbidden"]] = np.inf
    if with_lmax:
        return prices, float(lmax)
    return prices


def _pencil_sigma(anum, bden):
    """Largest s with s * anum <= bden on bden's positive directions.

    anum is PSD.  Tight (near-null) directions of the slack bden are
    deflated so a saturated face never blocks growth orthogonal to it; a
    numerator with real mass on a tight direction is blocked outright.
    """
    anum = sym(anum)
    w, v = eigh(sym(bden))
    wmax = float(w[-1])
    if wmax <= 0.0:
        return 0.0
    keep = w > 1e-11 * wmax
    if not np.all(keep):
        v_tight = v[:, ~keep]
        tight_mass = float(np.einsum("ir,ij,jr->", v_tight, anum, v_tight))
        if tight_mass > 1e-9 * max(float(np.trace(anum)), 1e-300):
            return 0.0
    root = v[:, keep] / np.sqrt(w[keep])
    top = float(eigvalsh(sym(root.T @ anum @ root))[-1])
    if top <= 1e-14:
        return math.inf
    return 1.0 / top


def _saturate(y, abar, msums, order):
    """Greedy sweep: push each coordinate into the remaining slack.

    Crumbs below 1e-9 of the running total are skipped; they cannot move
    the objective but they do re-tighten faces and starve later
    coordinates.
    """
    for i in order:
        sig = math.inf
        for k, mk in enumerate(msums):
            sig = min(sig, _pencil_sigma(abar[k][i], np.eye(mk.shape[0]) - mk))
        if sig == math.inf:
            raise SdpDomainError("unbounded packing direction (zero factor)")
        if sig > 1e-9 * (1.0 + float(np.sum(y))):
            sig *= 1.0 - 1e-10
            y[i] += sig
            for k in range(len(msums)):
                msums[k] += sig * abar[k][i]
    return y, msums


def solve_packing_sdp(instance):
    """Approximate maximizer of the restricted packing SDP.

    Water-filling rounds grow every coordinate whose price is still low
    by the largest common factor that keeps prices and the packing
    constraint in check; a coordinate whose price crosses 1 - delta/2 is
    frozen for good.  Afterwards greedy saturation fills whatever slack
    is left, and the best iterate seen is scaled exactly onto the
    boundary.  Deterministic; no randomness is used anywhere.
    """
    instance.validate()
    norm = instance._norm()
    c = np.asarray(instance.c, dtype=float)
    m = c.size
    zero = SdpSolution(x=np.zeros(m), objective=0.0, rounds=0, n_price_evals=0)
    live = np.flatnonzero((c > 0.0) & ~norm["forbidden"])
    if live.size == 0:
        return zero
    delta = float(instance.delta)
    k_blocks = len(instance.blocks)

    # whitened factors scaled so the objective is the plain sum of y
    abar = [norm["atil"][k][live] / c[live, None, None] for k in range(k_blocks)]
    n_act = live.size
    n_tot = sum(norm["rdims"])
    big_l = (4.0 / delta) * math.log(max(n_tot * n_act / delta, 2.0))

    fro = max(float(np.linalg.norm(ab.reshape(n_act, -1), axis=1).max()) for ab in abar)
    if fro <= 0.0:
        raise SdpDomainError("unbounded packing direction (zero factor)")
    y0 = delta / (4.0 * n_act * fro)

    n_evals = 0

    def prices_and_lmax(yvec):
        nonlocal n_evals
        n_evals += 1
        xfull = np.zeros(m)
        xfull[live] = yvec / c[live]
        v, lm = exp_trace_oracle(instance, xfull, big_l, with_lmax=True)
        return v[live] / c[live], lm

    best_val = 0.0
    best_y = None

    def consider(yvec):
        nonlocal best_val, best_y
        tot = float(yvec.sum())
        if tot <= 0.0:
            return
        top = max(
            float(eigvalsh(np.tensordot(yvec, abar[k], axes=1))[-1]) for k in range(k_blocks)
        )
        if top <= 1e-14:
            return
        val = tot / top
        if val > best_val:
            best_val = val
            best_y = yvec / top

    # single-coordinate candidates: exact optimum along each axis
    singles = np.zeros(n_act)
    for j in range(n_act):
        sig = min(_pencil_sigma(abar[k][j], np.eye(abar[k].shape[1])) for k in range(k_blocks))
        if sig == math.inf:
            raise SdpDomainError("unbounded packing direction (zero factor)")
        singles[j] = sig
        if sig > best_val:
            single = np.zeros(n_act)
            single[j] = sig
            best_val = sig
            best_y = single

    # greedy from zero, natural order and most-valuable-axis-first
    greedy_orders = [list(range(n_act))]
    if n_act > 1:
        greedy_orders.append(list(np.argsort(-singles)))
    for order in greedy_orders:
        y_greedy, _ = _saturate(
            np.zeros(n_act),
            abar,
            [np.zeros((ab.shape[1], ab.shape[1])) for ab in abar],
            order,
        )
        consider(y_greedy)

    # two-coordinate mixtures: the objective along the segment
    # t e_i + (1-t) e_j scaled to the boundary is quasi-concave in t, so a
    # golden-section search finds the best pair blend
    def _segment_value(i, j, t):
        top = max(
            float(eigvalsh(t * abar[k][i] + (1.0 - t) * abar[k][j])[-1])
            for k in range(k_blocks)
        )
        return 1.0 / top if top > 1e-14 else 0.0

    if n_act > 1:
        pair_pool = np.argsort(-singles)[: min(n_act, 8)]
        golden = 0.5 * (math.sqrt(5.0) - 1.0)
        for ai in range(pair_pool.size):
            for bi in range(ai + 1, pair_pool.size):
                i, j = int(pair_pool[ai]), int(pair_pool[bi])
                lo, hi = 0.0, 1.0
                t1 = hi - golden * (hi - lo)
                t2 = lo + golden * (hi - lo)
                f1, f2 = _segment_value(i, j, t1), _segment_value(i, j, t2)
                for _ in range(25):
                    if f1 >= f2:
                        hi, t2, f2 = t2, t1, f1
                        t1 = hi - golden * (hi - lo)
                        f1 = _segment_value(i, j, t1)
                    else:
                        lo, t1, f1 = t1, t2, f2
                        t2 = lo + golden * (hi - lo)
                        f2 = _segment_value(i, j, t2)
                t_best = t1 if f1 >= f2 else t2
                sig = _segment_value(i, j, t_best)
                if sig > 0.0:
                    blend = np.zeros(n_act)
                    blend[i] = sig * t_best
                    blend[j] = sig * (1.0 - t_best)
                    consider(blend)

    # water-filling rounds
    y = np.full(n_act, y0)
    frozen = np.zeros(n_act, dtype=bool)
    rounds = 0
    stalls = 0
    max_rounds = 4 * n_act + 16
    while rounds < max_rounds:
        rounds += 1
        v, lmax = prices_and_lmax(y)
        frozen |= v > 1.0 - delta / 2.0
        active = ~frozen
        if not active.any() or lmax >= 1.0 - 1e-9:
            break
        # cheap coordinates grow faster: multiplicative step weighted by
        # how far each price sits below 1
        grow = np.clip(1.0 - v[active], delta / 2.0, 1.0)

        def admissible(gamma):
            trial = y.copy()
            trial[active] *= gamma**grow
            tv, tl = prices_and_lmax(trial)
            return tl <= 1.0 and float(np.max(tv[active])) <= 1.0

        lo, hi = 1.0, 2.0
        while admissible(hi) and hi < 1e12:
            lo = hi
            hi *= 2.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        if lo <= 1.0 + 1e-7:
            stalls += 1
            if stalls >= 3:
                break
        y[active] *= lo**grow
        consider(y)

    # fill whatever slack remains, then keep the best boundary point
    msums = [np.tensordot(y, abar[k], axes=1) for k in range(k_blocks)]
    scale0 = max(float(eigvalsh(mk)[-1]) for mk in msums)
    if scale0 > 1.0:
        y /= scale0
        msums = [mk / scale0 for mk in msums]
    for _ in range(2):
        y, msums = _saturate(y, abar, msums, range(n_act))
        consider(y)

    # polish the incumbent: grow it greedily, and probe dropping one
    # coordinate at a time so a strong axis cannot shadow a better mixture
    def _msums_of(yvec):
        return [np.tensordot(yvec, abar[k], axes=1) for k in range(k_blocks)]

    for _ in range(4):
        if best_y is None:
            break
        prev = best_val
        base = best_y.copy()
        for order in greedy_orders:
            cand, _ = _saturate(base.copy(), abar, _msums_of(base), order)
            consider(cand)
        support = np.flatnonzero(base > 0.0)
        if support.size > 8:
            support = support[np.argsort(-base[support])[:8]]
        for i in support:
            dropped = base.copy()
            dropped[i] = 0.0
            cand, _ = _saturate(dropped, abar, _msums_of(dropped), greedy_orders[-1])
            consider(cand)
        if best_val <= prev * (1.0 + 1e-12):
            break

    if best_y is None:
        return zero
    x = np.zeros(m)
    x[live] = best_y / c[live]
    return SdpSolution(
        x=x,
        objective=float(c @ x),
        rounds=rounds,
        n_price_evals=n_evals,
        scale=best_val / max(float(best_y.sum()), 1e-300),
    )


# ---------------------------------------------------------------------------
# benchmark helpers: diagonal instances have an exact LP reference


def random_diagonal_instance(seed, dim, m_factors, k_blocks=2, delta=0.05):
    """Random packing instance with diagonal factors and blocks.

    Diagonal instances are ordinary LPs, so lp_optimum gives their exact
    value; the selftest and the solver benchmarks are built on this.
    """
    rng = rng_from(seed)
    diags = rng.random((m_factors, dim)) * (rng.random((m_factors, dim)) < 0.7)
    # make sure no factor is identically zero
    for i in range(m_factors):
        if not diags[i].any():
            diags[i, int(rng.integers(dim))] = rng.random() + 0.1
    factors = np.stack([np.diag(row) for row in diags])
    blocks = [np.diag(0.5 + 1.5 * rng.random(dim)) for _ in range(k_blocks)]
    c = 0.1 + 0.9 * rng.random(m_factors)
    return SdpInstance(c=c, factors=factors, blocks=blocks, delta=delta)


def lp_optimum(instance):
    """Exact optimum of a diagonal packing instance via linear programming."""
    from scipy.optimize import linprog

    fac = np.asarray(instance.factors, dtype=float)
    m, d = fac.shape[0], fac.shape[1]
    offdiag = np.abs(fac - np.stack([np.diag(np.diag(f)) for f in fac])).max()
    if offdiag > 1e-12:
        raise SdpDomainError("lp_optimum needs diagonal factors")
    rows = []
    rhs = []
    for blk in instance.blocks:
        if np.abs(blk - np.diag(np.diag(blk))).max() > 1e-12:
            raise SdpDomainError("lp_optimum needs diagonal blocks")
        rows.append(np.stack([np.diag(f) for f in fac], axis=1))
        rhs.append(np.diag(blk))
    a_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    res = linprog(
        -np.asarray(instance.c, dtype=float),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise SdpDomainError(f"reference LP failed: {res.message}")
    return float(-res.fun)
