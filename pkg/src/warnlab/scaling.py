"""Parameter sweeps toward the bifurcation point and power-law diagnostics.

A sweep evaluates named covariance quantities along an increasing grid of
parameter values below p*, either from the closed forms (analytic engine) or
from ensemble simulation (empirical engine). Scaling exponents are read off
by ordinary least squares in log-log coordinates; by default fits use the
last decade of distances |p - p*|, where the asymptotic laws dominate.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import NumericalError
from .lyapunov import (
    XiEstimate,
    jordan_stationary_covariance,
    multiplication_covariance_norm,
    quadratic_form_pairing,
    stationary_covariance_entry,
    stationary_pairing,
    unit_gaussian_profile,
)
from .sde import EnsembleConfig, simulate_ensemble, splitmix64
from .spectrum import (
    MultiplicationSymbolModel,
    SpectralModel,
    bifurcation_parameter,
    build_weyl_sequence,
)

_SPECTRAL_KINDS = ("critical_diagonal", "entry", "block_entry")
_MULTIPLICATION_KINDS = ("norm", "gaussian_pairing", "weyl_pairing")


@dataclass(frozen=True)
class QuantitySpec:
    """Parsed sweep quantity. ``name`` is the canonical string form used as
    series key and in CSV output."""

    kind: str
    k: int | None = None
    j: int | None = None
    l: int | None = None
    m: int | None = None

    @property
    def name(self) -> str:
        if self.kind == "entry":
            return f"entry:{self.k},{self.j}"
        if self.kind == "block_entry":
            return f"block_entry:{self.l},{self.m}"
        if self.kind == "weyl_pairing":
            return f"weyl_pairing:{self.k}"
        return self.kind


def parse_quantity(q) -> QuantitySpec:
    """Parse a quantity description such as ``critical_diagonal``,
    ``entry:0,1``, ``block_entry:1,2``, ``norm``, ``gaussian_pairing`` or
    ``weyl_pairing:5``."""
    if isinstance(q, QuantitySpec):
        return q
    if not isinstance(q, str):
        raise ValueError(f"quantity: expected a string, got {type(q).__name__}")
    head, _, tail = q.partition(":")
    head = head.strip()
    try:
        if head in ("critical_diagonal", "norm", "gaussian_pairing"):
            if tail:
                raise ValueError
            return QuantitySpec(kind=head)
        if head == "entry":
            k_s, j_s = tail.split(",")
            return QuantitySpec(kind="entry", k=int(k_s), j=int(j_s))
        if head == "block_entry":
            l_s, m_s = tail.split(",")
            l, m = int(l_s), int(m_s)
            if l < 1 or m < 1:
                raise ValueError
            return QuantitySpec(kind="block_entry", l=l, m=m)
        if head == "weyl_pairing":
            k = int(tail)
            if k < 1:
                raise ValueError
            return QuantitySpec(kind="weyl_pairing", k=k)
    except ValueError:
        pass
    raise ValueError(f"quantity: cannot parse {q!r}")


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Quantity series along a parameter grid below p*."""

    p_values: np.ndarray
    quantities: Mapping[str, np.ndarray]
    p_star: float
    provenance: Mapping[str, str]
    stderrs: Mapping[str, np.ndarray | None] = field(default_factory=dict)
    mixing_warning: bool = False

    def __post_init__(self):
        p = np.asarray(self.p_values, dtype=float)
        object.__setattr__(self, "p_values", p)
        qs = {}
        for name, vals in dict(self.quantities).items():
            arr = np.asarray(vals, dtype=float)
            if arr.shape != p.shape:
                raise ValueError(f"quantities[{name!r}]: length mismatch with p_values")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"quantities[{name!r}]: non-finite values")
            qs[name] = arr
        object.__setattr__(self, "quantities", qs)

    def distances(self) -> np.ndarray:
        return self.p_star - self.p_values


@dataclass(frozen=True)
class ScalingFit:
    """OLS power-law fit value ~ exp(log_prefactor) * distance^exponent."""

    exponent: float
    log_prefactor: float
    r_squared: float
    window: tuple
    residual_std: float


@dataclass(frozen=True)
class WarningSignVerdict:
    classification: str
    fitted_exponent: float
    xi: XiEstimate | None
    rationale: str


def make_p_grid(p_star: float, start: float, count: int, factor: float = 0.5,
                stop: float | None = None, spacing: str = "geometric") -> np.ndarray:
    """Build an increasing parameter grid approaching p* from below.

    Geometric spacing (the default) contracts the distance to p* by ``factor``
    per step, or interpolates geometrically between start and stop when a stop
    value is given; linear spacing requires a stop value.
    """
    if count < 1:
        raise ValueError("count: must be >= 1")
    if spacing == "linear":
        if stop is None:
            raise ValueError("linear spacing requires a stop value")
        grid = np.linspace(start, stop, count)
    elif spacing == "geometric":
        d0 = p_star - start
        if d0 <= 0:
            raise ValueError("start: must lie strictly below p*")
        if stop is not None:
            d1 = p_star - stop
            if d1 <= 0:
                raise ValueError("stop: must lie strictly below p*")
            dists = np.geomspace(d0, d1, count)
        else:
            if not (0.0 < factor < 1.0):
                raise ValueError("factor: must lie in (0, 1)")
            dists = d0 * factor ** np.arange(count)
        grid = p_star - dists
    else:
        raise ValueError(f"spacing: unknown value {spacing!r}")
    if np.any(np.diff(grid) <= 0) or np.any(grid >= p_star):
        raise ValueError("grid: must be strictly increasing and stay below p*")
    return grid


def _validate_specs(model, specs: Sequence[QuantitySpec]) -> None:
    spectral = isinstance(model, SpectralModel)
    for spec in specs:
        if spectral and spec.kind not in _SPECTRAL_KINDS:
            raise ValueError(f"quantity {spec.name!r} is not defined for spectral models")
        if not spectral and spec.kind not in _MULTIPLICATION_KINDS:
            raise ValueError(f"quantity {spec.name!r} is not defined for multiplication models")
        if spec.kind == "entry":
            for idx in (spec.k, spec.j):
                model.curve(idx)
                if model.block_size(idx) != 1:
                    raise ValueError(
                        f"quantity {spec.name!r}: mode {idx} carries a Jordan block, "
                        "use block_entry:l,m instead"
                    )
        if spec.kind == "block_entry":
            size = model.block_size(model.critical_index)
            if max(spec.l, spec.m) > size:
                raise ValueError(
                    f"quantity {spec.name!r}: critical block has size {size}"
                )


def _critical_block_cov(model: SpectralModel, p: float) -> np.ndarray:
    k = model.critical_index
    lam = model.lambda_at(k, p)
    m = model.block_size(k)
    sigma = model.sigma_at(p)
    if m == 1:
        off = model.block_offset(k)
        val = stationary_covariance_entry(lam, lam, model.noise_matrix[off, off], sigma)
        return np.array([[val]])
    return jordan_stationary_covariance(lam, m, model.noise_block(k), sigma)


def _eval_point_analytic(model, p: float, specs, cache) -> list[float]:
    out = []
    block = None
    for spec in specs:
        if spec.kind in ("critical_diagonal", "block_entry"):
            if block is None:
                block = _critical_block_cov(model, p)
            if spec.kind == "critical_diagonal":
                out.append(abs(block[0, 0]))
            else:
                out.append(abs(block[spec.l - 1, spec.m - 1]))
        elif spec.kind == "entry":
            val = stationary_covariance_entry(
                model.lambda_at(spec.k, p),
                model.lambda_at(spec.j, p),
                model.noise_matrix[model.block_offset(spec.k), model.block_offset(spec.j)],
                model.sigma_at(p),
            )
            out.append(abs(val))
        elif spec.kind == "norm":
            out.append(multiplication_covariance_norm(model, p))
        elif spec.kind == "gaussian_pairing":
            out.append(quadratic_form_pairing(model, p, cache["gaussian"]))
        elif spec.kind == "weyl_pairing":
            out.append(stationary_pairing(model, p, cache["weyl", spec.k]))
        else:  # pragma: no cover - parse_quantity guards this
            raise ValueError(f"unknown quantity kind {spec.kind!r}")
    return out


def _entry_index(model: SpectralModel, spec: QuantitySpec) -> tuple[int, int]:
    if spec.kind == "critical_diagonal":
        off = model.block_offset(model.critical_index)
        return off, off
    if spec.kind == "entry":
        return model.block_offset(spec.k), model.block_offset(spec.j)
    off = model.block_offset(model.critical_index)
    return off + spec.l - 1, off + spec.m - 1


def _eval_point_empirical(model, p, specs, config, point_seed):
    cfg = replace(config, master_seed=point_seed)
    emp = simulate_ensemble(model, p, cfg)
    vals, errs = [], []
    for spec in specs:
        i, j = _entry_index(model, spec)
        vals.append(abs(emp.matrix[i, j]))
        errs.append(float(emp.standard_error[i, j]))
    return vals, errs, emp.mixing_warning


def run_parameter_sweep(model, p_grid, quantities, engine: str = "analytic",
                        config: EnsembleConfig | None = None, p_star: float | None = None,
                        threads: int = 1, bracket: tuple[float, float] = (-100.0, 100.0)) -> SweepResult:
    """Evaluate quantity series along ``p_grid``.

    Sweep points are independent; with ``threads > 1`` they are evaluated in a
    thread pool and reassembled in grid order, so the result is identical to a
    serial run. The empirical engine derives one seed per grid point from the
    ensemble master seed, making the whole sweep reproducible.
    """
    p = np.asarray(p_grid, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("p_grid: need a 1-d grid with at least one point")
    if np.any(np.diff(p) <= 0):
        raise ValueError("p_grid: must be strictly increasing")
    specs = [parse_quantity(q) for q in quantities]
    if not specs:
        raise ValueError("quantities: need at least one quantity")
    _validate_specs(model, specs)
    if p_star is None:
        p_star = bifurcation_parameter(model, bracket)
    if np.any(p >= p_star):
        raise NumericalError(
            f"sweep grid reaches p* = {p_star}: all points must lie strictly below"
        )
    if engine not in ("analytic", "empirical"):
        raise ValueError(f"engine: unknown value {engine!r}")
    if engine == "empirical":
        if not isinstance(model, SpectralModel):
            raise ValueError("engine 'empirical' is only available for spectral models")
        if config is None:
            raise ValueError("engine 'empirical' requires an EnsembleConfig")
    cache = {}
    if isinstance(model, MultiplicationSymbolModel):
        if any(s.kind == "gaussian_pairing" for s in specs):
            cache["gaussian"] = unit_gaussian_profile(model)
        for spec in specs:
            if spec.kind == "weyl_pairing" and ("weyl", spec.k) not in cache:
                center = float(model.argmax_points[0])
                cache["weyl", spec.k] = build_weyl_sequence(model, spec.k, center)

    def job(i: int):
        pi = float(p[i])
        try:
            if engine == "analytic":
                return _eval_point_analytic(model, pi, specs, cache), None, False
            return _eval_point_empirical(model, pi, specs, config, splitmix64(config.master_seed, i))
        except NumericalError as exc:
            raise NumericalError(f"sweep failed at p={pi}: {exc}") from exc

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(p.size)))
    else:
        results = [job(i) for i in range(p.size)]

    names = [s.name for s in specs]
    values = {name: np.empty(p.size) for name in names}
    errors = {name: (np.empty(p.size) if engine == "empirical" else None) for name in names}
    warned = False
    for i, res in enumerate(results):
        vals, errs, warn = res
        warned = warned or warn
        for name, v in zip(names, vals):
            values[name][i] = v
        if errs is not None:
            for name, e in zip(names, errs):
                errors[name][i] = e
    return SweepResult(
        p_values=p,
        quantities=values,
        p_star=float(p_star),
        provenance={name: engine for name in names},
        stderrs=errors,
        mixing_warning=warned,
    )


def fit_power_law(distances, values) -> ScalingFit:
    """Least-squares fit of log(value) against log(distance).

    Raises:
        NumericalError: on fewer than 3 points or nonpositive inputs.
    """
    d = np.asarray(distances, dtype=float)
    v = np.asarray(values, dtype=float)
    if d.ndim != 1 or d.shape != v.shape:
        raise ValueError("distances/values: need matching 1-d arrays")
    if d.size < 3:
        raise NumericalError(f"fit_power_law: need at least 3 points, got {d.size}")
    if np.any(d <= 0) or np.any(v <= 0) or not (np.all(np.isfinite(d)) and np.all(np.isfinite(v))):
        raise NumericalError("fit_power_law: distances and values must be positive and finite")
    x = np.log(d)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0.0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 * d.size else 0.0
    return ScalingFit(
        exponent=float(slope),
        log_prefactor=float(intercept),
        r_squared=float(r2),
        window=tuple(range(d.size)),
        residual_std=float(np.sqrt(ss_res / (d.size - 2))) if d.size > 2 else 0.0,
    )


def select_window(distances, window="last_decade") -> np.ndarray:
    """Resolve a fit-window description to grid indices.

    ``"last_decade"`` keeps points within a factor 10 of the smallest
    distance (at least 3 points); ``"all"`` keeps everything; a (lo, hi) pair
    keeps distances inside the closed interval; any other sequence is taken as
    explicit indices.
    """
    d = np.asarray(distances, dtype=float)
    if isinstance(window, str):
        if window == "all":
            return np.arange(d.size)
        if window == "last_decade":
            dmin = float(np.min(d))
            idx = np.nonzero(d <= 10.0 * dmin * (1.0 + 1e-9))[0]
            if idx.size < 3:
                idx = np.argsort(d)[:3]
                idx.sort()
            return idx
        raise ValueError(f"window: unknown specification {window!r}")
    win = tuple(window)
    if len(win) == 2 and not isinstance(win[0], (int, np.integer)):
        lo, hi = float(win[0]), float(win[1])
        idx = np.nonzero((d >= lo) & (d <= hi))[0]
        if idx.size < 3:
            raise NumericalError(f"window [{lo}, {hi}]: fewer than 3 sweep points inside")
        return idx
    return np.asarray(win, dtype=int)


def fit_quantity(sweep: SweepResult, quantity: str, window="last_decade") -> ScalingFit:
    """Power-law fit of one sweep series over the selected distance window."""
    if quantity not in sweep.quantities:
        raise ValueError(f"quantity {quantity!r} not present in sweep")
    d = sweep.distances()
    idx = select_window(d, window)
    fit = fit_power_law(d[idx], sweep.quantities[quantity][idx])
    return replace(fit, window=tuple(int(i) for i in idx))


def classify_warning_sign(sweep: SweepResult, quantity: str, xi: XiEstimate | None = None,
                          window="last_decade") -> WarningSignVerdict:
    """Classify the near-critical behavior of one quantity series.

    diverging: fitted exponent < -0.5 with r_squared > 0.99. vanishing:
    exponent > 0.5. finite_limit: |exponent| <= 0.1 (with a converged noise
    limit Xi when the noise amplitude depends on p). Ambiguous fits fall back
    to finite_limit with the reservation spelled out in the rationale.
    """
    fit = fit_quantity(sweep, quantity, window)
    exp = fit.exponent
    base = (
        f"exponent {exp:.6g} with r^2 {fit.r_squared:.6g} over "
        f"{len(fit.window)} points nearest p*"
    )
    if exp < -0.5 and fit.r_squared > 0.99:
        cls, note = "diverging", "clean divergence"
    elif exp > 0.5:
        cls, note = "vanishing", "decay toward p*"
    elif abs(exp) <= 0.1 and (xi is None or xi.converged):
        cls, note = "finite_limit", "flat series"
        if xi is not None:
            note += f"; noise limit Xi = {xi.value:.6g} (converged)"
    else:
        cls, note = "finite_limit", "inconclusive fit, defaulting to finite_limit"
        if xi is not None and not xi.converged:
            note += "; Xi estimate not converged"
    return WarningSignVerdict(
        classification=cls, fitted_exponent=float(exp), xi=xi, rationale=f"{base}; {note}"
    )


def weyl_divergence_probe(model: MultiplicationSymbolModel, k_values, p_grid) -> SweepResult:
    """Pairing series <V_inf u_k, u_k> for a family of Weyl vectors.

    Each k is probed on the same grid; the Weyl vectors are centered on the
    (leftmost) argmax point of the symbol. The limits never interleave: k is
    fixed per series while p sweeps toward p*.
    """
    ks = [int(k) for k in k_values]
    if not ks:
        raise ValueError("k_values: need at least one width index")
    quantities = [f"weyl_pairing:{k}" for k in ks]
    return run_parameter_sweep(model, p_grid, quantities, engine="analytic")


def write_sweep_csv(sweep: SweepResult, quantity: str, path) -> None:
    """Write one quantity series as CSV with columns
    p,quantity,value,stderr,provenance (stderr blank for analytic rows)."""
    import csv as _csv

    if quantity not in sweep.quantities:
        raise ValueError(f"quantity {quantity!r} not present in sweep")
    vals = sweep.quantities[quantity]
    errs = sweep.stderrs.get(quantity)
    prov = sweep.provenance[quantity]
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["p", "quantity", "value", "stderr", "provenance"])
        for i, p in enumerate(sweep.p_values):
            err = "" if errs is None else repr(float(errs[i]))
            writer.writerow([repr(float(p)), quantity, repr(float(vals[i])), err, prov])
