"""Expected destination cost, closed-form references and parameter sweeps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc

from .aoi_cost import AoiCostModel, PowerCost
from .baselines import BenchmarkMechanism, CompleteInformationPricing
from .cost_dist import Tabulated, TruncExp, Uniform
from .errors import ConfigError
from .mech_multi import MultiSourceMechanism, Source, SourceProfile
from .mech_quantized import QuantizedMultiMechanism, QuantizedSingleMechanism, build_quantized
from .mech_single import DEFAULT_FMAX, SingleSourceMechanism
from .numerics import gl_nodes

QUAD_NODES = 200
QMC_POINTS = 1 << 16
QMC_SCRAMBLES = 16
PAYMENT_SAMPLES = 4096
QUAD_TOL = 1e-6
SE_FLAG = 0.005

CSV_HEADER = ("experiment", "seed", "param_name", "param_value", "J_complete",
              "J_optimal", "J_quantized", "J_benchmark", "stderr")


@dataclass
class EvaluationReport:
    mechanism: str
    J: float
    estimator: str
    samples: int
    stderr: float = 0.0
    J_payment: float = math.nan
    J_virtual: float = math.nan
    consistent: bool = True
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def aoi_cost_rate(aoi: AoiCostModel, F):
    """``G(1/F) * F``: the AoI part of the destination's cost rate."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(F > 0, 1.0 / np.where(F > 0, F, 1.0), np.inf)
        out = np.where(F > 0, aoi._G(np.where(np.isfinite(x), x, 1.0)) * F, np.inf)
    return np.where(np.isinf(F), 0.0, out)


def _name(mech):
    return getattr(mech, "name", None) or {
        SingleSourceMechanism: "optimal", MultiSourceMechanism: "optimal",
        QuantizedSingleMechanism: "quantized", QuantizedMultiMechanism: "quantized",
    }.get(type(mech), type(mech).__name__)


def _is_ic_minimal(mech):
    # the virtual-cost form of the objective holds for IC mechanisms whose
    # top type earns nothing; complete-information pricing is not IC
    return not isinstance(mech, CompleteInformationPricing)


def _single_quadrature(mech, nodes):
    """Quadrature over one source's cost for single-source style mechanisms."""
    if isinstance(mech, SingleSourceMechanism):
        dist, aoi = mech.dist, mech.aoi
        bps = mech.breakpoints()
        rate = mech._rate
        pay = lambda c: mech.payments_on_grid(c)
    else:
        dist, aoi = mech.profile.dists[0], mech.aoi
        fmax = mech.profile.fmax[0]
        bps = [dist.c_low, dist.c_high]
        if isinstance(mech, CompleteInformationPricing) and math.isfinite(fmax):
            kink = float(aoi.reduction_at_rate(fmax))
            if dist.c_low < kink < dist.c_high:
                bps.append(kink)
        if isinstance(mech, MultiSourceMechanism):
            bps.extend(SingleSourceMechanism(dist, aoi, fmax).breakpoints())
        rate = lambda c: mech.rates_batch(c[:, None])[0][:, 0]
        pay = lambda c: mech.payments_batch(c[:, None])[:, 0]
    bps = np.unique(np.asarray(bps, dtype=float))
    if isinstance(dist, Tabulated):
        bps = np.unique(np.concatenate([bps, dist.knots]))
    lo = dist.c_low
    u, w = gl_nodes(np.sqrt(bps[:-1] - lo), np.sqrt(bps[1:] - lo), nodes)
    z = np.minimum(lo + (u * u).ravel(), dist.c_high)
    wz = (w * 2.0 * u).ravel() * dist._pdf(z)
    f = rate(z)
    base = aoi_cost_rate(aoi, f)
    jp = float(np.sum(wz * (base + pay(z))))
    jv = float(np.sum(wz * (base + dist._phi(z) * f))) if _is_ic_minimal(mech) else math.nan
    return jp, jv, int(z.size)


def _quantized_single_exact(mech: QuantizedSingleMechanism):
    dist, q = mech.dist, mech.quantizer
    P = np.diff(dist._cdf(q.edges))
    Phi = q.edges * dist._cdf(q.edges)
    base = aoi_cost_rate(mech.aoi, mech.cell_rates)
    jp = float(np.sum(P * (base + mech.cell_payments)))
    jv = float(np.sum(P * base + mech.cell_rates * np.diff(Phi)))
    return jp, jv, len(q)


def qmc_costs(profile: SourceProfile, n=QMC_POINTS, scrambles=QMC_SCRAMBLES, seed=0):
    """``scrambles`` independent scrambled Sobol blocks mapped through each prior.

    Returns an array ``(scrambles, n // scrambles, I)``.
    """
    per = n // scrambles
    m = int(round(math.log2(per)))
    if 2 ** m != per:
        raise ConfigError("points per scramble must be a power of two")
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(scrambles):
        U = qmc.Sobol(d=len(profile), scramble=True, seed=rng).random_base2(m)
        blocks.append(np.column_stack([d._quantile(U[:, i]) for i, d in enumerate(profile.dists)]))
    return np.stack(blocks)


def _block_stats(values):
    means = values.mean(axis=1)
    se = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else math.nan
    return float(means.mean()), se


def _multi_mc(mech, n, scrambles, seed, payment_samples):
    profile, aoi = mech.profile, mech.aoi
    C = qmc_costs(profile, n, scrambles, seed)
    R, per, I = C.shape
    flat = C.reshape(-1, I)
    f, F, _ = mech.rates_batch(flat)
    base = aoi_cost_rate(aoi, F)
    cheap = isinstance(mech, (BenchmarkMechanism, CompleteInformationPricing))
    jv = sev = math.nan
    if _is_ic_minimal(mech):
        phi = profile.raw_phi(flat)
        jv, sev = _block_stats((base + np.sum(phi * f, axis=1)).reshape(R, per))
    k = per if cheap else max(1, min(per, payment_samples // R))
    sub = C[:, :k, :].reshape(-1, I)
    H = mech.payments_batch(sub)
    sub_base = base.reshape(R, per)[:, :k]
    jp, sep = _block_stats(sub_base + H.sum(axis=1).reshape(R, k))
    if cheap:
        J, se = jp, sep
    else:
        J, se = jv, sev
    consistent = True
    if not (math.isnan(jv) or math.isnan(jp)):
        consistent = abs(jp - jv) <= 3.0 * math.hypot(sep, sev) + 1e-12 * abs(J)
    return EvaluationReport(_name(mech), J, "monte-carlo", R * per, se, jp, jv, consistent,
                            {"scrambles": R, "payment_samples": R * k})


def expected_cost(mech, estimator="auto", nodes=QUAD_NODES, n=QMC_POINTS,
                  scrambles=QMC_SCRAMBLES, seed=0, payment_samples=PAYMENT_SAMPLES):
    """Expected destination cost rate ``E[G(1/F) F + sum_i h_i]`` under truthful reports.

    Single-source mechanisms use composite Gauss-Legendre over the prior
    (quantized ones an exact cell sum); multi-source ones use scrambled
    Sobol points. Both the payment form and the virtual-cost form are
    computed and compared.
    """
    single = isinstance(mech, (SingleSourceMechanism, QuantizedSingleMechanism)) or \
        (hasattr(mech, "profile") and len(mech.profile) == 1 and not isinstance(mech, QuantizedMultiMechanism))
    if estimator == "auto":
        estimator = "quadrature" if single else "monte-carlo"
    if estimator == "quadrature":
        if not single:
            raise ConfigError("quadrature is only available for single-source mechanisms")
        if isinstance(mech, QuantizedSingleMechanism):
            jp, jv, k = _quantized_single_exact(mech)
            kind = "exact-sum"
        else:
            jp, jv, k = _single_quadrature(mech, nodes)
            kind = "quadrature"
        ok = math.isnan(jv) or abs(jp - jv) <= QUAD_TOL * max(1.0, abs(jp))
        return EvaluationReport(_name(mech), jp, kind, k, 0.0, jp, jv, ok)
    if estimator == "monte-carlo":
        if isinstance(mech, SingleSourceMechanism):
            mech = MultiSourceMechanism([Source(mech.dist, mech.f_max)], mech.aoi)
        elif isinstance(mech, QuantizedSingleMechanism):
            base = MultiSourceMechanism([Source(mech.dist, mech.f_max)], mech.aoi)
            mech = QuantizedMultiMechanism(base, mech.delta_q, mech.quantizer.anchor)
        return _multi_mc(mech, n, scrambles, seed, payment_samples)
    raise ConfigError(f"unknown estimator {estimator!r}")


# closed forms -------------------------------------------------------------

def closed_forms(setting, alpha, c_high, c_low=0.0, mu=1.0):
    """Reference values for a single source with power AoI cost and no binding cap.

    ``setting`` is ``"uniform"`` or ``"trunc_exp"`` (rate ``mu``, support
    ``[0, c_high]``). Returns J_B, J_C, J_star, their ratios, and the
    uniform-case ratio bounds.
    """
    a = float(alpha)
    beta = a / (1.0 + a)
    k = (1.0 + 1.0 / a) ** beta
    J_B = (c_high * (1.0 + 1.0 / a)) ** beta
    out = {"setting": setting, "alpha": a, "c_low": c_low, "c_high": c_high}
    if setting == "uniform":
        s = 1.0 + beta
        w = c_high - c_low
        J_C = k * (c_high ** s - c_low ** s) / (s * w)
        J_S = (2.0 * (1.0 + 1.0 / a)) ** beta / s * ((c_high - c_low / 2) ** s - (c_low / 2) ** s) / w
    elif setting == "trunc_exp":
        out["c_low"] = 0.0
        out["mu"] = mu
        mass = -math.expm1(-mu * c_high)
        dens = lambda c: mu * math.exp(-mu * c) / mass
        J_C = k * integrate.quad(lambda c: c ** beta * dens(c), 0.0, c_high, limit=200)[0]
        phi = lambda c: c + math.expm1(mu * c) / mu
        J_S = k * integrate.quad(lambda c: phi(c) ** beta * dens(c), 0.0, c_high, limit=200)[0]
        if mu == 1.0:
            s = 1.0 + beta
            out["J_C_incomplete_gamma"] = k / mass * special.gamma(s) * special.gammainc(s, c_high)
    else:
        raise ConfigError(f"unknown closed-form setting {setting!r}")
    out.update(J_B=J_B, J_C=J_C, J_star=J_S, ratio_B_C=J_B / J_C, ratio_star_C=J_S / J_C,
               bound_B_C=1.0 + beta, bound_star_C=2.0 ** beta)
    return out


# sweeps ---------------------------------------------------------------------

def _threads(threads=None):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("AOI_MECH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def row_seed(master, row):
    return int(np.random.SeedSequence([int(master), int(row)]).generate_state(1)[0])


def _trunc(mu, c_high, mu_kind):
    rate = 1.0 / mu if mu_kind == "scale" else mu
    return TruncExp(rate, c_high)


def _evaluate_all(profile, aoi, delta_q, seed, mc):
    mechs = {
        "J_complete": CompleteInformationPricing(profile, aoi),
        "J_optimal": MultiSourceMechanism(profile, aoi),
        "J_benchmark": BenchmarkMechanism(profile, aoi),
    }
    if len(profile) == 1:
        src = profile[0]
        mechs["J_optimal"] = SingleSourceMechanism(src.dist, aoi, src.f_max)
    mechs["J_quantized"] = build_quantized(mechs["J_optimal"], delta_q)
    out, se, rel = {}, 0.0, 0.0
    for key, m in mechs.items():
        rep = expected_cost(m, seed=seed, **mc) if len(profile) > 1 else expected_cost(m)
        out[key] = rep.J
        if rep.estimator == "monte-carlo":
            se = max(se, rep.stderr)
            rel = max(rel, rep.stderr / abs(rep.J))
    return out, se, rel


def _sweep_tasks(name, cfg):
    alpha = cfg.get("alpha", 1.0)
    fmax = cfg.get("f_max", DEFAULT_FMAX)
    tasks = []
    if name == "quantloss":
        for kind, dist in (("uniform", Uniform(cfg.get("c_low", 5.0), cfg.get("c_high", 30.0))),
                           ("trunc_exp", TruncExp(cfg.get("mu", 1.0), cfg.get("c_high", 30.0)))):
            for n_int in cfg.get("intervals", list(range(1, 11))):
                delta = dist.width / n_int
                tasks.append((f"{kind}.intervals", n_int, [(dist, fmax)], alpha, delta))
    elif name in ("fig5", "fig6"):
        delta = cfg.get("delta_q", 1.0)
        make = (lambda ch: Uniform(cfg.get("c_low", 5.0), ch)) if name == "fig5" \
            else (lambda ch: TruncExp(cfg.get("mu", 1.0), ch))
        default_ch = [10, 20, 30, 50, 100, 300, 1000] if name == "fig5" else [5, 10, 20, 30, 50, 100]
        for ch in cfg.get("c_high_values", default_ch):
            tasks.append(("c_high", ch, [(make(ch), fmax)], alpha, delta))
        for a in cfg.get("alpha_values", [0.25, 0.5, 1.0, 2.0, 4.0]):
            tasks.append(("alpha", a, [(make(cfg.get("c_high", 30.0)), fmax)], a, delta))
    elif name in ("fig7", "fig8"):
        delta = cfg.get("delta_q", 0.5)
        kind = cfg.get("mu_kind", "scale")
        mu1, mui = cfg.get("mu1", 0.5), cfg.get("mu_other", 2.0)
        ch = cfg.get("c_high", 20.0)
        prof = lambda I, ch_, mu_: [(_trunc(mu1, ch_, kind), fmax)] + \
            [(_trunc(mu_, ch_, kind), fmax) for _ in range(I - 1)]
        if name == "fig7":
            for c in cfg.get("c_high_values", [5, 10, 20, 30]):
                tasks.append(("c_high", c, prof(cfg.get("I", 4), c, mui), alpha, delta))
            for I in cfg.get("I_values", [2, 3, 4, 5, 6, 7, 8]):
                tasks.append(("I", I, prof(I, ch, mui), alpha, delta))
        else:
            for mu in cfg.get("mu_values", [0.5, 1.0, 2.0, 4.0]):
                tasks.append(("mu", mu, prof(cfg.get("I", 4), ch, mu), alpha, delta))
    else:
        raise ConfigError(f"unknown experiment {name!r}")
    return tasks


def _run_row(args):
    name, row, master, task, mc = args
    pname, pval, pairs, alpha, delta = task
    seed = row_seed(master, row)
    profile = SourceProfile([Source(d, fm) for d, fm in pairs])
    vals, se, rel = _evaluate_all(profile, PowerCost(alpha), delta, seed, mc)
    out = {"experiment": name, "seed": seed, "param_name": pname, "param_value": pval,
           "stderr": se, **vals}
    if rel > SE_FLAG:
        for key in ("J_complete", "J_optimal", "J_quantized", "J_benchmark"):
            out[key] = math.nan
    return out


def run_sweep(name, config=None, seed=0, threads=None):
    """Rows of ``CSV_HEADER`` for one experiment; rows run in parallel, output is ordered."""
    cfg = dict(config or {})
    mc = {k: cfg[k] for k in ("n", "scrambles", "payment_samples") if k in cfg}
    tasks = [(name, r, seed, t, mc) for r, t in enumerate(_sweep_tasks(name, cfg))]
    workers = min(_threads(threads), len(tasks))
    if workers <= 1:
        return [_run_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_row, tasks))
