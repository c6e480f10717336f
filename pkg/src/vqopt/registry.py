"""Optimizer registry: string ids mapped to a uniform calling convention.

Every registered optimizer is invoked as
``fn(obj, box, x0, budget, seed=..., **extra)`` and returns an
OptimizeOutcome (implicit filtering additionally returns its StallReport).
"""

from __future__ import annotations

from typing import Callable, Dict

from .core import ContractViolation


def _imfil(obj, box, x0, budget, seed=0, options=None, **kw):
    from .imfil import ImfilOptions, imfil_minimize
    opts = ImfilOptions(**options) if isinstance(options, dict) else options
    return imfil_minimize(obj, box, x0, budget, opts)


def _snobfit(obj, box, x0, budget, seed=0, options=None, initial_records=None, **kw):
    from .snobfit import SnobOptions, snobfit_minimize
    opts = SnobOptions(**options) if isinstance(options, dict) else options
    return snobfit_minimize(obj, box, x0, budget, opts, seed=seed,
                            initial_records=initial_records)


def _bobyqa(obj, box, x0, budget, seed=0, options=None, **kw):
    from .trustregion import TrOptions, tr_minimize
    opts = TrOptions(**options) if isinstance(options, dict) else options
    return tr_minimize(obj, box, x0, budget, opts)


def _mads(obj, box, x0, budget, seed=0, options=None, **kw):
    from .mads import MadsOptions, mads_minimize
    opts = MadsOptions(**options) if isinstance(options, dict) else options
    return mads_minimize(obj, box, x0, budget, opts, seed=seed)


def _bfgs(obj, box, x0, budget, seed=0, options=None, **kw):
    from .baselines import BfgsOptions, bfgs_minimize
    opts = BfgsOptions(**options) if isinstance(options, dict) else options
    return bfgs_minimize(obj, box, x0, budget, opts)


def _neldermead(obj, box, x0, budget, seed=0, options=None, **kw):
    from .baselines import SimplexOptions, nelder_mead_minimize
    opts = SimplexOptions(**options) if isinstance(options, dict) else options
    return nelder_mead_minimize(obj, box, x0, budget, opts)


def _compose(obj, box, x0, budget, seed=0, options=None, **kw):
    from .compose import CompositionPlan, run_composition
    plan = CompositionPlan(**options) if isinstance(options, dict) else options
    return run_composition(obj, box, x0, budget, plan, seed=seed)


_OPTIMIZERS: Dict[str, Callable] = {
    "imfil": _imfil,
    "snobfit": _snobfit,
    "bobyqa": _bobyqa,
    "mads": _mads,
    "bfgs": _bfgs,
    "neldermead": _neldermead,
    "compose": _compose,
}


def optimizer_ids() -> list:
    return sorted(_OPTIMIZERS)


def make_optimizer(name: str, options=None) -> Callable:
    if name not in _OPTIMIZERS:
        raise ContractViolation(
            f"unknown optimizer {name!r}; valid: {', '.join(optimizer_ids())}")
    fn = _OPTIMIZERS[name]

    def bound(obj, box, x0, budget, seed=0, **kw):
        return fn(obj, box, x0, budget, seed=seed, options=options, **kw)

    return bound
