"""Grid evaluation for every experiment kind.

Grid points are independent; they run on a thread pool and come back in the
grid's canonical order, so the output never depends on scheduling.
"""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .. import bounds as bd
from .. import dense as dn
from .. import floquet as fq
from .. import gaussian as gs
from .. import sw
from .. import trotter as tr
from .config import ExperimentConfig

COLUMNS: dict[str, tuple[str, ...]] = {
    "validate": ("experiment", "N", "check", "observable_sim", "observable_target", "abs_error",
                 "tolerance", "t_sim"),
    "trotter-sweep": ("experiment", "N", "T", "p", "noise", "placement", "boundary", "observable_sim",
                      "observable_target", "abs_error", "t_sim", "error_bound"),
    "floquet-sweep": ("experiment", "N", "uptau", "p", "noise", "boundary", "observable_sim",
                      "observable_target", "abs_error", "t_sim", "periods"),
    "sw-sweep": ("experiment", "N", "uptau", "p", "noise", "observable_sim", "observable_target",
                 "abs_error", "t_sim"),
    "bounds": ("experiment", "mapping", "p", "d", "noise", "control_name", "control", "alpha_exponent",
               "error_bound", "t_sim_bound"),
    "ft-overhead": ("experiment", "xi0", "L", "delta", "p", "xi_L", "optimal_T", "total_error",
                    "required_L", "required_L_closed_form"),
}
# keys that fix the canonical row order
SORT_KEYS: dict[str, tuple[str, ...]] = {
    "validate": ("N", "check"),
    "trotter-sweep": ("p", "noise", "N", "T"),
    "floquet-sweep": ("p", "noise", "N", "uptau"),
    "sw-sweep": ("p", "noise", "N", "uptau"),
    "bounds": ("mapping", "p", "noise"),
    "ft-overhead": ("xi0", "p", "delta", "L"),
}
VALIDATE_CHECKS = ("exact", "trotter", "trotter-noisy", "lindblad", "driven-lindblad")
EXACT_TOL, INTEGRATED_TOL = 1e-9, 1e-7


class ExperimentError(RuntimeError):
    pass


def columns_for(cfg: ExperimentConfig) -> tuple[str, ...]:
    cols = COLUMNS[cfg.kind]
    return cols + ("wall_time_ms",) if cfg["record_timing"] else cols


# ---------------------------------------------------------------------------
# validate


def _random_initial(N: int, seed: int) -> tuple[gs.CovarianceState, np.ndarray]:
    """Vacuum rotated by a seeded random quadratic Hamiltonian, on both engines."""
    rng = np.random.default_rng([seed, N])
    Hr = gs.random_quadratic(N, rng)
    state = gs.evolve_exact(gs.vacuum_state(N), Hr, 1.0)
    U = expm(-1j * dn.jordan_wigner_dense(Hr))
    rho0 = dn.DenseState.vacuum(N).rho
    return state, U @ rho0 @ U.conj().T


def _validate_point(cfg: ExperimentConfig, N: int, check: str) -> dict[str, Any]:
    h, g, tau, tol = cfg["h"], cfg["g"], cfg["tau"], cfg["tol"]
    state, rho = _random_initial(N, cfg["seed"])
    O = dn.mean_number_op(N)
    H = gs.chain_hamiltonian(N, h, g)
    Hd = dn.jordan_wigner_dense(H)
    tol_out, t = EXACT_TOL, tau
    if check == "exact":
        sim = gs.mean_occupation(gs.evolve_exact(state, H, tau))
        U = expm(-1j * tau * Hd)
        ref = dn.expectation(dn.DenseState(U @ rho @ U.conj().T), O)
    elif check in ("trotter", "trotter-noisy"):
        split = tr.chain_split(N, h, g)
        f = tr.suzuki_formula(2, split.K)
        noise = gs.DepolSpec.all_modes(N, p=cfg["validate_p"]) if check == "trotter-noisy" else None
        T = 4
        sim = tr.run_trotter(state, split, f, tau, T, noise).observable
        ref = dn.expectation(tr.replay_dense(rho, split, f, tau, T, noise), O)
    elif check == "lindblad":
        gam = cfg["validate_gamma"]
        sim = gs.mean_occupation(gs.evolve_noisy_ode(state, gs.QuadraticDrive.constant(H), gam, 0.0, tau, tol=tol))
        ref = dn.expectation(dn.evolve_lindblad_dense(dn.DenseState(rho), Hd, gam, 0.0, tau, tol=tol), O)
        tol_out = INTEGRATED_TOL
    elif check == "driven-lindblad":
        gam, up = cfg["validate_gamma"], cfg["uptau"][0]
        drive = fq.chain_drive(N, cfg["h0"], cfg["h1"], cfg["g0"], cfg["g1"], up)
        sim = gs.mean_occupation(gs.evolve_noisy_ode(state, drive.to_quadratic_drive(), gam, 0.0, tau, tol=tol))
        ref = dn.expectation(dn.evolve_lindblad_dense(dn.DenseState(rho), drive.to_dense().at, gam, 0.0, tau,
                                                      tol=tol), O)
        tol_out = INTEGRATED_TOL
    else:
        raise ExperimentError(f"unknown validation check {check!r}")
    return {"N": N, "check": check, "observable_sim": float(sim), "observable_target": float(ref),
            "abs_error": abs(float(sim) - float(ref)), "tolerance": tol_out, "t_sim": t}


# ---------------------------------------------------------------------------
# sweeps


@lru_cache(maxsize=None)
def _trotter_target(N: int, h: float, g: float, tau: float, periodic: bool) -> float:
    split = tr.chain_split(N, h, g, periodic)
    return gs.mean_occupation(gs.evolve_exact(gs.vacuum_state(N), split.total(), tau))


def _trotter_point(cfg: ExperimentConfig, p: int, noise: float, N: int, T: int) -> dict[str, Any]:
    h, g, tau = cfg["h"], cfg["g"], cfg["tau"]
    periodic = cfg["boundary"] == "periodic"
    split = tr.chain_split(N, h, g, periodic)
    f = tr.suzuki_formula(p, split.K)
    spec = gs.DepolSpec.all_modes(N, p=noise) if noise > 0 else None
    run = tr.run_trotter(gs.vacuum_state(N), split, f, tau, T, spec, cfg["placement"])
    target = _trotter_target(N, h, g, tau, periodic)
    bound = tr.trotter_bound(tr.chain_bound_params(f, h, g, tau, T))
    return {"N": N, "T": T, "p": p, "noise": noise, "placement": cfg["placement"], "boundary": cfg["boundary"],
            "observable_sim": run.observable, "observable_target": target,
            "abs_error": abs(run.observable - target), "t_sim": tau, "error_bound": bound}


@lru_cache(maxsize=None)
def _floquet_target(N, h0, h1, g0, g1, p, periodic):
    return fq.floquet_target(N, h0, h1, g0, g1, p, periodic=periodic)


def _floquet_point(cfg: ExperimentConfig, p: int, noise: float, N: int, uptau: float) -> dict[str, Any]:
    args = (N, cfg["h0"], cfg["h1"], cfg["g0"], cfg["g1"])
    periodic = cfg["boundary"] == "periodic"
    run = fq.run_floquet(*args, p, cfg["tau"], uptau, noise, tol=cfg["tol"],
                         target=_floquet_target(*args, p, periodic), periodic=periodic)
    return {"N": N, "uptau": uptau, "p": p, "noise": noise, "boundary": cfg["boundary"],
            "observable_sim": run.observable_sim, "observable_target": run.observable_target,
            "abs_error": run.abs_error, "t_sim": run.t_sim, "periods": run.periods}


@lru_cache(maxsize=None)
def _sw_setup(N: int, p: int):
    model = sw.sw_demo(N)
    return model, sw.sw_target(model, p)


def _sw_point(cfg: ExperimentConfig, p: int, noise: float, N: int, uptau: float) -> dict[str, Any]:
    model, (M, H0) = _sw_setup(N, p)
    run = sw.run_sw(M, model.P, H0, cfg["tau"], uptau, noise, model.O, model.initial, p)
    return {"N": N, "uptau": uptau, "p": p, "noise": noise, "observable_sim": run.observable_sim,
            "observable_target": run.observable_target, "abs_error": run.abs_error, "t_sim": run.t_sim}


def _bounds_point(cfg: ExperimentConfig, mapping: str, p: int, noise: float) -> dict[str, Any]:
    c = bd.TradeoffConstants(cfg["c_map"], cfg["c_noise"])
    r = bd.tradeoff(mapping, p, cfg["d"], noise, cfg["tau"], c)
    return {"mapping": mapping, "p": p, "d": cfg["d"], "noise": noise, "control_name": r.control_name,
            "control": r.control, "alpha_exponent": r.alpha_exponent, "error_bound": r.error_bound,
            "t_sim_bound": r.t_sim_bound}


def _ft_point(cfg: ExperimentConfig, xi0: float, p: int, delta: float, L: int) -> dict[str, Any]:
    params = bd.FTParams(xi0=xi0, xi_th=cfg["xi_th"], t=cfg["t_code"], L=L, delta=delta, tau=cfg["tau"],
                         d=cfg["d"], p=p, c1=cfg["c_map"], c2=cfg["c_noise"])
    r = bd.ft_overhead(params)
    return {"xi0": xi0, "L": L, "delta": delta, "p": p, "xi_L": r.xi_L, "optimal_T": r.optimal_T,
            "total_error": r.total_error, "required_L": r.required_L,
            "required_L_closed_form": r.required_L_closed_form}


@dataclass(frozen=True)
class _Plan:
    grid: list[tuple]
    fn: Callable[..., dict[str, Any]]


def plan(cfg: ExperimentConfig) -> _Plan:
    k, v = cfg.kind, cfg.values
    if k == "validate":
        return _Plan(list(itertools.product(v["N"], VALIDATE_CHECKS)), _validate_point)
    if k == "trotter-sweep":
        return _Plan(list(itertools.product(v["p_order"], v["noise"], v["N"], v["T"])), _trotter_point)
    if k == "floquet-sweep":
        return _Plan(list(itertools.product(v["p_order"], v["noise"], v["N"], v["uptau"])), _floquet_point)
    if k == "sw-sweep":
        return _Plan(list(itertools.product(v["p_order"], v["noise"], v["N"], v["uptau"])), _sw_point)
    if k == "bounds":
        return _Plan(list(itertools.product(v["mappings"], v["p_order"], v["noise"])), _bounds_point)
    if k == "ft-overhead":
        return _Plan(list(itertools.product(v["xi0"], v["p_order"], v["delta"], v["L"])), _ft_point)
    raise ExperimentError(f"unknown kind {k!r}")


def _sort_key(kind: str, row: dict[str, Any]) -> tuple:
    order = VALIDATE_CHECKS.index(row["check"]) if kind == "validate" else None
    return tuple(order if (key == "check") else row[key] for key in SORT_KEYS[kind])


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> list[dict[str, Any]]:
    """Evaluate the full grid; rows come back sorted in canonical order.

    Any failing grid point aborts the run with that point named in the error.
    """
    pl = plan(cfg)
    n_threads = cfg.resolved_threads(threads)
    timing = cfg["record_timing"]

    def work(point: tuple) -> dict[str, Any]:
        t0 = time.perf_counter()
        try:
            row = pl.fn(cfg, *point)
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise ExperimentError(f"{cfg.kind} failed at grid point {point}: {exc}") from exc
        row = {"experiment": cfg.kind, **row}
        if timing:
            row["wall_time_ms"] = 1e3 * (time.perf_counter() - t0)
        return row

    if n_threads == 1:
        rows = [work(pt) for pt in pl.grid]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            rows = list(ex.map(work, pl.grid))
    rows.sort(key=lambda r: _sort_key(cfg.kind, r))
    return rows


def grid_size(cfg: ExperimentConfig) -> int:
    return len(plan(cfg).grid)


def select(rows: Sequence[dict[str, Any]], **match: Any) -> list[dict[str, Any]]:
    return [r for r in rows if all(r[k] == val for k, val in match.items())]
