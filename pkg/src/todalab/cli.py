"""Command-line driver: configured experiments, parallel sweeps, reports.

    todalab run -c config.json [--out DIR]
    todalab sweep -c config.json --axis kappa --values 0.5,1,2 [--out DIR]
    todalab print-default-config

Exit codes: 0 all checks passed, 1 a verification failed (first violating
(n, t) is printed), 2 configuration error (message names the field).

Every run writes summary.json (schema 1) plus scenario artifacts: trajectory
and sensitivity CSVs and light-cone report JSONs.  With the fixed-step
integrator the CSV output is byte-identical across reruns of the same config.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import (hierarchy_envelope, optimal_mu, perturbed_envelope,
                     timedep_envelope, toda_envelope, velocity_hierarchy,
                     velocity_toda, verify_light_cone)
from .ghs import (PotentialSpec, check_ghs_cone, ghs_energy, ghs_integrate,
                  ghs_stability_diagnostics)
from .hierarchy import HierarchySpec, hierarchy_hamiltonian, hierarchy_rhs
from .integrators import IntegratorConfig, Trajectory, integrate
from .observables import (basic_observables, check_bracket_bound,
                          evolved_bracket, hamiltonian_window_observable,
                          poisson_bracket, required_bracket_seeds)
from .perturbed import (PerturbationSpec, interpolation_envelope,
                        monitor_trajectory, perturbed_rhs)
from .sensitivity import evolve_tangent
from .solitons import SolitonSpec, soliton_Lnorm, soliton_flaschka, soliton_state
from .state import (GHSState, LatticeState, background_state, hamiltonian_ab,
                    jacobi_norm, random_localized_state, toda_rhs)

SCENARIOS = ("toda-lightcone", "soliton-validate", "hierarchy", "perturbed",
             "interpolation", "timedep", "observables", "ghs")
BASES = ("auto", "background", "soliton", "random")

# what "auto" means per scenario: cone checks on the exact background are the
# cleanest, perturbed flows need spatially localized data, bracket checks need
# a state with structure
_AUTO_BASE = {"toda-lightcone": "background", "soliton-validate": "soliton",
              "hierarchy": "background", "perturbed": "random",
              "interpolation": "random", "timedep": "random",
              "observables": "soliton", "ghs": "background"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def default_config() -> dict:
    return {
        "scenario": "toda-lightcone",
        "window": 201,
        "guard": 10,
        "t_final": 5.0,
        "sample_dt": 0.1,
        "seeds": [[0, "b"]],
        "mu": "optimal",
        "eps": 0.5,
        "base": "auto",
        "seed": 42,
        "envelope_scale": 1.0,
        "front_threshold": 1e-8,
        "obs_range": 40,
        "integrator": {"method": "rk-adaptive", "tolerance": 1e-10, "step": 0.01},
        "soliton": {"kappa": 1.0, "sign": 1, "delta": 0.0},
        "hierarchy": {"r": 1, "c": [1, 0]},
        "perturbation": {"family": "cosine", "w0": 0.1},
        "potential": {"family": "quartic", "beta": 0.1},
    }


@dataclass
class ExperimentConfig:
    scenario: str
    window: int = 201
    guard: int = 10
    t_final: float = 5.0
    sample_dt: float = 0.1
    seeds: tuple = ((0, "b"),)
    mu: object = "optimal"
    eps: float = 0.5
    base: str = "auto"
    seed: int = 42
    envelope_scale: float = 1.0
    front_threshold: float = 1e-8
    obs_range: int = 40
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    soliton: SolitonSpec | None = None
    hierarchy: HierarchySpec | None = None
    perturbation: PerturbationSpec | None = None
    potential: PotentialSpec | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: unknown value {self.scenario!r}; pick one of {SCENARIOS}")
        if self.window < 2 * self.guard + 10:
            raise ConfigError(f"window: must be >= 2*guard + 10 = {2 * self.guard + 10}, got {self.window}")
        if not self.t_final > 0:
            raise ConfigError("t_final: must be positive")
        if not 0 < self.sample_dt <= self.t_final:
            raise ConfigError("sample_dt: must lie in (0, t_final]")
        if self.base not in BASES:
            raise ConfigError(f"base: unknown value {self.base!r}; pick one of {BASES}")
        if not self.seeds:
            raise ConfigError("seeds: need at least one (site, coord) pair")
        coords = ("r", "p") if self.scenario == "ghs" else ("a", "b")
        norm = []
        for i, pair in enumerate(self.seeds):
            try:
                site, coord = pair
                site = int(site)
            except (TypeError, ValueError):
                raise ConfigError(f"seeds[{i}]: expected [site, coord] pair") from None
            if self.scenario == "ghs":
                coord = {"a": "r", "b": "p"}.get(coord, coord)
            if coord not in coords:
                raise ConfigError(f"seeds[{i}]: coord must be one of {coords}, got {coord!r}")
            norm.append((site, coord))
        self.seeds = tuple(norm)
        if self.mu != "optimal":
            try:
                self.mu = float(self.mu)
            except (TypeError, ValueError):
                raise ConfigError("mu: must be a positive number or \"optimal\"") from None
            if not self.mu > 0:
                raise ConfigError("mu: must be positive")
        if not self.eps > 0:
            raise ConfigError("eps: must be positive")
        if not self.envelope_scale > 0:
            raise ConfigError("envelope_scale: must be positive")

    def resolved_mu(self) -> float:
        return optimal_mu()[0] if self.mu == "optimal" else float(self.mu)

    def resolved_base(self) -> str:
        return _AUTO_BASE[self.scenario] if self.base == "auto" else self.base


def _build_block(cls, block: dict, path: str, required: tuple = ()):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in required:
        if key not in block:
            raise ConfigError(f"{path}.{key}: required")
    try:
        return cls(**block)
    except TypeError as err:
        raise ConfigError(f"{path}: {err}") from None
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None


_BLOCK_REQUIRED = {"soliton": ("kappa",), "hierarchy": (), "perturbation": (), "potential": ()}
_BLOCK_TYPES = {"soliton": SolitonSpec, "hierarchy": HierarchySpec,
                "perturbation": PerturbationSpec, "potential": PotentialSpec}
_SCENARIO_BLOCKS = {
    "soliton-validate": ("soliton",),
    "hierarchy": ("hierarchy",),
    "perturbed": ("perturbation",),
    "interpolation": ("perturbation",),
    "timedep": ("perturbation",),
    "ghs": ("potential",),
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    known = set(default_config()) | {"scenario"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    if "scenario" not in raw:
        raise ConfigError("scenario: required")
    kwargs = {}
    for key in ("scenario", "window", "guard", "t_final", "sample_dt", "seeds",
                "mu", "eps", "base", "seed", "envelope_scale", "front_threshold",
                "obs_range"):
        if key in raw:
            kwargs[key] = raw[key]
    for key in ("window", "guard", "seed", "obs_range"):
        if key in kwargs:
            try:
                kwargs[key] = int(kwargs[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected an integer") from None
    for key in ("t_final", "sample_dt", "eps", "envelope_scale", "front_threshold"):
        if key in kwargs:
            try:
                kwargs[key] = float(kwargs[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: expected a number") from None
    if "integrator" in raw:
        kwargs["integrator"] = _build_block(IntegratorConfig, raw["integrator"], "integrator")
    for name, cls in _BLOCK_TYPES.items():
        if name in raw:
            block = dict(raw[name]) if isinstance(raw[name], dict) else raw[name]
            if name == "hierarchy" and isinstance(block, dict) and "c" in block:
                block["c"] = tuple(block["c"])
            kwargs[name] = _build_block(cls, block, name, _BLOCK_REQUIRED[name])
    cfg = ExperimentConfig(**kwargs)
    scenario_needs = _SCENARIO_BLOCKS.get(cfg.scenario, ())
    for name in scenario_needs:
        if getattr(cfg, name) is None:
            raise ConfigError(f"{name}: required for scenario {cfg.scenario}")
    if cfg.resolved_base() == "soliton" and cfg.soliton is None:
        raise ConfigError("soliton: required when base is \"soliton\"")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    return config_from_dict(raw)


# -- scenario runners ---------------------------------------------------------

def _base_lattice(cfg: ExperimentConfig) -> LatticeState:
    base = cfg.resolved_base()
    if base == "soliton":
        return soliton_state(cfg.soliton, cfg.window)
    if base == "random":
        return random_localized_state(cfg.window, seed=cfg.seed)
    return background_state(cfg.window)


def _grid_csv_name(seed) -> str:
    site, coord = seed
    tag = f"m{site}" if site >= 0 else f"m_minus{-site}"
    return f"sensitivity_{tag}_{coord}.csv"


def _cone_scenario(cfg, out, flow, envelope, drift_fn, extra, **tangent_kw):
    """Shared body of the light-cone scenarios: one tangent run per seed,
    verified against the envelope; drift measured on the base trajectory."""
    x = _base_lattice(cfg)
    reports = []
    first_violation = None
    drift = 0.0
    front = None
    for seed in cfg.seeds:
        grid = evolve_tangent(x, seed, cfg.t_final, cfg.integrator, flow,
                              sample_dt=cfg.sample_dt, guard=cfg.guard, **tangent_kw)
        rep = verify_light_cone(grid, envelope, threshold=cfg.front_threshold)
        grid.to_csv(out / _grid_csv_name(seed))
        rep.to_json(out / f"lightcone_{envelope.family}_{seed[0]}_{seed[1]}.json")
        reports.append(rep)
        if rep.violations and first_violation is None:
            first_violation = rep.violations[0]
        if front is None and rep.empirical_front_speed is not None:
            front = rep.empirical_front_speed
        base = Trajectory(grid.times, grid.base_a, grid.base_b, grid.offset,
                          grid.background, cfg.guard)
        drift = max(drift, drift_fn(base))
    base.to_csv(out / "trajectory.csv")
    clean = all(r.clean for r in reports)
    n_viol = sum(r.n_violations for r in reports)
    drift_tol = 100.0 * cfg.integrator.tolerance
    ok = clean and n_viol == 0 and drift <= drift_tol
    summary = {
        "clean": clean,
        "violations": n_viol,
        "empirical_front_speed": front,
        "bound_speed": reports[0].bound_speed if reports else None,
        "conserved_drift": drift,
        "drift_tolerance": drift_tol,
        "boundary_margin": min(r.boundary_margin for r in reports),
    }
    summary.update(extra)
    return summary, ok, first_violation


def _run_toda_lightcone(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    x = _base_lattice(cfg)
    lnorm = jacobi_norm(x)
    env = toda_envelope(mu, lnorm, cfg.envelope_scale)
    return _cone_scenario(cfg, out, "toda", env, lambda tr: tr.norm_drift(),
                          {"mu": mu, "Lnorm": lnorm, "base": cfg.resolved_base()})


def _run_hierarchy(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    x = _base_lattice(cfg)
    lnorm = jacobi_norm(x)
    hspec = cfg.hierarchy
    env = hierarchy_envelope(mu, lnorm, hspec, "matrix-norm", cfg.envelope_scale)

    def drift_fn(tr):
        h0 = hierarchy_hamiltonian(tr.state(0), hspec)
        worst = 0.0
        for i in range(tr.n_samples):
            worst = max(worst, abs(hierarchy_hamiltonian(tr.state(i), hspec) - h0))
        return worst

    extra = {"mu": mu, "Lnorm": lnorm, "r": hspec.r, "c": list(hspec.c),
             "bound_speed_lemma44": velocity_hierarchy(mu, lnorm, hspec, "lemma44"),
             "base": cfg.resolved_base()}
    return _cone_scenario(cfg, out, "hierarchy", env, drift_fn, extra,
                          hierarchy=hspec)


def _run_soliton_validate(cfg: ExperimentConfig, out: Path):
    spec = cfg.soliton
    x = soliton_state(spec, cfg.window)
    traj = integrate(x, toda_rhs, cfg.t_final, cfg.integrator,
                     sample_dt=cfg.sample_dt, guard=cfg.guard)
    traj.to_csv(out / "trajectory.csv")
    sites = np.arange(traj.offset, traj.offset + traj.n_sites)
    err_a = err_b = 0.0
    for i, t in enumerate(traj.times):
        a_ref, b_ref = soliton_flaschka(spec, sites, t)
        err_a = max(err_a, float(np.max(np.abs(traj.a[i] - a_ref))))
        err_b = max(err_b, float(np.max(np.abs(traj.b[i] - b_ref))))
    norm_drift = traj.norm_drift()
    trace_drift = traj.trace_drift(4)
    norm_err = abs(jacobi_norm(traj.state(0)) - soliton_Lnorm(spec))
    # trace of L^4 amplifies state error by roughly (1 + ||L||)^4
    tol = cfg.integrator.tolerance
    trace_tol = 100.0 * tol * (1.0 + soliton_Lnorm(spec)) ** 4
    ok = (err_a <= 1e-6 and err_b <= 1e-6 and norm_drift <= 100.0 * tol
          and trace_drift <= trace_tol and traj.clean)
    summary = {
        "clean": traj.clean,
        "violations": 0 if ok else 1,
        "empirical_front_speed": None,
        "bound_speed": None,
        "conserved_drift": max(norm_drift, trace_drift),
        "kappa": spec.kappa,
        "max_error_a": err_a,
        "max_error_b": err_b,
        "norm_drift": norm_drift,
        "trace_drift": trace_drift,
        "Lnorm_vs_analytic": norm_err,
        "soliton_speed": spec.sign * math.sinh(spec.kappa) / spec.kappa,
    }
    return summary, ok, None





def _perturbed_energy(pspec):
    def energy(s):
        u = np.log(4.0 * s.a * s.a)
        return hamiltonian_ab(s) + float(np.sum(pspec.W(u)))
    return energy


def _run_perturbed(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    pspec = cfg.perturbation
    x = _base_lattice(cfg)
    traj = integrate(x, lambda s: perturbed_rhs(s, pspec), cfg.t_final,
                     cfg.integrator, sample_dt=cfg.sample_dt, guard=cfg.guard)
    traj.to_csv(out / "trajectory.csv")
    mon = monitor_trajectory(traj)
    drift = traj.energy_drift(_perturbed_energy(pspec))
    summary = {
        "mu": mu, "base": cfg.resolved_base(), "family": pspec.family, "w0": pspec.w0,
        "C1": mon.C1, "C2": mon.C2, "unbounded": mon.unbounded,
        "conserved_drift": drift,
        "drift_tolerance": 100.0 * cfg.integrator.tolerance,
    }
    if mon.unbounded:
        summary.update({"clean": traj.clean, "violations": 0,
                        "empirical_front_speed": None, "bound_speed": None,
                        "excluded": "unbounded-looking run; bound checks skipped"})
        return summary, False, None

    # a-priori operator norm growth along the run
    line = mon.Lnorm_t[0] + pspec.dw_sup * traj.times
    norm_ok = bool(np.all(mon.Lnorm_t <= line + 1e-9))

    env_w = perturbed_envelope(mu, mon.C1, mon.C2, pspec.d2w_sup, cfg.envelope_scale)
    a_star = min(float(np.min(np.abs(x.a))), abs(x.background[0]))
    env_t = timedep_envelope(mu, mon.Lnorm_t[0], pspec.dw_sup, pspec.d2w_sup,
                             a_star, cfg.envelope_scale)
    first_violation = None
    n_viol = 0
    clean = traj.clean
    front = None
    for seed in cfg.seeds:
        grid = evolve_tangent(x, seed, cfg.t_final, cfg.integrator, "perturbed",
                              perturbation=pspec, sample_dt=cfg.sample_dt,
                              guard=cfg.guard)
        grid.to_csv(out / _grid_csv_name(seed))
        for env in (env_w, env_t):
            rep = verify_light_cone(grid, env, threshold=cfg.front_threshold)
            rep.to_json(out / f"lightcone_{env.family}_{seed[0]}_{seed[1]}.json")
            clean = clean and rep.clean
            n_viol += rep.n_violations
            if rep.violations and first_violation is None:
                first_violation = rep.violations[0]
            if env is env_w and front is None:
                front = rep.empirical_front_speed
    ok = clean and n_viol == 0 and norm_ok and drift <= 100.0 * cfg.integrator.tolerance
    summary.update({
        "clean": clean, "violations": n_viol,
        "empirical_front_speed": front, "bound_speed": env_w.speed,
        "norm_growth_ok": norm_ok, "a_star": a_star,
        "timedep_radius_final": float(env_t.radius(cfg.t_final)),
    })
    return summary, ok, first_violation


def _run_interpolation(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    pspec = cfg.perturbation
    x = _base_lattice(cfg)
    traj = integrate(x, lambda s: perturbed_rhs(s, pspec), cfg.t_final,
                     cfg.integrator, sample_dt=cfg.sample_dt, guard=cfg.guard)
    traj.to_csv(out / "trajectory.csv")
    mon = monitor_trajectory(traj)
    summary = {"mu": mu, "eps": cfg.eps, "base": cfg.resolved_base(),
               "family": pspec.family, "w0": pspec.w0,
               "C1": mon.C1, "C2": mon.C2, "unbounded": mon.unbounded,
               "conserved_drift": traj.energy_drift(_perturbed_energy(pspec))}
    if mon.unbounded:
        summary.update({"clean": traj.clean, "violations": 0,
                        "empirical_front_speed": None, "bound_speed": None,
                        "excluded": "unbounded-looking run; fit skipped"})
        return summary, False, None
    fits = []
    clean = True
    for seed in cfg.seeds:
        grid = evolve_tangent(x, seed, cfg.t_final, cfg.integrator, "perturbed",
                              perturbation=pspec, sample_dt=cfg.sample_dt,
                              guard=cfg.guard)
        grid.to_csv(out / _grid_csv_name(seed))
        fit = interpolation_envelope(grid, mon, mu, cfg.eps)
        fits.append(fit)
        clean = clean and grid.clean
    worst_r2 = min(f.r2_spatial for f in fits)
    valid = all(f.envelope_valid for f in fits)
    ok = clean and valid and worst_r2 >= 0.99
    f0 = fits[0]
    summary.update({
        "clean": clean, "violations": 0 if valid else 1,
        "empirical_front_speed": None, "bound_speed": f0.v,
        "C": f0.C, "v": f0.v, "vstar": f0.vstar, "D": f0.D, "delta": f0.delta,
        "r2_spatial": worst_r2, "envelope_valid": valid,
    })
    with open(out / "interpolation_fit.json", "w") as fh:
        json.dump([{k: getattr(f, k) for k in
                    ("mu", "eps", "C", "v", "vstar", "D", "delta",
                     "r2_spatial", "envelope_valid")} for f in fits],
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary, ok, None


def _run_timedep(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    pspec = cfg.perturbation
    x = _base_lattice(cfg)
    lnorm0 = jacobi_norm(x)
    a_star = min(float(np.min(np.abs(x.a))), abs(x.background[0]))
    env = timedep_envelope(mu, lnorm0, pspec.dw_sup, pspec.d2w_sup, a_star,
                           cfg.envelope_scale)
    extra = {"mu": mu, "base": cfg.resolved_base(), "family": pspec.family, "w0": pspec.w0,
             "a_star": a_star, "Lnorm0": lnorm0,
             "radius_final": float(env.radius(cfg.t_final))}
    return _cone_scenario(cfg, out, "perturbed", env,
                          lambda tr: tr.energy_drift(_perturbed_energy(pspec)),
                          extra, perturbation=pspec)


def _run_observables(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    x = _base_lattice(cfg)
    m_list = sorted({site for site, _ in cfg.seeds})
    times = np.round(np.arange(0.0, cfg.t_final + 0.5 * cfg.sample_dt, cfg.sample_dt), 12)
    reach = cfg.obs_range
    n_viol = 0
    worst_ratio = 0.0
    first_violation = None
    clean = True
    for m in m_list:
        _, b_m = basic_observables(m)
        grids = {}
        for seed in sorted(required_bracket_seeds(b_m, x)):
            grids[seed] = evolve_tangent(x, seed, cfg.t_final, cfg.integrator,
                                         "toda", sample_dt=cfg.sample_dt,
                                         guard=cfg.guard)
            clean = clean and grids[seed].clean
        for n in range(m - reach, m + reach + 1):
            a_n, _ = basic_observables(n)
            rep = check_bracket_bound(a_n, b_m, x, times, mu, grids)
            n_viol += rep.n_violations
            worst_ratio = max(worst_ratio, rep.max_ratio)
            if rep.violations and first_violation is None:
                v = rep.violations[0]
                first_violation = {"n": n, "t": v["t"],
                                   "observed": v["value"], "bound": v["bound"]}
    # generator identity at the base point
    h_obs = hamiltonian_window_observable(range(-3, 4))
    a_0, b_0 = basic_observables(0)
    gen_err = 0.0
    dt = 1e-6
    for obs in (a_0, b_0):
        bracket = poisson_bracket(obs, h_obs, x)
        # forward flow two-sided difference of obs along the Toda flow
        tr = integrate(x, toda_rhs, dt, IntegratorConfig(method="rk4-fixed", step=dt / 4.0),
                       n_samples=2)
        plus = obs.eval(tr.state(1))
        trm = integrate(x, lambda s: tuple(-f for f in toda_rhs(s)), dt,
                        IntegratorConfig(method="rk4-fixed", step=dt / 4.0), n_samples=2)
        minus = obs.eval(trm.state(1))
        fd = (plus - minus) / (2.0 * dt)
        # bracket convention: d/dt (obs o flow_t) = {obs, H}
        scale = max(1.0, abs(bracket))
        gen_err = max(gen_err, abs(fd - bracket) / scale)
    ok = clean and n_viol == 0 and gen_err <= 1e-5
    summary = {
        "mu": mu, "clean": clean, "violations": n_viol,
        "empirical_front_speed": None,
        "bound_speed": velocity_toda(mu, jacobi_norm(x)),
        "conserved_drift": None,
        "pairs_checked": len(m_list) * (2 * reach + 1),
        "max_ratio": worst_ratio,
        "generator_rel_error": gen_err,
    }
    return summary, ok, first_violation


def _run_ghs(cfg: ExperimentConfig, out: Path):
    mu = cfg.resolved_mu()
    pot = cfg.potential
    n = cfg.window
    offset = -(n // 2)
    sites = np.arange(offset, offset + n)
    r0 = np.zeros(n)
    p0 = np.exp(-((sites / 3.0) ** 2))
    x = GHSState(r0, p0, offset)
    traj = ghs_integrate(x, pot, cfg.t_final, cfg.integrator,
                         sample_dt=cfg.sample_dt, guard=cfg.guard)
    drift = traj.energy_drift(pot)
    stab = ghs_stability_diagnostics(traj, pot)
    first_violation = None
    n_viol = 0
    clean = traj.clean
    front = None
    bound_speed = None
    for seed in cfg.seeds:
        grid = evolve_tangent(x, seed, cfg.t_final, cfg.integrator, "ghs",
                              potential=pot, sample_dt=cfg.sample_dt,
                              guard=cfg.guard)
        grid.to_csv(out / _grid_csv_name(seed))
        rep = check_ghs_cone(grid, mu, traj, pot, cfg.envelope_scale,
                             cfg.front_threshold)
        rep.to_json(out / f"lightcone_ghs_{seed[0]}_{seed[1]}.json")
        clean = clean and rep.clean
        n_viol += rep.n_violations
        bound_speed = rep.bound_speed
        if rep.violations and first_violation is None:
            first_violation = rep.violations[0]
        if front is None:
            front = rep.empirical_front_speed
    ok = clean and n_viol == 0 and drift <= 1e-8 and stab.ok
    summary = {
        "mu": mu, "family": pot.family, "beta": pot.beta,
        "clean": clean, "violations": n_viol,
        "empirical_front_speed": front, "bound_speed": bound_speed,
        "conserved_drift": drift,
        "energy": stab.energy, "M_E": stab.M_E,
        "stability_ok": stab.ok,
    }
    return summary, ok, first_violation


_RUNNERS = {
    "toda-lightcone": _run_toda_lightcone,
    "soliton-validate": _run_soliton_validate,
    "hierarchy": _run_hierarchy,
    "perturbed": _run_perturbed,
    "interpolation": _run_interpolation,
    "timedep": _run_timedep,
    "observables": _run_observables,
    "ghs": _run_ghs,
}


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def run_config(cfg: ExperimentConfig, outdir) -> int:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary, ok, first_violation = _RUNNERS[cfg.scenario](cfg, outdir)
    summary = {"schema": 1, "scenario": cfg.scenario, "seed": cfg.seed,
               "exit": 0 if ok else 1, **summary}
    with open(outdir / "summary.json", "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if ok:
        print(f"{cfg.scenario}: ok (artifacts in {outdir})")
        return 0
    if first_violation is not None:
        print(f"{cfg.scenario}: FAILED; first violation at "
              f"(n={first_violation.get('n')}, t={first_violation.get('t')}): "
              f"observed {first_violation.get('observed'):.6g} > "
              f"bound {first_violation.get('bound'):.6g}", file=sys.stderr)
    else:
        print(f"{cfg.scenario}: FAILED (see {outdir}/summary.json)", file=sys.stderr)
    return 1


# -- sweeps --------------------------------------------------------------------

_AXIS_ALIASES = {
    "kappa": "soliton.kappa",
    "w0": "perturbation.w0",
    "beta": "potential.beta",
    "r": "hierarchy.r",
}


def _apply_axis(raw: dict, axis: str, value):
    path = _AXIS_ALIASES.get(axis, axis).split(".")
    node = raw
    for part in path[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"--axis {axis}: config has no block {part!r}")
        node = node[part]
    leaf = path[-1]
    if leaf == "r":
        r = int(value)
        node["r"] = r
        node["c"] = [1.0] + [0.0] * r
    else:
        node[leaf] = value
    return raw


def _parse_values(text: str):
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            vals.append(float(part))
        except ValueError:
            raise ConfigError(f"--values: {part!r} is not a number") from None
    return vals


def _sweep_job(raw_cfg: dict, outdir: str):
    cfg = config_from_dict(raw_cfg)
    code = run_config(cfg, outdir)
    with open(Path(outdir) / "summary.json") as fh:
        return code, json.load(fh)


def run_sweep(config_path, axis: str, values_text: str, outdir, workers: int | None = None) -> int:
    with open(config_path) as fh:
        try:
            base_raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON at line {err.lineno} column {err.colno}: {err.msg}") from None
    values = _parse_values(values_text)
    if not values:
        raise ConfigError("--values: need at least one value")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for v in values:
        raw = json.loads(json.dumps(base_raw))
        raw = _apply_axis(raw, axis, v)
        config_from_dict(raw)          # validate up front: config errors exit 2
        jobs.append((raw, str(outdir / f"{axis.replace('.', '_')}={v:g}")))
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1, 4)
    results = []
    worst = 0
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(_sweep_job, raw, sub) for raw, sub in jobs]
        for v, fut in zip(values, futures):
            try:
                code, summary = fut.result()
                results.append({"value": v, "exit": code, "summary": summary})
                worst = max(worst, code)
            except Exception as err:  # job crash: preserve partials, fail overall
                results.append({"value": v, "exit": 1, "error": str(err)})
                worst = max(worst, 1)
    aggregate = {"schema": 1, "axis": axis, "values": values, "results": results}
    with open(outdir / "sweep.json", "w") as fh:
        json.dump(_jsonable(aggregate), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sweep over {axis}: {len(values)} jobs, worst exit {worst} "
          f"(aggregate in {outdir / 'sweep.json'})")
    return worst


# -- entry point ---------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="todalab",
        description="Sensitivity light cones for the Toda lattice, its "
                    "hierarchy, and bounded perturbations.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("--out", default="out")
    p_sweep = sub.add_parser("sweep", help="run one experiment per axis value, in parallel")
    p_sweep.add_argument("-c", "--config", required=True)
    p_sweep.add_argument("--axis", required=True,
                         help="config field to vary (kappa, w0, beta, r, mu, "
                              "window, t_final, or a dotted path)")
    p_sweep.add_argument("--values", required=True, help="comma-separated numbers")
    p_sweep.add_argument("--out", default="sweep-out")
    p_sweep.add_argument("--workers", type=int, default=None)
    sub.add_parser("print-default-config", help="write the default config JSON to stdout")
    args = parser.parse_args(argv)

    if args.command == "print-default-config":
        json.dump(default_config(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return run_config(cfg, args.out)
        return run_sweep(args.config, args.axis, args.values, args.out, args.workers)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
