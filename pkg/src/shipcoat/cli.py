"""shipcoat command line.

Exit codes: 0 ok, 2 data error, 3 convergence failure, 4 configuration or
usage error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings
from dataclasses import fields

import numpy as np

from . import __version__
from .economics import CostConfig, CostModel
from .fleet import (CompartmentHistory, DataError, FleetDataset, observed_interval,
                    parse_inspection_csv, split_by_time, write_inspection_csv)
from .inference import (HyperPriors, MCMCConfig, PosteriorSamples, Priors, expected_count_curve,
                        fit_bayes_hierarchical, fit_bayes_individual, fit_mle,
                        predictive_from_draws)
from .inference.bayes import ConvergenceWarning
from .inference.predictive import exact_mean
from .inference.samples import _jsonable, key_to_str, str_to_key
from .nhpp import PowerLawParams, TruncationWarning, _cum
from .planner import (GAConfig, PlanError, PlanningHorizon, SchedulePlan,
                      brute_force_intervals, brute_force_plan, group_compartments,
                      optimize_intervals, optimize_schedule, practice_plan, sensitivity_sweep)
from .simulator import PRACTICE_REGIME, Population, jensen_gap, simulate_plan, synthesize_fleet

EXIT_OK, EXIT_DATA, EXIT_CONVERGENCE, EXIT_CONFIG = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


def _mcmc_defaults():
    d = MCMCConfig().to_dict()
    d.pop("seed")
    return d


def _ga_defaults():
    d = GAConfig().to_dict()
    d.pop("seed")
    return d


DEFAULTS = {
    "data": {
        "path": None,
        "cutoff": None,
        "synth": {
            "n_ships": 3,
            "n_compartments": 40,
            **Population().to_dict(),
            "regime": list(PRACTICE_REGIME),
            "t_end": 120.0,
        },
    },
    "model": {
        "mode": "hier",
        "samples": None,
        "params": None,
        "priors": Priors().to_dict(),
        "hyperpriors": HyperPriors().to_dict(),
        "mcmc": _mcmc_defaults(),
        "cost_parameters": "point",
        "n_cost_draws": 20,
    },
    "cost": {k: v for k, v in CostConfig().to_dict().items()},
    "horizon": {"t_now": 0.0, "t_end": 240.0, "delta_t": 3.0},
    "planner": {
        "ga": _ga_defaults(),
        "n_groups": 10,
        "interval_groups": None,
        "practice": None,
        "practice_regime": list(PRACTICE_REGIME),
        "sensitivity": {"axis": "beta", "values": [0.8, 1.0, 1.25, 1.5]},
    },
}

FAST = {"mcmc": MCMCConfig.fast().to_dict(), "ga": GAConfig.fast().to_dict()}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        where = f"{path}{k}"
        if k not in out:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v, where + ".")
        else:
            out[k] = v
    return out


def _set_path(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown configuration key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown configuration key {dotted!r}")
    node[parts[-1]] = value


def load_config(args) -> dict:
    """Defaults, then the ``--fast`` presets, then the config file, then flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "fast", False):
        for k in ("chains", "warmup_draws", "kept_draws"):
            cfg["model"]["mcmc"][k] = FAST["mcmc"][k]
        for k in ("population_size", "stagnation_limit", "max_generations"):
            cfg["planner"]["ga"][k] = FAST["ga"][k]
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        user.pop("audit", None)
        cfg = _merge(cfg, user)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _set_path(cfg, key, value)
    if getattr(args, "data", None):
        cfg["data"]["path"] = args.data
    return cfg


# config -> objects -----------------------------------------------------------

def _build(cls, values: dict, what: str):
    names = {f.name for f in fields(cls)}
    extra = set(values) - names
    if extra:
        raise ConfigError(f"unknown {what} setting(s): {sorted(extra)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what} settings: {exc}") from None


def cost_config(cfg) -> CostConfig:
    return _build(CostConfig, cfg["cost"], "cost")


def horizon_from(cfg) -> PlanningHorizon:
    h = cfg["horizon"]
    try:
        return PlanningHorizon.from_span(float(h["t_now"]), float(h["t_end"]), float(h["delta_t"]))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid horizon: {exc}") from None


def mcmc_config(cfg, seed) -> MCMCConfig:
    return _build(MCMCConfig, dict(cfg["model"]["mcmc"], seed=seed), "mcmc")


def ga_config(cfg, seed) -> GAConfig:
    return _build(GAConfig, dict(cfg["planner"]["ga"], seed=seed), "ga")


# audit -------------------------------------------------------------------------

def audit_record(command: str, cfg: dict, args) -> dict:
    rec = {"tool": "shipcoat", "version": __version__, "command": command,
           "seed": getattr(args, "seed", None), "fast": bool(getattr(args, "fast", False)),
           "config": cfg}
    extra = {}
    for name in ("mode", "planner", "samples", "params", "plan", "paths", "axis", "values",
                 "new_ship", "sisters", "t_start", "t_end", "step", "oracle"):
        v = getattr(args, name, None)
        if v is not None and v is not False:
            extra[name] = v
    rec["options"] = extra
    return _jsonable(rec)


def audit_lines(audit: dict) -> list:
    return [f"shipcoat {audit['version']} {audit['command']}",
            "audit: " + json.dumps(audit, sort_keys=True, separators=(",", ":"))]


def write_json(path: str, doc: dict, audit: dict) -> None:
    body = {"audit": audit}
    body.update(_jsonable(doc))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_csv(path: str, header, rows, audit: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in audit_lines(audit):
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_cell(v) for v in r) + "\n")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


# inputs ------------------------------------------------------------------------

def load_dataset(cfg, required=True) -> FleetDataset | None:
    path = cfg["data"]["path"]
    if not path:
        if required:
            raise ConfigError("no data file: pass --data or set data.path")
        return None
    try:
        return parse_inspection_csv(path)
    except FileNotFoundError:
        raise DataError(f"data file {path} not found") from None


def load_samples(path) -> PosteriorSamples:
    try:
        return PosteriorSamples.from_csv(path)
    except FileNotFoundError:
        raise DataError(f"samples file {path} not found") from None


def load_params_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"params file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"params file {path} is not valid JSON: {exc}") from None
    table = doc.get("params", doc) if isinstance(doc, dict) else None
    if not isinstance(table, dict):
        raise DataError("params file must map ship/compartment keys to parameters")
    out = {}
    for k, v in table.items():
        if k == "audit":
            continue
        try:
            if "a" in v and "b" in v:
                out[str_to_key(k)] = PowerLawParams(v["a"], v["b"])
            else:
                out[str_to_key(k)] = PowerLawParams.from_log(v["ln_a"], v["ln_b"])
        except (TypeError, KeyError, ValueError) as exc:
            raise DataError(f"bad parameters for {k!r}: {exc}") from None
    if not out:
        raise DataError("params file lists no compartments")
    return out


def resolve_params(cfg, args):
    """(costing parameters, point parameters) keyed by compartment."""
    samples_path = getattr(args, "samples", None) or cfg["model"]["samples"]
    params_path = getattr(args, "params", None) or cfg["model"]["params"]
    if samples_path and params_path:
        raise ConfigError("give either samples or params, not both")
    if params_path:
        point = load_params_file(params_path)
        return point, point
    if not samples_path:
        raise ConfigError("no fitted parameters: pass --samples or --params")
    samples = load_samples(samples_path)
    point = {k: samples.point_estimate(k) for k in samples.keys}
    mode = cfg["model"]["cost_parameters"]
    if mode == "point":
        return point, point
    if mode != "draws":
        raise ConfigError("model.cost_parameters must be 'point' or 'draws'")
    n = int(cfg["model"]["n_cost_draws"])
    if n < 1:
        raise ConfigError("model.n_cost_draws must be >= 1")
    costing = {}
    for k in samples.keys:
        d = samples.flat(k)
        idx = np.linspace(0, d.shape[0] - 1, min(n, d.shape[0])).round().astype(int)
        costing[k] = [PowerLawParams.from_log(*d[i]) for i in idx]
    return costing, point


def floors_from(dataset, horizon: PlanningHorizon, keys) -> dict | None:
    """Last recorded inspection at or before ``t_now`` per compartment."""
    if dataset is None:
        return None
    out = {}
    for h in dataset:
        if h.key not in keys:
            continue
        past = h.times[h.times <= horizon.t_now]
        out[h.key] = float(past[-1]) if past.size else h.start
    return out


def practice_assignment(cfg, keys, horizon, dataset=None) -> dict:
    """Months between inspections for each compartment under current practice."""
    practice = cfg["planner"]["practice"]
    if isinstance(practice, (int, float)) and not isinstance(practice, bool):
        return {k: float(practice) for k in keys}
    if isinstance(practice, dict):
        table = {str_to_key(k): float(v) for k, v in practice.items()}
        missing = [k for k in keys if k not in table]
        if missing:
            raise ConfigError(f"planner.practice lacks {key_to_str(missing[0])}")
        return {k: table[k] for k in keys}
    if practice is not None:
        raise ConfigError("planner.practice must be a number, a mapping or null")
    observed = {}
    if dataset is not None:
        for h in dataset:
            v = observed_interval(h)
            if v is not None:
                observed[h.key] = v
    regime = [float(v) for v in cfg["planner"]["practice_regime"]]
    by_ship: dict = {}
    for k in keys:
        by_ship.setdefault(k[0], []).append(k)
    out = {}
    for ship, members in by_ship.items():
        for c, k in enumerate(sorted(members)):
            out[k] = observed.get(k, regime[(c * len(regime)) // len(members)])
    return out


def interval_groups_from(cfg, point, horizon):
    n = cfg["planner"]["interval_groups"]
    if n is None:
        return None
    return group_compartments(point, horizon, int(n))


# commands ----------------------------------------------------------------------

def cmd_fit(args, cfg) -> int:
    mode = args.mode or cfg["model"]["mode"]
    if mode not in ("mle", "bayes", "hier"):
        raise ConfigError("fit mode must be mle, bayes or hier")
    cfg["model"]["mode"] = mode
    dataset = load_dataset(cfg)
    if cfg["data"]["cutoff"] is not None:
        dataset, _ = split_by_time(dataset, float(cfg["data"]["cutoff"]))
    audit = audit_record("fit", cfg, args)
    os.makedirs(args.out, exist_ok=True)
    samples_path = os.path.join(args.out, "samples.csv")
    diag_path = os.path.join(args.out, "diagnostics.json")

    if mode == "mle":
        if len(dataset) == 0:
            raise DataError("maximum likelihood needs at least one compartment")
        results, draws = {}, []
        for h in dataset:
            if h.n_intervals == 0:
                raise DataError(f"{key_to_str(h.key)} has no inspections")
            r = fit_mle(h, seed=args.seed)
            results[key_to_str(h.key)] = r.to_dict()
            draws.append([r.params.ln_a, r.params.ln_b])
        pooled = fit_mle(dataset, seed=args.seed)
        samples = PosteriorSamples(dataset.keys, np.array(draws).reshape(-1, 1, 1, 2), mode="mle")
        samples.to_csv(samples_path, comments=audit_lines(audit))
        failed = sorted(k for k, r in results.items() if not r["converged"])
        doc = {"mode": "mle", "compartments": results, "pooled": pooled.to_dict(),
               "degenerate": sorted(k for k, r in results.items() if r["degenerate"]),
               "problems": failed}
        write_json(diag_path, doc, audit)
        if failed and not args.allow_warnings:
            print(f"optimizer did not converge for {len(failed)} compartment(s)", file=sys.stderr)
            return EXIT_CONVERGENCE
        return EXIT_OK

    mcmc = mcmc_config(cfg, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        if mode == "bayes":
            priors = _build(Priors, cfg["model"]["priors"], "priors")
            data = list(dataset) or [CompartmentHistory("prior", "prior", [], [])]
            samples = fit_bayes_individual(data, priors, mcmc, threads=args.threads, warn=False)
        else:
            if len(dataset) == 0:
                raise DataError("hierarchical fit needs at least one compartment")
            hyper = _build(HyperPriors, cfg["model"]["hyperpriors"], "hyperpriors")
            samples = fit_bayes_hierarchical(dataset, hyper, mcmc, threads=args.threads, warn=False)
    samples.to_csv(samples_path, comments=audit_lines(audit))
    summary = samples.summary()
    write_json(diag_path, summary, audit)
    problems = summary["problems"]
    if problems:
        print(f"convergence check failed for {len(problems)} parameter(s), e.g. {problems[0]}",
              file=sys.stderr)
        if not args.allow_warnings:
            return EXIT_CONVERGENCE
    return EXIT_OK


def _prediction_sets(samples: PosteriorSamples, args):
    """Label -> (key, (n, 2) draws) for every compartment to predict."""
    if args.new_ship:
        sisters = args.sisters.split(",") if args.sisters else sorted({k[0] for k in samples.keys})
        by_comp: dict = {}
        for k in samples.keys:
            if k[0] in sisters:
                by_comp.setdefault(k[1], []).append(samples.flat(k))
        if not by_comp:
            raise DataError("no sister-ship compartments found in the samples")
        return {(args.new_ship, c): np.concatenate(ds) for c, ds in sorted(by_comp.items())}
    keys = samples.keys
    if args.compartments:
        keys = [str_to_key(s) for s in args.compartments.split(",")]
        for k in keys:
            if k not in samples:
                raise DataError(f"{key_to_str(k)} not in samples")
    return {k: samples.flat(k) for k in keys}


def cmd_predict(args, cfg) -> int:
    samples_path = args.samples or cfg["model"]["samples"]
    if not samples_path:
        raise ConfigError("predict needs --samples")
    samples = load_samples(samples_path)
    t_start = args.t_start if args.t_start is not None else cfg["horizon"]["t_now"]
    t_end = args.t_end if args.t_end is not None else cfg["horizon"]["t_end"]
    step = args.step if args.step is not None else cfg["horizon"]["delta_t"]
    if not (0 <= t_start < t_end) or not step > 0:
        raise ConfigError("need 0 <= t_start < t_end and step > 0")
    q = tuple(float(v) for v in args.quantiles.split(","))
    if any(not 0 < v < 1 for v in q):
        raise ConfigError("quantiles must lie in (0, 1)")
    audit = audit_record("predict", cfg, args)
    os.makedirs(args.out, exist_ok=True)
    times = np.arange(t_start + step, t_end + 1e-9 * step, step)
    if times.size == 0 or times[-1] < t_end - 1e-9:
        times = np.append(times, t_end)
    sets = _prediction_sets(samples, args)
    rows, per = [], {}
    for key, d in sets.items():
        bands = expected_count_curve(d, t_start, times, q)
        means = _cum(np.exp(d[:, 0])[:, None], np.exp(d[:, 1])[:, None], t_start, times[None, :])
        for j, t in enumerate(times):
            rows.append([key[0], key[1], float(t), exact_mean(means[:, j])] + bands[j].tolist())
        pred = predictive_from_draws(d, (t_start, t_end), q, seed=args.seed)
        per[key_to_str(key)] = pred.to_dict()
    header = ["ship_id", "compartment_id", "time_months", "expected_mean"] + [f"q{v:g}" for v in q]
    write_csv(os.path.join(args.out, "predict_curves.csv"), header, rows, audit)
    doc = {"window": [t_start, t_end], "quantiles": list(q), "compartments": per}

    dataset = load_dataset(cfg, required=False)
    if dataset is not None:
        if cfg["data"]["cutoff"] is not None:
            _, dataset = split_by_time(dataset, float(cfg["data"]["cutoff"]))
        doc["validation"] = validation_report(samples, dataset, q, args.seed)
    write_json(os.path.join(args.out, "predict.json"), doc, audit)
    return EXIT_OK


def validation_report(samples: PosteriorSamples, test: FleetDataset, quantiles, seed) -> dict:
    """Share of held-out interval counts inside the outermost predictive quantiles."""
    lo_q, hi_q = min(quantiles), max(quantiles)
    hits = total = 0
    per = {}
    for h in test:
        if h.key not in samples:
            continue
        d = samples.flat(h.key)
        c_hits = 0
        for t1, t2, n in zip(h.starts, h.times, h.counts):
            pred = predictive_from_draws(d, (t1, t2), (lo_q, hi_q), seed)
            inside = pred.count_quantiles[0] <= n <= pred.count_quantiles[1]
            c_hits += int(inside)
        per[key_to_str(h.key)] = {"intervals": h.n_intervals, "covered": c_hits}
        hits += c_hits
        total += h.n_intervals
    return {"nominal": hi_q - lo_q, "intervals": total, "covered": hits,
            "coverage": (hits / total) if total else None, "compartments": per}


def _plan_summary(plan: SchedulePlan, model: CostModel) -> dict:
    b = model.breakdown(plan)
    timeline = plan.timeline()
    return {
        "total_cost": b.total,
        "breakdown": b.to_dict(),
        "n_events": plan.n_events,
        "n_inspections": plan.n_inspections,
        "event_sizes": [t["compartments"] for t in timeline if t["compartments"]],
        "ship_events": {s: v for s, v in plan.ship_events().items()},
    }


def _run_planner(name, costing, point, cfg, args, horizon, model, dataset):
    if name == "practice":
        return practice_plan(practice_assignment(cfg, sorted(point), horizon, dataset), horizon), {}
    ga = ga_config(cfg, args.seed)
    if name == "interval":
        groups = interval_groups_from(cfg, point, horizon)
        res = optimize_intervals(costing, model.config, horizon, ga, groups, args.threads, model)
        extra = {"policy": res.policy.to_dict()}
        if groups is not None:
            extra["groups"] = groups.to_dict()
    else:
        groups = group_compartments(point, horizon, int(cfg["planner"]["n_groups"]))
        res = optimize_schedule(costing, model.config, horizon, ga, groups, args.threads, model)
        extra = {"groups": groups.to_dict()}
    if res.ga is not None:
        extra["ga"] = {"generations": res.ga.generations, "best_cost": res.ga.best_cost}
    if getattr(args, "oracle", False):
        try:
            if name == "interval":
                oracle = brute_force_intervals(costing, model.config, horizon, groups, model)
            else:
                oracle = brute_force_plan(costing, model.config, horizon, groups, model)
        except ValueError as exc:
            raise ConfigError(f"--oracle: {exc}") from None
        extra["oracle"] = {"cost": oracle.cost,
                           "relative_gap": (res.cost - oracle.cost) / oracle.cost}
    return res.plan, extra


def _planning_inputs(cfg, args):
    horizon = horizon_from(cfg)
    config = cost_config(cfg)
    costing, point = resolve_params(cfg, args)
    dataset = load_dataset(cfg, required=False)
    floors = floors_from(dataset, horizon, set(point))
    try:
        model = CostModel(costing, config, horizon, floors)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return horizon, config, costing, point, dataset, floors, model


def cmd_optimize(args, cfg) -> int:
    name = args.planner or "interval"
    if name != "practice" and args.seed is None:
        raise UsageError(f"--seed is required for the {name} planner")
    horizon, config, costing, point, dataset, floors, model = _planning_inputs(cfg, args)
    audit = audit_record("optimize", cfg, args)
    plan, extra = _run_planner(name, costing, point, cfg, args, horizon, model, dataset)
    os.makedirs(args.out, exist_ok=True)
    plan.to_csv(os.path.join(args.out, "plan.csv"), comments=audit_lines(audit))
    write_csv(os.path.join(args.out, "timeline.csv"),
              ["grid_index", "time_months", "compartments", "ships"],
              [[t["grid_index"], float(t["time_months"]), t["compartments"], t["ships"]]
               for t in plan.timeline()], audit)
    doc = {"planner": name, "horizon": horizon.to_dict()}
    doc.update(_plan_summary(plan, model))
    doc.update(extra)
    write_json(os.path.join(args.out, "cost.json"), doc, audit)
    return EXIT_OK


def cmd_sensitivity(args, cfg) -> int:
    sens = cfg["planner"]["sensitivity"]
    axis = args.axis or sens["axis"]
    values = [float(v) for v in args.values.split(",")] if args.values else list(sens["values"])
    cfg["planner"]["sensitivity"] = {"axis": axis, "values": values}
    horizon, config, costing, point, dataset, floors, model = _planning_inputs(cfg, args)
    audit = audit_record("sensitivity", cfg, args)
    practice = practice_assignment(cfg, sorted(point), horizon, dataset)
    try:
        rows = sensitivity_sweep(axis, values, costing, config, horizon, ga_config(cfg, args.seed),
                                 practice, int(cfg["planner"]["n_groups"]),
                                 interval_groups_from(cfg, point, horizon), args.threads,
                                 floors=floors)
    except ValueError as exc:
        if isinstance(exc, PlanError):
            raise
        raise ConfigError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "sensitivity.csv"),
              ["axis", "value", "planner", "total_cost", "n_events", "n_inspections", "event_sizes"],
              [[r["axis"], r["value"], r["planner"], r["total_cost"], r["n_events"],
                r["n_inspections"], ";".join(str(s) for s in r["event_sizes"])] for r in rows],
              audit)
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    horizon, config, costing, point, dataset, floors, model = _planning_inputs(cfg, args)
    audit = audit_record("simulate", cfg, args)
    if args.plan:
        try:
            plan = SchedulePlan.from_csv(args.plan, horizon, sorted(point))
        except FileNotFoundError:
            raise DataError(f"plan file {args.plan} not found") from None
        source = "file"
    else:
        plan = practice_plan(practice_assignment(cfg, sorted(point), horizon, dataset), horizon)
        source = "practice"
    n_paths = args.paths if args.paths is not None else (2000 if args.fast else 20000)
    sim = simulate_plan(plan, point, config, n_paths, args.seed, floors, args.threads,
                        keep_details=True)
    doc = {"plan_source": source, "summary": sim.summary(),
           "configured": jensen_gap(plan, point, config, n_paths, args.seed, floors, args.threads)}
    if config.repair_beta != 1.0:
        lin = CostConfig(**dict(config.to_dict(), repair_beta=1.0))
        doc["beta_1"] = jensen_gap(plan, point, lin, n_paths, args.seed, floors, args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "simulation.json"), doc, audit)
    return EXIT_OK


def cmd_synth(args, cfg) -> int:
    s = dict(cfg["data"]["synth"])
    try:
        pop = Population(float(s.pop("mean_ln_a")), float(s.pop("mean_ln_b")),
                         float(s.pop("sd_ln_a")), float(s.pop("sd_ln_b")))
        regime = s.pop("regime")
        data, truth = synthesize_fleet(int(s.pop("n_ships")), int(s.pop("n_compartments")), pop,
                                       regime, float(s.pop("t_end")), args.seed, return_params=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid data.synth settings: {exc}") from None
    if s:
        raise ConfigError(f"unknown data.synth setting(s): {sorted(s)}")
    audit = audit_record("synth", cfg, args)
    os.makedirs(args.out, exist_ok=True)
    write_inspection_csv(data, os.path.join(args.out, "fleet.csv"), comments=audit_lines(audit))
    write_json(os.path.join(args.out, "truth.json"),
               {"params": {key_to_str(k): {"a": p.a, "b": p.b, "ln_a": p.ln_a, "ln_b": p.ln_b}
                           for k, p in truth.items()}}, audit)
    return EXIT_OK


# parser ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


STOCHASTIC = {"fit", "predict", "sensitivity", "simulate", "synth"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--data", help="inspection CSV")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=_seed, help="random seed (required for stochastic commands)")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: all cores)")
    common.add_argument("--fast", action="store_true", help="short MCMC/GA settings")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one configuration key (JSON value)")

    p = _Parser(prog="shipcoat", description="Coating-defect modeling and inspection planning.")
    p.add_argument("--version", action="version", version=f"shipcoat {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", parents=[common], help="fit defect-arrival models")
    f.add_argument("--mode", choices=["mle", "bayes", "hier"])
    f.add_argument("--allow-warnings", action="store_true",
                   help="exit 0 even when convergence checks fail")

    pr = sub.add_parser("predict", parents=[common], help="predicted counts and validation")
    pr.add_argument("--samples", help="samples CSV written by fit")
    pr.add_argument("--t-start", type=float)
    pr.add_argument("--t-end", type=float)
    pr.add_argument("--step", type=float)
    pr.add_argument("--quantiles", default="0.05,0.5,0.95")
    pr.add_argument("--compartments", help="comma-separated ship/compartment keys")
    pr.add_argument("--new-ship", help="predict for a new ship from pooled sister draws")
    pr.add_argument("--sisters", help="comma-separated sister ship ids (default: all)")

    for name, helptext in (("optimize", "optimize an inspection plan"),
                           ("sensitivity", "sweep one cost setting"),
                           ("simulate", "Monte-Carlo execution of a plan")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--samples", help="samples CSV written by fit")
        s.add_argument("--params", help="JSON with per-compartment a, b")
    o = sub.choices["optimize"]
    o.add_argument("--planner", choices=["interval", "schedule", "practice"])
    o.add_argument("--oracle", action="store_true", help="also solve by exhaustive search")
    se = sub.choices["sensitivity"]
    se.add_argument("--axis", choices=["beta", "ship_setup"])
    se.add_argument("--values", help="comma-separated values")
    si = sub.choices["simulate"]
    si.add_argument("--plan", help="plan CSV (default: practice plan)")
    si.add_argument("--paths", type=_positive_int)

    sub.add_parser("synth", parents=[common], help="generate a synthetic fleet")
    return p


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "optimize": cmd_optimize,
            "sensitivity": cmd_sensitivity, "simulate": cmd_simulate, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in STOCHASTIC and args.seed is None:
        print(f"shipcoat {args.command}: error: --seed is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    try:
        cfg = load_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always", TruncationWarning)
            return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"shipcoat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, PlanError) as exc:
        print(f"shipcoat {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"shipcoat {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
