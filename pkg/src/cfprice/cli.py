"""Command-line interface.

    cfprice price --model bs --kind call --spot 100 --strike 100 --rate 0.05 --vol 0.2 --maturity 1
    cfprice verify-pde --kind put --partials fd --tolerance 1e-5
    cfprice simulate-sqrtbm --dt 0.01 --n-steps 1000 --seed 7 > path.csv
    cfprice oracle-compare --model bs --oracle crr --tree-steps 10000 --tolerance 1e-3 ...
    cfprice sweep --model american --param spot --start 50 --stop 150 --num 101 ...

Every flag can also come from ``--config file.json`` (keys are flag names with
or without dashes); flags given on the command line win.

JSON documents have the top-level keys ``command``, ``inputs``, ``result`` and
``diagnostics``. Exit status: 0 ok, 1 domain error, 2 usage error,
3 tolerance failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

from . import closed_form as cf
from . import oracles, pde_verify, sqrtbm
from .errors import PricingError
from .numerics import (
    AMERICAN,
    BERMUDAN,
    CALL,
    EUROPEAN,
    PUT,
    MarketState,
    OptionContract,
    Volatility,
    payoff,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_TOLERANCE = 3

MODELS = ("bs", "american", "bermudan", "stochvol")
ORACLES = ("crr", "crr-american", "crr-bermudan", "mc-gbm", "mc-eq6")
COMPATIBLE = {
    "bs": ("crr", "mc-gbm"),
    "american": ("crr-american",),
    "bermudan": ("crr-bermudan",),
    "stochvol": ("mc-eq6", "mc-gbm"),
}
SWEEP_PARAMS = ("spot", "strike", "rate", "vol", "maturity", "now", "psi", "delta", "beta")

COMMON_DEFAULTS = {"output": "json", "output_path": None, "seed": 0}
MODEL_DEFAULTS = {
    "kind": None, "spot": None, "strike": None, "rate": None, "vol": None,
    "maturity": None, "now": 0.0, "psi": None, "delta": None, "first_exercise": None,
    "beta": None, "mu": 0.0, "lam": 0.0, "omega": "rademacher", "omega_half_width": 1.0,
}
DEFAULTS = {
    "price": {**MODEL_DEFAULTS, "model": None},
    "verify-pde": {
        "kind": CALL, "strike": 100.0, "rate": 0.05, "vol": 0.2, "psi": 0.1,
        "maturity": 1.0, "s_min": 50.0, "s_max": 150.0, "t_min": 0.0, "t_max": 0.9,
        "n_s": 101, "n_t": 91, "partials": "analytic", "candidate": "closed-form",
        "tolerance": 1e-8, "h_s_rel": pde_verify.DEFAULT_H_S_REL,
        "h_t": pde_verify.DEFAULT_H_T, "include_nodes": False,
    },
    "simulate-sqrtbm": {"dt": None, "n_steps": None, "output": "csv",
                        "diagnostics_path": None, "include_path": False},
    "oracle-compare": {
        **MODEL_DEFAULTS, "model": None, "oracle": None, "policy": None,
        "tolerance": None, "tree_steps": 1000, "n_paths": 100000, "n_steps": None,
        "antithetic": False, "n_seeds": 1, "min_pass_fraction": 0.99, "workers": None,
    },
    "sweep": {**MODEL_DEFAULTS, "model": None, "param": None, "start": None,
              "stop": None, "num": 11, "output": "csv"},
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", choices=("json", "csv", "plain"))
    p.add_argument("--output-path")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file mirroring any of the flags")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=(CALL, PUT))
    for name in ("spot", "strike", "rate", "vol", "maturity", "now", "psi", "delta",
                 "first-exercise", "beta", "mu", "lam", "omega-half-width"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--omega", choices=("rademacher", "uniform"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfprice", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="closed-form price")
    p.add_argument("--model", choices=MODELS)
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("verify-pde", help="PDE residual scan of the closed form")
    p.add_argument("--kind", choices=(CALL, PUT))
    for name in ("strike", "rate", "vol", "psi", "maturity", "s-min", "s-max", "t-min",
                 "t-max", "tolerance", "h-s-rel", "h-t"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--n-s", type=int)
    p.add_argument("--n-t", type=int)
    p.add_argument("--partials", choices=("analytic", "fd"))
    p.add_argument("--candidate", choices=("closed-form", "payoff"))
    p.add_argument("--include-nodes", action="store_true", default=None)
    _add_common(p)

    p = sub.add_parser("simulate-sqrtbm", help="square-root-BM path and diagnostics")
    p.add_argument("--dt", type=float)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--diagnostics-path")
    p.add_argument("--include-path", action="store_true", default=None)
    _add_common(p)

    p = sub.add_parser("oracle-compare", help="closed form vs tree / Monte Carlo")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--oracle", choices=ORACLES)
    p.add_argument("--policy", choices=("absolute", "se_multiple", "report_only"))
    p.add_argument("--tolerance", type=float)
    p.add_argument("--tree-steps", type=int)
    p.add_argument("--n-paths", type=int)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--antithetic", action="store_true", default=None)
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--min-pass-fraction", type=float)
    p.add_argument("--workers", type=int)
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="CSV of price over a parameter range")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--param", choices=SWEEP_PARAMS)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    _add_model_flags(p)
    _add_common(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge command line > config file > defaults."""
    defaults = {**COMMON_DEFAULTS, **DEFAULTS[args.command]}
    config = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in raw.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest == "command":
                continue
            if dest not in defaults:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            config[dest] = value
    merged = {}
    for dest, default in defaults.items():
        cli_value = getattr(args, dest, None)
        if cli_value is not None:
            merged[dest] = cli_value
        elif dest in config:
            merged[dest] = config[dest]
        else:
            merged[dest] = default
    return merged


def _need(opts: dict, *names: str) -> None:
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required flag(s): {flags}")


# ---------------------------------------------------------------- builders

def _model_inputs(opts: dict, model: str):
    """Contract, market and model parameters for ``model``."""
    _need(opts, "spot", "strike", "rate", "maturity")
    if model in ("bs", "american"):
        _need(opts, "kind", "vol")
    if model == "american":
        _need(opts, "psi")
    if model == "bermudan":
        _need(opts, "delta", "first_exercise", "vol")
        if opts.get("kind") not in (None, PUT):
            raise UsageError("bermudan model prices puts only")
    if model == "stochvol":
        _need(opts, "beta")
        if opts.get("kind") not in (None, CALL):
            raise UsageError("stochvol model prices calls only")

    kind = {"bermudan": PUT, "stochvol": CALL}.get(model, opts.get("kind"))
    style = {"american": AMERICAN, "bermudan": BERMUDAN}.get(model, EUROPEAN)
    contract = OptionContract(
        strike=opts["strike"], maturity=opts["maturity"], kind=kind, style=style,
        first_exercise=opts["first_exercise"] if style == BERMUDAN else None,
    )
    market = MarketState(spot=opts["spot"], rate=opts["rate"], now=opts["now"])
    vol = Volatility(opts["vol"]) if opts.get("vol") is not None else None
    if model == "american":
        params = cf.ConsumptionParams(opts["psi"])
    elif model == "bermudan":
        params = cf.BermudanParams(opts["delta"])
    elif model == "stochvol":
        params = cf.StochVolParams(
            beta=opts["beta"], mu=opts["mu"], lam=opts["lam"],
            omega=cf.OmegaSpec(opts["omega"], opts["omega_half_width"]),
        )
    else:
        params = None
    return contract, market, vol, params


def _closed_form(model, contract, market, vol, params) -> cf.PriceResult:
    if model == "bs":
        fn = cf.bs_call if contract.kind == CALL else cf.bs_put
        return fn(market, contract, vol)
    if model == "american":
        fn = cf.american_call if contract.kind == CALL else cf.american_put
        return fn(market, contract, vol, params)
    if model == "bermudan":
        return cf.bermudan_put(market, contract, vol, params)
    return cf.stochvol_call(market, contract, params)


def _model_echo(opts: dict, model: str) -> dict:
    keys = ["spot", "strike", "rate", "maturity", "now"]
    keys += {"bs": ["kind", "vol"], "american": ["kind", "vol", "psi"],
             "bermudan": ["vol", "delta", "first_exercise"],
             "stochvol": ["beta", "mu", "lam", "omega", "omega_half_width"]}[model]
    return {"model": model, **{k: opts[k] for k in keys}}


# ---------------------------------------------------------------- commands

def cmd_price(opts: dict):
    _need(opts, "model")
    model = opts["model"]
    contract, market, vol, params = _model_inputs(opts, model)
    result = _closed_form(model, contract, market, vol, params)
    return _model_echo(opts, model), result.to_dict(), {}, EXIT_OK


def cmd_verify_pde(opts: dict):
    contract = OptionContract(strike=opts["strike"], maturity=opts["maturity"],
                              kind=opts["kind"], style=AMERICAN)
    vol = Volatility(opts["vol"])
    params = cf.ConsumptionParams(opts["psi"])
    try:
        grid = pde_verify.GridSpec(opts["s_min"], opts["s_max"], opts["t_min"],
                                   opts["t_max"], int(opts["n_s"]), int(opts["n_t"]))
    except PricingError as exc:
        raise UsageError(str(exc)) from exc
    if grid.t_max >= contract.maturity:
        raise UsageError("--t-max must be below --maturity")
    coeffs = pde_verify.PdeCoefficients(rate=opts["rate"], sigma=vol.sigma, psi=params.psi)
    if opts["candidate"] == "closed-form":
        surface = cf.american_surface(contract, vol, opts["rate"], params)
    else:
        surface = lambda t, S: payoff(contract, S)  # noqa: E731
    report = pde_verify.residual_scan(
        surface, coeffs, grid, maturity=contract.maturity,
        analytic=opts["partials"] == "analytic",
        h_S_rel=opts["h_s_rel"], h_t=opts["h_t"],
    )
    inputs = {k: opts[k] for k in DEFAULTS["verify-pde"] if k != "include_nodes"}
    inputs["alpha"] = coeffs.alpha
    result = report.to_dict(include_nodes=bool(opts["include_nodes"]))
    passed = report.max_abs <= opts["tolerance"]
    result["passed"] = passed
    return inputs, result, {}, EXIT_OK if passed else EXIT_TOLERANCE


def _sqrtbm_run(opts: dict):
    _need(opts, "dt", "n_steps")
    if opts["dt"] <= 0.0 or int(opts["n_steps"]) < 1:
        raise UsageError("--dt must be positive and --n-steps >= 1")
    config = sqrtbm.SqrtBmConfig(dt=opts["dt"], n_steps=int(opts["n_steps"]),
                                 seed=int(opts["seed"]))
    sample = sqrtbm.sqrtbm_increments(config)
    path = sqrtbm.sqrtbm_path(config)
    diag = sqrtbm.increment_diagnostics(sample, config.dt)
    diag["final_value"] = float(path[-1])
    return config, sample, path, diag


def _path_rows(config, sample, path):
    yield ["step", "t", "increment", "partial_sum"]
    yield [0, 0.0, 0.0, float(path[0])]
    for k in range(1, config.n_steps + 1):
        yield [k, k * config.dt, float(sample.values[k - 1]), float(path[k])]


def cmd_oracle_compare(opts: dict):
    _need(opts, "model", "oracle")
    model, oracle = opts["model"], opts["oracle"]
    if oracle not in COMPATIBLE[model]:
        raise UsageError(f"oracle {oracle} cannot check model {model}; "
                         f"choose from {', '.join(COMPATIBLE[model])}")
    contract, market, vol, params = _model_inputs(opts, model)
    closed = _closed_form(model, contract, market, vol, params)

    policy_kind = opts["policy"] or ("se_multiple" if oracle.startswith("mc") else "absolute")
    tolerance = opts["tolerance"]
    if tolerance is None:
        tolerance = 3.0 if policy_kind == "se_multiple" else 1e-3
    policy = oracles.TolerancePolicy(policy_kind, tolerance)

    n_seeds = int(opts["n_seeds"])
    if n_seeds < 1:
        raise UsageError("--n-seeds must be >= 1")
    if oracle.startswith("crr") and n_seeds != 1:
        raise UsageError("--n-seeds only applies to Monte Carlo oracles")

    estimates = []

    def one_run(seed: int) -> oracles.ComparisonReport:
        if oracle.startswith("crr"):
            tree = oracles.TreeConfig(int(opts["tree_steps"]))
            value = oracles.crr_price(market, contract, vol, tree)
            return oracles.compare(closed, value, policy, oracle_method=oracle,
                                   contract=contract, market=market)
        mc = oracles.McConfig(
            n_paths=int(opts["n_paths"]),
            n_steps=int(opts["n_steps"] or (250 if oracle == "mc-eq6" else 1)),
            seed=seed, antithetic=bool(opts["antithetic"]),
            n_workers=opts["workers"],
        )
        if oracle == "mc-gbm":
            sim_vol = vol if model == "bs" else Volatility(params.beta)
            est = oracles.mc_gbm_price(market, contract, sim_vol, mc)
        else:
            est = oracles.mc_eq6_price(market, contract, params, mc)
        estimates.append(est)
        return oracles.compare(closed, est, policy)

    seed = int(opts["seed"])
    reports = [one_run(seed + i) for i in range(n_seeds)]
    inputs = {**_model_echo(opts, model), "oracle": oracle, "policy": policy_kind,
              "tolerance": tolerance, "seed": seed}
    if oracle.startswith("crr"):
        inputs["tree_steps"] = int(opts["tree_steps"])
    else:
        inputs.update(n_paths=int(opts["n_paths"]), n_seeds=n_seeds,
                      antithetic=bool(opts["antithetic"]))
    diagnostics = {}
    if estimates:
        diagnostics["estimates"] = [e.to_dict() for e in estimates]

    if n_seeds == 1:
        report = reports[0]
        ok = report.verdict != "outside_tolerance"
        return inputs, report.to_dict(), diagnostics, EXIT_OK if ok else EXIT_TOLERANCE

    n_within = sum(r.verdict == "within_tolerance" for r in reports)
    report_only = all(r.verdict == "report_only" for r in reports)
    required = math.ceil(opts["min_pass_fraction"] * n_seeds - 1e-9)
    ok = report_only or n_within >= required
    result = {"n_runs": n_seeds, "n_within": n_within, "required": required,
              "passed": ok, "reports": [r.to_dict() for r in reports]}
    return inputs, result, diagnostics, EXIT_OK if ok else EXIT_TOLERANCE


def _sweep_rows(opts: dict):
    _need(opts, "model", "param", "start", "stop")
    num = int(opts["num"])
    if num < 1:
        raise UsageError("--num must be >= 1")
    param = opts["param"]
    step = (opts["stop"] - opts["start"]) / (num - 1) if num > 1 else 0.0
    yield [param, "price", "premium_factor", "base_price"]
    for i in range(num):
        value = opts["start"] + i * step
        contract, market, vol, params = _model_inputs({**opts, param: value}, opts["model"])
        res = _closed_form(opts["model"], contract, market, vol, params)
        yield [value, res.price, res.premium_factor, res.base_price]


# ---------------------------------------------------------------- output

def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _plain_text(doc: dict) -> str:
    lines = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}[{i}]", v)
        else:
            lines.append(f"{prefix}={obj!r}" if isinstance(obj, float) else f"{prefix}={obj}")

    walk("", doc)
    return "\n".join(lines) + "\n"


def _json_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: Optional[str], stream) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stream.write(text)


def _document(command, inputs, result, diagnostics) -> dict:
    return {"command": command, "inputs": inputs, "result": result,
            "diagnostics": diagnostics}


def _render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return _json_text(doc)
    if fmt == "plain":
        return _plain_text(doc)
    flat = {}
    for section in ("inputs", "result"):
        for k, v in doc[section].items():
            if not isinstance(v, (dict, list)):
                flat[k] = v
    return _csv_text([list(flat), list(flat.values())])


def run(opts: dict, command: str, stdout, stderr) -> int:
    fmt = opts["output"]
    if command == "simulate-sqrtbm":
        config, sample, path, diag = _sqrtbm_run(opts)
        inputs = {"dt": config.dt, "n_steps": config.n_steps, "seed": config.seed,
                  "sign_rule": config.sign_rule}
        if fmt == "csv":
            _emit(_csv_text(_path_rows(config, sample, path)), opts["output_path"], stdout)
            diag_doc = _json_text(_document(command, inputs, diag, {}))
            _emit(diag_doc, opts["diagnostics_path"], stderr)
        else:
            result = dict(diag)
            if opts["include_path"]:
                result["path"] = path.tolist()
            _emit(_render(_document(command, inputs, result, {}), fmt),
                  opts["output_path"], stdout)
        return EXIT_OK
    if command == "sweep":
        rows = list(_sweep_rows(opts))
        if fmt == "csv":
            text = _csv_text(rows)
        else:
            header, body = rows[0], rows[1:]
            doc = _document(command, {"model": opts["model"], "param": opts["param"]},
                            {"rows": [dict(zip(header, r)) for r in body]}, {})
            text = _render(doc, fmt)
        _emit(text, opts["output_path"], stdout)
        return EXIT_OK

    handler = {"price": cmd_price, "verify-pde": cmd_verify_pde,
               "oracle-compare": cmd_oracle_compare}[command]
    inputs, result, diagnostics, status = handler(opts)
    _emit(_render(_document(command, inputs, result, diagnostics), fmt),
          opts["output_path"], stdout)
    return status


def main(argv: Optional[list] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(args)
        return run(opts, args.command, stdout, stderr)
    except UsageError as exc:
        stderr.write(f"cfprice {args.command}: usage error: {exc}\n")
        return EXIT_USAGE
    except PricingError as exc:
        stderr.write(f"cfprice {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
