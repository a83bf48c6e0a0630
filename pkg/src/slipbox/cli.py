"""Command-line entry point: ``slipbox {run,verify,poisson-test,reflect-test,report}``.

Every subcommand writes into ``--out`` and exits 0 only if all of its
pass/fail checks pass. Outputs are byte-deterministic for a fixed config,
seed and thread count.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy.fft

from . import monitor as mon
from . import suites
from .domain import BoxDomain
from .monitor import ENERGY_CLASS_P
from .evolve import InstabilityError, SimConfig, initial_condition, run as run_trajectory
from .norms import exponent_set, energy_class_ratio
from .pressure import CORPUS_COLUMNS, chain_to_dict, corpus_report, write_corpus_csv

log = logging.getLogger("slipbox")

IC_PARAMS = {
    "taylor_green": {"amplitude"},
    "single_mode": {"k", "amplitude", "direction"},
    "random_bandlimited": {"seed", "kmax", "gamma", "rms"},
}
DUALITY_TOL = 1e-8
CHAIN_TOL = 1e-8
BOUNDARY_TOL = 1e-10
SUP_CAVEAT = "p = inf norms are grid maxima (a lower bound on the true supremum)"


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------


def config_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text())


def _schema_message(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        return f"{where}: unknown key(s) {', '.join(map(repr, extra))}"
    return f"{where}: {err.message}"


def config_from_dict(doc: dict) -> SimConfig:
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("invalid config: " + "; ".join(_schema_message(e) for e in errors))
    ic = doc["ic"]
    params = dict(ic.get("params", {}))
    unknown = sorted(set(params) - IC_PARAMS[ic["id"]])
    if unknown:
        raise ConfigError(f"invalid config: ic/params: unknown key(s) {', '.join(map(repr, unknown))} "
                          f"for {ic['id']}")
    m = doc.get("monitor", {})
    kwargs = dict(
        nu=doc["nu"], dt=doc["dt"], T=doc["T"],
        extents=tuple(doc["domain"]["extents"]), resolution=tuple(doc["domain"]["resolution"]),
        ic=ic["id"], ic_params=params,
    )
    for key in ("seed", "checkpoint_every", "nonlinear_form"):
        if key in doc:
            kwargs[key] = doc[key]
    for key in ("cadence", "kappa", "lambda1", "threshold", "corpus_size"):
        if key in m:
            kwargs[key] = m[key]
    for key in ("thetas", "s_values"):
        if key in m:
            kwargs[key] = tuple(m[key])
    if "serrin_pairs" in m:
        kwargs["serrin_pairs"] = tuple(tuple(p) for p in m["serrin_pairs"])
    try:
        cfg = SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    if cfg.lambda1 is not None:
        for th in cfg.thetas:
            try:
                exponent_set(th, cfg.lambda1)
            except ValueError as exc:
                raise ConfigError(f"invalid config: monitor/lambda1: {exc}") from None
    return cfg


def parse_config(path) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc)


def config_to_dict(cfg: SimConfig) -> dict:
    return {
        "nu": cfg.nu, "dt": cfg.dt, "T": cfg.T, "seed": cfg.seed,
        "domain": {"extents": list(cfg.extents), "resolution": list(cfg.resolution)},
        "ic": {"id": cfg.ic, "params": cfg.ic_params},
        "monitor": {
            "thetas": list(cfg.thetas), "s_values": list(cfg.s_values),
            "serrin_pairs": [[p.p, p.q] for p in cfg.serrin_pairs],
            "cadence": cfg.cadence, "kappa": cfg.kappa, "lambda1": cfg.lambda1,
            "threshold": cfg.threshold, "corpus_size": cfg.corpus_size,
        },
        "checkpoint_every": cfg.checkpoint_every,
        "nonlinear_form": cfg.nonlinear_form,
    }


# -- output helpers --------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_timeseries(path, records, cfg: SimConfig, thetas) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(mon.csv_columns(thetas, cfg.s_values, cfg.serrin_pairs))
        for r in records:
            w.writerow([_fmt(x) for x in mon.record_row(r, thetas, cfg.s_values, cfg.serrin_pairs)])
    return Path(path)


def _read_table(path: Path) -> dict:
    """Numeric columns of a CSV file or of a JSON list of flat records."""
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
        if isinstance(rows, dict):
            rows = rows.get("records", [])
    else:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    cols = {}
    for row in rows:
        for k, v in row.items():
            try:
                cols.setdefault(k, []).append(float(v))
            except (TypeError, ValueError):
                cols.setdefault(k, []).append(math.nan)
    return {k: np.array(v) for k, v in cols.items() if np.any(np.isfinite(v))}


def write_svgs(table_path, out_dir) -> list[Path]:
    """One line plot per numeric column against ``t`` (or the row index)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "slipbox"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = _read_table(Path(table_path))
    x_name = "t" if "t" in cols else None
    n = len(next(iter(cols.values()))) if cols else 0
    x = cols[x_name] if x_name else np.arange(n)
    written = []
    for name, y in cols.items():
        if name == x_name:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(x, y, lw=1.2)
        ax.set_xlabel(x_name or "row")
        ax.set_ylabel(name)
        fig.tight_layout()
        target = out_dir / f"{Path(table_path).stem}_{name}.svg"
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(target)
    return written


# -- subcommands -----------------------------------------------------------------


def _corpus_seeds(cfg: SimConfig, n: int | None = None):
    n = cfg.corpus_size if n is None else n
    return [10_000 + cfg.seed * 1000 + i for i in range(n)]


def _corpus_kmax(domain: BoxDomain) -> int:
    cut = min(int(np.count_nonzero(3 * np.arange(n) < 2 * n)) for n in domain.shape)
    return min(4, cut - 1)


def _lambda1(cfg: SimConfig, theta: float) -> float:
    return cfg.lambda1 if cfg.lambda1 is not None else suites.default_lambda1(theta)


def _audit(v, cfg: SimConfig, constants: dict) -> dict:
    out = {}
    for th in cfg.thetas:
        E = exponent_set(th, _lambda1(cfg, th))
        c = {"pressure": constants["pressure_lambda"].get(mon.tag(th), 1.0)
             if cfg.lambda1 is None else 1.0,
             "sobolev": constants["sobolev"].get(mon.tag(th), 1.0)}
        links = mon.chain_audit(v, None, th, E, c, kappa=cfg.kappa, nu=cfg.nu, threshold=cfg.threshold)
        out[mon.tag(th)] = [link.to_dict() for link in links]
    return out


def cmd_run(cfg: SimConfig, out: Path, svg: bool) -> int:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", config_to_dict(cfg))
    domain = cfg.domain
    v0 = initial_condition(cfg.ic, cfg.ic_params, domain, cfg.seed)
    ckpt = out / "checkpoints" if cfg.checkpoint_every else None
    traj = run_trajectory(cfg, checkpoint_dir=ckpt, v0=v0)
    failure = None
    try:
        records = list(traj)
    except InstabilityError as exc:
        failure = str(exc)
        records = traj.records
    pairs = cfg.serrin_pairs
    thetas = traj.monitor.thetas
    corpus = suites.random_corpus(domain, _corpus_seeds(cfg), kmax=_corpus_kmax(domain))
    # the run's own end states join the maximisation so its audits stay inside the snapshot
    corpus += [("initial", v0), ("final", traj.state)]
    constants = suites.estimate_constants(domain, corpus, thetas, cfg.s_values, pairs, cfg.nu, records)
    records = mon.finalize(records, constants, pairs)
    write_json(out / "constants.json", constants)
    write_timeseries(out / "timeseries.csv", records, cfg, thetas)

    last = records[-1]
    serrin = {}
    for pr in pairs:
        key = mon.pair_tag(pr)
        c = constants["gronwall"][key]
        acc = last.serrin_acc[pr]
        st = last.spacetime[pr] ** (3.0 / (5.0 * pr.p))
        serrin[key] = {
            "p": pr.p, "q": pr.q,
            "accumulator": acc,
            "mixed_norm": acc ** (1.0 / pr.q),
            "finite": math.isfinite(acc),
            "gronwall_constant": c,
            "envelope_ok": all(r.flags[f"envelope_ok_{key}"] for r in records),
            "sup_norm_p_power": max(r.serrin_norm[pr] ** pr.p for r in records),
            "spacetime_53p_norm": st,
            "spacetime_bound": mon.spacetime_bound(c, acc, records[0].serrin_norm[pr]),
        }
    imbedding = None
    if len(records) > 1:
        series = [(r.t, r.energy_class_norm, math.sqrt(2 * r.energy), r.grad_l2) for r in records]
        imbedding = {"p": ENERGY_CLASS_P, "ratio": energy_class_ratio(series, ENERGY_CLASS_P)}
    audits = {"initial": _audit(v0, cfg, constants), "final": _audit(traj.state, cfg, constants)}
    flags = {k: all(r.flags[k] for r in records) for k in records[0].flags}
    chain_ok = all(link["pass"] is not False for snap in audits.values()
                   for links in snap.values() for link in links)
    ok = failure is None and all(flags.values()) and chain_ok and all(s["finite"] for s in serrin.values())
    summary = {
        "constants_id": constants["id"],
        "n_records": len(records),
        "final_t": last.t,
        "final_step": last.step,
        "energy": {"initial": records[0].energy, "final": last.energy},
        "max_div_residual": max(r.div_residual for r in records),
        "max_bc_residual": max(r.bc_residual for r in records),
        "flags": flags,
        "serrin": serrin,
        "energy_class_imbedding": imbedding,
        "chain_audit": audits,
        "chain_audit_ok": chain_ok,
        "failure": failure,
        "caveats": [SUP_CAVEAT],
        "pass": ok,
    }
    write_json(out / "summary.json", summary)
    if svg:
        write_svgs(out / "timeseries.csv", out / "plots")
    return 0 if ok else 1


def cmd_verify(cfg: SimConfig, out: Path, svg: bool, n_fields: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    domain = cfg.domain
    corpus = suites.random_corpus(domain, _corpus_seeds(cfg, n_fields), kmax=_corpus_kmax(domain))
    rows = corpus_report(corpus, cfg.s_values)
    write_corpus_csv(out / "corpus.csv", rows)

    records = [suites.young_fuzz(100_000, cfg.seed), suites.holder_fuzz(domain, 200, cfg.seed)]
    records += suites.interpolation_suite(corpus, sorted(set(cfg.thetas) | {4.0, 5.0, 6.0}))
    chains = []
    for row in suites.duality_suite(corpus, cfg.s_values):
        ch = row["chain"]
        chains.append({"seed": row["seed"], **chain_to_dict(ch),
                       "pass": (ch.relative_slack >= -CHAIN_TOL and ch.duality_residual < DUALITY_TOL
                                and ch.boundary_term < BOUNDARY_TOL)})
    algebra = suites.exponent_algebra(10_000, cfg.seed)
    algebra_ok = (algebra["exact_rational_ok"] and algebra["max_w1_error"] < 1e-12
                  and algebra["max_w2_error"] < 1e-12)
    ratios = {mon.tag(s): max(r["ratio"] for r in rows if r["s"] == s) for s in cfg.s_values}
    ok = all(r.passed for r in records) and all(c["pass"] for c in chains) and algebra_ok
    report = {
        "domain": {"extents": list(domain.extents), "resolution": list(domain.resolution)},
        "corpus_seeds": [s for s, _ in corpus],
        "corpus_columns": list(CORPUS_COLUMNS),
        "max_pressure_ratio": ratios,
        "records": [r.to_dict() for r in records],
        "duality_chain": chains,
        "exponent_algebra": {**algebra, "pass": algebra_ok},
        "caveats": [SUP_CAVEAT],
        "pass": ok,
    }
    write_json(out / "inequalities.json", report)
    if svg:
        write_svgs(out / "corpus.csv", out / "plots")
    return 0 if ok else 1


def cmd_poisson(cfg: SimConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rep = suites.poisson_suite(cfg.domain, 50, cfg.seed)
    ok = (all(e["relative_error"] < 1e-13 for e in rep["eigenfunctions"].values())
          and rep["self_adjoint_residual"] < 1e-11)
    write_json(out / "poisson.json", {**rep, "pass": ok})
    return 0 if ok else 1


def cmd_reflect(cfg: SimConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rep = suites.reflect_suite(cfg.domain, 50, cfg.seed)
    ok = (max(rep["max_residual_axis"].values()) < 1e-10 and rep["max_residual_corner"] < 1e-10
          and rep["wrong_parity_control"] > 1e-2)
    write_json(out / "reflect.json", {**rep, "pass": ok})
    return 0 if ok else 1


def cmd_report(out: Path, inputs) -> int:
    paths = [Path(p) for p in inputs] or [
        p for p in (out / "timeseries.csv", out / "corpus.csv") if p.is_file()]
    if not paths:
        log.error("nothing to plot in %s", out)
        return 1
    for p in paths:
        for target in write_svgs(p, out / "plots"):
            print(target)
    return 0


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads (default 1)")
    common.add_argument("--out", type=Path, default=Path("slipbox-out"), help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--svg", action="store_true", help="emit SVG line plots")
    parser = argparse.ArgumentParser(prog="slipbox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate and monitor")
    verify = sub.add_parser("verify", parents=[common], help="static corpus inequality suites")
    verify.add_argument("--fields", type=int, default=None, help="corpus size (default: config corpus_size)")
    sub.add_parser("poisson-test", parents=[common], help="Neumann solver suite")
    sub.add_parser("reflect-test", parents=[common], help="reflection commutation suite")
    report = sub.add_parser("report", parents=[common], help="CSV/JSON to SVG line plots")
    report.add_argument("inputs", nargs="*", help="tables to plot (default: outputs in --out)")
    return parser


DEFAULT_STATIC = {"nu": 0.01, "dt": 1e-3, "T": 0.0,
                  "domain": {"extents": [math.pi] * 3, "resolution": [32, 32, 32]},
                  "ic": {"id": "random_bandlimited"}}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        log.error("--threads must be at least 1")
        return 2
    try:
        if args.config is not None:
            cfg = parse_config(args.config)
        elif args.command == "run":
            raise ConfigError("run needs --config")
        else:
            cfg = config_from_dict(DEFAULT_STATIC)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    with scipy.fft.set_workers(args.threads):
        if args.command == "run":
            code = cmd_run(cfg, args.out, args.svg)
        elif args.command == "verify":
            code = cmd_verify(cfg, args.out, args.svg, args.fields or cfg.corpus_size)
        elif args.command == "poisson-test":
            code = cmd_poisson(cfg, args.out)
        elif args.command == "reflect-test":
            code = cmd_reflect(cfg, args.out)
        else:
            code = cmd_report(args.out, args.inputs)
    log.info("%s: %s", args.command, "pass" if code == 0 else "FAIL")
    return code


if __name__ == "__main__":
    sys.exit(main())
