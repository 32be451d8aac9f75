"""Command-line front end: one JSON config in, CSV/JSON artifacts out.

    siscale region   --config cfg.json --out outdir
    siscale dsbs     --config cfg.json --out outdir
    siscale gaussian --config cfg.json --out outdir
    siscale rateloss --config cfg.json --out outdir
    siscale simulate --config cfg.json --out outdir

Every run prints one digest line per computation. Failures print a JSON
object on stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import itertools
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import binsim, dsbs, gaussian, rateloss, rdopt, regions
from .probcore import DistortionMeasure, JointSource, ValidationError, source_from_dict
from .search import Infeasible, OptimizerConfig

DEFAULT_SEED = 20060417
SUBCOMMANDS = ("region", "dsbs", "gaussian", "rateloss", "simulate")


class ConfigError(ValidationError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    config: Path
    out: Path
    seed: int = DEFAULT_SEED
    deterministic: bool = False
    grid: int | None = None
    restarts: int | None = None
    plot: bool = False

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}", "subcommand")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "seed")

    def optimizer(self, data: dict) -> OptimizerConfig:
        cards = data.get("cards", {})
        kw = {"seed": self.seed}
        if self.grid is not None:
            kw["grid_resolution"] = self.grid
        if self.restarts is not None:
            kw["restarts"] = self.restarts
        for key in ("tolerance", "descent_iterations"):
            if key in data:
                kw[key] = data[key]
        for key in ("v", "w1", "w2"):
            if key in cards:
                kw[f"card_{key}"] = int(cards[key])
        return OptimizerConfig(**kw)


# --- helpers -------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _stamp(run: RunConfig) -> str:
    if run.deterministic:
        return ""
    return f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n"


def _csv_text(header, rows, run: RunConfig):
    buf = io.StringIO()
    buf.write(_stamp(run))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in header])
    return buf.getvalue()


def _write(run: RunConfig, name, text):
    run.out.mkdir(parents=True, exist_ok=True)
    path = run.out / name
    path.write_text(text)
    return path


def _write_csv(run, name, header, rows):
    return _write(run, name, _csv_text(header, rows, run))


def _write_json(run, name, obj):
    return _write(run, name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _need(data, key, kind=None):
    if key not in data:
        raise ConfigError(f"config is missing field {key!r}", key)
    val = data[key]
    if kind is not None:
        try:
            return kind(val)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r} has an invalid value {val!r}", key) from None
    return val


def _floats(data, key):
    val = _need(data, key)
    vals = val if isinstance(val, list) else [val]
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} must be a number or a list of numbers", key) from None


def _digest(msg):
    print(msg, flush=True)


def _load_source(data):
    """Source and distortions from either a "dsbs" block or a "source" block."""
    if "dsbs" in data:
        block = data["dsbs"]
        src = JointSource.dsbs(_need(block, "p", float), block.get("q"))
        ham = DistortionMeasure.hamming(2)
        return src, ham, ham
    block = _need(data, "source")
    if not isinstance(block, dict):
        raise ConfigError("field 'source' must be an object", "source")
    src, d1, d2 = source_from_dict(block)
    if d1 is None:
        d1 = DistortionMeasure.hamming(src.nx)
    if d2 is None:
        d2 = DistortionMeasure.hamming(src.nx)
    return src, d1, d2


# --- subcommands ---------------------------------------------------------------

_BOUNDS = {
    "inner": regions.inner_region,
    "inner_hat": regions.inner_region_hat,
    "outer_out": regions.outer_region_out,
    "outer_cap": regions.outer_region_cap,
}


def run_region(run: RunConfig, data: dict) -> None:
    src, d1, d2 = _load_source(data)
    D1, D2 = _need(data, "D1", float), _need(data, "D2", float)
    cfg = run.optimizer(data)
    grid_size = int(data.get("grid_size", 9))
    names = data.get("bounds", list(_BOUNDS))
    fronts = {}
    for name in names:
        if name not in _BOUNDS:
            raise ConfigError(f"unknown bound {name!r}; choose from {sorted(_BOUNDS)}", "bounds")
        fr = _BOUNDS[name](src, d1, d2, D1, D2, cfg, grid_size=grid_size)
        fronts[name] = fr
        _write(run, f"region_{name}.csv", _stamp(run) + fr.to_csv())
        c = fr.corner()
        _digest(f"region {name}: {len(fr.points)} points, corner ({c.r1:.6g}, {c.r_sum:.6g})")
    if run.plot and fronts:
        from .plotting import plot_frontiers

        plot_frontiers(fronts, run.out / "region.png", title=f"D1={D1:g}, D2={D2:g}")


def dsbs_row(p, D1, D2, cfg=None, optimize=True):
    """One sweep row: region label, R_WZ(D1) and R_HB (closed form on I-D)."""
    region = dsbs.classify_region(p, D1, D2)
    wz = dsbs.wz_dsbs(p, D1)
    if region == dsbs.Region.I_D:
        hb = dsbs.hb_dsbs_region_ID(p, D1, D2).rate
    elif optimize:
        ham = DistortionMeasure.hamming(2)
        hb = rdopt.heegard_berger_rate(JointSource.dsbs(p), ham, ham, D1, D2, cfg)
    else:
        hb = None
    return {"D1": D1, "D2": D2, "region": region.value, "R_WZ": wz, "R_HB": hb}


def run_dsbs(run: RunConfig, data: dict) -> None:
    p = _need(data, "p", float)
    d1s, d2s = _floats(data, "D1"), _floats(data, "D2")
    cfg = run.optimizer({"cards": {"w1": 3, "w2": 3}, **data})
    optimize = bool(data.get("optimize", True))
    rows = []
    for D1, D2 in itertools.product(d1s, d2s):
        row = dsbs_row(p, D1, D2, cfg, optimize)
        rows.append(row)
        hb = "n/a" if row["R_HB"] is None else f"{row['R_HB']:.6g}"
        _digest(f"dsbs p={p:g} D1={D1:g} D2={D2:g}: {row['region']}, R_WZ={row['R_WZ']:.6g}, R_HB={hb}")
    _write_csv(run, "dsbs.csv", ["D1", "D2", "region", "R_WZ", "R_HB"], rows)
    if run.plot:
        from .plotting import plot_dsbs_sweep

        plot_dsbs_sweep(rows, run.out / "dsbs.png")


def run_gaussian(run: RunConfig, data: dict) -> None:
    var_x = _need(data, "var_x", float)
    inc = _floats(data, "increments")
    chain = (
        gaussian.GaussianChain.with_blind_last(var_x, inc)
        if data.get("blind_last", False)
        else gaussian.GaussianChain(var_x, tuple(inc))
    )
    D = _floats(data, "D")
    order = [int(k) for k in data.get("order", range(1, chain.N + 1))]
    hb, active = gaussian.hb_rate_gaussian(chain, D)
    stages = gaussian.scalable_rates(chain, D, order)
    prefix = gaussian.prefix_hb_rates(chain, D, order)
    report = gaussian.perfect_scalability_gaussian(chain, D, order)
    rows = []
    for n, k in enumerate(order):
        rows.append(
            {
                "stage": n + 1,
                "decoder": k,
                "rate": stages[n],
                "cumulative": float(stages[: n + 1].sum()),
                "prefix_hb": prefix[n],
                "wz": gaussian.wyner_ziv_gaussian(chain, k, D[k - 1]),
                "perfectly_scalable": report.per_stage[n],
            }
        )
    _write_csv(run, "gaussian_stages.csv", list(rows[0]), rows)
    grid = gaussian.cover_grid(chain, D)
    _write(run, "cover_grid.csv", _stamp(run) + grid.to_csv())
    _digest(f"gaussian N={chain.N}: R_HB={hb:.6g}, active set {list(active)}, order {order}")
    if run.plot:
        from .plotting import plot_cover_grid

        plot_cover_grid(grid, run.out / "cover_grid.png")


_RL_HEADER = [
    "var_x", "n1", "n2", "D1", "D2", "case", "r1_inner", "r_sum_inner",
    "wz_reference", "hb_reference", "gap_r1", "gap_sum", "quantization_mse", "within_budget",
]


def _rl_instances(data):
    grid = data.get("grid")
    if grid is not None:
        n2s = grid.get("n2", [None])
        for vx, n1, n2, D1, D2 in itertools.product(
            _floats(grid, "var_x"), _floats(grid, "n1"), n2s if isinstance(n2s, list) else [n2s],
            _floats(grid, "D1"), _floats(grid, "D2"),
        ):
            yield {"var_x": vx, "n1": n1, "n2": n2, "D1": D1, "D2": D2}
    for inst in data.get("instances", []):
        yield inst


def run_rateloss(run: RunConfig, data: dict) -> None:
    quant = data.get("quantized")
    cfg = run.optimizer(data)
    rows = []
    for inst in _rl_instances(data):
        par = {k: inst.get(k) for k in ("var_x", "n1", "n2", "D1", "D2")}
        for k in ("var_x", "n1", "D1", "D2"):
            _need(inst, k, float)
        if quant:
            mi = rateloss.MseInstance.quantized(
                par["var_x"], par["n1"], par["D1"], par["D2"], n2=par["n2"],
                levels=int(quant.get("levels", rateloss.DEFAULT_LEVELS)),
                span=float(quant.get("span", 3.0)),
            )
        else:
            mi = rateloss.MseInstance(par["D1"], par["D2"], var_x=par["var_x"], n1=par["n1"], n2=par["n2"])
        cert = rateloss.gap_certificate(mi, cfg)
        rows.append({**par, **cert.to_dict()})
    if not rows:
        raise ConfigError("rateloss config needs 'grid' or 'instances'", "grid")
    _write_csv(run, "rateloss.csv", _RL_HEADER, rows)
    worst1 = max(r["gap_r1"] for r in rows)
    worsts = max(r["gap_sum"] for r in rows)
    ok = all(r["within_budget"] for r in rows)
    _digest(f"rateloss: {len(rows)} instances, max gap_r1={worst1:.6g}, max gap_sum={worsts:.6g}, within budget: {ok}")
    if run.plot:
        from .plotting import plot_rateloss

        plot_rateloss(rows, run.out / "rateloss.png")


def _load_aux(data):
    block = _need(data, "aux")
    if "erasure" in block:
        e = block["erasure"]
        return binsim.erasure_aux(
            _need(e, "a1", float), _need(e, "keep1", float), _need(e, "a2", float), _need(e, "keep2", float)
        )
    return regions.ScalableAux(
        np.array(_need(block, "channel"), dtype=float),
        np.array(_need(block, "f1")),
        np.array(_need(block, "f2")),
    )


_RATE_KEYS = ("r_v", "r_w1", "r_w2", "r_a", "r_a_fine", "r_b", "r_c")


def run_simulate(run: RunConfig, data: dict) -> None:
    src, d1, d2 = _load_source(data)
    aux = _load_aux(data)
    ns = [int(n) for n in _need(data, "n")] if isinstance(data.get("n"), list) else [_need(data, "n", int)]
    trials = _need(data, "trials", int)
    delta = float(data.get("delta", binsim.DEFAULT_DELTA))
    margin = float(data.get("margin", 0.1))
    summaries, rows = [], []
    for n in ns:
        if "rates" in data:
            rates = {k: float(data["rates"].get(k, 0.0)) for k in _RATE_KEYS}
            spec = binsim.CodebookSpec(n, **rates, delta=delta, seed=run.seed)
        else:
            spec = binsim.rates_with_margin(aux, src, n, margin, delta=delta, seed=run.seed)
        summ = binsim.run_trials(spec, aux, src, trials, d1, d2, source_seed=int(data.get("source_seed", 0)))
        summaries.append(summ)
        if summ["label"] == "margin-violated":
            bad = [c["name"] for c in summ["rate_conditions"] if not c["ok"]]
            print(f"warning: n={n}: rate conditions violated: {bad}", file=sys.stderr)
        row = {
            "n": n,
            "label": summ["label"],
            "error_frequency": summ["error_frequency"],
            **summ["event_frequencies"],
            "distortion1": summ["distortion1"]["mean"],
            "distortion2": summ["distortion2"]["mean"],
        }
        rows.append(row)
        _digest(f"simulate n={n}: {summ['label']}, error frequency {summ['error_frequency']:.6g} over {trials} trials")
    _write_json(run, "simulate_summary.json", summaries)
    _write_csv(run, "simulate_trend.csv", list(rows[0]), rows)
    if run.plot:
        from .plotting import plot_trend

        plot_trend(rows, run.out / "simulate_trend.png")


_DISPATCH = {
    "region": run_region,
    "dsbs": run_dsbs,
    "gaussian": run_gaussian,
    "rateloss": run_rateloss,
    "simulate": run_simulate,
}


def _read_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from None
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", "config")
    return data


def run(config: RunConfig) -> int:
    """Execute one config; returns the process exit status."""
    try:
        data = _read_config(config.config)
        _DISPATCH[config.subcommand](config, data)
    except json.JSONDecodeError as exc:
        return _fail({"error": "parse_error", "message": exc.msg, "line": exc.lineno, "column": exc.colno})
    except ConfigError as exc:
        return _fail({"error": "config_error", "message": str(exc), "field": exc.field})
    except Infeasible as exc:
        return _fail({"error": "infeasible", "message": str(exc), "constraint": exc.constraint})
    except ValidationError as exc:
        return _fail({"error": "invalid_instance", "message": str(exc)})
    except (KeyError, TypeError, ValueError) as exc:
        return _fail({"error": "config_error", "message": str(exc), "field": None})
    return 0


def _fail(obj) -> int:
    print(json.dumps(obj), file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siscale", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="instance JSON")
    parser.add_argument("--out", default=Path("out"), type=Path, help="output directory")
    parser.add_argument("--seed", default=DEFAULT_SEED, type=int, help=f"master seed (default {DEFAULT_SEED})")
    parser.add_argument("--deterministic", action="store_true", help="omit the timestamp header line")
    parser.add_argument("--grid", type=int, help="optimizer grid resolution")
    parser.add_argument("--restarts", type=int, help="optimizer random restarts")
    parser.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            args.subcommand, args.config, args.out, args.seed, args.deterministic, args.grid, args.restarts, args.plot
        )
    except ConfigError as exc:
        return _fail({"error": "config_error", "message": str(exc), "field": exc.field})
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
