"""Command line interface: ``optspec {threshold,design-curve,predict,simulate}``.

Every option can come from a JSON config file (``--config``); flags given
on the command line override it.  A CSV written by this tool embeds its
resolved config on a ``# config:`` line, so it can be passed back to
``--config`` to reproduce the run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import channels as chn
from . import design as dsg
from . import montecarlo as mc
from . import preprocess as pp

OUT_ENV = "OPTSPEC_OUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NOCONV = 0, 1, 2

DEFAULTS = {
    "channel": "poisson",
    "kappa": 5.0,
    "sigma": 1.0,
    "mode": "complex",
    "channel_file": None,
    "alphas": "1:12:1",
    "preproc": ["optimal"],
    "scale": 1.0,
    "epsilon": None,
    "table_alpha": 3.0,
    "n": 1024,
    "trials": 16,
    "seed": 0,
    "workers": 1,
    "tol": 1e-8,
    "max_iters": 10_000,
    "formats": "csv",
}
# keys that do not affect results and are left out of the embedded config
_VOLATILE = ("out", "config", "workers")

COLUMNS = ["alpha", "preprocessor", "rho_theory", "lambda_star", "cos2_mean", "cos2_std",
           "trials", "n", "flags"]


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- config -----------------------------------------------------------------------

def parse_alphas(text) -> list[float]:
    """``start:stop:step`` (stop included within half a step) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(a) for a in text]
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ConfigError("alpha step must be positive")
            count = int(math.floor((stop - start) / step + 0.5)) + 1
            return [round(start + k * step, 12) for k in range(max(count, 0))]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad alpha grid {text!r}: {exc}") from None


def read_config(path) -> dict:
    """JSON object, or the ``# config:`` line of a CSV previously written here."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("{"):
        for line in text.splitlines():
            if line.startswith("# config:"):
                text = line[len("# config:"):]
                break
        else:
            raise ConfigError(f"{path}: no JSON object and no '# config:' line")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - set(DEFAULTS) - {"command"}
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = read_config(args.config)
        file_cfg.pop("command", None)
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in DEFAULTS:
            cfg[k] = v
    if isinstance(cfg["preproc"], str):
        cfg["preproc"] = [p for p in cfg["preproc"].split(",") if p]
    cfg["alphas"] = parse_alphas(cfg["alphas"])
    out = getattr(args, "out", None) or os.environ.get(OUT_ENV)
    cfg["out"] = out
    return cfg


def build_channel(cfg) -> chn.Channel:
    try:
        if cfg["channel"] == "custom" or cfg.get("channel_file"):
            if not cfg.get("channel_file"):
                raise ConfigError("custom channels need --channel-file")
            return chn.load_channel(cfg["channel_file"])
        return chn.channel_from_spec({"kind": cfg["channel"], "kappa": cfg["kappa"],
                                      "sigma": cfg["sigma"], "mode": cfg["mode"]})
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(str(exc)) from None


def _channel_cfg(cfg) -> dict:
    keep = {"channel": cfg["channel"], "mode": cfg["mode"]}
    if cfg["channel"] == "poisson":
        keep["kappa"] = cfg["kappa"]
    elif cfg["channel"] in ("gaussian", "gaussian-noise"):
        keep["sigma"] = cfg["sigma"]
    elif cfg.get("channel_file"):
        keep["channel_file"] = cfg["channel_file"]
    return keep


# options that affect each command's output
_RELEVANT = {
    "threshold": (),
    "design-curve": ("alphas", "epsilon", "table_alpha"),
    "predict": ("alphas", "preproc", "scale"),
    "simulate": ("alphas", "preproc", "scale", "n", "trials", "seed", "tol", "max_iters"),
}


def relevant(command: str, cfg: dict) -> dict:
    keep = _channel_cfg(cfg) | {k: cfg[k] for k in _RELEVANT[command]}
    keep["formats"] = cfg["formats"]
    keep["out"] = cfg.get("out")
    return keep


def config_line(command: str, cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if k not in _VOLATILE}
    clean["command"] = command
    return json.dumps(clean, sort_keys=True, separators=(",", ":"))


# -- preprocessor specs -------------------------------------------------------------

@dataclass
class Resolved:
    """A preprocessor chosen for one alpha, or the reason there is none."""

    label: str
    T: pp.Preprocessor | None = None
    flags: str = ""
    rho: float | None = None  # set directly for the bound row


def resolve_preproc(spec: str, ch: chn.Channel, alpha: float, scale: float = 1.0) -> Resolved:
    name, _, arg = spec.partition(":")
    aw = chn.alpha_weak(ch)
    T = None
    flags = ""
    if name == "bound":
        return Resolved("bound", rho=dsg.rho_optimal(ch, alpha))
    if name == "optimal":
        T = dsg.optimal_preprocessor(ch)
        if not T:
            return Resolved("optimal", flags="infeasible")
    elif name == "mm":
        if alpha <= aw:
            return Resolved("mm", flags="below-threshold")
        T = pp.MM(alpha, ch)
    elif name == "trim":
        if arg:
            T = pp.Trim(float(arg))
        else:
            a, _, T = asy.tune_trim(ch, alpha)
            flags = f"a={a:g}"
    elif name == "subset":
        if arg:
            T = pp.Subset(float(arg))
        else:
            b, _, T = asy.tune_subset(ch, alpha)
            flags = f"b={b:.6g}"
    elif name == "epsilon":
        if not arg:
            raise ConfigError("epsilon preprocessor needs a level, e.g. epsilon:0.3")
        if alpha <= aw:
            return Resolved(spec, flags="below-threshold")
        T = dsg.epsilon_preprocessor(ch, alpha, float(arg))
        flags = f"v={T.v:.10g}"
    elif name == "tabulated":
        T = pp.load_tabulated(arg)
    else:
        raise ConfigError(f"unknown preprocessor {spec!r}")
    if scale != 1.0:
        T = pp.Scaled(T, scale)
    return Resolved(spec, T, flags)


# -- output -------------------------------------------------------------------------

def _fmt(x, short=False) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return ""
        return format(float(x), ".12g") if short else repr(float(x))
    return str(x)


def render_csv(command: str, cfg: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# optspec {__version__}\n")
    buf.write(f"# config:{config_line(command, cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def render_json(command: str, cfg: dict, rows) -> str:
    doc = {"version": __version__, "config": json.loads(config_line(command, cfg)),
           "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                     for k, v in r.items()} for r in rows]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(command: str, cfg: dict, rows, width=640, height=420) -> str:
    """Theory lines per preprocessor with error-bar markers for simulated means."""
    series = {}
    for r in rows:
        series.setdefault(r["preprocessor"], []).append(r)
    alphas = [r["alpha"] for r in rows] or [0.0, 1.0]
    x0, x1 = min(alphas), max(alphas)
    if x1 == x0:
        x1 = x0 + 1.0
    L, R, T, B = 60, 150, 20, 50
    sx = lambda a: L + (a - x0) / (x1 - x0) * (width - L - R)
    sy = lambda v: height - B - v * (height - T - B)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f"<!-- optspec {__version__} config:{config_line(command, cfg)} -->",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{L}" y1="{sy(0)}" x2="{width - R}" y2="{sy(0)}" stroke="black"/>',
           f'<line x1="{L}" y1="{sy(0)}" x2="{L}" y2="{sy(1)}" stroke="black"/>']
    for k in range(6):
        v = k / 5
        out.append(f'<text x="{L - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
        a = x0 + k * (x1 - x0) / 5
        out.append(f'<text x="{sx(a):.1f}" y="{height - B + 16}" text-anchor="middle">{a:.3g}</text>')
    out.append(f'<text x="{(L + width - R) / 2}" y="{height - 12}" text-anchor="middle">alpha</text>')
    out.append(f'<text x="14" y="{(T + height - B) / 2}" transform="rotate(-90 14 '
               f'{(T + height - B) / 2})" text-anchor="middle">squared cosine</text>')
    for i, (name, rs) in enumerate(series.items()):
        col = _PALETTE[i % len(_PALETTE)]
        pts = [(sx(r["alpha"]), sy(r["rho_theory"])) for r in rs
               if r.get("rho_theory") is not None and not math.isnan(r["rho_theory"])]
        if pts:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for r in rs:
            m = r.get("cos2_mean")
            if m is None or math.isnan(m):
                continue
            s = r.get("cos2_std")
            s = 0.0 if s is None or math.isnan(s) else s
            x = sx(r["alpha"])
            out.append(f'<line x1="{x:.2f}" y1="{sy(m - s):.2f}" x2="{x:.2f}" y2="{sy(m + s):.2f}" '
                       f'stroke="{col}"/>')
            out.append(f'<circle cx="{x:.2f}" cy="{sy(m):.2f}" r="3" fill="{col}"/>')
        ly = T + 16 * i + 8
        out.append(f'<line x1="{width - R + 10}" y1="{ly}" x2="{width - R + 30}" y2="{ly}" '
                   f'stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{width - R + 35}" y="{ly + 4}">{_xml(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _xml(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit(command: str, cfg: dict, columns, rows, stdout=None, stem=None):
    stdout = stdout or sys.stdout
    text = render_csv(command, cfg, columns, rows)
    stdout.write(text)
    out = cfg.get("out")
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    stem = stem or command
    fmts = [f.strip() for f in str(cfg["formats"]).split(",") if f.strip()]
    bad = set(fmts) - {"csv", "json", "svg"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    if "csv" in fmts:
        (d / f"{stem}.csv").write_text(text)
    if "json" in fmts:
        (d / f"{stem}.json").write_text(render_json(command, cfg, rows))
    if "svg" in fmts and "rho_theory" in columns:
        (d / f"{stem}.svg").write_text(render_svg(command, cfg, rows))


# -- commands -----------------------------------------------------------------------

def cmd_threshold(cfg, stdout):
    ch = build_channel(cfg)
    aw = chn.alpha_weak(ch)
    integral = chn.weak_threshold_integral(ch)
    cfg = relevant("threshold", cfg)
    rows = [{"alpha_weak": aw, "integral": integral, "bound": ch.fourth_moment}]
    stdout.write(f"alpha_weak={_fmt(aw, True)}\nintegral={_fmt(integral, True)}\n")
    if cfg.get("out"):
        emit("threshold", cfg, ["alpha_weak", "integral", "bound"], rows, stdout=io.StringIO())
    return EXIT_OK


def _table_grid(ch) -> np.ndarray:
    if ch.is_discrete:
        return np.arange(0.0, 41.0)
    y = np.linspace(0.0, 20.0, 201)
    return np.union1d(y, [a.location for a in ch.atoms])


def cmd_design_curve(cfg, stdout):
    ch = build_channel(cfg)
    rows = []
    for a in cfg["alphas"]:
        r = dsg.design(ch, a)
        rows.append({"alpha": a, "alpha_weak": r.alpha_weak, "beta_alpha": r.beta_alpha,
                     "rho_opt": r.rho_opt, "regime": r.regime})
    cfg = relevant("design-curve", cfg)
    emit("design-curve", cfg, ["alpha", "alpha_weak", "beta_alpha", "rho_opt", "regime"], rows, stdout)
    if cfg.get("out"):
        y = _table_grid(ch)
        if cfg.get("epsilon") is not None:
            T = dsg.epsilon_preprocessor(ch, cfg["table_alpha"], float(cfg["epsilon"]))
            col = f"T_eps(alpha={cfg['table_alpha']:g} eps={cfg['epsilon']:g})"
        else:
            T = dsg.optimal_preprocessor(ch)
            if not T:
                stdout.write(f"# optimal preprocessor not attainable: {T.reason}\n")
                return EXIT_OK
            col = "T_opt"
        table = [{"y": float(v), col: float(t)} for v, t in zip(y, T(y))]
        emit("design-curve", cfg, ["y", col], table, stdout=io.StringIO(), stem="design-table")
    return EXIT_OK


def _predict_rows(cfg, ch):
    rows = []
    for spec in cfg["preproc"]:
        for a in cfg["alphas"]:
            res = resolve_preproc(spec, ch, a, cfg["scale"])
            row = {"alpha": a, "preprocessor": res.label, "flags": res.flags, "T": res.T}
            if res.rho is not None:
                row["rho_theory"] = res.rho
            elif res.T is None:
                row["rho_theory"] = 0.0 if "below" in res.flags else math.nan
            else:
                p = asy.solve_lambda_star(ch, res.T, a)
                row["rho_theory"] = p.rho
                row["lambda_star"] = p.lambda_star
            rows.append(row)
    return rows


def cmd_predict(cfg, stdout):
    ch = build_channel(cfg)
    rows = _predict_rows(cfg, ch)
    for r in rows:
        r.pop("T")
    cfg = relevant("predict", cfg)
    emit("predict", cfg, [c for c in COLUMNS if c not in ("cos2_mean", "cos2_std", "trials", "n")],
         rows, stdout)
    return EXIT_OK


def cmd_simulate(cfg, stdout):
    ch = build_channel(cfg)
    rows = _predict_rows(cfg, ch)
    code = EXIT_OK
    workers = cfg["workers"]
    for j, r in enumerate(rows):
        T = r.pop("T")
        r["n"] = cfg["n"]
        if T is None:
            continue
        (sw,) = mc.run_sweep(ch, T, cfg["n"], [r["alpha"]], cfg["trials"], base_seed=cfg["seed"],
                             workers=workers, tol=cfg["tol"], max_iters=cfg["max_iters"],
                             predict=False, stream_offset=j)
        r.update(cos2_mean=sw.cos2_mean, cos2_std=sw.cos2_std, trials=sw.trials)
        if sw.failures:
            r["flags"] = ";".join(f for f in (r["flags"], f"noconv={sw.failures}") if f)
            code = EXIT_NOCONV
    cfg = relevant("simulate", cfg)
    emit("simulate", cfg, COLUMNS, rows, stdout)
    return code


COMMANDS = {
    "threshold": cmd_threshold,
    "design-curve": cmd_design_curve,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON config file or a CSV written by this tool")
    common.add_argument("--channel", choices=["poisson", "gaussian", "noiseless", "custom"])
    common.add_argument("--kappa", type=float, help="Poisson intensity scale")
    common.add_argument("--sigma", type=float, help="Gaussian noise standard deviation")
    common.add_argument("--mode", choices=["complex", "real"])
    common.add_argument("--channel-file", dest="channel_file", help="custom channel JSON")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    common.add_argument("--formats", help="comma list of csv,json,svg")

    grid = argparse.ArgumentParser(add_help=False, argument_default=S)
    grid.add_argument("--alphas", help="start:stop:step or a comma list")

    pre = argparse.ArgumentParser(add_help=False, argument_default=S)
    pre.add_argument("--preproc", help="comma list: optimal, mm, trim[:a], subset[:b], "
                                       "epsilon:eps, tabulated:path, bound")
    pre.add_argument("--scale", type=float, help="multiply every preprocessor by this factor")

    p = _Parser(prog="optspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"optspec {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("threshold", parents=[common], help="weak threshold and its certificate")
    dc = sub.add_parser("design-curve", parents=[common, grid], help="beta_alpha and rho_opt over alpha")
    dc.add_argument("--epsilon", type=float, default=S, help="tabulate the epsilon-truncated design")
    dc.add_argument("--table-alpha", dest="table_alpha", type=float, default=S,
                    help="alpha used for the epsilon tabulation (default 3)")
    sub.add_parser("predict", parents=[common, grid, pre], help="asymptotic squared cosine")
    sim = sub.add_parser("simulate", parents=[common, grid, pre], help="Monte Carlo sweep")
    sim.add_argument("--n", type=int, default=S)
    sim.add_argument("--trials", type=int, default=S)
    sim.add_argument("--seed", type=int, default=S)
    sim.add_argument("--workers", type=int, default=S)
    sim.add_argument("--tol", type=float, default=S)
    sim.add_argument("--max-iters", dest="max_iters", type=int, default=S)
    return p


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, stdout)
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"optspec: config error: {exc}\n")
        return EXIT_CONFIG
    except mc.NoConvergence as exc:
        sys.stderr.write(f"optspec: {exc}\n")
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
