"""``smtree`` command line: sweep, predict, nom and trace subcommands.

Scenario settings come from a preset, an optional flat ``key = value``
config file, and command-line overrides, applied in that order.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from .analysis import NumericFailure
from .core import CsirModel, InvalidArgument, build_qam, enumerate_candidates
from .decode import SignalMetrics, TableMetrics, mm_decode, mmw_decode
from .harness import (
    DECODERS,
    SweepConfig,
    analytic_average,
    draw_instance,
    nom_study,
    run_sweep,
    trial_rng,
)

__all__ = ["main", "PRESETS", "ConfigError", "parse_config_text", "parse_snr_grid", "worked_example_metrics"]

SWEEP_COLUMNS = (
    "snr_db",
    "ber_ml",
    "ber_mm",
    "ber_mmw",
    "avg_nodes_ml",
    "avg_nodes_mm",
    "c_r_mm",
    "c_r_max",
    "nom_count",
    "analytic_c_mm",
)
PREDICT_COLUMNS = ("snr_db", "analytic_c_mm", "c_r_analytic")
NOM_COLUMNS = ("snr_db", "nom_count", "trials")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_FULL_GRID = "0:2:30"

# (M, N_t, N_r, csir, snr grid)
PRESETS = {
    "fig3": dict(M=8, N_t=8, N_r=8, csir="0", snr="0:5:30"),
    "fig4a": dict(M=8, N_t=8, N_r=8, csir="0", snr=_FULL_GRID),
    "fig4b": dict(M=16, N_t=16, N_r=16, csir="0", snr=_FULL_GRID),
    "fig5a": dict(M=8, N_t=8, N_r=8, csir="0", snr=_FULL_GRID),
    "fig5b": dict(M=16, N_t=16, N_r=16, csir="0", snr=_FULL_GRID),
    "fig6a": dict(M=8, N_t=8, N_r=6, csir="0", snr=_FULL_GRID),
    "fig6b": dict(M=16, N_t=16, N_r=12, csir="0", snr=_FULL_GRID),
    "fig7a": dict(M=8, N_t=8, N_r=10, csir="0", snr=_FULL_GRID),
    "fig7b": dict(M=16, N_t=16, N_r=20, csir="0", snr=_FULL_GRID),
    "fig8": dict(M=16, N_t=16, N_r=16, csir="0", snr="20"),
    "fig9": dict(M=16, N_t=16, N_r=16, csir="0", snr="20"),
    "fig10": dict(M=16, N_t=16, N_r=4, csir="0", snr="20"),
}

_KEYS = {
    "preset": str,
    "M": int,
    "N_t": int,
    "N_r": int,
    "csir": str,
    "snr": str,
    "trials": int,
    "seed": int,
    "realizations": int,
    "decoders": str,
    "workers": int,
}
_KEY_ALIASES = {"m": "M", "nt": "N_t", "n_t": "N_t", "nr": "N_r", "n_r": "N_r", "sigma_e": "csir", "sigma_e2": "csir"}


class ConfigError(ValueError):
    pass


def parse_snr_grid(text: str) -> tuple:
    """``start:step:stop`` (inclusive) or a comma-separated list of dB values."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad SNR range {text!r}")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + k * step, 10) for k in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse SNR grid {text!r}") from None


def _canonical_key(key: str) -> str:
    if key in _KEYS:
        return key
    k = key.lower().replace("-", "_")
    return _KEY_ALIASES.get(k, k)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        canon = _canonical_key(key)
        if canon not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[canon] = _KEYS[canon](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _merge_settings(args) -> dict:
    settings = {"trials": 10_000, "seed": 0, "realizations": 200, "decoders": ",".join(DECODERS)}
    file_settings = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_settings = parse_config_text(fh.read(), args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
    preset = args.preset or file_settings.get("preset")
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        settings.update(PRESETS[preset])
    settings.update(file_settings)
    overrides = {
        "M": args.M,
        "N_t": args.N_t,
        "N_r": args.N_r,
        "csir": args.sigma_e,
        "snr": args.snr,
        "trials": args.trials,
        "seed": args.seed,
        "realizations": args.realizations,
        "decoders": args.decoders,
        "workers": args.workers,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    missing = [k for k in ("M", "N_t", "N_r", "snr") if k not in settings]
    if missing:
        raise ConfigError(f"missing settings: {', '.join(missing)} (use --preset or a config file)")
    return settings


def build_sweep_config(args) -> SweepConfig:
    s = _merge_settings(args)
    try:
        decoders = tuple(d.strip() for d in s["decoders"].split(",") if d.strip())
        unknown = set(decoders) - set(DECODERS)
        if unknown:
            raise ConfigError(f"unknown decoders: {', '.join(sorted(unknown))}")
        return SweepConfig(
            M=s["M"],
            N_t=s["N_t"],
            N_r=s["N_r"],
            snr_db_points=parse_snr_grid(str(s["snr"])),
            csir=CsirModel.parse(s.get("csir", "0")),
            trials=s["trials"],
            decoders=decoders,
            base_seed=s["seed"],
            analytic_realizations=s["realizations"],
            workers=s.get("workers"),
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    # repr gives the shortest string that round-trips a double
    return repr(float(value))


def write_csv(rows: list, columns: tuple, path: str | None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str) -> list:
    """Parse a CSV written by this tool; numbers come back as float or int."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        parsed = {}
        for k, v in row.items():
            if v == "":
                parsed[k] = None
            elif k in ("nom_count", "trials"):
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out


def worked_example_metrics() -> TableMetrics:
    """Stub distances for the worked 3x4, M = 2 example.

    Branch 4 (index 3) opens at 0.1 and reaches 0.4 then 0.6; branch 1
    (index 0) opens at 0.2 and reaches 0.5 then 0.55. Branches 2 and 3 are
    expanded once in iterations 3 and 4; the rest never leave level one.
    """
    acc = np.array(
        [
            [0.2, 0.3, 0.35, 0.1, 0.9, 1.0, 1.1, 1.2],
            [0.5, 0.7, 0.8, 0.4, 1.5, 1.6, 1.7, 1.8],
            [0.55, 1.3, 1.4, 0.6, 2.0, 2.1, 2.2, 2.3],
        ]
    )
    return TableMetrics.from_accumulated(acc)


def _fmt_v(v) -> str:
    return "[" + " ".join(str(x) for x in v) + "]"


def format_trace(metrics, decoder: str = "mm") -> tuple:
    """Iteration log of a best-first search; branch numbers are 1-based."""
    lines = []

    def hook(ev):
        if ev.stop:
            lines.append(f"stop, branch {ev.j_min + 1}, radius {ev.d_value:.6g}")
        else:
            lines.append(
                f"iteration {ev.iteration}: expand branch {ev.j_min + 1}, "
                f"v = {_fmt_v(ev.v)}, d = {ev.d_value:.6g}"
            )

    decode = mm_decode if decoder == "mm" else mmw_decode
    outcome = decode(metrics, trace=hook)
    lines.append(f"visited nodes: {outcome.visited_nodes}")
    return lines, outcome


def _cmd_sweep(args) -> int:
    cfg = build_sweep_config(args)
    result = run_sweep(cfg)
    write_csv(result.rows(), SWEEP_COLUMNS, args.output)
    for snr, msg in result.numeric_failures:
        print(f"numeric failure at {snr} dB: {msg}", file=sys.stderr)
    return EXIT_NUMERIC if result.numeric_failures else EXIT_OK


def _cmd_predict(args) -> int:
    cfg = build_sweep_config(args)
    if cfg.analytic_realizations < 1:
        raise ConfigError("predict needs realizations >= 1")
    total = cfg.K * cfg.N_r
    rows, failed = [], False
    for i, snr in enumerate(cfg.snr_db_points):
        try:
            c = analytic_average(cfg, i)
        except NumericFailure as exc:
            print(f"numeric failure at {snr} dB: {exc}", file=sys.stderr)
            c, failed = math.nan, True
        rows.append({"snr_db": snr, "analytic_c_mm": c, "c_r_analytic": 1.0 - c / total})
    write_csv(rows, PREDICT_COLUMNS, args.output)
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_nom(args) -> int:
    cfg = build_sweep_config(args)
    rows = [{"snr_db": s, "nom_count": n, "trials": t} for s, n, t in nom_study(cfg)]
    write_csv(rows, NOM_COLUMNS, args.output)
    return EXIT_OK


def _cmd_trace(args) -> int:
    if args.example:
        metrics = worked_example_metrics()
    else:
        cfg = build_sweep_config(args)
        snr = cfg.snr_db_points[0]
        c = build_qam(cfg.M)
        j, ch, y = draw_instance(trial_rng(cfg.base_seed, 0, 0), cfg, snr, c)
        metrics = SignalMetrics(y, enumerate_candidates(ch, c))
        print(f"# transmitted branch {j + 1} of {cfg.K} at {snr:g} dB")
    lines, _ = format_trace(metrics, args.decoder)
    out = "\n".join(lines) + "\n"
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="named scenario")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--M", "-M", type=int, dest="M", help="QAM order")
    p.add_argument("--nt", type=int, dest="N_t", help="transmit antennas")
    p.add_argument("--nr", type=int, dest="N_r", help="receive antennas")
    p.add_argument("--sigma-e", dest="sigma_e", help="CSIR error variance: 0, a number, or 1/snr")
    p.add_argument("--snr", help="SNR grid in dB, start:step:stop or a comma list")
    p.add_argument("--trials", type=int, help="trials per SNR point")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--realizations", type=int, help="channel draws for the analytic average")
    p.add_argument("--decoders", help="comma list from ml,mm,mmw")
    p.add_argument("--workers", type=int, help="worker processes (capped by SM_THREADS)")
    p.add_argument("-o", "--output", help="output path (default: stdout)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smtree", description="Spatial-modulation tree-search detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep", "Monte Carlo BER / visited-node sweep (CSV)"),
        ("predict", "analytic expected visited nodes (CSV)"),
        ("nom", "misses of m-Mw against ML (CSV)"),
        ("trace", "iteration log of one m-M search"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "trace":
            p.add_argument("--example", action="store_true", help="use the worked 3x4, M=2 example")
            p.add_argument("--decoder", choices=("mm", "mmw"), default="mm")
    return parser


_COMMANDS = {"sweep": _cmd_sweep, "predict": _cmd_predict, "nom": _cmd_nom, "trace": _cmd_trace}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"smtree: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"smtree: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
