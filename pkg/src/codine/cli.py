"""Command-line entry point: ``codine fit|diagnose|mi|generate|oracle-bench``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

Values are resolved as command-line flag, then config file (INI, keys in a
``[codine]`` section and/or a section named after the command), then the
built-in default. Every output file records the resolved configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import check_mass, diagnose, q_c
from .fgen import GENERATOR_NAMES
from .gibbs import GibbsConfig, run_gibbs
from .marginals import MarginalModel, as_sample_matrix, fit_marginals, inverse_pit, pit
from .mi import METHODS, SWEEP_COLUMNS, MiConfig, mi_sweep
from .net import TrainConfig
from .oracle import AwgnSpec, kl_to_flat, nats_to_bits, sample_copula
from .trainer import CopulaModel, TrainingError, train

log = logging.getLogger("codine")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

BUNDLED = {"@spiral": Path(__file__).with_name("data") / "spiral.csv"}

DEFAULTS = {
    "seed": 0,
    "generator": "kl",
    "epochs": TrainConfig.epochs,
    "batch_size": TrainConfig.batch_size,
    "lr": TrainConfig.learning_rate,
    "optimizer": TrainConfig.optimizer,
    "hidden": "64,64",
    "activation": TrainConfig.hidden_activation,
    "lr_schedule": TrainConfig.lr_schedule,
    "input_transform": TrainConfig.input_transform,
    "mi_input_transform": "probit",
    "n_mc": 100_000,
    "orders": "1,2",
    "grid_size": GibbsConfig.grid_size,
    "burn_in": GibbsConfig.burn_in,
    "thinning": GibbsConfig.thinning,
    "n_chains": GibbsConfig.n_chains,
    "n_out": 1000,
    "n_samples": 10_000,
    "d": "1",
    "snr_db": "-10,0,10",
    "rho": "0",
    "generators": "kl",
    "methods": "direct-ratio",
    "bench_d": "2,5",
    "bench_rho": "0.5",
    "bench_snr_db": "-10,0,10",
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


# -- parsing helpers -----------------------------------------------------------

def _floats(text, name) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _ints(text, name) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected comma-separated integers, got {text!r}") from None


def _words(text) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def parse_oracle(text: str) -> AwgnSpec:
    """Parse ``d=2,rho=0.5,snr_db=0`` into a channel spec."""
    fields = {}
    for part in _words(text):
        key, sep, value = part.partition("=")
        if not sep:
            raise CliError(f"--oracle: expected key=value pairs, got {part!r}")
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"d", "rho", "snr_db"}
    if unknown or "d" not in fields or "snr_db" not in fields:
        raise CliError("--oracle needs d=..., snr_db=... and optionally rho=...")
    try:
        return AwgnSpec.from_db(int(fields["d"]), float(fields["snr_db"]), float(fields.get("rho", 0.0)))
    except ValueError as exc:
        raise CliError(f"--oracle: {exc}") from None


def read_csv(path) -> tuple[np.ndarray, list[str] | None]:
    """Numeric CSV with an optional header row; one observation per row."""
    path = BUNDLED.get(str(path), Path(path))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise CliError(f"{path}: no data rows")
    header = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    width = len(header) if header else len(rows[0]) if rows else 0
    data = []
    for i, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise CliError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            col = next(j for j, v in enumerate(row) if not _is_float(v))
            raise CliError(f"{path}: row {i}, column {col + 1}: not a number ({row[col]!r})") from None
    if len(data) < 2:
        raise CliError(f"{path}: need at least 2 data rows, got {len(data)}")
    try:
        arr = as_sample_matrix(data, min_rows=2, name=str(path))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return arr, header


def _is_float(v) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def _header_line(command: str, config: dict) -> str:
    return f"# codine {__version__} {command} config: {json.dumps(config, sort_keys=True)}\n"


def write_csv(path, command: str, config: dict, columns, rows) -> None:
    buf = io.StringIO()
    buf.write(_header_line(command, config))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _write_text(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_text(path, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from None


def _load_json_model(path, loader, what):
    try:
        return loader(path)
    except OSError as exc:
        raise CliError(f"cannot read {what} file {path}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"{what} file {path}: {exc}") from None


# -- config resolution ---------------------------------------------------------

class Resolver:
    """Flag > config file > default lookup, recording every resolved value."""

    def __init__(self, args: argparse.Namespace, file_values: dict):
        self.args = args
        self.file_values = file_values
        self.resolved: dict = {}
        self.defaulted: set[str] = set()

    def __call__(self, key: str, default_key: str | None = None):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.file_values.get(key)
        if value is None:
            value = DEFAULTS.get(default_key or key)
            self.defaulted.add(key)
        self.resolved[key] = value
        return value


def _read_config(path, command: str) -> dict:
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except configparser.Error as exc:
        raise CliError(f"config {path}: {exc}") from None
    values = {}
    for section in ("codine", command):
        if parser.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in parser.items(section)})
    return values


def _train_config(r: Resolver, transform_default: str = "input_transform") -> TrainConfig:
    try:
        return TrainConfig(
            epochs=int(r("epochs")),
            batch_size=int(r("batch_size")),
            learning_rate=float(r("lr")),
            seed=int(r("seed")),
            optimizer=str(r("optimizer")),
            hidden=tuple(_ints(r("hidden"), "hidden")),
            hidden_activation=str(r("activation")),
            lr_schedule=str(r("lr_schedule")),
            input_transform=str(r("input_transform", transform_default)),
        )
    except ValueError as exc:
        raise CliError(f"invalid training configuration: {exc}") from None


def _gibbs_config(r: Resolver) -> GibbsConfig:
    try:
        return GibbsConfig(
            grid_size=int(r("grid_size")),
            burn_in=int(r("burn_in")),
            thinning=int(r("thinning")),
            n_chains=int(r("n_chains")),
            seed=int(r("seed")),
        )
    except ValueError as exc:
        raise CliError(f"invalid Gibbs configuration: {exc}") from None


def _generator(r: Resolver) -> str:
    name = str(r("generator")).lower()
    if name not in GENERATOR_NAMES:
        raise CliError(f"--generator must be one of {', '.join(GENERATOR_NAMES)}, got {name!r}")
    return name


# -- commands ------------------------------------------------------------------

def cmd_fit(args, r: Resolver) -> int:
    generator = _generator(r)
    cfg = _train_config(r)
    data, header = read_csv(r("input"))
    out = Path(r("out"))
    try:
        marginals = fit_marginals(data)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    u = pit(marginals, data)

    def progress(rec):
        log.info("epoch %d  J=%.6f  %.1fs", rec["epoch"], rec["objective"], rec["wall_time"])

    try:
        model = train(u, generator, cfg, callback=progress)
    except TrainingError as exc:
        raise CliError(f"training aborted: {exc}", EXIT_NUMERIC) from None
    curve = model.metadata["curve"]
    if not np.isfinite(curve[-1]):
        raise CliError("final objective is not finite", EXIT_NUMERIC)
    run_config = dict(r.resolved, command="fit")
    model.metadata["run_config"] = run_config
    model.metadata["columns"] = header or [f"x{i}" for i in range(data.shape[1])]
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    marginals.save(out / "marginals.json")
    write_csv(out / "curve.csv", "fit", run_config, ["epoch", "objective"], enumerate(curve))
    print(f"final J_f = {curve[-1]:.6f}; wrote {out / 'model.json'}, {out / 'marginals.json'}, {out / 'curve.csv'}")
    return EXIT_OK


def cmd_diagnose(args, r: Resolver) -> int:
    model = _load_json_model(r("model"), CopulaModel.load, "model")
    spec = parse_oracle(r("oracle")) if r("oracle") else None
    if spec is not None and spec.d != model.d:
        raise CliError(f"--oracle d={spec.d} does not match model dimension {model.d}")
    pseudo = None
    if r("data"):
        data, _ = read_csv(r("data"))
        if r("marginals"):
            marg = _load_json_model(r("marginals"), MarginalModel.load, "marginals")
            try:
                pseudo = pit(marg, data)
            except ValueError as exc:
                raise CliError(str(exc)) from None
        else:
            pseudo = data
        if pseudo.shape[1] != model.d or np.any((pseudo <= 0) | (pseudo >= 1)):
            raise CliError("--data must be pseudo-observations in (0,1) of the model dimension, or pass --marginals")
    orders = _ints(r("orders"), "orders")
    try:
        report = diagnose(model, pseudo, spec, orders, int(r("n_mc")), int(r("seed")))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    strict = bool(args.strict)
    doc = report.to_dict()
    doc["run_config"] = dict(r.resolved, command="diagnose", strict=strict)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if r("out"):
        _write_text(r("out"), text)
    else:
        sys.stdout.write(text)
    mass = report.mass
    print(f"mass {mass.estimate:.4f} +/- {mass.stderr:.4f}: {'pass' if mass.passed else 'FAIL'}", file=sys.stderr)
    if report.qc is not None:
        print(
            f"Q_c {report.qc.bits:.5f} bits (flat baseline {nats_to_bits(report.baseline_nats):.5f} bits)",
            file=sys.stderr,
        )
    if strict and not report.passed:
        return 1
    return EXIT_OK


def cmd_mi(args, r: Resolver) -> int:
    cfg_train = _train_config(r, "mi_input_transform")
    dims = _ints(r("d"), "d")
    snrs = _floats(r("snr_db"), "snr-db")
    rhos = _floats(r("rho"), "rho")
    generators = [g.lower() for g in _words(r("generators"))]
    methods = _words(r("methods"))
    if not dims or not snrs or not rhos:
        raise CliError("the (d, snr_db, rho) grid is empty")
    bad = [g for g in generators if g not in GENERATOR_NAMES] + [m for m in methods if m not in METHODS]
    if bad:
        raise CliError(f"unknown generator/method: {', '.join(bad)}")
    try:
        config = MiConfig(
            train=cfg_train,
            generators=generators,
            methods=methods,
            n_samples=int(r("n_samples")),
            seed=int(r("seed")),
        )
        grid = [AwgnSpec.from_db(d, s, rho) for d in dims for rho in rhos for s in snrs]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rows = mi_sweep(grid, config)
    run_config = dict(r.resolved, command="mi")
    write_csv(r("out"), "mi", run_config, SWEEP_COLUMNS, ([row[c] for c in SWEEP_COLUMNS] for row in rows))
    for row in rows:
        log.info("d=%d snr=%+.1f dB %s/%s: %.4f bits (truth %.4f)", row["d"], row["snr_db"],
                 row["generator"], row["method"], row["mi_bits"], row["truth_bits"])
    print(f"wrote {len(rows)} rows to {r('out')}")
    return EXIT_OK


def cmd_generate(args, r: Resolver) -> int:
    model = _load_json_model(r("model"), CopulaModel.load, "model")
    marg = _load_json_model(r("marginals"), MarginalModel.load, "marginals")
    if marg.d != model.d:
        raise CliError(f"marginals dimension {marg.d} does not match model dimension {model.d}")
    cfg = _gibbs_config(r)
    n_out = int(r("n_out"))
    if n_out < 1:
        raise CliError("--n-out must be positive")
    result = run_gibbs(model, model.d, n_out, cfg)
    x = inverse_pit(marg, result.samples)
    columns = model.metadata.get("columns") or [f"x{i}" for i in range(model.d)]
    run_config = dict(r.resolved, command="generate")
    write_csv(r("out"), "generate", run_config, columns, x.tolist())
    ac = ", ".join(f"{a:.3f}" for a in np.atleast_1d(result.autocorrelation))
    print(f"wrote {n_out} rows to {r('out')} (lag-1 autocorrelation [{ac}], {result.n_fallback} fallbacks)")
    return EXIT_OK


def cmd_oracle_bench(args, r: Resolver) -> int:
    cfg_train = _train_config(r)
    generator = _generator(r)
    dims = _ints(r("d", "bench_d"), "d")
    snrs = _floats(r("snr_db", "bench_snr_db"), "snr-db")
    rhos = _floats(r("rho", "bench_rho"), "rho")
    n_samples = int(r("n_samples"))
    n_mc = int(r("n_mc"))
    seed = int(r("seed"))
    if not dims or not snrs or not rhos:
        raise CliError("the (d, snr_db, rho) grid is empty")
    columns = ["d", "snr_db", "rho", "generator", "baseline_bits", "qc_bits", "qc_stderr_bits",
               "mass", "mass_stderr", "beats_baseline", "status"]
    rows, timings = [], []
    for d in dims:
        for rho in rhos:
            for s in snrs:
                start = time.perf_counter()
                row = {"d": d, "snr_db": s, "rho": rho, "generator": generator}
                try:
                    spec = AwgnSpec.from_db(d, s, rho)
                    base = kl_to_flat(spec)
                    row["baseline_bits"] = float(nats_to_bits(base))
                    u = sample_copula(spec, n_samples, seed)
                    model = train(u, generator, cfg_train)
                    qc = q_c(model, spec, n_mc, seed + 1)
                    mass = check_mass(model, n_mc, seed + 2)
                    row.update(qc_bits=qc.bits, qc_stderr_bits=qc.stderr_bits, mass=mass.estimate,
                               mass_stderr=mass.stderr, beats_baseline=int(qc.nats < base), status="ok")
                except (TrainingError, ValueError, FloatingPointError) as exc:
                    log.warning("bench cell d=%d rho=%g snr=%g failed: %s", d, rho, s, exc)
                    row["status"] = f"error: {exc}"
                rows.append(row)
                timings.append([d, s, rho, time.perf_counter() - start])
                log.info("cell d=%d rho=%g snr=%+g dB: %s", d, rho, s, row)
    run_config = dict(r.resolved, command="oracle-bench")
    out = Path(r("out"))
    write_csv(out, "oracle-bench", run_config, columns,
              ([row.get(c, float("nan")) for c in columns] for row in rows))
    timing_path = out.with_name(out.stem + ".timing.csv")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([["d", "snr_db", "rho", "seconds"], *timings])
    _write_text(timing_path, buf.getvalue())
    print(f"wrote {len(rows)} cells to {out} (timings in {timing_path})")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "mi": cmd_mi,
    "generate": cmd_generate,
    "oracle-bench": cmd_oracle_bench,
}


def _add_training(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--lr", type=float, help="peak learning rate")
    g.add_argument("--optimizer", choices=("adam", "sgd"))
    g.add_argument("--hidden", help="hidden layer widths, e.g. 64,64")
    g.add_argument("--activation", choices=("softplus", "tanh"))
    g.add_argument("--lr-schedule", dest="lr_schedule", choices=("cosine", "constant"))
    g.add_argument("--input-transform", dest="input_transform", choices=("linear", "probit"),
                   help="network input encoding (default: linear; probit for mi)")


def _add_gibbs(p):
    g = p.add_argument_group("Gibbs sampling")
    g.add_argument("--grid-size", dest="grid_size", type=int)
    g.add_argument("--burn-in", dest="burn_in", type=int)
    g.add_argument("--thinning", type=int)
    g.add_argument("--n-chains", dest="n_chains", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file ([codine] and per-command sections)")
    common.add_argument("--seed", type=int, help="RNG seed (default 0, reported when defaulted)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="codine", description="Copula density neural estimation.")
    parser.add_argument("--version", action="version", version=f"codine {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit marginals and a copula density model")
    p.add_argument("--input", help="observations CSV (optional header); '@spiral' for the bundled toy data")
    p.add_argument("--out", help="output directory for model.json, marginals.json, curve.csv")
    p.add_argument("--generator", help=f"one of {', '.join(GENERATOR_NAMES)}")
    _add_training(p)

    p = sub.add_parser("diagnose", parents=[common], help="self-consistency checks for a fitted model")
    p.add_argument("--model")
    p.add_argument("--data", help="observations CSV (with --marginals) or pseudo-observations CSV")
    p.add_argument("--marginals")
    p.add_argument("--oracle", help="ground truth channel, e.g. d=2,rho=0.5,snr_db=0")
    p.add_argument("--orders", help="moment orders, e.g. 1,2")
    p.add_argument("--n-mc", dest="n_mc", type=int)
    p.add_argument("--strict", action="store_true", help="exit 1 when any check fails")
    p.add_argument("--out", help="report path (default stdout)")

    p = sub.add_parser("mi", parents=[common], help="mutual-information sweep over AWGN channels")
    p.add_argument("--d", help="dimensions, e.g. 1,5")
    p.add_argument("--snr-db", dest="snr_db", help="SNR grid in dB; write --snr-db=-10,0,10")
    p.add_argument("--rho", help="noise correlation grid")
    p.add_argument("--generators", help=f"subset of {','.join(GENERATOR_NAMES)}")
    p.add_argument("--methods", help=f"subset of {','.join(METHODS)}")
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--out")
    _add_training(p)

    p = sub.add_parser("generate", parents=[common], help="Gibbs-sample new observations")
    p.add_argument("--model")
    p.add_argument("--marginals")
    p.add_argument("--n-out", dest="n_out", type=int)
    p.add_argument("--out")
    _add_gibbs(p)

    p = sub.add_parser("oracle-bench", parents=[common], help="Q_c versus the flat-copula baseline")
    p.add_argument("--d", help="dimensions, e.g. 2,5")
    p.add_argument("--snr-db", dest="snr_db", help="SNR grid in dB; write --snr-db=-10,0,10")
    p.add_argument("--rho", help="noise correlation grid")
    p.add_argument("--generator")
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--n-mc", dest="n_mc", type=int)
    p.add_argument("--out")
    _add_training(p)
    return parser


REQUIRED = {
    "fit": ("input", "out"),
    "diagnose": ("model",),
    "mi": ("out",),
    "generate": ("model", "marginals", "out"),
    "oracle-bench": ("out",),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        r = Resolver(args, _read_config(args.config, args.command))
        missing = [k for k in REQUIRED[args.command] if r(k) is None]
        if missing:
            raise CliError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
        r("seed")
        if "seed" in r.defaulted:
            print(f"no --seed given; using seed {r.resolved['seed']}", file=sys.stderr)
        return COMMANDS[args.command](args, r)
    except CliError as exc:
        print(f"codine {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
