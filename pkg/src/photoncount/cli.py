"""Command-line front end; every subcommand writes deterministic CSV.

Each CSV starts with one ``#`` line holding the package version and the
canonical command that reproduces the file.  Output goes to ``--output``, or
to ``$PHOTONCOUNT_OUTPUT_DIR/<subcommand>.<ext>`` when that variable is set,
or to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from dataclasses import dataclass, field

from . import __version__, capacity, channel, ldpc, metrics, montecarlo
from .channel import ChannelParams
from .errors import ConstructionFailed, DegenerateChannel, PhotonCountError, TargetUnreachable

OUTPUT_DIR_ENV = "PHOTONCOUNT_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_SIMULATION = 3


class UsageError(Exception):
    exit_status = EXIT_USAGE


@dataclass
class CliConfig:
    subcommand: str
    params: dict
    output: str | None = None
    master_seed: int = 0
    workers: int = 1
    canonical: list = field(default_factory=list)


def parse_grid(text: str, name: str) -> list[float]:
    """``a,b,c`` lists and ``start:stop:step`` ranges (stop excluded).

    Pieces may be mixed: ``0,0.5:2:0.5`` gives 0, 0.5, 1.0, 1.5.
    """
    values = []
    for piece in text.split(","):
        piece = piece.strip()
        try:
            if ":" in piece:
                start, stop, step = (float(p) for p in piece.split(":"))
                if not step > 0:
                    raise UsageError(f"--{name}: step must be positive in {piece!r}")
                count = math.ceil((stop - start) / step - 1e-9)
                values.extend(round(start + k * step, 12) for k in range(max(count, 0)))
            else:
                values.append(float(piece))
        except ValueError:
            raise UsageError(f"--{name}: cannot parse {piece!r} as a number or start:stop:step") from None
    if not values:
        raise UsageError(f"--{name}: empty grid")
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"--{name}: values must be finite")
    return values


def _int(text: str, name: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"--{name}: expected an integer, got {text!r}") from None
    if value < minimum:
        raise UsageError(f"--{name}: must be >= {minimum}, got {value}")
    return value


def _in_range(values, name, lo, hi, lo_open=False, hi_open=False):
    for v in values:
        bad = v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi)
        if bad:
            left, right = "(" if lo_open else "[", ")" if hi_open else "]"
            raise UsageError(f"--{name}: {v!r} outside {left}{lo:g}, {hi:g}{right}")
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# (flag, default, help) per subcommand, in canonical order.
_OPTIONS = {
    "capacity": [
        ("nc-grid", "0.1:15:0.1", "mean photon numbers (list or start:stop:step)"),
        ("delta", "0,0.5", "phase-diffusion widths"),
    ],
    "qber": [
        ("nc", None, "mean photon numbers"),
        ("delta", "0", "phase-diffusion widths"),
    ],
    "llr-table": [
        ("delta", "0", "phase-diffusion width"),
        ("cap", "10", "largest total photon count n0+n1"),
    ],
    "ber-sim": [
        ("rate", "0.5", "code rate: 0.5, 0.61 or 0.75"),
        ("model", "BIMO,BSC,AWGN", "channel models to simulate"),
        ("qber", None, "target QBER grid (exclusive with --nc)"),
        ("nc", None, "mean photon number grid (exclusive with --qber)"),
        ("delta", "0", "phase-diffusion width"),
        ("max-frames", str(montecarlo.DEFAULT_MAX_FRAMES), "frame cap per point"),
        ("min-frame-errors", str(montecarlo.DEFAULT_MIN_FRAME_ERRORS), "frame errors that end a point"),
        ("max-iters", str(ldpc.DEFAULT_MAX_ITERS), "decoder iteration limit"),
        ("code-seed", str(montecarlo.DEFAULT_CODE_SEED), "seed for the parity-check matrix"),
    ],
    "code-gen": [
        ("rate", "0.5", "code rate: 0.5, 0.61 or 0.75"),
        ("code-seed", str(montecarlo.DEFAULT_CODE_SEED), "seed for the parity-check matrix"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photoncount", description="Photon-counting channel statistics, capacity and coded BER simulation.")
    parser.add_argument("--version", action="version", version=f"photoncount {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name, options in _OPTIONS.items():
        p = sub.add_parser(name)
        for flag, default, text in options:
            p.add_argument(f"--{flag}", default=default, help=text)
        p.add_argument("--seed", default="0", help="master seed")
        p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        if name == "ber-sim":
            p.add_argument("--workers", default="1", help="worker processes; does not change the output")
    return parser


def parse_args(argv) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    if not ns.subcommand:
        raise UsageError("photoncount: a subcommand is required (capacity, qber, llr-table, ber-sim, code-gen)")
    options = _OPTIONS[ns.subcommand]
    raw = {flag: getattr(ns, flag.replace("-", "_")) for flag, _, _ in options}
    seed = _int(ns.seed, "seed", 0)
    canonical = [ns.subcommand]
    for flag, value in raw.items():
        if value is not None:
            canonical += [f"--{flag}", value]
    canonical += ["--seed", str(seed)]
    params = _validate(ns.subcommand, raw)
    workers = _int(getattr(ns, "workers", "1"), "workers", 1)
    return CliConfig(ns.subcommand, params, ns.output, seed, workers, canonical)


def _rate(text: str) -> ldpc.CodeSpec:
    try:
        return ldpc.spec_for_rate(float(text))
    except (KeyError, ValueError) as exc:
        supported = ", ".join(f"{k:g} (L={s.info_len}, r={s.parity_len})" for k, s in ldpc.CODE_SPECS.items())
        raise UsageError(f"--rate: no code for {text!r}; supported specs: {supported}") from exc


def _validate(subcommand: str, raw: dict) -> dict:
    if subcommand == "capacity":
        return {
            "nc": _in_range(parse_grid(raw["nc-grid"], "nc-grid"), "nc-grid", 0, math.inf),
            "delta": _in_range(parse_grid(raw["delta"], "delta"), "delta", 0, math.inf),
        }
    if subcommand == "qber":
        if raw["nc"] is None:
            raise UsageError("--nc is required")
        return {
            "nc": _in_range(parse_grid(raw["nc"], "nc"), "nc", 0, math.inf),
            "delta": _in_range(parse_grid(raw["delta"], "delta"), "delta", 0, math.inf),
        }
    if subcommand == "llr-table":
        (delta,) = _single(raw, "delta")
        _in_range([delta], "delta", 0, math.inf)
        if channel.q_param(delta) >= 0.5:
            raise UsageError(f"--delta: {delta!r} leaves no polarization contrast")
        return {"delta": delta, "cap": _int(raw["cap"], "cap", 0)}
    if subcommand == "code-gen":
        return {"spec": _rate(raw["rate"]), "code_seed": _int(raw["code-seed"], "code-seed", 0)}

    spec = _rate(raw["rate"])
    models = []
    for tag in raw["model"].split(","):
        try:
            models.append(montecarlo.ChannelModel(tag.strip().upper()))
        except ValueError:
            raise UsageError(f"--model: unknown model {tag!r}; choose from BIMO, BSC, AWGN") from None
    if (raw["qber"] is None) == (raw["nc"] is None):
        raise UsageError("ber-sim needs exactly one of --qber or --nc")
    (delta,) = _single(raw, "delta")
    _in_range([delta], "delta", 0, math.inf)
    if raw["qber"] is not None:
        grid = _in_range(parse_grid(raw["qber"], "qber"), "qber", 0, 0.5, lo_open=True, hi_open=True)
        points = [montecarlo.OperatingPoint(qber=v, delta=delta) for v in grid]
    else:
        grid = _in_range(parse_grid(raw["nc"], "nc"), "nc", 0, math.inf, lo_open=True)
        points = [montecarlo.OperatingPoint(nc=v, delta=delta) for v in grid]
    return {
        "spec": spec,
        "models": models,
        "points": points,
        "max_frames": _int(raw["max-frames"], "max-frames", 1),
        "min_frame_errors": _int(raw["min-frame-errors"], "min-frame-errors", 1),
        "max_iters": _int(raw["max-iters"], "max-iters", 1),
        "code_seed": _int(raw["code-seed"], "code-seed", 0),
    }


def _single(raw, name):
    values = parse_grid(raw[name], name)
    if len(values) != 1:
        raise UsageError(f"--{name}: expected a single value")
    return values


def header_line(config: CliConfig) -> str:
    return f"# photoncount {__version__} | command: photoncount {' '.join(config.canonical)}\n"


def _emit_capacity(config, out):
    grid = [ChannelParams(nc, delta) for delta in config.params["delta"] for nc in config.params["nc"]]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["N_c", "Delta", "qber", "capacity_bimo", "capacity_bsc"])
    for point in capacity.capacity_sweep(grid):
        writer.writerow([repr(point.params.nc), repr(point.params.delta), repr(point.qber), repr(point.bimo_capacity), repr(point.bsc_capacity)])


def _emit_qber(config, out):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["N_c", "Delta", "qber"])
    for delta in config.params["delta"]:
        for nc in config.params["nc"]:
            writer.writerow([repr(nc), repr(delta), repr(channel.qber(ChannelParams(nc, delta)))])


def _emit_llr_table(config, out):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n0", "n1", "llr_nat", "llr_log2"])
    for n0, n1, nat, bits in metrics.llr_table(config.params["delta"], config.params["cap"]):
        writer.writerow([n0, n1, repr(nat), repr(bits)])


def _emit_ber_sim(config, out):
    p = config.params
    records = []
    for model in p["models"]:
        if model is montecarlo.ChannelModel.BIMO:
            for point in p["points"]:
                if point.qber is not None:
                    channel.nc_for_qber(point.qber, point.delta)
                else:
                    metrics.llr_slope(point.delta)
        sim = montecarlo.SimConfig(
            code_spec=p["spec"],
            model=model,
            operating_points=p["points"],
            max_frames=p["max_frames"],
            min_frame_errors=p["min_frame_errors"],
            max_iters=p["max_iters"],
            master_seed=config.master_seed,
            code_seed=p["code_seed"],
            workers=config.workers,
        )
        failures = []
        records += montecarlo.run_sweep(sim, failures)
        if failures:
            index, exc = failures[0]
            raise _SimulationFailed(f"{model.value} point {index} failed: {exc}") from exc
    montecarlo.write_records(records, out)


def _emit_code_gen(config, out):
    code = ldpc.construct_code(config.params["spec"], config.params["code_seed"])
    ldpc.write_alist(code, out)


class _SimulationFailed(PhotonCountError):
    pass


_EMITTERS = {
    "capacity": (_emit_capacity, "csv"),
    "qber": (_emit_qber, "csv"),
    "llr-table": (_emit_llr_table, "csv"),
    "ber-sim": (_emit_ber_sim, "csv"),
    "code-gen": (_emit_code_gen, "alist"),
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (_SimulationFailed, ConstructionFailed)):
        return EXIT_SIMULATION
    if isinstance(exc, (TargetUnreachable, DegenerateChannel, ValueError)):
        return EXIT_DOMAIN
    return EXIT_SIMULATION


def _destination(config: CliConfig, ext: str):
    if config.output:
        return config.output
    directory = os.environ.get(OUTPUT_DIR_ENV)
    if directory:
        return os.path.join(directory, f"{config.subcommand}.{ext}")
    return None


def execute(config: CliConfig, stdout=None) -> int:
    """Run a parsed command; the file is written only once everything succeeded."""
    emit, ext = _EMITTERS[config.subcommand]
    buffer = io.StringIO()
    if ext == "csv":
        buffer.write(header_line(config))
    try:
        emit(config, buffer)
    except Exception as exc:
        logging.getLogger(__name__).error("%s failed: %s", config.subcommand, exc)
        print(f"photoncount {config.subcommand}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    target = _destination(config, ext)
    if target is None:
        (stdout or sys.stdout).write(buffer.getvalue())
        return EXIT_OK
    try:
        with open(target, "w", newline="") as fh:
            fh.write(buffer.getvalue())
    except BaseException:
        if os.path.exists(target):
            os.remove(target)
        raise
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    return execute(config)


if __name__ == "__main__":
    sys.exit(main())
