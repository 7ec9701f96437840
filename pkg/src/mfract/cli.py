"""The ``mfract`` command line.

Every subcommand reads image files, writes its outputs under ``--out`` and
leaves a :class:`~mfract._manifest.RunManifest` next to them, which
``mfract replay`` can re-execute.
"""

import argparse
import logging
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from rich import box, print
from rich.logging import RichHandler
from rich.table import Table

from ._manifest import MANIFEST_NAME, RunManifest, sha256_file, tool_version
from ._parse import parse_attention_spec, parse_int_list
from .boxcount import fd_gap
from .density import density_closed_form, density_exact, measure_stack
from .diffusion_sched import schedule_from_config, verify_schedule
from .grouping import assign_stage, process_stage
from .image_core import (
    decode,
    encode,
    resize_bicubic,
    to_gray,
    to_uint8_preview,
    write_pfm,
    write_pfm_stack,
)
from .mfspec import density_spectrum, image_spectrum
from .schema import (
    DEFAULT_SPECTRUM_BOXES,
    BoxCountConfig,
    DensityFitConfig,
    GroupProcessorConfig,
    MfbConfig,
    RuntimeConfig,
    ScheduleConfig,
    SpectrumConfig,
)
from .spectral_filter import apply_filter, attention_from_spec, band_profile

_logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
FD_COLUMNS = ["path", "fd_hr", "fd_lr", "diff", "r2_hr", "r2_lr"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

_NOT_RECORDED = {"command", "quiet", "verbose", "manifest", "source"}


class SpectrumReport(BaseModel):
    """JSON form of a spectrum summary."""

    model_config = ConfigDict(frozen=True)

    quad_coeffs: List[float]
    width: float
    peak_alpha: float
    collapsed: bool
    n_points: int


class AnchorReport(BaseModel):
    """JSON form of the fitted anchors."""

    model_config = ConfigDict(frozen=True)

    b: List[float]
    a: List[float]
    degenerate: bool


@dataclass(frozen=True)
class _Run:
    options: Dict[str, Any]
    configs: Dict[str, BaseModel]
    out: Path
    show: bool

    @property
    def threads(self) -> Optional[int]:
        return self.options["threads"]


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Return the ``mfract`` argument parser with every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (default .)")
    common.add_argument("--seed", type=int, default=None, help="seed (MFRACT_SEED)")
    common.add_argument(
        "--manifest", default=None, help=f"manifest path (default OUT/{MANIFEST_NAME})"
    )
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=None,
        help="thread cap (MFRACT_THREADS)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="warnings only")
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="mfract", description="Fractal and multifractal image analysis."
    )
    parser.add_argument("--version", action="version", version=tool_version())
    sub = parser.add_subparsers(dest="command", required=True)

    fd = sub.add_parser(
        "fd", parents=[common], help="fractal dimension of HR images and LR copies"
    )
    fd.add_argument("inputs", nargs="+", help="image files")
    fd.add_argument("--scale", type=_positive_int, default=4, help="downsample factor")
    fd.add_argument("--sizes", default=None, help="box sizes, e.g. '2,4,8,16'")
    fd.add_argument("--gray-levels", type=_positive_int, default=256)

    spectrum = sub.add_parser(
        "spectrum", parents=[common], help="multifractal spectrum f(alpha)"
    )
    spectrum.add_argument("input")
    spectrum.add_argument(
        "--method",
        choices=["histogram", "density"],
        default="histogram",
        help="box-mass histogram or density level sets",
    )
    spectrum.add_argument("--bins", type=_positive_int, default=24)
    spectrum.add_argument(
        "--boxes", default=",".join(str(s) for s in DEFAULT_SPECTRUM_BOXES)
    )
    spectrum.add_argument("--min-scales", type=_positive_int, default=3)
    spectrum.add_argument(
        "--sets", type=_positive_int, default=12, help="density level sets"
    )
    spectrum.add_argument("--windows", default=None, help="odd windows (density)")

    density = sub.add_parser("density", parents=[common], help="per-pixel density map")
    density.add_argument("input")
    density.add_argument("--windows", default=None, help="odd windows (MFRACT_WINDOWS)")
    density.add_argument(
        "--method", choices=["exact", "closed", "both"], default="closed"
    )
    density.add_argument("--variant", choices=["ols", "printed"], default="ols")
    density.add_argument("--epsilon-floor", type=float, default=1e-8)

    group = sub.add_parser(
        "group", parents=[common], help="anchor membership and multi-fractal block"
    )
    group.add_argument("input")
    group.add_argument("--anchors", type=_positive_int, default=None)
    group.add_argument("--sharpness", type=float, default=1.0)
    group.add_argument("--out-channels", type=_positive_int, default=3)
    group.add_argument("--windows", default=None)

    filt = sub.add_parser("filter", parents=[common], help="spectral attention filter")
    filt.add_argument("input")
    filt.add_argument(
        "--attention",
        default="identity",
        help="identity | lowpass:R | highpass:R | file:PATH (R in cycles/pixel)",
    )
    filt.add_argument(
        "--report-bands", type=int, default=0, help="number of radial bands to report"
    )

    sched = sub.add_parser("schedule", parents=[common], help="DDPM noise schedule")
    sched.add_argument("--T", type=_positive_int, default=1000)
    sched.add_argument("--beta-start", type=float, default=1e-6)
    sched.add_argument("--beta-end", type=float, default=1e-2)
    sched.add_argument("--verify", action="store_true")
    sched.add_argument("--trials", type=_positive_int, default=10_000)

    replay = sub.add_parser("replay", parents=[common], help="re-run a manifest")
    replay.add_argument("source", help="manifest.json written by an earlier run")
    return parser


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )
    logging.getLogger("mfract").setLevel(level)


# ---------------------------------------------------------------------------
# Option resolution
# ---------------------------------------------------------------------------


def _configs(command: str, options: Dict[str, Any]) -> Dict[str, BaseModel]:
    runtime = RuntimeConfig(threads=options["threads"], seed=options["seed"])
    configs: Dict[str, BaseModel] = {"runtime": runtime}
    if command == "fd":
        if options["scale"] < 2:
            raise ValueError(f"--scale must be at least 2, got {options['scale']}")
        sizes = options["sizes"]
        configs["boxcount"] = BoxCountConfig(
            sizes=tuple(sizes) if sizes else None, gray_levels=options["gray_levels"]
        )
    elif command == "spectrum":
        configs["spectrum"] = SpectrumConfig(
            box_sizes=tuple(options["boxes"]),
            n_alpha_bins=options["bins"],
            min_scales=options["min_scales"],
        )
        configs["density"] = DensityFitConfig(windows=tuple(options["windows"]))
    elif command == "density":
        configs["density"] = DensityFitConfig(
            windows=tuple(options["windows"]),
            epsilon_floor=options["epsilon_floor"],
            slope_variant=options["variant"],
        )
    elif command == "group":
        configs["mfb"] = MfbConfig(
            anchors=options["anchors"],
            sharpness=options["sharpness"],
            out_channels=options["out_channels"],
            density=DensityFitConfig(windows=tuple(options["windows"])),
            group=GroupProcessorConfig(seed=options["seed"]),
        )
    elif command == "filter":
        parse_attention_spec(options["attention"])
        if options["report_bands"] < 0:
            raise ValueError("--report-bands must be >= 0")
    elif command == "schedule":
        configs["schedule"] = ScheduleConfig(
            T=options["T"],
            beta_start=options["beta_start"],
            beta_end=options["beta_end"],
        )
    return configs


def _resolve_options(args: argparse.Namespace) -> Dict[str, Any]:
    """Fill environment and default values so the options replay exactly."""
    overrides = {"threads": args.threads, "seed": args.seed}
    runtime = RuntimeConfig.from_settings(
        **{k: v for k, v in overrides.items() if v is not None}
    )
    options = {k: v for k, v in vars(args).items() if k not in _NOT_RECORDED}
    options["out"] = args.out or "."
    options["seed"] = runtime.seed
    options["threads"] = runtime.threads
    if "windows" in options:
        windows = parse_int_list(options["windows"])
        options["windows"] = list(windows or DensityFitConfig.from_settings().windows)
    if "anchors" in options and options["anchors"] is None:
        options["anchors"] = MfbConfig.from_settings().anchors
    if "sizes" in options:
        options["sizes"] = list(parse_int_list(options["sizes"])) or None
    if "boxes" in options:
        options["boxes"] = list(parse_int_list(options["boxes"]))
    return options


def _input_paths(options: Dict[str, Any]) -> List[str]:
    paths = list(options.get("inputs") or [])
    if options.get("input"):
        paths.append(options["input"])
    attention = options.get("attention")
    if attention:
        kind, arg = parse_attention_spec(attention)
        if kind == "file" and arg is not None:
            paths.append(arg)
    return paths


def _hash_inputs(paths: List[str]) -> Dict[str, str]:
    return {p: sha256_file(p) for p in paths if Path(p).is_file()}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    _logger.info("wrote %s", path)


def _table(title: str, columns: List[str], rows: List[List[Any]]) -> Table:
    table = Table(
        title=title,
        box=box.SQUARE,
        show_lines=False,
        title_style="bold",
        title_justify="left",
    )
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return table


def _cmd_fd(run: _Run) -> int:
    cfg = run.configs["boxcount"]
    assert isinstance(cfg, BoxCountConfig)
    rows = []
    for path in run.options["inputs"]:
        try:
            hr = to_gray(decode(path))
            hr.as_tensor().require_analysis_size()
            lr = to_gray(resize_bicubic(hr, Fraction(1, run.options["scale"])))
            gap = fd_gap(hr, lr, cfg.sizes, cfg.gray_levels)
        except (OSError, ValueError) as e:
            _logger.error("fd: skipping %s: %s", path, e)
            continue
        rows.append({"path": str(path), **asdict(gap)})
    if not rows:
        _logger.error("fd: no input could be analysed")
        return EXIT_FAILED
    frame = pd.DataFrame(rows, columns=FD_COLUMNS)
    mean = frame[FD_COLUMNS[1:]].mean()
    frame = pd.concat(
        [frame, pd.DataFrame([{"path": "MEAN", **mean.to_dict()}])],
        ignore_index=True,
    )
    _write_csv(frame, run.out / "fd.csv")
    if run.show:
        print(_table("Fractal dimension", FD_COLUMNS, frame.values.tolist()))
    return EXIT_OK


def _cmd_spectrum(run: _Run) -> int:
    cfg = run.configs["spectrum"]
    assert isinstance(cfg, SpectrumConfig)
    gray = to_gray(decode(run.options["input"]))
    if run.options["method"] == "density":
        density_cfg = run.configs["density"]
        assert isinstance(density_cfg, DensityFitConfig)
        curve = density_spectrum(
            gray,
            n_sets=run.options["sets"],
            density_cfg=density_cfg,
            threads=run.threads,
        )
    else:
        curve = image_spectrum(gray, cfg)
    _write_csv(curve.to_frame(), run.out / "spectrum.csv")
    report = SpectrumReport(**curve.summary())
    (run.out / "spectrum.json").write_text(report.model_dump_json(indent=2) + "\n")
    if run.show:
        rows = [[k, v] for k, v in curve.summary().items()]
        print(_table("Multifractal spectrum", ["field", "value"], rows))
    return EXIT_OK


def _cmd_density(run: _Run) -> int:
    cfg = run.configs["density"]
    assert isinstance(cfg, DensityFitConfig)
    method = run.options["method"]
    stack = measure_stack(to_gray(decode(run.options["input"])), cfg)
    exact = density_exact(stack, cfg, run.threads) if method != "closed" else None
    closed = density_closed_form(stack, cfg, run.threads) if method != "exact" else None
    dmap = closed if closed is not None else exact
    assert dmap is not None
    summary: Dict[str, Any] = {"method": method, **dmap.summary()}
    if exact is not None and closed is not None:
        diff = float(np.max(np.abs(exact.d - closed.d)))
        summary["max_abs_diff"] = diff
        if run.show:
            print(f"max |closed - exact| = {diff:.3e}")
    write_pfm(run.out / "density.pfm", dmap.d)
    encode(to_uint8_preview(dmap.d), run.out / "density.pgm")
    _write_csv(pd.DataFrame([summary]), run.out / "density_summary.csv")
    if run.show:
        print(_table("Density map", list(summary), [list(summary.values())]))
    return EXIT_OK


def _cmd_group(run: _Run) -> int:
    cfg = run.configs["mfb"]
    assert isinstance(cfg, MfbConfig)
    _, fitted, membership = assign_stage(
        to_gray(decode(run.options["input"])), cfg, run.threads
    )
    write_pfm_stack(run.out / "membership.pfm", membership.maps)
    anchors = AnchorReport(
        b=fitted.b.tolist(), a=fitted.a.tolist(), degenerate=fitted.degenerate
    )
    (run.out / "anchors.json").write_text(anchors.model_dump_json(indent=2) + "\n")
    _, output = process_stage(membership, cfg)
    if output.shape[2] in (1, 3):
        write_pfm(run.out / "mfb.pfm", output)
    else:
        write_pfm_stack(run.out / "mfb.pfm", np.moveaxis(output, -1, 0))
    if run.show:
        sum_error = float(np.max(np.abs(membership.maps.sum(axis=0) - 1.0)))
        rows = [
            ["anchors", fitted.K],
            ["max |membership sum - 1|", sum_error],
            ["output shape", "x".join(str(n) for n in output.shape)],
        ]
        print(_table("Multi-fractal block", ["field", "value"], rows))
    return EXIT_OK


def _cmd_filter(run: _Run) -> int:
    img = decode(run.options["input"])
    attention = attention_from_spec(run.options["attention"], img.shape)
    result = apply_filter(img, attention, run.threads)
    write_pfm(run.out / "filtered.pfm", result.image)
    encode(np.clip(result.image, 0.0, 1.0), run.out / "filtered.png")
    n_bands = run.options["report_bands"]
    if n_bands:
        before = band_profile(img, n_bands, run.threads)
        after = band_profile(result.image, n_bands, run.threads)
        bands = before.rename(columns={"energy": "energy_in"})
        bands["energy_out"] = after["energy"]
        _write_csv(bands, run.out / "bands.csv")
    if run.show:
        rows = [
            ["attention", attention.kind],
            ["imaginary residue", result.imag_residue],
            ["conjugate symmetric", result.conjugate_symmetric],
        ]
        print(_table("Spectral filter", ["field", "value"], rows))
    return EXIT_OK


def _cmd_schedule(run: _Run) -> int:
    cfg = run.configs["schedule"]
    assert isinstance(cfg, ScheduleConfig)
    sched = schedule_from_config(cfg)
    _write_csv(sched.to_frame(), run.out / "schedule.csv")
    if not run.options["verify"]:
        return EXIT_OK
    verification = verify_schedule(sched, run.options["seed"], run.options["trials"])
    frame = verification.to_frame()
    _write_csv(frame, run.out / "verification.csv")
    if run.show:
        print(_table("Schedule verification", list(frame), frame.values.tolist()))
    if not verification.passed:
        _logger.error("schedule: verification failed")
        return EXIT_FAILED
    return EXIT_OK


_COMMANDS: Dict[str, Callable[[_Run], int]] = {
    "fd": _cmd_fd,
    "spectrum": _cmd_spectrum,
    "density": _cmd_density,
    "group": _cmd_group,
    "filter": _cmd_filter,
    "schedule": _cmd_schedule,
}


def _execute(
    command: str,
    options: Dict[str, Any],
    configs: Dict[str, BaseModel],
    manifest_path: Optional[str],
    show: bool,
) -> int:
    out = Path(options["out"])
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(options, configs, out, show)
    try:
        code = _COMMANDS[command](run)
    except FileNotFoundError as e:
        _logger.error("%s: %s", command, e)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        _logger.error("%s failed: %s", command, e)
        return EXIT_FAILED
    manifest = RunManifest(
        command=command,
        options=options,
        config={name: cfg.model_dump(mode="json") for name, cfg in configs.items()},
        input_hashes=_hash_inputs(_input_paths(options)),
        version=tool_version(),
        seed=options["seed"],
    )
    manifest.write(manifest_path or out / MANIFEST_NAME)
    return code


def _replay(args: argparse.Namespace) -> int:
    try:
        manifest = RunManifest.read(args.source)
    except (OSError, ValueError) as e:
        _logger.error("replay: cannot read manifest: %s", e)
        return EXIT_USAGE
    changed = manifest.changed_inputs()
    if changed:
        _logger.error(
            "replay: inputs changed since the manifest was written: %s", changed
        )
        return EXIT_FAILED
    options = dict(manifest.options)
    if args.out is not None:
        options["out"] = args.out
    configs = _configs(manifest.command, options)
    _logger.info("replaying %s from %s", manifest.command, args.source)
    return _execute(
        manifest.command, options, configs, args.manifest, not args.quiet
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet, args.verbose)
    if args.command == "replay":
        return _replay(args)
    try:
        options = _resolve_options(args)
        configs = _configs(args.command, options)
    except ValueError as e:
        _logger.error("%s: %s", args.command, e)
        return EXIT_USAGE
    return _execute(args.command, options, configs, args.manifest, not args.quiet)


if __name__ == "__main__":
    raise SystemExit(main())
