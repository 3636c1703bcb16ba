"""Config-driven experiment runner.

Every experiment is a subcommand taking a TOML config (with ``--set``
dotted-key overrides) and writing JSON + CSV reports plus a run manifest
into the output directory.  Runs are deterministic for a fixed config and
seed; wall-clock fields are zeroed unless ``--wall-clock`` is given so that
repeated runs produce byte-identical report files.

Exit codes: 0 success, 2 config error, 3 precondition violation,
4 numerical assertion failure, 5 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import tomli

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

OUT_DIR_ENV = "FNODISC_OUT"

COMMANDS = (
    "sample-grf",
    "converge",
    "decompose",
    "state-norms",
    "train",
    "train-scheduled",
    "interp-check",
    "grad-check",
)


class ConfigError(ValueError):
    """Invalid, missing, or unknown configuration."""


class NumericalCheckError(AssertionError):
    """A numerical consistency assertion failed during the run."""


# --------------------------------------------------------------------------
# config schemas: section -> key -> (types, default); REQUIRED means no default

REQUIRED = object()

_RUN = {"seed": (int, 0), "out_dir": (str, None)}
_FNO = {
    "d": (int, 2),
    "in_channels": (int, 1),
    "out_channels": (int, 1),
    "width": (int, REQUIRED),
    "n_layers": (int, REQUIRED),
    "modes": (int, REQUIRED),
    "activation": (str, "gelu"),
    "encoding": (str, "periodic"),
    "proj_activation": (bool, False),
}
_INIT = {"scheme": (str, "default"), "scale": (float, 10.0)}
_GRF = {
    "s": (float, REQUIRED),
    "d": (int, 2),
    "n_ref": (int, REQUIRED),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
    "count": (int, 1),
}
_EXPERIMENT = {
    "s_list": (list, REQUIRED),
    "n_list": (list, REQUIRED),
    "n_ref": (int, REQUIRED),
    "n_samples": (int, 5),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
}
_DECOMPOSE = {
    "s": (float, REQUIRED),
    "n_list": (list, REQUIRED),
    "n_ref": (int, REQUIRED),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
}
_STATE_NORMS = {
    "n_grid": (int, REQUIRED),
    "n_seeds": (int, 5),
    "schemes": (list, ["default", "scaled", "all_ones"]),
    "s": (float, 2.0),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
}
_DATASET = {
    "kind": (str, REQUIRED),
    "n_train": (int, REQUIRED),
    "n_val": (int, REQUIRED),
    "n_test": (int, REQUIRED),
    "s": (float, 2.0),
    "n_ref": (int, REQUIRED),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
}
_TRAIN = {
    "epochs": (int, REQUIRED),
    "batch_size": (int, REQUIRED),
    "lr": (float, 1e-3),
    "beta1": (float, 0.9),
    "beta2": (float, 0.999),
    "eps": (float, 1e-8),
    "loss": (str, "relative_l2"),
    "eval_grid": (int, 64),
}
_SCHEDULER = {
    "ladder": (list, REQUIRED),
    "patience": (int, 40),
    "min_improvement": (float, 0.0),
}
_INTERP = {
    "s_list": (list, REQUIRED),
    "n_list": (list, REQUIRED),
    "n_ref": (int, REQUIRED),
    "n_seeds": (int, 5),
    "tau": (float, 3.0),
    "amp": (float, 1.0),
}
_GRADCHECK = {
    "n_grid": (int, 32),
    "batch": (int, 2),
    "n_coords": (int, 200),
    "h": (float, 1e-5),
    "tol": (float, 1e-5),
    "kinds": (list, ["gradient_map", "inverse_helmholtz"]),
    "losses": (list, ["relative_l2", "mse"]),
    "s": (float, 2.0),
    "n_ref": (int, 128),
}

SCHEMAS = {
    "sample-grf": {"run": _RUN, "grf": _GRF},
    "converge": {"run": _RUN, "fno": _FNO, "init": _INIT, "experiment": _EXPERIMENT},
    "decompose": {"run": _RUN, "fno": _FNO, "init": _INIT, "decompose": _DECOMPOSE},
    "state-norms": {"run": _RUN, "fno": _FNO, "init": _INIT, "state_norms": _STATE_NORMS},
    "train": {"run": _RUN, "fno": _FNO, "init": _INIT, "dataset": _DATASET, "train": _TRAIN},
    "train-scheduled": {
        "run": _RUN,
        "fno": _FNO,
        "init": _INIT,
        "dataset": _DATASET,
        "train": _TRAIN,
        "scheduler": _SCHEDULER,
    },
    "interp-check": {"run": _RUN, "interp": _INTERP},
    "grad-check": {"run": _RUN, "fno": _FNO, "init": _INIT, "gradcheck": _GRADCHECK},
}


def _check_type(value, types, where: str):
    if types is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if types is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {types.__name__}, got {value!r}")
    return value


def validate_config(command: str, raw: dict) -> dict:
    """Apply defaults, check types, and reject unknown sections or keys."""
    schema = SCHEMAS[command]
    unknown_sections = set(raw) - set(schema)
    if unknown_sections:
        raise ConfigError(f"unknown config sections {sorted(unknown_sections)} for {command}")
    out = {}
    for section, keys in schema.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section [{section}] must be a table")
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)} in section [{section}]")
        vals = {}
        for key, (types, default) in keys.items():
            if key in given:
                vals[key] = _check_type(given[key], types, f"[{section}].{key}")
            elif default is REQUIRED:
                raise ConfigError(f"missing required key [{section}].{key}")
            else:
                vals[key] = default
        out[section] = vals
    if "fno" in out and out["fno"]["activation"] == "identity":
        raise ConfigError("the identity activation is a test hook, not a run option")
    return out


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply --set section.key=value pairs; values parse as TOML literals."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"--set key must be section.key, got {key!r}")
        try:
            value = tomli.loads(f"v = {text}")["v"]
        except tomli.TOMLDecodeError:
            value = text
        raw.setdefault(parts[0], {})[parts[1]] = value
    return raw


# --------------------------------------------------------------------------
# emission helpers


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def emit_report(
    out_dir: Path,
    base: str,
    report: dict,
    header: tuple[str, ...] | None = None,
    rows=None,
) -> list[Path]:
    """Write ``{base}.json`` (and ``{base}.csv`` when rows are given)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{base}.json"]
    write_json(paths[0], report)
    if header is not None:
        paths.append(out_dir / f"{base}.csv")
        write_csv(paths[-1], header, rows)
    return paths


def write_manifest(out_dir: Path, command: str, config: dict, wall_s: float, deterministic: bool) -> None:
    import numpy
    import scipy

    from . import __version__

    write_json(
        out_dir / "manifest.json",
        {
            "command": command,
            "config": config,
            "seed": config.get("run", {}).get("seed", 0),
            "deterministic": deterministic,
            "wall_s": 0.0 if deterministic else wall_s,
            "versions": {
                "fnodisc": __version__,
                "numpy": numpy.__version__,
                "scipy": scipy.__version__,
                "python": sys.version.split()[0],
            },
        },
    )


# --------------------------------------------------------------------------
# subcommands


def _fno_config(cfg: dict):
    from .fno import FnoConfig

    return FnoConfig(**cfg["fno"])


def _init_params(cfg: dict, fno_cfg, seed: int):
    from .fno import init_params

    return init_params(
        fno_cfg, cfg["init"]["scheme"], seed=seed, scale=cfg["init"]["scale"]
    )


def cmd_sample_grf(cfg: dict, out_dir: Path) -> None:
    from .grf import GrfSpec, empirical_spectral_slope, sample_grf
    from .seeding import derive_seed
    from .storage import save_fields

    g = cfg["grf"]
    seed = cfg["run"]["seed"]
    fields, rows = {}, []
    for i in range(g["count"]):
        spec = GrfSpec(
            s=g["s"], d=g["d"], n_ref=g["n_ref"], tau=g["tau"], amp=g["amp"],
            seed=derive_seed(seed, 21, i),
        )
        f = sample_grf(spec)
        fields[f"sample_{i}"] = f
        rows.append((i, empirical_spectral_slope(f)))
    save_fields(out_dir, "fields", fields, meta={"grf": g, "seed": seed})
    expected = -2.0 * (g["s"] + g["d"] / 2.0)
    emit_report(
        out_dir,
        "spectral_slopes",
        {
            "schema_version": 1,
            "kind": "spectral_slopes",
            "grf": g,
            "seed": seed,
            "slopes": [r[1] for r in rows],
            "expected_slope": expected,
        },
        ("sample", "slope"),
        rows,
    )


def cmd_converge(cfg: dict, out_dir: Path) -> None:
    from .analysis import convergence_experiment

    e = cfg["experiment"]
    fno_cfg = _fno_config(cfg)
    report = convergence_experiment(
        fno_cfg,
        cfg["init"]["scheme"],
        e["s_list"],
        e["n_list"],
        e["n_ref"],
        e["n_samples"],
        cfg["run"]["seed"],
        tau=e["tau"],
        amp=e["amp"],
        scale=cfg["init"]["scale"],
    )
    emit_report(
        out_dir,
        "error_report",
        report.to_dict(),
        ("s", "seed", "N", "layer", "rel_err"),
        report.csv_rows(),
    )


def cmd_decompose(cfg: dict, out_dir: Path) -> None:
    from .analysis import decompose_trace
    from .fno import forward
    from .grf import GrfSpec, sample_grf, subsample
    from .seeding import derive_seed

    dc = cfg["decompose"]
    seed = cfg["run"]["seed"]
    fno_cfg = _fno_config(cfg)
    params = _init_params(cfg, fno_cfg, derive_seed(seed, 0))
    spec = GrfSpec(
        s=dc["s"], d=fno_cfg.d, n_ref=dc["n_ref"], tau=dc["tau"], amp=dc["amp"],
        seed=derive_seed(seed, 1),
    )
    master = sample_grf(spec)
    _, ref_trace = forward(params, master, capture_trace=True)
    reports, rows = [], []
    for n in dc["n_list"]:
        _, coarse = forward(params, subsample(master, int(n)), capture_trace=True)
        rep = decompose_trace(params, coarse, ref_trace, dc["s"], seed)
        try:
            rep.check()
        except AssertionError as exc:
            raise NumericalCheckError(str(exc)) from exc
        reports.append(rep.to_dict())
        rows.extend(rep.csv_rows())
    emit_report(
        out_dir,
        "decomp_report",
        {"schema_version": 1, "kind": "decomp_reports", "reports": reports},
        ("s", "seed", "N", "layer", "e0", "e1", "e2", "e3", "e0_next"),
        rows,
    )


def cmd_state_norms(cfg: dict, out_dir: Path) -> None:
    from .analysis import state_norm_profile
    from .fno import forward, init_params
    from .grf import GrfSpec, sample_grf
    from .seeding import derive_seed

    sn = cfg["state_norms"]
    seed = cfg["run"]["seed"]
    fno_cfg = _fno_config(cfg)
    per_scheme, rows = {}, []
    for scheme in sn["schemes"]:
        profiles = []
        for j in range(sn["n_seeds"]):
            params = init_params(
                fno_cfg, scheme, seed=derive_seed(seed, 31, j), scale=cfg["init"]["scale"]
            )
            spec = GrfSpec(
                s=sn["s"], d=fno_cfg.d, n_ref=sn["n_grid"], tau=sn["tau"], amp=sn["amp"],
                seed=derive_seed(seed, 32, j),
            )
            _, trace = forward(params, sample_grf(spec), capture_trace=True)
            prof = state_norm_profile(trace)
            profiles.append(prof.tolist())
            rows.extend((scheme, j, t, v) for t, v in enumerate(prof))
        per_scheme[scheme] = {
            "profiles": profiles,
            "growth_ratio": [p[-1] / p[1] for p in profiles],
        }
    emit_report(
        out_dir,
        "state_norms",
        {
            "schema_version": 1,
            "kind": "state_norms",
            "config": fno_cfg.to_dict(),
            "n_grid": sn["n_grid"],
            "s": sn["s"],
            "seed": seed,
            "schemes": per_scheme,
        },
        ("scheme", "seed", "layer", "l2_norm"),
        rows,
    )


def _run_training(cfg: dict, out_dir: Path, scheduled: bool) -> None:
    from .seeding import derive_seed
    from .storage import save_checkpoint
    from .train import (
        SchedulerConfig,
        TrainConfig,
        make_dataset,
        train_loop,
    )

    ds_cfg = cfg["dataset"]
    seed = cfg["run"]["seed"]
    fno_cfg = _fno_config(cfg)
    params = _init_params(cfg, fno_cfg, derive_seed(seed, 0))
    n_total = ds_cfg["n_train"] + ds_cfg["n_val"] + ds_cfg["n_test"]
    dataset = make_dataset(
        ds_cfg["kind"],
        n_total,
        ds_cfg["s"],
        ds_cfg["n_ref"],
        derive_seed(seed, 41),
        split=(ds_cfg["n_train"], ds_cfg["n_val"], ds_cfg["n_test"]),
        tau=ds_cfg["tau"],
        amp=ds_cfg["amp"],
    )
    train_cfg = TrainConfig(seed=derive_seed(seed, 42), wall_clock=cfg["_wall_clock"], **cfg["train"])
    sched = SchedulerConfig(
        ladder=tuple(int(x) for x in cfg["scheduler"]["ladder"]),
        patience=cfg["scheduler"]["patience"],
        min_improvement=cfg["scheduler"]["min_improvement"],
    ) if scheduled else None
    params, history = train_loop(params, dataset, train_cfg, sched)
    emit_report(
        out_dir,
        "history",
        history.to_dict(),
        history.COLUMNS,
        history.csv_rows(),
    )
    save_checkpoint(out_dir, params, extra={"seed": seed, "scheduled": scheduled})


def cmd_train(cfg: dict, out_dir: Path) -> None:
    _run_training(cfg, out_dir, scheduled=False)


def cmd_train_scheduled(cfg: dict, out_dir: Path) -> None:
    _run_training(cfg, out_dir, scheduled=True)


def cmd_interp_check(cfg: dict, out_dir: Path) -> None:
    import numpy as np

    from .analysis import fit_loglog_slope
    from .grf import GrfSpec, sample_grf, subsample
    from .seeding import derive_seed
    from .spectral import GridField, norm, trig_interpolate

    it = cfg["interp"]
    seed = cfg["run"]["seed"]
    n_list = [int(n) for n in it["n_list"]]
    rows = []
    slopes = {}
    for s in it["s_list"]:
        errs = np.empty((it["n_seeds"], len(n_list)))
        for j in range(it["n_seeds"]):
            spec = GrfSpec(
                s=float(s), d=2, n_ref=it["n_ref"], tau=it["tau"], amp=it["amp"],
                seed=derive_seed(seed, 51, int(s * 1000), j),
            )
            master = sample_grf(spec)
            for i_n, n in enumerate(n_list):
                lifted = trig_interpolate(subsample(master, n), it["n_ref"])
                err = norm(GridField(lifted.values - master.values), "l2")
                errs[j, i_n] = err
                rows.append((s, j, n, err))
        slope, intercept, resid = fit_loglog_slope(n_list, errs.mean(axis=0))
        slopes[str(s)] = {"slope": slope, "intercept": intercept, "residual": resid}
    emit_report(
        out_dir,
        "interp_report",
        {
            "schema_version": 1,
            "kind": "interp_report",
            "n_list": n_list,
            "n_ref": it["n_ref"],
            "n_seeds": it["n_seeds"],
            "seed": seed,
            "slopes": slopes,
        },
        ("s", "seed", "N", "l2_err"),
        rows,
    )


def cmd_grad_check(cfg: dict, out_dir: Path) -> None:
    from dataclasses import replace as dc_replace

    from .seeding import derive_seed
    from .train import gradient_check, make_dataset, restrict_batch

    gc = cfg["gradcheck"]
    seed = cfg["run"]["seed"]
    fno_cfg = _fno_config(cfg)
    results, rows = [], []
    worst = 0.0
    for kind in gc["kinds"]:
        out_ch = 2 if kind == "gradient_map" else 1
        kind_cfg = dc_replace(fno_cfg, out_channels=out_ch)
        params = _init_params(cfg, kind_cfg, derive_seed(seed, 0))
        ds = make_dataset(
            kind, gc["batch"], gc["s"], gc["n_ref"], derive_seed(seed, 61),
            split=(gc["batch"], 0, 0),
        )
        xs = restrict_batch(ds.inputs, gc["n_grid"])
        ys = restrict_batch(ds.targets, gc["n_grid"])
        for loss in gc["losses"]:
            rep = gradient_check(
                params, xs, ys, loss, n_coords=gc["n_coords"], h=gc["h"],
                seed=derive_seed(seed, 62),
            )
            worst = max(worst, rep["max_rel_err"])
            results.append({"dataset": kind, "loss": loss, **rep})
            rows.append((kind, loss, rep["max_rel_err"], rep["loss"]))
    emit_report(
        out_dir,
        "grad_check",
        {
            "schema_version": 1,
            "kind": "grad_check",
            "tol": gc["tol"],
            "max_rel_err": worst,
            "results": results,
        },
        ("dataset", "loss", "max_rel_err", "loss_value"),
        rows,
    )
    print(f"grad-check max relative error: {worst:.3e} (tol {gc['tol']:.0e})")
    if worst >= gc["tol"]:
        raise NumericalCheckError(
            f"adjoint/finite-difference mismatch {worst:.3e} >= {gc['tol']:.0e}"
        )


HANDLERS = {
    "sample-grf": cmd_sample_grf,
    "converge": cmd_converge,
    "decompose": cmd_decompose,
    "state-norms": cmd_state_norms,
    "train": cmd_train,
    "train-scheduled": cmd_train_scheduled,
    "interp-check": cmd_interp_check,
    "grad-check": cmd_grad_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fnodisc", description="Spectral operator-network experiments"
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=str, default=None, help="TOML config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (TOML literal)",
    )
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument(
        "--threads", type=int, default=1, help="BLAS thread cap (1 = deterministic mode)"
    )
    parser.add_argument(
        "--wall-clock",
        action="store_true",
        help="record real wall times (reports are then not byte-reproducible)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(max(args.threads, 1))
    except ImportError:
        pass
    deterministic = args.threads <= 1 and not args.wall_clock

    try:
        raw = {}
        if args.config is not None:
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            try:
                raw = tomli.loads(path.read_text())
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"config parse error: {exc}") from exc
        raw = apply_overrides(raw, args.set)
        cfg = validate_config(args.command, raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(
        args.out
        or cfg["run"].get("out_dir")
        or os.environ.get(OUT_DIR_ENV, "runs")
    ) / args.command.replace("-", "_")
    cfg["_wall_clock"] = bool(args.wall_clock)

    from .fno import ModeOverflowError
    from .spectral import GridNestingError, RealnessError

    tic = time.perf_counter()
    try:
        HANDLERS[args.command](cfg, out_dir)
    except (RealnessError, NumericalCheckError) as exc:
        print(f"numerical assertion failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GridNestingError, ModeOverflowError, ValueError) as exc:
        print(f"precondition violation: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    config_echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    try:
        write_manifest(out_dir, args.command, config_echo, time.perf_counter() - tic, deterministic)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
