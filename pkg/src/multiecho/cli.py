"""Command-line pipeline: phantom -> mask -> simulate -> reconstruct -> evaluate/export.

Every command reads an optional JSON config (flags win over config values),
validates it (reporting *all* violations at once), writes its outputs plus a
fully resolved ``config_<command>.json`` next to them, and is idempotent: the
same config and seed reproduce the same bytes.  With ``--sequential`` the
wall-clock field of run records is zeroed so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import InvalidArgumentError, ReconParams
from .defaults import CS_ENGINE, EXPERIMENT, tuned_params
from .io import (
    FormatError,
    RunRecord,
    _json_bytes,
    export_difference,
    export_pgm,
    load_kspace,
    load_mask,
    load_mef,
    save_kspace,
    save_mask,
    save_mef,
    save_run_record,
)
from .metrics import snr_db, snr_db_per_echo
from .methods import METHOD_NAMES, run_method
from .operators import generate_mask
from .phantom import EllipseRegion, PhantomSpec, default_phantom_spec, generate_phantom, simulate_acquisition
from .tuning import TUNABLE_PARAMS, lcurve_greedy

__all__ = ["main", "entry_point"]

_PARAM_KEYS = {
    "mu": "mu", "lambda": "lam", "lam": "lam", "gamma": "gamma",
    "patch_size": "patch_size", "patch_stride": "patch_stride",
    "max_outer_iters": "max_outer_iters", "rel_cost_tol": "rel_cost_tol",
    "cg_tol": "cg_tol", "cg_max_iters": "cg_max_iters",
    "inner_iters": "inner_iters", "seed": "seed",
}


def params_to_dict(p: ReconParams) -> dict:
    return {
        "mu": p.mu, "lambda": p.lam, "gamma": p.gamma,
        "patch_size": p.patch_size, "patch_stride": p.patch_stride,
        "max_outer_iters": p.max_outer_iters, "rel_cost_tol": p.rel_cost_tol,
        "cg_tol": p.cg_tol, "cg_max_iters": p.cg_max_iters,
        "inner_iters": p.inner_iters, "seed": p.seed,
    }


def _params_from_config(base: ReconParams, cfg: dict, problems: list[str]) -> ReconParams:
    overrides = {}
    for key, value in cfg.items():
        field = _PARAM_KEYS.get(key)
        if field is None:
            problems.append(f"params: unknown key {key!r}")
            continue
        overrides[field] = value
    try:
        return replace(base, **overrides)
    except InvalidArgumentError as e:
        problems.append(f"params: {e}")
        return base


def _load_config(path: str | None, problems: list[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        problems.append(f"config file not found: {p}")
        return {}
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        problems.append(f"config is not valid JSON: {e}")
        return {}
    if not isinstance(cfg, dict):
        problems.append("config root must be a JSON object")
        return {}
    return cfg


def _phantom_spec_from_config(cfg: dict, problems: list[str]) -> PhantomSpec:
    ph = cfg.get("phantom", {})
    if not isinstance(ph, dict):
        problems.append("phantom section must be an object")
        return default_phantom_spec()
    height = int(ph.get("height", EXPERIMENT["height"]))
    width = int(ph.get("width", EXPERIMENT["width"]))
    echoes = int(ph.get("echoes", EXPERIMENT["echoes"]))
    delta_te = float(ph.get("delta_te_ms", 6.738))
    try:
        if "regions" in ph:
            regions = tuple(
                EllipseRegion(
                    center=tuple(r["center"]), axes=tuple(r["axes"]),
                    angle_deg=float(r.get("angle_deg", 0.0)),
                    proton_density=float(r["proton_density"]),
                    t2_ms=float(r["t2_ms"]),
                )
                for r in ph["regions"]
            )
            return PhantomSpec(height=height, width=width, echoes=echoes,
                               delta_te_ms=delta_te, regions=regions)
        spec = default_phantom_spec(height=height, width=width, echoes=echoes)
        return replace(spec, delta_te_ms=delta_te)
    except (KeyError, TypeError, InvalidArgumentError) as e:
        problems.append(f"phantom section: {e}")
        return default_phantom_spec()


def _spec_to_dict(spec: PhantomSpec) -> dict:
    return {
        "height": spec.height, "width": spec.width, "echoes": spec.echoes,
        "delta_te_ms": spec.delta_te_ms,
        "regions": [
            {"center": list(r.center), "axes": list(r.axes), "angle_deg": r.angle_deg,
             "proton_density": r.proton_density, "t2_ms": r.t2_ms}
            for r in spec.regions
        ],
    }


def _write_resolved(out_dir: Path, name: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"config_{name}.json").write_bytes(_json_bytes(resolved))


def _fail(problems: list[str]) -> int:
    print(f"error: {'; '.join(problems)}", file=sys.stderr)
    return 2


def _cmd_phantom(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    spec = _phantom_spec_from_config(cfg, problems)
    if problems:
        return _fail(problems)
    out = Path(args.out)
    image = generate_phantom(spec)
    save_mef(out / "truth", image)
    _write_resolved(out, "phantom", {"phantom": _spec_to_dict(spec)})
    print(f"wrote {out / 'truth.json'} ({spec.height}x{spec.width}x{spec.echoes})")
    return 0


def _mask_settings(cfg: dict, args, problems: list[str]) -> dict:
    mk = cfg.get("mask", {})
    if not isinstance(mk, dict):
        problems.append("mask section must be an object")
        mk = {}
    ph = cfg.get("phantom", {}) if isinstance(cfg.get("phantom", {}), dict) else {}
    settings = {
        "height": int(ph.get("height", EXPERIMENT["height"])),
        "width": int(ph.get("width", EXPERIMENT["width"])),
        "echoes": int(ph.get("echoes", EXPERIMENT["echoes"])),
        "lines_per_echo": int(mk.get("lines_per_echo", EXPERIMENT["lines_per_echo"])),
        "dense_fraction": float(mk.get("dense_fraction", EXPERIMENT["dense_fraction"])),
        "per_echo_distinct": bool(mk.get("per_echo_distinct", False)),
        "seed": int(args.seed if args.seed is not None else cfg.get("seed", 0)),
    }
    if not 1 <= settings["lines_per_echo"] <= settings["height"]:
        problems.append(
            f"mask: lines_per_echo must be in [1, {settings['height']}], "
            f"got {settings['lines_per_echo']}"
        )
    if not 0.0 <= settings["dense_fraction"] <= 1.0:
        problems.append(f"mask: dense_fraction must be in [0, 1], got {settings['dense_fraction']}")
    return settings


def _cmd_mask(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    settings = _mask_settings(cfg, args, problems)
    if problems:
        return _fail(problems)
    out = Path(args.out)
    mask = generate_mask(
        settings["height"], settings["width"], settings["lines_per_echo"],
        settings["echoes"], dense_fraction=settings["dense_fraction"],
        per_echo_distinct=settings["per_echo_distinct"], seed=settings["seed"],
    )
    save_mask(out / "mask.json", mask)
    _write_resolved(out, "mask", {"mask": settings})
    print(f"wrote {out / 'mask.json'} ({settings['lines_per_echo']}/{settings['height']} lines)")
    return 0


def _cmd_simulate(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    out = Path(args.out)
    truth_path = Path(args.truth) if args.truth else out / "truth"
    mask_path = Path(args.mask) if args.mask else out / "mask.json"
    if not truth_path.with_suffix(".json").is_file():
        problems.append(f"truth image not found: {truth_path.with_suffix('.json')}")
    if not mask_path.is_file():
        problems.append(f"mask not found: {mask_path}")
    sigma = float(cfg.get("noise_sigma", EXPERIMENT["noise_sigma"]))
    if sigma < 0:
        problems.append(f"noise_sigma must be >= 0, got {sigma}")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    if problems:
        return _fail(problems)
    truth = load_mef(truth_path)
    mask = load_mask(mask_path)
    kspace = simulate_acquisition(truth, mask, noise_sigma=sigma, seed=seed)
    save_kspace(out / "kspace", kspace)
    _write_resolved(out, "simulate", {
        "truth": str(truth_path), "mask": str(mask_path),
        "noise_sigma": sigma, "seed": seed,
    })
    print(f"wrote {out / 'kspace.kbin'} (sigma={sigma}, seed={seed})")
    return 0


def _cmd_reconstruct(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    method = args.method or cfg.get("method")
    if method not in METHOD_NAMES:
        problems.append(
            f"method must be one of {', '.join(METHOD_NAMES)}, got {method!r}"
        )
    out = Path(args.out)
    kspace_path = Path(args.kspace) if args.kspace else out / "kspace"
    if not kspace_path.with_suffix(".json").is_file():
        problems.append(f"k-space not found: {kspace_path.with_suffix('.json')}")
    truth_path = Path(args.truth) if args.truth else out / "truth"
    have_truth = truth_path.with_suffix(".json").is_file()
    if args.truth and not have_truth:
        problems.append(f"truth image not found: {truth_path.with_suffix('.json')}")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    params_cfg = cfg.get("params", {})
    if not isinstance(params_cfg, dict):
        problems.append("params section must be an object")
        params_cfg = {}
    if method in METHOD_NAMES:
        params = _params_from_config(
            replace(tuned_params(method), seed=seed), params_cfg, problems
        )
    cs_cfg = cfg.get("cs", {})
    engine_kwargs = {}
    if method == "cs_analysis" and isinstance(cs_cfg, dict):
        engine_kwargs = {
            "levels": int(cs_cfg.get("levels", CS_ENGINE["levels"])),
            "max_iters": int(cs_cfg.get("max_iters", CS_ENGINE["max_iters"])),
        }
    if problems:
        return _fail(problems)

    y = load_kspace(kspace_path)
    t0 = time.perf_counter()
    result = run_method(method, y, params, **engine_kwargs)
    wall = time.perf_counter() - t0

    save_mef(out / f"recon_{method}", result.image)
    record = RunRecord(
        method=method,
        seed=seed,
        config={"params": params_to_dict(params), **({"cs": engine_kwargs} if engine_kwargs else {})},
        cost_history=result.cost_history,
        wall_seconds=0.0 if args.sequential else wall,
    )
    if have_truth:
        truth = load_mef(truth_path)
        record.snr_db = snr_db(truth, result.image)
        record.snr_db_per_echo = snr_db_per_echo(truth, result.image)
    save_run_record(out / f"record_{method}.json", record)
    _write_resolved(out, f"reconstruct_{method}", {
        "method": method, "seed": seed, "sequential": bool(args.sequential),
        "kspace": str(kspace_path), "params": params_to_dict(params),
        **({"cs": engine_kwargs} if engine_kwargs else {}),
    })
    msg = f"wrote {out / f'recon_{method}.json'}"
    if record.snr_db is not None:
        msg += f" (SNR {record.snr_db:.2f} dB)"
    print(msg)
    return 0


def _cmd_evaluate(args) -> int:
    problems: list[str] = []
    dirs = [Path(args.out)] + [Path(d) for d in (args.runs or [])]
    for d in dirs:
        if not d.is_dir():
            problems.append(f"run directory not found: {d}")
    if problems:
        return _fail(problems)
    table: dict[str, dict[str, float | None]] = {}
    for d in dirs:
        truth_path = Path(args.truth) if args.truth else d / "truth"
        if not truth_path.with_suffix(".json").is_file():
            problems.append(f"truth image not found in {d}")
            continue
        truth = load_mef(truth_path)
        for method in METHOD_NAMES:
            recon_path = d / f"recon_{method}.json"
            if not recon_path.is_file():
                continue
            value = snr_db(truth, load_mef(recon_path))
            table.setdefault(method, {})[d.name] = value
    if problems:
        return _fail(problems)
    if not table:
        return _fail(["no recon_<method> images found"])

    columns = [d.name for d in dirs]
    name_w = max(len("method"), max(len(m) for m in table))
    header = "method".ljust(name_w) + " | " + " | ".join(c.rjust(max(8, len(c))) for c in columns)
    rule = "-" * len(header)
    lines = [header, rule]
    for method in METHOD_NAMES:
        if method not in table:
            continue
        cells = []
        for c in columns:
            v = table[method].get(c)
            cells.append(("-" if v is None else f"{v:.2f}").rjust(max(8, len(c))))
        lines.append(method.ljust(name_w) + " | " + " | ".join(cells))
    print("\n".join(lines))
    payload = {
        "columns": columns,
        "snr_db": {m: {c: table[m].get(c) for c in columns} for m in table},
    }
    (Path(args.out) / "evaluation.json").write_bytes(_json_bytes(payload))
    return 0


def _cmd_export(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    method = args.method or cfg.get("method")
    out = Path(args.out)
    recon_path = out / f"recon_{method}"
    if method not in METHOD_NAMES:
        problems.append(f"method must be one of {', '.join(METHOD_NAMES)}, got {method!r}")
    elif not recon_path.with_suffix(".json").is_file():
        problems.append(f"reconstruction not found: {recon_path.with_suffix('.json')}")
    if problems:
        return _fail(problems)
    recon = load_mef(recon_path)
    truth_path = Path(args.truth) if args.truth else out / "truth"
    truth = load_mef(truth_path) if truth_path.with_suffix(".json").is_file() else None

    if args.echoes:
        echoes = [int(e) for e in args.echoes.split(",")]
        bad = [e for e in echoes if not 1 <= e <= recon.echoes]
        if bad:
            return _fail([f"echo indices out of range 1..{recon.echoes}: {bad}"])
    else:
        echoes = [e for e in (1, 5, 9, 13) if e <= recon.echoes] or list(
            range(1, recon.echoes + 1)
        )
    norm = float(truth.data.max()) if truth is not None else None
    written = []
    for e in echoes:
        plane = recon.data[:, :, e - 1]
        p = export_pgm(out / f"recon_{method}_echo{e}.pgm", plane, normalization=norm)
        written.append(p.name)
        if truth is not None:
            p = export_difference(
                out / f"diff_{method}_echo{e}.pgm", truth.data[:, :, e - 1], plane
            )
            written.append(p.name)
    print(f"wrote {', '.join(written)}")
    return 0


def _cmd_sweep(args) -> int:
    problems: list[str] = []
    cfg = _load_config(args.config, problems)
    method = args.method or cfg.get("method")
    if method not in TUNABLE_PARAMS:
        problems.append(
            f"sweep supports {', '.join(sorted(TUNABLE_PARAMS))}, got {method!r}"
        )
    out = Path(args.out)
    kspace_path = Path(args.kspace) if args.kspace else out / "kspace"
    if not kspace_path.with_suffix(".json").is_file():
        problems.append(f"k-space not found: {kspace_path.with_suffix('.json')}")
    sweep_cfg = cfg.get("sweep", {})
    if not isinstance(sweep_cfg, dict):
        problems.append("sweep section must be an object")
        sweep_cfg = {}
    if problems:
        return _fail(problems)

    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    base = _params_from_config(replace(tuned_params(method), seed=seed),
                               cfg.get("params", {}), problems)
    default_grids = {
        "mu": [0.05, 0.15, 0.5, 1.5, 5.0],
        "lam": [0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
        "gamma": [0.03, 0.3, 3.0],
    }
    grids_cfg = sweep_cfg.get("grids", {})
    grids = {}
    for name in TUNABLE_PARAMS[method]:
        key = "lambda" if name == "lam" else name
        grids[name] = [float(v) for v in grids_cfg.get(key, default_grids[name])]
    if problems:
        return _fail(problems)

    y = load_kspace(kspace_path)
    params, trace = lcurve_greedy(y, method, grids, base)
    (out / f"params_{method}.json").write_bytes(_json_bytes(params_to_dict(params)))
    payload = [
        {"param": ("lambda" if p.param == "lam" else p.param), "value": p.value,
         "residual_norm": p.residual_norm, "penalty": p.penalty}
        for p in trace
    ]
    (out / f"sweep_{method}.json").write_bytes(_json_bytes(payload))
    _write_resolved(out, f"sweep_{method}", {
        "method": method, "seed": seed,
        "grids": {("lambda" if k == "lam" else k): v for k, v in grids.items()},
    })
    chosen = {k: v for k, v in params_to_dict(params).items() if k in ("mu", "lambda", "gamma")}
    print(f"wrote {out / f'params_{method}.json'} (chosen: {chosen})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiecho",
        description="Multi-echo MRI reconstruction from undersampled k-space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method_flag=False):
        p.add_argument("--out", required=True, help="run directory for inputs/outputs")
        p.add_argument("--config", help="JSON config file (flags win over config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--sequential", action="store_true",
                       help="deterministic mode: byte-identical reruns")
        if method_flag:
            p.add_argument("--method", help=f"one of: {', '.join(METHOD_NAMES)}")

    p = sub.add_parser("phantom", help="write the synthetic ground-truth image")
    common(p)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("mask", help="write a line-sampling mask")
    common(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("simulate", help="sample k-space from the ground truth")
    common(p)
    p.add_argument("--truth", help="path to the ground-truth image (default: OUT/truth)")
    p.add_argument("--mask", help="path to the mask JSON (default: OUT/mask.json)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="run one reconstruction method")
    common(p, method_flag=True)
    p.add_argument("--kspace", help="path base of the k-space files (default: OUT/kspace)")
    p.add_argument("--truth", help="ground-truth image for SNR reporting")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="print/write an SNR table of finished runs")
    common(p)
    p.add_argument("--truth", help="ground-truth image (default: per-directory truth)")
    p.add_argument("--runs", nargs="*", help="additional run directories (table columns)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("export", help="write PGM images of selected echoes")
    common(p, method_flag=True)
    p.add_argument("--truth", help="ground-truth image for difference images")
    p.add_argument("--echoes", help="comma-separated 1-based echo list (default: 1,5,9,13)")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("sweep", help="greedy L-curve parameter selection")
    common(p, method_flag=True)
    p.add_argument("--kspace", help="path base of the k-space files (default: OUT/kspace)")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())
