"""Command-line client for the spadesim service.

The CLI builds an experiment config from an optional YAML/JSON file plus
flag overrides (flags win), sends it to the HTTP service and writes the
returned tables, manifest and config snapshot to the output directory.
Without ``--server`` the requests run against an in-process instance of
the service, so no daemon is needed for local work.

Exit codes: 0 success, 1 validation error, 2 numerical self-check failure.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import math
import sys
from pathlib import Path
from typing import Optional

import httpx

from .config import deep_merge, load_config_file

_TIMEOUT = 3600.0

# Square-wave amplitude of the reference experiment and its fundamental
# Fourier amplitude; sweep commands default to the smooth equivalent
# motion because an exactly sampled square wave parks frames on its
# discontinuities (see README).
_A_REF = 0.47
_A_FUND = 4 * _A_REF / math.pi

_COMMAND_DEFAULTS = {
    "fisher-scan": {
        "sweep": {"axis": "s",
                  "values": [round(0.047 * k, 5) for k in range(21)]},
    },
    "ideal-sweep": {
        "motion": {"kind": "sinusoid", "amplitude": _A_FUND, "f": 0.2,
                   "offset": _A_FUND},
        "schemes": [{"kind": "pm"}, {"kind": "di"}],
        "sweep": {"axis": "frequency",
                  "values": [round(0.05 * k, 2) for k in range(1, 10)]},
    },
    "noise-sweep": {
        "motion": {"kind": "sinusoid", "amplitude": _A_FUND, "f": 0.2,
                   "offset": _A_FUND},
        "schemes": [{"kind": "di"}, {"kind": "hg"}, {"kind": "pm"}],
        "sweep": {"axis": "b_over_nu", "values": [0.0, 0.01, 0.02, 0.05, 0.1]},
    },
    "jitter-study": {
        "motion": {"kind": "square_wave", "amplitude": _A_REF},
        "schemes": [{"kind": "di"}],
        "schedule": {"jitter": {"mean_ms": 2.8, "sd_ms": 0.48}},
        "sweep": {"axis": "frequency",
                  "values": [round(0.06 + 0.04 * k, 2) for k in range(10)]},
    },
    "holo": {},
    "validate-config": {},
}

_ENDPOINTS = {
    "fisher-scan": "/v1/fisher-scan",
    "ideal-sweep": "/v1/ideal-sweep",
    "noise-sweep": "/v1/noise-sweep",
    "jitter-study": "/v1/jitter-study",
    "holo": "/v1/holo",
    "validate-config": "/v1/validate-config",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spadesim",
        description="Oscillation-frequency estimation experiments: Fisher "
                    "bounds, Monte Carlo sweeps and hologram synthesis.")
    parser.add_argument("--server", default=None,
                        help="service URL; default runs the service in-process")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMAND_DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="YAML/JSON config file")
        if name != "validate-config":
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--frames", type=int, dest="n_frames")
        p.add_argument("--sampling-rate", type=float, dest="f_s")
        p.add_argument("--sigma-um", type=float)
        p.add_argument("--motion-kind",
                       choices=["sinusoid", "square_wave", "constant"])
        p.add_argument("--amplitude", type=float)
        p.add_argument("--frequency", type=float)
        p.add_argument("--phase", type=float)
        p.add_argument("--offset", type=float)
        p.add_argument("--b-over-nu", type=float)
        p.add_argument("--axis", choices=["s", "b_over_nu", "frequency"])
        p.add_argument("--values", help="comma-separated sweep values")
        p.add_argument("--schemes", help="comma-separated subset of di,hg,pm")
        p.add_argument("--pixel-size-um", type=float)
        p.add_argument("--n-modes", type=int)
        p.add_argument("--nu", type=float,
                       help="signal photons per frame for every listed scheme")
        p.add_argument("--jitter-mean-ms", type=float)
        p.add_argument("--jitter-sd-ms", type=float)
        p.add_argument("--no-jitter", action="store_true")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    """Nested config fragment holding exactly the flags the user set."""
    out: dict = {}

    def put(path, value):
        if value is None:
            return
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    put(("seed",), args.seed)
    put(("trials",), args.trials)
    put(("schedule", "n_frames"), args.n_frames)
    put(("schedule", "f_s"), args.f_s)
    put(("psf", "sigma_um"), args.sigma_um)
    put(("motion", "kind"), args.motion_kind)
    put(("motion", "amplitude"), args.amplitude)
    put(("motion", "f"), args.frequency)
    put(("motion", "phase"), args.phase)
    put(("motion", "offset"), args.offset)
    put(("noise", "b_over_nu"), args.b_over_nu)
    put(("sweep", "axis"), args.axis)
    if args.values:
        put(("sweep", "values"), [float(v) for v in args.values.split(",")])
    if args.schemes:
        schemes = []
        for kind in args.schemes.split(","):
            spec: dict = {"kind": kind.strip()}
            if args.pixel_size_um is not None and kind.strip() == "di":
                spec["pixel_size_um"] = args.pixel_size_um
            if args.n_modes is not None and kind.strip() == "hg":
                spec["n_modes"] = args.n_modes
            if args.nu is not None:
                spec["nu"] = args.nu
            schemes.append(spec)
        out["schemes"] = schemes
    if args.no_jitter:
        out.setdefault("schedule", {})["jitter"] = None
    elif args.jitter_mean_ms is not None or args.jitter_sd_ms is not None:
        jitter = {}
        if args.jitter_mean_ms is not None:
            jitter["mean_ms"] = args.jitter_mean_ms
        if args.jitter_sd_ms is not None:
            jitter["sd_ms"] = args.jitter_sd_ms
        put(("schedule", "jitter"), jitter)
    return out


def assemble_config(command: str, args: argparse.Namespace) -> dict:
    config = dict(_COMMAND_DEFAULTS[command])
    if args.config:
        config = deep_merge(config, load_config_file(args.config))
    return deep_merge(config, overrides_from_args(args))


def _post(server: Optional[str], path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=_TIMEOUT) as client:
            return client.post(path, json=payload)

    async def _inproc():
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://spadesim.local",
                                     timeout=_TIMEOUT) as client:
            return await client.post(path, json=payload)

    return asyncio.run(_inproc())


def _write_common(out_dir: Path, body: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for table in body.get("tables", []):
        (out_dir / f"{table['name']}.csv").write_text(table["csv"])
    (out_dir / "manifest.json").write_text(
        json.dumps(body["manifest"], indent=2, sort_keys=True) + "\n")
    (out_dir / "config.json").write_text(
        json.dumps(body["config"], indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        payload = assemble_config(command, args)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    try:
        response = _post(args.server, _ENDPOINTS[command], payload)
    except httpx.HTTPError as err:
        print(f"error: request failed: {err}", file=sys.stderr)
        return 1

    if response.status_code == 422:
        print("error: config validation failed", file=sys.stderr)
        for item in response.json().get("detail", []):
            loc = ".".join(str(p) for p in item.get("loc", []))
            print(f"  {loc}: {item.get('msg')}", file=sys.stderr)
        return 1
    if response.status_code != 200:
        print(f"error: service returned {response.status_code}: "
              f"{response.text[:500]}", file=sys.stderr)
        return 1

    body = response.json()

    if command == "validate-config":
        if body["valid"]:
            print("config ok")
            return 0
        for issue in body["issues"]:
            print(f"{issue['location']}: {issue['message']}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    _write_common(out_dir, body)

    if command == "holo":
        (out_dir / "hologram.png").write_bytes(
            base64.b64decode(body["hologram_png_base64"]))
        (out_dir / "hologram.json").write_text(
            json.dumps(body["sidecar"], indent=2, sort_keys=True) + "\n")
        status = "passed" if body["self_check_passed"] else "FAILED"
        print(f"hologram self-check {status}: max fraction error "
              f"{body['max_fraction_error']:.4f}, leakage {body['max_leakage']:.4f}")
        if not body["self_check_passed"]:
            return 2

    names = ", ".join(t["name"] for t in body["tables"])
    print(f"{command}: wrote {names} to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
