"""Command line front end.

The CLI is a thin client of the HTTP service: it reads the YAML document,
posts it to ``/run/<command>`` (in process unless ``--server`` points at a
running instance) and writes the returned table. Result rows go to
``--out`` or stdout; summary and diagnostics go to stderr so piped stdout
stays a clean table.

Exit codes: 0 success, 2 config error, 3 integration failure,
4 convergence recheck failed, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import yaml

from kerrsim import __version__
from kerrsim.config import COMMANDS, KAPPA_CONVENTIONS
from kerrsim.table import table_from_json_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_CONVERGENCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrsim",
        description="simulator and protocol sweeps for a quadratically "
                    "coupled photon-phonon converter",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                metavar="command")

    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", required=True, metavar="PATH",
                       help="YAML config document")
        p.add_argument("--out", default=None, metavar="PATH",
                       help="write the result table here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="table format (default csv)")
        p.add_argument("--check-convergence", action="store_const",
                       const=True, default=None,
                       help="rerun at raised truncations and report the "
                            "difference")
        p.add_argument("--kappa-convention", choices=KAPPA_CONVENTIONS,
                       default=None,
                       help="which coupling scales the photon loss rate")
        p.add_argument("--threads", type=int, default=None, metavar="N",
                       help="worker pool size for independent runs")
        p.add_argument("--server", default=None, metavar="URL",
                       help="base URL of a running service (default: run "
                            "in process)")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


class ConfigReadError(Exception):
    """Config-level CLI failure, mapped to exit code 2."""


def _load_document(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigReadError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigReadError(f"config {path} is not valid YAML: {exc}")
    if document is None:
        raise ConfigReadError(f"config {path} is empty")
    return document


def _open_client(server: Optional[str]):
    if server is not None:
        import httpx

        # sweeps can legitimately run for minutes
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # the bundled test client warns about its own backing library;
        # that is not something a CLI user can act on
        warnings.filterwarnings("ignore", message=".*testclient.*",
                                category=UserWarning)
        warnings.filterwarnings("ignore", message=".*httpx.*",
                                category=UserWarning)
        from fastapi.testclient import TestClient

    from kerrsim.service import create_app

    return TestClient(create_app())


def _error_detail(resp) -> str:
    try:
        payload = resp.json()
    except ValueError:
        return resp.text
    if isinstance(payload, dict) and "detail" in payload:
        return str(payload["detail"])
    return str(payload)


def _print_summary(body: dict) -> None:
    meta = body.get("metadata") or {}
    bits = [f"{body['command']}: {len(body['rows'])} rows"]
    if meta.get("preset"):
        bits.append(f"preset {meta['preset']}")
    if meta.get("f_max") is not None:
        bits.append(f"F max {meta['f_max']:.6g} at t = {meta['t_at_max']:.6g}")
    if meta.get("n_singular"):
        bits.append(f"{meta['n_singular']} singular point(s)")
    if "deviations_decreasing" in meta:
        bits.append(f"deviations decreasing: {meta['deviations_decreasing']}")
    print("; ".join(bits), file=sys.stderr)

    f_c_max = meta.get("f_c_max")
    if f_c_max:
        def port_line(label, ports):
            parts = [f"{name} {v['value']:.4g} at t = {v['t']:.4g}"
                     for name, v in sorted(ports.items())]
            prefix = f"{label}: " if label else ""
            print(f"  {prefix}{'; '.join(parts)}", file=sys.stderr)

        flat = any(isinstance(v, dict) and "value" in v
                   for v in f_c_max.values())
        if flat:
            port_line(None, f_c_max)
        else:
            for label, ports in f_c_max.items():
                port_line(label, ports)


def _run_subcommand(args) -> int:
    try:
        document = _load_document(args.config)
    except ConfigReadError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG

    request = {"config": document}
    if args.check_convergence is not None:
        request["check_convergence"] = args.check_convergence
    if args.kappa_convention is not None:
        request["kappa_convention"] = args.kappa_convention
    if args.threads is not None:
        request["threads"] = args.threads

    client = _open_client(args.server)
    try:
        resp = client.post(f"/run/{args.subcommand}", json=request)
    except Exception as exc:
        print(f"request failed: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()

    if resp.status_code == 422:
        print(f"config error: {_error_detail(resp)}", file=sys.stderr)
        return EXIT_CONFIG
    if resp.status_code == 500:
        try:
            payload = resp.json()
        except ValueError:
            payload = {}
        if isinstance(payload, dict) \
                and payload.get("error") == "integration_failure":
            t = payload.get("time")
            where = "" if t is None else f" at t = {t:g}"
            print(f"integration failure{where}: {payload.get('detail')}",
                  file=sys.stderr)
            return EXIT_INTEGRATION
        print(f"server error: {resp.text}", file=sys.stderr)
        return 1
    if resp.status_code != 200:
        print(f"unexpected response {resp.status_code}: {resp.text}",
              file=sys.stderr)
        return 1

    body = resp.json()
    table = table_from_json_dict(body)
    _print_summary(body)

    if args.out is not None:
        table.write(args.out, fmt=args.format)
        print(f"wrote {len(table.rows)} rows to {args.out}", file=sys.stderr)
    else:
        text = table.to_csv() if args.format == "csv" else table.to_json()
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")

    convergence = body.get("convergence")
    if convergence is not None:
        status = "PASS" if convergence["passed"] else "FAIL"
        print(
            f"convergence recheck {status}: max difference "
            f"{convergence['max_difference']:.3e} "
            f"(threshold {convergence['threshold']:.0e})",
            file=sys.stderr,
        )
        if not convergence["passed"]:
            return EXIT_CONVERGENCE
    return EXIT_OK


def _serve(args) -> int:
    import uvicorn

    from kerrsim.service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "serve":
        return _serve(args)
    return _run_subcommand(args)


if __name__ == "__main__":
    sys.exit(main())
