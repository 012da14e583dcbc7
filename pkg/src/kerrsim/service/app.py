"""FastAPI app exposing the sweep commands over HTTP.

The CLI talks to this app (in process by default), so the endpoint
behaviour mirrors the CLI contract: config documents validate exactly as
from YAML, bad configs are 422 with the validator's diagnostic, and an
integrator abort is a 500 tagged ``integration_failure``.
"""

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from kerrsim import __version__, presets
from kerrsim.commands import cmd_convergence_recheck, run_command
from kerrsim.config import COMMANDS, ConfigError, parse_config
from kerrsim.engine import IntegrationError
from kerrsim.service.schemas import (
    ConvergenceReport,
    HealthResponse,
    PresetInfo,
    RunRequest,
    RunResponse,
)

__all__ = ["create_app"]


def create_app() -> FastAPI:
    app = FastAPI(title="kerrsim", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(request, exc: ConfigError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(IntegrationError)
    async def integration_error(request, exc: IntegrationError):
        return JSONResponse(
            status_code=500,
            content={
                "error": "integration_failure",
                "detail": str(exc),
                "time": None if exc.time is None else float(exc.time),
            },
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/presets", response_model=list[PresetInfo])
    def list_presets() -> list[PresetInfo]:
        return [PresetInfo(name=name, command=presets.preset_command(name))
                for name in presets.PRESET_NAMES]

    # sync endpoint on purpose: runs sit in the worker threadpool instead
    # of blocking the event loop
    @app.post("/run/{command}", response_model=RunResponse)
    def run(command: str, req: RunRequest) -> RunResponse:
        if command not in COMMANDS:
            raise ConfigError(
                f"unknown command {command!r}; one of {COMMANDS}"
            )
        document = dict(req.config or {})
        if req.preset is not None:
            document["preset"] = req.preset
        if not document:
            raise ConfigError("request needs a config document, a preset, "
                              "or both")
        cfg = parse_config(
            document,
            command=command,
            check_convergence=req.check_convergence,
            kappa_convention=req.kappa_convention,
            threads=req.threads,
            check_positivity=req.check_positivity,
        )

        convergence = None
        if cfg.check_convergence:
            table, recheck = cmd_convergence_recheck(cfg)
            convergence = ConvergenceReport(
                passed=recheck.metadata["pass"],
                max_difference=recheck.metadata["max_difference"],
                threshold=recheck.metadata["threshold"],
                columns=list(recheck.columns),
                differences=recheck.to_json_dict()["rows"][0],
            )
        else:
            table = run_command(cfg)

        doc = table.to_json_dict()
        return RunResponse(command=cfg.command, columns=doc["columns"],
                           rows=doc["rows"], metadata=doc["metadata"],
                           convergence=convergence)

    return app
