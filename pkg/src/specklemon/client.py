"""Client layer the CLI talks through.

Without a server URL the request models are dispatched straight to the
service handlers in-process; with ``--server`` the same payloads go over
HTTP, so a long-running service and the local path behave identically.
"""

import httpx
from pydantic import BaseModel

from .config import ConfigError
from . import service

__all__ = ["ClientError", "HarnessClient"]


class ClientError(RuntimeError):
    """Request failed; ``errors`` lists validation problems when present."""

    def __init__(self, message: str, errors: "list[str] | None" = None):
        super().__init__(message)
        self.errors = errors or []


_ROUTES = {
    "synth": (service.handle_synth, "/synth", service.SynthResponse),
    "train": (service.handle_train, "/train", service.TrainResponse),
    "eval": (service.handle_eval, "/eval", service.EvalResponse),
    "bench": (service.handle_bench, "/bench", service.BenchResponse),
    "predict": (service.handle_predict, "/predict", service.PredictResponse),
}


class HarnessClient:
    def __init__(self, server: "str | None" = None, timeout: float = 24 * 3600.0):
        self.server = server.rstrip("/") if server else None
        self.timeout = timeout

    def call(self, name: str, request: BaseModel) -> BaseModel:
        handler, route, response_model = _ROUTES[name]
        if self.server is None:
            try:
                return handler(request)
            except ConfigError as exc:
                raise ClientError("invalid configuration", errors=exc.errors) from exc
            except service._DOMAIN_ERRORS as exc:
                raise ClientError(str(exc)) from exc
        with httpx.Client(base_url=self.server, timeout=self.timeout) as client:
            resp = client.post(route, json=request.model_dump())
            if resp.status_code == 422:
                detail = resp.json().get("detail", {})
                errors = detail.get("errors") if isinstance(detail, dict) else None
                raise ClientError("invalid configuration", errors=errors or [str(detail)])
            if resp.status_code != 200:
                try:
                    detail = resp.json().get("detail", resp.text)
                except ValueError:
                    detail = resp.text
                raise ClientError(f"server returned {resp.status_code}: {detail}")
            return response_model.model_validate(resp.json())

    def synth(self, request: "service.SynthRequest") -> "service.SynthResponse":
        return self.call("synth", request)

    def train(self, request: "service.TrainRequest") -> "service.TrainResponse":
        return self.call("train", request)

    def eval(self, request: "service.EvalRequest") -> "service.EvalResponse":
        return self.call("eval", request)

    def bench(self, request: "service.BenchRequest") -> "service.BenchResponse":
        return self.call("bench", request)

    def predict(self, request: "service.PredictRequest") -> "service.PredictResponse":
        return self.call("predict", request)
