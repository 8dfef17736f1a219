"""Minimal n8n REST client: create a workflow, then activate it.

Routes and headers are listed in ``docs/n8n_client.md``.  There is no retry
policy; every failure surfaces as a :class:`~fault2flow.errors.PushError`.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

import httpx

from .errors import AuthError, NetworkError, PushError, SchemaRejected

API_KEY_HEADER = "X-N8N-API-KEY"
DEFAULT_TIMEOUT = 10.0


class N8nClient:
    def __init__(
        self,
        endpoint: str,
        api_key: str,
        timeout: float = DEFAULT_TIMEOUT,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self._client = httpx.Client(
            base_url=self.endpoint,
            headers={API_KEY_HEADER: api_key, "Accept": "application/json"},
            timeout=timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, path: str, body: Any = None) -> dict:
        try:
            response = self._client.post(path, json=body)
        except httpx.TransportError as exc:
            raise NetworkError(f"POST {self.endpoint}{path}: {type(exc).__name__}: {exc}") from None
        status = response.status_code
        if status in (401, 403):
            raise AuthError(f"POST {path}: HTTP {status} (check the API key)")
        if 400 <= status < 500:
            raise SchemaRejected(status, response.text)
        if status >= 300:
            raise PushError(f"POST {path}: HTTP {status}: {response.text}")
        try:
            return response.json()
        except json.JSONDecodeError:
            raise PushError(f"POST {path}: response is not JSON") from None

    def create_workflow(self, document: Mapping[str, Any]) -> str:
        body = {
            "name": document["name"],
            "nodes": document["nodes"],
            "connections": document["connections"],
            "settings": {"executionOrder": "v1"},
        }
        reply = self._post("/api/v1/workflows", body)
        workflow_id = reply.get("id")
        if not isinstance(workflow_id, (str, int)):
            raise PushError("workflow creation reply carries no id")
        return str(workflow_id)

    def activate(self, workflow_id: str) -> None:
        self._post(f"/api/v1/workflows/{workflow_id}/activate")


def push_workflow(
    document: Mapping[str, Any],
    endpoint: str,
    api_key: str,
    timeout: float = DEFAULT_TIMEOUT,
    transport: httpx.BaseTransport | None = None,
) -> str:
    """Create and activate ``document`` on the host; returns the remote id."""
    with N8nClient(endpoint, api_key, timeout, transport) as client:
        workflow_id = client.create_workflow(document)
        client.activate(workflow_id)
    return workflow_id
