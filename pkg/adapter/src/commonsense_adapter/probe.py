"""Conformance probe: replay a request fixture and audit the responses.

Checks schema (required fields, types), value ranges (probabilities in
[0, 1], non-empty generations) and the error envelope, and records
per-request latency.  An unreachable endpoint marks every probe failed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests


@dataclass
class ProbeResult:
    request: dict
    status: int | None
    latency_ms: float | None
    violations: list[str] = field(default_factory=list)
    response: dict | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class ProbeReport:
    endpoint: str
    results: list[ProbeResult]

    @property
    def violations(self) -> list[str]:
        out = []
        for i, r in enumerate(self.results):
            out.extend(f"request {i}: {v}" for v in r.violations)
        return out

    def to_text(self) -> str:
        lines = [f"probe report for {self.endpoint}"]
        passed = sum(1 for r in self.results if r.ok)
        lines.append(f"{passed}/{len(self.results)} probes clean")
        latencies = [r.latency_ms for r in self.results if r.latency_ms is not None]
        if latencies:
            lines.append(
                f"latency ms: min={min(latencies):.1f} max={max(latencies):.1f} "
                f"mean={sum(latencies) / len(latencies):.1f}"
            )
        for v in self.violations:
            lines.append(f"  violation: {v}")
        return "\n".join(lines) + "\n"


def load_fixture(path) -> list[dict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            out.append(json.loads(line))
    return out


def check_response(request: dict, status: int, body: dict) -> list[str]:
    violations = []
    if status == 200:
        if request.get("op") == "generate":
            text = body.get("generated_text")
            if not isinstance(text, str):
                violations.append("missing or non-string 'generated_text'")
            elif not text.strip():
                violations.append("'generated_text' is empty")
        elif request.get("op") == "word_prob":
            prob = body.get("prob")
            if not isinstance(prob, (int, float)) or isinstance(prob, bool):
                violations.append("missing or non-numeric 'prob'")
            elif not 0.0 <= float(prob) <= 1.0:
                violations.append(f"'prob' outside [0, 1]: {prob}")
        else:
            violations.append(f"expected an error for op {request.get('op')!r}, got 200")
    else:
        if "error" not in body or "detail" not in body:
            violations.append(f"error response (status {status}) missing 'error'/'detail'")
    return violations


def probe(endpoint: str, fixture_path, timeout: float = 30.0) -> ProbeReport:
    requests_fixture = load_fixture(fixture_path)
    results = []
    for req in requests_fixture:
        started = time.perf_counter()
        try:
            resp = requests.post(endpoint.rstrip("/") + "/", json=req, timeout=timeout)
            latency = (time.perf_counter() - started) * 1000.0
            try:
                body = resp.json()
            except ValueError:
                results.append(
                    ProbeResult(req, resp.status_code, latency, ["response is not JSON"])
                )
                continue
            violations = check_response(req, resp.status_code, body)
            results.append(ProbeResult(req, resp.status_code, latency, violations, body))
        except requests.RequestException as exc:
            results.append(ProbeResult(req, None, None, [f"unreachable: {exc}"]))
    return ProbeReport(endpoint=endpoint, results=results)
