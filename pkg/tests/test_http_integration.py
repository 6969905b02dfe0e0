"""End-to-end check of the HTTP tool backend against the reference
lookup-table server (the separately built Node service under server/).

Skipped when node or the built server bundle is unavailable; the rest of
the suite does not depend on this component.
"""

import json
import shutil
import socket
import subprocess
import time
from pathlib import Path

import pytest
import requests

from toolamp.amplifier import score_candidate
from toolamp.composition import Leaf
from toolamp.data import save_dataset
from toolamp.simenv import SimEnvSpec, gen_simenv
from toolamp.toolkit import (
    CostLedger,
    ToolDescriptor,
    ToolRegistry,
    invoke,
    register_tool,
    table_descriptor,
)

SERVER_JS = Path(__file__).resolve().parents[1] / "server" / "dist" / "src" / "server.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not SERVER_JS.exists(),
    reason="reference tool server not built (run `npm run build` in server/)",
)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture()
def env(tmp_path):
    spec = SimEnvSpec(
        n_instances=50,
        seed=23,
        task_kind="molecule_design",
        alphabet="CNO()=1c",
        answer_length=12,
    )
    instances, _ = gen_simenv(spec)
    table_path = tmp_path / "table.jsonl"
    save_dataset(instances, table_path)
    return instances, table_path


@pytest.fixture()
def server(env):
    _, table_path = env
    port = free_port()
    proc = subprocess.Popen(
        ["node", str(SERVER_JS), "--table", str(table_path), "--port", str(port)],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    base = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 10
        while True:
            try:
                if requests.get(f"{base}/health", timeout=1).status_code == 200:
                    break
            except requests.RequestException:
                if time.monotonic() > deadline:
                    proc.kill()
                    raise RuntimeError(f"server did not come up: {proc.stderr.read()}")
                time.sleep(0.05)
        yield base
    finally:
        proc.terminate()
        proc.wait(timeout=5)


def http_descriptor(url: str) -> ToolDescriptor:
    return ToolDescriptor(
        tool_id="remote_0",
        public_name="remote_0",
        description="Reference lookup server",
        backend="http",
        backend_params={"url": url, "timeout_s": 5.0},
    )


class TestHttpBackend:
    def test_invoke_round_trip(self, env, server):
        instances, _ = env
        registry = ToolRegistry()
        register_tool(registry, http_descriptor(server))
        answer = invoke(registry, "remote_0", instances[0].input, CostLedger(), 0)
        assert answer == instances[0].gold

    def test_unknown_query_uses_server_fallback(self, env, server):
        registry = ToolRegistry()
        register_tool(registry, http_descriptor(server))
        assert invoke(registry, "remote_0", "never-seen", CostLedger(), 0) == "UNKNOWN"

    def test_health_endpoint(self, env, server):
        assert requests.get(f"{server}/health", timeout=2).json()["status"] == "ok"

    def test_malformed_body_rejected(self, env, server):
        response = requests.post(f"{server}/invoke", data="not json", timeout=2)
        assert response.status_code == 400


def test_acceptance_http_scoring_matches_in_process_table(env, server):
    """[ACCEPTANCE] scoring through the wire equals in-process scoring."""
    instances, _ = env
    gold = {inst.input: inst.gold for inst in instances}

    remote = ToolRegistry()
    register_tool(remote, http_descriptor(server))
    local = ToolRegistry()
    register_tool(local, table_descriptor("local_0", gold))

    via_http = score_candidate(Leaf("remote", 0), instances, "bleu2", 3, remote)
    via_table = score_candidate(Leaf("local", 0), instances, "bleu2", 3, local)
    try:
        assert via_http.means == via_table.means
        assert via_http.fitness == via_table.fitness == 1.0
        assert via_http.failures == via_table.failures == 0
    except BaseException:
        print("[ACCEPTANCE] FAIL  http backend scoring == in-process table scoring")
        raise
    print("[ACCEPTANCE] PASS  http backend scoring == in-process table scoring")
