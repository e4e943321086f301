"""End-to-end check of the `proxy serve` entry point as a real process."""

from __future__ import annotations

import http.client
import json
import os
import signal
import subprocess
import sys
import time

import pytest

from paneltap.keys import generate_key_file
from paneltap.labkit import FixtureOrigin
from paneltap.registry.files import dump_entry

from .conftest import NOTICE_TEXT, standard_entries
from .netutil import proxy_request


@pytest.fixture
def serve_deployment(tmp_path):
    origin = FixtureOrigin()
    origin_addr = origin.start()

    data_dir = tmp_path / "data"
    entries_dir = data_dir / "whitelist" / "entries"
    entries_dir.mkdir(parents=True)
    for entry in standard_entries():
        dump_entry(entry, entries_dir / f"{entry.url}.yaml")
    keys_dir = tmp_path / "keys"
    generate_key_file(keys_dir / "storage.key")
    generate_key_file(keys_dir / "pseudonym.key")
    notice = tmp_path / "notice.txt"
    notice.write_text(NOTICE_TEXT)

    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "data_dir": str(data_dir),
                "proxy": {
                    "listen": "127.0.0.1:0",
                    "resolve": {
                        "shop.example": f"{origin_addr[0]}:{origin_addr[1]}",
                    },
                },
                "admin": {"listen": "127.0.0.1:0"},
                "keys": {
                    "storage_key_file": str(keys_dir / "storage.key"),
                    "pseudonym_key_file": str(keys_dir / "pseudonym.key"),
                },
                "identity_dir": str(tmp_path / "identity"),
                "notice_file": str(notice),
                "tls": {
                    "root_cert_file": str(tmp_path / "root-cert.pem"),
                    "root_key_file": str(tmp_path / "root-key.pem"),
                },
            }
        )
    )
    yield config_path, origin
    origin.stop()


def test_serve_process_end_to_end(serve_deployment):
    config_path, origin = serve_deployment
    base = [sys.executable, "-m", "paneltap.cli", "--config", str(config_path)]
    subprocess.run(
        base + ["--role", "working_group", "whitelist", "publish"],
        check=True,
        capture_output=True,
    )

    env = dict(os.environ, PYTHONUNBUFFERED="1")
    process = subprocess.Popen(
        base + ["--role", "working_group", "--format", "json-lines", "proxy", "serve"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        env=env,
        text=True,
    )
    try:
        line = process.stdout.readline()
        addresses = json.loads(line)
        proxy_addr = tuple(addresses["proxy"])
        admin_addr = tuple(addresses["admin"])

        # consent over the HTTP endpoint, then traffic through the proxy
        conn = http.client.HTTPConnection(admin_addr[0], admin_addr[1], timeout=10)
        conn.request("GET", "/api/notice")
        notice = json.loads(conn.getresponse().read())
        conn.request(
            "POST",
            "/api/consent",
            body=json.dumps(
                {
                    "participant_id": "p-serve",
                    "version": notice["version"],
                    "notice_hash": notice["notice_hash"],
                    "ack": True,
                }
            ),
            headers={"Content-Type": "application/json"},
        )
        granted = json.loads(conn.getresponse().read())
        assert granted["granted"] is True
        conn.close()

        status, _, body = proxy_request(
            proxy_addr, "http://shop.example/doc/serve-test", participant="p-serve"
        )
        assert status == 200 and body

        time.sleep(0.5)  # let the pipeline drain
        conn = http.client.HTTPConnection(admin_addr[0], admin_addr[1], timeout=10)
        conn.request("GET", "/metrics")
        metrics_text = conn.getresponse().read().decode()
        conn.close()
        counters = dict(
            line.split(" ") for line in metrics_text.strip().splitlines() if " " in line
        )
        assert int(counters["captures.stored"]) == 1
    finally:
        process.send_signal(signal.SIGTERM)
        try:
            process.wait(timeout=10)
        except subprocess.TimeoutExpired:
            process.kill()
            process.wait(timeout=5)
    assert process.returncode == 0
