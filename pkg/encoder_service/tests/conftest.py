import socket
import sys
import threading
import time
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
SERVICE_ROOT = HERE.parent
REPO_ROOT = SERVICE_ROOT.parent

sys.path.insert(0, str(SERVICE_ROOT / "src"))
# the primary package publishes the wire-protocol conformance kit
sys.path.insert(0, str(REPO_ROOT / "src"))

CHECKPOINT = SERVICE_ROOT / "fixtures" / "tiny_encoder.pt"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveService:
    def __init__(self, checkpoint=CHECKPOINT):
        import uvicorn

        from encoder_service.server import create_app

        self.port = free_port()
        config = uvicorn.Config(
            create_app(checkpoint), host="127.0.0.1", port=self.port, log_level="error"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        deadline = time.time() + 15
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("service did not start in time")
            time.sleep(0.05)
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture(scope="session")
def service():
    with LiveService() as live:
        yield live
