"""Sandboxed code execution orchestration.

Three executors share one envelope contract:

* ``LocalPythonExecutor`` runs code directly in a throwaway directory with
  wall-clock and memory limits (inline runner, no external process pool).
* ``RunnerPoolExecutor`` drives a pool of warm external runner processes
  over a newline-delimited JSON protocol (one request line in, one
  envelope line out).
* ``ScriptedExecutor`` replays canned envelopes for deterministic tests.

All runtime failures are encoded in the returned envelope; only startup
problems (missing runner) raise.
"""

from __future__ import annotations

import json
import os
import queue
import resource
import signal
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from importlib import resources as importlib_resources
from typing import Callable, Optional

__all__ = [
    "ExecutionRequest",
    "RunnerUnavailable",
    "PoolTimeout",
    "LocalPythonExecutor",
    "RunnerPoolExecutor",
    "ScriptedExecutor",
    "build_envelope",
    "envelope_schema",
    "health_check",
]

DEFAULT_TIMEOUT = 10.0
DEFAULT_MAX_OUTPUT = 64 * 1024
DEFAULT_MEMORY_BYTES = 512 * 1024 * 1024
KILL_GRACE = 0.5
TRUNCATION_MARKER = "…[truncated]"


@dataclass(frozen=True)
class ExecutionRequest:
    code: str
    stdin: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    max_output: int = DEFAULT_MAX_OUTPUT

    def __post_init__(self):
        assert self.timeout > 0


class RunnerUnavailable(RuntimeError):
    pass


class PoolTimeout(RuntimeError):
    pass


def _truncate(s: str, limit: int) -> str:
    if len(s.encode("utf-8", errors="replace")) <= limit:
        return s
    clipped = s.encode("utf-8", errors="replace")[:limit].decode("utf-8", errors="ignore")
    return clipped + TRUNCATION_MARKER


def build_envelope(
    *,
    code: str,
    stdin: Optional[str],
    temp_file: str,
    working_directory: str,
    command: list[str],
    start_time: float,
    execution_time: float,
    total_time: float,
    return_code: Optional[int],
    stdout: str,
    stderr: str,
    status: str,
    warnings: Optional[list[str]] = None,
) -> dict:
    """Assemble the execution envelope with the exact key set and order the
    wire format requires."""
    run_status = {"Success": "Finished", "Timeout": "Timeout", "Error": "Error"}[status]
    return {
        "compile_result": None,
        "execution_info": {
            "code_length": len(code),
            "execution_phases": ["execution_start", "execution_end"],
            "execution_start_time": start_time,
            "language": "python",
            "stdin_length": len(stdin) if stdin is not None else 0,
            "stdin_provided": stdin is not None,
            "temp_file": temp_file,
            "total_execution_time": total_time,
            "warnings": warnings or [],
        },
        "run_result": {
            "command": command,
            "execution_time": execution_time,
            "exit_success": return_code == 0,
            "return_code": return_code,
            "status": run_status,
            "stderr": stderr,
            "stdin_used": stdin if stdin is not None else "None",
            "stdout": stdout,
            "working_directory": working_directory,
        },
        "status": status,
    }


def envelope_schema() -> dict:
    with importlib_resources.files("toolverify.schemas").joinpath(
        "execution_envelope.schema.json"
    ).open("r", encoding="utf-8") as f:
        return json.load(f)


_SAFE_ENV_KEYS = ("PATH", "LANG", "LC_ALL", "PYTHONIOENCODING", "HOME", "TMPDIR")


def _child_env(tmpdir: str) -> dict:
    env = {k: os.environ[k] for k in _SAFE_ENV_KEYS if k in os.environ}
    env["HOME"] = tmpdir
    env["TMPDIR"] = tmpdir
    return env


class LocalPythonExecutor:
    """Runs code with the local interpreter in an ephemeral directory.

    Each execution gets its own temp dir (cwd), a scrubbed environment, a
    memory rlimit, and a hard wall-clock kill.
    """

    def __init__(self, python: Optional[str] = None, memory_bytes: int = DEFAULT_MEMORY_BYTES):
        self.python = python or sys.executable
        self.memory_bytes = memory_bytes

    def _preexec(self):
        os.setsid()
        try:
            resource.setrlimit(resource.RLIMIT_AS, (self.memory_bytes, self.memory_bytes))
        except (ValueError, OSError):
            pass

    def execute(self, req: ExecutionRequest) -> dict:
        start_wall = time.time()
        tmpdir = tempfile.mkdtemp(prefix="tvx_")
        fd, path = tempfile.mkstemp(suffix=".py", dir=tmpdir)
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(req.code)
        command = [self.python, path]
        status = "Success"
        stdout = stderr = ""
        return_code: Optional[int] = None
        t0 = time.monotonic()
        try:
            proc = subprocess.Popen(
                command,
                cwd=tmpdir,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env=_child_env(tmpdir),
                preexec_fn=self._preexec,
                text=True,
            )
        except OSError as exc:
            raise RunnerUnavailable(f"cannot launch {self.python}: {exc}")
        try:
            stdout, stderr = proc.communicate(input=req.stdin, timeout=req.timeout)
            return_code = proc.returncode
            if return_code != 0:
                status = "Error"
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            try:
                stdout, stderr = proc.communicate(timeout=KILL_GRACE)
            except subprocess.TimeoutExpired:
                stdout, stderr = "", ""
            status = "Timeout"
            return_code = proc.returncode
        elapsed = time.monotonic() - t0
        return build_envelope(
            code=req.code,
            stdin=req.stdin,
            temp_file=path,
            working_directory=tmpdir,
            command=command,
            start_time=start_wall,
            execution_time=elapsed,
            total_time=time.time() - start_wall,
            return_code=return_code,
            stdout=_truncate(stdout or "", req.max_output),
            stderr=_truncate(stderr or "", req.max_output),
            status=status,
        )


class _RunnerHandle:
    def __init__(self, command: list[str]):
        try:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise RunnerUnavailable(f"cannot spawn runner {command!r}: {exc}")

    def round_trip(self, request: dict, deadline: float) -> dict:
        line = json.dumps(request, ensure_ascii=False)
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
            reply = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise RunnerUnavailable(f"runner pipe failure: {exc}")
        if not reply:
            raise RunnerUnavailable("runner closed its output stream")
        return json.loads(reply)

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self):
        if self.alive():
            self.proc.terminate()
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class RunnerPoolExecutor:
    """Pool of warm runner processes speaking newline-delimited JSON.

    Checkout blocks up to ``checkout_timeout``; each execution owns one
    runner exclusively for its duration.
    """

    def __init__(self, command: list[str], pool_size: int = 2, checkout_timeout: float = 30.0):
        self.command = list(command)
        self.checkout_timeout = checkout_timeout
        self._pool: queue.Queue[_RunnerHandle] = queue.Queue()
        self._lock = threading.Lock()
        for _ in range(max(1, pool_size)):
            self._pool.put(_RunnerHandle(self.command))

    def execute(self, req: ExecutionRequest) -> dict:
        try:
            handle = self._pool.get(timeout=self.checkout_timeout)
        except queue.Empty:
            raise PoolTimeout(f"no runner available within {self.checkout_timeout}s")
        try:
            if not handle.alive():
                handle = _RunnerHandle(self.command)
            request = {
                "code": req.code,
                "stdin": req.stdin,
                "timeout": req.timeout,
                "max_output": req.max_output,
            }
            return handle.round_trip(request, deadline=req.timeout + KILL_GRACE)
        except RunnerUnavailable:
            handle.close()
            handle = _RunnerHandle(self.command)
            raise
        finally:
            self._pool.put(handle)

    def close(self):
        while True:
            try:
                self._pool.get_nowait().close()
            except queue.Empty:
                break


class ScriptedExecutor:
    """Deterministic stub: maps code strings to canned envelopes.

    Unknown code falls back to an empty Success envelope (or a provided
    factory), keeping tests hermetic.
    """

    def __init__(self, script: Optional[dict[str, dict]] = None, fallback: Optional[Callable] = None):
        self.script = dict(script or {})
        self.fallback = fallback
        self.calls: list[ExecutionRequest] = []

    def add(self, code: str, stdout: str, status: str = "Success", return_code: int = 0):
        self.script[code] = build_envelope(
            code=code,
            stdin=None,
            temp_file="/tmp/scripted.py",
            working_directory="/tmp",
            command=["python3", "/tmp/scripted.py"],
            start_time=0.0,
            execution_time=0.0,
            total_time=0.0,
            return_code=return_code,
            stdout=stdout,
            stderr="",
            status=status,
        )

    def execute(self, req: ExecutionRequest) -> dict:
        self.calls.append(req)
        if req.code in self.script:
            return self.script[req.code]
        if self.fallback is not None:
            return self.fallback(req)
        self.add(req.code, "")
        return self.script[req.code]


def health_check(executor, timeout: float = 5.0) -> dict:
    """Run a canary through the executor and validate the envelope shape."""
    import jsonschema

    start = time.monotonic()
    code = "import sys; print(sys.version.split()[0])"
    try:
        envelope = executor.execute(ExecutionRequest(code=code, timeout=timeout))
    except (RunnerUnavailable, PoolTimeout):
        raise
    except Exception as exc:
        raise RunnerUnavailable(f"health check failed: {exc}")
    latency = time.monotonic() - start
    if latency > timeout:
        raise RunnerUnavailable(f"health check exceeded {timeout}s ({latency:.2f}s)")
    jsonschema.validate(envelope, envelope_schema())
    if envelope["status"] != "Success":
        raise RunnerUnavailable(f"canary returned status {envelope['status']}")
    return {"version": envelope["run_result"]["stdout"].strip(), "latency": latency}
