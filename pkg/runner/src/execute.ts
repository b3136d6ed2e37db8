/**
 * Executes one payload: writes the code to a file inside a fresh throwaway
 * directory, spawns the interpreter in its own process group with a
 * whitelisted environment, enforces a wall-clock kill and an output cap,
 * and reports everything in the execution envelope.  Runtime failures are
 * encoded in the envelope, never thrown.
 */

import { spawn } from "node:child_process";
import { mkdtemp, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import path from "node:path";

import {
  ExecutionEnvelope,
  RunnerRequest,
  TopStatus,
  buildEnvelope,
  parseRequest,
  truncate,
} from "./protocol.js";

const KILL_GRACE_MS = 500;
const ENV_WHITELIST = ["PATH", "LANG", "LC_ALL", "PYTHONIOENCODING", "HOME", "TMPDIR"];

export const PYTHON = process.env.RUNNER_PYTHON ?? "python3";

function childEnv(workDir: string): NodeJS.ProcessEnv {
  const env: NodeJS.ProcessEnv = {};
  for (const key of ENV_WHITELIST) {
    if (process.env[key] !== undefined) {
      env[key] = process.env[key];
    }
  }
  env.HOME = workDir;
  env.TMPDIR = workDir;
  return env;
}

function killTree(pid: number): void {
  try {
    process.kill(-pid, "SIGKILL"); // negative pid: whole process group
  } catch {
    try {
      process.kill(pid, "SIGKILL");
    } catch {
      // already gone
    }
  }
}

export async function executeRequest(raw: unknown): Promise<ExecutionEnvelope> {
  const startWall = Date.now() / 1000;

  let req: Required<RunnerRequest>;
  try {
    req = parseRequest(raw);
  } catch (err) {
    return buildEnvelope({
      code: "",
      stdin: null,
      tempFile: "",
      workingDirectory: "",
      command: [],
      startTime: startWall,
      executionTime: 0,
      totalTime: 0,
      returnCode: null,
      stdout: "",
      stderr: `malformed request: ${(err as Error).message}`,
      status: "Error",
    });
  }

  const workDir = await mkdtemp(path.join(tmpdir(), "pyrun_"));
  const tempFile = path.join(workDir, "payload.py");
  await writeFile(tempFile, req.code, "utf-8");
  const command = [PYTHON, tempFile];

  const t0 = process.hrtime.bigint();
  const result = await runChild(command, workDir, req);
  const executionTime = Number(process.hrtime.bigint() - t0) / 1e9;

  return buildEnvelope({
    code: req.code,
    stdin: req.stdin,
    tempFile,
    workingDirectory: workDir,
    command,
    startTime: startWall,
    executionTime,
    totalTime: Date.now() / 1000 - startWall,
    returnCode: result.returnCode,
    stdout: truncate(result.stdout, req.max_output),
    stderr: truncate(result.stderr, req.max_output),
    status: result.status,
  });
}

interface ChildResult {
  returnCode: number | null;
  stdout: string;
  stderr: string;
  status: TopStatus;
}

function runChild(
  command: string[],
  workDir: string,
  req: Required<RunnerRequest>,
): Promise<ChildResult> {
  return new Promise((resolve) => {
    const child = spawn(command[0], command.slice(1), {
      cwd: workDir,
      env: childEnv(workDir),
      detached: true, // own process group, so the timeout kill reaps children
      stdio: ["pipe", "pipe", "pipe"],
    });

    let stdout = "";
    let stderr = "";
    let timedOut = false;
    let settled = false;

    // collect a little beyond the cap so truncate() can add its marker
    const capture = (sink: "out" | "err") => (chunk: Buffer) => {
      const text = chunk.toString("utf-8");
      if (sink === "out" && stdout.length <= req.max_output) {
        stdout += text;
      } else if (sink === "err" && stderr.length <= req.max_output) {
        stderr += text;
      }
    };
    child.stdout.on("data", capture("out"));
    child.stderr.on("data", capture("err"));

    const timer = setTimeout(() => {
      timedOut = true;
      if (child.pid !== undefined) {
        killTree(child.pid);
      }
      // if close never arrives (pathological), settle after the grace period
      setTimeout(() => {
        if (!settled) {
          settled = true;
          resolve({ returnCode: null, stdout, stderr, status: "Timeout" });
        }
      }, KILL_GRACE_MS).unref();
    }, req.timeout * 1000);

    child.on("error", (err) => {
      clearTimeout(timer);
      if (!settled) {
        settled = true;
        resolve({
          returnCode: null,
          stdout,
          stderr: stderr + `spawn failure: ${err.message}`,
          status: "Error",
        });
      }
    });

    child.on("close", (code) => {
      clearTimeout(timer);
      if (settled) {
        return;
      }
      settled = true;
      if (timedOut) {
        resolve({ returnCode: code, stdout, stderr, status: "Timeout" });
      } else if (code === 0) {
        resolve({ returnCode: code, stdout, stderr, status: "Success" });
      } else {
        resolve({ returnCode: code, stdout, stderr, status: "Error" });
      }
    });

    if (req.stdin !== null) {
      child.stdin.write(req.stdin);
    }
    child.stdin.end();
  });
}
