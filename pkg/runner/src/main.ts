#!/usr/bin/env node
/**
 * Serve loop: newline-delimited JSON requests on stdin, one execution
 * envelope per line on stdout.  Requests are handled strictly in order
 * (the orchestrator owns one runner exclusively per execution).  EOF on
 * stdin ends the loop with exit code 0.
 */

import { createInterface } from "node:readline";

import { executeRequest } from "./execute.js";
import { buildEnvelope } from "./protocol.js";

export async function serveLoop(
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
): Promise<void> {
  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    if (line.trim() === "") {
      continue;
    }
    let envelope;
    try {
      envelope = await executeRequest(JSON.parse(line));
    } catch (err) {
      envelope = buildEnvelope({
        code: "",
        stdin: null,
        tempFile: "",
        workingDirectory: "",
        command: [],
        startTime: Date.now() / 1000,
        executionTime: 0,
        totalTime: 0,
        returnCode: null,
        stdout: "",
        stderr: `malformed request line: ${(err as Error).message}`,
        status: "Error",
      });
    }
    output.write(JSON.stringify(envelope) + "\n");
  }
}

const isMain =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);

if (isMain) {
  serveLoop(process.stdin, process.stdout).then(
    () => process.exit(0),
    (err) => {
      process.stderr.write(`runner fatal: ${err}\n`);
      process.exit(1);
    },
  );
}
