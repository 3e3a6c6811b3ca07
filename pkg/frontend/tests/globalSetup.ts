// Spawns the fixture service once for the whole test run and hands its URL
// to the tests via vitest's provide/inject channel.

import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

const here = dirname(fileURLToPath(import.meta.url));

async function waitReady(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${url}/api/vessels`);
      if (res.ok) return;
      lastError = new Error(`status ${res.status}`);
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`fixture service never came up at ${url}: ${lastError}`);
}

export default async function setup(ctx: { provide(key: string, value: unknown): void }) {
  const port = 20000 + Math.floor(Math.random() * 20000);
  const url = `http://127.0.0.1:${port}`;
  const child: ChildProcess = spawn(
    "python3",
    [join(here, "fixture_service.py"), "--port", String(port)],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  const died = new Promise<never>((_, reject) => {
    child.on("exit", (code) =>
      reject(new Error(`fixture service exited early with code ${code}`)));
  });
  await Promise.race([waitReady(url, 45000), died]);
  ctx.provide("serviceUrl", url);
  return async () => {
    child.removeAllListeners("exit");
    child.kill("SIGTERM");
    await new Promise((resolve) => {
      child.on("exit", resolve);
      setTimeout(resolve, 3000);
    });
  };
}
