/** Static file server with a /sessions proxy to the Python session service,
 * so the browser talks to one origin. No dependencies.
 *
 *   PORT            listen port (default 5173)
 *   MICROGOALS_API  upstream service (default http://127.0.0.1:8765)
 */

import http from "node:http";
import { readFile } from "node:fs/promises";
import { extname, join, resolve, sep } from "node:path";
import { fileURLToPath } from "node:url";

const API = process.env.MICROGOALS_API ?? "http://127.0.0.1:8765";
const PORT = Number(process.env.PORT ?? 5173);
const ROOT = resolve(fileURLToPath(new URL(".", import.meta.url)));

const TYPES = {
  ".html": "text/html; charset=utf-8",
  ".js": "text/javascript; charset=utf-8",
  ".css": "text/css; charset=utf-8",
  ".map": "application/json",
  ".json": "application/json",
  ".svg": "image/svg+xml",
};

async function proxy(req, res, url) {
  const chunks = [];
  for await (const chunk of req) chunks.push(chunk);
  try {
    const upstream = await fetch(API + url.pathname + url.search, {
      method: req.method,
      headers: {
        "content-type": req.headers["content-type"] ?? "application/json",
      },
      body: ["GET", "HEAD"].includes(req.method)
        ? undefined
        : Buffer.concat(chunks),
    });
    res.writeHead(upstream.status, {
      "content-type":
        upstream.headers.get("content-type") ?? "application/json",
    });
    res.end(await upstream.text());
  } catch {
    res.writeHead(502, { "content-type": "application/json" });
    res.end(
      JSON.stringify({
        detail: { field: "$", message: "session service unreachable" },
      }),
    );
  }
}

async function serveFile(res, pathname) {
  const rel = pathname === "/" ? "index.html" : pathname.slice(1);
  const path = join(ROOT, rel);
  if (!path.startsWith(ROOT + sep)) {
    res.writeHead(403);
    res.end();
    return;
  }
  try {
    const data = await readFile(path);
    res.writeHead(200, {
      "content-type": TYPES[extname(path)] ?? "application/octet-stream",
    });
    res.end(data);
  } catch {
    res.writeHead(404, { "content-type": "text/plain" });
    res.end("not found");
  }
}

const server = http.createServer((req, res) => {
  const url = new URL(req.url ?? "/", "http://localhost");
  if (url.pathname === "/sessions" || url.pathname.startsWith("/sessions/")) {
    void proxy(req, res, url);
  } else {
    void serveFile(res, url.pathname);
  }
});

server.listen(PORT, "127.0.0.1", () => {
  console.log(`farm-ui on http://127.0.0.1:${PORT} (service: ${API})`);
});
