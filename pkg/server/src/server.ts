/**
 * Reference implementation of the tool wire protocol:
 *
 *   POST /invoke  {"query": "<string>"}  ->  200 {"answer": "<string>"}
 *   GET  /health                         ->  200 {"status": "ok"}
 *
 * Malformed bodies get a 400 with an error message; anything else is a
 * 404.  Handling is synchronous and single-request-at-a-time by design:
 * this is a test fixture and a template for wrapping real model
 * backends, not serving infrastructure.
 *
 *   node dist/src/server.js --table data.jsonl --port 8080
 */

import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import process from "node:process";

import { answerFor, loadTable, type AnswerTable } from "./table.js";

const MAX_BODY_BYTES = 1 << 20;

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    let size = 0;
    req.on("data", (chunk: Buffer) => {
      size += chunk.length;
      if (size > MAX_BODY_BYTES) {
        reject(new Error("request body too large"));
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    req.on("error", reject);
  });
}

function sendJson(res: ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, { "Content-Type": "application/json" });
  res.end(body);
}

export function buildServer(table: AnswerTable): Server {
  return createServer(async (req, res) => {
    if (req.method === "GET" && req.url === "/health") {
      sendJson(res, 200, { status: "ok", entries: table.entries.size });
      return;
    }
    if (req.method === "POST" && req.url === "/invoke") {
      let query: unknown;
      try {
        const body = await readBody(req);
        query = (JSON.parse(body) as Record<string, unknown>).query;
      } catch (err) {
        sendJson(res, 400, { error: `malformed request body: ${String(err)}` });
        return;
      }
      if (typeof query !== "string") {
        sendJson(res, 400, { error: 'body must be {"query": "<string>"}' });
        return;
      }
      sendJson(res, 200, { answer: answerFor(table, query) });
      return;
    }
    sendJson(res, 404, { error: `no route for ${req.method} ${req.url}` });
  });
}

export function serve(port: number, tablePath: string): Server {
  const table = loadTable(tablePath);
  const server = buildServer(table);
  server.listen(port);
  return server;
}

function parseArgs(argv: string[]): { port: number; table: string } {
  let port = 8080;
  let table = "";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--port") port = Number(argv[++i]);
    else if (argv[i] === "--table") table = argv[++i];
    else throw new Error(`unknown argument ${argv[i]}`);
  }
  if (!table) throw new Error("--table <dataset.jsonl> is required");
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`invalid port ${port}`);
  }
  return { port, table };
}

const entryPoint = process.argv[1] ?? "";
if (entryPoint.endsWith("server.js")) {
  let server: Server;
  try {
    const { port, table } = parseArgs(process.argv.slice(2));
    server = serve(port, table);
  } catch (err) {
    console.error(String(err));
    process.exit(2);
  }
  server.on("listening", () => {
    const address = server.address();
    const port = typeof address === "object" && address !== null ? address.port : "?";
    console.log(`reference-tool-server listening on port ${port}`);
  });
  server.on("error", (err) => {
    console.error(`failed to serve: ${String(err)}`);
    process.exit(1);
  });
}
